//! Copy-and-paste augmentation for binary segmentation datasets in which the
//! source mask is dilated before copying, so the pasted object carries the
//! tissue context around the annotated region.
//!
//! The crate is organised bottom-up:
//!
//! - [`raster`]: image, mask and soft-mask containers plus the element-wise
//!   algebra (`⊙`, `⊕`, `⊖`, clamping).
//! - [`morphology`]: structuring elements, dilation and Gaussian blur.
//! - [`naive_aug`]: paired flips, rotations, resize-pad and optical jitter.
//! - [`cpd`]: the copy step, the paste step and the full augmentation.
//! - [`dataset`]: slide patchification, background filtering, patient-level
//!   splitting, resizing and PNG/manifest persistence.
//! - [`metrics`]: Dice, IoU and pixel accuracy.
//! - [`cli`]: the `cpd` command-line front end.
//!
//! Raster math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision. The command-line tool works in `f32`.
//!
//! ```
//! use cp_dilatation::{cpd, morphology, BinaryMask, Image};
//!
//! let image = Image::filled(16, 16, [0.8, 0.5, 0.6]);
//! let mut mask = BinaryMask::zeros(16, 16);
//! mask.set(8, 8, true);
//! let element = morphology::make_element("DILATE".parse::<morphology::KernelShape>()
//!     .map(|shape| morphology::KernelSpec { shape, size: 5 })
//!     .unwrap());
//! let copy = cpd::copy_step(&image, &mask, &element).unwrap();
//! assert_eq!(copy.dilated_mask.count_ones(), 9);
//! ```

pub mod cli;
pub mod cpd;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod morphology;
pub mod naive_aug;
pub mod raster;
pub mod resize;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use raster::{BinaryMask, Planar, RasterImage, SamplePair, SignedRaster, SoftMask};
pub use scalar::Scalar;

pub type Image = RasterImage<f32>;
pub type Image64 = RasterImage<f64>;
pub type Alpha = SoftMask<f32>;
pub type Alpha64 = SoftMask<f64>;
pub type Pair = SamplePair<f32>;
pub type Pair64 = SamplePair<f64>;
