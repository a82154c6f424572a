//! Copy step and paste step of the dilated copy-paste augmentation.
//!
//! Copy: the source mask is dilated with a structuring element so the copied
//! object carries the context around the annotated region,
//! `M_D = dilate(M_src, K)` and `O = X_src ⊙ M_D`.
//!
//! Paste: the object is composited over the target through a blurred alpha,
//! `X_new = (1 - M_D) ⊙ X_tar ⊕ B(M_D) ⊙ O`, and the new annotation keeps the
//! un-dilated source mask, `M_new = min(max(M_tar ⊖ M_D, 0) ⊕ M_src, 1)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{dilate, gaussian_blur, make_element, KernelShape, KernelSpec, StructuringElement};
use crate::naive_aug::{apply_naive, NaiveAugConfig};
use crate::raster::{clamp, ew_add, ew_mul, ew_sub, BinaryMask, RasterImage, SamplePair, SignedRaster};
use crate::rng::{derive_seed, seeded, GATE_STREAM, SOURCE_STREAM};
use crate::scalar::Scalar;

/// Default probability of applying the copy-paste step to a sample.
pub const DEFAULT_P_CPD: f64 = 0.5;

/// Kernel, blur and application probability of the copy-paste step.
///
/// Parses from the `KERNEL-SIZE-SIGMA` shorthand (`DILATE-10-0.4`,
/// `RECT-30-0.7`, `OPEN-40-0.0`, case-insensitive), with `p_cpd` set to its
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    pub kernel: KernelSpec,
    pub sigma: f64,
    pub p_cpd: f64,
    /// Wipe the target with `1 - B(M_D)` instead of the hard `1 - M_D`. The
    /// wipe and paste weights then sum to one everywhere; outside `M_D` the
    /// copied object is empty, so the target fades towards black there.
    #[serde(default)]
    pub exact_alpha: bool,
}

impl CpdConfig {
    pub fn new(shape: KernelShape, size: usize, sigma: f64) -> Result<Self> {
        let cfg = Self {
            kernel: KernelSpec::new(shape, size)?,
            sigma,
            p_cpd: DEFAULT_P_CPD,
            exact_alpha: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.size == 0 {
            return Err(Error::Parameter("kernel size must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma {} must be finite and >= 0", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.p_cpd) {
            return Err(Error::Parameter(format!("p_cpd {} outside [0, 1]", self.p_cpd)));
        }
        Ok(())
    }

    /// The `KERNEL-SIZE-SIGMA` label.
    pub fn triple(&self) -> String {
        format!("{}-{}-{:?}", self.kernel.shape, self.kernel.size, self.sigma)
    }
}

impl fmt::Display for CpdConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.triple())
    }
}

impl FromStr for CpdConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("expected KERNEL-SIZE-SIGMA, got `{s}`"));
        let mut parts = s.trim().splitn(3, '-');
        let (shape, size, sigma) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(bad()),
        };
        let shape: KernelShape = shape.parse()?;
        let size: usize = size.parse().map_err(|_| bad())?;
        let sigma: f64 = sigma.parse().map_err(|_| bad())?;
        Self::new(shape, size, sigma)
    }
}

/// Output of the copy step.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyResult<T> {
    /// `M_D`, a superset of the source mask.
    pub dilated_mask: BinaryMask,
    /// `O = X_src ⊙ M_D`; zero outside the dilated mask.
    pub object: RasterImage<T>,
}

pub fn copy_step<T: Scalar>(
    x_src: &RasterImage<T>,
    m_src: &BinaryMask,
    element: &StructuringElement,
) -> Result<CopyResult<T>> {
    if x_src.dims() != m_src.dims() {
        return Err(Error::Dimension {
            left: (x_src.width(), x_src.height(), 3),
            right: (m_src.width(), m_src.height(), 1),
        });
    }
    let dilated_mask = dilate(m_src, element);
    let object = ew_mul(x_src, &dilated_mask)?.into_image()?;
    Ok(CopyResult { dilated_mask, object })
}

/// `min(max(m_tar ⊖ m_dilated, 0) ⊕ m_src, 1)`.
///
/// The subtraction can reach -1 where the dilated region covers target
/// background, and the sum can reach 2 where source and target annotations
/// overlap; both clamps bring the result back to `{0, 1}`.
pub fn synthesize_mask(m_tar: &BinaryMask, m_dilated: &BinaryMask, m_src: &BinaryMask) -> Result<BinaryMask> {
    let wiped = clamp(&ew_sub::<f32>(m_tar, m_dilated)?, 0.0, f32::INFINITY);
    let merged = ew_add(&wiped, m_src)?;
    clamp(&merged, f32::NEG_INFINITY, 1.0).into_mask()
}

/// Composites the copied object onto the target and builds the new mask.
///
/// `m_src` is the un-dilated source mask: the dilated margin is pasted as
/// image context but never annotated. Returns `(X_new, M_new)`.
pub fn paste_step<T: Scalar>(
    x_tar: &RasterImage<T>,
    m_tar: &BinaryMask,
    m_src: &BinaryMask,
    copy: &CopyResult<T>,
    sigma: T,
    exact_alpha: bool,
) -> Result<(RasterImage<T>, BinaryMask)> {
    let dims = x_tar.dims();
    let shapes = [m_tar.dims(), m_src.dims(), copy.dilated_mask.dims(), copy.object.dims()];
    if let Some(&(w, h)) = shapes.iter().find(|&&d| d != dims) {
        return Err(Error::Dimension {
            left: (dims.0, dims.1, 3),
            right: (w, h, 1),
        });
    }
    let (w, h) = dims;
    let alpha = gaussian_blur(&copy.dilated_mask.to_soft::<T>(), sigma)?;
    let ones = SignedRaster::constant(w, h, 1, T::one())?;
    let wipe = if exact_alpha {
        ew_sub(&ones, &alpha)?
    } else {
        ew_sub(&ones, &copy.dilated_mask)?
    };
    let background = ew_mul(x_tar, &wipe)?;
    let foreground = ew_mul(&copy.object, &alpha)?;
    let x_new = clamp(&ew_add(&background, &foreground)?, T::zero(), T::one()).into_image()?;
    let m_new = synthesize_mask(m_tar, &copy.dilated_mask, m_src)?;
    Ok((x_new, m_new))
}

/// Provenance id of a synthesized pair.
pub fn derived_id(tar_id: &str, src_id: &str, seed: u64) -> String {
    format!("{tar_id}__cpd__{src_id}__{seed}")
}

/// Full augmentation of one (source, target) couple: naive augmentations,
/// copy step, paste step. All randomness comes from `seed`.
///
/// The result keeps the target's patient id.
pub fn cp_dilatation<T: Scalar>(
    src: &SamplePair<T>,
    tar: &SamplePair<T>,
    naive: &NaiveAugConfig,
    cpd: &CpdConfig,
    seed: u64,
) -> Result<SamplePair<T>> {
    cpd.validate()?;
    if src.dims() != tar.dims() {
        let ((sw, sh), (tw, th)) = (src.dims(), tar.dims());
        return Err(Error::Dimension {
            left: (sw, sh, 3),
            right: (tw, th, 3),
        });
    }
    let mut rng = seeded(seed);
    let (src_aug, tar_aug) = apply_naive(src, tar, naive, &mut rng)?;
    let element = make_element(cpd.kernel);
    let copy = copy_step(&src_aug.image, &src_aug.mask, &element)?;
    let (image, mask) = paste_step(
        &tar_aug.image,
        &tar_aug.mask,
        &src_aug.mask,
        &copy,
        T::of(cpd.sigma),
        cpd.exact_alpha,
    )?;
    SamplePair::new(image, mask, derived_id(&tar.id, &src.id, seed), tar.patient_id.clone())
}

/// Whether the copy-paste step fires for the item seeded with `seed`. Uses
/// its own derived stream, so the augmentation itself sees the same
/// randomness as a direct [`cp_dilatation`] call.
pub fn cpd_gate(p_cpd: f64, seed: u64) -> bool {
    seeded(derive_seed(seed, GATE_STREAM)).random_bool(p_cpd.clamp(0.0, 1.0))
}

/// Index of the source paired with target `target` among `n` candidates:
/// uniform over every other index, drawn from the item's source stream.
pub fn pick_source(n: usize, target: usize, seed: u64) -> Result<usize> {
    if n < 2 || target >= n {
        return Err(Error::Parameter(format!(
            "need at least two samples to pair a source with target {target} of {n}"
        )));
    }
    let j = seeded(derive_seed(seed, SOURCE_STREAM)).random_range(0..n - 1);
    Ok(if j >= target { j + 1 } else { j })
}

/// With probability `p_cpd` returns [`cp_dilatation`] of the couple,
/// otherwise `src` unchanged.
pub fn maybe_augment<T: Scalar>(
    src: &SamplePair<T>,
    tar: &SamplePair<T>,
    naive: &NaiveAugConfig,
    cpd: &CpdConfig,
    seed: u64,
) -> Result<SamplePair<T>> {
    cpd.validate()?;
    if cpd_gate(cpd.p_cpd, seed) {
        cp_dilatation(src, tar, naive, cpd, seed)
    } else {
        Ok(src.clone())
    }
}
