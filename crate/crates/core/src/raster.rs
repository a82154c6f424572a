//! Raster containers and the element-wise algebra used by the copy and paste
//! steps: multiplication, sum, subtraction and clamping.
//!
//! Images hold normalized intensities in `[0, 1]`, three interleaved channels
//! per pixel. Masks hold one value per pixel and broadcast over the image
//! channels when multiplied. Sums and differences produce a [`SignedRaster`]
//! whose values may temporarily leave `[0, 1]` (down to `-1`, up to `2`)
//! until a [`clamp`] restores the valid range.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lowest value an intermediate [`SignedRaster`] may hold.
pub const SIGNED_MIN: f64 = -1.0;
/// Highest value an intermediate [`SignedRaster`] may hold.
pub const SIGNED_MAX: f64 = 2.0;

fn check_len(width: usize, height: usize, channels: usize, actual: usize) -> Result<()> {
    if width * height * channels != actual {
        return Err(Error::BufferLength {
            width,
            height,
            channels,
            actual,
        });
    }
    Ok(())
}

fn check_range<T: Scalar>(data: &[T], lo: f64, hi: f64) -> Result<()> {
    let (lo_t, hi_t) = (T::of(lo), T::of(hi));
    match data.iter().position(|&v| !(v >= lo_t && v <= hi_t)) {
        Some(index) => Err(Error::Range {
            index,
            value: data[index].as_f64(),
            lo,
            hi,
        }),
        None => Ok(()),
    }
}

/// Read access shared by every raster flavour, so the element-wise operators
/// can mix images, masks and intermediate results.
pub trait Planar<T: Scalar> {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn channels(&self) -> usize;
    /// Value at flat index `i` of a `height x width x channels` buffer.
    fn value(&self, i: usize) -> T;

    fn shape(&self) -> (usize, usize, usize) {
        (self.width(), self.height(), self.channels())
    }

    fn len(&self) -> usize {
        self.width() * self.height() * self.channels()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Three-channel RGB raster with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> RasterImage<T> {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_len(width, height, Self::CHANNELS, data.len())?;
        check_range(&data, 0.0, 1.0)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn new_unchecked(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height * Self::CHANNELS);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new_unchecked(width, height, vec![T::zero(); width * height * 3])
    }

    /// Every pixel set to `rgb`. Components are clamped into `[0, 1]`.
    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image from a per-pixel function of `(x, y)`. Values are
    /// clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for v in f(x, y) {
                    data.push(v.max(T::zero()).min(T::one()));
                }
            }
        }
        Self::new_unchecked(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Overwrites one pixel, clamping components into `[0, 1]`.
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [T; 3]) {
        let i = (y * self.width + x) * 3;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[i + c] = v.max(T::zero()).min(T::one());
        }
    }

    /// Sub-rectangle starting at `(x0, y0)`. Panics when out of bounds.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        let mut data = Vec::with_capacity(width * height * 3);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + width * 3]);
        }
        Self::new_unchecked(width, height, data)
    }

    /// Converts to another scalar precision.
    pub fn cast<U: Scalar>(&self) -> RasterImage<U> {
        RasterImage::new_unchecked(
            self.width,
            self.height,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }
}

impl<T: Scalar> Planar<T> for RasterImage<T> {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        3
    }
    fn value(&self, i: usize) -> T {
        self.data[i]
    }
}

/// Single-channel mask whose values are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_len(width, height, 1, data.len())?;
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::Range {
                index,
                value: f64::from(data[index]),
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn new_unchecked(width: usize, height: usize, data: Vec<u8>) -> Self {
        debug_assert!(data.len() == width * height && data.iter().all(|&v| v <= 1));
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new_unchecked(width, height, vec![0; width * height])
    }

    pub fn ones(width: usize, height: usize) -> Self {
        Self::new_unchecked(width, height, vec![1; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self::new_unchecked(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.data[y * self.width + x] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a <= b)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        let mut data = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let start = y * self.width + x0;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Self::new_unchecked(width, height, data)
    }

    /// Real-valued lift (`{0, 1}` as `{0.0, 1.0}`).
    pub fn to_soft<T: Scalar>(&self) -> SoftMask<T> {
        SoftMask::new_unchecked(
            self.width,
            self.height,
            self.data
                .iter()
                .map(|&v| if v == 1 { T::one() } else { T::zero() })
                .collect(),
        )
    }
}

impl<T: Scalar> Planar<T> for BinaryMask {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        1
    }
    fn value(&self, i: usize) -> T {
        if self.data[i] == 1 {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Single-channel alpha with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> SoftMask<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_len(width, height, 1, data.len())?;
        check_range(&data, 0.0, 1.0)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub(crate) fn new_unchecked(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        let v = value.max(T::zero()).min(T::one());
        Self::new_unchecked(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

impl<T: Scalar> Planar<T> for SoftMask<T> {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        1
    }
    fn value(&self, i: usize) -> T {
        self.data[i]
    }
}

/// Intermediate result of `⊕` / `⊖`, allowed to range over `[-1, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRaster<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> SignedRaster<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        check_len(width, height, channels, data.len())?;
        check_range(&data, SIGNED_MIN, SIGNED_MAX)?;
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constant raster, e.g. the `1` in `1 - M`.
    pub fn constant(width: usize, height: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Reinterprets a three-channel result as an image; every value must
    /// already lie in `[0, 1]`.
    pub fn into_image(self) -> Result<RasterImage<T>> {
        if self.channels != 3 {
            return Err(Error::Dimension {
                left: (self.width, self.height, self.channels),
                right: (self.width, self.height, 3),
            });
        }
        RasterImage::new(self.width, self.height, self.data)
    }

    /// Reinterprets a single-channel result as a binary mask; every value
    /// must be exactly 0 or 1.
    pub fn into_mask(self) -> Result<BinaryMask> {
        if self.channels != 1 {
            return Err(Error::Dimension {
                left: (self.width, self.height, self.channels),
                right: (self.width, self.height, 1),
            });
        }
        let mut out = Vec::with_capacity(self.data.len());
        for (index, &v) in self.data.iter().enumerate() {
            if v == T::zero() {
                out.push(0);
            } else if v == T::one() {
                out.push(1);
            } else {
                return Err(Error::Range {
                    index,
                    value: v.as_f64(),
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(BinaryMask::new_unchecked(self.width, self.height, out))
    }

    pub fn into_soft(self) -> Result<SoftMask<T>> {
        if self.channels != 1 {
            return Err(Error::Dimension {
                left: (self.width, self.height, self.channels),
                right: (self.width, self.height, 1),
            });
        }
        SoftMask::new(self.width, self.height, self.data)
    }
}

impl<T: Scalar> Planar<T> for SignedRaster<T> {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn channels(&self) -> usize {
        self.channels
    }
    fn value(&self, i: usize) -> T {
        self.data[i]
    }
}

/// An image and its mask, plus identifiers carried through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair<T> {
    pub image: RasterImage<T>,
    pub mask: BinaryMask,
    pub id: String,
    pub patient_id: String,
}

impl<T: Scalar> SamplePair<T> {
    pub fn new(
        image: RasterImage<T>,
        mask: BinaryMask,
        id: impl Into<String>,
        patient_id: impl Into<String>,
    ) -> Result<Self> {
        if image.dims() != mask.dims() {
            return Err(Error::Dimension {
                left: (image.width(), image.height(), 3),
                right: (mask.width(), mask.height(), 1),
            });
        }
        Ok(Self {
            image,
            mask,
            id: id.into(),
            patient_id: patient_id.into(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    /// Same identifiers, new raster content. Dimensions are re-validated.
    pub fn with_rasters(&self, image: RasterImage<T>, mask: BinaryMask) -> Result<Self> {
        Self::new(image, mask, self.id.clone(), self.patient_id.clone())
    }
}

/// Resolves how `b` is indexed against `a`: same shape, or a single-channel
/// `b` broadcast over the channels of `a`.
fn broadcast<T: Scalar>(a: &impl Planar<T>, b: &impl Planar<T>) -> Result<usize> {
    let same_plane = a.width() == b.width() && a.height() == b.height();
    if same_plane && a.channels() == b.channels() {
        Ok(1)
    } else if same_plane && b.channels() == 1 {
        Ok(a.channels())
    } else {
        Err(Error::Dimension {
            left: a.shape(),
            right: b.shape(),
        })
    }
}

fn zip_with<T: Scalar>(
    a: &impl Planar<T>,
    b: &impl Planar<T>,
    op: impl Fn(T, T) -> T,
) -> Result<SignedRaster<T>> {
    let stride = broadcast(a, b)?;
    let data: Vec<T> = (0..a.len())
        .map(|i| op(a.value(i), b.value(i / stride)))
        .collect();
    SignedRaster::new(a.width(), a.height(), a.channels(), data)
}

/// Element-wise product `a ⊙ b`. A single-channel `b` is broadcast across
/// the channels of `a`.
pub fn ew_mul<T: Scalar>(a: &impl Planar<T>, b: &impl Planar<T>) -> Result<SignedRaster<T>> {
    zip_with(a, b, |x, y| x * y)
}

/// Element-wise sum `a ⊕ b`.
pub fn ew_add<T: Scalar>(a: &impl Planar<T>, b: &impl Planar<T>) -> Result<SignedRaster<T>> {
    zip_with(a, b, |x, y| x + y)
}

/// Element-wise difference `a ⊖ b`; may go negative.
pub fn ew_sub<T: Scalar>(a: &impl Planar<T>, b: &impl Planar<T>) -> Result<SignedRaster<T>> {
    zip_with(a, b, |x, y| x - y)
}

/// `min(max(a, lo), hi)` per element. Either bound may be infinite.
///
/// Panics if `lo > hi` or a bound is NaN.
pub fn clamp<T: Scalar>(a: &impl Planar<T>, lo: T, hi: T) -> SignedRaster<T> {
    assert!(lo <= hi, "clamp requires lo <= hi");
    let data = (0..a.len()).map(|i| a.value(i).max(lo).min(hi)).collect();
    SignedRaster {
        width: a.width(),
        height: a.height(),
        channels: a.channels(),
        data,
    }
}
