//! Dataset preparation: slide patchification, near-white background
//! filtering, patient-level splitting and resizing, plus on-disk layout.

pub mod io;
pub mod manifest;
pub mod synthetic;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::raster::{RasterImage, SamplePair};
use crate::resize::{resize_bilinear, resize_nearest};
use crate::rng::seeded;
use crate::scalar::Scalar;

pub use manifest::{DatasetManifest, ManifestEntry, Provenance, Split};

pub const DEFAULT_PATCH_SIZE: usize = 1024;
pub const DEFAULT_RESIZE: usize = 512;
pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 0.75;
pub const DEFAULT_SPLIT_FRACTIONS: [f64; 3] = [0.7, 0.15, 0.15];

/// Saturation ceiling of the background criterion, on the 0..255 scale.
pub const BACKGROUND_MAX_SATURATION: f64 = 255.0 * 0.12;
/// Value floor of the background criterion, on the 0..255 scale.
pub const BACKGROUND_MIN_VALUE: f64 = 255.0 * 0.9;

/// Tiling of a slide into square patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub size: usize,
    /// Distance between patch origins; equal to `size` for a non-overlapping grid.
    pub stride: usize,
}

impl PatchGrid {
    pub fn non_overlapping(size: usize) -> Self {
        Self { size, stride: size }
    }

    fn count(&self, len: usize) -> usize {
        if len < self.size {
            0
        } else {
            (len - self.size) / self.stride + 1
        }
    }
}

impl Default for PatchGrid {
    fn default() -> Self {
        Self::non_overlapping(DEFAULT_PATCH_SIZE)
    }
}

pub fn patch_id(slide_id: &str, row: usize, col: usize) -> String {
    format!("{slide_id}_r{row:03}_c{col:03}")
}

/// Cuts a slide into patches from the top-left corner, dropping trailing
/// remainders smaller than a patch.
pub fn patchify<T: Scalar>(slide: &SamplePair<T>, grid: PatchGrid) -> Result<Vec<SamplePair<T>>> {
    if grid.size == 0 || grid.stride == 0 {
        return Err(Error::Parameter("patch size and stride must be positive".into()));
    }
    let (w, h) = slide.dims();
    let (cols, rows) = (grid.count(w), grid.count(h));
    let mut patches = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let (x0, y0) = (col * grid.stride, row * grid.stride);
            patches.push(SamplePair {
                image: slide.image.crop(x0, y0, grid.size, grid.size),
                mask: slide.mask.crop(x0, y0, grid.size, grid.size),
                id: patch_id(&slide.id, row, col),
                patient_id: slide.patient_id.clone(),
            });
        }
    }
    Ok(patches)
}

/// Hue in degrees `[0, 360)`, saturation and value on `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel<T> {
    pub h: T,
    pub s: T,
    pub v: T,
}

/// Hexcone RGB to HSV for components in `[0, 1]`.
pub fn rgb_to_hsv<T: Scalar>([r, g, b]: [T; 3]) -> HsvPixel<T> {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let full = T::of(255.0);
    let sixty = T::of(60.0);
    let v = max * full;
    let s = if max == T::zero() { T::zero() } else { delta / max * full };
    let h = if delta == T::zero() {
        T::zero()
    } else if max == r {
        let h = sixty * ((g - b) / delta);
        if h < T::zero() {
            h + T::of(360.0)
        } else {
            h
        }
    } else if max == g {
        sixty * ((b - r) / delta + T::of(2.0))
    } else {
        sixty * ((r - g) / delta + T::of(4.0))
    };
    HsvPixel { h, s, v }
}

/// Inside the near-white box `(0, 0, 229.5) .. (360, 30.6, 255)`.
pub fn is_background_pixel<T: Scalar>(rgb: [T; 3]) -> bool {
    let hsv = rgb_to_hsv(rgb);
    let (h, s, v) = (hsv.h.as_f64(), hsv.s.as_f64(), hsv.v.as_f64());
    (0.0..=360.0).contains(&h) && (0.0..=BACKGROUND_MAX_SATURATION).contains(&s) && (BACKGROUND_MIN_VALUE..=255.0).contains(&v)
}

/// Fraction of near-white pixels.
pub fn background_fraction<T: Scalar>(patch: &RasterImage<T>) -> f64 {
    let total = patch.width() * patch.height();
    if total == 0 {
        return 0.0;
    }
    let hits = patch
        .data()
        .chunks_exact(3)
        .filter(|p| is_background_pixel([p[0], p[1], p[2]]))
        .count();
    hits as f64 / total as f64
}

/// True when strictly more than `threshold` of the pixels are background.
pub fn is_background<T: Scalar>(patch: &RasterImage<T>, threshold: f64) -> bool {
    background_fraction(patch) > threshold
}

/// Resizes a square pair to `target x target`: bilinear for the image,
/// nearest neighbour for the mask.
pub fn resize_pair<T: Scalar>(pair: &SamplePair<T>, target: usize) -> Result<SamplePair<T>> {
    let (w, h) = pair.dims();
    if w != h {
        return Err(Error::Parameter(format!("resize_pair needs a square input, got {w}x{h}")));
    }
    if target == 0 {
        return Err(Error::Parameter("resize target must be positive".into()));
    }
    pair.with_rasters(
        resize_bilinear(&pair.image, target, target),
        resize_nearest(&pair.mask, target, target),
    )
}

fn validate_fractions(fractions: [f64; 3]) -> Result<()> {
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "split fractions {fractions:?} must be positive and sum to 1"
        )));
    }
    Ok(())
}

/// Assigns every entry a split so that no patient straddles two splits.
///
/// Patients (sorted, then shuffled with `seed`) are handed out in order:
/// train takes patients while each one moves its patch count closer to its
/// target share, then validation does the same, and test receives the rest.
/// Every split gets at least one patient.
pub fn split_by_patient(entries: &[ManifestEntry], fractions: [f64; 3], seed: u64) -> Result<DatasetManifest> {
    validate_fractions(fractions)?;
    let mut weights: BTreeMap<&str, usize> = BTreeMap::new();
    for e in entries {
        *weights.entry(e.patient_id.as_str()).or_default() += 1;
    }
    if weights.len() < 3 {
        return Err(Error::Parameter(format!(
            "need at least 3 patients for a three-way split, got {}",
            weights.len()
        )));
    }
    let mut patients: Vec<(&str, usize)> = weights.into_iter().collect();
    patients.shuffle(&mut seeded(seed));

    let total = entries.len() as f64;
    let n = patients.len();
    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();
    let mut next = 0;
    for (split, fraction, reserve) in [(Split::Train, fractions[0], 2), (Split::Val, fractions[1], 1)] {
        let target = fraction * total;
        let mut count = 0.0;
        let mut taken = 0;
        while next < n - reserve {
            let w = patients[next].1 as f64;
            if taken > 0 && (count + w - target).abs() >= (count - target).abs() {
                break;
            }
            assignment.insert(patients[next].0, split);
            count += w;
            taken += 1;
            next += 1;
        }
    }
    for (p, _) in &patients[next..] {
        assignment.insert(p, Split::Test);
    }

    let entries = entries
        .iter()
        .map(|e| ManifestEntry {
            split: Some(assignment[e.patient_id.as_str()]),
            ..e.clone()
        })
        .collect();
    let manifest = DatasetManifest {
        seed: Some(seed),
        split_fractions: Some(fractions),
        entries,
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BinaryMask;

    fn slide(w: usize, h: usize) -> SamplePair<f32> {
        let image = RasterImage::from_fn(w, h, |x, y| [(x % 7) as f32 / 7.0, (y % 5) as f32 / 5.0, 0.5]);
        let mask = BinaryMask::from_fn(w, h, |x, y| (x / 3 + y / 2) % 2 == 0);
        SamplePair::new(image, mask, "pat1_slide", "pat1").unwrap()
    }

    #[test]
    fn patch_counts() {
        let g = PatchGrid::non_overlapping(16);
        assert_eq!(patchify(&slide(32, 32), g).unwrap().len(), 4);
        assert_eq!(patchify(&slide(15, 15), g).unwrap().len(), 0);
        assert_eq!(patchify(&slide(47, 39), g).unwrap().len(), 2 * 2);
    }

    #[test]
    fn patches_reassemble_covered_region() {
        let s = slide(50, 37);
        let g = PatchGrid::non_overlapping(12);
        let patches = patchify(&s, g).unwrap();
        assert_eq!(patches.len(), 4 * 3);
        for (i, p) in patches.iter().enumerate() {
            let (row, col) = (i / 4, i % 4);
            assert_eq!(p.id, patch_id("pat1_slide", row, col));
            assert_eq!(p.patient_id, "pat1");
            for y in 0..12 {
                for x in 0..12 {
                    assert_eq!(p.image.pixel(x, y), s.image.pixel(col * 12 + x, row * 12 + y));
                    assert_eq!(p.mask.get(x, y), s.mask.get(col * 12 + x, row * 12 + y));
                }
            }
        }
    }

    #[test]
    fn overlapping_grid() {
        let g = PatchGrid { size: 16, stride: 8 };
        assert_eq!(patchify(&slide(32, 16), g).unwrap().len(), 3);
        assert!(patchify(&slide(32, 16), PatchGrid { size: 16, stride: 0 }).is_err());
    }

    #[test]
    fn hsv_reference_colours() {
        assert_eq!(rgb_to_hsv([1.0f64, 1.0, 1.0]), HsvPixel { h: 0.0, s: 0.0, v: 255.0 });
        assert_eq!(rgb_to_hsv([1.0f64, 0.0, 0.0]), HsvPixel { h: 0.0, s: 255.0, v: 255.0 });
        assert_eq!(rgb_to_hsv([0.5f64, 0.5, 0.5]), HsvPixel { h: 0.0, s: 0.0, v: 127.5 });
        assert_eq!(rgb_to_hsv([0.0f64, 1.0, 0.0]).h, 120.0);
        assert_eq!(rgb_to_hsv([0.0f64, 0.0, 1.0]).h, 240.0);
        assert_eq!(rgb_to_hsv([1.0f64, 0.0, 1.0]).h, 300.0);
        let pink = rgb_to_hsv([0.9f64, 0.55, 0.65]);
        assert!((pink.s - 0.35 / 0.9 * 255.0).abs() < 1e-9);
    }

    #[test]
    fn hue_range_is_half_open() {
        for r in 0..=10 {
            for g in 0..=10 {
                for b in 0..=10 {
                    let hsv = rgb_to_hsv([r as f64 / 10.0, g as f64 / 10.0, b as f64 / 10.0]);
                    assert!((0.0..360.0).contains(&hsv.h));
                }
            }
        }
    }

    #[test]
    fn background_decisions() {
        assert!(is_background(&RasterImage::filled(8, 8, [1.0f32; 3]), 0.75));
        assert!(!is_background(&RasterImage::filled(8, 8, [1.0f32, 0.0, 0.0]), 0.75));
        let three_quarters = RasterImage::from_fn(8, 8, |x, _| if x < 6 { [1.0f32; 3] } else { [0.5, 0.2, 0.4] });
        assert_eq!(background_fraction(&three_quarters), 0.75);
        assert!(!is_background(&three_quarters, 0.75));
    }

    #[test]
    fn background_is_permutation_invariant() {
        let img = RasterImage::from_fn(9, 7, |x, y| if (x * 3 + y) % 4 == 0 { [0.95f64; 3] } else { [0.8, 0.4, 0.6] });
        let mut pixels: Vec<[f64; 3]> = (0..63).map(|i| img.pixel(i % 9, i / 9)).collect();
        pixels.reverse();
        pixels.rotate_left(17);
        let permuted = RasterImage::from_fn(9, 7, |x, y| pixels[y * 9 + x]);
        assert_eq!(background_fraction(&img), background_fraction(&permuted));
    }

    #[test]
    fn resize_pair_contract() {
        let ones = SamplePair::new(RasterImage::<f32>::filled(64, 64, [0.2, 0.4, 0.6]), BinaryMask::ones(64, 64), "a", "p").unwrap();
        let r = resize_pair(&ones, 32).unwrap();
        assert_eq!(r.mask, BinaryMask::ones(32, 32));
        assert_eq!(resize_pair(&r, 32).unwrap(), r);
        let checker = SamplePair::new(RasterImage::<f32>::zeros(64, 64), BinaryMask::from_fn(64, 64, |x, y| (x + y) % 2 == 0), "c", "p").unwrap();
        let rc = resize_pair(&checker, 32).unwrap();
        assert!(rc.mask.data().iter().all(|&v| v <= 1));
        assert!(resize_pair(&slide(10, 12), 8).is_err());
    }

    fn entries(patients: usize, per_patient: usize) -> Vec<ManifestEntry> {
        (0..patients)
            .flat_map(|p| (0..per_patient).map(move |i| ManifestEntry::unsplit(format!("p{p:02}_{i}"), format!("p{p:02}"))))
            .collect()
    }

    #[test]
    fn split_ten_equal_patients() {
        let m = split_by_patient(&entries(10, 5), DEFAULT_SPLIT_FRACTIONS, 3).unwrap();
        let count = |s: Split| m.entries.iter().filter(|e| e.split == Some(s)).count() / 5;
        assert_eq!(count(Split::Train), 7);
        assert!((1..=2).contains(&count(Split::Val)));
        assert!((1..=2).contains(&count(Split::Test)));
    }

    #[test]
    fn split_rejects_too_few_patients() {
        assert!(split_by_patient(&entries(1, 4), DEFAULT_SPLIT_FRACTIONS, 0).is_err());
        assert!(split_by_patient(&entries(2, 4), DEFAULT_SPLIT_FRACTIONS, 0).is_err());
        assert!(split_by_patient(&entries(3, 1), [0.5, 0.5, 0.1], 0).is_err());
        assert!(split_by_patient(&entries(3, 1), DEFAULT_SPLIT_FRACTIONS, 0).is_ok());
    }

    #[test]
    fn split_is_deterministic() {
        let e = entries(12, 3);
        assert_eq!(
            split_by_patient(&e, DEFAULT_SPLIT_FRACTIONS, 9).unwrap(),
            split_by_patient(&e, DEFAULT_SPLIT_FRACTIONS, 9).unwrap()
        );
    }
}
