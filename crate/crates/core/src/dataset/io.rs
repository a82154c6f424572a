//! PNG persistence. Images are 8-bit RGB (`v / 255` on load,
//! `round(v * 255)` on save); masks are 8-bit grayscale written as
//! `{0, 255}`, and any nonzero byte loads as foreground.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use regex::Regex;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RasterImage, SamplePair};
use crate::scalar::Scalar;

use super::manifest::ManifestEntry;

pub const IMAGES_DIR: &str = "images";
pub const MASKS_DIR: &str = "masks";
/// Default patient-id pattern: everything before the first underscore.
pub const DEFAULT_PATIENT_PATTERN: &str = "^([^_]+)";

pub fn to_rgb8<T: Scalar>(img: &RasterImage<T>) -> RgbImage {
    let bytes = img
        .data()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes).expect("buffer sized from raster")
}

pub fn from_rgb8<T: Scalar>(img: &RgbImage) -> RasterImage<T> {
    let data = img.as_raw().iter().map(|&b| T::of(f64::from(b) / 255.0)).collect();
    RasterImage::new_unchecked(img.width() as usize, img.height() as usize, data)
}

pub fn mask_to_gray8(mask: &BinaryMask) -> GrayImage {
    let bytes = mask.data().iter().map(|&v| if v == 1 { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, bytes).expect("buffer sized from mask")
}

pub fn mask_from_gray8(img: &GrayImage) -> BinaryMask {
    let bits = img.as_raw().iter().map(|&b| u8::from(b != 0)).collect();
    BinaryMask::new_unchecked(img.width() as usize, img.height() as usize, bits)
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_image<T: Scalar>(path: &Path) -> Result<RasterImage<T>> {
    match open(path)? {
        DynamicImage::ImageRgb8(rgb) => Ok(from_rgb8(&rgb)),
        DynamicImage::ImageLuma8(gray) => Ok(from_rgb8(&DynamicImage::ImageLuma8(gray).to_rgb8())),
        other => Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("expected 8-bit RGB, found {:?}", other.color()),
        }),
    }
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    match open(path)? {
        DynamicImage::ImageLuma8(gray) => Ok(mask_from_gray8(&gray)),
        other => Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("expected 8-bit single-channel mask, found {:?}", other.color()),
        }),
    }
}

pub fn load_pair<T: Scalar>(
    image_path: &Path,
    mask_path: &Path,
    id: impl Into<String>,
    patient_id: impl Into<String>,
) -> Result<SamplePair<T>> {
    let image = load_image(image_path)?;
    let mask = load_mask(mask_path)?;
    if image.dims() != mask.dims() {
        return Err(Error::Format {
            path: mask_path.to_path_buf(),
            detail: format!("mask is {:?} but image {} is {:?}", mask.dims(), image_path.display(), image.dims()),
        });
    }
    SamplePair::new(image, mask, id, patient_id)
}

/// Loads the pair an entry points at, relative to `root`.
pub fn load_entry<T: Scalar>(root: &Path, entry: &ManifestEntry) -> Result<SamplePair<T>> {
    load_pair(
        &root.join(&entry.image_path),
        &root.join(&entry.mask_path),
        entry.id.clone(),
        entry.patient_id.clone(),
    )
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
}

pub fn save_image<T: Scalar>(img: &RasterImage<T>, path: &Path) -> Result<()> {
    save(&DynamicImage::ImageRgb8(to_rgb8(img)), path)
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    save(&DynamicImage::ImageLuma8(mask_to_gray8(mask)), path)
}

/// Writes `images/{id}.png` and `masks/{id}.png` under `root` and returns
/// the matching (unsplit) manifest entry.
pub fn save_pair<T: Scalar>(pair: &SamplePair<T>, root: &Path) -> Result<ManifestEntry> {
    let entry = ManifestEntry::unsplit(pair.id.clone(), pair.patient_id.clone());
    save_image(&pair.image, &root.join(&entry.image_path))?;
    save_mask(&pair.mask, &root.join(&entry.mask_path))?;
    Ok(entry)
}

/// Extracts a patient id from a sample id with the first capture group of
/// `pattern`, falling back to the whole id.
#[derive(Debug, Clone)]
pub struct PatientIdRule(Regex);

impl PatientIdRule {
    pub fn new(pattern: &str) -> Result<Self> {
        Regex::new(pattern)
            .map(Self)
            .map_err(|e| Error::Parameter(format!("bad patient-id pattern: {e}")))
    }

    pub fn patient_of(&self, id: &str) -> String {
        self.0
            .captures(id)
            .and_then(|c| c.get(1).or_else(|| c.get(0)))
            .map(|m| m.as_str().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| id.to_string())
    }
}

impl Default for PatientIdRule {
    fn default() -> Self {
        Self::new(DEFAULT_PATIENT_PATTERN).expect("default pattern compiles")
    }
}

/// Sorted `(id, image_path, mask_path)` for every `images/*.png` under
/// `root` that has a mask of the same name.
pub fn scan_slides(root: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let images = root.join(IMAGES_DIR);
    let mut out = Vec::new();
    if !images.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(&images)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("png")) != Some(true) {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let mask = root.join(MASKS_DIR).join(format!("{id}.png"));
        out.push((id.to_string(), path.clone(), mask));
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let image = RasterImage::from_fn(13, 7, |x, y| {
            let b = |v: usize| ((v % 256) as f64 / 255.0) as f32;
            [b(x * 19 + y), b(y * 37), b(x * y * 11)]
        });
        let mask = BinaryMask::from_fn(13, 7, |x, y| (x * y) % 3 == 0);
        let pair = SamplePair::new(image, mask, "p7_slide_r000_c000", "p7").unwrap();
        let entry = save_pair(&pair, dir.path()).unwrap();
        let back: SamplePair<f32> = load_entry(dir.path(), &entry).unwrap();
        assert_eq!(back, pair);
        let raw = image::open(dir.path().join(&entry.mask_path)).unwrap().to_luma8();
        assert!(raw.as_raw().iter().all(|&b| b == 0 || b == 255));
    }

    #[test]
    fn any_nonzero_mask_byte_is_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        GrayImage::from_raw(3, 1, vec![0, 255, 17]).unwrap().save(&path).unwrap();
        assert_eq!(load_mask(&path).unwrap().data(), &[0, 1, 1]);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_mask(Path::new("/nonexistent/dir/mask_42.png")).unwrap_err();
        assert!(err.to_string().contains("mask_42.png"));
    }

    #[test]
    fn unsupported_formats_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let deep = image::ImageBuffer::<image::Rgb<u16>, Vec<u16>>::from_raw(2, 2, vec![0; 12]).unwrap();
        DynamicImage::ImageRgb16(deep).save(&path).unwrap();
        assert!(matches!(load_image::<f32>(&path), Err(Error::Format { .. })));
        let rgb = dir.path().join("rgb.png");
        RgbImage::new(2, 2).save(&rgb).unwrap();
        assert!(matches!(load_mask(&rgb), Err(Error::Format { .. })));
    }

    #[test]
    fn mismatched_pair_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_image(&RasterImage::<f32>::zeros(4, 4), &dir.path().join("i.png")).unwrap();
        save_mask(&BinaryMask::zeros(4, 5), &dir.path().join("m.png")).unwrap();
        assert!(load_pair::<f32>(&dir.path().join("i.png"), &dir.path().join("m.png"), "a", "b").is_err());
    }

    #[test]
    fn patient_rule() {
        let rule = PatientIdRule::default();
        assert_eq!(rule.patient_of("p01_slide3_r000_c001"), "p01");
        assert_eq!(rule.patient_of("nounderscore"), "nounderscore");
        let custom = PatientIdRule::new(r"^case-(\d+)").unwrap();
        assert_eq!(custom.patient_of("case-17-a"), "17");
        assert_eq!(custom.patient_of("other"), "other");
    }
}
