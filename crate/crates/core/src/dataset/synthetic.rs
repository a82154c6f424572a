//! Deterministic synthetic slides: pink stroma with darker elliptical
//! "glands" annotated in the mask. Used for the toy corpus and tests.

use rand::Rng;

use crate::raster::{BinaryMask, RasterImage, SamplePair};
use crate::rng::{derive_seed, seeded};

const STROMA: [f32; 3] = [0.90, 0.60, 0.72];
const GLAND: [f32; 3] = [0.52, 0.30, 0.58];

struct Blob {
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
}

impl Blob {
    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f32 + 0.5 - self.cx) / self.rx;
        let dy = (y as f32 + 0.5 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

pub fn toy_slide(id: &str, patient_id: &str, width: usize, height: usize, seed: u64) -> SamplePair<f32> {
    let mut rng = seeded(seed);
    let scale = width.min(height) as f32;
    let blobs: Vec<Blob> = (0..rng.random_range(2..=5))
        .map(|_| Blob {
            cx: rng.random_range(0.0..width as f32),
            cy: rng.random_range(0.0..height as f32),
            rx: rng.random_range(0.05..0.2) * scale,
            ry: rng.random_range(0.05..0.2) * scale,
        })
        .collect();
    let mask = BinaryMask::from_fn(width, height, |x, y| blobs.iter().any(|b| b.contains(x, y)));
    let image = RasterImage::from_fn(width, height, |x, y| {
        let base = if mask.get(x, y) { GLAND } else { STROMA };
        // quantize so the in-memory slide equals its 8-bit file
        base.map(|c| ((f64::from(c + rng.random_range(-0.04..0.04)) * 255.0).round() / 255.0) as f32)
    });
    SamplePair::new(image, mask, id, patient_id).expect("image and mask share dimensions")
}

/// `patients * slides_per_patient` slides with ids `p{NN}_s{M}`.
pub fn toy_corpus(patients: usize, slides_per_patient: usize, width: usize, height: usize, seed: u64) -> Vec<SamplePair<f32>> {
    let mut out = Vec::with_capacity(patients * slides_per_patient);
    for p in 0..patients {
        for s in 0..slides_per_patient {
            let index = (p * slides_per_patient + s) as u64;
            let patient = format!("p{p:02}");
            out.push(toy_slide(&format!("{patient}_s{s}"), &patient, width, height, derive_seed(seed, index)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::is_background;

    #[test]
    fn deterministic_and_not_background() {
        let a = toy_corpus(3, 2, 40, 30, 5);
        let b = toy_corpus(3, 2, 40, 30, 5);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[3].id, "p01_s1");
        for s in &a {
            assert!(!is_background(&s.image, 0.75));
            assert!(s.mask.count_ones() > 0);
        }
    }
}
