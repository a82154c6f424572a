//! Conventional paired augmentations applied before the copy step.
//!
//! Spatial transforms (flips, quarter-turn rotation, resize-pad) move image
//! and mask together. Optical transforms (contrast, brightness) touch the
//! image only and are applied before the spatial ones.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RasterImage, SamplePair};
use crate::resize::{resize_bilinear, resize_nearest};
use crate::scalar::Scalar;

/// Probabilities and parameter ranges for the naive augmentations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveAugConfig {
    /// Inclusion probability of every augmentation except resize-pad,
    /// which is always applied.
    pub p_aug: f64,
    /// Range of `delta` with scale `s = 1 + delta`.
    pub resize_pad_range: (f64, f64),
    pub contrast_range: (f64, f64),
    pub brightness_range: (f64, f64),
}

impl Default for NaiveAugConfig {
    fn default() -> Self {
        Self {
            p_aug: 0.33,
            resize_pad_range: (-0.9, 0.5),
            contrast_range: (0.8, 1.2),
            brightness_range: (-0.1, 0.1),
        }
    }
}

impl NaiveAugConfig {
    /// Configuration that leaves every pair untouched.
    pub fn identity() -> Self {
        Self {
            p_aug: 0.0,
            resize_pad_range: (0.0, 0.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_aug) {
            return Err(Error::Parameter(format!("p_aug {} outside [0, 1]", self.p_aug)));
        }
        for (name, (lo, hi)) in [
            ("resize_pad_range", self.resize_pad_range),
            ("contrast_range", self.contrast_range),
            ("brightness_range", self.brightness_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Parameter(format!("{name} ({lo}, {hi}) is not an ordered range")));
            }
        }
        if self.resize_pad_range.0 <= -1.0 {
            return Err(Error::Parameter("resize_pad_range lower bound must exceed -1".into()));
        }
        Ok(())
    }
}

fn map_pixels<T: Scalar>(
    pair: &SamplePair<T>,
    width: usize,
    height: usize,
    src_of: impl Fn(usize, usize) -> (usize, usize),
) -> SamplePair<T> {
    let image = RasterImage::from_fn(width, height, |x, y| {
        let (sx, sy) = src_of(x, y);
        pair.image.pixel(sx, sy)
    });
    let mask = BinaryMask::from_fn(width, height, |x, y| {
        let (sx, sy) = src_of(x, y);
        pair.mask.get(sx, sy)
    });
    SamplePair {
        image,
        mask,
        id: pair.id.clone(),
        patient_id: pair.patient_id.clone(),
    }
}

/// Mirror top to bottom.
pub fn vflip<T: Scalar>(pair: &SamplePair<T>) -> SamplePair<T> {
    let (w, h) = pair.dims();
    map_pixels(pair, w, h, |x, y| (x, h - 1 - y))
}

/// Mirror left to right.
pub fn hflip<T: Scalar>(pair: &SamplePair<T>) -> SamplePair<T> {
    let (w, h) = pair.dims();
    map_pixels(pair, w, h, |x, y| (w - 1 - x, y))
}

/// Counter-clockwise rotation by `quarter_turns * 90` degrees. Odd turns swap
/// width and height.
pub fn rot90<T: Scalar>(pair: &SamplePair<T>, quarter_turns: u8) -> SamplePair<T> {
    let (w, h) = pair.dims();
    match quarter_turns % 4 {
        0 => pair.clone(),
        1 => map_pixels(pair, h, w, |x, y| (w - 1 - y, x)),
        2 => map_pixels(pair, w, h, |x, y| (w - 1 - x, h - 1 - y)),
        _ => map_pixels(pair, h, w, |x, y| (y, h - 1 - x)),
    }
}

/// Scales by `s = 1 + scale_delta`, then zero-pads (shrink) or crops (grow)
/// about the centre so the output keeps the input dimensions.
pub fn resize_pad<T: Scalar>(pair: &SamplePair<T>, scale_delta: f64) -> Result<SamplePair<T>> {
    let scale = 1.0 + scale_delta;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Parameter(format!("resize scale {scale} must be positive")));
    }
    let (w, h) = pair.dims();
    let nw = ((w as f64 * scale).round() as usize).max(1);
    let nh = ((h as f64 * scale).round() as usize).max(1);
    if (nw, nh) == (w, h) {
        return Ok(pair.clone());
    }
    let image = resize_bilinear(&pair.image, nw, nh);
    let mask = resize_nearest(&pair.mask, nw, nh);

    // resized pixel (x + off_x, y + off_y) lands on output (x, y)
    let off_x = (nw as isize - w as isize) / 2;
    let off_y = (nh as isize - h as isize) / 2;
    let inside = |x: usize, y: usize| {
        let (sx, sy) = (x as isize + off_x, y as isize + off_y);
        (sx >= 0 && sy >= 0 && (sx as usize) < nw && (sy as usize) < nh).then_some((sx as usize, sy as usize))
    };
    let out_image = RasterImage::from_fn(w, h, |x, y| match inside(x, y) {
        Some((sx, sy)) => image.pixel(sx, sy),
        None => [T::zero(); 3],
    });
    let out_mask = BinaryMask::from_fn(w, h, |x, y| inside(x, y).is_some_and(|(sx, sy)| mask.get(sx, sy)));
    pair.with_rasters(out_image, out_mask)
}

/// Per-channel mean, computed as an offset from the first sample so a
/// constant channel yields exactly that constant.
fn channel_means<T: Scalar>(img: &RasterImage<T>) -> [T; 3] {
    let data = img.data();
    let n = data.len() / 3;
    let mut means = [T::zero(); 3];
    if n == 0 {
        return means;
    }
    for (c, m) in means.iter_mut().enumerate() {
        let base = data[c];
        let acc = data[c..].iter().step_by(3).fold(0.0f64, |acc, &v| acc + (v - base).as_f64());
        *m = base + T::of(acc / n as f64);
    }
    means
}

/// `clamp(mean + factor * (v - mean), 0, 1)` with a per-channel mean.
pub fn adjust_contrast<T: Scalar>(img: &RasterImage<T>, factor: f64) -> RasterImage<T> {
    if factor == 1.0 {
        return img.clone();
    }
    let means = channel_means(img);
    let f = T::of(factor);
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let m = means[i % 3];
            (m + f * (v - m)).max(T::zero()).min(T::one())
        })
        .collect();
    RasterImage::new_unchecked(img.width(), img.height(), data)
}

/// `clamp(v + delta, 0, 1)`.
pub fn adjust_brightness<T: Scalar>(img: &RasterImage<T>, delta: f64) -> RasterImage<T> {
    let d = T::of(delta);
    let data = img.data().iter().map(|&v| (v + d).max(T::zero()).min(T::one())).collect();
    RasterImage::new_unchecked(img.width(), img.height(), data)
}

/// The concrete augmentations drawn for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NaivePlan {
    pub hflip: bool,
    pub vflip: bool,
    pub rot90: Option<u8>,
    pub contrast: Option<f64>,
    pub brightness: Option<f64>,
    pub resize_delta: f64,
}

impl NaivePlan {
    /// Consumes the random stream in the fixed order `hflip, vflip, rot90,
    /// contrast, brightness, resize_pad`. Each of the first five draws one
    /// Bernoulli(`p_aug`) inclusion flag, then (when included and the op is
    /// parameterized) one uniform parameter: quarter turns from `{1, 2, 3}`,
    /// contrast factor and brightness delta from their closed ranges.
    /// Resize-pad is always included and draws only its delta.
    pub fn draw<R: Rng + ?Sized>(cfg: &NaiveAugConfig, rng: &mut R) -> Self {
        let p = cfg.p_aug;
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| rng.random_range(lo..=hi);
        let hflip = rng.random_bool(p);
        let vflip = rng.random_bool(p);
        let rot90 = rng.random_bool(p).then(|| rng.random_range(1u8..=3));
        let contrast = rng.random_bool(p).then(|| uniform(rng, cfg.contrast_range));
        let brightness = rng.random_bool(p).then(|| uniform(rng, cfg.brightness_range));
        let resize_delta = uniform(rng, cfg.resize_pad_range);
        Self {
            hflip,
            vflip,
            rot90,
            contrast,
            brightness,
            resize_delta,
        }
    }

    /// Optical ops first, then spatial ops in draw order.
    pub fn apply<T: Scalar>(&self, pair: &SamplePair<T>) -> Result<SamplePair<T>> {
        let mut out = pair.clone();
        if let Some(f) = self.contrast {
            out.image = adjust_contrast(&out.image, f);
        }
        if let Some(d) = self.brightness {
            out.image = adjust_brightness(&out.image, d);
        }
        if self.hflip {
            out = hflip(&out);
        }
        if self.vflip {
            out = vflip(&out);
        }
        if let Some(q) = self.rot90 {
            out = rot90(&out, q);
        }
        resize_pad(&out, self.resize_delta)
    }
}

/// Draws and applies a plan for a single pair.
pub fn apply_naive_single<T: Scalar, R: Rng + ?Sized>(
    pair: &SamplePair<T>,
    cfg: &NaiveAugConfig,
    rng: &mut R,
) -> Result<SamplePair<T>> {
    NaivePlan::draw(cfg, rng).apply(pair)
}

/// Independent plans for source then target, drawn from one stream.
pub fn apply_naive<T: Scalar, R: Rng + ?Sized>(
    src: &SamplePair<T>,
    tar: &SamplePair<T>,
    cfg: &NaiveAugConfig,
    rng: &mut R,
) -> Result<(SamplePair<T>, SamplePair<T>)> {
    cfg.validate()?;
    let src_plan = NaivePlan::draw(cfg, rng);
    let tar_plan = NaivePlan::draw(cfg, rng);
    Ok((src_plan.apply(src)?, tar_plan.apply(tar)?))
}
