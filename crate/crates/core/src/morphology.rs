//! Structuring elements, binary dilation and the separable Gaussian blur
//! applied to the dilated mask before compositing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, SoftMask};
use crate::scalar::Scalar;

/// Footprint family of a structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    /// Ones on the anchor row and anchor column. Written `DILATE` in the
    /// triple shorthand.
    Cross,
    /// All ones.
    Rect,
    /// Filled ellipse inscribed in the `k x k` box.
    Open,
}

impl KernelShape {
    pub const ALL: [KernelShape; 3] = [KernelShape::Cross, KernelShape::Rect, KernelShape::Open];

    /// Name used by the `KERNEL-SIZE-SIGMA` shorthand.
    pub fn shorthand(self) -> &'static str {
        match self {
            KernelShape::Cross => "DILATE",
            KernelShape::Rect => "RECT",
            KernelShape::Open => "OPEN",
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.shorthand())
    }
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dilate" | "cross" => Ok(KernelShape::Cross),
            "rect" | "rectangular" => Ok(KernelShape::Rect),
            "open" | "ellipse" => Ok(KernelShape::Open),
            other => Err(Error::Parameter(format!("unknown kernel shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub size: usize,
}

impl KernelSpec {
    pub fn new(shape: KernelShape, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter("kernel size must be at least 1".into()));
        }
        Ok(Self { shape, size })
    }
}

/// A `k x k` binary footprint anchored at `(k / 2, k / 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    size: usize,
    cells: Vec<u8>,
}

impl StructuringElement {
    /// Arbitrary footprint. The anchor cell must be set.
    pub fn from_cells(size: usize, cells: Vec<u8>) -> Result<Self> {
        if size == 0 || cells.len() != size * size || cells.iter().any(|&c| c > 1) {
            return Err(Error::Parameter(format!(
                "structuring element needs {size}x{size} binary cells"
            )));
        }
        let a = size / 2;
        if cells[a * size + a] != 1 {
            return Err(Error::Parameter("anchor cell must be set".into()));
        }
        Ok(Self { size, cells })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `(row, col)` of the anchor.
    pub fn anchor(&self) -> (usize, usize) {
        (self.size / 2, self.size / 2)
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.size + col] == 1
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// Maximal horizontal runs of ones per row, as inclusive column ranges.
    fn row_runs(&self) -> Vec<Vec<(usize, usize)>> {
        (0..self.size)
            .map(|r| {
                let mut runs = Vec::new();
                let mut start = None;
                for c in 0..=self.size {
                    let on = c < self.size && self.get(r, c);
                    match (on, start) {
                        (true, None) => start = Some(c),
                        (false, Some(s)) => {
                            runs.push((s, c - 1));
                            start = None;
                        }
                        _ => {}
                    }
                }
                runs
            })
            .collect()
    }
}

pub fn make_element(spec: KernelSpec) -> StructuringElement {
    let k = spec.size;
    let a = k / 2;
    let k2 = (k * k) as i64;
    let mut cells = vec![0u8; k * k];
    for r in 0..k {
        for c in 0..k {
            let on = match spec.shape {
                KernelShape::Cross => r == a || c == a,
                KernelShape::Rect => true,
                KernelShape::Open => {
                    // cell centre inside the inscribed disk, in doubled coordinates
                    let dr = 2 * r as i64 + 1 - k as i64;
                    let dc = 2 * c as i64 + 1 - k as i64;
                    dr * dr + dc * dc <= k2
                }
            };
            cells[r * k + c] = u8::from(on);
        }
    }
    StructuringElement { size: k, cells }
}

/// Binary dilation. Output pixel `p` is set when some set cell `q` of the
/// element, placed with its anchor on `p`, lands on a set input pixel at
/// `p + (q - anchor)`. Out-of-bounds neighbours count as 0.
pub fn dilate(mask: &BinaryMask, element: &StructuringElement) -> BinaryMask {
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let (ar, ac) = element.anchor();
    let runs = element.row_runs();
    let src = mask.data();

    // per-row prefix counts turn each run into an O(1) window query
    let mut prefix = vec![0u32; h * (w + 1)];
    for y in 0..h {
        let row = &mut prefix[y * (w + 1)..(y + 1) * (w + 1)];
        for x in 0..w {
            row[x + 1] = row[x] + u32::from(src[y * w + x]);
        }
    }

    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for (er, row_runs) in runs.iter().enumerate() {
            if row_runs.is_empty() {
                continue;
            }
            let sy = y as isize + er as isize - ar as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            let pre = &prefix[sy as usize * (w + 1)..(sy as usize + 1) * (w + 1)];
            if pre[w] == 0 {
                continue;
            }
            let dst = &mut out[y * w..(y + 1) * w];
            for &(c0, c1) in row_runs {
                let lo_off = c0 as isize - ac as isize;
                let hi_off = c1 as isize - ac as isize;
                for (x, d) in dst.iter_mut().enumerate() {
                    if *d == 1 {
                        continue;
                    }
                    let lo = (x as isize + lo_off).max(0);
                    let hi = (x as isize + hi_off).min(w as isize - 1);
                    if lo <= hi && pre[hi as usize + 1] > pre[lo as usize] {
                        *d = 1;
                    }
                }
            }
        }
    }
    BinaryMask::new_unchecked(w, h, out)
}

/// Truncation radius `ceil(3 sigma)`.
pub fn gaussian_radius<T: Scalar>(sigma: T) -> usize {
    (sigma * T::of(3.0)).ceil().to_usize().unwrap_or(0)
}

/// Normalized 1-D Gaussian taps over `[-r, r]`, `r = ceil(3 sigma)`.
/// `sigma = 0` gives the single tap `[1]`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "gaussian sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == T::zero() {
        return Ok(vec![T::one()]);
    }
    let r = gaussian_radius(sigma) as isize;
    let two_var = T::of(2.0) * sigma * sigma;
    let mut taps: Vec<T> = (-r..=r)
        .map(|d| {
            let d = T::of(d as f64);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let sum = taps.iter().fold(T::zero(), |acc, &v| acc + v);
    for t in &mut taps {
        *t = *t / sum;
    }
    Ok(taps)
}

/// Separable Gaussian blur with edge replication. Rejects negative sigma;
/// `sigma = 0` returns the input unchanged.
pub fn gaussian_blur<T: Scalar>(mask: &SoftMask<T>, sigma: T) -> Result<SoftMask<T>> {
    let taps = gaussian_kernel(sigma)?;
    if taps.len() == 1 {
        return Ok(mask.clone());
    }
    let (w, h) = mask.dims();
    if w == 0 || h == 0 {
        return Ok(mask.clone());
    }
    let r = (taps.len() / 2) as isize;
    let src = mask.data();
    let clamp_idx = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (t, &k) in taps.iter().enumerate() {
                acc = acc + k * row[clamp_idx(x as isize + t as isize - r, w)];
            }
            horiz[y * w + x] = acc;
        }
    }

    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for (t, &k) in taps.iter().enumerate() {
            let sy = clamp_idx(y as isize + t as isize - r, h);
            let src_row = &horiz[sy * w..(sy + 1) * w];
            for (o, &v) in out[y * w..(y + 1) * w].iter_mut().zip(src_row) {
                *o = *o + k * v;
            }
        }
    }
    for v in &mut out {
        *v = v.max(T::zero()).min(T::one());
    }
    Ok(SoftMask::new_unchecked(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight neighbourhood scan, kept independent of the run/prefix path.
    fn dilate_oracle(mask: &BinaryMask, e: &StructuringElement) -> BinaryMask {
        let (w, h) = mask.dims();
        let (ar, ac) = e.anchor();
        BinaryMask::from_fn(w, h, |x, y| {
            for r in 0..e.size() {
                for c in 0..e.size() {
                    if !e.get(r, c) {
                        continue;
                    }
                    let sx = x as i64 + c as i64 - ac as i64;
                    let sy = y as i64 + r as i64 - ar as i64;
                    if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h && mask.get(sx as usize, sy as usize) {
                        return true;
                    }
                }
            }
            false
        })
    }

    fn random_mask(rng: &mut impl Rng, w: usize, h: usize, p: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.random_bool(p))
    }

    #[test]
    fn cross_five_has_nine_ones_on_middle_lines() {
        let e = make_element(KernelSpec::new(KernelShape::Cross, 5).unwrap());
        assert_eq!(e.count_ones(), 9);
        for r in 0..5 {
            for c in 0..5 {
                assert_eq!(e.get(r, c), r == 2 || c == 2);
            }
        }
    }

    #[test]
    fn rect_three_is_full() {
        let e = make_element(KernelSpec::new(KernelShape::Rect, 3).unwrap());
        assert_eq!(e.cells(), &[1; 9]);
    }

    #[test]
    fn open_matches_ellipse_membership() {
        for k in 1..=41 {
            let e = make_element(KernelSpec::new(KernelShape::Open, k).unwrap());
            let half = k as f64 / 2.0;
            for r in 0..k {
                for c in 0..k {
                    let (dy, dx) = (r as f64 + 0.5 - half, c as f64 + 0.5 - half);
                    assert_eq!(e.get(r, c), dx * dx + dy * dy <= half * half, "k={k} ({r},{c})");
                }
            }
            let (ar, ac) = e.anchor();
            assert!(e.get(ar, ac));
        }
        // 5x5 disk drops only the four corners
        let e5 = make_element(KernelSpec::new(KernelShape::Open, 5).unwrap());
        assert_eq!(e5.count_ones(), 21);
    }

    #[test]
    fn anchor_is_set_for_every_shape_and_size() {
        for shape in KernelShape::ALL {
            for k in 1..=40 {
                let e = make_element(KernelSpec::new(shape, k).unwrap());
                let (ar, ac) = e.anchor();
                assert!(e.get(ar, ac));
            }
        }
    }

    #[test]
    fn zero_size_is_rejected() {
        assert!(KernelSpec::new(KernelShape::Rect, 0).is_err());
        assert!(StructuringElement::from_cells(3, vec![1, 1, 1, 1, 0, 1, 1, 1, 1]).is_err());
    }

    #[test]
    fn single_pixel_rect_three() {
        let mut m = BinaryMask::zeros(7, 7);
        m.set(3, 3, true);
        let e = make_element(KernelSpec::new(KernelShape::Rect, 3).unwrap());
        let d = dilate(&m, &e);
        let expected = BinaryMask::from_fn(7, 7, |x, y| (2..=4).contains(&x) && (2..=4).contains(&y));
        assert_eq!(d, expected);
    }

    #[test]
    fn empty_stays_empty() {
        for shape in KernelShape::ALL {
            let e = make_element(KernelSpec::new(shape, 10).unwrap());
            assert_eq!(dilate(&BinaryMask::zeros(9, 6), &e), BinaryMask::zeros(9, 6));
        }
    }

    #[test]
    fn even_kernel_offsets_follow_anchor() {
        // k = 2, anchor (1, 1): cells cover offsets {-1, 0} in each axis
        let mut m = BinaryMask::zeros(4, 4);
        m.set(1, 1, true);
        let e = make_element(KernelSpec::new(KernelShape::Rect, 2).unwrap());
        let expected = BinaryMask::from_fn(4, 4, |x, y| (1..=2).contains(&x) && (1..=2).contains(&y));
        assert_eq!(dilate(&m, &e), expected);
    }

    #[test]
    fn matches_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for shape in KernelShape::ALL {
            for k in 1..=9 {
                let e = make_element(KernelSpec::new(shape, k).unwrap());
                for _ in 0..20 {
                    let m = random_mask(&mut rng, 23, 17, 0.05);
                    assert_eq!(dilate(&m, &e), dilate_oracle(&m, &e));
                }
            }
        }
    }

    #[test]
    fn arbitrary_element_with_gaps_matches_oracle() {
        // two runs on the anchor row exercise the multi-run path
        let cells = vec![
            1, 0, 0, 0, 1, //
            0, 0, 0, 0, 0, //
            1, 0, 1, 0, 1, //
            0, 0, 0, 0, 0, //
            0, 1, 1, 0, 0,
        ];
        let e = StructuringElement::from_cells(5, cells).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let m = random_mask(&mut rng, 13, 11, 0.1);
            assert_eq!(dilate(&m, &e), dilate_oracle(&m, &e));
        }
    }

    #[test]
    fn dilation_is_extensive_monotone_and_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for shape in KernelShape::ALL {
            let e = make_element(KernelSpec::new(shape, 4).unwrap());
            for _ in 0..50 {
                let m = random_mask(&mut rng, 16, 16, 0.1);
                let extra = random_mask(&mut rng, 16, 16, 0.1);
                let bigger = BinaryMask::from_fn(16, 16, |x, y| m.get(x, y) || extra.get(x, y));
                let d = dilate(&m, &e);
                assert!(m.is_subset_of(&d));
                assert!(d.is_subset_of(&dilate(&bigger, &e)));
                assert!(d.is_subset_of(&dilate(&d, &e)));
            }
        }
    }

    #[test]
    fn kernel_sums_to_one_and_is_symmetric() {
        for sigma in [0.4, 0.7, 1.0, 2.0, 5.0] {
            let taps = gaussian_kernel(sigma).unwrap();
            let r = (3.0 * sigma as f64).ceil() as usize;
            assert_eq!(taps.len(), 2 * r + 1);
            assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..taps.len() {
                assert_eq!(taps[i], taps[taps.len() - 1 - i]);
            }
        }
        assert_eq!(gaussian_kernel(0.0f32).unwrap(), vec![1.0]);
    }

    #[test]
    fn negative_sigma_rejected() {
        let m = SoftMask::constant(4, 4, 0.5f64);
        assert!(gaussian_blur(&m, -0.1).is_err());
        assert!(gaussian_blur(&m, f64::NAN).is_err());
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let m: SoftMask<f64> = random_mask(&mut rng, 12, 9, 0.3).to_soft();
        assert_eq!(gaussian_blur(&m, 0.0).unwrap(), m);
    }

    #[test]
    fn constant_field_is_preserved() {
        for sigma in [0.4, 1.0, 5.0] {
            let m = SoftMask::constant(20, 15, 0.37f64);
            let b = gaussian_blur(&m, sigma).unwrap();
            assert!(b.data().iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn impulse_response_matches_analytic_gaussian() {
        let sigma = 1.0f64;
        let r = 3i64;
        let n = 31;
        let mut data = vec![0.0; n * n];
        data[15 * n + 15] = 1.0;
        let b = gaussian_blur(&SoftMask::new(n, n, data).unwrap(), sigma).unwrap();
        let z: f64 = (-r..=r).map(|d| (-(d * d) as f64 / 2.0).exp()).sum();
        for dy in -r..=r {
            for dx in -r..=r {
                let expected = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp() / (z * z);
                let got = b.get((15 + dx) as usize, (15 + dy) as usize);
                assert!((got - expected).abs() < 1e-6);
            }
        }
        // nothing leaks past the truncation radius
        assert_eq!(b.get(15 + 4, 15), 0.0);
    }

    #[test]
    fn blur_preserves_interior_mass_and_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sigma = 1.5f64;
        let r = gaussian_radius(sigma);
        let n = 40;
        let inner = random_mask(&mut rng, n - 4 * r, n - 4 * r, 0.4);
        let m: SoftMask<f64> = BinaryMask::from_fn(n, n, |x, y| {
            x >= 2 * r && y >= 2 * r && x < n - 2 * r && y < n - 2 * r && inner.get(x - 2 * r, y - 2 * r)
        })
        .to_soft();
        let b = gaussian_blur(&m, sigma).unwrap();
        let before: f64 = m.data().iter().sum();
        let after: f64 = b.data().iter().sum();
        assert!((before - after).abs() < 1e-6);
        assert!(b.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn shape_parsing() {
        assert_eq!("DILATE".parse::<KernelShape>().unwrap(), KernelShape::Cross);
        assert_eq!("rect".parse::<KernelShape>().unwrap(), KernelShape::Rect);
        assert_eq!("Open".parse::<KernelShape>().unwrap(), KernelShape::Open);
        assert!("disk".parse::<KernelShape>().is_err());
    }
}
