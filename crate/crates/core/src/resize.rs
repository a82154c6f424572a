//! Bilinear image and nearest-neighbour mask resampling, using pixel-centre
//! alignment (`src = (dst + 0.5) * in / out - 0.5`).

use crate::raster::{BinaryMask, RasterImage};
use crate::scalar::Scalar;

pub fn resize_bilinear<T: Scalar>(img: &RasterImage<T>, width: usize, height: usize) -> RasterImage<T> {
    let (sw, sh) = img.dims();
    if (sw, sh) == (width, height) {
        return img.clone();
    }
    if sw == 0 || sh == 0 {
        return RasterImage::zeros(width, height);
    }
    let axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, T) {
        let pos = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
        let pos = pos.clamp(0.0, (src_len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, T::of(pos - i0 as f64))
    };
    let xs: Vec<_> = (0..width).map(|x| axis(x, sw, width)).collect();
    let ys: Vec<_> = (0..height).map(|y| axis(y, sh, height)).collect();
    let src = img.data();
    let mut data = Vec::with_capacity(width * height * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let p = |x: usize, y: usize| src[(y * sw + x) * 3 + c];
                let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
                let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
                let v = top + (bottom - top) * fy;
                data.push(v.max(T::zero()).min(T::one()));
            }
        }
    }
    RasterImage::new_unchecked(width, height, data)
}

/// Nearest-neighbour resampling; the output is binary by construction.
pub fn resize_nearest(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    let (sw, sh) = mask.dims();
    if (sw, sh) == (width, height) {
        return mask.clone();
    }
    if sw == 0 || sh == 0 {
        return BinaryMask::zeros(width, height);
    }
    let pick = |dst: usize, src_len: usize, dst_len: usize| -> usize {
        (((dst as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as usize).min(src_len - 1)
    };
    let xs: Vec<usize> = (0..width).map(|x| pick(x, sw, width)).collect();
    let ys: Vec<usize> = (0..height).map(|y| pick(y, sh, height)).collect();
    BinaryMask::from_fn(width, height, |x, y| mask.get(xs[x], ys[y]))
}
