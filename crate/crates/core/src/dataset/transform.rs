//! Per-image preprocessing: resizing, pair combination, value scaling.

use super::pixels::{PixelDomain, PixelTensor};
use crate::error::{Error, Result};

const C: usize = PixelTensor::CHANNELS;

/// Bilinear resize (pixel-centre aligned, edge-clamped) of a raw image.
/// Output intensities are rounded half up to whole values.
pub fn resize_image(img: &PixelTensor, height: usize, width: usize) -> Result<PixelTensor> {
    if img.domain() != PixelDomain::Raw {
        return Err(Error::Domain("resize expects a raw [0, 255] image".into()));
    }
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot resize to {height}×{width}"
        )));
    }
    let (in_h, in_w) = (img.height(), img.width());
    if (in_h, in_w) == (height, width) {
        return Ok(img.clone());
    }
    let ys = axis_samples(in_h, height);
    let xs = axis_samples(in_w, width);
    let src = img.data();
    let mut data = Vec::with_capacity(height * width * C);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..C {
                let at = |y: usize, x: usize| src[(y * in_w + x) * C + c] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push((v + 0.5).floor().clamp(0.0, 255.0) as f32);
            }
        }
    }
    Ok(PixelTensor::from_parts_unchecked(
        height,
        width,
        data,
        PixelDomain::Raw,
    ))
}

fn axis_samples(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let pos = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(input - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// Places `source` and `target` side by side (source on the left).
pub fn combine_pair(source: &PixelTensor, target: &PixelTensor) -> Result<PixelTensor> {
    if source.height() != target.height() || source.width() != target.width() {
        return Err(Error::Shape(format!(
            "source is {}×{}, target is {}×{}",
            source.height(),
            source.width(),
            target.height(),
            target.width()
        )));
    }
    if source.height() != source.width() {
        return Err(Error::Shape(format!(
            "pair halves must be square, got {}×{}",
            source.height(),
            source.width()
        )));
    }
    if source.domain() != target.domain() {
        return Err(Error::Domain(
            "source and target are in different value domains".into(),
        ));
    }
    let (h, w) = (source.height(), source.width());
    let mut data = Vec::with_capacity(h * w * 2 * C);
    for y in 0..h {
        data.extend_from_slice(&source.data()[y * w * C..(y + 1) * w * C]);
        data.extend_from_slice(&target.data()[y * w * C..(y + 1) * w * C]);
    }
    Ok(PixelTensor::from_parts_unchecked(
        h,
        2 * w,
        data,
        source.domain(),
    ))
}

/// Splits a combined `N × 2N` image at column `N`.
pub fn split_combined(combined: &PixelTensor) -> Result<(PixelTensor, PixelTensor)> {
    let (h, w) = (combined.height(), combined.width());
    if w != 2 * h {
        return Err(Error::Shape(format!(
            "combined image must be N×2N, got {h}×{w}"
        )));
    }
    Ok((combined.columns(0, h)?, combined.columns(h, w)?))
}

/// Maps `[0, 255]` onto `[-1, 1]` with `v / 127.5 - 1`.
pub fn normalize(img: &PixelTensor) -> Result<PixelTensor> {
    if img.domain() != PixelDomain::Raw {
        return Err(Error::Domain("image is already normalized".into()));
    }
    let data = img.data().iter().map(|&v| normalize_value(v)).collect();
    Ok(PixelTensor::from_parts_unchecked(
        img.height(),
        img.width(),
        data,
        PixelDomain::Normalized,
    ))
}

pub fn normalize_value(v: f32) -> f32 {
    v / 127.5 - 1.0
}

/// Maps `[-1, 1]` back onto whole values in `[0, 255]`: clamp, `(v + 1) · 127.5`,
/// round half up.
pub fn denormalize(img: &PixelTensor) -> Result<PixelTensor> {
    if img.domain() != PixelDomain::Normalized {
        return Err(Error::Domain("image is not normalized".into()));
    }
    Ok(denormalize_values(img.height(), img.width(), img.data()))
}

pub(crate) fn denormalize_values(height: usize, width: usize, values: &[f32]) -> PixelTensor {
    let mut clamped = 0usize;
    let data = values
        .iter()
        .map(|&v| {
            if !(-1.0..=1.0).contains(&v) {
                clamped += 1;
            }
            denormalize_value(v)
        })
        .collect();
    if clamped > 0 {
        log::debug!("denormalize clamped {clamped} values into [-1, 1]");
    }
    PixelTensor::from_parts_unchecked(height, width, data, PixelDomain::Raw)
}

pub fn denormalize_value(v: f32) -> f32 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    ((v + 1.0) * 127.5 + 0.5).floor().clamp(0.0, 255.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(h: usize, w: usize, f: impl Fn(usize, usize, usize) -> f32) -> PixelTensor {
        let mut data = Vec::new();
        for y in 0..h {
            for x in 0..w {
                for c in 0..C {
                    data.push(f(y, x, c));
                }
            }
        }
        PixelTensor::new(h, w, data, PixelDomain::Raw).unwrap()
    }

    #[test]
    fn resize_300x200_to_256() {
        let img = raw(200, 300, |y, x, c| ((y + x + c) % 256) as f32);
        let out = resize_image(&img, 256, 256).unwrap();
        assert_eq!((out.height(), out.width()), (256, 256));
        assert!(out.data().iter().all(|v| (0.0..=255.0).contains(v)));
    }

    #[test]
    fn resize_constant_same_size_is_identity() {
        let img = PixelTensor::filled(256, 256, 7.0, PixelDomain::Raw).unwrap();
        assert_eq!(resize_image(&img, 256, 256).unwrap(), img);
    }

    #[test]
    fn checkerboard_upscale_keeps_corner_values() {
        // Brute-force bilinear evaluation: the corner output pixel centre maps
        // outside the source, clamps onto the corner texel, so weights are (1, 0).
        let img = raw(2, 2, |y, x, _| if (y + x) % 2 == 0 { 0.0 } else { 255.0 });
        let out = resize_image(&img, 256, 256).unwrap();
        assert_eq!(out.get(0, 0, 0), 0.0);
        assert_eq!(out.get(0, 255, 0), 255.0);
        assert_eq!(out.get(255, 0, 0), 255.0);
        assert_eq!(out.get(255, 255, 0), 0.0);
    }

    #[test]
    fn resize_rejects_normalized_input() {
        let img = PixelTensor::filled(4, 4, 0.0, PixelDomain::Normalized).unwrap();
        assert!(resize_image(&img, 2, 2).is_err());
    }

    #[test]
    fn black_white_combination() {
        let s = PixelTensor::filled(256, 256, 0.0, PixelDomain::Raw).unwrap();
        let t = PixelTensor::filled(256, 256, 255.0, PixelDomain::Raw).unwrap();
        let c = combine_pair(&s, &t).unwrap();
        assert_eq!((c.height(), c.width()), (256, 512));
        for y in [0, 100, 255] {
            assert_eq!(c.get(y, 255, 1), 0.0);
            assert_eq!(c.get(y, 256, 1), 255.0);
        }
    }

    #[test]
    fn split_constant_halves() {
        let c = raw(256, 512, |_, x, _| if x < 256 { 10.0 } else { 200.0 });
        let (s, t) = split_combined(&c).unwrap();
        assert_eq!(
            s,
            PixelTensor::filled(256, 256, 10.0, PixelDomain::Raw).unwrap()
        );
        assert_eq!(
            t,
            PixelTensor::filled(256, 256, 200.0, PixelDomain::Raw).unwrap()
        );
    }

    #[test]
    fn split_gradient_matches_direct_indexing() {
        let c = raw(256, 512, |_, x, _| (x / 2) as f32);
        let (s, t) = split_combined(&c).unwrap();
        for y in [0, 17, 255] {
            assert_eq!(s.get(y, 0, 0), c.get(y, 0, 0));
            assert_eq!(s.get(y, 255, 2), c.get(y, 255, 2));
            assert_eq!(t.get(y, 0, 0), c.get(y, 256, 0));
            assert_eq!(t.get(y, 255, 1), c.get(y, 511, 1));
        }
    }

    #[test]
    fn shape_errors() {
        let a = PixelTensor::filled(256, 256, 0.0, PixelDomain::Raw).unwrap();
        let b = PixelTensor::filled(128, 128, 0.0, PixelDomain::Raw).unwrap();
        assert!(combine_pair(&a, &b).is_err());
        assert!(split_combined(&a).is_err());
        let n = normalize(&a).unwrap();
        assert!(combine_pair(&a, &n).is_err());
    }

    #[test]
    fn normalize_reference_values() {
        assert_eq!(normalize_value(0.0), -1.0);
        assert_eq!(normalize_value(255.0), 1.0);
        assert_eq!(normalize_value(127.5), 0.0);
        assert!((normalize_value(64.0) - (64.0 / 127.5 - 1.0)).abs() < 1e-7);
        assert!((normalize_value(64.0) + 0.498_039).abs() < 1e-6);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        assert!(PixelTensor::new(1, 1, vec![0.0, 300.0, 1.0], PixelDomain::Raw).is_err());
        let n = PixelTensor::filled(1, 1, 0.5, PixelDomain::Normalized).unwrap();
        assert!(normalize(&n).is_err());
    }

    #[test]
    fn denormalize_reference_values() {
        assert_eq!(denormalize_value(-1.0), 0.0);
        assert_eq!(denormalize_value(1.0), 255.0);
        assert_eq!(denormalize_value(0.0), 128.0);
        assert_eq!(denormalize_value(1.3), 255.0);
        assert_eq!(denormalize_value(-7.0), 0.0);
    }

    #[test]
    fn denormalize_inverts_normalize_on_all_bytes() {
        for v in 0..=255u8 {
            assert_eq!(
                denormalize_value(normalize_value(v as f32)),
                v as f32,
                "value {v}"
            );
        }
    }
}
