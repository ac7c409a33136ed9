//! Antialiased bicubic image reduction.

use rayon::prelude::*;

use super::DatasetError;
use crate::appearance_sr::{cubic, CUBIC_A, SCALES};
use crate::formation::ViewImage;

/// Per-output-sample `(input index, weight)` lists along one axis.
///
/// Output sample `x` sits at input coordinate `(x + 0.5) * s - 0.5`. The
/// cubic kernel is stretched by `s` so it low-passes before decimating.
/// Out-of-range taps reflect symmetrically about the border, and each
/// list is normalized to sum to one.
pub fn axis_weights(in_len: usize, factor: u32) -> Vec<Vec<(usize, f64)>> {
    let s = factor as f64;
    let n = in_len as i64;
    (0..in_len / factor as usize)
        .map(|x| {
            let c = (x as f64 + 0.5) * s - 0.5;
            let lo = (c - 2.0 * s).floor() as i64;
            let hi = (c + 2.0 * s).ceil() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            for i in lo..=hi {
                let w = cubic((i as f64 - c).abs() / s, CUBIC_A);
                if w == 0.0 {
                    continue;
                }
                let mut r = i;
                while r < 0 || r >= n {
                    r = if r < 0 { -r - 1 } else { 2 * n - r - 1 };
                }
                match taps.iter_mut().find(|t| t.0 == r as usize) {
                    Some(t) => t.1 += w,
                    None => taps.push((r as usize, w)),
                }
            }
            taps.sort_by_key(|t| t.0);
            let sum: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= sum);
            taps
        })
        .collect()
}

/// Reduces an image by an integer factor to `floor(w/s) x floor(h/s)`.
pub fn downscale_image(img: &ViewImage, factor: u32) -> Result<ViewImage, DatasetError> {
    if !SCALES.contains(&factor) {
        return Err(DatasetError::InvalidFactor(factor));
    }
    let (w, h) = (img.width, img.height);
    let (ow, oh) = (w / factor as usize, h / factor as usize);
    if ow == 0 || oh == 0 {
        return Err(DatasetError::Invalid(format!("{w}x{h} image is too small for factor {factor}")));
    }
    let wx = axis_weights(w, factor);
    let wy = axis_weights(h, factor);
    let rows: Vec<[f64; 3]> = (0..h * ow)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % ow, k / ow);
            let mut acc = [0.0; 3];
            for &(i, wt) in &wx[x] {
                let c = img.rgb[y * w + i];
                for ch in 0..3 {
                    acc[ch] += wt * c[ch];
                }
            }
            acc
        })
        .collect();
    let rgb: Vec<[f64; 3]> = (0..oh * ow)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (k % ow, k / ow);
            let mut acc = [0.0; 3];
            for &(j, wt) in &wy[y] {
                let c = rows[j * ow + x];
                for ch in 0..3 {
                    acc[ch] += wt * c[ch];
                }
            }
            acc.map(|v| v.clamp(0.0, 1.0))
        })
        .collect();
    Ok(ViewImage {
        width: ow,
        height: oh,
        rgb,
        coverage: vec![true; ow * oh],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense 2D convolution with the stretched kernel and mirrored borders.
    fn oracle(img: &ViewImage, s: usize) -> Vec<[f64; 3]> {
        let (w, h) = (img.width as i64, img.height as i64);
        let mirror = |i: i64, n: i64| {
            let p = i.rem_euclid(2 * n);
            if p < n {
                p
            } else {
                2 * n - 1 - p
            }
        };
        let k = |d: f64| cubic(d.abs() / s as f64, -0.5);
        let mut out = Vec::new();
        for y in 0..img.height / s {
            for x in 0..img.width / s {
                let cx = (x as f64 + 0.5) * s as f64 - 0.5;
                let cy = (y as f64 + 0.5) * s as f64 - 0.5;
                let mut acc = [0.0; 3];
                let mut norm = 0.0;
                for j in -20..h + 20 {
                    for i in -20..w + 20 {
                        let wt = k(i as f64 - cx) * k(j as f64 - cy);
                        if wt == 0.0 {
                            continue;
                        }
                        let c = img.rgb[(mirror(j, h) * w + mirror(i, w)) as usize];
                        for ch in 0..3 {
                            acc[ch] += wt * c[ch];
                        }
                        norm += wt;
                    }
                }
                out.push(acc.map(|v| (v / norm).clamp(0.0, 1.0)));
            }
        }
        out
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = ViewImage::filled(2, 2, [0.3, 0.6, 0.9]);
        let out = downscale_image(&img, 2).unwrap();
        assert_eq!((out.width, out.height), (1, 1));
        for (v, e) in out.rgb[0].iter().zip([0.3, 0.6, 0.9]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn ramp_matches_dense_convolution() {
        let mut img = ViewImage::filled(4, 4, [0.0; 3]);
        for (k, c) in img.rgb.iter_mut().enumerate() {
            *c = [(k % 4) as f64 / 3.0; 3];
        }
        let out = downscale_image(&img, 2).unwrap();
        assert_eq!((out.width, out.height), (2, 2));
        let expect = oracle(&img, 2);
        for (a, b) in out.rgb.iter().zip(&expect) {
            assert!((a[0] - b[0]).abs() < 1e-12, "{a:?} vs {b:?}");
        }
        // Rows are identical and the ramp stays increasing and symmetric.
        assert_eq!(out.rgb[0], out.rgb[2]);
        assert!(out.rgb[0][0] < out.rgb[1][0]);
        assert!((out.rgb[0][0] + out.rgb[1][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_images_match_dense_convolution() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for s in 2..=4u32 {
            let (w, h) = (13, 11);
            let mut img = ViewImage::new(w, h);
            img.rgb.iter_mut().for_each(|c| *c = [next(), next(), next()]);
            let out = downscale_image(&img, s).unwrap();
            assert_eq!((out.width, out.height), (w / s as usize, h / s as usize));
            for (a, b) in out.rgb.iter().zip(oracle(&img, s as usize)) {
                for ch in 0..3 {
                    assert!((a[ch] - b[ch]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unsupported_factor() {
        let img = ViewImage::filled(10, 10, [0.0; 3]);
        assert!(matches!(downscale_image(&img, 5), Err(DatasetError::InvalidFactor(5))));
        assert!(matches!(downscale_image(&img, 1), Err(DatasetError::InvalidFactor(1))));
    }
}
