//! Mask-aware interpolation from a low-resolution texture to its HR atlas.

use rayon::prelude::*;

use super::{check_scale, InterpKernel, SrError};
use crate::retrieval::TextureAtlas;

/// Renormalized weights whose sum falls at or below this are treated as
/// cancelled out by negative lobes.
const MIN_WEIGHT_SUM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct UpsampleResult {
    pub texture: TextureAtlas,
    /// HR texels inside the mask whose neighborhood had no active LR texel.
    pub unseen: Vec<bool>,
}

impl UpsampleResult {
    pub fn unseen_count(&self) -> usize {
        self.unseen.iter().filter(|&&u| u).count()
    }
}

/// Source coordinate of HR texel `x` at scale `s`, with texel centers aligned.
pub fn source_coordinate(x: usize, scale: u32) -> f64 {
    (x as f64 + 0.5) / scale as f64 - 0.5
}

/// Normalized 2D weights of the active LR taps around `(xs, ys)`.
///
/// Taps on inactive or out-of-range texels are dropped. If the survivors
/// sum to almost nothing, only the positive ones are kept. Returns an
/// empty list when no usable tap remains.
pub fn masked_weights(lr: &TextureAtlas, kernel: InterpKernel, xs: f64, ys: f64) -> Vec<(usize, f64)> {
    let (w, h) = (lr.width as i64, lr.height as i64);
    let tx = kernel.taps(xs);
    let ty = kernel.taps(ys);
    let mut taps = Vec::with_capacity(tx.len() * ty.len());
    for &(j, wy) in &ty {
        if j < 0 || j >= h {
            continue;
        }
        for &(i, wx) in &tx {
            if i < 0 || i >= w {
                continue;
            }
            let idx = (j * w + i) as usize;
            if lr.mask[idx] {
                taps.push((idx, wx * wy));
            }
        }
    }
    let mut sum: f64 = taps.iter().map(|t| t.1).sum();
    if sum <= MIN_WEIGHT_SUM {
        taps.retain(|t| t.1 > 0.0);
        sum = taps.iter().map(|t| t.1).sum();
        if sum <= 0.0 {
            return Vec::new();
        }
    }
    taps.iter_mut().for_each(|t| t.1 /= sum);
    taps
}

/// Upsamples `lr` by an integer factor onto `hr_mask`.
///
/// Output colors are clamped to [0, 1] and are zero outside `hr_mask`.
pub fn upsample_interp(
    lr: &TextureAtlas,
    scale: u32,
    kernel: InterpKernel,
    hr_mask: &[bool],
    hr_size: (usize, usize),
) -> Result<UpsampleResult, SrError> {
    check_scale(scale)?;
    let (hw, hh) = hr_size;
    if hw / scale as usize != lr.width || hh / scale as usize != lr.height || hr_mask.len() != hw * hh {
        return Err(SrError::MaskMismatch {
            expected: format!("floor(size / {scale}) = {}x{}", lr.width, lr.height),
            found: format!("{hw}x{hh} with {} mask entries", hr_mask.len()),
        });
    }
    let (rgb, unseen): (Vec<[f64; 3]>, Vec<bool>) = (0..hw * hh)
        .into_par_iter()
        .map(|k| {
            if !hr_mask[k] {
                return ([0.0; 3], false);
            }
            let xs = source_coordinate(k % hw, scale);
            let ys = source_coordinate(k / hw, scale);
            let taps = masked_weights(lr, kernel, xs, ys);
            if taps.is_empty() {
                return ([0.0; 3], true);
            }
            let mut c = [0.0; 3];
            for (idx, w) in taps {
                for ch in 0..3 {
                    c[ch] += w * lr.rgb[idx][ch];
                }
            }
            (c.map(|v| v.clamp(0.0, 1.0)), false)
        })
        .unzip();
    Ok(UpsampleResult {
        texture: TextureAtlas::new(hw, hh, rgb, hr_mask.to_vec()),
        unseen,
    })
}
