//! Texture retrieval: inverting the per-view projection operators.
//!
//! Two estimators are provided. Weighted backprojection divides the summed
//! adjoint color of every texel by its summed weight, which is a convex
//! combination of the pixels that observed it. The least-squares estimator
//! refines that result with CGLS on
//! `sum_i ||P_i T - H_i||^2 + lambda ||T - T0||^2`, one channel at a time.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formation::{apply_adjoint, FormationError, SparseProjectionOperator, ViewImage};
use crate::geometry::TexelAtlasMap;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("got {ops} operators but {images} images")]
    ViewMismatch { ops: usize, images: usize },
    #[error("view {view}: {source}")]
    Formation {
        view: usize,
        source: FormationError,
    },
    #[error("view {view}: operator built for a {found:?} atlas, expected {expected:?}")]
    AtlasMismatch {
        view: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("no active texel is observed by any view")]
    NoObservations,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// RGB texture over the atlas with its active-texel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureAtlas {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub mask: Vec<bool>,
}

impl TextureAtlas {
    /// Builds a texture, zeroing colors outside the mask.
    pub fn new(width: usize, height: usize, mut rgb: Vec<[f64; 3]>, mask: Vec<bool>) -> Self {
        assert_eq!(rgb.len(), width * height, "color buffer size");
        assert_eq!(mask.len(), width * height, "mask size");
        for (c, &m) in rgb.iter_mut().zip(&mask) {
            if !m {
                *c = [0.0; 3];
            }
        }
        Self {
            width,
            height,
            rgb,
            mask,
        }
    }

    pub fn zeros(width: usize, height: usize, mask: Vec<bool>) -> Self {
        Self::new(width, height, vec![[0.0; 3]; width * height], mask)
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3], mask: Vec<bool>) -> Self {
        Self::new(width, height, vec![color; width * height], mask)
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn clamp_in_place(&mut self) {
        for c in &mut self.rgb {
            *c = c.map(|v| v.clamp(0.0, 1.0));
        }
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rgb.iter().map(|p| p[c]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    Backprojection,
    LeastSquares,
}

impl fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Backprojection => "backprojection",
            Self::LeastSquares => "least_squares",
        })
    }
}

impl FromStr for RetrievalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "backprojection" => Ok(Self::Backprojection),
            "least_squares" | "least-squares" => Ok(Self::LeastSquares),
            other => Err(format!("unknown retrieval mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    pub mode: RetrievalMode,
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            mode: RetrievalMode::Backprojection,
            lambda: 1e-3,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(RetrievalError::InvalidConfig(format!("lambda {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(RetrievalError::InvalidConfig(format!("tol {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackprojectionResult {
    pub texture: TextureAtlas,
    /// Active texels that no view observed.
    pub unseen: Vec<bool>,
}

impl BackprojectionResult {
    pub fn unseen_count(&self) -> usize {
        self.unseen.iter().filter(|&&u| u).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresResult {
    pub texture: TextureAtlas,
    pub unseen: Vec<bool>,
    pub converged: bool,
    /// Iterations taken per channel.
    pub iterations: [usize; 3],
    /// Residual norm `||b - A x_k||` per channel, starting at `x_0`.
    pub residual_history: [Vec<f64>; 3],
}

fn check_inputs(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    atlas: (usize, usize),
) -> Result<(), RetrievalError> {
    if ops.len() != images.len() {
        return Err(RetrievalError::ViewMismatch {
            ops: ops.len(),
            images: images.len(),
        });
    }
    for (view, (op, img)) in ops.iter().zip(images).enumerate() {
        if op.atlas_size() != atlas {
            return Err(RetrievalError::AtlasMismatch {
                view,
                expected: atlas,
                found: op.atlas_size(),
            });
        }
        if (img.width, img.height) != op.view_size() {
            return Err(RetrievalError::Formation {
                view,
                source: FormationError::DimensionMismatch {
                    expected: format!("{:?}", op.view_size()),
                    found: format!("{:?}", (img.width, img.height)),
                },
            });
        }
    }
    Ok(())
}

/// Sums the adjoint of every view, in view order.
pub(crate) fn accumulate_adjoint(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    texel_count: usize,
) -> Result<(Vec<[f64; 3]>, Vec<f64>), RetrievalError> {
    let mut num = vec![[0.0; 3]; texel_count];
    let mut den = vec![0.0; texel_count];
    for (view, (op, img)) in ops.iter().zip(images).enumerate() {
        let acc = apply_adjoint(op, img).map_err(|source| RetrievalError::Formation { view, source })?;
        num.par_iter_mut()
            .zip(den.par_iter_mut())
            .zip(acc.rgb.par_iter().zip(acc.weight.par_iter()))
            .for_each(|((n, d), (c, w))| {
                for k in 0..3 {
                    n[k] += c[k];
                }
                *d += w;
            });
    }
    Ok((num, den))
}

/// Weighted backprojection: per texel, summed adjoint color over summed
/// weight. Unobserved active texels stay active with color 0 and are
/// reported in `unseen`.
pub fn retrieve_backprojection(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    atlas: &TexelAtlasMap,
) -> Result<BackprojectionResult, RetrievalError> {
    let dims = (atlas.width(), atlas.height());
    check_inputs(ops, images, dims)?;
    let (num, den) = accumulate_adjoint(ops, images, atlas.texel_count())?;
    let mask = atlas.mask().to_vec();
    let mut unseen = vec![false; mask.len()];
    let mut rgb = vec![[0.0; 3]; mask.len()];
    for t in 0..mask.len() {
        if !mask[t] {
            continue;
        }
        if den[t] > 0.0 {
            rgb[t] = num[t].map(|c| (c / den[t]).clamp(0.0, 1.0));
        } else {
            unseen[t] = true;
        }
    }
    let observed = mask.iter().zip(&unseen).any(|(&m, &u)| m && !u);
    if !observed {
        return Err(RetrievalError::NoObservations);
    }
    Ok(BackprojectionResult {
        texture: TextureAtlas::new(dims.0, dims.1, rgb, mask),
        unseen,
    })
}

/// Value of `sum_i ||P_i T - H_i||^2 + lambda ||T - T0||^2` over covered
/// pixels and all active texels, summed over channels.
pub fn least_squares_objective(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    texture: &TextureAtlas,
    reference: &TextureAtlas,
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        let x = texture.channel(c);
        for (op, img) in ops.iter().zip(images) {
            let y = op.forward_channel(&x);
            for (p, v) in y.iter().enumerate() {
                if !op.row_is_empty(p) {
                    let d = v - img.rgb[p][c];
                    total += d * d;
                }
            }
        }
        for t in 0..x.len() {
            if texture.mask[t] {
                let d = x[t] - reference.rgb[t][c];
                total += lambda * d * d;
            }
        }
    }
    total
}

struct ChannelSolve {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// CGLS for one channel over the unknown texels `free`.
fn cgls_channel(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    channel: usize,
    x0: Vec<f64>,
    free: &[bool],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> ChannelSolve {
    let sqrt_lambda = lambda.sqrt();
    let restrict = |v: &mut [f64]| {
        v.iter_mut().zip(free).for_each(|(a, &f)| {
            if !f {
                *a = 0.0
            }
        })
    };
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();

    let mut x = x0.clone();
    // Residual blocks: one per view (covered pixels only) plus the
    // regularization block, which starts at zero since x = x0.
    let mut r_views: Vec<Vec<f64>> = ops
        .iter()
        .zip(images)
        .map(|(op, img)| {
            let y = op.forward_channel(&x);
            y.iter()
                .enumerate()
                .map(|(p, v)| if op.row_is_empty(p) { 0.0 } else { img.rgb[p][channel] - v })
                .collect()
        })
        .collect();
    let mut r_reg = vec![0.0; x.len()];

    let apply_transpose = |r_views: &[Vec<f64>], r_reg: &[f64]| -> Vec<f64> {
        let mut s: Vec<f64> = r_reg.iter().map(|v| sqrt_lambda * v).collect();
        for (op, r) in ops.iter().zip(r_views) {
            let part = op.adjoint_channel(r);
            s.par_iter_mut().zip(part.par_iter()).for_each(|(a, b)| *a += b);
        }
        restrict(&mut s);
        s
    };
    let residual_norm = |r_views: &[Vec<f64>], r_reg: &[f64]| -> f64 {
        (r_views.iter().map(|r| norm2(r)).sum::<f64>() + norm2(r_reg)).sqrt()
    };

    let mut s = apply_transpose(&r_views, &r_reg);
    let mut p = s.clone();
    let mut gamma = norm2(&s);
    let gamma0 = gamma;
    let mut history = vec![residual_norm(&r_views, &r_reg)];
    let mut converged = gamma0 == 0.0;
    let mut iterations = 0;

    while !converged && iterations < max_iters {
        let q_views: Vec<Vec<f64>> = ops.iter().map(|op| op.forward_channel(&p)).collect();
        let delta: f64 = q_views.iter().map(|q| norm2(q)).sum::<f64>() + lambda * norm2(&p);
        if !(delta > 0.0) {
            break;
        }
        let alpha = gamma / delta;
        x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
        for ((r, q), op) in r_views.iter_mut().zip(&q_views).zip(ops) {
            for (pix, (a, b)) in r.iter_mut().zip(q).enumerate() {
                if !op.row_is_empty(pix) {
                    *a -= alpha * b;
                }
            }
        }
        r_reg.iter_mut().zip(&p).for_each(|(a, b)| *a -= alpha * sqrt_lambda * b);

        // In exact arithmetic the residual never grows. Once rounding makes
        // it do so the solve has stagnated: undo the step and stop.
        let norm = residual_norm(&r_views, &r_reg);
        if norm > *history.last().expect("history starts non-empty") {
            x.iter_mut().zip(&p).for_each(|(a, b)| *a -= alpha * b);
            for ((r, q), op) in r_views.iter_mut().zip(&q_views).zip(ops) {
                for (pix, (a, b)) in r.iter_mut().zip(q).enumerate() {
                    if !op.row_is_empty(pix) {
                        *a += alpha * b;
                    }
                }
            }
            break;
        }
        iterations += 1;
        history.push(norm);

        s = apply_transpose(&r_views, &r_reg);
        let gamma_new = norm2(&s);
        if gamma_new.sqrt() <= tol * gamma0.sqrt() {
            converged = true;
            break;
        }
        let beta = gamma_new / gamma;
        p.iter_mut().zip(&s).for_each(|(a, b)| *a = b + beta * *a);
        gamma = gamma_new;
    }

    ChannelSolve {
        x,
        iterations,
        converged,
        history,
    }
}

/// Tikhonov-regularized least squares, initialized at backprojection.
///
/// Unobserved texels are excluded from the solve and keep their initial
/// value. Colors are clamped to [0, 1] only on output. Running out of
/// iterations is reported through `converged`, not as an error.
pub fn retrieve_least_squares(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    atlas: &TexelAtlasMap,
    cfg: &RetrievalConfig,
) -> Result<LeastSquaresResult, RetrievalError> {
    cfg.validate()?;
    let init = retrieve_backprojection(ops, images, atlas)?;
    let free: Vec<bool> = atlas
        .mask()
        .iter()
        .zip(&init.unseen)
        .map(|(&m, &u)| m && !u)
        .collect();

    let solves: Vec<ChannelSolve> = (0..3)
        .into_par_iter()
        .map(|c| {
            cgls_channel(
                ops,
                images,
                c,
                init.texture.channel(c),
                &free,
                cfg.lambda,
                cfg.max_iters,
                cfg.tol,
            )
        })
        .collect();

    let mut rgb = init.texture.rgb.clone();
    for (c, solve) in solves.iter().enumerate() {
        for (t, px) in rgb.iter_mut().enumerate() {
            if free[t] {
                px[c] = solve.x[t].clamp(0.0, 1.0);
            }
        }
    }
    let [a, b, c] = [0, 1, 2].map(|k| solves[k].history.clone());
    Ok(LeastSquaresResult {
        texture: TextureAtlas::new(atlas.width(), atlas.height(), rgb, atlas.mask().to_vec()),
        unseen: init.unseen,
        converged: solves.iter().all(|s| s.converged),
        iterations: [0, 1, 2].map(|k| solves[k].iterations),
        residual_history: [a, b, c],
    })
}

/// Dispatches on `cfg.mode`, returning the texture and the unseen flags.
pub fn retrieve(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    atlas: &TexelAtlasMap,
    cfg: &RetrievalConfig,
) -> Result<(TextureAtlas, Vec<bool>), RetrievalError> {
    match cfg.mode {
        RetrievalMode::Backprojection => {
            let r = retrieve_backprojection(ops, images, atlas)?;
            Ok((r.texture, r.unseen))
        }
        RetrievalMode::LeastSquares => {
            let r = retrieve_least_squares(ops, images, atlas, cfg)?;
            if !r.converged {
                log::warn!("least squares stopped after {:?} iterations without converging", r.iterations);
            }
            Ok((r.texture, r.unseen))
        }
    }
}
