//! Model-based super-resolution: projected gradient descent on
//! `sum_i ||P_i T - H_i||^2 + lambda_tv * TV(T)` over the HR atlas.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{check_scale, SrError};
use crate::formation::{SparseProjectionOperator, ViewImage};
use crate::retrieval::TextureAtlas;

/// Smoothing inside the TV square root.
pub const TV_EPSILON: f64 = 1e-6;
const MAX_HALVINGS: usize = 40;
const DIVERGENCE_RUN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSrConfig {
    pub scale: u32,
    pub lambda_tv: f64,
    /// Initial gradient step.
    pub step: f64,
    pub max_iters: usize,
    /// Halve the step until the objective does not increase. Without it
    /// every step is taken at `step`, and a run of increasing objectives
    /// aborts the solve.
    pub backtracking: bool,
}

impl Default for ModelSrConfig {
    fn default() -> Self {
        Self {
            scale: 2,
            lambda_tv: 1e-2,
            step: 1.0,
            max_iters: 200,
            backtracking: true,
        }
    }
}

impl ModelSrConfig {
    pub fn validate(&self) -> Result<(), SrError> {
        check_scale(self.scale)?;
        if !(self.lambda_tv >= 0.0 && self.lambda_tv.is_finite()) {
            return Err(SrError::InvalidConfig(format!("lambda_tv {}", self.lambda_tv)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(SrError::InvalidConfig(format!("step {}", self.step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub data: f64,
    pub tv: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSrResult {
    /// Iterate with the lowest objective.
    pub texture: TextureAtlas,
    /// Objective at the initializer, then after every accepted step.
    pub trace: Vec<TraceRow>,
    /// Stopped because no step decreased the objective.
    pub stalled: bool,
}

/// Data term over covered pixels, summed over views and channels.
pub fn data_term(ops: &[SparseProjectionOperator], views: &[ViewImage], tex: &TextureAtlas) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        let x = tex.channel(c);
        for (op, img) in ops.iter().zip(views) {
            let y = op.forward_channel(&x);
            total += (0..y.len())
                .filter(|&p| !op.row_is_empty(p))
                .map(|p| (y[p] - img.rgb[p][c]).powi(2))
                .sum::<f64>();
        }
    }
    total
}

/// Forward differences to the right and lower neighbors, zero where either
/// texel of the pair is inactive.
fn differences(tex: &TextureAtlas, c: usize, k: usize) -> (f64, f64) {
    let (w, h) = (tex.width, tex.height);
    let (i, j) = (k % w, k / w);
    let dx = if i + 1 < w && tex.mask[k + 1] { tex.rgb[k + 1][c] - tex.rgb[k][c] } else { 0.0 };
    let dy = if j + 1 < h && tex.mask[k + w] { tex.rgb[k + w][c] - tex.rgb[k][c] } else { 0.0 };
    (dx, dy)
}

/// Isotropic smoothed total variation over active texels, summed over channels.
pub fn tv_term(tex: &TextureAtlas) -> f64 {
    // Summed in index order.
    let terms: Vec<f64> = (0..tex.rgb.len())
        .into_par_iter()
        .filter(|&k| tex.mask[k])
        .map(|k| {
            (0..3)
                .map(|c| {
                    let (dx, dy) = differences(tex, c, k);
                    (dx * dx + dy * dy + TV_EPSILON).sqrt()
                })
                .sum::<f64>()
        })
        .collect();
    terms.iter().sum()
}

fn objective(ops: &[SparseProjectionOperator], views: &[ViewImage], tex: &TextureAtlas, lambda_tv: f64, iteration: usize) -> TraceRow {
    let data = data_term(ops, views, tex);
    let tv = if lambda_tv > 0.0 { tv_term(tex) } else { 0.0 };
    TraceRow {
        iteration,
        data,
        tv,
        total: data + lambda_tv * tv,
    }
}

/// Gradient of the objective with respect to every texel and channel.
pub fn gradient(ops: &[SparseProjectionOperator], views: &[ViewImage], tex: &TextureAtlas, lambda_tv: f64) -> Vec<[f64; 3]> {
    let n = tex.rgb.len();
    let mut g = vec![[0.0; 3]; n];
    for c in 0..3 {
        let x = tex.channel(c);
        for (op, img) in ops.iter().zip(views) {
            let y = op.forward_channel(&x);
            let r: Vec<f64> = (0..y.len())
                .map(|p| if op.row_is_empty(p) { 0.0 } else { 2.0 * (y[p] - img.rgb[p][c]) })
                .collect();
            let back = op.adjoint_channel(&r);
            g.par_iter_mut().zip(back.par_iter()).for_each(|(a, b)| a[c] += b);
        }
    }
    g.par_iter_mut().zip(tex.mask.par_iter()).for_each(|(a, &m)| {
        if !m {
            *a = [0.0; 3];
        }
    });
    if lambda_tv > 0.0 {
        let w = tex.width;
        // Per-texel (dx, dy, magnitude) for each channel.
        let terms: Vec<[(f64, f64, f64); 3]> = (0..n)
            .into_par_iter()
            .map(|k| {
                std::array::from_fn(|c| {
                    if !tex.mask[k] {
                        return (0.0, 0.0, 1.0);
                    }
                    let (dx, dy) = differences(tex, c, k);
                    (dx, dy, (dx * dx + dy * dy + TV_EPSILON).sqrt())
                })
            })
            .collect();
        g.par_iter_mut().enumerate().for_each(|(k, gk)| {
            if !tex.mask[k] {
                return;
            }
            let (i, j) = (k % w, k / w);
            for c in 0..3 {
                let (dx, dy, m) = terms[k][c];
                let mut v = -(dx + dy) / m;
                if i > 0 {
                    let (ldx, _, lm) = terms[k - 1][c];
                    v += ldx / lm;
                }
                if j > 0 {
                    let (_, udy, um) = terms[k - w][c];
                    v += udy / um;
                }
                gk[c] += lambda_tv * v;
            }
        });
    }
    g
}

fn project_step(tex: &TextureAtlas, g: &[[f64; 3]], step: f64) -> TextureAtlas {
    let rgb = tex
        .rgb
        .par_iter()
        .zip(g.par_iter())
        .zip(tex.mask.par_iter())
        .map(|((x, gk), &m)| {
            if m {
                std::array::from_fn(|c| (x[c] - step * gk[c]).clamp(0.0, 1.0))
            } else {
                [0.0; 3]
            }
        })
        .collect();
    TextureAtlas {
        width: tex.width,
        height: tex.height,
        rgb,
        mask: tex.mask.clone(),
    }
}

/// Super-resolves `init` against low-resolution views whose operators map
/// the HR atlas into LR images.
pub fn model_sr_solve(
    lr_views: &[ViewImage],
    lr_ops: &[SparseProjectionOperator],
    init: &TextureAtlas,
    cfg: &ModelSrConfig,
) -> Result<ModelSrResult, SrError> {
    cfg.validate()?;
    if lr_views.len() != lr_ops.len() {
        return Err(SrError::ViewMismatch {
            ops: lr_ops.len(),
            images: lr_views.len(),
        });
    }
    for (op, img) in lr_ops.iter().zip(lr_views) {
        if op.atlas_size() != (init.width, init.height) || op.view_size() != (img.width, img.height) {
            return Err(SrError::DimensionMismatch(format!(
                "operator {:?} -> {:?}, texture {}x{}, image {}x{}",
                op.atlas_size(),
                op.view_size(),
                init.width,
                init.height,
                img.width,
                img.height
            )));
        }
    }

    let mut x = project_step(init, &vec![[0.0; 3]; init.rgb.len()], 0.0);
    let mut current = objective(lr_ops, lr_views, &x, cfg.lambda_tv, 0);
    if !current.total.is_finite() {
        return Err(SrError::DivergenceDetected {
            iteration: 0,
            best: Box::new(x),
        });
    }
    let mut trace = vec![current];
    let mut best = (x.clone(), current.total);
    let mut step = cfg.step;
    let mut stalled = false;
    let mut increases = 0;

    for it in 1..=cfg.max_iters {
        let g = gradient(lr_ops, lr_views, &x, cfg.lambda_tv);
        if cfg.backtracking {
            let mut trial_step = (2.0 * step).min(cfg.step);
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = project_step(&x, &g, trial_step);
                let row = objective(lr_ops, lr_views, &cand, cfg.lambda_tv, it);
                if row.total <= current.total {
                    accepted = Some((cand, row));
                    break;
                }
                trial_step *= 0.5;
            }
            let Some((cand, row)) = accepted else {
                stalled = true;
                break;
            };
            step = trial_step;
            let unchanged = cand.rgb == x.rgb;
            x = cand;
            current = row;
            trace.push(row);
            if row.total < best.1 {
                best = (x.clone(), row.total);
            }
            if unchanged {
                stalled = true;
                break;
            }
        } else {
            let cand = project_step(&x, &g, cfg.step);
            let row = objective(lr_ops, lr_views, &cand, cfg.lambda_tv, it);
            increases = if row.total > current.total { increases + 1 } else { 0 };
            x = cand;
            current = row;
            trace.push(row);
            if row.total.is_finite() && row.total < best.1 {
                best = (x.clone(), row.total);
            }
            if !row.total.is_finite() || increases >= DIVERGENCE_RUN {
                return Err(SrError::DivergenceDetected {
                    iteration: it,
                    best: Box::new(best.0),
                });
            }
        }
    }

    Ok(ModelSrResult {
        texture: best.0,
        trace,
        stalled,
    })
}

/// Writes the objective trace as CSV.
pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iteration,data_term,tv_term,total")?;
    for r in trace {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.iteration, r.data, r.tv, r.total)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraView;
    use crate::formation::{apply_forward, build_operator, SplatConfig};
    use crate::geometry::rasterize_atlas;
    use crate::synthetic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_texture(w: usize, h: usize, mask: Vec<bool>, seed: u64) -> TextureAtlas {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rgb = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        TextureAtlas::new(w, h, rgb, mask)
    }

    /// Texels 5 px apart, so each covered pixel sees exactly one texel.
    fn isolated_scene() -> (TextureAtlas, Vec<SparseProjectionOperator>) {
        let mesh = synthetic::unit_quad();
        let atlas = rasterize_atlas(&mesh, 4, 4).unwrap();
        let k = synthetic::intrinsics(80.0, 64, 64);
        let cam = CameraView::look_at(k, [0.5, 0.5, 4.0], [0.5, 0.5, 0.0], [0.0, 1.0, 0.0], 64, 64);
        let op = build_operator(&mesh, &atlas, &cam, &SplatConfig::default()).unwrap();
        (TextureAtlas::zeros(4, 4, atlas.mask().to_vec()), vec![op])
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = synthetic::quad([0.0; 3], 1.0, 1.0);
        let atlas = rasterize_atlas(&mesh, 10, 10).unwrap();
        let cams = synthetic::ring_cameras([0.0; 3], 3.0, 0.4, 2, 40.0, 20, 20);
        let ops: Vec<_> = cams.iter().map(|c| build_operator(&mesh, &atlas, c, &SplatConfig::default()).unwrap()).collect();
        let mut mask = atlas.mask().to_vec();
        mask[33] = false;
        let truth = random_texture(10, 10, mask.clone(), 4);
        let views: Vec<_> = ops.iter().map(|op| apply_forward(op, &truth).unwrap()).collect();
        let x = random_texture(10, 10, mask, 5);
        let lambda = 0.3;
        let g = gradient(&ops, &views, &x, lambda);
        let f = |t: &TextureAtlas| data_term(&ops, &views, t) + lambda * tv_term(t);
        for k in [0, 11, 32, 34, 43, 55, 99] {
            for c in 0..3 {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a.rgb[k][c] += h;
                b.rgb[k][c] -= h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                assert!((fd - g[k][c]).abs() < 1e-5 * (1.0 + fd.abs()), "texel {k} ch {c}: {fd} vs {}", g[k][c]);
            }
        }
        assert_eq!(g[33], [0.0; 3]);
    }

    #[test]
    fn consistent_system_converges_to_the_observation() {
        let (init, ops) = isolated_scene();
        let truth = random_texture(4, 4, init.mask.clone(), 6);
        let views = vec![apply_forward(&ops[0], &truth).unwrap()];
        let cfg = ModelSrConfig { lambda_tv: 0.0, max_iters: 500, ..Default::default() };
        let out = model_sr_solve(&views, &ops, &init, &cfg).unwrap();
        assert!(out.trace.last().unwrap().total < 1e-12);
        for (a, b) in out.texture.rgb.iter().zip(&truth.rgb) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn trace_is_nonincreasing() {
        let mesh = synthetic::quad([0.0; 3], 1.0, 1.0);
        let atlas = rasterize_atlas(&mesh, 16, 16).unwrap();
        let cams = synthetic::ring_cameras([0.0; 3], 3.0, 0.4, 3, 30.0, 16, 16);
        let ops: Vec<_> = cams.iter().map(|c| build_operator(&mesh, &atlas, c, &SplatConfig::default()).unwrap()).collect();
        let truth = synthetic::checkerboard(16, 16, 2, [0.2; 3], [0.8; 3], atlas.mask());
        let views: Vec<_> = ops.iter().map(|op| apply_forward(op, &truth).unwrap()).collect();
        let init = TextureAtlas::filled(16, 16, [0.5; 3], atlas.mask().to_vec());
        let out = model_sr_solve(&views, &ops, &init, &ModelSrConfig { max_iters: 50, ..Default::default() }).unwrap();
        assert!(out.trace.len() > 10);
        assert!(out.trace.windows(2).all(|w| w[1].total <= w[0].total));
        assert!(out.trace.last().unwrap().total < 0.5 * out.trace[0].total);
    }

    #[test]
    fn zero_iterations_return_init() {
        let (init, ops) = isolated_scene();
        let init = random_texture(4, 4, init.mask.clone(), 8);
        let views = vec![ViewImage::new(64, 64)];
        let cfg = ModelSrConfig { lambda_tv: 0.0, max_iters: 0, ..Default::default() };
        let out = model_sr_solve(&views, &ops, &init, &cfg).unwrap();
        assert_eq!(out.texture, init);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let (init, ops) = isolated_scene();
        let mut view = ViewImage::filled(64, 64, [0.5; 3]);
        view.rgb[0] = [f64::NAN; 3];
        let mut view2 = ViewImage::filled(64, 64, [0.5; 3]);
        let covered = (0..64 * 64).find(|&p| !ops[0].row_is_empty(p)).unwrap();
        view2.rgb[covered] = [f64::NAN; 3];
        for backtracking in [true, false] {
            let cfg = ModelSrConfig { backtracking, ..Default::default() };
            // An uncovered NaN pixel is ignored.
            assert!(model_sr_solve(&[view.clone()], &ops, &init, &cfg).is_ok());
            match model_sr_solve(&[view2.clone()], &ops, &init, &cfg) {
                Err(SrError::DivergenceDetected { iteration, best }) => {
                    assert_eq!(iteration, 0);
                    assert_eq!(*best, init);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn mismatches_are_reported() {
        let (init, ops) = isolated_scene();
        assert!(matches!(
            model_sr_solve(&[], &ops, &init, &ModelSrConfig::default()),
            Err(SrError::ViewMismatch { .. })
        ));
        let wrong = TextureAtlas::zeros(5, 4, vec![true; 20]);
        assert!(matches!(
            model_sr_solve(&[ViewImage::new(64, 64)], &ops, &wrong, &ModelSrConfig::default()),
            Err(SrError::DimensionMismatch(_))
        ));
        let bad = ModelSrConfig { step: 0.0, ..Default::default() };
        assert!(matches!(
            model_sr_solve(&[ViewImage::new(64, 64)], &ops, &init, &bad),
            Err(SrError::InvalidConfig(_))
        ));
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rows = [TraceRow { iteration: 0, data: 1.0, tv: 2.0, total: 1.02 }];
        write_trace_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iteration,data_term,tv_term,total");
        assert!(lines[1].starts_with("0,1.0"));
    }
}
