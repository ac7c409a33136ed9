//! Mask-aware image quality metrics in the texture domain and the image
//! domain, plus the benchmark report format.
//!
//! Values in [0, 1] are scaled to the 8-bit range before differencing, so
//! PSNR uses a peak of 255.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formation::{apply_forward, SparseProjectionOperator, ViewImage};
use crate::retrieval::TextureAtlas;

pub const PEAK: f64 = 255.0;
pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// BT.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the masks do not intersect")]
    EmptyIntersection,
    #[error("got {ops} operators but {images} images")]
    ViewMismatch { ops: usize, images: usize },
}

fn check_pair(a: &TextureAtlas, b: &TextureAtlas) -> Result<Vec<bool>, MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mask: Vec<bool> = a.mask.iter().zip(&b.mask).map(|(x, y)| *x && *y).collect();
    if !mask.iter().any(|&m| m) {
        return Err(MetricsError::EmptyIntersection);
    }
    Ok(mask)
}

fn psnr_from_sse(sse: f64, samples: usize) -> f64 {
    let mse = sse / samples as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn squared_error(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (PEAK * a[c] - PEAK * b[c]).powi(2)).sum()
}

/// PSNR in dB over the intersection of both masks, all three channels.
/// Identical inputs give `f64::INFINITY`.
pub fn masked_psnr(a: &TextureAtlas, b: &TextureAtlas) -> Result<f64, MetricsError> {
    let mask = check_pair(a, b)?;
    let mut sse = 0.0;
    let mut n = 0;
    for k in 0..mask.len() {
        if mask[k] {
            sse += squared_error(&a.rgb[k], &b.rgb[k]);
            n += 1;
        }
    }
    Ok(psnr_from_sse(sse, 3 * n))
}

/// Luma scaled to [0, 255].
pub fn luma(rgb: &[f64; 3]) -> f64 {
    PEAK * (LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2])
}

/// Normalized 1D Gaussian taps for offsets `-SSIM_RADIUS..=SSIM_RADIUS`.
/// The 2D window is their outer product; normalization cancels anyway.
pub fn gaussian_taps() -> [f64; 2 * SSIM_RADIUS + 1] {
    std::array::from_fn(|k| {
        let d = k as f64 - SSIM_RADIUS as f64;
        (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    })
}

/// Separable Gaussian filter with zero padding.
fn blur(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    let horiz: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k % w) as isize, k / w);
            let mut s = 0.0;
            for d in -r..=r {
                let x = i + d;
                if x >= 0 && (x as usize) < w {
                    s += taps[(d + r) as usize] * src[j * w + x as usize];
                }
            }
            s
        })
        .collect();
    (0..w * h)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % w, (k / w) as isize);
            let mut s = 0.0;
            for d in -r..=r {
                let y = j + d;
                if y >= 0 && (y as usize) < h {
                    s += taps[(d + r) as usize] * horiz[y as usize * w + i];
                }
            }
            s
        })
        .collect()
}

/// Mean SSIM on luma over windows centered on texels active in both
/// atlases. Inactive or out-of-range texels inside a window get zero
/// weight and the remaining Gaussian weights are renormalized.
pub fn masked_ssim(a: &TextureAtlas, b: &TextureAtlas) -> Result<f64, MetricsError> {
    let mask = check_pair(a, b)?;
    let (w, h) = (a.width, a.height);
    let taps = gaussian_taps();
    let ya: Vec<f64> = a.rgb.iter().zip(&mask).map(|(c, &m)| if m { luma(c) } else { 0.0 }).collect();
    let yb: Vec<f64> = b.rgb.iter().zip(&mask).map(|(c, &m)| if m { luma(c) } else { 0.0 }).collect();
    let m: Vec<f64> = mask.iter().map(|&x| x as u8 as f64).collect();
    let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };

    let wsum = blur(&m, w, h, &taps);
    let sa = blur(&ya, w, h, &taps);
    let sb = blur(&yb, w, h, &taps);
    let saa = blur(&prod(&ya, &ya), w, h, &taps);
    let sbb = blur(&prod(&yb, &yb), w, h, &taps);
    let sab = blur(&prod(&ya, &yb), w, h, &taps);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let values: Vec<f64> = (0..w * h)
        .into_par_iter()
        .filter(|&k| mask[k])
        .map(|k| {
            let n = wsum[k];
            let (ma, mb) = (sa[k] / n, sb[k] / n);
            let va = saa[k] / n - ma * ma;
            let vb = sbb[k] / n - mb * mb;
            let cov = sab[k] / n - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .collect();
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub active_texel_count: usize,
    pub per_view_psnr: Option<Vec<Option<f64>>>,
}

/// PSNR, SSIM and the evaluated texel count for one pair of atlases.
pub fn evaluate_pair(gt: &TextureAtlas, test: &TextureAtlas) -> Result<MetricReport, MetricsError> {
    let psnr = masked_psnr(gt, test)?;
    let ssim = masked_ssim(gt, test)?;
    let active_texel_count = gt.mask.iter().zip(&test.mask).filter(|(a, b)| **a && **b).count();
    Ok(MetricReport {
        psnr,
        ssim,
        active_texel_count,
        per_view_psnr: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageDomainReport {
    /// PSNR per view, `None` for views without covered pixels.
    pub per_view: Vec<Option<f64>>,
    /// Mean over views with coverage.
    pub mean: f64,
}

/// Renders `texture` into every view and compares against the ground-truth
/// images over covered pixels.
pub fn image_domain_eval(
    texture: &TextureAtlas,
    gt_images: &[ViewImage],
    ops: &[SparseProjectionOperator],
) -> Result<ImageDomainReport, MetricsError> {
    if gt_images.len() != ops.len() {
        return Err(MetricsError::ViewMismatch {
            ops: ops.len(),
            images: gt_images.len(),
        });
    }
    let mut per_view = Vec::with_capacity(ops.len());
    for (view, (op, gt)) in ops.iter().zip(gt_images).enumerate() {
        let rendered = apply_forward(op, texture).map_err(|e| MetricsError::DimensionMismatch(e.to_string()))?;
        if (gt.width, gt.height) != (rendered.width, rendered.height) {
            return Err(MetricsError::DimensionMismatch(format!(
                "view {view}: image {}x{}, operator {}x{}",
                gt.width, gt.height, rendered.width, rendered.height
            )));
        }
        let mut sse = 0.0;
        let mut n = 0;
        for p in 0..rendered.rgb.len() {
            if rendered.coverage[p] {
                sse += squared_error(&rendered.rgb[p], &gt.rgb[p]);
                n += 1;
            }
        }
        if n == 0 {
            log::warn!("view {view} has no covered pixels; excluded from the mean");
            per_view.push(None);
        } else {
            per_view.push(Some(psnr_from_sse(sse, 3 * n)));
        }
    }
    let valid: Vec<f64> = per_view.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    Ok(ImageDomainReport {
        mean: valid.iter().sum::<f64>() / valid.len() as f64,
        per_view,
    })
}

/// PSNR as written in reports: `inf` for a perfect match.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.4}")
    }
}

pub fn parse_db(s: &str) -> Result<f64, std::num::ParseFloatError> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        other => other.parse(),
    }
}

/// One line of the evaluation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scene: String,
    pub subset: String,
    pub method: String,
    pub scale: u32,
    pub psnr_db: f64,
    pub ssim: f64,
    pub active_texels: usize,
}

pub const CSV_HEADER: &str = "scene,subset,method,scale,psnr_db,ssim,active_texels";

pub fn format_row(r: &MetricRow) -> String {
    format!(
        "{},{},{},{},{},{:.6},{}",
        r.scene,
        r.subset,
        r.method,
        r.scale,
        format_db(r.psnr_db),
        r.ssim,
        r.active_texels
    )
}

pub fn write_metrics_csv(mut out: impl Write, rows: &[MetricRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", format_row(r))?;
    }
    Ok(())
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err("missing or unexpected header".into());
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = |what: &str| format!("line {}: bad {what}", k + 2);
            if f.len() != 7 {
                return Err(bad("field count"));
            }
            Ok(MetricRow {
                scene: f[0].to_string(),
                subset: f[1].to_string(),
                method: f[2].to_string(),
                scale: f[3].parse().map_err(|_| bad("scale"))?,
                psnr_db: parse_db(f[4]).map_err(|_| bad("psnr_db"))?,
                ssim: f[5].parse().map_err(|_| bad("ssim"))?,
                active_texels: f[6].parse().map_err(|_| bad("active_texels"))?,
            })
        })
        .collect()
}

/// Benchmark table: one row per method, one column per (subset, scale)
/// plus an `Average` group over all scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub subsets: Vec<String>,
    pub scales: Vec<u32>,
    /// method -> (group, scale) -> mean
    pub cells: BTreeMap<String, BTreeMap<(String, u32), f64>>,
    pub methods: Vec<String>,
}

pub const AVERAGE: &str = "Average";

/// Groups rows into per-subset means and a scene-weighted overall mean,
/// for either PSNR (`use_ssim = false`) or SSIM.
pub fn summarize(rows: &[MetricRow], subsets: &[&str], use_ssim: bool) -> SummaryTable {
    let mut scales: Vec<u32> = rows.iter().map(|r| r.scale).collect();
    scales.sort_unstable();
    scales.dedup();
    let mut methods: Vec<String> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let mut acc: BTreeMap<String, BTreeMap<(String, u32), (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let v = if use_ssim { r.ssim } else { r.psnr_db };
        let m = acc.entry(r.method.clone()).or_default();
        for group in [r.subset.clone(), AVERAGE.to_string()] {
            let e = m.entry((group, r.scale)).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let cells = acc
        .into_iter()
        .map(|(m, g)| (m, g.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()))
        .collect();
    SummaryTable {
        subsets: subsets.iter().map(|s| s.to_string()).collect(),
        scales,
        cells,
        methods,
    }
}

impl SummaryTable {
    pub fn get(&self, method: &str, group: &str, scale: u32) -> Option<f64> {
        self.cells.get(method)?.get(&(group.to_string(), scale)).copied()
    }

    /// CSV with columns `method,<subset>_x<s>...,Average_x<s>...`; missing
    /// cells are written as `--`.
    pub fn to_csv(&self) -> String {
        let groups: Vec<&str> = self.subsets.iter().map(String::as_str).chain([AVERAGE]).collect();
        let mut out = String::from("method");
        for g in &groups {
            for s in &self.scales {
                let _ = write!(out, ",{g}_x{s}");
            }
        }
        out.push('\n');
        for m in &self.methods {
            out.push_str(m);
            for g in &groups {
                for &s in &self.scales {
                    match self.get(m, g, s) {
                        Some(v) => {
                            let _ = write!(out, ",{}", if v.is_finite() { format!("{v:.2}") } else { format_db(v) });
                        }
                        None => out.push_str(",--"),
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
