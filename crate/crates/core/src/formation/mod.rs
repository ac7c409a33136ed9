//! Image formation: a per-view sparse linear map from texels to pixels.
//!
//! Each active texel is projected into the view. Where the depth buffer says
//! the texel's surface point is visible, it deposits a Gaussian weight on
//! every pixel within the truncation radius of its projection. Each pixel's
//! weights are then normalized to sum to one, so rendering a texture is a
//! per-pixel weighted average of texel colors.

mod cache;
mod zbuffer;

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{project_point, CameraView};
use crate::geometry::{TexelAtlasMap, TriangleMesh};
use crate::retrieval::TextureAtlas;

pub use cache::{read_operator, write_operator, CACHE_MAGIC, CACHE_VERSION};
pub use zbuffer::depth_buffer;

#[derive(Debug, Error)]
pub enum FormationError {
    #[error("invalid splat configuration: {0}")]
    InvalidConfig(String),
    #[error("no texel is visible in the view")]
    EmptyOperator,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("operator cache: {0}")]
    Cache(String),
    #[error("operator cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Gaussian footprint parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplatConfig {
    /// Standard deviation in pixels.
    pub sigma: f64,
    /// Chebyshev truncation radius in pixels.
    pub radius: u32,
    /// Relative depth slack for the visibility test.
    pub depth_epsilon: f64,
}

impl Default for SplatConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            radius: 2,
            depth_epsilon: 1e-3,
        }
    }
}

impl SplatConfig {
    pub fn validate(&self) -> Result<(), FormationError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(FormationError::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.radius < 1 {
            return Err(FormationError::InvalidConfig("radius must be at least 1".into()));
        }
        if !(self.depth_epsilon > 0.0 && self.depth_epsilon < 0.1) {
            return Err(FormationError::InvalidConfig(format!(
                "depth_epsilon must lie in (0, 0.1), got {}",
                self.depth_epsilon
            )));
        }
        Ok(())
    }
}

/// RGB image for one view. `coverage` marks pixels the operator reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub coverage: Vec<bool>,
}

impl ViewImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0.0; 3]; width * height],
            coverage: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, color: [f64; 3]) -> Self {
        Self {
            width,
            height,
            rgb: vec![color; width * height],
            coverage: vec![true; width * height],
        }
    }
}

/// Result of applying the transposed operator: per-texel weighted color sums
/// and per-texel weight totals.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointAccumulator {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub weight: Vec<f64>,
}

/// Sparse pixel-by-texel matrix in compressed row form, with its transpose
/// kept alongside for adjoint products.
#[derive(Clone, PartialEq)]
pub struct SparseProjectionOperator {
    view_width: usize,
    view_height: usize,
    atlas_width: usize,
    atlas_height: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
}

impl fmt::Debug for SparseProjectionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseProjectionOperator")
            .field("view", &(self.view_width, self.view_height))
            .field("atlas", &(self.atlas_width, self.atlas_height))
            .field("nnz", &self.vals.len())
            .finish()
    }
}

impl SparseProjectionOperator {
    /// Assembles an operator from per-pixel rows, normalizing each row.
    pub(crate) fn from_rows(
        view: (usize, usize),
        atlas: (usize, usize),
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        vals: Vec<f64>,
    ) -> Self {
        let texel_count = atlas.0 * atlas.1;
        let mut col_counts = vec![0usize; texel_count + 1];
        for &c in &cols {
            col_counts[c as usize + 1] += 1;
        }
        for k in 0..texel_count {
            col_counts[k + 1] += col_counts[k];
        }
        let col_ptr = col_counts;
        let mut fill = col_ptr.clone();
        let mut col_rows = vec![0u32; cols.len()];
        let mut col_vals = vec![0.0; cols.len()];
        for row in 0..row_ptr.len() - 1 {
            for e in row_ptr[row]..row_ptr[row + 1] {
                let c = cols[e] as usize;
                col_rows[fill[c]] = row as u32;
                col_vals[fill[c]] = vals[e];
                fill[c] += 1;
            }
        }
        Self {
            view_width: view.0,
            view_height: view.1,
            atlas_width: atlas.0,
            atlas_height: atlas.1,
            row_ptr,
            cols,
            vals,
            col_ptr,
            col_rows,
            col_vals,
        }
    }

    pub fn view_size(&self) -> (usize, usize) {
        (self.view_width, self.view_height)
    }

    pub fn atlas_size(&self) -> (usize, usize) {
        (self.atlas_width, self.atlas_height)
    }

    pub fn pixel_count(&self) -> usize {
        self.view_width * self.view_height
    }

    pub fn texel_count(&self) -> usize {
        self.atlas_width * self.atlas_height
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries `(texel, weight)` of one pixel's row, ascending by texel.
    pub fn row(&self, pixel: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let r = self.row_ptr[pixel]..self.row_ptr[pixel + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Entries `(pixel, weight)` of one texel's column, ascending by pixel.
    pub fn column(&self, texel: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let r = self.col_ptr[texel]..self.col_ptr[texel + 1];
        self.col_rows[r.clone()]
            .iter()
            .copied()
            .zip(self.col_vals[r].iter().copied())
    }

    pub fn row_is_empty(&self, pixel: usize) -> bool {
        self.row_ptr[pixel] == self.row_ptr[pixel + 1]
    }

    pub fn column_is_empty(&self, texel: usize) -> bool {
        self.col_ptr[texel] == self.col_ptr[texel + 1]
    }

    /// Pixel coverage: `true` where the row is non-empty.
    pub fn coverage(&self) -> Vec<bool> {
        (0..self.pixel_count()).map(|p| !self.row_is_empty(p)).collect()
    }

    pub(crate) fn raw_rows(&self) -> (&[usize], &[u32], &[f64]) {
        (&self.row_ptr, &self.cols, &self.vals)
    }

    /// `y = P x` for one channel. `x` has one entry per texel.
    pub fn forward_channel(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.texel_count());
        (0..self.pixel_count())
            .into_par_iter()
            .map(|p| self.row(p).map(|(t, w)| w * x[t as usize]).sum())
            .collect()
    }

    /// `x = Pᵀ y` for one channel. `y` has one entry per pixel.
    pub fn adjoint_channel(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.pixel_count());
        (0..self.texel_count())
            .into_par_iter()
            .map(|t| self.column(t).map(|(p, w)| w * y[p as usize]).sum())
            .collect()
    }
}

/// Builds the projection operator of one view over an atlas.
pub fn build_operator(
    mesh: &TriangleMesh,
    atlas: &TexelAtlasMap,
    cam: &CameraView,
    cfg: &SplatConfig,
) -> Result<SparseProjectionOperator, FormationError> {
    cfg.validate()?;
    let (vw, vh) = (cam.width, cam.height);
    let zbuf = depth_buffer(mesh, cam);
    let r = cfg.radius as f64;
    let inv_two_sigma2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);

    // Scatter: every active texel lists its (pixel, raw weight) deposits.
    let deposits: Vec<(u32, Vec<(u32, f64)>)> = atlas
        .samples()
        .par_iter()
        .enumerate()
        .filter_map(|(texel, s)| {
            let s = s.as_ref()?;
            let proj = project_point(cam, s.point).ok()?;
            let [px, py] = proj.pixel;
            let xs = footprint_span(px - 0.5, r, vw)?;
            let ys = footprint_span(py - 0.5, r, vh)?;
            let mut out = Vec::new();
            for qy in ys.0..=ys.1 {
                for qx in xs.0..=xs.1 {
                    let q = qy * vw + qx;
                    if proj.depth - zbuf[q] > cfg.depth_epsilon * proj.depth {
                        continue;
                    }
                    let (dx, dy) = (qx as f64 + 0.5 - px, qy as f64 + 0.5 - py);
                    out.push((q as u32, (-(dx * dx + dy * dy) * inv_two_sigma2).exp()));
                }
            }
            (!out.is_empty()).then_some((texel as u32, out))
        })
        .collect();

    let pixel_count = vw * vh;
    let mut row_ptr = vec![0usize; pixel_count + 1];
    for (_, list) in &deposits {
        for &(q, _) in list {
            row_ptr[q as usize + 1] += 1;
        }
    }
    for p in 0..pixel_count {
        row_ptr[p + 1] += row_ptr[p];
    }
    let nnz = row_ptr[pixel_count];
    if nnz == 0 {
        return Err(FormationError::EmptyOperator);
    }
    // Filling in texel order keeps every row sorted by texel index.
    let mut fill = row_ptr.clone();
    let mut cols = vec![0u32; nnz];
    let mut vals = vec![0.0f64; nnz];
    for (texel, list) in &deposits {
        for &(q, w) in list {
            let slot = &mut fill[q as usize];
            cols[*slot] = *texel;
            vals[*slot] = w;
            *slot += 1;
        }
    }
    for p in 0..pixel_count {
        let row = &mut vals[row_ptr[p]..row_ptr[p + 1]];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.iter_mut().for_each(|w| *w /= sum);
        }
    }

    Ok(SparseProjectionOperator::from_rows(
        (vw, vh),
        (atlas.width(), atlas.height()),
        row_ptr,
        cols,
        vals,
    ))
}

fn footprint_span(center: f64, radius: f64, len: usize) -> Option<(usize, usize)> {
    if !center.is_finite() || len == 0 {
        return None;
    }
    let lo = (center - radius).ceil().max(0.0);
    let hi = (center + radius).floor().min(len as f64 - 1.0);
    (lo <= hi).then(|| (lo as usize, hi as usize))
}

fn check_texture(op: &SparseProjectionOperator, w: usize, h: usize) -> Result<(), FormationError> {
    if (w, h) != op.atlas_size() {
        return Err(FormationError::DimensionMismatch {
            expected: format!("{}x{} texels", op.atlas_width, op.atlas_height),
            found: format!("{w}x{h}"),
        });
    }
    Ok(())
}

/// Renders a texture into the operator's view.
pub fn apply_forward(
    op: &SparseProjectionOperator,
    texture: &TextureAtlas,
) -> Result<ViewImage, FormationError> {
    check_texture(op, texture.width, texture.height)?;
    let rgb: Vec<[f64; 3]> = (0..op.pixel_count())
        .into_par_iter()
        .map(|p| {
            let mut acc = [0.0; 3];
            for (t, w) in op.row(p) {
                let c = texture.rgb[t as usize];
                for k in 0..3 {
                    acc[k] += w * c[k];
                }
            }
            acc
        })
        .collect();
    Ok(ViewImage {
        width: op.view_width,
        height: op.view_height,
        rgb,
        coverage: op.coverage(),
    })
}

/// Applies the transpose of the operator to an image.
pub fn apply_adjoint(
    op: &SparseProjectionOperator,
    image: &ViewImage,
) -> Result<AdjointAccumulator, FormationError> {
    if (image.width, image.height) != op.view_size() {
        return Err(FormationError::DimensionMismatch {
            expected: format!("{}x{} pixels", op.view_width, op.view_height),
            found: format!("{}x{}", image.width, image.height),
        });
    }
    let (rgb, weight): (Vec<[f64; 3]>, Vec<f64>) = (0..op.texel_count())
        .into_par_iter()
        .map(|t| {
            let mut acc = [0.0; 3];
            let mut total = 0.0;
            for (p, w) in op.column(t) {
                let c = image.rgb[p as usize];
                for k in 0..3 {
                    acc[k] += w * c[k];
                }
                total += w;
            }
            (acc, total)
        })
        .unzip();
    Ok(AdjointAccumulator {
        width: op.atlas_width,
        height: op.atlas_height,
        rgb,
        weight,
    })
}
