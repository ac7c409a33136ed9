//! Texture super-resolution: mask-aware interpolation baselines and a
//! model-based solver built on the projection operators.

mod interp;
mod kernel;
mod model;

use thiserror::Error;

use crate::retrieval::TextureAtlas;

pub use interp::{masked_weights, source_coordinate, upsample_interp, UpsampleResult};
pub use kernel::{cubic, InterpKernel, CUBIC_A, LANCZOS_A};
pub use model::{
    data_term, gradient, model_sr_solve, tv_term, write_trace_csv, ModelSrConfig, ModelSrResult, TraceRow,
    TV_EPSILON,
};

pub const SCALES: [u32; 3] = [2, 3, 4];

#[derive(Debug, Error)]
pub enum SrError {
    #[error("scale must be 2, 3 or 4, got {0}")]
    InvalidScale(u32),
    #[error("mask mismatch: expected {expected}, found {found}")]
    MaskMismatch { expected: String, found: String },
    #[error("got {ops} operators but {images} images")]
    ViewMismatch { ops: usize, images: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective diverged at iteration {iteration}")]
    DivergenceDetected {
        iteration: usize,
        best: Box<TextureAtlas>,
    },
}

pub(crate) fn check_scale(scale: u32) -> Result<(), SrError> {
    if SCALES.contains(&scale) {
        Ok(())
    } else {
        Err(SrError::InvalidScale(scale))
    }
}
