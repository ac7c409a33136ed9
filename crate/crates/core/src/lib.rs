//! Multi-view texture retrieval and texture-domain super-resolution.
//!
//! The pipeline rasterizes a mesh's UV atlas into texel samples, builds one
//! sparse projection operator per calibrated view, inverts those operators to
//! recover texture maps, super-resolves low-resolution maps and scores the
//! results with mask-aware metrics. The `texsr` binary wraps each stage.

pub mod appearance_sr;
pub mod camera;
pub mod cli;
pub mod dataset;
pub mod formation;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod retrieval;
pub mod synthetic;

pub use camera::CameraView;
pub use formation::{SparseProjectionOperator, SplatConfig, ViewImage};
pub use geometry::{TexelAtlasMap, TriangleMesh};
pub use retrieval::TextureAtlas;
