//! Mesh ingestion, UV atlas rasterization and normal-map baking.

mod atlas;
mod mesh;
mod normal_map;
pub(crate) mod raster;

pub use atlas::{rasterize_atlas, AtlasError, TexelAtlasMap, TexelSample, DEGENERATE_UV_AREA};
pub use mesh::{load_mesh, parse_obj, Corner, MeshError, MeshStats, TriangleMesh};
pub use normal_map::{bake_normal_map, decode_component, encode_component, NormalMapImage};
