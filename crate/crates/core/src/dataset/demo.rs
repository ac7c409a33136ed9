//! A small procedural scene in the on-disk layout, for trying the pipeline
//! without external data.

use std::fs;
use std::path::Path;

use super::{build_operators, io_error, write_manifest, DatasetError, ScaleEntry, SceneManifest, Subset};
use super::{FORMAT_VERSION, MANIFEST_FILE};
use crate::camera::write_camera_file;
use crate::formation::{apply_forward, SplatConfig};
use crate::geometry::{bake_normal_map, rasterize_atlas};
use crate::io::{quantize8, write_texture, write_view_image, TextureDepth};
use crate::retrieval::{retrieve_backprojection, RetrievalMode};
use crate::synthetic::{quad, ring_cameras, side_by_side_charts, smooth_pattern, uv_sphere};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSceneConfig {
    pub name: String,
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub atlas_size: [usize; 2],
}

impl Default for DemoSceneConfig {
    fn default() -> Self {
        Self {
            name: "demo".into(),
            views: 8,
            width: 160,
            height: 120,
            atlas_size: [128, 64],
        }
    }
}

/// Writes a sphere in front of a backdrop, seen by a ring of cameras.
///
/// Views are rendered from a procedural texture through the formation model
/// and stored as 8-bit PNGs; the scale-1 texture map is then retrieved from
/// those stored images by backprojection, as for captured data.
pub fn write_demo_scene(root: &Path, cfg: &DemoSceneConfig) -> Result<SceneManifest, DatasetError> {
    if cfg.views == 0 || cfg.width < 4 || cfg.height < 4 || cfg.atlas_size.contains(&0) {
        return Err(DatasetError::Invalid(format!("bad demo configuration {cfg:?}")));
    }
    fs::create_dir_all(root.join("x1/images")).map_err(io_error(root))?;
    fs::create_dir_all(root.join("x1/cams")).map_err(io_error(root))?;

    let mesh = side_by_side_charts(&[uv_sphere(1.0, 24, 12), quad([0.0, 0.0, -1.5], 6.0, 6.0)]);
    fs::write(root.join("mesh.obj"), mesh.to_obj_string()).map_err(io_error(root))?;

    let [aw, ah] = cfg.atlas_size;
    let atlas = rasterize_atlas(&mesh, aw, ah)?;
    let truth = smooth_pattern(aw, ah, atlas.mask());
    let focal = 1.1 * cfg.width as f64;
    let cams = ring_cameras([0.0, 0.0, 0.0], 5.0, 0.35, cfg.views, focal, cfg.width, cfg.height);
    let splat = SplatConfig::default();
    let ops = build_operators(&mesh, &atlas, &cams, &splat)?;

    let mut images = Vec::with_capacity(ops.len());
    let mut entry = ScaleEntry {
        scale: 1,
        atlas_size: cfg.atlas_size,
        images: Vec::new(),
        cameras: Vec::new(),
        texture: Some("x1/texture.png".into()),
        mask: Some("x1/mask.png".into()),
        normals: Some("x1/normals.png".into()),
    };
    for (v, (op, cam)) in ops.iter().zip(&cams).enumerate() {
        let mut img = apply_forward(op, &truth)?;
        img.rgb.iter_mut().for_each(|c| *c = c.map(|x| quantize8(x) as f64 / 255.0));
        let (ip, cp) = (format!("x1/images/view_{v:03}.png"), format!("x1/cams/view_{v:03}.txt"));
        write_view_image(&root.join(&ip), &img)?;
        write_camera_file(&root.join(&cp), cam)?;
        entry.images.push(ip);
        entry.cameras.push(cp);
        images.push(img);
    }

    let retrieved = retrieve_backprojection(&ops, &images, &atlas)?;
    write_texture(
        &root.join("x1/texture.png"),
        Some(&root.join("x1/mask.png")),
        &retrieved.texture,
        TextureDepth::Sixteen,
    )?;
    bake_normal_map(&atlas).write_png(&root.join("x1/normals.png"))?;

    let manifest = SceneManifest {
        format_version: FORMAT_VERSION,
        scene: cfg.name.clone(),
        subset: Subset::Custom,
        mesh: "mesh.obj".into(),
        atlas_size: cfg.atlas_size,
        retrieval_mode: RetrievalMode::Backprojection,
        scales: vec![entry],
    };
    write_manifest(&root.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
