//! Loading a scale level and generating reduced-resolution levels.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{downscale_image, io_error, DatasetError, ScaleEntry, SceneManifest};
use crate::appearance_sr::{upsample_interp, InterpKernel, SCALES};
use crate::camera::{read_camera_file, scale_camera, write_camera_file, CameraView};
use crate::formation::{build_operator, SparseProjectionOperator, SplatConfig, ViewImage};
use crate::metrics::{evaluate_pair, MetricRow};
use crate::geometry::{load_mesh, rasterize_atlas, TexelAtlasMap, TriangleMesh};
use crate::io::{quantize8, read_texture, read_view_image, write_texture, write_view_image, TextureDepth};
use crate::retrieval::{retrieve_backprojection, retrieve_least_squares, RetrievalConfig, RetrievalMode, TextureAtlas};

/// Mesh, atlas, cameras and images for one scale level.
pub struct ScaleInputs {
    pub mesh: TriangleMesh,
    pub atlas: TexelAtlasMap,
    pub cameras: Vec<CameraView>,
    pub images: Vec<ViewImage>,
}

/// Loads the views of `view_scale` and rasterizes the mesh at `atlas_size`.
/// Camera sizes must match their images.
pub fn load_scale_inputs(
    root: &Path,
    m: &SceneManifest,
    view_scale: u32,
    atlas_size: [usize; 2],
) -> Result<ScaleInputs, DatasetError> {
    let entry = m.entry(view_scale).ok_or(DatasetError::MissingScale(view_scale))?;
    let mesh = load_mesh(root.join(&m.mesh))?;
    let atlas = rasterize_atlas(&mesh, atlas_size[0], atlas_size[1])?;
    let (cameras, images) = load_views(root, entry)?;
    Ok(ScaleInputs {
        mesh,
        atlas,
        cameras,
        images,
    })
}

fn load_views(root: &Path, entry: &ScaleEntry) -> Result<(Vec<CameraView>, Vec<ViewImage>), DatasetError> {
    let pairs: Vec<(CameraView, ViewImage)> = entry
        .images
        .par_iter()
        .zip(entry.cameras.par_iter())
        .map(|(img, cam)| {
            let image = read_view_image(&root.join(img))?;
            let camera = read_camera_file(&root.join(cam))?;
            if (camera.width, camera.height) != (image.width, image.height) {
                return Err(DatasetError::Invalid(format!(
                    "{cam} is {}x{} but {img} is {}x{}",
                    camera.width, camera.height, image.width, image.height
                )));
            }
            Ok((camera, image))
        })
        .collect::<Result<_, _>>()?;
    Ok(pairs.into_iter().unzip())
}

/// One operator per camera, built in view order.
pub fn build_operators(
    mesh: &TriangleMesh,
    atlas: &TexelAtlasMap,
    cameras: &[CameraView],
    splat: &SplatConfig,
) -> Result<Vec<SparseProjectionOperator>, DatasetError> {
    cameras
        .iter()
        .enumerate()
        .map(|(v, cam)| {
            build_operator(mesh, atlas, cam, splat).map_err(|e| {
                log::error!("view {v}: {e}");
                DatasetError::Formation(e)
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRetrieval {
    pub texture: TextureAtlas,
    pub unseen: usize,
    /// Least-squares convergence; `None` for backprojection.
    pub converged: Option<bool>,
}

fn run_retrieval(
    ops: &[SparseProjectionOperator],
    images: &[ViewImage],
    atlas: &TexelAtlasMap,
    cfg: &RetrievalConfig,
) -> Result<ScaleRetrieval, DatasetError> {
    Ok(match cfg.mode {
        RetrievalMode::Backprojection => {
            let r = retrieve_backprojection(ops, images, atlas)?;
            ScaleRetrieval {
                unseen: r.unseen_count(),
                texture: r.texture,
                converged: None,
            }
        }
        RetrievalMode::LeastSquares => {
            let r = retrieve_least_squares(ops, images, atlas, cfg)?;
            ScaleRetrieval {
                unseen: r.unseen.iter().filter(|&&u| u).count(),
                texture: r.texture,
                converged: Some(r.converged),
            }
        }
    })
}

/// Retrieves the texture map of one scale level from its own views.
pub fn retrieve_scale(
    root: &Path,
    m: &SceneManifest,
    scale: u32,
    cfg: &RetrievalConfig,
    splat: &SplatConfig,
) -> Result<ScaleRetrieval, DatasetError> {
    let entry = m.entry(scale).ok_or(DatasetError::MissingScale(scale))?;
    let inputs = load_scale_inputs(root, m, scale, entry.atlas_size)?;
    let ops = build_operators(&inputs.mesh, &inputs.atlas, &inputs.cameras, splat)?;
    run_retrieval(&ops, &inputs.images, &inputs.atlas, cfg)
}

fn file_name(rel: &str) -> Result<String, DatasetError> {
    Path::new(rel)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| DatasetError::Invalid(format!("{rel} has no file name")))
}

fn file_stem(rel: &str) -> Result<String, DatasetError> {
    Path::new(rel)
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| DatasetError::Invalid(format!("{rel} has no file name")))
}

/// Generates the `x<factor>` level from the HR level: reduced images,
/// reduced cameras, and a texture map retrieved on the `floor(atlas / s)`
/// atlas with the manifest's retrieval mode. Normal maps are not baked.
///
/// Files are written to a temporary directory that replaces `x<factor>`
/// by rename once complete. Returns the manifest with the new entry; the
/// caller decides where to write it.
pub fn generate_lr_scene(
    root: &Path,
    m: &SceneManifest,
    factor: u32,
    splat: &SplatConfig,
) -> Result<SceneManifest, DatasetError> {
    if !SCALES.contains(&factor) {
        return Err(DatasetError::InvalidFactor(factor));
    }
    let hr = m.hr()?;
    let mut names = HashSet::new();
    for img in &hr.images {
        if !names.insert(file_name(img)?) {
            return Err(DatasetError::Invalid(format!("duplicate image name {img}")));
        }
    }

    let mesh = load_mesh(root.join(&m.mesh))?;
    let (hr_cams, hr_images) = load_views(root, hr)?;
    let views: Vec<(CameraView, ViewImage)> = hr_cams
        .par_iter()
        .zip(hr_images.par_iter())
        .map(|(cam, img)| {
            let mut lr = downscale_image(img, factor)?;
            // Retrieve from exactly what lands on disk.
            lr.rgb.iter_mut().for_each(|c| *c = c.map(|v| quantize8(v) as f64 / 255.0));
            Ok((scale_camera(cam, factor)?, lr))
        })
        .collect::<Result<_, DatasetError>>()?;
    let (cams, images): (Vec<_>, Vec<_>) = views.into_iter().unzip();

    let s = factor as usize;
    let atlas_size = [m.atlas_size[0] / s, m.atlas_size[1] / s];
    let atlas = rasterize_atlas(&mesh, atlas_size[0], atlas_size[1])?;
    let ops = build_operators(&mesh, &atlas, &cams, splat)?;
    let cfg = RetrievalConfig {
        mode: m.retrieval_mode,
        ..Default::default()
    };
    let retrieved = run_retrieval(&ops, &images, &atlas, &cfg)?;
    log::info!(
        "x{factor}: {} views, atlas {}x{}, {} active texels, {} unseen",
        images.len(),
        atlas_size[0],
        atlas_size[1],
        atlas.active_count(),
        retrieved.unseen
    );

    let dir = format!("x{factor}");
    let entry = ScaleEntry {
        scale: factor,
        atlas_size,
        images: hr
            .images
            .iter()
            .map(|i| Ok(format!("{dir}/images/{}", file_name(i)?)))
            .collect::<Result<_, DatasetError>>()?,
        cameras: hr
            .images
            .iter()
            .map(|i| Ok(format!("{dir}/cams/{}.txt", file_stem(i)?)))
            .collect::<Result<_, DatasetError>>()?,
        texture: Some(format!("{dir}/texture.png")),
        mask: Some(format!("{dir}/mask.png")),
        normals: None,
    };

    let tmp = root.join(format!(".{dir}.tmp"));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_error(&tmp))?;
    }
    let write_all = || -> Result<(), DatasetError> {
        fs::create_dir_all(tmp.join("images")).map_err(io_error(&tmp))?;
        fs::create_dir_all(tmp.join("cams")).map_err(io_error(&tmp))?;
        let strip = |rel: &str| tmp.join(rel.strip_prefix(&format!("{dir}/")).expect("entry paths live under dir"));
        entry
            .images
            .par_iter()
            .zip(images.par_iter())
            .try_for_each(|(rel, img)| write_view_image(&strip(rel), img))?;
        for (rel, cam) in entry.cameras.iter().zip(&cams) {
            write_camera_file(&strip(rel), cam)?;
        }
        write_texture(
            &tmp.join("texture.png"),
            Some(&tmp.join("mask.png")),
            &retrieved.texture,
            TextureDepth::Sixteen,
        )?;
        Ok(())
    };
    if let Err(e) = write_all() {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }

    let target = root.join(&dir);
    let old = root.join(format!(".{dir}.old"));
    if old.exists() {
        fs::remove_dir_all(&old).map_err(io_error(&old))?;
    }
    let had_old = target.exists();
    if had_old {
        fs::rename(&target, &old).map_err(|e| DatasetError::PartialWrite(e.to_string()))?;
    }
    if let Err(e) = fs::rename(&tmp, &target) {
        if had_old {
            let _ = fs::rename(&old, &target);
        }
        let _ = fs::remove_dir_all(&tmp);
        return Err(DatasetError::PartialWrite(e.to_string()));
    }
    if had_old {
        fs::remove_dir_all(&old).map_err(io_error(&old))?;
    }

    let mut out = m.clone();
    out.set_entry(entry);
    Ok(out)
}

/// Scores an interpolation baseline on one scene: the stored `x<scale>`
/// texture is upsampled onto the HR mask and compared with the stored HR
/// texture.
pub fn interpolation_row(
    root: &Path,
    m: &SceneManifest,
    scale: u32,
    kernel: InterpKernel,
) -> Result<MetricRow, DatasetError> {
    let load = |s: u32| -> Result<TextureAtlas, DatasetError> {
        let e = m.entry(s).ok_or(DatasetError::MissingScale(s))?;
        match (&e.texture, &e.mask) {
            (Some(t), Some(mk)) => Ok(read_texture(&root.join(t), Some(&root.join(mk)))?),
            (Some(t), None) => Ok(read_texture(&root.join(t), None)?),
            _ => Err(DatasetError::Invalid(format!("scale {s} has no texture map"))),
        }
    };
    let hr = load(1)?;
    let lr = load(scale)?;
    let up = upsample_interp(&lr, scale, kernel, &hr.mask, (hr.width, hr.height))
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let report = evaluate_pair(&hr, &up.texture).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    Ok(MetricRow {
        scene: m.scene.clone(),
        subset: m.subset.to_string(),
        method: kernel_method_name(kernel).to_string(),
        scale,
        psnr_db: report.psnr,
        ssim: report.ssim,
        active_texels: report.active_texel_count,
    })
}

/// Method label used in result tables.
pub fn kernel_method_name(kernel: InterpKernel) -> &'static str {
    match kernel {
        InterpKernel::Nearest => "Nearest",
        InterpKernel::Bilinear => "Bilinear",
        InterpKernel::Bicubic => "Bicubic",
        InterpKernel::Lanczos => "Lanczos",
    }
}
