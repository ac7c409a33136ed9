//! Multi-resolution scene layout: the JSON manifest, image reduction and
//! low-resolution scene generation.
//!
//! ```text
//! scene/
//!   manifest.json
//!   mesh.obj
//!   x1/ images/*.png  cams/*.txt  texture.png  mask.png  normals.png
//!   x2/ ...
//! ```
//!
//! Paths inside the manifest are relative to the manifest's directory.

mod demo;
mod downscale;
mod generate;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{parse_camera, CameraError};
use crate::formation::FormationError;
use crate::geometry::{AtlasError, MeshError};
use crate::io::ImageIoError;
use crate::retrieval::{RetrievalError, RetrievalMode};

pub use demo::{write_demo_scene, DemoSceneConfig};
pub use downscale::{axis_weights, downscale_image};
pub use generate::{
    build_operators, generate_lr_scene, interpolation_row, kernel_method_name, load_scale_inputs, retrieve_scale, ScaleInputs, ScaleRetrieval,
};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported manifest format version {0}")]
    UnsupportedVersion(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("scale factor must be 2, 3 or 4, got {0}")]
    InvalidFactor(u32),
    #[error("manifest has no entry for scale {0}")]
    MissingScale(u32),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("could not move generated files into place: {0}")]
    PartialWrite(String),
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Formation(#[from] FormationError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subset {
    #[serde(rename = "ETH3D")]
    Eth3d,
    Collection,
    MiddleBury,
    SyB3R,
    #[serde(rename = "custom")]
    Custom,
}

impl Subset {
    /// The four benchmark groups, in table order.
    pub const BENCHMARK: [&'static str; 4] = ["ETH3D", "Collection", "MiddleBury", "SyB3R"];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Eth3d => "ETH3D",
            Self::Collection => "Collection",
            Self::MiddleBury => "MiddleBury",
            Self::SyB3R => "SyB3R",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Files of one resolution level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleEntry {
    pub scale: u32,
    pub atlas_size: [usize; 2],
    pub images: Vec<String>,
    pub cameras: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub format_version: u32,
    pub scene: String,
    pub subset: Subset,
    pub mesh: String,
    /// HR atlas size `[width, height]` in texels.
    pub atlas_size: [usize; 2],
    /// Estimator that produced the stored texture maps.
    pub retrieval_mode: RetrievalMode,
    pub scales: Vec<ScaleEntry>,
}

impl SceneManifest {
    pub fn entry(&self, scale: u32) -> Option<&ScaleEntry> {
        self.scales.iter().find(|e| e.scale == scale)
    }

    pub fn entry_mut(&mut self, scale: u32) -> Option<&mut ScaleEntry> {
        self.scales.iter_mut().find(|e| e.scale == scale)
    }

    /// Inserts or replaces the entry for `entry.scale`, keeping scales sorted.
    pub fn set_entry(&mut self, entry: ScaleEntry) {
        self.scales.retain(|e| e.scale != entry.scale);
        self.scales.push(entry);
        self.scales.sort_by_key(|e| e.scale);
    }

    pub fn hr(&self) -> Result<&ScaleEntry, DatasetError> {
        self.entry(1).ok_or(DatasetError::MissingScale(1))
    }
}

/// Directory holding the manifest, against which its paths resolve.
pub fn scene_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn read_manifest(path: &Path) -> Result<SceneManifest, DatasetError> {
    if !path.exists() {
        return Err(DatasetError::MissingFile(path.display().to_string()));
    }
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    parse_manifest(&text, &path.display().to_string())
}

pub fn parse_manifest(text: &str, path: &str) -> Result<SceneManifest, DatasetError> {
    let parse_err = |e: serde_json::Error| DatasetError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    // The version is checked before the schema so that future formats report
    // as unsupported rather than malformed.
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    match value.get("format_version") {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION as u64) => {}
        Some(serde_json::Value::Number(n)) => return Err(DatasetError::UnsupportedVersion(n.to_string())),
        Some(serde_json::Value::String(s)) => return Err(DatasetError::UnsupportedVersion(s.clone())),
        Some(other) => return Err(DatasetError::UnsupportedVersion(other.to_string())),
        None => {
            return Err(DatasetError::Parse {
                path: path.to_string(),
                line: 1,
                column: 1,
                message: "missing field `format_version`".into(),
            })
        }
    }
    serde_json::from_str(text).map_err(parse_err)
}

pub fn format_manifest(m: &SceneManifest) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    s
}

/// Writes the manifest through a temporary file and a rename.
pub fn write_manifest(path: &Path, m: &SceneManifest) -> Result<(), DatasetError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, format_manifest(m)).map_err(io_error(&tmp))?;
    fs::rename(&tmp, path).map_err(io_error(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// `(scale, views, image size of the first view)` per entry.
    pub scales: Vec<(u32, usize, (usize, usize))>,
}

fn require(root: &Path, rel: &str) -> Result<PathBuf, DatasetError> {
    let p = root.join(rel);
    if p.is_file() {
        Ok(p)
    } else {
        Err(DatasetError::MissingFile(p.display().to_string()))
    }
}

fn png_size(path: &Path) -> Result<(usize, usize), DatasetError> {
    let (w, h) = image::image_dimensions(path).map_err(|e| {
        DatasetError::Image(ImageIoError::Decode {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    })?;
    Ok((w as usize, h as usize))
}

/// Checks the manifest against the files under `root`: every referenced
/// file exists, image sizes follow `floor(HR / s)`, camera sizes match
/// their images and texture sizes match the entry's atlas size.
pub fn validate_manifest(m: &SceneManifest, root: &Path) -> Result<ValidationReport, DatasetError> {
    if m.format_version != FORMAT_VERSION {
        return Err(DatasetError::UnsupportedVersion(m.format_version.to_string()));
    }
    let hr = m.hr()?;
    require(root, &m.mesh)?;
    let mut seen = Vec::new();
    let mut hr_sizes = Vec::new();
    let mut report = Vec::new();
    for e in std::iter::once(hr).chain(m.scales.iter().filter(|e| e.scale != 1)) {
        if !(1..=4).contains(&e.scale) || seen.contains(&e.scale) {
            return Err(DatasetError::Invalid(format!("bad or repeated scale {}", e.scale)));
        }
        seen.push(e.scale);
        let s = e.scale as usize;
        if e.images.is_empty() || e.images.len() != e.cameras.len() {
            return Err(DatasetError::Invalid(format!(
                "scale {}: {} images and {} cameras",
                e.scale,
                e.images.len(),
                e.cameras.len()
            )));
        }
        if e.images.len() != hr.images.len() {
            return Err(DatasetError::Invalid(format!(
                "scale {} has {} views, scale 1 has {}",
                e.scale,
                e.images.len(),
                hr.images.len()
            )));
        }
        let want_atlas = [m.atlas_size[0] / s, m.atlas_size[1] / s];
        if e.atlas_size != want_atlas {
            return Err(DatasetError::Invalid(format!(
                "scale {}: atlas {:?}, expected {:?}",
                e.scale, e.atlas_size, want_atlas
            )));
        }
        for (v, (img, cam)) in e.images.iter().zip(&e.cameras).enumerate() {
            let ip = require(root, img)?;
            let cp = require(root, cam)?;
            let size = png_size(&ip)?;
            if e.scale == 1 {
                hr_sizes.push(size);
            } else {
                let want = (hr_sizes[v].0 / s, hr_sizes[v].1 / s);
                if size != want {
                    return Err(DatasetError::Invalid(format!(
                        "{img}: {}x{}, expected {}x{}",
                        size.0, size.1, want.0, want.1
                    )));
                }
            }
            let text = fs::read_to_string(&cp).map_err(io_error(&cp))?;
            let (_, cw, ch) = parse_camera(&text, cam)?;
            if (cw, ch) != size {
                return Err(DatasetError::Invalid(format!(
                    "{cam}: camera is {cw}x{ch}, image is {}x{}",
                    size.0, size.1
                )));
            }
        }
        for rel in [&e.texture, &e.mask, &e.normals].into_iter().flatten() {
            let p = require(root, rel)?;
            let size = png_size(&p)?;
            if [size.0, size.1] != e.atlas_size {
                return Err(DatasetError::Invalid(format!(
                    "{rel}: {}x{}, atlas is {:?}",
                    size.0, size.1, e.atlas_size
                )));
            }
        }
        let first = png_size(&root.join(&e.images[0]))?;
        report.push((e.scale, e.images.len(), first));
    }
    Ok(ValidationReport { scales: report })
}
