//! Four-channel normal maps: encoded surface normal plus an alpha mask.

use std::path::Path;

use crate::io::{self, ImageIoError};

use super::atlas::TexelAtlasMap;

/// RGBA8 image over the atlas. Alpha is 255 on active texels, 0 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalMapImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGBA, row-major.
    pub data: Vec<u8>,
}

/// Maps a unit component in [-1, 1] to 8 bits with round-half-up.
pub fn encode_component(n: f64) -> u8 {
    ((n + 1.0) * 0.5 * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn decode_component(c: u8) -> f64 {
    c as f64 / 255.0 * 2.0 - 1.0
}

pub fn bake_normal_map(atlas: &TexelAtlasMap) -> NormalMapImage {
    let mut data = Vec::with_capacity(atlas.texel_count() * 4);
    for s in atlas.samples() {
        match s {
            Some(s) => {
                data.extend(s.normal.map(encode_component));
                data.push(255);
            }
            None => data.extend([0, 0, 0, 0]),
        }
    }
    NormalMapImage {
        width: atlas.width(),
        height: atlas.height(),
        data,
    }
}

impl NormalMapImage {
    pub fn alpha(&self, texel: usize) -> u8 {
        self.data[texel * 4 + 3]
    }

    /// Decoded normal at a texel, or `None` where alpha is 0.
    pub fn decode(&self, texel: usize) -> Option<[f64; 3]> {
        let px = &self.data[texel * 4..texel * 4 + 4];
        (px[3] == 255).then(|| [px[0], px[1], px[2]].map(decode_component))
    }

    pub fn mask(&self) -> Vec<bool> {
        self.data.chunks_exact(4).map(|p| p[3] == 255).collect()
    }

    pub fn write_png(&self, path: &Path) -> Result<(), ImageIoError> {
        io::write_rgba8(path, &self.data, self.width, self.height)
    }

    pub fn read_png(path: &Path) -> Result<Self, ImageIoError> {
        let (width, height, data) = io::read_rgba8(path)?;
        Ok(Self { width, height, data })
    }
}
