//! PNG reading and writing for view images, texture maps and masks.
//!
//! View images are 8-bit RGB. Texture maps are 16-bit RGB by default with a
//! separate 8-bit grayscale mask (0 or 255).

use std::fs;
use std::io::{self, BufWriter};
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};
use thiserror::Error;

use crate::formation::ViewImage;
use crate::retrieval::TextureAtlas;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {message}")]
    Decode { path: String, message: String },
    #[error("{path}: image is {found_w}x{found_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        path: String,
        found_w: usize,
        found_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

/// Bit depth of stored texture maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextureDepth {
    Eight,
    #[default]
    Sixteen,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ImageIoError + '_ {
    move |source| ImageIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn encode(
    path: &Path,
    bytes: &[u8],
    width: usize,
    height: usize,
    color: ExtendedColorType,
) -> Result<(), ImageIoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let encoder = PngEncoder::new_with_quality(
        BufWriter::new(file),
        CompressionType::Default,
        FilterType::Adaptive,
    );
    encoder
        .write_image(bytes, width as u32, height as u32, color)
        .map_err(|e| ImageIoError::Decode {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

fn open(path: &Path) -> Result<image::DynamicImage, ImageIoError> {
    let reader = image::ImageReader::open(path).map_err(io_err(path))?;
    let reader = reader.with_guessed_format().map_err(io_err(path))?;
    reader.decode().map_err(|e| ImageIoError::Decode {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

pub fn write_rgba8(path: &Path, data: &[u8], width: usize, height: usize) -> Result<(), ImageIoError> {
    encode(path, data, width, height, ExtendedColorType::Rgba8)
}

pub fn read_rgba8(path: &Path) -> Result<(usize, usize, Vec<u8>), ImageIoError> {
    let img = open(path)?.into_rgba8();
    Ok((img.width() as usize, img.height() as usize, img.into_raw()))
}

/// Writes a view image as 8-bit RGB.
pub fn write_view_image(path: &Path, img: &ViewImage) -> Result<(), ImageIoError> {
    let bytes: Vec<u8> = img.rgb.iter().flat_map(|c| c.map(quantize8)).collect();
    encode(path, &bytes, img.width, img.height, ExtendedColorType::Rgb8)
}

/// Reads an RGB view image. Coverage is set everywhere.
pub fn read_view_image(path: &Path) -> Result<ViewImage, ImageIoError> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb = match img {
        image::DynamicImage::ImageRgb16(_) | image::DynamicImage::ImageRgba16(_) => img
            .into_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect(),
        other => other
            .into_rgb8()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
    };
    Ok(ViewImage {
        width: w,
        height: h,
        rgb,
        coverage: vec![true; w * h],
    })
}

pub fn write_mask(path: &Path, mask: &[bool], width: usize, height: usize) -> Result<(), ImageIoError> {
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    encode(path, &bytes, width, height, ExtendedColorType::L8)
}

/// Reads a mask PNG; any nonzero luma value counts as active.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<bool>), ImageIoError> {
    let img = open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok((w, h, img.into_raw().into_iter().map(|v| v != 0).collect()))
}

/// Writes the texture colors and its mask as two PNG files.
pub fn write_texture(
    texture_path: &Path,
    mask_path: Option<&Path>,
    tex: &TextureAtlas,
    depth: TextureDepth,
) -> Result<(), ImageIoError> {
    match depth {
        TextureDepth::Eight => {
            let bytes: Vec<u8> = tex.rgb.iter().flat_map(|c| c.map(quantize8)).collect();
            encode(texture_path, &bytes, tex.width, tex.height, ExtendedColorType::Rgb8)?;
        }
        TextureDepth::Sixteen => {
            let buf: Vec<u16> = tex.rgb.iter().flat_map(|c| c.map(quantize16)).collect();
            let img = image::ImageBuffer::<image::Rgb<u16>, _>::from_raw(
                tex.width as u32,
                tex.height as u32,
                buf,
            )
            .expect("buffer size matches dimensions");
            if let Some(parent) = texture_path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(io_err(texture_path))?;
            }
            let file = fs::File::create(texture_path).map_err(io_err(texture_path))?;
            let encoder = PngEncoder::new_with_quality(
                BufWriter::new(file),
                CompressionType::Default,
                FilterType::Adaptive,
            );
            img.write_with_encoder(encoder).map_err(|e| ImageIoError::Decode {
                path: texture_path.display().to_string(),
                message: e.to_string(),
            })?;
        }
    }
    if let Some(mask_path) = mask_path {
        write_mask(mask_path, &tex.mask, tex.width, tex.height)?;
    }
    Ok(())
}

/// Reads a texture PNG (8 or 16 bit) and applies the mask, zeroing inactive
/// texels. Without a mask every texel is active.
pub fn read_texture(texture_path: &Path, mask_path: Option<&Path>) -> Result<TextureAtlas, ImageIoError> {
    let img = open(texture_path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb: Vec<[f64; 3]> = match img {
        image::DynamicImage::ImageLuma8(_)
        | image::DynamicImage::ImageLumaA8(_)
        | image::DynamicImage::ImageRgb8(_)
        | image::DynamicImage::ImageRgba8(_) => img
            .into_rgb8()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect(),
        other => other
            .into_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect(),
    };
    let mask = match mask_path {
        Some(mp) => {
            let (mw, mh, m) = read_mask(mp)?;
            if (mw, mh) != (w, h) {
                return Err(ImageIoError::SizeMismatch {
                    path: mp.display().to_string(),
                    found_w: mw,
                    found_h: mh,
                    want_w: w,
                    want_h: h,
                });
            }
            m
        }
        None => vec![true; w * h],
    };
    Ok(TextureAtlas::new(w, h, rgb, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_texture_round_trip_is_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let rgb: Vec<[f64; 3]> = (0..12)
            .map(|k| [k as f64 / 11.0, 0.5, 1.0 - k as f64 / 11.0])
            .collect();
        let mut mask = vec![true; 12];
        mask[5] = false;
        let tex = TextureAtlas::new(4, 3, rgb, mask);
        let tp = dir.path().join("t.png");
        let mp = dir.path().join("m.png");
        write_texture(&tp, Some(&mp), &tex, TextureDepth::Sixteen).unwrap();
        let back = read_texture(&tp, Some(&mp)).unwrap();
        assert_eq!(back.mask, tex.mask);
        for (a, b) in back.rgb.iter().zip(&tex.rgb) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() <= 0.5 / 65535.0 + 1e-15);
            }
        }
        write_texture(&tp, None, &tex, TextureDepth::Eight).unwrap();
        let back8 = read_texture(&tp, Some(&mp)).unwrap();
        assert!((back8.rgb[0][2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn view_image_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ViewImage {
            width: 2,
            height: 1,
            rgb: vec![[0.0, 1.0, 0.5], [0.2, 0.4, 0.6]],
            coverage: vec![true, false],
        };
        let p = dir.path().join("v.png");
        write_view_image(&p, &img).unwrap();
        let back = read_view_image(&p).unwrap();
        assert_eq!(back.rgb[0], [0.0, 1.0, 128.0 / 255.0]);
        assert_eq!((back.width, back.height), (2, 1));
    }
}
