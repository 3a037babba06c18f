//! PNG persistence for rasters, masks and depth maps.
//!
//! Rasters are 8-bit RGB/RGBA, masks 8-bit single channel, depth maps 16-bit
//! single channel with a JSON sidecar naming the near=1 convention.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage, ImageBuffer, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use super::types::{DepthMap, ForegroundMask, RasterImage};
use crate::error::{Error, Result};

pub fn decode_raster(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    let (w, h) = (img.width(), img.height());
    match img.color() {
        ColorType::Rgb8 => RasterImage::from_u8(w, h, 3, &img.to_rgb8().into_raw()),
        ColorType::Rgba8 => RasterImage::from_u8(w, h, 4, &img.to_rgba8().into_raw()),
        // single-channel or 16-bit inputs are widened to RGB(A)
        c if c.has_alpha() => RasterImage::from_u8(w, h, 4, &img.to_rgba8().into_raw()),
        _ => RasterImage::from_u8(w, h, 3, &img.to_rgb8().into_raw()),
    }
}

pub fn encode_raster(image: &RasterImage) -> Result<Vec<u8>> {
    let (w, h) = image.extent();
    let bytes = image.to_u8();
    let dynamic = if image.has_alpha() {
        DynamicImage::ImageRgba8(ImageBuffer::from_raw(w, h, bytes).expect("length checked"))
    } else {
        DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, bytes).expect("length checked"))
    };
    write_png(&dynamic)
}

/// Decodes an 8-bit single-channel mask PNG.
pub fn decode_mask(bytes: &[u8]) -> Result<ForegroundMask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    if img.color() != ColorType::L8 {
        return Err(Error::invalid(format!(
            "mask PNG must be 8-bit single channel, got {:?}",
            img.color()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let data = img
        .to_luma8()
        .into_raw()
        .into_iter()
        .map(super::types::u8_to_unit)
        .collect();
    ForegroundMask::new(w, h, data)
}

pub fn encode_mask(mask: &ForegroundMask) -> Result<Vec<u8>> {
    let (w, h) = mask.extent();
    let bytes = mask.values().iter().map(|&v| super::types::unit_to_u8(v)).collect();
    write_png(&DynamicImage::ImageLuma8(
        ImageBuffer::from_raw(w, h, bytes).expect("length checked"),
    ))
}

/// Metadata written next to every persisted depth map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub convention: String,
    pub bit_depth: u8,
    pub width: u32,
    pub height: u32,
    pub backend_id: Option<String>,
}

pub const NEAR_IS_ONE: &str = "near=1";

pub fn encode_depth(depth: &DepthMap) -> Result<Vec<u8>> {
    let (w, h) = depth.extent();
    let data: Vec<u16> = depth
        .values()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(w, h, data).expect("length checked");
    write_png(&DynamicImage::ImageLuma16(buf))
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    if img.color() != ColorType::L16 {
        return Err(Error::invalid(format!(
            "depth PNG must be 16-bit single channel, got {:?}",
            img.color()
        )));
    }
    let (w, h) = (img.width(), img.height());
    let data = img
        .to_luma16()
        .into_raw()
        .into_iter()
        .map(|v| (v as f64 / 65535.0) as f32)
        .collect();
    DepthMap::new(w, h, data)
}

/// Writes `<path>` (16-bit PNG) and `<path>.json` sidecar.
pub fn save_depth(depth: &DepthMap, path: &Path, backend_id: Option<&str>) -> Result<PathBuf> {
    std::fs::write(path, encode_depth(depth)?)?;
    let sidecar = DepthSidecar {
        convention: NEAR_IS_ONE.to_string(),
        bit_depth: 16,
        width: depth.width(),
        height: depth.height(),
        backend_id: backend_id.map(str::to_string),
    };
    let side_path = sidecar_path(path);
    std::fs::write(&side_path, serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(side_path)
}

/// `foo.png` → `foo.png.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn load_raster(path: &Path) -> Result<RasterImage> {
    decode_raster(&std::fs::read(path)?)
}

pub fn save_raster(image: &RasterImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_raster(image)?)?;
    Ok(())
}

pub fn load_mask(path: &Path) -> Result<ForegroundMask> {
    decode_mask(&std::fs::read(path)?)
}

pub fn save_mask(mask: &ForegroundMask, path: &Path) -> Result<()> {
    std::fs::write(path, encode_mask(mask)?)?;
    Ok(())
}

fn write_png(img: &DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}
