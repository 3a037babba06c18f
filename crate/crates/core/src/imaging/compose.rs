use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::types::{ensure_same_extent, ForegroundMask, GrayscaleImage, RasterImage};
use crate::error::{Error, Result};
use crate::rng::{UnitNoise, STREAM_INIT_NOISE};

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Luma of one RGB triple, computed in double precision.
#[inline]
pub fn luma(r: f32, g: f32, b: f32) -> f64 {
    LUMA_WEIGHTS[0] * r as f64 + LUMA_WEIGHTS[1] * g as f64 + LUMA_WEIGHTS[2] * b as f64
}

pub fn to_grayscale(image: &RasterImage) -> Result<GrayscaleImage> {
    if image.channels() != 3 && image.channels() != 4 {
        return Err(Error::invalid("grayscale needs an RGB or RGBA image"));
    }
    let data = image.pixels().map(|p| luma(p[0], p[1], p[2]).min(1.0) as f32).collect();
    GrayscaleImage::new(image.width(), image.height(), data)
}

/// Which image the inpainting run starts from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Foreground replaced by its own luma, background untouched.
    #[default]
    ForegroundGrayscale,
    /// The input image as-is.
    OriginalImage,
    /// Foreground replaced by seeded uniform noise.
    ForegroundNoise,
}

impl InitMode {
    pub const ALL: [InitMode; 3] = [
        InitMode::ForegroundGrayscale,
        InitMode::OriginalImage,
        InitMode::ForegroundNoise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::ForegroundGrayscale => "foreground-grayscale",
            InitMode::OriginalImage => "original-image",
            InitMode::ForegroundNoise => "foreground-noise",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown init mode `{s}`")))
    }
}

/// Builds the image inpainting starts from.
///
/// In grayscale mode each pixel becomes `F·Y + (1 − F)·rgb` using the soft
/// mask value `F` and the pixel's luma `Y`. Noise mode blends toward
/// uniform noise drawn from `seed` instead; `seed` is ignored otherwise.
/// Alpha is carried over unchanged.
pub fn compose_init_image(
    image: &RasterImage,
    mask: &ForegroundMask,
    mode: InitMode,
    seed: u64,
) -> Result<RasterImage> {
    ensure_same_extent("init composite mask", image.extent(), mask.extent())?;
    let mut out = image.clone();
    match mode {
        InitMode::OriginalImage => {}
        InitMode::ForegroundGrayscale => {
            for (px, &f) in out.pixels_mut().zip(mask.values()) {
                let f = f as f64;
                let y = luma(px[0], px[1], px[2]);
                for c in &mut px[..3] {
                    *c = (f * y + (1.0 - f) * *c as f64) as f32;
                }
            }
        }
        InitMode::ForegroundNoise => {
            let mut noise = UnitNoise::new(seed, STREAM_INIT_NOISE);
            for (px, &f) in out.pixels_mut().zip(mask.values()) {
                let f = f as f64;
                for c in &mut px[..3] {
                    let n = noise.next_unit();
                    *c = (f * n + (1.0 - f) * *c as f64) as f32;
                }
            }
        }
    }
    Ok(out)
}
