use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold used by [`ForegroundMask::binary_view`].
pub const DEFAULT_MASK_THRESHOLD: f32 = 0.5;

/// An RGB or RGBA image with per-channel intensities in `[0, 1]`.
///
/// Values are held as `f32` so intermediate composites stay exact; images
/// decoded from 8-bit sources sit on the `k / 255` grid and round-trip
/// through [`RasterImage::to_u8`] losslessly.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<f32>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<f32>) -> Result<Self> {
        check_extent(width, height)?;
        if channels != 3 && channels != 4 {
            return Err(Error::invalid(format!(
                "raster images carry 3 or 4 channels, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_u8(width: u32, height: u32, channels: u8, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| u8_to_unit(b)).collect();
        Self::new(width, height, channels, data)
    }

    /// Solid image of one colour; `color.len()` picks the channel count.
    pub fn filled(width: u32, height: u32, color: &[f32]) -> Result<Self> {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * color.len());
        for _ in 0..n {
            data.extend_from_slice(color);
        }
        Self::new(width, height, color.len() as u8, data)
    }

    pub fn from_fn<F>(width: u32, height: u32, channels: u8, mut f: F) -> Result<Self>
    where
        F: FnMut(u32, u32) -> [f32; 4],
    {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                data.extend_from_slice(&px[..channels as usize]);
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn extent(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn has_alpha(&self) -> bool {
        self.channels == 4
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[f32] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.channels as usize)
    }

    pub(crate) fn pixels_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.data.chunks_exact_mut(self.channels as usize)
    }

    /// 8-bit view, rounding to nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| unit_to_u8(v)).collect()
    }

    /// Snaps every channel onto the 8-bit grid.
    pub fn quantized(&self) -> RasterImage {
        RasterImage {
            data: self.data.iter().map(|&v| u8_to_unit(unit_to_u8(v))).collect(),
            ..self.clone()
        }
    }

    /// Drops alpha, or returns a copy when already RGB.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.pixels().flat_map(|p| [p[0], p[1], p[2]]).collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Alpha plane of an RGBA image.
    pub fn alpha(&self) -> Option<ScalarField> {
        if self.channels != 4 {
            return None;
        }
        Some(ScalarField {
            width: self.width,
            height: self.height,
            data: self.pixels().map(|p| p[3]).collect(),
        })
    }

    /// Sub-image covering `crop`.
    pub fn crop(&self, crop: &CropBox) -> Result<RasterImage> {
        crop.check_within(self.width, self.height)?;
        let c = self.channels as usize;
        let mut data = Vec::with_capacity(crop.width as usize * crop.height as usize * c);
        for y in crop.y..crop.y + crop.height {
            let start = (y as usize * self.width as usize + crop.x as usize) * c;
            data.extend_from_slice(&self.data[start..start + crop.width as usize * c]);
        }
        Ok(RasterImage {
            width: crop.width,
            height: crop.height,
            channels: self.channels,
            data,
        })
    }

    pub(crate) fn from_parts_unchecked(width: u32, height: u32, channels: u8, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width as usize * height as usize * channels as usize);
        RasterImage {
            width,
            height,
            channels,
            data,
        }
    }
}

/// A raw single-channel real field, such as an estimator's unnormalized
/// depth output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl ScalarField {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        check_extent(width, height)?;
        if data.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "field length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(ScalarField { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn<F: FnMut(u32, u32) -> f32>(width: u32, height: u32, mut f: F) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn extent(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn into_values(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    fn check_unit(&self, what: &str) -> Result<()> {
        match self.data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            Some(v) => Err(Error::invalid(format!("{what} value {v} outside [0, 1]"))),
            None => Ok(()),
        }
    }
}

macro_rules! unit_plane {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            field: ScalarField,
        }

        impl $name {
            pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
                Self::from_field(ScalarField::new(width, height, data)?)
            }

            pub fn from_field(field: ScalarField) -> Result<Self> {
                field.check_unit($what)?;
                Ok($name { field })
            }

            pub fn width(&self) -> u32 {
                self.field.width
            }

            pub fn height(&self) -> u32 {
                self.field.height
            }

            pub fn extent(&self) -> (u32, u32) {
                self.field.extent()
            }

            pub fn values(&self) -> &[f32] {
                &self.field.data
            }

            pub fn get(&self, x: u32, y: u32) -> f32 {
                self.field.get(x, y)
            }

            pub fn as_field(&self) -> &ScalarField {
                &self.field
            }

            pub fn into_field(self) -> ScalarField {
                self.field
            }
        }
    };
}

unit_plane!(
    /// Single-channel luma in `[0, 1]`.
    GrayscaleImage,
    "grayscale"
);

unit_plane!(
    /// Normalized depth in `[0, 1]`, larger values nearer to the camera.
    DepthMap,
    "depth"
);

/// Soft foreground alpha in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundMask {
    field: ScalarField,
    threshold: f32,
}

impl ForegroundMask {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        Self::from_field(ScalarField::new(width, height, data)?)
    }

    pub fn from_field(field: ScalarField) -> Result<Self> {
        field.check_unit("mask")?;
        Ok(ForegroundMask {
            field,
            threshold: DEFAULT_MASK_THRESHOLD,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self> {
        Self::from_field(ScalarField::filled(width, height, 0.0)?)
    }

    pub fn full(width: u32, height: u32) -> Result<Self> {
        Self::from_field(ScalarField::filled(width, height, 1.0)?)
    }

    pub fn from_binary(binary: &BinaryMask) -> Self {
        ForegroundMask {
            field: ScalarField {
                width: binary.width,
                height: binary.height,
                data: binary.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            },
            threshold: DEFAULT_MASK_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f32) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!("mask threshold {threshold} outside (0, 1]")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn threshold(&self) -> f32 {
        self.threshold
    }

    pub fn width(&self) -> u32 {
        self.field.width
    }

    pub fn height(&self) -> u32 {
        self.field.height
    }

    pub fn extent(&self) -> (u32, u32) {
        self.field.extent()
    }

    pub fn values(&self) -> &[f32] {
        &self.field.data
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.field.get(x, y)
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.field
    }

    pub fn binary_view(&self) -> BinaryMask {
        BinaryMask {
            width: self.field.width,
            height: self.field.height,
            bits: self.field.data.iter().map(|&v| v >= self.threshold).collect(),
        }
    }

    /// True when no pixel reaches the threshold.
    pub fn is_empty(&self) -> bool {
        self.field.data.iter().all(|&v| v < self.threshold)
    }
}

/// Thresholded mask used for morphology, paste-back support and metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_extent(width, height)?;
        if bits.len() != width as usize * height as usize {
            return Err(Error::invalid("binary mask length mismatch"));
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn extent(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Axis-aligned box in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl CropBox {
    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        if self.width == 0
            || self.height == 0
            || self.x as u64 + self.width as u64 > width as u64
            || self.y as u64 + self.height as u64 > height as u64
        {
            return Err(Error::invalid(format!(
                "crop {}x{}+{}+{} outside {width}x{height}",
                self.width, self.height, self.x, self.y
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_extent(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("empty extent {width}x{height}")));
    }
    Ok(())
}

pub(crate) fn ensure_same_extent(what: &str, a: (u32, u32), b: (u32, u32)) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what}: extent {}x{} does not match {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

#[inline]
pub fn u8_to_unit(b: u8) -> f32 {
    b as f32 / 255.0
}

#[inline]
pub fn unit_to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
