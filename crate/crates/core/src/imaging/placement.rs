//! Mapping images onto the generator's fixed working canvas and back.

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma, Rgb, Rgba};
use serde::{Deserialize, Serialize};

use super::types::{RasterImage, ScalarField};
use crate::error::{Error, Result};

/// How a source image sits inside the working canvas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub source: (u32, u32),
    pub target: (u32, u32),
    pub scale: f64,
    /// Top-left corner of the resized content inside the canvas.
    pub offset: (u32, u32),
    /// Size of the resized content.
    pub content: (u32, u32),
}

impl Placement {
    /// Aspect-preserving fit of `source` into `target`, centred.
    pub fn compute(source: (u32, u32), target: (u32, u32)) -> Result<Placement> {
        let (tw, th) = target;
        if tw == 0 || th == 0 || tw % 8 != 0 || th % 8 != 0 {
            return Err(Error::invalid(format!(
                "working size {tw}x{th} must be positive multiples of 8"
            )));
        }
        let (sw, sh) = source;
        let scale = (tw as f64 / sw as f64).min(th as f64 / sh as f64);
        let cw = ((sw as f64 * scale).round() as u32).clamp(1, tw);
        let ch = ((sh as f64 * scale).round() as u32).clamp(1, th);
        Ok(Placement {
            source,
            target,
            scale,
            offset: ((tw - cw) / 2, (th - ch) / 2),
            content: (cw, ch),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }

    pub fn place_image(&self, image: &RasterImage) -> Result<RasterImage> {
        self.check_source(image.extent())?;
        let c = image.channels();
        let resized = resample(image.data(), self.source, c, self.content);
        let data = pad_replicate(&resized, self.content, c as usize, self.target, self.offset);
        RasterImage::new(self.target.0, self.target.1, c, clamp_unit(data))
    }

    pub fn place_field(&self, field: &ScalarField) -> Result<ScalarField> {
        self.check_source(field.extent())?;
        let resized = resample(field.values(), self.source, 1, self.content);
        let data = pad_replicate(&resized, self.content, 1, self.target, self.offset);
        ScalarField::new(self.target.0, self.target.1, data)
    }

    /// Crops the content window out of a working-size image and resizes it
    /// back to the source extent. Exact when the scale is 1.
    pub fn restore_image(&self, image: &RasterImage) -> Result<RasterImage> {
        if image.extent() != self.target {
            return Err(Error::invalid(format!(
                "restore expects {}x{}, got {}x{}",
                self.target.0,
                self.target.1,
                image.width(),
                image.height()
            )));
        }
        let c = image.channels() as usize;
        let (cw, ch) = self.content;
        let mut window = Vec::with_capacity(cw as usize * ch as usize * c);
        for y in self.offset.1..self.offset.1 + ch {
            let start = (y as usize * self.target.0 as usize + self.offset.0 as usize) * c;
            window.extend_from_slice(&image.data()[start..start + cw as usize * c]);
        }
        let data = resample(&window, self.content, c as u8, self.source);
        RasterImage::new(self.source.0, self.source.1, c as u8, clamp_unit(data))
    }

    fn check_source(&self, extent: (u32, u32)) -> Result<()> {
        if extent != self.source {
            return Err(Error::invalid(format!(
                "placement built for {}x{}, got {}x{}",
                self.source.0, self.source.1, extent.0, extent.1
            )));
        }
        Ok(())
    }
}

/// Resizes and pads `image` onto a `target` canvas, returning the placement
/// needed to map results back.
pub fn fit_to_generation_size(image: &RasterImage, target: (u32, u32)) -> Result<(RasterImage, Placement)> {
    let placement = Placement::compute(image.extent(), target)?;
    Ok((placement.place_image(image)?, placement))
}

/// Resizes a raster with a triangle filter; identity when the size matches.
pub fn resize_raster(image: &RasterImage, size: (u32, u32)) -> Result<RasterImage> {
    let data = resample(image.data(), image.extent(), image.channels(), size);
    RasterImage::new(size.0, size.1, image.channels(), clamp_unit(data))
}

fn clamp_unit(mut data: Vec<f32>) -> Vec<f32> {
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    data
}

fn resample(data: &[f32], from: (u32, u32), channels: u8, to: (u32, u32)) -> Vec<f32> {
    if from == to {
        return data.to_vec();
    }
    let (w, h) = from;
    let (nw, nh) = to;
    let buf = data.to_vec();
    match channels {
        1 => {
            let img: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_raw(w, h, buf).expect("length checked");
            imageops::resize(&img, nw, nh, FilterType::Triangle).into_raw()
        }
        3 => {
            let img: ImageBuffer<Rgb<f32>, Vec<f32>> = ImageBuffer::from_raw(w, h, buf).expect("length checked");
            imageops::resize(&img, nw, nh, FilterType::Triangle).into_raw()
        }
        4 => {
            let img: ImageBuffer<Rgba<f32>, Vec<f32>> = ImageBuffer::from_raw(w, h, buf).expect("length checked");
            imageops::resize(&img, nw, nh, FilterType::Triangle).into_raw()
        }
        _ => unreachable!("channel count validated by the image types"),
    }
}

fn pad_replicate(content: &[f32], size: (u32, u32), c: usize, target: (u32, u32), offset: (u32, u32)) -> Vec<f32> {
    let (cw, ch) = (size.0 as i64, size.1 as i64);
    let (tw, th) = target;
    let mut out = Vec::with_capacity(tw as usize * th as usize * c);
    for y in 0..th as i64 {
        let sy = (y - offset.1 as i64).clamp(0, ch - 1);
        for x in 0..tw as i64 {
            let sx = (x - offset.0 as i64).clamp(0, cw - 1);
            let i = (sy * cw + sx) as usize * c;
            out.extend_from_slice(&content[i..i + c]);
        }
    }
    out
}
