//! Offline metric backends.
//!
//! * [`PooledLumaDistance`]: mean absolute difference of 8×8 average-pooled
//!   luma. Edge blocks average over the pixels they cover.
//! * [`ColorHistogramEmbedder`]: 64-bin RGB histogram with four levels per
//!   channel taken from the top two bits of the 8-bit value, as pixel
//!   fractions.

use super::{ImageEmbedder, PerceptualMetric};
use crate::error::{Error, Result};
use crate::imaging::{luma, unit_to_u8, RasterImage};

pub const POOL_SIZE: u32 = 8;
pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, Copy, Default)]
pub struct PooledLumaDistance;

/// Block means of luma in row-major block order.
pub fn pooled_luma(image: &RasterImage) -> Vec<f64> {
    let (w, h) = image.extent();
    let bw = w.div_ceil(POOL_SIZE);
    let bh = h.div_ceil(POOL_SIZE);
    let mut sums = vec![0.0f64; (bw * bh) as usize];
    let mut counts = vec![0u32; sums.len()];
    for y in 0..h {
        for x in 0..w {
            let p = image.pixel(x, y);
            let i = ((y / POOL_SIZE) * bw + x / POOL_SIZE) as usize;
            sums[i] += luma(p[0], p[1], p[2]);
            counts[i] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect()
}

impl PerceptualMetric for PooledLumaDistance {
    fn distance(&self, a: &RasterImage, b: &RasterImage) -> Result<f64> {
        if a.extent() != b.extent() {
            return Err(Error::invalid("pooled luma distance needs equal extents"));
        }
        let pa = pooled_luma(a);
        let pb = pooled_luma(b);
        Ok(pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / pa.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ColorHistogramEmbedder;

pub fn histogram_bin(px: &[f32]) -> usize {
    let q = |v: f32| (unit_to_u8(v) >> 6) as usize;
    q(px[0]) * 16 + q(px[1]) * 4 + q(px[2])
}

impl ImageEmbedder for ColorHistogramEmbedder {
    fn embed(&self, image: &RasterImage) -> Result<Vec<f64>> {
        let mut hist = vec![0.0f64; HISTOGRAM_BINS];
        for p in image.pixels() {
            hist[histogram_bin(p)] += 1.0;
        }
        let n = image.pixel_count() as f64;
        hist.iter_mut().for_each(|v| *v /= n);
        Ok(hist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_white_distance_is_one() {
        let black = RasterImage::filled(20, 13, &[0.0, 0.0, 0.0]).unwrap();
        let white = RasterImage::filled(20, 13, &[1.0, 1.0, 1.0]).unwrap();
        let d = PooledLumaDistance.distance(&black, &white).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
        assert_eq!(PooledLumaDistance.distance(&white, &white).unwrap(), 0.0);
    }

    #[test]
    fn partial_blocks_average_available_pixels() {
        // 9x1: block 0 has 8 pixels, block 1 has one.
        let img = RasterImage::from_fn(9, 1, 3, |x, _| if x == 8 { [1.0; 4] } else { [0.0; 4] }).unwrap();
        let pooled = pooled_luma(&img);
        assert_eq!(pooled.len(), 2);
        assert_eq!(pooled[0], 0.0);
        assert!((pooled[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins() {
        assert_eq!(histogram_bin(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(histogram_bin(&[1.0, 1.0, 1.0]), 63);
        assert_eq!(histogram_bin(&[1.0, 0.0, 0.0]), 48);
        // 63/255 -> 63 >> 6 = 0; 64/255 -> 1
        assert_eq!(histogram_bin(&[63.0 / 255.0, 64.0 / 255.0, 0.0]), 4);
        let img = RasterImage::filled(3, 2, &[0.0, 0.0, 1.0]).unwrap();
        let h = ColorHistogramEmbedder.embed(&img).unwrap();
        assert_eq!(h[3], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }
}
