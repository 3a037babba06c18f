#![allow(dead_code)]

use matx_core::imaging::{ForegroundMask, RasterImage, ScalarField};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random 8-bit RGB image.
pub fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RasterImage {
    let bytes: Vec<u8> = (0..w * h * 3).map(|_| (rng.next_u32() & 0xff) as u8).collect();
    RasterImage::from_u8(w, h, 3, &bytes).unwrap()
}

pub fn gradient(w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, 3, |x, y| {
        let v = 0.15 + 0.7 * (x + y) as f32 / (w + h) as f32;
        [v, 0.8 * v + 0.1, 0.5, 1.0]
    })
    .unwrap()
    .quantized()
}

pub fn rect_mask(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> ForegroundMask {
    ForegroundMask::from_field(
        ScalarField::from_fn(w, h, |x, y| {
            if x >= x0 && x < x1 && y >= y0 && y < y1 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap(),
    )
    .unwrap()
}

pub fn solid(rgb: [f32; 3]) -> RasterImage {
    RasterImage::filled(8, 8, &rgb).unwrap().quantized()
}
