//! Deterministic stand-ins for the material encoder and the inpainting
//! generator.
//!
//! The mock encoder maps an exemplar to one vector
//! `[mean R, mean G, mean B, luma std]`.
//!
//! The mock generator paints every pixel as
//! `g = clamp(c · Y_init + n)` where `c` is the embedding's mean colour
//! (pulled toward white as `material_scale` drops), `Y_init` the init
//! image's luma and `n` uniform noise in `[-0.02, 0.02)` drawn from the seed
//! in row-major order over the whole canvas. The soft mask then blends
//! `F · g + (1 − F) · init`, so pixels with `F = 0` come back untouched.
//! Depth is checked for extent but otherwise unused.

use super::{Conditions, GenerationParams, Generator, MaterialEncoder};
use crate::error::{Error, Result};
use crate::imaging::{luma, RasterImage};
use crate::rng::{UnitNoise, STREAM_GENERATOR};

pub const MOCK_EMBEDDING_WIDTH: usize = 4;
pub const MOCK_NOISE_AMPLITUDE: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct MockEncoder {
    id: String,
}

impl MockEncoder {
    pub fn new(id: &str) -> Self {
        MockEncoder { id: id.to_string() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl MaterialEncoder for MockEncoder {
    fn width(&self) -> usize {
        MOCK_EMBEDDING_WIDTH
    }

    fn encode(&self, exemplar: &RasterImage, _text_hint: Option<&str>) -> Result<Vec<Vec<f32>>> {
        let n = exemplar.pixel_count() as f64;
        let mut sums = [0.0f64; 3];
        let mut lumas = Vec::with_capacity(exemplar.pixel_count());
        for p in exemplar.pixels() {
            for c in 0..3 {
                sums[c] += p[c] as f64;
            }
            lumas.push(luma(p[0], p[1], p[2]));
        }
        let mean_luma = lumas.iter().sum::<f64>() / n;
        let var = lumas.iter().map(|l| (l - mean_luma).powi(2)).sum::<f64>() / n;
        Ok(vec![vec![
            (sums[0] / n) as f32,
            (sums[1] / n) as f32,
            (sums[2] / n) as f32,
            var.sqrt() as f32,
        ]])
    }
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    id: String,
}

impl MockGenerator {
    pub fn new(id: &str) -> Self {
        MockGenerator { id: id.to_string() }
    }
}

/// Colour the mock paints with before luma modulation.
pub fn mock_material_color(vector: &[f32], material_scale: f64) -> [f64; 3] {
    let s = material_scale;
    [0, 1, 2].map(|c| s * vector[c] as f64 + (1.0 - s))
}

impl Generator for MockGenerator {
    fn accepts(&self, embedding: &super::MaterialEmbedding) -> Result<()> {
        if embedding.vectors.len() != 1 || embedding.width() != MOCK_EMBEDDING_WIDTH {
            return Err(Error::Contract(format!(
                "generator `{}` needs one {MOCK_EMBEDDING_WIDTH}-wide vector, embedding from `{}` has {} of width {}",
                self.id,
                embedding.backend_id,
                embedding.vectors.len(),
                embedding.width()
            )));
        }
        Ok(())
    }

    fn generate(&self, cond: &Conditions<'_>, params: &GenerationParams) -> Result<RasterImage> {
        cond.check_extents()?;
        self.accepts(cond.embedding)?;
        let color = mock_material_color(&cond.embedding.vectors[0], params.material_scale);
        let init = cond.init;
        let ch = init.channels() as usize;
        let mut noise = UnitNoise::new(params.seed, STREAM_GENERATOR);
        let mut data = Vec::with_capacity(init.data().len());
        for (px, &f) in init.pixels().zip(cond.mask.values()) {
            let y = luma(px[0], px[1], px[2]);
            let mut g = [0.0f64; 3];
            for c in 0..3 {
                let n = noise.next_symmetric(MOCK_NOISE_AMPLITUDE);
                g[c] = (color[c] * y + n).clamp(0.0, 1.0);
            }
            if f <= 0.0 {
                data.extend_from_slice(px);
                continue;
            }
            let f = f as f64;
            for c in 0..3 {
                let v = if f >= 1.0 {
                    g[c]
                } else {
                    f * g[c] + (1.0 - f) * px[c] as f64
                };
                data.push(v as f32);
            }
            if ch == 4 {
                data.push(px[3]);
            }
        }
        RasterImage::new(init.width(), init.height(), init.channels(), data)
    }
}

/// Generator that returns its init image unchanged.
#[derive(Debug, Clone)]
pub struct IdentityGenerator {
    id: String,
}

impl IdentityGenerator {
    pub fn new(id: &str) -> Self {
        IdentityGenerator { id: id.to_string() }
    }
}

impl Generator for IdentityGenerator {
    fn accepts(&self, _embedding: &super::MaterialEmbedding) -> Result<()> {
        Ok(())
    }

    fn generate(&self, cond: &Conditions<'_>, _params: &GenerationParams) -> Result<RasterImage> {
        cond.check_extents()?;
        log::debug!("{} passing init through", self.id);
        Ok(cond.init.clone())
    }
}
