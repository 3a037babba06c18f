use serde::{Deserialize, Serialize};

use crate::digest::{raster_digest, ContentHasher};
use crate::error::{Error, Result, Stage};
use crate::imaging::{resize_raster, CropBox, RasterImage};
use crate::perception::BackendRegistry;

/// The image whose material is transferred, plus optional framing hints.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialExemplar {
    pub image: RasterImage,
    pub crop: Option<CropBox>,
    /// Zoom applied after cropping; 2.0 doubles the pattern scale.
    pub scale_hint: Option<f64>,
    pub text_hint: Option<String>,
}

impl MaterialExemplar {
    pub fn new(image: RasterImage) -> Self {
        MaterialExemplar {
            image,
            crop: None,
            scale_hint: None,
            text_hint: None,
        }
    }

    pub fn with_crop(mut self, crop: CropBox) -> Self {
        self.crop = Some(crop);
        self
    }

    pub fn with_scale_hint(mut self, scale: f64) -> Self {
        self.scale_hint = Some(scale);
        self
    }

    pub fn with_text_hint(mut self, text: impl Into<String>) -> Self {
        self.text_hint = Some(text.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.crop {
            c.check_within(self.image.width(), self.image.height())?;
        }
        if let Some(s) = self.scale_hint {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("scale hint {s} must be positive")));
            }
        }
        Ok(())
    }

    /// Cropped and rescaled pixels that the encoder actually sees.
    pub fn prepared(&self) -> Result<RasterImage> {
        self.validate()?;
        let cropped = match &self.crop {
            Some(c) => self.image.crop(c)?,
            None => self.image.clone(),
        };
        match self.scale_hint {
            Some(s) if s != 1.0 => {
                let w = ((cropped.width() as f64 * s).round() as u32).max(1);
                let h = ((cropped.height() as f64 * s).round() as u32).max(1);
                resize_raster(&cropped, (w, h))
            }
            _ => Ok(cropped),
        }
    }

    /// Digest of the prepared pixels plus the text hint.
    pub fn digest(&self) -> Result<String> {
        let mut h = ContentHasher::new("exemplar");
        h.str(&raster_digest(&self.prepared()?));
        h.str(self.text_hint.as_deref().unwrap_or(""));
        Ok(h.finish())
    }
}

/// Latent material code extracted from an exemplar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEmbedding {
    pub vectors: Vec<Vec<f32>>,
    pub backend_id: String,
    pub source_digest: String,
}

impl MaterialEmbedding {
    pub fn width(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Digest over the vectors and provenance.
    pub fn digest(&self) -> String {
        let mut h = ContentHasher::new("embedding");
        h.str(&self.backend_id).str(&self.source_digest);
        for v in &self.vectors {
            h.f32s(v);
        }
        h.finish()
    }
}

pub trait MaterialEncoder: Send + Sync {
    /// Width of every emitted vector.
    fn width(&self) -> usize;

    /// Encodes already-prepared exemplar pixels.
    fn encode(&self, exemplar: &RasterImage, text_hint: Option<&str>) -> Result<Vec<Vec<f32>>>;
}

pub fn encode_material(
    registry: &BackendRegistry,
    backend_id: &str,
    exemplar: &MaterialExemplar,
) -> Result<MaterialEmbedding> {
    let prepared = exemplar.prepared().map_err(|e| e.at(Stage::Encode))?;
    let source_digest = exemplar.digest()?;
    let (encoder, _, _permit) = registry.encoder(backend_id)?;
    let vectors = encoder.encode(&prepared, exemplar.text_hint.as_deref())?;
    let width = encoder.width();
    if vectors.is_empty() {
        return Err(Error::Inference {
            id: backend_id.to_string(),
            message: "encoder returned no vectors".into(),
        });
    }
    for v in &vectors {
        if v.len() != width {
            return Err(Error::Inference {
                id: backend_id.to_string(),
                message: format!("vector width {} differs from declared {width}", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Inference {
                id: backend_id.to_string(),
                message: "non-finite embedding entry".into(),
            });
        }
    }
    Ok(MaterialEmbedding {
        vectors,
        backend_id: backend_id.to_string(),
        source_digest,
    })
}
