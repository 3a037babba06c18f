//! Material transfer: encoding the exemplar, the four-condition generation
//! call, the end-to-end pipeline and seed-locked lighting-aware pairs.

mod exemplar;
pub mod mock;
mod params;
mod pipeline;

pub use exemplar::{encode_material, MaterialEmbedding, MaterialEncoder, MaterialExemplar};
pub use params::{seed_string, GenerationParams, DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS, DEFAULT_WORKING_SIZE};
pub use pipeline::{BackendIds, EditRecord, EditResult, LightingChain, LightingPair, Pipeline, TRANSFER_STAGES};

use crate::error::{Error, Result};
use crate::imaging::{DepthMap, ForegroundMask, RasterImage};
use crate::perception::BackendRegistry;

/// Everything a generator may look at: the material code, the depth map,
/// the init image and the foreground mask, all on the working canvas.
#[derive(Debug, Clone, Copy)]
pub struct Conditions<'a> {
    pub embedding: &'a MaterialEmbedding,
    pub depth: &'a DepthMap,
    pub init: &'a RasterImage,
    pub mask: &'a ForegroundMask,
}

impl Conditions<'_> {
    pub fn check_extents(&self) -> Result<()> {
        let e = self.init.extent();
        if self.depth.extent() != e || self.mask.extent() != e {
            return Err(Error::invalid(format!(
                "conditions disagree on extent: init {:?}, depth {:?}, mask {:?}",
                e,
                self.depth.extent(),
                self.mask.extent()
            )));
        }
        Ok(())
    }
}

pub trait Generator: Send + Sync {
    /// Rejects embeddings from encoders this generator cannot consume.
    fn accepts(&self, embedding: &MaterialEmbedding) -> Result<()>;

    fn generate(&self, conditions: &Conditions<'_>, params: &GenerationParams) -> Result<RasterImage>;
}

/// Runs one generation call through the registry.
pub fn generate(
    registry: &BackendRegistry,
    backend_id: &str,
    conditions: &Conditions<'_>,
    params: &GenerationParams,
) -> Result<RasterImage> {
    params.validate()?;
    conditions.check_extents()?;
    let (generator, _, _permit) = registry.generator(backend_id)?;
    generator.accepts(conditions.embedding)?;
    let out = generator.generate(conditions, params)?;
    if out.extent() != conditions.init.extent() || out.channels() != conditions.init.channels() {
        return Err(Error::Inference {
            id: backend_id.to_string(),
            message: format!(
                "generated {}x{}x{}, expected {}x{}x{}",
                out.width(),
                out.height(),
                out.channels(),
                conditions.init.width(),
                conditions.init.height(),
                conditions.init.channels()
            ),
        });
    }
    Ok(out)
}
