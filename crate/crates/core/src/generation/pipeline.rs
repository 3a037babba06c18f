use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{encode_material, generate, Conditions, GenerationParams, MaterialEmbedding, MaterialExemplar};
use crate::digest::{depth_digest, mask_digest, raster_digest, ContentHasher};
use crate::error::{Error, Result, Stage};
use crate::imaging::{
    blend_by_weights, compose_init_image, ensure_same_extent, feather_weights, u8_to_unit, unit_to_u8, DepthMap,
    ForegroundMask, Placement, RasterImage,
};
use crate::perception::{estimate_depth, BackendRegistry, StackConfig};

/// Stages of one transfer, in execution order.
pub const TRANSFER_STAGES: [Stage; 6] = [
    Stage::Encode,
    Stage::Depth,
    Stage::Init,
    Stage::Placement,
    Stage::Generate,
    Stage::PasteBack,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIds {
    pub encoder: String,
    pub depth: String,
    pub generator: String,
}

/// Output of one transfer with its provenance.
#[derive(Debug, Clone)]
pub struct EditResult {
    /// Final image at the input's extent.
    pub image: RasterImage,
    /// Raw generator output on the working canvas.
    pub generated: RasterImage,
    pub request_digest: String,
    pub params: GenerationParams,
    pub backend_ids: BackendIds,
    /// Wall-clock milliseconds per stage.
    pub timings: BTreeMap<Stage, f64>,
    pub input_digest: String,
    pub mask_digest: String,
    pub exemplar_digest: String,
    pub embedding_digest: String,
    pub depth_digest: String,
    pub output_digest: String,
    pub pair_id: Option<String>,
}

/// Serializable metadata of an [`EditResult`], written as the sidecar of
/// every output image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub request_digest: String,
    pub params: BTreeMap<String, String>,
    pub backend_ids: BackendIds,
    pub timings_ms: BTreeMap<Stage, f64>,
    pub input_digest: String,
    pub mask_digest: String,
    pub exemplar_digest: String,
    pub embedding_digest: String,
    pub depth_digest: String,
    pub output_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
}

impl EditResult {
    pub fn record(&self) -> EditRecord {
        EditRecord {
            request_digest: self.request_digest.clone(),
            params: self.params.to_flat(),
            backend_ids: self.backend_ids.clone(),
            timings_ms: self.timings.clone(),
            input_digest: self.input_digest.clone(),
            mask_digest: self.mask_digest.clone(),
            exemplar_digest: self.exemplar_digest.clone(),
            embedding_digest: self.embedding_digest.clone(),
            depth_digest: self.depth_digest.clone(),
            output_digest: self.output_digest.clone(),
            pair_id: self.pair_id.clone(),
        }
    }
}

/// Where the second pass of a lighting-aware pair takes its init image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LightingChain {
    /// Grayscale the second render itself, keeping its shading.
    #[default]
    RenderB,
    /// Start from the first pass's output.
    PassAOutput,
}

/// Inputs of a lighting-aware pair with per-pass params.
#[derive(Debug, Clone)]
pub struct LightingPair<'a> {
    pub render_a: &'a RasterImage,
    pub render_b: &'a RasterImage,
    pub mask_a: &'a ForegroundMask,
    pub mask_b: &'a ForegroundMask,
    pub exemplar: &'a MaterialExemplar,
    pub params_a: GenerationParams,
    pub params_b: GenerationParams,
    pub chain: LightingChain,
}

/// The transfer orchestrator: stateless apart from the registry handle.
#[derive(Debug, Clone)]
pub struct Pipeline {
    registry: BackendRegistry,
    stack: StackConfig,
}

impl Pipeline {
    pub fn new(registry: BackendRegistry, stack: StackConfig) -> Self {
        Pipeline { registry, stack }
    }

    /// All-mock pipeline.
    pub fn mock() -> Self {
        Self::new(BackendRegistry::with_mocks(), StackConfig::default())
    }

    pub fn registry(&self) -> &BackendRegistry {
        &self.registry
    }

    pub fn stack(&self) -> &StackConfig {
        &self.stack
    }

    pub fn with_generator(mut self, id: &str) -> Self {
        self.stack.generator = id.to_string();
        self
    }

    pub fn backend_ids(&self) -> BackendIds {
        BackendIds {
            encoder: self.stack.encoder.clone(),
            depth: self.stack.depth.clone(),
            generator: self.stack.generator.clone(),
        }
    }

    pub fn encode(&self, exemplar: &MaterialExemplar) -> Result<MaterialEmbedding> {
        encode_material(&self.registry, &self.stack.encoder, exemplar).map_err(|e| e.at(Stage::Encode))
    }

    pub fn transfer_material(
        &self,
        input: &RasterImage,
        mask: &ForegroundMask,
        exemplar: &MaterialExemplar,
        params: &GenerationParams,
    ) -> Result<EditResult> {
        self.transfer_material_observed(input, mask, exemplar, params, &mut |_| {})
    }

    /// As [`Pipeline::transfer_material`], reporting each finished stage.
    pub fn transfer_material_observed(
        &self,
        input: &RasterImage,
        mask: &ForegroundMask,
        exemplar: &MaterialExemplar,
        params: &GenerationParams,
        observer: &mut dyn FnMut(Stage),
    ) -> Result<EditResult> {
        check_request(input, mask, params)?;
        let start = Instant::now();
        let embedding = self.encode(exemplar)?;
        let encode_ms = ms_since(start);
        observer(Stage::Encode);
        let mut result = self.transfer_with_embedding(input, mask, &embedding, params, None, observer)?;
        result.timings.insert(Stage::Encode, encode_ms);
        Ok(result)
    }

    /// Transfer with a precomputed embedding. `init_source` replaces the
    /// image the init composite is built from; depth and paste-back always
    /// use `input`.
    pub fn transfer_with_embedding(
        &self,
        input: &RasterImage,
        mask: &ForegroundMask,
        embedding: &MaterialEmbedding,
        params: &GenerationParams,
        init_source: Option<&RasterImage>,
        observer: &mut dyn FnMut(Stage),
    ) -> Result<EditResult> {
        check_request(input, mask, params)?;
        if let Some(src) = init_source {
            ensure_same_extent("init source", input.extent(), src.extent())?;
            if src.channels() != input.channels() {
                return Err(Error::invalid("init source channel count differs from input"));
            }
        }
        let mut timings = BTreeMap::new();

        let t = Instant::now();
        let depth = estimate_depth(&self.registry, &self.stack.depth, input).map_err(|e| e.at(Stage::Depth))?;
        timings.insert(Stage::Depth, ms_since(t));
        observer(Stage::Depth);

        let t = Instant::now();
        let init = compose_init_image(init_source.unwrap_or(input), mask, params.init_mode, params.seed)
            .map_err(|e| e.at(Stage::Init))?;
        timings.insert(Stage::Init, ms_since(t));
        observer(Stage::Init);

        let t = Instant::now();
        let size = params.working_size;
        let placement = Placement::compute(input.extent(), (size, size)).map_err(|e| e.at(Stage::Placement))?;
        let placed = place_conditions(&placement, &init, &depth, mask).map_err(|e| e.at(Stage::Placement))?;
        timings.insert(Stage::Placement, ms_since(t));
        observer(Stage::Placement);

        let t = Instant::now();
        let conditions = Conditions {
            embedding,
            depth: &placed.1,
            init: &placed.0,
            mask: &placed.2,
        };
        let generated =
            generate(&self.registry, &self.stack.generator, &conditions, params).map_err(|e| e.at(Stage::Generate))?;
        timings.insert(Stage::Generate, ms_since(t));
        observer(Stage::Generate);

        let t = Instant::now();
        let restored = placement
            .restore_image(&generated)
            .map_err(|e| e.at(Stage::PasteBack))?;
        let weights = feather_weights(mask, params.feather);
        let mut image = blend_by_weights(input, &restored, weights.values());
        snap_edited_to_grid(&mut image, weights.values());
        timings.insert(Stage::PasteBack, ms_since(t));
        observer(Stage::PasteBack);

        let backend_ids = self.backend_ids();
        let input_digest = raster_digest(input);
        let mask_digest = mask_digest(mask);
        let request_digest = {
            let mut h = ContentHasher::new("transfer-request");
            h.str(&input_digest)
                .str(&mask_digest)
                .str(&embedding.source_digest)
                .str(&embedding.backend_id)
                .str(init_source.map(raster_digest).as_deref().unwrap_or(""));
            for (k, v) in params.to_flat() {
                h.str(&k).str(&v);
            }
            for id in [&backend_ids.encoder, &backend_ids.depth, &backend_ids.generator] {
                let version = self.registry.descriptor(id).map(|d| d.version.as_str()).unwrap_or("");
                h.str(id).str(version);
            }
            h.finish()
        };
        Ok(EditResult {
            output_digest: raster_digest(&image),
            image,
            generated,
            request_digest,
            params: params.clone(),
            backend_ids,
            timings,
            input_digest,
            mask_digest,
            exemplar_digest: embedding.source_digest.clone(),
            embedding_digest: embedding.digest(),
            depth_digest: depth_digest(&depth),
            pair_id: None,
        })
    }

    /// Two renders of one object under different lighting, transferred with
    /// a shared seed and a single embedding.
    pub fn transfer_lighting_aware(
        &self,
        render_a: &RasterImage,
        render_b: &RasterImage,
        mask_a: &ForegroundMask,
        mask_b: &ForegroundMask,
        exemplar: &MaterialExemplar,
        params: &GenerationParams,
    ) -> Result<(EditResult, EditResult)> {
        self.transfer_lighting_pair(&LightingPair {
            render_a,
            render_b,
            mask_a,
            mask_b,
            exemplar,
            params_a: params.clone(),
            params_b: params.clone(),
            chain: LightingChain::default(),
        })
    }

    pub fn transfer_lighting_pair(&self, pair: &LightingPair<'_>) -> Result<(EditResult, EditResult)> {
        if pair.params_a.seed != pair.params_b.seed {
            return Err(Error::Contract(format!(
                "lighting-aware pair needs one shared seed, got {} and {}",
                pair.params_a.seed, pair.params_b.seed
            )));
        }
        ensure_same_extent("lighting pair renders", pair.render_a.extent(), pair.render_b.extent())?;
        let embedding = self.encode(pair.exemplar)?;
        let mut a = self.transfer_with_embedding(
            pair.render_a,
            pair.mask_a,
            &embedding,
            &pair.params_a,
            None,
            &mut |_| {},
        )?;
        let init_b = match pair.chain {
            LightingChain::RenderB => None,
            LightingChain::PassAOutput => Some(&a.image),
        };
        let mut b = self.transfer_with_embedding(
            pair.render_b,
            pair.mask_b,
            &embedding,
            &pair.params_b,
            init_b,
            &mut |_| {},
        )?;
        let pair_id = ContentHasher::new("lighting-pair")
            .str(&a.embedding_digest)
            .u64(pair.params_a.seed)
            .str(&a.request_digest)
            .str(&b.request_digest)
            .finish();
        a.pair_id = Some(pair_id.clone());
        b.pair_id = Some(pair_id);
        Ok((a, b))
    }
}

fn check_request(input: &RasterImage, mask: &ForegroundMask, params: &GenerationParams) -> Result<()> {
    ensure_same_extent("transfer mask", input.extent(), mask.extent())?;
    params.validate()?;
    if mask.is_empty() {
        return Err(Error::EmptyMask.at(Stage::Init));
    }
    Ok(())
}

fn place_conditions(
    placement: &Placement,
    init: &RasterImage,
    depth: &DepthMap,
    mask: &ForegroundMask,
) -> Result<(RasterImage, DepthMap, ForegroundMask)> {
    let init = placement.place_image(init)?;
    let depth = DepthMap::from_field(clamp_field(placement.place_field(depth.as_field())?))?;
    let mask = ForegroundMask::from_field(clamp_field(placement.place_field(mask.as_field())?))?
        .with_threshold(mask.threshold())?;
    Ok((init, depth, mask))
}

fn clamp_field(field: crate::imaging::ScalarField) -> crate::imaging::ScalarField {
    let (w, h) = field.extent();
    let data = field.into_values().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    crate::imaging::ScalarField::new(w, h, data).expect("extent preserved")
}

/// Pixels touched by paste-back land on the 8-bit grid so results survive
/// PNG storage unchanged; untouched pixels keep their exact input values.
fn snap_edited_to_grid(image: &mut RasterImage, weights: &[f32]) {
    for (px, &w) in image.pixels_mut().zip(weights) {
        if w > 0.0 {
            for v in px.iter_mut() {
                *v = u8_to_unit(unit_to_u8(*v));
            }
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
