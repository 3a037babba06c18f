use std::collections::BTreeMap;

use rayon::prelude::*;

use super::manifest::{ManifestEntry, ResolvedManifest};
use super::metrics::{clip_similarity, masked_psnr, perceptual_distance, psnr};
use super::report::{EntryMetrics, EntryReport, EntryStatus, EvalReport, MetricRegion};
use crate::error::{Error, Result, Stage};
use crate::generation::{GenerationParams, MaterialExemplar, Pipeline};
use crate::imaging::io::{load_mask, load_raster};
use crate::imaging::{ForegroundMask, RasterImage};
use crate::perception::extract_foreground;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkOptions {
    pub region: MetricRegion,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
    /// Emit per-material and per-mesh means.
    pub breakdowns: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            region: MetricRegion::FullFrame,
            jobs: 0,
            breakdowns: true,
        }
    }
}

/// Runs the pipeline on every manifest entry and scores the outputs against
/// ground truth. Entry failures are recorded, not propagated.
pub fn run_benchmark(
    pipeline: &Pipeline,
    manifest: &ResolvedManifest,
    params: &GenerationParams,
    options: &BenchmarkOptions,
) -> Result<EvalReport> {
    params.validate()?;
    let run = || -> Vec<EntryReport> {
        manifest
            .manifest
            .entries
            .par_iter()
            .map(|entry| evaluate_entry(pipeline, manifest, entry, params, options.region))
            .collect()
    };
    let entries = if options.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };
    Ok(EvalReport::assemble(
        pipeline_descriptor(pipeline),
        params.to_flat(),
        options.region,
        manifest.digest.clone(),
        entries,
        options.breakdowns,
    ))
}

fn pipeline_descriptor(pipeline: &Pipeline) -> BTreeMap<String, String> {
    let s = pipeline.stack();
    [
        ("encoder", &s.encoder),
        ("depth", &s.depth),
        ("foreground", &s.foreground),
        ("generator", &s.generator),
        ("perceptual", &s.perceptual),
        ("embedding", &s.embedding),
    ]
    .into_iter()
    .map(|(role, id)| {
        let version = pipeline
            .registry()
            .descriptor(id)
            .map(|d| d.version.clone())
            .unwrap_or_else(|| "unregistered".into());
        (role.to_string(), format!("{id}@{version}"))
    })
    .collect()
}

fn evaluate_entry(
    pipeline: &Pipeline,
    manifest: &ResolvedManifest,
    entry: &ManifestEntry,
    params: &GenerationParams,
    region: MetricRegion,
) -> EntryReport {
    let mut report = EntryReport {
        id: entry.id.clone(),
        material: entry.material.clone(),
        mesh: entry.mesh.clone(),
        status: EntryStatus::Failed,
        metrics: None,
        request_digest: None,
        output_digest: None,
        error: None,
    };
    match score_entry(pipeline, manifest, entry, params, region) {
        Ok((metrics, request, output)) => {
            report.status = EntryStatus::Ok;
            report.metrics = Some(metrics);
            report.request_digest = Some(request);
            report.output_digest = Some(output);
        }
        Err(e) => {
            log::warn!("benchmark entry `{}` failed: {e}", entry.id);
            report.error = Some(e.to_string());
        }
    }
    report
}

fn score_entry(
    pipeline: &Pipeline,
    manifest: &ResolvedManifest,
    entry: &ManifestEntry,
    params: &GenerationParams,
    region: MetricRegion,
) -> Result<(EntryMetrics, String, String)> {
    let input = load_raster(&manifest.path_of(&entry.input))?;
    let exemplar = MaterialExemplar::new(load_raster(&manifest.path_of(&entry.exemplar))?);
    let truth = load_raster(&manifest.path_of(&entry.ground_truth))?;
    let mask = match &entry.mask {
        Some(m) => load_mask(&manifest.path_of(m))?,
        None => {
            extract_foreground(pipeline.registry(), &pipeline.stack().foreground, &input)
                .map_err(|e| e.at(Stage::Foreground))?
                .mask
        }
    };
    let result = pipeline.transfer_material(&input, &mask, &exemplar, params)?;
    let out = result.image.to_rgb();
    let truth = truth.to_rgb();
    let registry = pipeline.registry();
    let stack = pipeline.stack();
    let metrics = match region {
        MetricRegion::FullFrame => EntryMetrics {
            psnr_db: psnr(&out, &truth)?,
            lpips: perceptual_distance(registry, &stack.perceptual, &out, &truth).map_err(|e| e.at(Stage::Metrics))?,
            clip_sim: clip_similarity(registry, &stack.embedding, &out, &truth).map_err(|e| e.at(Stage::Metrics))?,
        },
        MetricRegion::Masked => {
            let a = black_outside(&out, &mask)?;
            let b = black_outside(&truth, &mask)?;
            EntryMetrics {
                psnr_db: masked_psnr(&out, &truth, &mask)?,
                lpips: perceptual_distance(registry, &stack.perceptual, &a, &b).map_err(|e| e.at(Stage::Metrics))?,
                clip_sim: clip_similarity(registry, &stack.embedding, &a, &b).map_err(|e| e.at(Stage::Metrics))?,
            }
        }
    };
    Ok((metrics, result.request_digest, result.output_digest))
}

fn black_outside(image: &RasterImage, mask: &ForegroundMask) -> Result<RasterImage> {
    crate::imaging::ensure_same_extent("metric mask", image.extent(), mask.extent())?;
    let region = mask.binary_view();
    let (w, _) = image.extent();
    RasterImage::from_fn(image.width(), image.height(), image.channels(), |x, y| {
        let mut px = [0.0f32; 4];
        if region.bits()[(y * w + x) as usize] {
            px[..image.channels() as usize].copy_from_slice(image.pixel(x, y));
        }
        px
    })
}
