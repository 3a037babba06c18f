//! Image-quality metrics and the benchmark harness.
//!
//! PSNR is computed in-house. Perceptual distance and embedding similarity
//! are backend contracts resolved through the registry; the mocks in
//! [`mock`] keep the harness runnable offline.

mod benchmark;
mod manifest;
mod metrics;
pub mod mock;
mod report;

pub use benchmark::{run_benchmark, BenchmarkOptions};
pub use manifest::{AssetRef, DatasetManifest, ManifestEntry, ManifestMetadata, ResolvedManifest};
pub use metrics::{clip_similarity, cosine_similarity, masked_psnr, perceptual_distance, psnr, PSNR_CAP_DB};
pub use report::{Aggregates, EntryMetrics, EntryReport, EntryStatus, EvalReport, MetricRegion};

use crate::error::Result;
use crate::imaging::RasterImage;

/// Perceptual distance between two images of equal extent.
pub trait PerceptualMetric: Send + Sync {
    /// Nonnegative, zero for identical inputs and symmetric.
    fn distance(&self, a: &RasterImage, b: &RasterImage) -> Result<f64>;
}

/// Global image embedding used for similarity scoring.
pub trait ImageEmbedder: Send + Sync {
    fn embed(&self, image: &RasterImage) -> Result<Vec<f64>>;
}
