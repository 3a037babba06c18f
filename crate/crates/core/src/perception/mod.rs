//! Estimator backends consumed by the pipeline: monocular depth,
//! single-foreground extraction and promptable segmentation.
//!
//! Backends are looked up by id in a [`BackendRegistry`] at call time; the
//! functions in this module add the checks every caller relies on (extent,
//! depth convention, prompt bounds, result count).

pub mod mock;
mod registry;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{flip_depth, DepthMap, ForegroundMask, RasterImage};

pub use registry::{
    BackendDescriptor, BackendKind, BackendRegistry, BackendSettings, GateGuard, RegistryConfig, StackConfig,
    ENV_PREFIX,
};

pub trait DepthEstimator: Send + Sync {
    /// Depth at the image's extent, normalized, larger = nearer unless the
    /// backend's settings request a flip.
    fn estimate(&self, image: &RasterImage) -> Result<DepthMap>;
}

pub trait ForegroundExtractor: Send + Sync {
    fn extract(&self, image: &RasterImage) -> Result<Extraction>;
}

pub trait RegionSegmenter: Send + Sync {
    fn segment(&self, image: &RasterImage, prompts: &[RegionPrompt]) -> Result<Vec<ForegroundMask>>;
}

/// Foreground extraction output. Blank or ambiguous images produce an empty
/// mask and a warning instead of an error.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub mask: ForegroundMask,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionPrompt {
    Point {
        x: u32,
        y: u32,
    },
    /// Inclusive corners.
    Box {
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
    },
    Label {
        text: String,
    },
}

impl RegionPrompt {
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        match *self {
            RegionPrompt::Point { x, y } if x < width && y < height => Ok(()),
            RegionPrompt::Point { x, y } => Err(Error::invalid(format!("point ({x}, {y}) outside {width}x{height}"))),
            RegionPrompt::Box { x0, y0, x1, y1 } => {
                if x0 > x1 || y0 > y1 {
                    Err(Error::invalid(format!("box ({x0},{y0})-({x1},{y1}) is inverted")))
                } else if x1 >= width || y1 >= height {
                    Err(Error::invalid(format!(
                        "box ({x0},{y0})-({x1},{y1}) outside {width}x{height}"
                    )))
                } else {
                    Ok(())
                }
            }
            RegionPrompt::Label { ref text } if text.trim().is_empty() => Err(Error::invalid("empty label prompt")),
            RegionPrompt::Label { .. } => Ok(()),
        }
    }
}

pub fn estimate_depth(registry: &BackendRegistry, backend_id: &str, image: &RasterImage) -> Result<DepthMap> {
    let (backend, settings, _permit) = registry.depth(backend_id)?;
    let depth = backend.estimate(image)?;
    check_output_extent(backend_id, image.extent(), depth.extent())?;
    Ok(if settings.flip_depth { flip_depth(&depth) } else { depth })
}

pub fn extract_foreground(registry: &BackendRegistry, backend_id: &str, image: &RasterImage) -> Result<Extraction> {
    let (backend, _, _permit) = registry.foreground(backend_id)?;
    let out = backend.extract(image)?;
    check_output_extent(backend_id, image.extent(), out.mask.extent())?;
    if let Some(w) = &out.warning {
        log::warn!("foreground backend `{backend_id}`: {w}");
    }
    Ok(out)
}

/// One mask per prompt, in prompt order.
pub fn segment_regions(
    registry: &BackendRegistry,
    backend_id: &str,
    image: &RasterImage,
    prompts: &[RegionPrompt],
) -> Result<Vec<ForegroundMask>> {
    if prompts.is_empty() {
        return Err(Error::invalid("segmentation needs at least one prompt"));
    }
    for p in prompts {
        p.validate(image.width(), image.height())?;
    }
    let (backend, _, _permit) = registry.segmenter(backend_id)?;
    let masks = backend.segment(image, prompts)?;
    if masks.len() != prompts.len() {
        return Err(Error::Inference {
            id: backend_id.to_string(),
            message: format!("{} masks for {} prompts", masks.len(), prompts.len()),
        });
    }
    for m in &masks {
        check_output_extent(backend_id, image.extent(), m.extent())?;
    }
    Ok(masks)
}

fn check_output_extent(id: &str, want: (u32, u32), got: (u32, u32)) -> Result<()> {
    if want != got {
        return Err(Error::Inference {
            id: id.to_string(),
            message: format!(
                "output extent {}x{} differs from input {}x{}",
                got.0, got.1, want.0, want.1
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_bounds() {
        assert!(RegionPrompt::Point { x: 3, y: 3 }.validate(4, 4).is_ok());
        assert!(RegionPrompt::Point { x: 4, y: 0 }.validate(4, 4).is_err());
        assert!(RegionPrompt::Box {
            x0: 0,
            y0: 0,
            x1: 3,
            y1: 3
        }
        .validate(4, 4)
        .is_ok());
        assert!(RegionPrompt::Box {
            x0: 2,
            y0: 0,
            x1: 1,
            y1: 3
        }
        .validate(4, 4)
        .is_err());
        assert!(RegionPrompt::Box {
            x0: 0,
            y0: 0,
            x1: 4,
            y1: 3
        }
        .validate(4, 4)
        .is_err());
    }

    #[test]
    fn prompt_json_shape() {
        let p: RegionPrompt = serde_json::from_str(r#"{"kind":"point","x":1,"y":2}"#).unwrap();
        assert_eq!(p, RegionPrompt::Point { x: 1, y: 2 });
        let p: RegionPrompt = serde_json::from_str(r#"{"kind":"label","text":"chair"}"#).unwrap();
        assert!(matches!(p, RegionPrompt::Label { .. }));
    }
}
