//! Deterministic mock estimators.
//!
//! * depth: normalized luma of the image.
//! * foreground: the alpha channel when present, otherwise an Otsu
//!   threshold on 8-bit luma with the brighter class as foreground.
//! * segmentation: a point selects the 4-connected component of pixels
//!   sharing the prompted pixel's exact 8-bit colour; a box selects its
//!   rectangle; labels are unsupported.

use std::collections::VecDeque;

use super::{DepthEstimator, Extraction, ForegroundExtractor, RegionPrompt, RegionSegmenter};
use crate::error::{Error, Result};
use crate::imaging::{normalize_depth, to_grayscale, unit_to_u8, ForegroundMask, RasterImage};
use crate::perception::BackendKind;

pub const DEPTH_ID: &str = "mock-depth";
pub const FOREGROUND_ID: &str = "mock-foreground";
pub const SEGMENTER_ID: &str = "mock-segmenter";
pub const ENCODER_ID: &str = "mock-encoder";
pub const GENERATOR_ID: &str = "mock-generator";
pub const IDENTITY_GENERATOR_ID: &str = "mock-identity";
pub const PERCEPTUAL_ID: &str = "mock-perceptual";
pub const EMBEDDING_ID: &str = "mock-embedding";

pub(crate) const DEFAULT_MOCKS: [(BackendKind, &str); 8] = [
    (BackendKind::Depth, DEPTH_ID),
    (BackendKind::Foreground, FOREGROUND_ID),
    (BackendKind::PromptableSegmentation, SEGMENTER_ID),
    (BackendKind::MaterialEncoder, ENCODER_ID),
    (BackendKind::Generator, GENERATOR_ID),
    (BackendKind::Generator, IDENTITY_GENERATOR_ID),
    (BackendKind::PerceptualMetric, PERCEPTUAL_ID),
    (BackendKind::ImageEmbedding, EMBEDDING_ID),
];

pub const LABELS_UNSUPPORTED: &str = "labels unsupported by mock";

#[derive(Debug, Default, Clone, Copy)]
pub struct MockDepth;

impl DepthEstimator for MockDepth {
    fn estimate(&self, image: &RasterImage) -> Result<crate::imaging::DepthMap> {
        normalize_depth(to_grayscale(image)?.as_field())
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockForeground;

impl ForegroundExtractor for MockForeground {
    fn extract(&self, image: &RasterImage) -> Result<Extraction> {
        if let Some(alpha) = image.alpha() {
            return Ok(Extraction {
                mask: ForegroundMask::from_field(alpha)?,
                warning: None,
            });
        }
        let levels: Vec<u8> = to_grayscale(image)?.values().iter().map(|&v| unit_to_u8(v)).collect();
        let (w, h) = image.extent();
        match otsu_threshold(&levels) {
            Some(t) => {
                let data = levels.iter().map(|&l| if l > t { 1.0 } else { 0.0 }).collect();
                Ok(Extraction {
                    mask: ForegroundMask::new(w, h, data)?,
                    warning: None,
                })
            }
            None => Ok(Extraction {
                mask: ForegroundMask::empty(w, h)?,
                warning: Some("image has a single intensity level; no foreground found".into()),
            }),
        }
    }
}

/// Otsu's threshold over 8-bit levels: pixels `> t` form the upper class.
/// `None` when fewer than two distinct levels are present.
pub fn otsu_threshold(levels: &[u8]) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &l in levels {
        hist[l as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total = levels.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::MIN, 0u8);
    for (t, &count) in hist.iter().enumerate().take(255) {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Some(best.1)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MockSegmenter;

impl RegionSegmenter for MockSegmenter {
    fn segment(&self, image: &RasterImage, prompts: &[RegionPrompt]) -> Result<Vec<ForegroundMask>> {
        let (w, h) = image.extent();
        let colors: Vec<[u8; 3]> = image
            .pixels()
            .map(|p| [unit_to_u8(p[0]), unit_to_u8(p[1]), unit_to_u8(p[2])])
            .collect();
        prompts
            .iter()
            .map(|p| match *p {
                RegionPrompt::Point { x, y } => ForegroundMask::new(w, h, flood_fill(&colors, w, h, x, y)),
                RegionPrompt::Box { x0, y0, x1, y1 } => {
                    let data = (0..h)
                        .flat_map(|y| (0..w).map(move |x| (x, y)))
                        .map(|(x, y)| {
                            if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
                                1.0
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    ForegroundMask::new(w, h, data)
                }
                RegionPrompt::Label { .. } => Err(Error::invalid(LABELS_UNSUPPORTED)),
            })
            .collect()
    }
}

fn flood_fill(colors: &[[u8; 3]], w: u32, h: u32, x: u32, y: u32) -> Vec<f32> {
    let (w, h) = (w as usize, h as usize);
    let seed = y as usize * w + x as usize;
    let target = colors[seed];
    let mut out = vec![0.0f32; w * h];
    let mut queue = VecDeque::from([seed]);
    out[seed] = 1.0;
    while let Some(i) = queue.pop_front() {
        let (px, py) = (i % w, i / w);
        let mut visit = |j: usize| {
            if out[j] == 0.0 && colors[j] == target {
                out[j] = 1.0;
                queue.push_back(j);
            }
        };
        if px > 0 {
            visit(i - 1);
        }
        if px + 1 < w {
            visit(i + 1);
        }
        if py > 0 {
            visit(i - w);
        }
        if py + 1 < h {
            visit(i + w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(w: u32, h: u32, cx: f32, cy: f32, r: f32) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y| {
            let d = ((x as f32 - cx).powi(2) + (y as f32 - cy).powi(2)).sqrt();
            if d <= r {
                [1.0, 1.0, 1.0, 1.0]
            } else {
                [0.0, 0.0, 0.0, 1.0]
            }
        })
        .unwrap()
    }

    #[test]
    fn depth_is_normalized_luma() {
        let img = RasterImage::from_fn(4, 1, 3, |x, _| [x as f32 / 3.0, 0.0, 0.0, 1.0]).unwrap();
        let d = MockDepth.estimate(&img).unwrap();
        let want = normalize_depth(to_grayscale(&img).unwrap().as_field()).unwrap();
        assert_eq!(d, want);
        let flat = RasterImage::filled(3, 3, &[0.4, 0.2, 0.9]).unwrap();
        assert!(MockDepth.estimate(&flat).unwrap().values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn alpha_becomes_mask() {
        let img = RasterImage::from_fn(3, 2, 4, |x, _| [0.5, 0.5, 0.5, x as f32 / 2.0]).unwrap();
        let out = MockForeground.extract(&img).unwrap();
        assert_eq!(out.mask.values(), img.alpha().unwrap().values());
        assert!(out.warning.is_none());
    }

    #[test]
    fn otsu_two_level_histogram() {
        // any threshold in [lo, hi) separates a two-level histogram; Otsu
        // picks the first maximiser, i.e. the lower level
        let levels = [10u8, 10, 10, 200, 200];
        assert_eq!(otsu_threshold(&levels), Some(10));
        assert_eq!(otsu_threshold(&[7, 7, 7]), None);
    }

    #[test]
    fn white_disc_on_black() {
        let img = disc(16, 16, 8.0, 8.0, 5.0);
        let out = MockForeground.extract(&img).unwrap();
        for (m, p) in out.mask.values().iter().zip(img.pixels()) {
            assert_eq!(*m, p[0]);
        }
    }

    #[test]
    fn blank_image_warns() {
        let img = RasterImage::filled(5, 5, &[0.3, 0.3, 0.3]).unwrap();
        let out = MockForeground.extract(&img).unwrap();
        assert!(out.mask.is_empty());
        assert!(out.warning.is_some());
    }

    #[test]
    fn point_selects_component() {
        // two separate discs; brute-force label oracle via geometric test
        let img = RasterImage::from_fn(20, 10, 3, |x, y| {
            let a = (x as f32 - 4.0).powi(2) + (y as f32 - 4.0).powi(2) <= 9.0;
            let b = (x as f32 - 14.0).powi(2) + (y as f32 - 5.0).powi(2) <= 9.0;
            if a || b {
                [1.0, 0.0, 0.0, 1.0]
            } else {
                [0.0, 0.0, 1.0, 1.0]
            }
        })
        .unwrap();
        let masks = MockSegmenter
            .segment(
                &img,
                &[RegionPrompt::Point { x: 4, y: 4 }, RegionPrompt::Point { x: 14, y: 5 }],
            )
            .unwrap();
        assert_eq!(masks.len(), 2);
        for y in 0..10 {
            for x in 0..20 {
                let a = (x as f32 - 4.0).powi(2) + (y as f32 - 4.0).powi(2) <= 9.0;
                let b = (x as f32 - 14.0).powi(2) + (y as f32 - 5.0).powi(2) <= 9.0;
                assert_eq!(masks[0].get(x, y) == 1.0, a);
                assert_eq!(masks[1].get(x, y) == 1.0, b);
            }
        }
    }

    #[test]
    fn labels_unsupported() {
        let img = RasterImage::filled(2, 2, &[0.0, 0.0, 0.0]).unwrap();
        let err = MockSegmenter
            .segment(&img, &[RegionPrompt::Label { text: "chair".into() }])
            .unwrap_err();
        assert!(err.to_string().contains(LABELS_UNSUPPORTED));
    }
}
