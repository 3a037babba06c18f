use super::morphology::{complement, dilate_binary, squared_distance_transform, UNREACHABLE};
use super::types::{ensure_same_extent, BinaryMask, ForegroundMask, RasterImage, ScalarField};
use crate::error::{Error, Result};

/// Default paste-back feather width in pixels.
pub const DEFAULT_FEATHER: u32 = 8;

/// Blend weights used by [`paste_back`].
///
/// The binary view is dilated by `feather`, then each pixel of the dilated
/// support gets `min(1, d / feather)` where `d` is its Euclidean distance to
/// the nearest pixel outside the support. Weight is exactly zero outside the
/// support and exactly one on the original mask.
pub fn feather_weights(mask: &ForegroundMask, feather: u32) -> ScalarField {
    let (w, h) = mask.extent();
    let binary = mask.binary_view();
    if feather == 0 {
        let data = binary.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        return ScalarField::new(w, h, data).expect("extent preserved");
    }
    let support = dilate_binary(&binary, feather);
    let outside = squared_distance_transform(&complement(&support));
    let data = support
        .bits()
        .iter()
        .zip(outside)
        .map(|(&inside, d2)| {
            if !inside {
                0.0
            } else if d2 >= UNREACHABLE {
                1.0
            } else {
                (d2.sqrt() / feather as f64).min(1.0) as f32
            }
        })
        .collect();
    ScalarField::new(w, h, data).expect("extent preserved")
}

/// Pixels whose paste-back weight is nonzero.
pub fn feather_support(mask: &ForegroundMask, feather: u32) -> BinaryMask {
    dilate_binary(&mask.binary_view(), feather)
}

/// Recomposites `generated` over `original` through the feathered mask.
///
/// Zero-weight pixels are copied from `original` and unit-weight pixels
/// from `generated` without arithmetic.
pub fn paste_back(
    original: &RasterImage,
    generated: &RasterImage,
    mask: &ForegroundMask,
    feather: u32,
) -> Result<RasterImage> {
    ensure_same_extent("paste-back generated", original.extent(), generated.extent())?;
    ensure_same_extent("paste-back mask", original.extent(), mask.extent())?;
    if original.channels() != generated.channels() {
        return Err(Error::invalid(format!(
            "paste-back channel mismatch: {} vs {}",
            original.channels(),
            generated.channels()
        )));
    }
    let weights = feather_weights(mask, feather);
    Ok(blend_by_weights(original, generated, weights.values()))
}

pub(crate) fn blend_by_weights(original: &RasterImage, generated: &RasterImage, weights: &[f32]) -> RasterImage {
    let c = original.channels() as usize;
    let mut data = Vec::with_capacity(original.data().len());
    for ((o, g), &a) in original
        .data()
        .chunks_exact(c)
        .zip(generated.data().chunks_exact(c))
        .zip(weights)
    {
        if a <= 0.0 {
            data.extend_from_slice(o);
        } else if a >= 1.0 {
            data.extend_from_slice(g);
        } else {
            let a = a as f64;
            data.extend(
                o.iter()
                    .zip(g)
                    .map(|(&o, &g)| (a * g as f64 + (1.0 - a) * o as f64) as f32),
            );
        }
    }
    RasterImage::from_parts_unchecked(original.width(), original.height(), original.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32, phase: f32) -> RasterImage {
        RasterImage::from_fn(w, h, 3, |x, y| {
            let v = ((x * 7 + y * 3) % 11) as f32 / 10.0;
            [v, (v + phase).fract(), 1.0 - v, 1.0]
        })
        .unwrap()
    }

    #[test]
    fn empty_mask_returns_original_bits() {
        let (a, b) = (gradient(10, 6, 0.1), gradient(10, 6, 0.6));
        let m = ForegroundMask::empty(10, 6).unwrap();
        assert_eq!(paste_back(&a, &b, &m, 8).unwrap(), a);
    }

    #[test]
    fn full_mask_returns_generated_bits() {
        let (a, b) = (gradient(10, 6, 0.1), gradient(10, 6, 0.6));
        let m = ForegroundMask::full(10, 6).unwrap();
        assert_eq!(paste_back(&a, &b, &m, 8).unwrap(), b);
    }

    #[test]
    fn zero_feather_is_hard_select() {
        let (a, b) = (gradient(7, 5, 0.2), gradient(7, 5, 0.7));
        let vals: Vec<f32> = (0..35).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect();
        let m = ForegroundMask::new(7, 5, vals.clone()).unwrap();
        let out = paste_back(&a, &b, &m, 0).unwrap();
        for (i, px) in out.pixels().enumerate() {
            let (x, y) = ((i % 7) as u32, (i / 7) as u32);
            let want = if vals[i] == 1.0 { b.pixel(x, y) } else { a.pixel(x, y) };
            assert_eq!(px, want);
        }
    }

    #[test]
    fn weights_ramp_outward() {
        let mut vals = vec![0.0; 21 * 21];
        vals[10 * 21 + 10] = 1.0;
        let m = ForegroundMask::new(21, 21, vals).unwrap();
        let wts = feather_weights(&m, 4);
        assert_eq!(wts.get(10, 10), 1.0);
        // strictly decreasing along a ray until the support ends
        let ray: Vec<f32> = (10..21).map(|x| wts.get(x, 10)).collect();
        assert!(ray.windows(2).all(|p| p[1] <= p[0]));
        assert!(ray[4] > 0.0);
        assert_eq!(ray[5], 0.0);
    }

    #[test]
    fn rejects_mismatch() {
        let a = gradient(4, 4, 0.0);
        let b = gradient(4, 3, 0.0);
        let m = ForegroundMask::full(4, 4).unwrap();
        assert!(paste_back(&a, &b, &m, 2).is_err());
    }
}
