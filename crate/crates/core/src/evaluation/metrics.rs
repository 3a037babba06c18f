use crate::error::{Error, Result};
use crate::imaging::{ensure_same_extent, ForegroundMask, RasterImage};
use crate::perception::BackendRegistry;

/// PSNR reported for identical images (and the upper bound of any score).
pub const PSNR_CAP_DB: f64 = 100.0;

fn check_pair(a: &RasterImage, b: &RasterImage) -> Result<()> {
    ensure_same_extent("metric inputs", a.extent(), b.extent())?;
    if a.channels() != b.channels() {
        return Err(Error::invalid(format!(
            "metric inputs have {} and {} channels",
            a.channels(),
            b.channels()
        )));
    }
    Ok(())
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Peak signal-to-noise ratio on unit intensities, MSE over every channel.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sum / a.data().len() as f64))
}

/// PSNR restricted to the mask's binary region.
pub fn masked_psnr(a: &RasterImage, b: &RasterImage, mask: &ForegroundMask) -> Result<f64> {
    check_pair(a, b)?;
    ensure_same_extent("metric mask", a.extent(), mask.extent())?;
    let region = mask.binary_view();
    let ch = a.channels() as usize;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for ((pa, pb), &inside) in a.pixels().zip(b.pixels()).zip(region.bits()) {
        if inside {
            for c in 0..ch {
                let d = pa[c] as f64 - pb[c] as f64;
                sum += d * d;
            }
            n += ch;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(psnr_from_mse(sum / n as f64))
}

pub fn perceptual_distance(
    registry: &BackendRegistry,
    backend_id: &str,
    a: &RasterImage,
    b: &RasterImage,
) -> Result<f64> {
    check_pair(a, b)?;
    let (metric, _, _permit) = registry.perceptual(backend_id)?;
    let d = metric.distance(a, b)?;
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::Inference {
            id: backend_id.to_string(),
            message: format!("distance {d} is not a nonnegative number"),
        });
    }
    Ok(d)
}

/// Cosine of the two embeddings, clamped to [-1, 1].
pub fn clip_similarity(registry: &BackendRegistry, backend_id: &str, a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let (embedder, _, _permit) = registry.embedder(backend_id)?;
    let ea = embedder.embed(a)?;
    let eb = embedder.embed(b)?;
    cosine_similarity(&ea, &eb).map_err(|e| match e {
        Error::InvalidInput(message) => Error::Inference {
            id: backend_id.to_string(),
            message,
        },
        other => other,
    })
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!("embedding widths {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite embedding entry"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("zero-norm embedding"));
    }
    if a == b {
        return Ok(1.0);
    }
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(v: f32) -> RasterImage {
        RasterImage::filled(5, 3, &[v, v, v]).unwrap()
    }

    #[test]
    fn psnr_reference_points() {
        assert_eq!(psnr(&solid(0.0), &solid(1.0)).unwrap(), 0.0);
        assert_eq!(psnr(&solid(0.3), &solid(0.3)).unwrap(), PSNR_CAP_DB);
        // MSE 0.01 -> 20 dB
        let p = psnr(&solid(0.5), &solid(0.6)).unwrap();
        assert!((p - 20.0).abs() < 1e-5, "{p}");
    }

    #[test]
    fn psnr_rejects_mismatch() {
        let a = solid(0.0);
        let b = RasterImage::filled(5, 4, &[0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(psnr(&a, &b), Err(Error::InvalidInput(_))));
        let c = RasterImage::filled(5, 3, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(psnr(&a, &c).is_err());
    }

    #[test]
    fn masked_psnr_ignores_outside() {
        let a = solid(0.0);
        let b = RasterImage::from_fn(5, 3, 3, |x, _| if x == 0 { [1.0; 4] } else { [0.0; 4] }).unwrap();
        let mask = ForegroundMask::from_field(
            crate::imaging::ScalarField::from_fn(5, 3, |x, _| if x > 0 { 1.0 } else { 0.0 }).unwrap(),
        )
        .unwrap();
        assert_eq!(masked_psnr(&a, &b, &mask).unwrap(), PSNR_CAP_DB);
        assert!(masked_psnr(&a, &b, &ForegroundMask::empty(5, 3).unwrap()).is_err());
    }

    #[test]
    fn cosine_reference_points() {
        assert_eq!(cosine_similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-2.0, 0.0]).unwrap(), -1.0);
        assert!(cosine_similarity(&[0.0], &[1.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }
}
