use super::types::{DepthMap, ScalarField};
use crate::error::{Error, Result};

/// Affinely maps a raw field onto `[0, 1]`; a constant field maps to 0.5.
pub fn normalize_depth(raw: &ScalarField) -> Result<DepthMap> {
    if let Some(v) = raw.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("depth field contains {v}")));
    }
    let (lo, hi) = raw
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v as f64), hi.max(v as f64))
        });
    let data = if hi > lo {
        let span = hi - lo;
        raw.values().iter().map(|&v| ((v as f64 - lo) / span) as f32).collect()
    } else {
        vec![0.5; raw.values().len()]
    };
    DepthMap::new(raw.width(), raw.height(), data)
}

/// Mirrors a depth map between near=1 and near=0 conventions.
pub fn flip_depth(depth: &DepthMap) -> DepthMap {
    let data = depth.values().iter().map(|&v| 1.0 - v).collect();
    DepthMap::new(depth.width(), depth.height(), data).expect("flip stays in range")
}
