//! Binary morphology on masks via an exact Euclidean distance transform.

use super::types::{BinaryMask, ForegroundMask};

/// Marker for "no set pixel reachable"; any transform value at or above
/// [`UNREACHABLE`] means the set was empty.
const FAR: f64 = 1e20;
pub(crate) const UNREACHABLE: f64 = 1e19;

/// Squared Euclidean distance from every pixel to the nearest set pixel.
///
/// Two-pass lower-envelope transform (rows, then columns); exact on the
/// integer grid. An empty set yields values `>= UNREACHABLE` everywhere.
pub fn squared_distance_transform(set: &BinaryMask) -> Vec<f64> {
    let (w, h) = (set.width() as usize, set.height() as usize);
    let mut grid: Vec<f64> = set.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        f[..w].copy_from_slice(row);
        lower_envelope(&f[..w], &mut d[..w], &mut v, &mut z);
        row.copy_from_slice(&d[..w]);
    }
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        lower_envelope(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    grid
}

fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                // k > 0 here: z[0] is -inf
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// Dilates a binary mask with the disc `dx² + dy² <= radius²`.
pub fn dilate_binary(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let r2 = radius as f64 * radius as f64;
    let bits = squared_distance_transform(mask).into_iter().map(|d| d <= r2).collect();
    BinaryMask::new(mask.width(), mask.height(), bits).expect("extent preserved")
}

/// Dilation of the mask's binary view by a disc; radius 0 returns the mask
/// unchanged.
pub fn dilate_mask(mask: &ForegroundMask, radius: u32) -> ForegroundMask {
    if radius == 0 {
        return mask.clone();
    }
    ForegroundMask::from_binary(&dilate_binary(&mask.binary_view(), radius))
        .with_threshold(mask.threshold())
        .expect("threshold already validated")
}

/// Inverts a binary mask.
pub fn complement(mask: &BinaryMask) -> BinaryMask {
    BinaryMask::new(mask.width(), mask.height(), mask.bits().iter().map(|b| !b).collect()).expect("extent preserved")
}
