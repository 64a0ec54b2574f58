//! Qudit hashing bound for the symmetric d-ary channel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `H_d(p) = -(1-p) log_d(1-p) - p log_d(p/(d-1))`.
pub fn qudit_entropy(d: u32, p: f64) -> f64 {
    let ln_d = (d as f64).ln();
    let xlx = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (y).ln() };
    -(xlx(1.0 - p, 1.0 - p) + xlx(p, p / (d as f64 - 1.0))) / ln_d
}

/// Root of `1 - 2 H_d(p) = 0` on `(0, (d-1)/d)`, bisected to `1e-10`.
pub fn hashing_bound(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidModulus(d));
    }
    let f = |p: f64| 1.0 - 2.0 * qudit_entropy(d, p);
    let (mut lo, mut hi) = (0.0, (d as f64 - 1.0) / d as f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledCurve {
    /// `p_th(2) / C_2`.
    pub alpha: f64,
    /// `d -> (C_d, alpha * C_d)`.
    pub points: BTreeMap<u32, (f64, f64)>,
}

/// Scales the hashing bound by `alpha = p_th(2) / C_2` for each `d` in
/// `dims`, or for every key of `thresholds` when `dims` is empty.
pub fn rescaled_hashing_curve(
    thresholds: &BTreeMap<u32, f64>,
    dims: &[u32],
) -> Result<RescaledCurve> {
    let p2 = thresholds
        .get(&2)
        .ok_or_else(|| Error::InvalidConfig("a d = 2 threshold is required".into()))?;
    let alpha = p2 / hashing_bound(2)?;
    let dims: Vec<u32> = if dims.is_empty() {
        thresholds.keys().copied().collect()
    } else {
        dims.to_vec()
    };
    let mut points = BTreeMap::new();
    for d in dims {
        let c = hashing_bound(d)?;
        points.insert(d, (c, alpha * c));
    }
    Ok(RescaledCurve { alpha, points })
}
