//! Finite-size-scaling threshold fit.
//!
//! Model: `p_dec = A + B (p - p_th) L^{1/ν}`, fitted by weighted
//! Levenberg-Marquardt from a grid-search start.

use std::collections::BTreeMap;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{SweepRow, Z_95};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub size: usize,
    pub p_phys: f64,
    pub p_dec: f64,
    /// Inverse variance of `p_dec`.
    pub weight: f64,
}

impl FitPoint {
    /// Weight from the Wilson interval width, which stays finite when no
    /// failures were observed.
    pub fn from_row(row: &SweepRow) -> Self {
        let sigma = ((row.ci_high - row.ci_low) / (2.0 * Z_95)).max(1e-12);
        FitPoint {
            size: row.size,
            p_phys: row.p_phys,
            p_dec: row.p_dec,
            weight: 1.0 / (sigma * sigma),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p_th: f64,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub stderr_p_th: f64,
    pub stderr_nu: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
    /// `sqrt(Σ w r²)` at the optimum.
    pub residual: f64,
    pub chi2_per_dof: f64,
    pub iterations: usize,
    pub n_points: usize,
    /// Range of `p` where every curve's error stripe overlaps all others.
    pub crossing_interval: Option<(f64, f64)>,
}

const MAX_ITER: usize = 1000;

fn model(theta: &Vector4<f64>, pt: &FitPoint) -> f64 {
    let scale = (pt.size as f64).powf(1.0 / theta[3]);
    theta[0] + theta[1] * (pt.p_phys - theta[2]) * scale
}

fn jacobian_row(theta: &Vector4<f64>, pt: &FitPoint) -> Vector4<f64> {
    let ln_l = (pt.size as f64).ln();
    let scale = (pt.size as f64).powf(1.0 / theta[3]);
    let dp = pt.p_phys - theta[2];
    Vector4::new(
        1.0,
        dp * scale,
        -theta[1] * scale,
        -theta[1] * dp * scale * ln_l / (theta[3] * theta[3]),
    )
}

fn chi2(theta: &Vector4<f64>, pts: &[FitPoint]) -> f64 {
    pts.iter()
        .map(|pt| {
            let r = pt.p_dec - model(theta, pt);
            pt.weight * r * r
        })
        .sum()
}

fn normal_equations(theta: &Vector4<f64>, pts: &[FitPoint]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for pt in pts {
        let j = jacobian_row(theta, pt);
        let r = pt.p_dec - model(theta, pt);
        jtj += pt.weight * j * j.transpose();
        jtr += pt.weight * r * j;
    }
    (jtj, jtr)
}

/// Best `(A, B)` for fixed `(p_th, ν)` by weighted linear least squares.
fn linear_start(pc: f64, nu: f64, pts: &[FitPoint]) -> Option<Vector4<f64>> {
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for pt in pts {
        let x = (pt.p_phys - pc) * (pt.size as f64).powf(1.0 / nu);
        sw += pt.weight;
        sx += pt.weight * x;
        sxx += pt.weight * x * x;
        sy += pt.weight * pt.p_dec;
        sxy += pt.weight * x * pt.p_dec;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    Some(Vector4::new(a, b, pc, nu))
}

fn validate(points: &[FitPoint]) -> Result<(f64, f64)> {
    let mut per_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for pt in points {
        if !(pt.weight.is_finite() && pt.weight > 0.0) {
            return Err(Error::FitFailure(format!(
                "weight {} at L = {}, p = {} must be positive and finite",
                pt.weight, pt.size, pt.p_phys
            )));
        }
        if pt.size < 2 {
            return Err(Error::FitFailure(format!(
                "lattice size {} is too small",
                pt.size
            )));
        }
        per_size.entry(pt.size).or_default().push(pt.p_phys);
    }
    if per_size.len() < 2 {
        return Err(Error::FitFailure(
            "at least two distinct lattice sizes are needed to locate a crossing".into(),
        ));
    }
    for (l, ps) in &mut per_size {
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        if ps.len() < 3 {
            return Err(Error::FitFailure(format!(
                "L = {l} has {} distinct p values, need at least 3",
                ps.len()
            )));
        }
    }
    let lo = points
        .iter()
        .map(|p| p.p_phys)
        .fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.p_phys)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

pub fn threshold_fit(points: &[FitPoint]) -> Result<FitResult> {
    let (p_lo, p_hi) = validate(points)?;

    let mut best: Option<(f64, Vector4<f64>)> = None;
    for i in 0..=100 {
        let pc = p_lo + (p_hi - p_lo) * i as f64 / 100.0;
        for k in 0..=50 {
            let nu = 0.5 + 2.5 * k as f64 / 50.0;
            if let Some(theta) = linear_start(pc, nu, points) {
                let c = chi2(&theta, points);
                if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, theta));
                }
            }
        }
    }
    let (mut cost, mut theta) =
        best.ok_or_else(|| Error::FitFailure("no usable starting point".into()))?;

    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&theta, points);
        let mut damped = jtj;
        for k in 0..4 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
            continue;
        };
        let candidate = theta + step;
        let new_cost = if candidate[3] > 0.0 {
            chi2(&candidate, points)
        } else {
            f64::INFINITY
        };
        if new_cost <= cost {
            let small_step = step
                .iter()
                .zip(theta.iter())
                .all(|(s, t)| s.abs() <= 1e-14 * (1.0 + t.abs()));
            let small_gain = cost - new_cost <= 1e-15 * cost;
            theta = candidate;
            cost = new_cost;
            lambda = (lambda / 10.0).max(1e-15);
            if small_step || small_gain || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                // No descent direction left: a stationary point.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitFailure(format!(
            "no convergence after {iterations} iterations (chi2 = {cost}, theta = {:?})",
            theta.as_slice()
        )));
    }

    let (jtj, _) = normal_equations(&theta, points);
    let cov = jtj.try_inverse().ok_or_else(|| {
        Error::FitFailure(format!(
            "rank-deficient design at theta = {:?}",
            theta.as_slice()
        ))
    })?;
    let se = |k: usize| cov[(k, k)].max(0.0).sqrt();
    if !(p_lo..=p_hi).contains(&theta[2]) {
        return Err(Error::FitFailure(format!(
            "fitted p_th = {} lies outside the swept range [{p_lo}, {p_hi}]",
            theta[2]
        )));
    }
    let dof = points.len().saturating_sub(4).max(1);
    Ok(FitResult {
        a: theta[0],
        b: theta[1],
        p_th: theta[2],
        nu: theta[3],
        stderr_a: se(0),
        stderr_b: se(1),
        stderr_p_th: se(2),
        stderr_nu: se(3),
        residual: cost.sqrt(),
        chi2_per_dof: cost / dof as f64,
        iterations,
        n_points: points.len(),
        crossing_interval: crossing_interval(points),
    })
}

/// Linear interpolation of `(value, sigma)` along one curve sorted by `p`.
fn interpolate(curve: &[&FitPoint], p: f64) -> (f64, f64) {
    let k = curve
        .windows(2)
        .position(|w| p <= w[1].p_phys)
        .unwrap_or(curve.len() - 2);
    let (a, b) = (curve[k], curve[k + 1]);
    let t = if b.p_phys > a.p_phys {
        (p - a.p_phys) / (b.p_phys - a.p_phys)
    } else {
        0.0
    };
    let lerp = |x: f64, y: f64| x + t * (y - x);
    (
        lerp(a.p_dec, b.p_dec),
        lerp(1.0 / a.weight.sqrt(), 1.0 / b.weight.sqrt()),
    )
}

/// Each curve is widened to a stripe of ± one standard error; returns the
/// range of `p` where all stripes share a common point.
pub fn crossing_interval(points: &[FitPoint]) -> Option<(f64, f64)> {
    let mut curves: BTreeMap<usize, Vec<&FitPoint>> = BTreeMap::new();
    for pt in points {
        curves.entry(pt.size).or_default().push(pt);
    }
    for c in curves.values_mut() {
        c.sort_by(|a, b| a.p_phys.total_cmp(&b.p_phys));
        if c.len() < 2 {
            return None;
        }
    }
    let lo = curves
        .values()
        .map(|c| c[0].p_phys)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = curves
        .values()
        .map(|c| c[c.len() - 1].p_phys)
        .fold(f64::INFINITY, f64::min);
    if lo > hi {
        return None;
    }
    let steps = 2000;
    let mut found: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let p = lo + (hi - lo) * i as f64 / steps as f64;
        let (mut top, mut bottom) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in curves.values() {
            let (v, s) = interpolate(c, p);
            top = top.min(v + s);
            bottom = bottom.max(v - s);
        }
        if bottom <= top {
            found = Some(match found {
                None => (p, p),
                Some((a, _)) => (a, p),
            });
        }
    }
    found
}

/// Points within `half_width` of the centre of the stripe crossing
/// interval, i.e. the region where the linear scaling form applies.
/// `half_width` defaults to a quarter of the swept `p` span. Returns all
/// points unchanged when no crossing is found or when some size would keep
/// fewer than three `p` values.
pub fn near_crossing(points: &[FitPoint], half_width: Option<f64>) -> Vec<FitPoint> {
    let Some((lo, hi)) = crossing_interval(points) else {
        return points.to_vec();
    };
    let p_lo = points
        .iter()
        .map(|p| p.p_phys)
        .fold(f64::INFINITY, f64::min);
    let p_hi = points
        .iter()
        .map(|p| p.p_phys)
        .fold(f64::NEG_INFINITY, f64::max);
    let w = half_width.unwrap_or((p_hi - p_lo) / 4.0);
    let centre = 0.5 * (lo + hi);
    let kept: Vec<FitPoint> = points
        .iter()
        .filter(|p| (p.p_phys - centre).abs() <= w + 1e-12)
        .copied()
        .collect();
    let mut per_size: BTreeMap<usize, usize> = BTreeMap::new();
    for p in points {
        per_size.entry(p.size).or_default();
    }
    for p in &kept {
        *per_size.entry(p.size).or_default() += 1;
    }
    if per_size.values().any(|&n| n < 3) {
        return points.to_vec();
    }
    kept
}
