//! Generalized bit-flip channel and per-edge X-exponent distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::zd::{XOperator, Zd};

const NORM_TOL: f64 = 1e-12;

/// Categorical distribution over the X-exponent of a single qudit.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditDistribution {
    probs: Vec<f64>,
}

impl QuditDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidModulus(probs.len() as u32));
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidProbability(bad));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(QuditDistribution { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = weights.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidProbability(bad));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DegenerateDistribution("all weights are zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(QuditDistribution { probs: weights })
    }

    pub fn uniform(d: Zd) -> Self {
        let n = d.as_usize();
        QuditDistribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(d: Zd, k: u8) -> Self {
        let mut probs = vec![0.0; d.as_usize()];
        probs[(k % d.get()) as usize] = 1.0;
        QuditDistribution { probs }
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, k: u8) -> f64 {
        self.probs[k as usize]
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|&p| (p - u).abs() <= NORM_TOL)
    }
}

/// `P(0) = 1 - p`, `P(k) = p / (d-1)` for `1 <= k < d`.
pub fn bitflip_distribution(d: Zd, p_phys: f64) -> Result<QuditDistribution> {
    if !(0.0..=1.0).contains(&p_phys) || p_phys.is_nan() {
        return Err(Error::InvalidProbability(p_phys));
    }
    let n = d.as_usize();
    let mut probs = vec![p_phys / (n - 1) as f64; n];
    probs[0] = 1.0 - p_phys;
    Ok(QuditDistribution { probs })
}

/// Bit-flip rate seen by the X sector when the qudit depolarizing channel
/// `ρ -> (1-q) ρ + q I/d` is split into independent X and Z parts.
pub fn depolarizing_to_bitflip(q: f64, d: Zd) -> f64 {
    q * (1.0 - 1.0 / d.get() as f64)
}

/// Independent per-edge distributions, stored flat with stride `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    modulus: Zd,
    probs: Vec<f64>,
}

impl NoiseModel {
    pub fn iid(dist: &QuditDistribution, edges: usize) -> Result<Self> {
        let modulus = Zd::new(dist.dim() as u32)?;
        let mut probs = Vec::with_capacity(edges * dist.dim());
        for _ in 0..edges {
            probs.extend_from_slice(dist.probs());
        }
        Ok(NoiseModel { modulus, probs })
    }

    pub fn bitflip(d: Zd, p_phys: f64, edges: usize) -> Result<Self> {
        Self::iid(&bitflip_distribution(d, p_phys)?, edges)
    }

    pub fn from_edges(modulus: Zd, per_edge: &[QuditDistribution]) -> Result<Self> {
        let mut probs = Vec::with_capacity(per_edge.len() * modulus.as_usize());
        for dist in per_edge {
            if dist.dim() != modulus.as_usize() {
                return Err(Error::LengthMismatch {
                    expected: modulus.as_usize(),
                    found: dist.dim(),
                });
            }
            probs.extend_from_slice(dist.probs());
        }
        Ok(NoiseModel { modulus, probs })
    }

    /// Builds a model from raw per-edge rows that are already normalized.
    pub(crate) fn from_flat(modulus: Zd, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len() % modulus.as_usize(), 0);
        NoiseModel { modulus, probs }
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.probs.len() / self.modulus.as_usize()
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &[f64] {
        let d = self.modulus.as_usize();
        &self.probs[e * d..(e + 1) * d]
    }

    pub fn edge_distribution(&self, e: usize) -> QuditDistribution {
        QuditDistribution {
            probs: self.edge(e).to_vec(),
        }
    }

    /// Draws each edge exponent independently; deterministic in `seed`.
    pub fn sample_error(&self, seed: u64) -> XOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> XOperator {
        let d = self.modulus.as_usize();
        let exps = self
            .probs
            .chunks_exact(d)
            .map(|row| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u8;
                    }
                }
                // u landed in the rounding gap above the cumulative sum; take
                // the last outcome with nonzero mass.
                row.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
            })
            .collect();
        XOperator::from_exponents(self.modulus, exps)
    }

    /// `Σ_e log P_e(op_e)`, or `-inf` if any factor is zero.
    pub fn log_probability(&self, op: &XOperator) -> Result<f64> {
        if op.len() != self.num_edges() {
            return Err(Error::LengthMismatch {
                expected: self.num_edges(),
                found: op.len(),
            });
        }
        let mut total = 0.0;
        for (e, &k) in op.exponents().iter().enumerate() {
            let p = self.edge(e)[k as usize];
            if p <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += p.ln();
        }
        Ok(total)
    }
}

/// Joint distribution over a pair of exponents, row-major `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDistribution {
    modulus: Zd,
    joint: Vec<f64>,
}

impl PairDistribution {
    pub fn new(modulus: Zd, joint: Vec<f64>) -> Result<Self> {
        let d = modulus.as_usize();
        if joint.len() != d * d {
            return Err(Error::LengthMismatch {
                expected: d * d,
                found: joint.len(),
            });
        }
        let sum: f64 = joint.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(PairDistribution { modulus, joint })
    }

    pub(crate) fn from_normalized(modulus: Zd, joint: Vec<f64>) -> Self {
        PairDistribution { modulus, joint }
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    #[inline]
    pub fn get(&self, i: u8, j: u8) -> f64 {
        self.joint[i as usize * self.modulus.as_usize() + j as usize]
    }

    /// Distribution of the first coordinate.
    pub fn first_marginal(&self) -> QuditDistribution {
        let d = self.modulus.as_usize();
        QuditDistribution {
            probs: self.joint.chunks_exact(d).map(|r| r.iter().sum()).collect(),
        }
    }

    /// Distribution of the second coordinate.
    pub fn second_marginal(&self) -> QuditDistribution {
        let d = self.modulus.as_usize();
        let mut probs = vec![0.0; d];
        for row in self.joint.chunks_exact(d) {
            for (p, &v) in probs.iter_mut().zip(row) {
                *p += v;
            }
        }
        QuditDistribution { probs }
    }
}

/// `log Σ exp(x_i)` with a max shift; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(d: u32) -> Zd {
        Zd::new(d).unwrap()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn bitflip_examples() {
        assert!(close(
            bitflip_distribution(z(3), 0.12).unwrap().probs(),
            &[0.88, 0.06, 0.06]
        ));
        assert!(close(
            bitflip_distribution(z(2), 0.10).unwrap().probs(),
            &[0.90, 0.10]
        ));
        assert!(close(
            bitflip_distribution(z(5), 0.0).unwrap().probs(),
            &[1.0, 0.0, 0.0, 0.0, 0.0]
        ));
        assert!(bitflip_distribution(z(3), 1.5).is_err());
        assert!(bitflip_distribution(z(3), -0.1).is_err());
        assert!(bitflip_distribution(z(3), f64::NAN).is_err());
    }

    #[test]
    fn bitflip_normalized() {
        for d in 2..=6 {
            for i in 0..=20 {
                let p = i as f64 / 20.0;
                let s: f64 = bitflip_distribution(z(d), p).unwrap().probs().iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depolarizing_conversion() {
        assert!((depolarizing_to_bitflip(0.3, z(3)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sampling_edge_cases() {
        let noiseless = NoiseModel::bitflip(z(3), 0.0, 50).unwrap();
        assert!(noiseless.sample_error(9).is_identity());
        let forced = NoiseModel::bitflip(z(2), 1.0, 50).unwrap();
        assert!(forced.sample_error(9).exponents().iter().all(|&e| e == 1));
        let m = NoiseModel::bitflip(z(5), 0.3, 100).unwrap();
        assert_eq!(m.sample_error(77), m.sample_error(77));
        assert_ne!(m.sample_error(77), m.sample_error(78));
    }

    #[test]
    fn sampling_frequencies() {
        let n = 100_000;
        let m = NoiseModel::bitflip(z(3), 0.12, n).unwrap();
        let op = m.sample_error(2024);
        let mut counts = [0usize; 3];
        for &e in op.exponents() {
            counts[e as usize] += 1;
        }
        for (k, &p) in [0.88, 0.06, 0.06].iter().enumerate() {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let dev = (counts[k] as f64 - n as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "k={k} count={} dev={dev}", counts[k]);
        }
    }

    #[test]
    fn log_probability_examples() {
        let p: f64 = 0.12;
        let m = NoiseModel::bitflip(z(3), p, 2).unwrap();
        let zero = XOperator::identity(z(3), 2);
        assert!((m.log_probability(&zero).unwrap() - 2.0 * (1.0 - p).ln()).abs() < 1e-15);
        let one = XOperator::from_exponents(z(3), vec![1, 0]);
        let want = 0.06f64.ln() + 0.88f64.ln();
        assert!((m.log_probability(&one).unwrap() - want).abs() < 1e-14);

        let noiseless = NoiseModel::bitflip(z(3), 0.0, 2).unwrap();
        assert_eq!(noiseless.log_probability(&one).unwrap(), f64::NEG_INFINITY);
        assert!(m.log_probability(&XOperator::identity(z(3), 3)).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(QuditDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(QuditDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(QuditDistribution::from_weights(vec![0.0, 0.0]).is_err());
        let q = QuditDistribution::from_weights(vec![2.0, 6.0]).unwrap();
        assert!(close(q.probs(), &[0.25, 0.75]));
        assert!(QuditDistribution::uniform(z(4)).is_uniform());
    }

    #[test]
    fn pair_marginals() {
        let pd = PairDistribution::new(z(2), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(close(pd.first_marginal().probs(), &[0.3, 0.7]));
        assert!(close(pd.second_marginal().probs(), &[0.4, 0.6]));
        assert!(PairDistribution::new(z(2), vec![0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn lse() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
