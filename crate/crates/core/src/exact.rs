//! Exact maximum-likelihood-class decoding by enumerating the X-type
//! stabilizer group. Only feasible on tiny lattices; serves as the RG base
//! case and as a test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ClassLabel, Syndrome, TorusLattice};
use crate::noise::{log_sum_exp, NoiseModel};
use crate::zd::{XOperator, Zd};

/// Maximum number of `(class, stabilizer)` terms the exact decoder will sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBound(pub u128);

impl Default for EnumerationBound {
    /// `d² · d^{L²-1}` at `L = 2`, `d = 6`.
    fn default() -> Self {
        EnumerationBound(6u128.pow(5))
    }
}

impl EnumerationBound {
    pub fn unlimited() -> Self {
        EnumerationBound(u128::MAX)
    }
}

/// Normalized probabilities over the `d²` logical classes, indexed by
/// [`ClassLabel::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    d: u8,
    probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn from_log_weights(modulus: Zd, log_weights: &[f64]) -> Result<Self> {
        let norm = log_sum_exp(log_weights);
        if norm == f64::NEG_INFINITY || norm.is_nan() {
            return Err(Error::DegenerateDistribution(
                "every logical class has zero probability".into(),
            ));
        }
        Ok(ClassDistribution {
            d: modulus.get(),
            probs: log_weights.iter().map(|&w| (w - norm).exp()).collect(),
        })
    }

    pub fn modulus(&self) -> Zd {
        Zd::new(self.d as u32).expect("stored modulus is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: ClassLabel) -> f64 {
        self.probs[label.index(self.modulus())]
    }

    /// Most likely class; ties go to the lexicographically lowest label.
    pub fn argmax(&self) -> ClassLabel {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        ClassLabel::from_index(best, self.modulus())
    }

    /// Relabels class `ℓ` as `ℓ + shift`.
    pub fn shifted(&self, shift: ClassLabel) -> Self {
        let m = self.modulus();
        let mut probs = vec![0.0; self.probs.len()];
        for (i, &p) in self.probs.iter().enumerate() {
            probs[ClassLabel::from_index(i, m).shifted(shift, m).index(m)] = p;
        }
        ClassDistribution { d: self.d, probs }
    }
}

/// `P(ℓ) ∝ Σ_{s ∈ S_X} P(R(σ) · X̄(ℓ) · s)` with the default bound.
///
/// `R(σ)` is [`TorusLattice::canonical_representative`], which has winding
/// `(0, 0)`, so the returned labels are absolute windings.
pub fn exact_class_probabilities(
    lattice: &TorusLattice,
    syndrome: &Syndrome,
    noise: &NoiseModel,
) -> Result<ClassDistribution> {
    exact_class_probabilities_bounded(lattice, syndrome, noise, EnumerationBound::default())
}

pub fn exact_class_probabilities_bounded(
    lattice: &TorusLattice,
    syndrome: &Syndrome,
    noise: &NoiseModel,
    bound: EnumerationBound,
) -> Result<ClassDistribution> {
    let m = lattice.modulus();
    let d = m.as_usize();
    let n = lattice.num_edges();
    if noise.num_edges() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: noise.num_edges(),
        });
    }
    if noise.modulus() != m {
        return Err(Error::ModulusMismatch {
            left: m.get(),
            right: noise.modulus().get(),
        });
    }
    let free_vertices = lattice.num_vertices() - 1;
    let needed = (d as u128)
        .checked_pow(free_vertices as u32 + 2)
        .unwrap_or(u128::MAX);
    if needed > bound.0 {
        return Err(Error::EnumerationTooLarge {
            needed,
            bound: bound.0,
        });
    }

    let canonical = lattice.canonical_representative(syndrome)?;
    let log_table: Vec<f64> = (0..n)
        .flat_map(|e| noise.edge(e).iter().map(|&p| p.ln()).collect::<Vec<_>>())
        .collect();
    let group_size = d.pow(free_vertices as u32);

    let mut class_log = Vec::with_capacity(d * d);
    let mut terms = Vec::with_capacity(group_size);
    for label in ClassLabel::all(m) {
        let mut op = canonical.compose(&lattice.logical(label))?;
        terms.clear();
        // Modular Gray code over the free vertex exponents: step k applies one
        // A_v, where v is the base-d valuation of k.
        for step in 0..group_size {
            if step > 0 {
                let mut v = 0;
                let mut r = step;
                while r % d == 0 {
                    r /= d;
                    v += 1;
                }
                for &(e, s) in lattice.vertex_incidence(v) {
                    op.apply(e, if s > 0 { 1 } else { m.neg(1) });
                }
            }
            let lp: f64 = op
                .exponents()
                .iter()
                .enumerate()
                .map(|(e, &k)| log_table[e * d + k as usize])
                .sum();
            terms.push(lp);
        }
        class_log.push(log_sum_exp(&terms));
    }
    ClassDistribution::from_log_weights(m, &class_log)
}

/// Class probabilities by summing `P(E)` over every `E ∈ Z_d^n` with the
/// given syndrome, grouped by winding. `d^n` work; a reference for tiny
/// lattices only.
pub fn enumerate_class_probabilities(
    lattice: &TorusLattice,
    syndrome: &Syndrome,
    noise: &NoiseModel,
    bound: EnumerationBound,
) -> Result<ClassDistribution> {
    let m = lattice.modulus();
    let d = m.as_usize();
    let n = lattice.num_edges();
    let needed = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > bound.0 {
        return Err(Error::EnumerationTooLarge {
            needed,
            bound: bound.0,
        });
    }
    let mut weights = vec![0.0; d * d];
    let mut op = XOperator::identity(m, n);
    for _ in 0..needed {
        if lattice.syndrome(&op)? == *syndrome {
            let p: f64 = (0..n).map(|e| noise.edge(e)[op.get(e) as usize]).product();
            weights[lattice.winding(&op)?.index(m)] += p;
        }
        // Odometer increment.
        for e in 0..n {
            op.apply(e, 1);
            if op.get(e) != 0 {
                break;
            }
        }
    }
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    ClassDistribution::from_log_weights(m, &logs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_syndrome_prefers_identity_class() {
        for d in 2..=6 {
            let lat = TorusLattice::new(2, d).unwrap();
            let m = lat.modulus();
            let noise = NoiseModel::bitflip(m, 0.1, lat.num_edges()).unwrap();
            let s = Syndrome::zero(m, 4);
            let dist = exact_class_probabilities(&lat, &s, &noise).unwrap();
            assert_eq!(dist.argmax(), ClassLabel::new(0, 0));
            let total: f64 = dist.probs().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_noise_gives_uniform_classes() {
        let lat = TorusLattice::new(2, 3).unwrap();
        let m = lat.modulus();
        let noise = NoiseModel::bitflip(m, 2.0 / 3.0, lat.num_edges()).unwrap();
        let mut err = XOperator::identity(m, 8);
        err.apply(2, 1);
        let s = lat.syndrome(&err).unwrap();
        let dist = exact_class_probabilities(&lat, &s, &noise).unwrap();
        for &p in dist.probs() {
            assert!((p - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_is_enforced() {
        let lat = TorusLattice::new(4, 2).unwrap();
        let m = lat.modulus();
        let noise = NoiseModel::bitflip(m, 0.1, lat.num_edges()).unwrap();
        let s = Syndrome::zero(m, 16);
        assert!(matches!(
            exact_class_probabilities(&lat, &s, &noise),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(
            exact_class_probabilities_bounded(&lat, &s, &noise, EnumerationBound::unlimited())
                .is_ok()
        );
    }

    #[test]
    fn impossible_syndrome_is_degenerate() {
        let lat = TorusLattice::new(2, 2).unwrap();
        let m = lat.modulus();
        let noise = NoiseModel::bitflip(m, 0.0, lat.num_edges()).unwrap();
        let mut err = XOperator::identity(m, 8);
        err.apply(0, 1);
        let s = lat.syndrome(&err).unwrap();
        assert!(matches!(
            exact_class_probabilities(&lat, &s, &noise),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn enumeration_agrees_on_small_torus() {
        let lat = TorusLattice::new(2, 2).unwrap();
        let m = lat.modulus();
        let noise = NoiseModel::bitflip(m, 0.13, lat.num_edges()).unwrap();
        let mut err = XOperator::identity(m, 8);
        err.apply(3, 1);
        err.apply(4, 1);
        let s = lat.syndrome(&err).unwrap();
        let a = exact_class_probabilities(&lat, &s, &noise).unwrap();
        let b =
            enumerate_class_probabilities(&lat, &s, &noise, EnumerationBound::default()).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_ties_break_low() {
        let m = Zd::new(2).unwrap();
        let dist = ClassDistribution::from_log_weights(m, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(dist.argmax(), ClassLabel::new(0, 1));
        let shifted = dist.shifted(ClassLabel::new(1, 0));
        // (0, 1) -> (1, 1) and (1, 0) -> (0, 0) tie; the lower label wins.
        assert_eq!(shifted.argmax(), ClassLabel::new(0, 0));
    }
}
