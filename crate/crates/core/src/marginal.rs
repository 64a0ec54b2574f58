//! Per-cell marginalization over the coset `t · ⟨L⟩ · ⟨E⟩ · ⟨S⟩`.
//!
//! Products are evaluated in linear space with every per-qudit distribution
//! rescaled so its largest entry is 1; normalization removes the scale. If
//! the whole sum still underflows, the `d^7` terms are enumerated again with
//! a log-sum-exp.

use crate::bp::MessageSet;
use crate::cell::{CellBasis, CellVector, DefectTriple, BOUNDARY_QUDITS, CELL_QUDITS};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, PairDistribution, QuditDistribution};
use crate::zd::Zd;

/// The ten local qudit distributions of one cell, flat with stride `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellNoise {
    modulus: Zd,
    probs: Vec<f64>,
}

impl CellNoise {
    pub fn new(modulus: Zd, dists: &[QuditDistribution]) -> Result<Self> {
        if dists.len() != CELL_QUDITS {
            return Err(Error::LengthMismatch {
                expected: CELL_QUDITS,
                found: dists.len(),
            });
        }
        let mut probs = Vec::with_capacity(CELL_QUDITS * modulus.as_usize());
        for q in dists {
            if q.dim() != modulus.as_usize() {
                return Err(Error::LengthMismatch {
                    expected: modulus.as_usize(),
                    found: q.dim(),
                });
            }
            probs.extend_from_slice(q.probs());
        }
        Ok(CellNoise { modulus, probs })
    }

    pub fn iid(dist: &QuditDistribution) -> Result<Self> {
        let modulus = Zd::new(dist.dim() as u32)?;
        Self::new(modulus, &vec![dist.clone(); CELL_QUDITS])
    }

    /// Gathers the distributions of the given global edges.
    pub fn gather(noise: &NoiseModel, edges: &[usize; CELL_QUDITS]) -> Self {
        let d = noise.modulus().as_usize();
        let mut probs = Vec::with_capacity(CELL_QUDITS * d);
        for &e in edges {
            probs.extend_from_slice(noise.edge(e));
        }
        CellNoise {
            modulus: noise.modulus(),
            probs,
        }
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn qudit(&self, q: usize) -> &[f64] {
        let d = self.modulus.as_usize();
        &self.probs[q * d..(q + 1) * d]
    }

    /// Probability of a full ten-qudit configuration.
    pub fn probability(&self, x: &CellVector) -> f64 {
        x.iter()
            .enumerate()
            .map(|(q, &k)| self.qudit(q)[k as usize])
            .product()
    }
}

/// Rescales each row of `d` entries to a maximum of 1, returning
/// `Σ log(row max)` (`-inf` if a row is all zero).
pub(crate) fn rescale_rows(rows: &mut [f64], d: usize) -> f64 {
    let mut log_scale = 0.0;
    for row in rows.chunks_exact_mut(d) {
        let max = row.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return f64::NEG_INFINITY;
        }
        row.iter_mut().for_each(|v| *v /= max);
        log_scale += max.ln();
    }
    log_scale
}

/// Calls `f(l_index, x)` for every `x = t · l · e · s`, `d^7` terms in all.
#[inline]
pub(crate) fn for_each_term<F: FnMut(usize, &CellVector)>(
    basis: &CellBasis,
    t: &CellVector,
    mut f: F,
) {
    let m = basis.modulus();
    let mut base = [0u8; CELL_QUDITS];
    let mut x = [0u8; CELL_QUDITS];
    for (li, lv) in basis.l_table().iter().enumerate() {
        for q in 0..CELL_QUDITS {
            base[q] = m.add(t[q], lv[q]);
        }
        for es in basis.es_table() {
            for q in 0..CELL_QUDITS {
                x[q] = m.add(base[q], es[q]);
            }
            f(li, &x);
        }
    }
}

/// Flow weights and boundary-qudit histograms of one cell.
pub(crate) struct Contraction {
    /// `Σ_{e,s} Π_q rows_q(x_q)` over `x = t l e s`, indexed `l = i d + j`.
    pub flow: Vec<f64>,
    /// `Σ_x δ(x_q, p) Π_{r ≠ q} rows_r(x_r)` for `q` in [`BOUNDARY_QUDITS`]
    /// order: the boundary histogram with `q`'s own factor left out.
    pub cavity: [Vec<f64>; 4],
}

/// Same sums as [`for_each_term`], contracted one generator at a time: E0
/// meets only qudits 6 and 8, E1 only 7 and 9, S0 only 0, 2 and 3, S1 only
/// 1, 4 and 5, so each is summed out with S2 and the L pair held fixed.
/// Boundary qudits 0, 1, 8, 9 each sit in one of these four groups, so
/// their cavity sums come from leaving that group's variable open.
pub(crate) fn contract(basis: &CellBasis, t: &CellVector, rows: &[f64]) -> Contraction {
    let d = basis.modulus().as_usize();
    let n3 = d * d * d;
    let offsets = basis.group_offsets();
    // Row value of qudit q at tensor position k = (s2 d + l) d + v.
    let r = |q: usize, k: usize| {
        let x = t[q] as usize + offsets[q * n3 + k] as usize;
        rows[q * d + if x >= d { x - d } else { x }]
    };

    // Group tensors indexed (s2 d + l) d + v, v the group's own variable,
    // followed by their sums over v indexed s2 d + l.
    let mut buf = vec![0.0; 4 * n3 + 6 * d * d + 2 * d];
    let (g68, rest) = buf.split_at_mut(n3);
    let (g79, rest) = rest.split_at_mut(n3);
    let (g023, rest) = rest.split_at_mut(n3);
    let (g145, rest) = rest.split_at_mut(n3);
    let (e68, rest) = rest.split_at_mut(d * d);
    let (e79, rest) = rest.split_at_mut(d * d);
    let (h023, rest) = rest.split_at_mut(d * d);
    let (h145, rest) = rest.split_at_mut(d * d);
    let (west, rest) = rest.split_at_mut(d * d);
    let (south, rest) = rest.split_at_mut(d * d);
    let (west_total, south_total) = rest.split_at_mut(d);
    for i in 0..d * d {
        for v in 0..d {
            let k = i * d + v;
            g68[k] = r(6, k) * r(8, k);
            g79[k] = r(7, k) * r(9, k);
            g023[k] = r(0, k) * r(2, k) * r(3, k);
            g145[k] = r(1, k) * r(4, k) * r(5, k);
            e68[i] += g68[k];
            e79[i] += g79[k];
            h023[i] += g023[k];
            h145[i] += g145[k];
        }
        // west: indexed s2 d + l0; south: indexed s2 d + l1.
        west[i] = h023[i] * e68[i];
        south[i] = h145[i] * e79[i];
        west_total[i / d] += west[i];
        south_total[i / d] += south[i];
    }

    let mut flow = vec![0.0; d * d];
    for l0 in 0..d {
        for l1 in 0..d {
            flow[l0 * d + l1] = (0..d)
                .map(|s2| west[s2 * d + l0] * south[s2 * d + l1])
                .sum();
        }
    }

    let mut cavity: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; d]);
    let idx = |q: usize, k: usize| (t[q] as usize + offsets[q * n3 + k] as usize) % d;
    for i in 0..d * d {
        let s2 = i / d;
        for v in 0..d {
            let k = i * d + v;
            cavity[0][idx(0, k)] += r(2, k) * r(3, k) * e68[i] * south_total[s2];
            cavity[1][idx(1, k)] += r(4, k) * r(5, k) * e79[i] * west_total[s2];
            cavity[2][idx(8, k)] += r(6, k) * h023[i] * south_total[s2];
            cavity[3][idx(9, k)] += r(7, k) * h145[i] * west_total[s2];
        }
    }
    Contraction { flow, cavity }
}

/// Per-qudit weight tables for one cell: noise times incoming message on the
/// boundary qudits.
pub(crate) fn weight_rows(noise: &CellNoise, messages: Option<&MessageSet>) -> Vec<f64> {
    let d = noise.modulus().as_usize();
    let mut rows = noise.probs.clone();
    if let Some(msgs) = messages {
        for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
            let m = msgs.slot(slot).probs();
            for k in 0..d {
                rows[q * d + k] *= m[k];
            }
        }
    }
    rows
}

/// Result of a cell marginalization along with its normalization mass.
#[derive(Clone, Debug)]
pub struct CellMarginal {
    pub flow: PairDistribution,
    /// `log Σ_terms weight` before normalization.
    pub log_mass: f64,
    /// Whether the log-domain fallback was needed.
    pub used_log_domain: bool,
}

/// `P(l) ∝ Σ_{e,s} P(t l e s) Π_q m_q(t l e s |_q)`, normalized over the `d²`
/// flow values `l = L0^i L1^j`. With `messages = None` no message factor is
/// applied at all.
pub fn cell_marginal(
    basis: &CellBasis,
    defect: DefectTriple,
    noise: &CellNoise,
    messages: Option<&MessageSet>,
) -> Result<PairDistribution> {
    cell_marginal_detailed(basis, defect, noise, messages).map(|c| c.flow)
}

pub fn cell_marginal_detailed(
    basis: &CellBasis,
    defect: DefectTriple,
    noise: &CellNoise,
    messages: Option<&MessageSet>,
) -> Result<CellMarginal> {
    let m = basis.modulus();
    if noise.modulus() != m {
        return Err(Error::ModulusMismatch {
            left: m.get(),
            right: noise.modulus().get(),
        });
    }
    let d = m.as_usize();
    let t = basis.defect_vector(defect);
    let raw = weight_rows(noise, messages);

    let mut rows = raw.clone();
    let log_scale = rescale_rows(&mut rows, d);
    let mut acc = if log_scale > f64::NEG_INFINITY {
        contract(basis, &t, &rows).flow
    } else {
        vec![0.0f64; d * d]
    };
    let total: f64 = acc.iter().sum();
    if total > 0.0 && total.is_finite() && total >= f64::MIN_POSITIVE {
        acc.iter_mut().for_each(|v| *v /= total);
        return Ok(CellMarginal {
            flow: PairDistribution::from_normalized(m, acc),
            log_mass: total.ln() + log_scale,
            used_log_domain: false,
        });
    }

    // Log-domain fallback: two passes, max then shifted sum.
    let logs: Vec<f64> = raw.iter().map(|&p| p.ln()).collect();
    let log_weight = |x: &CellVector| -> f64 {
        let mut lw = 0.0;
        for q in 0..CELL_QUDITS {
            lw += logs[q * d + x[q] as usize];
        }
        lw
    };
    let mut max = f64::NEG_INFINITY;
    for_each_term(basis, &t, |_, x| max = max.max(log_weight(x)));
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateDistribution(format!(
            "cell with defect {:?} has zero total mass",
            defect.a
        )));
    }
    let mut acc = vec![0.0f64; d * d];
    for_each_term(basis, &t, |li, x| acc[li] += (log_weight(x) - max).exp());
    let total: f64 = acc.iter().sum();
    acc.iter_mut().for_each(|v| *v /= total);
    Ok(CellMarginal {
        flow: PairDistribution::from_normalized(m, acc),
        log_mass: max + total.ln(),
        used_log_domain: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::bitflip_distribution;

    fn z(d: u32) -> Zd {
        Zd::new(d).unwrap()
    }

    #[test]
    fn factored_sum_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for d in 2..=6u8 {
            let m = z(d as u32);
            let b = CellBasis::new(m).unwrap();
            let du = d as usize;
            for _ in 0..5 {
                let rows: Vec<f64> = (0..CELL_QUDITS * du)
                    .map(|_| {
                        if rng.random::<f64>() < 0.1 {
                            0.0
                        } else {
                            rng.random()
                        }
                    })
                    .collect();
                let t = b.defect_vector(DefectTriple::new(
                    rng.random_range(0..d),
                    rng.random_range(0..d),
                    rng.random_range(0..d),
                ));
                let mut flow = vec![0.0; du * du];
                let mut hist = vec![vec![0.0; du]; CELL_QUDITS];
                for_each_term(&b, &t, |li, x| {
                    let w: f64 = (0..CELL_QUDITS)
                        .map(|q| rows[q * du + x[q] as usize])
                        .product();
                    flow[li] += w;
                    for q in 0..CELL_QUDITS {
                        hist[q][x[q] as usize] += w;
                    }
                });
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
                let got = contract(&b, &t, &rows);
                for (a, e) in got.flow.iter().zip(&flow) {
                    assert!(close(*a, *e), "d={d}: {a} vs {e}");
                }
                for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
                    for (p, e) in hist[q].iter().enumerate() {
                        let a = got.cavity[slot][p] * rows[q * du + p];
                        assert!(close(a, *e), "d={d} q={q}: {a} vs {e}");
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_cell_is_point_mass() {
        for d in 2..=5 {
            let m = z(d);
            let b = CellBasis::new(m).unwrap();
            let noise = CellNoise::iid(&bitflip_distribution(m, 0.0).unwrap()).unwrap();
            let pd = cell_marginal(&b, DefectTriple::new(0, 0, 0), &noise, None).unwrap();
            assert_eq!(pd.get(0, 0), 1.0);
            assert_eq!(pd.joint().iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn uniform_noise_gives_uniform_flow() {
        for d in 2..=4u8 {
            let m = z(d as u32);
            let b = CellBasis::new(m).unwrap();
            let noise = CellNoise::iid(&QuditDistribution::uniform(m)).unwrap();
            for a in [DefectTriple::new(0, 0, 0), DefectTriple::new(1, d - 1, 1)] {
                let pd = cell_marginal(&b, a, &noise, None).unwrap();
                let u = 1.0 / (d as f64 * d as f64);
                assert!(pd.joint().iter().all(|&p| (p - u).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn impossible_defect_is_degenerate() {
        let m = z(3);
        let b = CellBasis::new(m).unwrap();
        let noise = CellNoise::iid(&bitflip_distribution(m, 0.0).unwrap()).unwrap();
        assert!(matches!(
            cell_marginal(&b, DefectTriple::new(1, 0, 0), &noise, None),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn log_domain_fallback_agrees() {
        // Entries small enough that ten-fold products underflow f64 even
        // after rescaling.
        let m = z(2);
        let b = CellBasis::new(m).unwrap();
        let a = DefectTriple::new(1, 1, 1);
        let tiny = QuditDistribution::new(vec![1.0, 1e-200]).unwrap();
        let out = cell_marginal_detailed(&b, a, &CellNoise::iid(&tiny).unwrap(), None).unwrap();
        assert!(out.used_log_domain);
        let s: f64 = out.flow.joint().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);

        // Same minimum-weight terms dominate at a milder rate.
        let small = QuditDistribution::new(vec![1.0 - 1e-30, 1e-30]).unwrap();
        let reference =
            cell_marginal_detailed(&b, a, &CellNoise::iid(&small).unwrap(), None).unwrap();
        assert!(!reference.used_log_domain);
        for (x, y) in out.flow.joint().iter().zip(reference.flow.joint()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
