//! Belief propagation between neighbouring cells on their shared qudits.
//!
//! Each cell keeps one message per boundary qudit `{0, 1, 8, 9}`: its belief
//! about that qudit's X exponent. Qudit 0 of a cell is qudit 9 of its
//! northern neighbour and qudit 1 is qudit 8 of its western neighbour, so an
//! exchange sends `out_0` north to become `in_9`, `out_9` south to become
//! `in_0`, `out_1` west to become `in_8`, and `out_8` east to become `in_1`.

use crate::cell::{CellBasis, CellGeometry, DefectTriple, BOUNDARY_QUDITS, CELL_QUDITS};
use crate::error::{Error, Result};
use crate::marginal::{contract, rescale_rows, CellNoise};
use crate::noise::QuditDistribution;
use crate::par::{self, Execution};
use crate::zd::Zd;

/// Messages on the boundary qudits, in [`BOUNDARY_QUDITS`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    slots: [QuditDistribution; 4],
}

/// Counters for the zero-mass guard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BpStats {
    pub uniform_fallbacks: usize,
}

impl BpStats {
    pub fn merge(self, other: BpStats) -> BpStats {
        BpStats {
            uniform_fallbacks: self.uniform_fallbacks + other.uniform_fallbacks,
        }
    }
}

fn slot_of(q: usize) -> usize {
    BOUNDARY_QUDITS
        .iter()
        .position(|&b| b == q)
        .unwrap_or_else(|| panic!("qudit {q} is not a boundary qudit"))
}

impl MessageSet {
    pub fn uniform(d: Zd) -> Self {
        let u = QuditDistribution::uniform(d);
        MessageSet {
            slots: [u.clone(), u.clone(), u.clone(), u],
        }
    }

    pub fn new(slots: [QuditDistribution; 4]) -> Self {
        MessageSet { slots }
    }

    #[inline]
    pub fn slot(&self, i: usize) -> &QuditDistribution {
        &self.slots[i]
    }

    /// Message attached to local boundary qudit `q` (one of 0, 1, 8, 9).
    pub fn get(&self, q: usize) -> &QuditDistribution {
        &self.slots[slot_of(q)]
    }

    pub fn set(&mut self, q: usize, m: QuditDistribution) {
        self.slots[slot_of(q)] = m;
    }

    pub fn is_uniform(&self) -> bool {
        self.slots.iter().all(|s| s.is_uniform())
    }
}

fn normalize_or_uniform(d: Zd, weights: Vec<f64>, stats: &mut BpStats) -> QuditDistribution {
    match QuditDistribution::from_weights(weights) {
        Ok(q) => q,
        Err(_) => {
            stats.uniform_fallbacks += 1;
            QuditDistribution::uniform(d)
        }
    }
}

/// `m_q(p) ∝ Σ_{l,e,s} δ(x_q, p) P(x)` for `x = t l e s`, `q ∈ {0,1,8,9}`.
pub fn initial_messages(
    basis: &CellBasis,
    a: DefectTriple,
    noise: &CellNoise,
) -> Result<MessageSet> {
    let m = basis.modulus();
    let d = m.as_usize();
    let t = basis.defect_vector(a);
    let mut rows: Vec<f64> = (0..CELL_QUDITS)
        .flat_map(|q| noise.qudit(q).to_vec())
        .collect();
    if rescale_rows(&mut rows, d) == f64::NEG_INFINITY {
        return Err(Error::DegenerateDistribution(
            "a qudit distribution is identically zero".into(),
        ));
    }
    let cavity = contract(basis, &t, &rows).cavity;
    let hist: [Vec<f64>; 4] = std::array::from_fn(|slot| {
        let q = BOUNDARY_QUDITS[slot];
        (0..d).map(|p| cavity[slot][p] * rows[q * d + p]).collect()
    });
    let mut slots = Vec::with_capacity(4);
    for h in hist {
        slots.push(QuditDistribution::from_weights(h).map_err(|_| {
            Error::DegenerateDistribution(format!("cell with defect {:?} has zero mass", a.a))
        })?);
    }
    Ok(MessageSet {
        slots: slots.try_into().expect("four slots"),
    })
}

/// `m_q(p) ∝ Σ_{l,e,s} δ(x_q, p) [P(x) / P_q(x_q)] Π_{q' ≠ q} m^in_{q'}(x_{q'})`
/// with `q, q'` ranging over the boundary qudits. Terms with `P_q(x_q) = 0`
/// contribute nothing; a message that loses all mass falls back to uniform
/// and bumps `stats`.
pub fn message_update(
    basis: &CellBasis,
    a: DefectTriple,
    noise: &CellNoise,
    incoming: &MessageSet,
    stats: &mut BpStats,
) -> Result<MessageSet> {
    let m = basis.modulus();
    let d = m.as_usize();
    let t = basis.defect_vector(a);

    // Interior qudits carry their noise; each boundary qudit carries both its
    // noise (for the zero guard) and noise × incoming message.
    let mut rows: Vec<f64> = (0..CELL_QUDITS)
        .flat_map(|q| noise.qudit(q).to_vec())
        .collect();
    if rescale_rows(&mut rows, d) == f64::NEG_INFINITY {
        return Err(Error::DegenerateDistribution(
            "a qudit distribution is identically zero".into(),
        ));
    }
    let mut weighted = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
        let msg = incoming.slot(slot).probs();
        let max = msg.iter().copied().fold(0.0, f64::max);
        for k in 0..d {
            weighted[slot][k] = rows[q * d + k] * if max > 0.0 { msg[k] / max } else { 0.0 };
        }
    }
    // Dividing P(x) by P_q(x_q) leaves q's cavity sum over the other nine
    // factors; terms with P_q(x_q) = 0 are dropped.
    let mut r = rows.clone();
    for (slot, &q) in BOUNDARY_QUDITS.iter().enumerate() {
        r[q * d..(q + 1) * d].copy_from_slice(&weighted[slot]);
    }
    let cavity = contract(basis, &t, &r).cavity;
    let hist: [Vec<f64>; 4] = std::array::from_fn(|slot| {
        let q = BOUNDARY_QUDITS[slot];
        (0..d)
            .map(|p| {
                if rows[q * d + p] > 0.0 {
                    cavity[slot][p]
                } else {
                    0.0
                }
            })
            .collect()
    });
    let slots = hist.map(|h| normalize_or_uniform(m, h, stats));
    Ok(MessageSet { slots })
}

/// Routes every cell's outgoing messages to the neighbours sharing each
/// boundary qudit; the result is each cell's incoming set.
pub fn exchange(outgoing: &[MessageSet], geometry: &CellGeometry) -> Vec<MessageSet> {
    (0..outgoing.len())
        .map(|c| {
            let mut slots = outgoing[c].slots.clone();
            slots[slot_of(0)] = outgoing[geometry.north(c)].get(9).clone();
            slots[slot_of(9)] = outgoing[geometry.south(c)].get(0).clone();
            slots[slot_of(1)] = outgoing[geometry.west(c)].get(8).clone();
            slots[slot_of(8)] = outgoing[geometry.east(c)].get(1).clone();
            MessageSet { slots }
        })
        .collect()
}

/// Inputs of one cell at the current RG level.
#[derive(Clone, Debug)]
pub struct CellInput {
    pub defect: DefectTriple,
    pub noise: CellNoise,
}

/// Synchronous BP: initial messages, then `rounds - 1` times
/// (exchange, update), then a final exchange. Returns each cell's incoming
/// messages. `rounds = 0` returns uniform messages.
pub fn bp_rounds(
    basis: &CellBasis,
    cells: &[CellInput],
    geometry: &CellGeometry,
    rounds: usize,
    exec: Execution,
) -> Result<(Vec<MessageSet>, BpStats)> {
    if cells.len() != geometry.num_cells() {
        return Err(Error::LengthMismatch {
            expected: geometry.num_cells(),
            found: cells.len(),
        });
    }
    let m = basis.modulus();
    if rounds == 0 {
        return Ok((
            vec![MessageSet::uniform(m); cells.len()],
            BpStats::default(),
        ));
    }
    let degenerate = |c: usize| {
        let (x, y) = geometry.cell_coords(c);
        Error::DegenerateCell { x, y, level: 0 }
    };
    let mut outgoing = par::try_map(exec, cells.len(), |c| {
        initial_messages(basis, cells[c].defect, &cells[c].noise).map_err(|_| degenerate(c))
    })?;
    let mut stats = BpStats::default();
    for _ in 1..rounds {
        let incoming = exchange(&outgoing, geometry);
        let updated = par::try_map(exec, cells.len(), |c| {
            let mut s = BpStats::default();
            message_update(
                basis,
                cells[c].defect,
                &cells[c].noise,
                &incoming[c],
                &mut s,
            )
            .map(|msg| (msg, s))
            .map_err(|_| degenerate(c))
        })?;
        outgoing = Vec::with_capacity(updated.len());
        for (msg, s) in updated {
            stats = stats.merge(s);
            outgoing.push(msg);
        }
    }
    Ok((exchange(&outgoing, geometry), stats))
}
