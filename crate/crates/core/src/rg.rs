//! Renormalization-group soft decoder.
//!
//! One round cuts the lattice into 2×2 cells, computes each cell's flow
//! distribution over `(L0, L1)` given its three measured charges, assigns the
//! two marginals to the corresponding coarse edges and sums each cell's four
//! charges into a coarse plaquette. Rounds repeat until the lattice reaches
//! the base size, where the class distribution is computed exactly.

use serde::{Deserialize, Serialize};

use crate::bp::{bp_rounds, BpStats, CellInput};
use crate::cell::{CellBasis, CellGeometry};
use crate::error::{Error, Result};
use crate::exact::{exact_class_probabilities_bounded, ClassDistribution, EnumerationBound};
use crate::lattice::{ClassLabel, Syndrome, TorusLattice};
use crate::marginal::{cell_marginal_detailed, CellNoise};
use crate::noise::NoiseModel;
use crate::par::{self, Execution};

pub const DEFAULT_BP_ROUNDS: usize = 3;
pub const DEFAULT_BASE_SIZE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub bp_rounds: usize,
    pub base_size: usize,
    /// How cells within one level are processed.
    #[serde(default)]
    pub cell_execution: Execution,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            bp_rounds: DEFAULT_BP_ROUNDS,
            base_size: DEFAULT_BASE_SIZE,
            cell_execution: Execution::Sequential,
        }
    }
}

impl DecoderConfig {
    pub fn with_bp_rounds(mut self, rounds: usize) -> Self {
        self.bp_rounds = rounds;
        self
    }

    /// Number of RG levels needed to bring `size` down to the base size, or
    /// an error if `size` is not `base_size · 2^k`.
    pub fn levels_for(&self, size: usize) -> Result<usize> {
        if self.base_size < 2 || !self.base_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "base size {} must be even and at least 2",
                self.base_size
            )));
        }
        let mut l = size;
        let mut levels = 0;
        while l > self.base_size {
            if !l.is_multiple_of(2) {
                break;
            }
            l /= 2;
            levels += 1;
        }
        if l != self.base_size {
            return Err(Error::InvalidLatticeSize {
                size,
                reason: format!(
                    "must be a power-of-2 multiple of the base size {}",
                    self.base_size
                ),
            });
        }
        Ok(levels)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    /// Linear size of the lattice consumed by this level.
    pub size: usize,
    /// `Σ_cells log(unnormalized cell mass)`.
    pub log_mass: f64,
    pub log_domain_cells: usize,
    pub bp_uniform_fallbacks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub class_probs: ClassDistribution,
    pub argmax: ClassLabel,
    pub levels_used: usize,
    pub diagnostics: Vec<LevelDiagnostics>,
}

/// Output of one RG round.
#[derive(Clone, Debug)]
pub struct Renormalized {
    pub lattice: TorusLattice,
    pub syndrome: Syndrome,
    pub noise: NoiseModel,
    pub diagnostics: LevelDiagnostics,
}

/// Shared read-only state for one decoder instance.
#[derive(Clone, Debug)]
pub struct RgDecoder {
    basis: CellBasis,
    config: DecoderConfig,
    exact_bound: EnumerationBound,
}

impl RgDecoder {
    pub fn new(lattice_modulus: crate::zd::Zd, config: DecoderConfig) -> Result<Self> {
        Ok(RgDecoder {
            basis: CellBasis::new(lattice_modulus)?,
            config,
            exact_bound: EnumerationBound::default(),
        })
    }

    pub fn with_exact_bound(mut self, bound: EnumerationBound) -> Self {
        self.exact_bound = bound;
        self
    }

    pub fn basis(&self) -> &CellBasis {
        &self.basis
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    /// One RG round: `L -> L/2`.
    pub fn renormalize(
        &self,
        lattice: &TorusLattice,
        geometry: &CellGeometry,
        syndrome: &Syndrome,
        noise: &NoiseModel,
        level: usize,
    ) -> Result<Renormalized> {
        let m = lattice.modulus();
        let d = m.as_usize();
        if syndrome.len() != lattice.num_plaquettes() {
            return Err(Error::LengthMismatch {
                expected: lattice.num_plaquettes(),
                found: syndrome.len(),
            });
        }
        if noise.num_edges() != lattice.num_edges() {
            return Err(Error::LengthMismatch {
                expected: lattice.num_edges(),
                found: noise.num_edges(),
            });
        }
        let exec = self.config.cell_execution;
        let cells: Vec<CellInput> = par::map(exec, geometry.num_cells(), |c| CellInput {
            defect: geometry.defect(c, syndrome.charges()),
            noise: CellNoise::gather(noise, geometry.qudits(c)),
        });

        let degenerate = |c: usize| {
            let (x, y) = geometry.cell_coords(c);
            Error::DegenerateCell { x, y, level }
        };
        let (messages, stats) = if self.config.bp_rounds > 0 {
            let (msgs, stats) =
                bp_rounds(&self.basis, &cells, geometry, self.config.bp_rounds, exec).map_err(
                    |e| match e {
                        Error::DegenerateCell { x, y, .. } => Error::DegenerateCell { x, y, level },
                        other => other,
                    },
                )?;
            (Some(msgs), stats)
        } else {
            (None, BpStats::default())
        };

        let marginals = par::try_map(exec, cells.len(), |c| {
            let msg = messages.as_ref().map(|m| &m[c]);
            cell_marginal_detailed(&self.basis, cells[c].defect, &cells[c].noise, msg)
                .map_err(|_| degenerate(c))
        })?;

        let coarse = TorusLattice::with_modulus(geometry.coarse_size(), m)?;
        let mut probs = vec![0.0; coarse.num_edges() * d];
        let mut log_mass = 0.0;
        let mut log_domain_cells = 0;
        for (c, cm) in marginals.iter().enumerate() {
            let [eh, ev] = geometry.coarse_edges(c);
            probs[eh * d..(eh + 1) * d].copy_from_slice(cm.flow.first_marginal().probs());
            probs[ev * d..(ev + 1) * d].copy_from_slice(cm.flow.second_marginal().probs());
            log_mass += cm.log_mass;
            log_domain_cells += cm.used_log_domain as usize;
        }
        Ok(Renormalized {
            syndrome: lattice.coarse_grain(syndrome)?,
            noise: NoiseModel::from_flat(m, probs),
            lattice: coarse,
            diagnostics: LevelDiagnostics {
                size: lattice.size(),
                log_mass,
                log_domain_cells,
                bp_uniform_fallbacks: stats.uniform_fallbacks,
            },
        })
    }

    /// Full decode. The returned label is the absolute winding estimate,
    /// directly comparable to [`TorusLattice::winding`] of the physical error.
    pub fn decode(
        &self,
        lattice: &TorusLattice,
        syndrome: &Syndrome,
        noise: &NoiseModel,
    ) -> Result<DecodeOutcome> {
        if lattice.modulus() != self.basis.modulus() {
            return Err(Error::ModulusMismatch {
                left: self.basis.modulus().get(),
                right: lattice.modulus().get(),
            });
        }
        let total = syndrome.total();
        if total != 0 {
            return Err(Error::ChargeNotNeutral(total));
        }
        let levels = self.config.levels_for(lattice.size())?;

        let mut diagnostics = Vec::with_capacity(levels);
        let mut current: Option<Renormalized> = None;
        for level in 0..levels {
            let (lat, syn, nz) = match &current {
                Some(r) => (&r.lattice, &r.syndrome, &r.noise),
                None => (lattice, syndrome, noise),
            };
            let geometry = CellGeometry::new(lat)?;
            let next = self.renormalize(lat, &geometry, syn, nz, level)?;
            diagnostics.push(next.diagnostics.clone());
            current = Some(next);
        }
        let (lat, syn, nz) = match &current {
            Some(r) => (&r.lattice, &r.syndrome, &r.noise),
            None => (lattice, syndrome, noise),
        };
        let relative = exact_class_probabilities_bounded(lat, syn, nz, self.exact_bound)?;
        let offset = lat.winding(&lat.canonical_representative(syn)?)?;
        let class_probs = relative.shifted(offset);
        Ok(DecodeOutcome {
            argmax: class_probs.argmax(),
            class_probs,
            levels_used: levels,
            diagnostics,
        })
    }
}

/// Convenience wrapper building a fresh decoder.
pub fn decode(
    lattice: &TorusLattice,
    syndrome: &Syndrome,
    noise: &NoiseModel,
    config: DecoderConfig,
) -> Result<DecodeOutcome> {
    RgDecoder::new(lattice.modulus(), config)?.decode(lattice, syndrome, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zd::{XOperator, Zd};

    fn z(d: u32) -> Zd {
        Zd::new(d).unwrap()
    }

    #[test]
    fn level_counting() {
        let c = DecoderConfig::default();
        assert_eq!(c.levels_for(2).unwrap(), 0);
        assert_eq!(c.levels_for(32).unwrap(), 4);
        assert!(c.levels_for(12).is_err());
        assert!(c.levels_for(3).is_err());
        let c4 = DecoderConfig { base_size: 4, ..c };
        assert_eq!(c4.levels_for(16).unwrap(), 2);
        assert!(c4.levels_for(8 * 3).is_err());
    }

    #[test]
    fn noiseless_renormalization() {
        let lat = TorusLattice::new(8, 3).unwrap();
        let m = lat.modulus();
        let geo = CellGeometry::new(&lat).unwrap();
        let noise = NoiseModel::bitflip(m, 0.0, lat.num_edges()).unwrap();
        let dec = RgDecoder::new(m, DecoderConfig::default()).unwrap();
        let r = dec
            .renormalize(&lat, &geo, &Syndrome::zero(m, 64), &noise, 0)
            .unwrap();
        assert!(r.syndrome.is_trivial());
        assert_eq!(r.lattice.size(), 4);
        for e in 0..r.noise.num_edges() {
            assert_eq!(r.noise.edge(e), &[1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn interior_defect_pair_cancels_in_coarse_syndrome() {
        let lat = TorusLattice::new(8, 3).unwrap();
        let m = lat.modulus();
        let geo = CellGeometry::new(&lat).unwrap();
        // Local qudit 3 of cell (1, 1) separates NW and NE.
        let mut err = XOperator::identity(m, lat.num_edges());
        err.apply(geo.qudits(geo.cell(1, 1))[3], 1);
        let s = lat.syndrome(&err).unwrap();
        assert_eq!(s.charges().iter().filter(|&&c| c != 0).count(), 2);
        let noise = NoiseModel::bitflip(m, 0.05, lat.num_edges()).unwrap();
        let dec = RgDecoder::new(m, DecoderConfig::default().with_bp_rounds(0)).unwrap();
        let r = dec.renormalize(&lat, &geo, &s, &noise, 0).unwrap();
        assert!(r.syndrome.is_trivial());
    }

    #[test]
    fn zero_syndrome_decodes_to_identity_class() {
        for d in [2, 3, 5] {
            let lat = TorusLattice::new(8, d).unwrap();
            let m = lat.modulus();
            let noise = NoiseModel::bitflip(m, 0.05, lat.num_edges()).unwrap();
            for rounds in [0, 3] {
                let out = decode(
                    &lat,
                    &Syndrome::zero(m, 64),
                    &noise,
                    DecoderConfig::default().with_bp_rounds(rounds),
                )
                .unwrap();
                assert_eq!(out.argmax, ClassLabel::new(0, 0));
                assert_eq!(out.levels_used, 2);
                let s: f64 = out.class_probs.probs().iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let lat = TorusLattice::new(12, 2).unwrap();
        let m = lat.modulus();
        let noise = NoiseModel::bitflip(m, 0.05, lat.num_edges()).unwrap();
        assert!(decode(
            &lat,
            &Syndrome::zero(m, 144),
            &noise,
            DecoderConfig::default()
        )
        .is_err());
        let lat = TorusLattice::new(4, 2).unwrap();
        let mut bad = vec![0u8; 16];
        bad[0] = 1;
        let noise = NoiseModel::bitflip(m, 0.05, lat.num_edges()).unwrap();
        assert!(matches!(
            decode(
                &lat,
                &Syndrome::new(m, bad),
                &noise,
                DecoderConfig::default()
            ),
            Err(Error::ChargeNotNeutral(1))
        ));
        let wrong = NoiseModel::bitflip(z(3), 0.05, lat.num_edges()).unwrap();
        assert!(decode(
            &lat,
            &Syndrome::zero(m, 16),
            &wrong,
            DecoderConfig::default()
        )
        .is_err());
    }
}
