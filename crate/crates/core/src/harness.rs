//! Monte Carlo estimation of decoding failure rates.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ClassLabel, TorusLattice};
use crate::noise::NoiseModel;
use crate::par::{self, Execution};
use crate::rg::{DecoderConfig, LevelDiagnostics, RgDecoder};
use crate::zd::Zd;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub d: u32,
    pub size: usize,
    pub p_phys: f64,
    pub seed: u64,
    pub success: bool,
    /// Set when the decoder reported a degenerate distribution; such trials
    /// count as failures.
    pub flagged: bool,
    pub actual: ClassLabel,
    pub predicted: Option<ClassLabel>,
    pub diagnostics: Vec<LevelDiagnostics>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key identifying a sweep point independently of the decoder settings, so
/// that runs differing only in decoder configuration see the same errors.
pub fn point_key(d: u32, size: usize, p_phys: f64) -> u64 {
    let mut h = splitmix64(d as u64);
    h = splitmix64(h ^ size as u64);
    splitmix64(h ^ p_phys.to_bits())
}

/// Seed of trial `index` at a sweep point.
pub fn trial_seed(master: u64, key: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ key).wrapping_add(index))
}

/// Lattice, noise model and decoder for one `(d, L, p)` point.
#[derive(Clone, Debug)]
pub struct TrialContext {
    pub lattice: TorusLattice,
    pub noise: NoiseModel,
    pub decoder: RgDecoder,
    pub p_phys: f64,
}

impl TrialContext {
    pub fn new(d: u32, size: usize, p_phys: f64, config: DecoderConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_phys) {
            return Err(Error::InvalidProbability(p_phys));
        }
        let m = Zd::new(d)?;
        config.levels_for(size)?;
        let lattice = TorusLattice::with_modulus(size, m)?;
        let noise = NoiseModel::bitflip(m, p_phys, lattice.num_edges())?;
        Ok(TrialContext {
            decoder: RgDecoder::new(m, config)?,
            lattice,
            noise,
            p_phys,
        })
    }

    pub fn run(&self, seed: u64) -> Result<TrialResult> {
        let error = self.noise.sample_error(seed);
        let actual = self.lattice.winding(&error)?;
        let syndrome = self.lattice.syndrome(&error)?;
        let mut result = TrialResult {
            d: self.lattice.modulus().get() as u32,
            size: self.lattice.size(),
            p_phys: self.p_phys,
            seed,
            success: false,
            flagged: false,
            actual,
            predicted: None,
            diagnostics: Vec::new(),
        };
        match self.decoder.decode(&self.lattice, &syndrome, &self.noise) {
            Ok(out) => {
                result.success = out.argmax == actual;
                result.predicted = Some(out.argmax);
                result.diagnostics = out.diagnostics;
            }
            Err(Error::DegenerateCell { .. } | Error::DegenerateDistribution(_)) => {
                result.flagged = true;
            }
            Err(e) => return Err(e),
        }
        Ok(result)
    }
}

pub fn run_trial(
    d: u32,
    size: usize,
    p_phys: f64,
    seed: u64,
    config: DecoderConfig,
) -> Result<TrialResult> {
    TrialContext::new(d, size, p_phys, config)?.run(seed)
}

/// Wilson score interval for `failures` out of `n`.
pub fn wilson_interval(failures: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if failures == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if failures as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n_trials: u64,
    pub n_fail: u64,
    pub n_flagged: u64,
    pub p_dec: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn from_counts(n_trials: u64, n_fail: u64, n_flagged: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(n_fail, n_trials, Z_95);
        Estimate {
            n_trials,
            n_fail,
            n_flagged,
            p_dec: if n_trials == 0 {
                0.0
            } else {
                n_fail as f64 / n_trials as f64
            },
            ci_low,
            ci_high,
        }
    }

    /// Binomial standard error `sqrt(p(1-p)/n)`.
    pub fn std_error(&self) -> f64 {
        (self.p_dec * (1.0 - self.p_dec) / self.n_trials.max(1) as f64).sqrt()
    }
}

/// Runs `n` trials of an arbitrary seeded experiment. `trial` returns
/// `Ok((success, flagged))`.
pub fn monte_carlo_with<F>(
    n: u64,
    master_seed: u64,
    key: u64,
    exec: Execution,
    trial: F,
) -> Result<Estimate>
where
    F: Fn(u64) -> Result<(bool, bool)> + Sync + Send,
{
    if n == 0 {
        return Err(Error::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    let outcomes = par::try_map(exec, n as usize, |i| {
        trial(trial_seed(master_seed, key, i as u64))
    })?;
    let n_fail = outcomes.iter().filter(|o| !o.0).count() as u64;
    let n_flagged = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(Estimate::from_counts(n, n_fail, n_flagged))
}

/// Estimates `p_dec` at one `(d, L, p)` point.
pub fn monte_carlo(
    d: u32,
    size: usize,
    p_phys: f64,
    n_trials: u64,
    master_seed: u64,
    config: DecoderConfig,
    exec: Execution,
) -> Result<Estimate> {
    let ctx = TrialContext::new(d, size, p_phys, config)?;
    monte_carlo_with(
        n_trials,
        master_seed,
        point_key(d, size, p_phys),
        exec,
        |seed| ctx.run(seed).map(|r| (r.success, r.flagged)),
    )
}

/// Evenly spaced physical error rates, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl PGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            // Rounded so that grid values print as typed.
            .map(|i| ((self.min + step * i as f64) * 1e12).round() / 1e12)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |p: f64| p > 0.0 && p < 1.0;
        if self.count == 0 || !inside(self.min) || !inside(self.max) || self.min > self.max {
            return Err(Error::InvalidConfig(format!(
                "p grid {}:{}:{} must satisfy 0 < min <= max < 1 with count >= 1",
                self.min, self.max, self.count
            )));
        }
        if self.count == 1 && self.min != self.max {
            return Err(Error::InvalidConfig(
                "a single-point p grid needs min == max".into(),
            ));
        }
        Ok(())
    }
}

pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d: Vec<u32>,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    pub p: PGrid,
    pub trials: u64,
    pub decoder: DecoderConfig,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidConfig(
                "d and L lists must be non-empty".into(),
            ));
        }
        for &d in &self.d {
            if !(2..=6).contains(&d) {
                return Err(Error::InvalidConfig(format!("d = {d} is outside 2..=6")));
            }
        }
        for &l in &self.sizes {
            self.decoder.levels_for(l)?;
        }
        self.p.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Sweep points in output order: d, then L, then p.
    pub fn points(&self) -> Vec<(u32, usize, f64)> {
        let ps = self.p.points();
        let mut out = Vec::new();
        for &d in &self.d {
            for &l in &self.sizes {
                for &p in &ps {
                    out.push((d, l, p));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: u32,
    #[serde(rename = "L")]
    pub size: usize,
    pub p_phys: f64,
    pub n_trials: u64,
    pub n_fail: u64,
    pub p_dec: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bp_rounds: usize,
    pub seed: u64,
}

/// Runs every point of the sweep, calling `progress` after each.
pub fn run_sweep<P>(spec: &SweepSpec, exec: Execution, mut progress: P) -> Result<Vec<SweepRow>>
where
    P: FnMut(&SweepRow),
{
    spec.validate()?;
    let mut rows = Vec::new();
    for (d, size, p) in spec.points() {
        let est = monte_carlo(d, size, p, spec.trials, spec.seed, spec.decoder, exec)?;
        let row = SweepRow {
            d,
            size,
            p_phys: p,
            n_trials: est.n_trials,
            n_fail: est.n_fail,
            p_dec: est.p_dec,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            bp_rounds: spec.decoder.bp_rounds,
            seed: spec.seed,
        };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Writes the sweep as CSV preceded by a `#` comment block holding the code
/// version and the full configuration.
pub fn write_csv<W: Write>(out: W, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut out = out;
    let config = serde_json::to_string(spec).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(out, "# zdtoric {}", env!("CARGO_PKG_VERSION")).map_err(io)?;
    writeln!(out, "# seed: {}", spec.seed).map_err(io)?;
    writeln!(out, "# config: {config}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Parses CSV produced by [`write_csv`], skipping comment lines.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Io(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_trials_succeed() {
        let cfg = DecoderConfig::default();
        for seed in 0..5 {
            let r = run_trial(3, 8, 0.0, seed, cfg).unwrap();
            assert!(r.success);
            assert!(!r.flagged);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = DecoderConfig::default();
        let a = run_trial(2, 8, 0.1, 77, cfg).unwrap();
        let b = run_trial(2, 8, 0.1, 77, cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(1, 1, Z_95);
        assert!(lo < 0.25 && hi == 1.0);
        let (lo, hi) = wilson_interval(0, 1, Z_95);
        assert!(lo == 0.0 && hi > 0.75);
    }

    #[test]
    fn fair_coin_stub() {
        let est = monte_carlo_with(10_000, 5, 1, Execution::Parallel, |seed| {
            Ok((seed & 1 == 0, false))
        })
        .unwrap();
        assert!((0.49..=0.51).contains(&est.p_dec), "{}", est.p_dec);
        assert!(est.ci_low < 0.5 && est.ci_high > 0.5);
    }

    #[test]
    fn seeds_are_distinct() {
        let key = point_key(2, 8, 0.1);
        let mut seeds: Vec<u64> = (0..1000).map(|i| trial_seed(1, key, i)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(key, point_key(2, 8, 0.11));
        assert_ne!(key, point_key(3, 8, 0.1));
    }

    #[test]
    fn grid_points() {
        let g = PGrid {
            min: 0.10,
            max: 0.16,
            count: 7,
        };
        assert_eq!(g.points(), vec![0.1, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16]);
        assert!(PGrid {
            min: 0.0,
            max: 0.1,
            count: 3
        }
        .validate()
        .is_err());
    }

    #[test]
    fn csv_round_trip() {
        let spec = SweepSpec {
            d: vec![2],
            sizes: vec![4],
            p: PGrid {
                min: 0.05,
                max: 0.1,
                count: 2,
            },
            trials: 20,
            decoder: DecoderConfig::default(),
            seed: 9,
        };
        let rows = run_sweep(&spec, Execution::Sequential, |_| {}).unwrap();
        assert_eq!(rows.len(), 2);
        let mut buf = Vec::new();
        write_csv(&mut buf, &spec, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# zdtoric"));
        assert!(text.contains("d,L,p_phys,n_trials,n_fail,p_dec,ci_low,ci_high,bp_rounds,seed"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
