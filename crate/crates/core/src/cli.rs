//! Command-line front end: argument and config-file parsing, validation and
//! dispatch to the harness.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{enumerate_class_probabilities, EnumerationBound};
use crate::fit::{near_crossing, threshold_fit, FitPoint, FitResult};
use crate::harness::{self, PGrid, SweepRow, SweepSpec, DEFAULT_TRIALS};
use crate::hashing::{hashing_bound, rescaled_hashing_curve, RescaledCurve};
use crate::lattice::TorusLattice;
use crate::noise::{NoiseModel, QuditDistribution};
use crate::par::{self, Execution};
use crate::rg::{DecoderConfig, RgDecoder, DEFAULT_BASE_SIZE, DEFAULT_BP_ROUNDS};
use crate::zd::Zd;

pub const OUT_DIR_ENV: &str = "ZDTORIC_OUT_DIR";
pub const WORKERS_ENV: &str = "ZDTORIC_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "zdtoric",
    version,
    about = "Z_d toric code threshold simulations"
)]
#[command(propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the decoding failure rate at one (d, L, p) point
    Simulate(SweepArgs),
    /// Estimate failure rates over a d × L × p grid and write CSV
    Sweep(SweepArgs),
    /// Fit thresholds to sweep CSV files
    Fit(FitArgs),
    /// Tabulate the qudit hashing bound C_d
    HashingBound(HashingArgs),
    /// Compare the base-case decoder against full enumeration on L = 2
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct OutputArgs {
    /// Output file (stdout if omitted); relative paths resolve against
    /// $ZDTORIC_OUT_DIR when it is set
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace the output file if it exists
    #[arg(long)]
    pub force: bool,
    /// Worker threads [default: available parallelism]
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// No progress output
    #[arg(short, long)]
    pub quiet: bool,
    /// More progress output
    #[arg(short, long, action = ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SweepArgs {
    /// TOML file supplying defaults for any flag below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Qudit dimensions: `3`, `2,3` or `2..6`
    #[arg(long)]
    pub d: Option<String>,
    /// Lattice sizes, comma separated; each must be base_size · 2^k
    #[arg(long = "L")]
    pub sizes: Option<String>,
    /// Physical error rates as `min:max:count`, or one value
    #[arg(long)]
    pub p: Option<String>,
    /// Trials per point [default: 10000]
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Belief-propagation rounds before each RG step [default: 3]
    #[arg(long)]
    pub bp_rounds: Option<usize>,
    /// Lattice size at which exact decoding takes over [default: 2]
    #[arg(long)]
    pub base_size: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Sweep CSV files
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Half-width of the near-crossing fit window [default: a quarter of the swept range]
    #[arg(long)]
    pub window: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct HashingArgs {
    /// Qudit dimensions: `3`, `2,3` or `2..6`
    #[arg(long, default_value = "2..6")]
    pub d: String,
    /// Measured d = 2 threshold; adds the rescaled column α·C_d
    #[arg(long)]
    pub p_th2: Option<f64>,
    /// Emit JSON instead of a table
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    /// Qudit dimensions: `3`, `2,3` or `2..4`
    #[arg(long, default_value = "2,3")]
    pub d: String,
    /// Random instances per dimension
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest allowed elementwise deviation
    #[arg(long, default_value_t = 1e-12)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Values accepted in a TOML config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<IntList>,
    #[serde(rename = "L")]
    pub sizes: Option<IntList>,
    pub p: Option<PSpec>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub bp_rounds: Option<usize>,
    pub base_size: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum IntList {
    One(u64),
    Many(Vec<u64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PSpec {
    Value(f64),
    Grid(PGrid),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Simulate(SweepSpec),
    Sweep(SweepSpec),
    Fit {
        inputs: Vec<PathBuf>,
        window: Option<f64>,
    },
    HashingBound {
        d: Vec<u32>,
        p_th2: Option<f64>,
        json: bool,
    },
    OracleCheck {
        d: Vec<u32>,
        samples: usize,
        seed: u64,
        tolerance: f64,
    },
}

/// A fully validated invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub workers: usize,
    /// 0 silent, 1 progress, 2 detailed.
    pub verbosity: u8,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// Parses `3`, `2,3,5` or `2..6` (inclusive).
pub fn parse_int_list(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo: u64 = a
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range start in `{text}`")))?;
        let hi: u64 = b
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad range end in `{text}`")))?;
        if lo > hi {
            return Err(bad(format!("empty range `{text}`")));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| bad(format!("`{t}` is not a non-negative integer")))
        })
        .collect()
}

/// Parses `min:max:count` or a single probability.
pub fn parse_p_grid(text: &str) -> Result<PGrid> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| bad(format!("`{s}` is not a number in p grid `{text}`")))
    };
    let grid = match parts.as_slice() {
        [p] => {
            let p = num(p)?;
            PGrid {
                min: p,
                max: p,
                count: 1,
            }
        }
        [a, b, n] => PGrid {
            min: num(a)?,
            max: num(b)?,
            count: n
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{n}` is not a point count")))?,
        },
        _ => {
            return Err(bad(format!(
                "p grid `{text}` must be `min:max:count` or a value"
            )))
        }
    };
    grid.validate()?;
    Ok(grid)
}

fn int_list(v: &IntList) -> Result<Vec<u64>> {
    match v {
        IntList::One(x) => Ok(vec![*x]),
        IntList::Many(xs) => Ok(xs.clone()),
        IntList::Text(t) => parse_int_list(t),
    }
}

fn narrow<T: TryFrom<u64>>(xs: Vec<u64>, what: &str) -> Result<Vec<T>> {
    xs.into_iter()
        .map(|x| T::try_from(x).map_err(|_| bad(format!("{what} value {x} is out of range"))))
        .collect()
}

fn load_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn resolve_output(out: &OutputArgs, file_out: Option<PathBuf>) -> Option<PathBuf> {
    let path = out.out.clone().or(file_out)?;
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Some(PathBuf::from(dir).join(path)),
        _ => Some(path),
    }
}

fn workers(out: &OutputArgs, file_workers: Option<usize>) -> Result<usize> {
    let n = out
        .workers
        .or(file_workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(bad("workers must be at least 1"));
    }
    Ok(n)
}

fn verbosity(out: &OutputArgs) -> u8 {
    if out.quiet {
        0
    } else {
        1 + out.verbose
    }
}

fn sweep_spec(args: &SweepArgs, file: &FileConfig) -> Result<SweepSpec> {
    let d = match (&args.d, &file.d) {
        (Some(t), _) => parse_int_list(t)?,
        (None, Some(v)) => int_list(v)?,
        (None, None) => return Err(bad("--d is required")),
    };
    let sizes = match (&args.sizes, &file.sizes) {
        (Some(t), _) => parse_int_list(t)?,
        (None, Some(v)) => int_list(v)?,
        (None, None) => return Err(bad("--L is required")),
    };
    let p = match (&args.p, &file.p) {
        (Some(t), _) => parse_p_grid(t)?,
        (None, Some(PSpec::Text(t))) => parse_p_grid(t)?,
        (None, Some(PSpec::Value(v))) => PGrid {
            min: *v,
            max: *v,
            count: 1,
        },
        (None, Some(PSpec::Grid(g))) => *g,
        (None, None) => return Err(bad("--p is required")),
    };
    let spec = SweepSpec {
        d: narrow(d, "d")?,
        sizes: narrow(sizes, "L")?,
        p,
        trials: args.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
        decoder: DecoderConfig {
            bp_rounds: args
                .bp_rounds
                .or(file.bp_rounds)
                .unwrap_or(DEFAULT_BP_ROUNDS),
            base_size: args
                .base_size
                .or(file.base_size)
                .unwrap_or(DEFAULT_BASE_SIZE),
            cell_execution: Execution::Sequential,
        },
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}

fn dims(text: &str, max: u32) -> Result<Vec<u32>> {
    let d: Vec<u32> = narrow(parse_int_list(text)?, "d")?;
    if let Some(&bad_d) = d.iter().find(|&&d| d < 2 || d > max) {
        return Err(bad(format!("d = {bad_d} is outside 2..={max}")));
    }
    Ok(d)
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        match cli.command {
            Command::Simulate(args) => {
                let file = match &args.config {
                    Some(p) => load_file_config(p)?,
                    None => FileConfig::default(),
                };
                let spec = sweep_spec(&args, &file)?;
                if spec.points().len() != 1 {
                    return Err(bad(
                        "simulate takes a single d, L and p; use sweep for grids",
                    ));
                }
                Ok(RunConfig {
                    out: resolve_output(&args.output, file.out.clone()),
                    force: args.output.force,
                    workers: workers(&args.output, file.workers)?,
                    verbosity: verbosity(&args.output),
                    task: Task::Simulate(spec),
                })
            }
            Command::Sweep(args) => {
                let file = match &args.config {
                    Some(p) => load_file_config(p)?,
                    None => FileConfig::default(),
                };
                let spec = sweep_spec(&args, &file)?;
                Ok(RunConfig {
                    out: resolve_output(&args.output, file.out.clone()),
                    force: args.output.force,
                    workers: workers(&args.output, file.workers)?,
                    verbosity: verbosity(&args.output),
                    task: Task::Sweep(spec),
                })
            }
            Command::Fit(args) => {
                if let Some(w) = args.window {
                    if !(w.is_finite() && w > 0.0) {
                        return Err(bad("--window must be positive"));
                    }
                }
                Ok(RunConfig {
                    out: resolve_output(&args.output, None),
                    force: args.output.force,
                    workers: workers(&args.output, None)?,
                    verbosity: verbosity(&args.output),
                    task: Task::Fit {
                        inputs: args.inputs,
                        window: args.window,
                    },
                })
            }
            Command::HashingBound(args) => {
                if let Some(p) = args.p_th2 {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(bad("--p-th2 must lie in (0, 1)"));
                    }
                }
                Ok(RunConfig {
                    out: resolve_output(&args.output, None),
                    force: args.output.force,
                    workers: workers(&args.output, None)?,
                    verbosity: verbosity(&args.output),
                    task: Task::HashingBound {
                        d: dims(&args.d, 255)?,
                        p_th2: args.p_th2,
                        json: args.json,
                    },
                })
            }
            Command::OracleCheck(args) => {
                if args.samples == 0 {
                    return Err(bad("--samples must be at least 1"));
                }
                Ok(RunConfig {
                    out: resolve_output(&args.output, None),
                    force: args.output.force,
                    workers: workers(&args.output, None)?,
                    verbosity: verbosity(&args.output),
                    task: Task::OracleCheck {
                        // d^8 enumeration: 4^8 is the practical ceiling.
                        d: dims(&args.d, 4)?,
                        samples: args.samples,
                        seed: args.seed,
                        tolerance: args.tolerance,
                    },
                })
            }
        }
    }
}

/// Parses an argument vector (program name first) into a validated config.
pub fn parse_and_validate<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| bad(e.to_string().trim().to_string()))?;
    RunConfig::from_cli(cli)
}

fn open_output(path: &Option<PathBuf>, force: bool) -> Result<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(io::stdout().lock())),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut opts = OpenOptions::new();
            opts.write(true);
            if force {
                opts.create(true).truncate(true);
            } else {
                opts.create_new(true);
            }
            let f = opts.open(p).map_err(|e| {
                if e.kind() == io::ErrorKind::AlreadyExists {
                    Error::Io(format!(
                        "{} already exists; pass --force to replace it",
                        p.display()
                    ))
                } else {
                    Error::Io(format!("{}: {e}", p.display()))
                }
            })?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    d: u32,
    #[serde(rename = "L")]
    size: usize,
    p_phys: f64,
    bp_rounds: usize,
    base_size: usize,
    seed: u64,
    #[serde(flatten)]
    estimate: harness::Estimate,
}

/// One fitted `(d, bp_rounds)` group.
#[derive(Debug, Serialize)]
pub struct FitEntry {
    pub d: u32,
    pub bp_rounds: usize,
    /// `p` range of the points used for `fit`.
    pub window: (f64, f64),
    pub fit: FitResult,
    /// Fit over every point of the group, for comparison.
    pub full_range_fit: Option<FitResult>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub fits: Vec<FitEntry>,
    /// Present when a d = 2 fit exists.
    pub rescaled_hashing: Option<RescaledCurve>,
}

/// Fits each `(d, bp_rounds)` group of `rows` within the near-crossing
/// window.
pub fn fit_rows(rows: &[SweepRow], window: Option<f64>) -> Result<FitReport> {
    let mut groups: BTreeMap<(u32, usize), Vec<FitPoint>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.d, r.bp_rounds))
            .or_default()
            .push(FitPoint::from_row(r));
    }
    if groups.is_empty() {
        return Err(Error::FitFailure("no sweep rows to fit".into()));
    }
    let mut fits = Vec::new();
    for ((d, bp_rounds), points) in groups {
        let kept = near_crossing(&points, window);
        let lo = kept.iter().map(|p| p.p_phys).fold(f64::INFINITY, f64::min);
        let hi = kept
            .iter()
            .map(|p| p.p_phys)
            .fold(f64::NEG_INFINITY, f64::max);
        let fit = threshold_fit(&kept)
            .map_err(|e| Error::FitFailure(format!("d = {d}, bp_rounds = {bp_rounds}: {e}")))?;
        fits.push(FitEntry {
            d,
            bp_rounds,
            window: (lo, hi),
            fit,
            full_range_fit: threshold_fit(&points).ok(),
        });
    }
    let thresholds: BTreeMap<u32, f64> = fits.iter().map(|f| (f.d, f.fit.p_th)).collect();
    let rescaled_hashing = if thresholds.contains_key(&2) {
        Some(rescaled_hashing_curve(&thresholds, &[])?)
    } else {
        None
    };
    Ok(FitReport {
        fits,
        rescaled_hashing,
    })
}

/// One dimension's oracle comparison.
#[derive(Clone, Debug, Serialize)]
pub struct OracleOutcome {
    pub d: u32,
    pub samples: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Random per-edge noise and syndromes on the `L = 2` torus; compares the
/// decoder's base case against summing all `d^8` errors.
pub fn oracle_check(d: u32, samples: usize, seed: u64, tolerance: f64) -> Result<OracleOutcome> {
    let m = Zd::new(d)?;
    let lattice = TorusLattice::with_modulus(2, m)?;
    let decoder = RgDecoder::new(m, DecoderConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ d as u64);
    let mut max_deviation: f64 = 0.0;
    for _ in 0..samples {
        let dists: Vec<QuditDistribution> = (0..lattice.num_edges())
            .map(|_| {
                QuditDistribution::from_weights(
                    (0..d).map(|_| rng.random::<f64>() + 0.01).collect(),
                )
            })
            .collect::<Result<_>>()?;
        let noise = NoiseModel::from_edges(m, &dists)?;
        let error = noise.sample_with(&mut rng);
        let syndrome = lattice.syndrome(&error)?;
        let fast = decoder.decode(&lattice, &syndrome, &noise)?.class_probs;
        let slow = enumerate_class_probabilities(
            &lattice,
            &syndrome,
            &noise,
            EnumerationBound((d as u128).pow(8)),
        )?;
        for (a, b) in fast.probs().iter().zip(slow.probs()) {
            max_deviation = max_deviation.max((a - b).abs());
        }
    }
    Ok(OracleOutcome {
        d,
        samples,
        max_deviation,
        passed: max_deviation <= tolerance,
    })
}

/// Executes a validated config. Returns the process exit status.
pub fn run(config: &RunConfig) -> Result<i32> {
    let exec = if config.workers > 1 {
        par::set_workers(config.workers);
        Execution::best_available()
    } else {
        Execution::Sequential
    };
    let progress = config.verbosity > 0;
    match &config.task {
        Task::Simulate(spec) => {
            let (d, size, p) = spec.points()[0];
            let estimate =
                harness::monte_carlo(d, size, p, spec.trials, spec.seed, spec.decoder, exec)?;
            let report = SimulateReport {
                d,
                size,
                p_phys: p,
                bp_rounds: spec.decoder.bp_rounds,
                base_size: spec.decoder.base_size,
                seed: spec.seed,
                estimate,
            };
            let mut out = open_output(&config.out, config.force)?;
            writeln!(out, "{}", to_json(&report)?)?;
            out.flush()?;
        }
        Task::Sweep(spec) => {
            // Open first so an existing file is rejected before any compute.
            let mut out = open_output(&config.out, config.force)?;
            let total = spec.points().len();
            let mut done = 0;
            let rows = harness::run_sweep(spec, exec, |row| {
                done += 1;
                if progress {
                    eprintln!(
                        "[{done}/{total}] d={} L={} p={} p_dec={:.5} ({}/{})",
                        row.d, row.size, row.p_phys, row.p_dec, row.n_fail, row.n_trials
                    );
                }
            })?;
            harness::write_csv(&mut out, spec, &rows)?;
            out.flush()?;
        }
        Task::Fit { inputs, window } => {
            let mut rows = Vec::new();
            for path in inputs {
                let f =
                    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                rows.extend(harness::read_csv(io::BufReader::new(f))?);
            }
            let report = fit_rows(&rows, *window)?;
            let mut out = open_output(&config.out, config.force)?;
            writeln!(out, "{}", to_json(&report)?)?;
            out.flush()?;
        }
        Task::HashingBound { d, p_th2, json } => {
            let mut rows: Vec<(u32, f64)> = Vec::new();
            for &k in d {
                rows.push((k, hashing_bound(k)?));
            }
            let curve = match p_th2 {
                Some(p) => Some(rescaled_hashing_curve(&BTreeMap::from([(2, *p)]), d)?),
                None => None,
            };
            let mut out = open_output(&config.out, config.force)?;
            if *json {
                #[derive(Serialize)]
                struct Row {
                    d: u32,
                    c_d: f64,
                    #[serde(skip_serializing_if = "Option::is_none")]
                    rescaled: Option<f64>,
                }
                let table: Vec<Row> = rows
                    .iter()
                    .map(|&(k, c)| Row {
                        d: k,
                        c_d: c,
                        rescaled: curve.as_ref().map(|cv| cv.points[&k].1),
                    })
                    .collect();
                let value = serde_json::json!({
                    "alpha": curve.as_ref().map(|c| c.alpha),
                    "bounds": table,
                });
                writeln!(out, "{}", to_json(&value)?)?;
            } else {
                match &curve {
                    Some(c) => {
                        writeln!(out, "# alpha = {:.6}", c.alpha)?;
                        writeln!(out, "d\tC_d\talpha*C_d")?;
                        for (k, v) in &rows {
                            writeln!(out, "{k}\t{v:.6}\t{:.6}", c.points[k].1)?;
                        }
                    }
                    None => {
                        writeln!(out, "d\tC_d")?;
                        for (k, v) in &rows {
                            writeln!(out, "{k}\t{v:.6}")?;
                        }
                    }
                }
            }
            out.flush()?;
        }
        Task::OracleCheck {
            d,
            samples,
            seed,
            tolerance,
        } => {
            let outcomes = par::try_map(exec, d.len(), |i| {
                oracle_check(d[i], *samples, *seed, *tolerance)
            })?;
            let mut out = open_output(&config.out, config.force)?;
            let mut all = true;
            for o in &outcomes {
                all &= o.passed;
                writeln!(
                    out,
                    "{} d={} samples={} max_deviation={:.3e} tolerance={:.1e}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.d,
                    o.samples,
                    o.max_deviation,
                    tolerance
                )?;
            }
            out.flush()?;
            if !all {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// Single-line JSON error record for stderr.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("{}", error_record(&bad(e.to_string().trim().to_string())));
            return 2;
        }
    };
    let config = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            return 2;
        }
    };
    match run(&config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            1
        }
    }
}
