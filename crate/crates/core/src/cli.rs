//! Command-line interface: `plan`, `bound-curve`, `simulate`, `fit` and
//! `verify`.
//!
//! Every command that writes files also writes a `<command>.manifest.json`
//! next to them recording the resolved configuration, seed, crate version,
//! timestamps and output paths.  With exact expectations (no finite shots)
//! rerunning a manifest's configuration reproduces its outputs bit for bit.

mod verify;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    variance_bound_small_m, variance_bound_spam, variance_bound_spam_derived, variance_bound_spamfree, BoundForm,
    BoundInputs,
};
use crate::error::{invalid, Error, Result};
use crate::planner::{plan, sequences_needed, BoundChoice, PlanReport, PlanRequest, UnitaritySpec, TRIVIAL_VARIANCE};
use crate::simulate::{
    annotate_dataset, fit_decay, run_lengths, shot_noise_report, DecayDataset, Experiment, FitResult, NoiseModel,
    RBConfig, ShotNoiseReport,
};
use crate::twirl::extract_irreps;

pub use verify::{run_verify, CheckResult, VerifyReport, VerifyScope};

/// Version of the CSV/JSON output schemas.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rbvar",
    version,
    about = "Plan sequence counts, evaluate variance bounds and simulate randomized benchmarking"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed (overrides a configuration file's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files and manifests.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Output format for reports and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Number of sequences for a confidence interval of given half-width.
    Plan(PlanArgs),
    /// Tables of bounds and sequence counts over m, r, qubits or unitarity.
    BoundCurve(CurveArgs),
    /// Monte Carlo RB experiment from a JSON configuration.
    Simulate(SimulateArgs),
    /// Fit A f^m to a dataset.
    Fit(FitArgs),
    /// Run the numerical property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundArg {
    Spamfree,
    SmallM,
    /// Short-sequence bound with `u = 1`.
    #[value(name = "small-m-u1")]
    #[serde(rename = "small-m-u1")]
    SmallMU1,
    Spam,
    SpamDerived,
    Trivial,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    /// Failure probability δ.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Half-width ε of the confidence interval.
    #[arg(long)]
    pub epsilon: f64,
    /// Sequence length.
    #[arg(long)]
    pub m: u64,
    /// Infidelity (upper bound).
    #[arg(long)]
    pub r: f64,
    /// Unitarity.
    #[arg(long, conflicts_with = "u_mix")]
    pub u: Option<f64>,
    /// Unitarity as u = λ + (1 − λ) f²; u = 1 when neither is given.
    #[arg(long)]
    pub u_mix: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub qubits: u32,
    /// SPAM factor η (needed by spam and spam-derived).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum, default_value_t = BoundArg::Spamfree)]
    pub bound: BoundArg,
    /// Plan with this variance instead of a bound.
    #[arg(long, conflicts_with = "bound")]
    pub variance: Option<f64>,
    /// Evaluate bounds as printed (f^{m−1}) rather than as derived.
    #[arg(long)]
    pub printed_form: bool,
}

impl PlanArgs {
    pub fn to_request(&self) -> PlanRequest {
        let bound = match (self.variance, self.bound) {
            (Some(v), _) => BoundChoice::Explicit(v),
            (None, BoundArg::Spamfree) => BoundChoice::Spamfree,
            (None, BoundArg::SmallM) => BoundChoice::SmallM { assume_u_one: false },
            (None, BoundArg::SmallMU1) => BoundChoice::SmallM { assume_u_one: true },
            (None, BoundArg::Spam) => BoundChoice::Spam,
            (None, BoundArg::SpamDerived) => BoundChoice::SpamDerived,
            (None, BoundArg::Trivial) => BoundChoice::Trivial,
        };
        PlanRequest {
            delta: self.delta,
            epsilon: self.epsilon,
            m: self.m,
            r: self.r,
            unitarity: match (self.u, self.u_mix) {
                (Some(u), _) => UnitaritySpec::Value(u),
                (None, Some(l)) => UnitaritySpec::Mix(l),
                (None, None) => UnitaritySpec::Value(1.0),
            },
            qubits: self.qubits,
            eta: self.eta,
            bound,
            form: if self.printed_form {
                BoundForm::Printed
            } else {
                BoundForm::Derived
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sweep {
    /// Sequence length, one series per λ.
    M,
    /// Infidelity.
    R,
    /// Qubit count, one series per r in --r-list.
    Qubits,
    /// Unitarity mixing weight λ.
    UMix,
    /// Infidelity × sequence length grid, one grid per λ.
    RmGrid,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long, value_enum)]
    pub sweep: Sweep,
    #[arg(long, default_value_t = 100)]
    pub m: u64,
    #[arg(long, default_value_t = 10_000)]
    pub m_max: u64,
    #[arg(long, default_value_t = 60)]
    pub m_points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 2e-4])]
    pub r_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub r_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub r_max: f64,
    #[arg(long, default_value_t = 30)]
    pub r_points: usize,
    #[arg(long, default_value_t = 1)]
    pub qubits: u32,
    #[arg(long, default_value_t = 10)]
    pub qubits_max: u32,
    /// λ in u = λ + (1 − λ) f² for sweeps that do not vary it.
    #[arg(long, default_value_t = 1.0)]
    pub u_mix: f64,
    /// λ series for the m, u-mix and rm-grid sweeps.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Skip the exact-variance and bound columns.
    #[arg(long)]
    pub no_exact: bool,
    /// Failure probability for the shot-noise report.
    #[arg(long, default_value_t = 0.01)]
    pub delta_l: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Dataset file (`.csv` per-length table or `.json` full dataset).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Qubit count (required for CSV input).
    #[arg(long)]
    pub qubits: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![VerifyScope::All])]
    pub scope: Vec<VerifyScope>,
}

/// Provenance record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

struct OutputSink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl OutputSink {
    fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<Option<BufWriter<File>>> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(name);
        let f = File::create(&path)?;
        self.written.push(path);
        Ok(Some(BufWriter::new(f)))
    }

    fn manifest(&self, command: &str, config: serde_json::Value, seed: Option<u64>, started: f64) -> Result<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let m = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: started,
            finished_unix: unix_now(),
            outputs: self.written.clone(),
        };
        let f = File::create(dir.join(format!("{command}.manifest.json")))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &m)?;
        Ok(())
    }
}

/// Parses arguments and runs the command; returns the process exit code
/// (0 success, 1 failed verification, 2 usage error).  Usage errors are
/// reported on stderr.
pub fn main_with_args<I, T>(args: I, out: &mut (dyn Write + Send)) -> Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    write!(out, "{}", e.render())?;
                    Ok(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        2
                    } else {
                        0
                    })
                }
                _ => {
                    eprint!("{}", e.render());
                    Ok(2)
                }
            };
        }
    };
    run(cli, out)
}

/// Runs a parsed command on a (possibly sized) thread pool.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<i32> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(&cli, out))
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Plan(a) => cmd_plan(a, g, out).map(|_| 0),
        Command::BoundCurve(a) => cmd_bound_curve(a, g, out).map(|_| 0),
        Command::Simulate(a) => cmd_simulate(a, g, out).map(|_| 0),
        Command::Fit(a) => cmd_fit(a, g, out).map(|_| 0),
        Command::Verify(a) => {
            let report = cmd_verify(a, g, out)?;
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn write_json<T: Serialize>(out: &mut (dyn Write + Send), v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_csv_rows<T: Serialize>(out: &mut (dyn Write + Send), rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PlanCsvRow {
    #[serde(rename = "N")]
    n: u64,
    #[serde(rename = "N_raw")]
    n_raw: f64,
    #[serde(rename = "N_trivial")]
    n_trivial: u64,
    variance_used: f64,
    #[serde(rename = "H")]
    h: f64,
    delta: f64,
    epsilon: f64,
    m: u64,
    r: f64,
    u: f64,
    d: u64,
    eta: f64,
}

/// `plan`: prints the report (and writes `plan.json` with a manifest).
pub fn cmd_plan(a: &PlanArgs, g: &GlobalArgs, out: &mut (dyn Write + Send)) -> Result<PlanReport> {
    let started = unix_now();
    let report = plan(&a.to_request())?;
    let row = PlanCsvRow {
        n: report.n,
        n_raw: report.n_raw,
        n_trivial: report.n_trivial,
        variance_used: report.variance_used,
        h: report.h_value,
        delta: report.inputs.delta,
        epsilon: report.inputs.epsilon,
        m: report.inputs.m,
        r: report.inputs.r,
        u: report.inputs.u,
        d: report.inputs.d,
        eta: report.inputs.eta,
    };
    match g.format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv_rows(out, &[&row])?,
    }
    let mut sink = OutputSink::new(g.output_dir.clone())?;
    if let Some(mut w) = sink.create("plan.json")? {
        serde_json::to_writer_pretty(&mut w, &report)?;
    }
    if let Some(w) = sink.create("plan.csv")? {
        write_csv_rows(&mut { w }, &[&row])?;
    }
    sink.manifest("plan", serde_json::to_value(a)?, None, started)?;
    Ok(report)
}

/// One row of a bound-curve table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub qubits: u32,
    pub d: u64,
    pub m: u64,
    pub r: f64,
    pub lambda: f64,
    pub f: f64,
    pub u: f64,
    pub bound_spamfree: f64,
    pub bound_small_m: f64,
    pub bound_spam: f64,
    pub bound_spam_derived: f64,
    pub trivial_quarter: f64,
    #[serde(rename = "N_spamfree")]
    pub n_spamfree: Option<u64>,
    #[serde(rename = "N_small_m")]
    pub n_small_m: Option<u64>,
    #[serde(rename = "N_spam")]
    pub n_spam: Option<u64>,
    #[serde(rename = "N_spam_derived")]
    pub n_spam_derived: Option<u64>,
    #[serde(rename = "N_trivial")]
    pub n_trivial: Option<u64>,
}

/// Bounds and sequence counts at one parameter point.
pub fn curve_row(qubits: u32, m: u64, r: f64, lambda: f64, eta: f64, delta: f64, eps: f64) -> Result<CurveRow> {
    if qubits == 0 || qubits > crate::planner::MAX_PLAN_QUBITS {
        return Err(invalid(
            "qubits",
            format!("must lie in 1..={}", crate::planner::MAX_PLAN_QUBITS),
        ));
    }
    let d = 1u64 << qubits;
    let inp = BoundInputs::with_unitarity_mix(r, lambda, d, m, eta)?;
    let n_for = |v: f64| sequences_needed(delta, eps, v).ok();
    let (b0, b1, b2, b3) = (
        variance_bound_spamfree(&inp),
        variance_bound_small_m(&inp, false),
        variance_bound_spam(&inp),
        variance_bound_spam_derived(&inp),
    );
    Ok(CurveRow {
        qubits,
        d,
        m,
        r,
        lambda,
        f: inp.f(),
        u: inp.u,
        bound_spamfree: b0,
        bound_small_m: b1,
        bound_spam: b2,
        bound_spam_derived: b3,
        trivial_quarter: TRIVIAL_VARIANCE,
        n_spamfree: n_for(b0),
        n_small_m: n_for(b1),
        n_spam: n_for(b2),
        n_spam_derived: n_for(b3),
        n_trivial: n_for(TRIVIAL_VARIANCE),
    })
}

fn log_grid_u64(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<u64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as u64)
        .collect();
    v.dedup();
    v
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Rows for the requested sweep.
pub fn bound_curve_rows(a: &CurveArgs) -> Result<Vec<CurveRow>> {
    let row = |q: u32, m: u64, r: f64, l: f64| curve_row(q, m, r, l, a.eta, a.delta, a.epsilon);
    let default_lambdas = |v: &[f64]| a.lambdas.clone().unwrap_or_else(|| v.to_vec());
    let mut rows = Vec::new();
    match a.sweep {
        Sweep::M => {
            for l in default_lambdas(&[0.2, 0.4, 0.6, 0.8, 1.0]) {
                for m in log_grid_u64(1, a.m_max.max(1), a.m_points) {
                    rows.push(row(a.qubits, m, a.r, l)?);
                }
            }
        }
        Sweep::R => {
            if !(a.r_min > 0.0 && a.r_max >= a.r_min) {
                return Err(invalid("r_min", "need 0 < r_min ≤ r_max"));
            }
            for r in log_grid(a.r_min, a.r_max, a.r_points) {
                rows.push(row(a.qubits, a.m, r, a.u_mix)?);
            }
        }
        Sweep::Qubits => {
            for &r in &a.r_list {
                for q in 1..=a.qubits_max {
                    rows.push(row(q, a.m, r, a.u_mix)?);
                }
            }
        }
        Sweep::UMix => {
            for l in default_lambdas(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]) {
                rows.push(row(a.qubits, a.m, a.r, l)?);
            }
        }
        Sweep::RmGrid => {
            if !(a.r_min > 0.0 && a.r_max >= a.r_min) {
                return Err(invalid("r_min", "need 0 < r_min ≤ r_max"));
            }
            let step = (a.m_max / a.m_points.max(1) as u64).max(1);
            for l in default_lambdas(&[1.0, 0.5]) {
                for r in log_grid(a.r_min, a.r_max, a.r_points) {
                    let mut m = 1;
                    while m <= a.m_max {
                        rows.push(row(a.qubits, m, r, l)?);
                        m += step;
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// `bound-curve`: prints the table (and writes `bound_curve.csv`).
pub fn cmd_bound_curve(a: &CurveArgs, g: &GlobalArgs, out: &mut (dyn Write + Send)) -> Result<Vec<CurveRow>> {
    let started = unix_now();
    let rows = bound_curve_rows(a)?;
    match g.format {
        Format::Json => write_json(out, &rows)?,
        Format::Csv => write_csv_rows(out, &rows)?,
    }
    let mut sink = OutputSink::new(g.output_dir.clone())?;
    if let Some(w) = sink.create("bound_curve.csv")? {
        write_csv_rows(&mut { w }, &rows)?;
    }
    sink.manifest("bound_curve", serde_json::to_value(a)?, None, started)?;
    Ok(rows)
}

/// Summary printed by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub dataset: DecayDataset,
    pub fit: Option<FitResult>,
    pub shot_noise: Option<ShotNoiseReport>,
    pub manifest: Option<PathBuf>,
}

/// `simulate`: runs the configured experiment and writes `dataset.csv`,
/// `dataset.json` (and `sequences.csv` when recorded) plus a manifest into
/// the output directory (default: current directory).
pub fn cmd_simulate(a: &SimulateArgs, g: &GlobalArgs, out: &mut (dyn Write + Send)) -> Result<SimulationSummary> {
    let started = unix_now();
    let mut cfg = RBConfig::from_json_reader(BufReader::new(File::open(&a.config)?))?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let exp = Experiment::from_config(&cfg)?;
    let mut ds = run_lengths(&exp, &cfg.m_list, cfg.n, cfg.seed, cfg.record_sequences)?;
    if !a.no_exact && cfg.qubits <= 2 && matches!(exp.noise, NoiseModel::Uniform(_)) {
        let dec = extract_irreps(cfg.qubits)?;
        annotate_dataset(&mut ds, &exp, &dec)?;
    }
    let d = 1u64 << cfg.qubits;
    let fit = fit_decay(&ds, d).ok();
    let shot_noise = match cfg.shots {
        Some(l) => Some(shot_noise_report(l, cfg.n, a.delta_l)?),
        None => None,
    };
    let dir = g.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut sink = OutputSink::new(Some(dir.clone()))?;
    if let Some(w) = sink.create("dataset.csv")? {
        ds.write_csv(w)?;
    }
    if let Some(mut w) = sink.create("dataset.json")? {
        serde_json::to_writer_pretty(&mut w, &ds)?;
    }
    if ds.sequences.is_some() {
        if let Some(w) = sink.create("sequences.csv")? {
            ds.write_sequences_csv(w)?;
        }
    }
    sink.manifest("simulate", serde_json::to_value(&cfg)?, Some(cfg.seed), started)?;
    let mut summary = SimulationSummary {
        schema_version: SCHEMA_VERSION,
        dataset: ds,
        fit,
        shot_noise,
        manifest: Some(dir.join("simulate.manifest.json")),
    };
    match g.format {
        Format::Json => {
            // Per-sequence records stay in sequences.csv.
            let seqs = summary.dataset.sequences.take();
            write_json(out, &summary)?;
            summary.dataset.sequences = seqs;
        }
        Format::Csv => summary.dataset.write_csv(&mut *out)?,
    }
    Ok(summary)
}

/// Loads a dataset from `.json` (full) or `.csv` (per-length table).
pub fn load_dataset(path: &Path, qubits: Option<usize>) -> Result<DecayDataset> {
    let is_json = path.extension().and_then(|e| e.to_str()) == Some("json");
    let f = BufReader::new(File::open(path)?);
    if is_json {
        let ds: DecayDataset = serde_json::from_reader(f)?;
        if let Some(q) = qubits {
            if q != ds.qubits {
                return Err(Error::QubitMismatch {
                    left: q,
                    right: ds.qubits,
                });
            }
        }
        Ok(ds)
    } else {
        let q = qubits.ok_or_else(|| invalid("qubits", "required when fitting a CSV dataset"))?;
        DecayDataset::read_csv(f, q)
    }
}

/// `fit`: prints `A`, `f̂`, `r̂`.
pub fn cmd_fit(a: &FitArgs, g: &GlobalArgs, out: &mut (dyn Write + Send)) -> Result<FitResult> {
    let started = unix_now();
    let ds = load_dataset(&a.dataset, a.qubits)?;
    if ds.qubits == 0 || ds.qubits > 62 {
        return Err(invalid("qubits", format!("unsupported qubit count {}", ds.qubits)));
    }
    let fit = fit_decay(&ds, 1u64 << ds.qubits)?;
    match g.format {
        Format::Json => write_json(out, &fit)?,
        Format::Csv => write_csv_rows(out, &[&fit])?,
    }
    let mut sink = OutputSink::new(g.output_dir.clone())?;
    if let Some(mut w) = sink.create("fit.json")? {
        serde_json::to_writer_pretty(&mut w, &fit)?;
    }
    sink.manifest("fit", serde_json::to_value(a)?, None, started)?;
    Ok(fit)
}

/// `verify`: prints one line per check (or the JSON report).
pub fn cmd_verify(a: &VerifyArgs, g: &GlobalArgs, out: &mut (dyn Write + Send)) -> Result<VerifyReport> {
    let started = unix_now();
    let seed = g.seed.unwrap_or(0);
    let report = run_verify(&a.scope, seed)?;
    match g.format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv_rows(out, &report.checks)?,
    }
    let mut sink = OutputSink::new(g.output_dir.clone())?;
    if let Some(mut w) = sink.create("verify.json")? {
        serde_json::to_writer_pretty(&mut w, &report)?;
    }
    sink.manifest("verify", serde_json::to_value(a)?, Some(seed), started)?;
    Ok(report)
}
