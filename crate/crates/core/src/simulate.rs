//! Monte Carlo randomized-benchmarking experiments, decay datasets and
//! decay fitting.
//!
//! A sequence of length `m` applies `m` uniformly random Cliffords, each
//! followed by the noise channel (or sandwiched as `L∘G∘R`), then the
//! inverting Clifford.  The inversion is ideal by default; the noise channel
//! after it can be switched on with `noisy_inversion`, which is equivalent to
//! measuring `ℰ†(Q)` instead of `Q`.
//!
//! Every sequence draws its gates from its own ChaCha stream seeded by a
//! hash of `(seed, m, index)`, and results are collected in index order, so
//! datasets are bit-identical for any thread count.

use std::io::{Read, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    eta_exact, variance_bound_small_m, variance_bound_spam, variance_bound_spam_derived, variance_bound_spamfree,
    BoundInputs, MAX_INFIDELITY,
};
use crate::clifford::{sample_clifford_uniform, CliffordElement, SignedPermutation};
use crate::error::{invalid, Error, Result};
use crate::liouville::{dim_of, ChannelMetrics, ChannelSpec, EffectVec, OperatorVec, SpamSetting, Superoperator};
use crate::pauli::NormalizedPauli;
use crate::planner::TRIVIAL_VARIANCE;
use crate::twirl::{clifford_action_table, exact_mean, extract_irreps, IrrepDecomposition};

/// Largest register the simulator accepts (dense `d² × d²` noise action).
pub const MAX_SIM_QUBITS: usize = 4;

/// Version tag written into dataset files.
pub const DATASET_VERSION: u32 = 1;

/// Noise attached to every random gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    /// Noisy gate `L∘G∘R`.
    GateDependent { left: ChannelSpec, right: ChannelSpec },
    /// Noisy gate `ℰ∘G`.
    Uniform(ChannelSpec),
}

/// Resolved noise model.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseModel {
    Uniform(Superoperator),
    Sandwich { left: Superoperator, right: Superoperator },
}

impl NoiseModel {
    pub fn from_spec(spec: &NoiseSpec, q: usize) -> Result<Self> {
        Ok(match spec {
            NoiseSpec::Uniform(c) => NoiseModel::Uniform(c.build(q)?),
            NoiseSpec::GateDependent { left, right } => NoiseModel::Sandwich {
                left: left.build(q)?,
                right: right.build(q)?,
            },
        })
    }

    pub fn qubits(&self) -> usize {
        match self {
            NoiseModel::Uniform(e) => e.qubits(),
            NoiseModel::Sandwich { left, .. } => left.qubits(),
        }
    }

    /// The channel whose metrics govern the decay: `ℰ`, or `R∘L`.
    pub fn effective_channel(&self) -> Result<Superoperator> {
        match self {
            NoiseModel::Uniform(e) => Ok(e.clone()),
            NoiseModel::Sandwich { left, right } => right.compose(left),
        }
    }

    /// Channel applied after the inverting gate when it is noisy.
    fn trailing(&self) -> Result<Superoperator> {
        match self {
            NoiseModel::Uniform(e) => Ok(e.clone()),
            NoiseModel::Sandwich { left, right } => left.compose(right),
        }
    }
}

/// How one of `Q`, `ν` is specified in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpamOperatorSpec {
    /// The literal string `"ideal"`.
    Named(String),
    /// Liouville coefficients of the operator.
    Coefficients(Vec<f64>),
    /// The ideal operator passed through a channel (preparation noise for
    /// `ν`, measurement noise for `Q`).
    Noisy { noise: ChannelSpec },
    /// The ideal operator multiplied by a scalar.
    Scaled { scale: f64 },
}

impl Default for SpamOperatorSpec {
    fn default() -> Self {
        SpamOperatorSpec::Named("ideal".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamSpec {
    pub target_pauli: String,
    #[serde(default)]
    pub nu: SpamOperatorSpec,
    #[serde(default, rename = "Q")]
    pub q: SpamOperatorSpec,
}

impl SpamSpec {
    pub fn ideal(target: &str) -> Self {
        Self {
            target_pauli: target.into(),
            nu: SpamOperatorSpec::default(),
            q: SpamOperatorSpec::default(),
        }
    }

    pub fn build(&self, q: usize) -> Result<SpamSetting> {
        let target: NormalizedPauli = self.target_pauli.parse()?;
        if target.qubits() != q {
            return Err(Error::QubitMismatch {
                left: target.qubits(),
                right: q,
            });
        }
        let ideal = SpamSetting::ideal(target)?;
        let n = dim_of(q) * dim_of(q);
        let coeffs = |c: &Vec<f64>| -> Result<OperatorVec> {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "SPAM coefficients",
                    expected: n,
                    found: c.len(),
                });
            }
            OperatorVec::new(q, DVector::from_column_slice(c))
        };
        let named = |s: &str| -> Result<()> {
            if s == "ideal" {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "unknown SPAM operator `{s}` (expected \"ideal\")"
                )))
            }
        };
        let mut setting = match &self.nu {
            SpamOperatorSpec::Named(s) => {
                named(s)?;
                ideal.clone()
            }
            SpamOperatorSpec::Noisy { noise } => SpamSetting::with_noise(target, Some(&noise.build(q)?), None)?,
            SpamOperatorSpec::Coefficients(c) => {
                SpamSetting::from_effect_and_difference(target, ideal.q.clone(), coeffs(c)?)?
            }
            SpamOperatorSpec::Scaled { scale } => {
                SpamSetting::from_effect_and_difference(target, ideal.q.clone(), ideal.nu.scale(*scale))?
            }
        };
        setting.q = match &self.q {
            SpamOperatorSpec::Named(s) => {
                named(s)?;
                ideal.q.clone()
            }
            SpamOperatorSpec::Noisy { noise } => ideal.q.evolve_heisenberg(&noise.build(q)?)?,
            SpamOperatorSpec::Coefficients(c) => coeffs(c)?,
            SpamOperatorSpec::Scaled { scale } => ideal.q.scale(*scale),
        };
        Ok(setting)
    }
}

fn default_n() -> u64 {
    100
}

/// Full description of a simulated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RBConfig {
    pub qubits: usize,
    pub m_list: Vec<u64>,
    #[serde(rename = "N", default = "default_n")]
    pub n: u64,
    pub noise: NoiseSpec,
    pub spam: SpamSpec,
    /// Repetitions per sequence; `None` means exact expectation values.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noisy_inversion: bool,
    #[serde(default)]
    pub record_sequences: bool,
}

impl RBConfig {
    pub fn validate(&self) -> Result<()> {
        if self.qubits == 0 || self.qubits > MAX_SIM_QUBITS {
            return Err(Error::TooManyQubits {
                op: "simulation",
                max: MAX_SIM_QUBITS,
                q: self.qubits,
            });
        }
        if self.m_list.is_empty() {
            return Err(invalid("m_list", "need at least one sequence length"));
        }
        if self.m_list.contains(&0) {
            return Err(invalid("m_list", "sequence lengths must be at least 1"));
        }
        if self.n < 2 {
            return Err(invalid(
                "N",
                "need at least two sequences per length for a sample variance",
            ));
        }
        if self.shots == Some(0) {
            return Err(invalid("shots", "use null for exact expectations, or a positive count"));
        }
        Ok(())
    }

    pub fn from_json_reader<R: Read>(r: R) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(r)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything a sequence evaluation needs, resolved once per experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub qubits: usize,
    pub noise: NoiseModel,
    pub spam: SpamSetting,
    pub shots: Option<u64>,
    pub noisy_inversion: bool,
    trailing: Option<Superoperator>,
}

impl Experiment {
    pub fn new(noise: NoiseModel, spam: SpamSetting, shots: Option<u64>, noisy_inversion: bool) -> Result<Self> {
        let q = noise.qubits();
        if q > MAX_SIM_QUBITS {
            return Err(Error::TooManyQubits {
                op: "simulation",
                max: MAX_SIM_QUBITS,
                q,
            });
        }
        if spam.qubits() != q {
            return Err(Error::QubitMismatch {
                left: spam.qubits(),
                right: q,
            });
        }
        if shots == Some(0) {
            return Err(invalid("shots", "must be positive"));
        }
        let trailing = if noisy_inversion { Some(noise.trailing()?) } else { None };
        Ok(Self {
            qubits: q,
            noise,
            spam,
            shots,
            noisy_inversion,
            trailing,
        })
    }

    pub fn from_config(cfg: &RBConfig) -> Result<Self> {
        cfg.validate()?;
        let noise = NoiseModel::from_spec(&cfg.noise, cfg.qubits)?;
        let spam = cfg.spam.build(cfg.qubits)?;
        Self::new(noise, spam, cfg.shots, cfg.noisy_inversion)
    }

    /// The effect the exact-variance formulas should use: `Q`, or `ℰ†(Q)`
    /// with a noisy inversion.
    pub fn effective_effect(&self) -> Result<EffectVec> {
        match &self.trailing {
            Some(t) => self.spam.q.evolve_heisenberg(t),
            None => Ok(self.spam.q.clone()),
        }
    }
}

/// Exact `k_m` and, with finite shots, its binomial estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub exact: f64,
    pub estimate: f64,
}

/// Workspace for repeated sequence evaluation.
struct Scratch {
    a: DVector<f64>,
    b: DVector<f64>,
    total: SignedPermutation,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
            total: SignedPermutation::identity(n),
        }
    }
}

fn apply_channel(e: &Superoperator, src: &DVector<f64>, dst: &mut DVector<f64>) {
    dst.gemv(1.0, e.matrix(), src, 0.0);
}

/// Propagates `v` through the noisy sequence and the inversion; the result
/// is left in `s.a`.
fn propagate(exp: &Experiment, gates: &[&SignedPermutation], v: &DVector<f64>, s: &mut Scratch) {
    s.a.copy_from(v);
    for g in gates {
        match &exp.noise {
            NoiseModel::Uniform(e) => {
                g.apply(s.a.as_slice(), s.b.as_mut_slice());
                apply_channel(e, &s.b, &mut s.a);
            }
            NoiseModel::Sandwich { left, right } => {
                apply_channel(right, &s.a, &mut s.b);
                g.apply(s.b.as_slice(), s.a.as_mut_slice());
                apply_channel(left, &s.a, &mut s.b);
                std::mem::swap(&mut s.a, &mut s.b);
            }
        }
    }
    s.total.apply_transpose(s.a.as_slice(), s.b.as_mut_slice());
    match &exp.trailing {
        Some(t) => apply_channel(t, &s.b, &mut s.a),
        None => std::mem::swap(&mut s.a, &mut s.b),
    }
}

fn evaluate<R: Rng + ?Sized>(
    exp: &Experiment,
    gates: &[&SignedPermutation],
    s: &mut Scratch,
    rng: &mut R,
) -> SequenceOutcome {
    s.total = SignedPermutation::identity(s.a.len());
    for g in gates {
        s.total.push_front(g);
    }
    let qc = exp.spam.q.coeffs();
    propagate(exp, gates, exp.spam.nu.coeffs(), s);
    let k = qc.dot(&s.a);
    let Some(shots) = exp.shots else {
        return SequenceOutcome { exact: k, estimate: k };
    };
    // p(ρ) and p(ρ̂) from the common part (ρ + ρ̂)/2 and the difference ν.
    let common = (exp.spam.rho.coeffs() + exp.spam.rho_hat.coeffs()) * 0.5;
    propagate(exp, gates, &common, s);
    let c = qc.dot(&s.a);
    let p = (c + k).clamp(0.0, 1.0);
    let p_hat = (c - k).clamp(0.0, 1.0);
    let draw = |p: f64, rng: &mut R| -> f64 {
        Binomial::new(shots, p)
            .expect("probability clamped to [0, 1]")
            .sample(rng) as f64
            / shots as f64
    };
    let est_p = draw(p, rng);
    let est_p_hat = draw(p_hat, rng);
    SequenceOutcome {
        exact: k,
        estimate: 0.5 * (est_p - est_p_hat),
    }
}

/// `k_m` for an explicit list of gates (the first element is applied first).
pub fn run_sequence(exp: &Experiment, gates: &[CliffordElement], rng: &mut impl Rng) -> Result<SequenceOutcome> {
    let perms: Vec<SignedPermutation> = gates
        .iter()
        .map(|g| {
            if g.qubits() != exp.qubits {
                Err(Error::QubitMismatch {
                    left: g.qubits(),
                    right: exp.qubits,
                })
            } else {
                Ok(g.to_signed_permutation())
            }
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&SignedPermutation> = perms.iter().collect();
    let mut s = Scratch::new(dim_of(exp.qubits).pow(2));
    Ok(evaluate(exp, &refs, &mut s, rng))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the random stream for sequence `index` at length `m`.
pub fn sequence_seed(seed: u64, m: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ m) ^ index)
}

/// Random gate source: the cached group table for q ≤ 2, direct sampling
/// otherwise.
enum GateSource {
    Table(&'static [SignedPermutation]),
    Sampled(usize),
}

impl GateSource {
    fn new(q: usize) -> Result<Self> {
        if q <= 2 {
            Ok(GateSource::Table(clifford_action_table(q)?))
        } else {
            Ok(GateSource::Sampled(q))
        }
    }
}

/// One randomly drawn sequence, evaluated.
fn random_sequence(
    exp: &Experiment,
    src: &GateSource,
    seed: u64,
    m: u64,
    index: u64,
    s: &mut Scratch,
) -> SequenceOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(sequence_seed(seed, m, index));
    match src {
        GateSource::Table(table) => {
            let gates: Vec<&SignedPermutation> = (0..m).map(|_| &table[rng.gen_range(0..table.len())]).collect();
            evaluate(exp, &gates, s, &mut rng)
        }
        GateSource::Sampled(q) => {
            let owned: Vec<SignedPermutation> = (0..m)
                .map(|_| sample_clifford_uniform(*q, &mut rng).to_signed_permutation())
                .collect();
            let gates: Vec<&SignedPermutation> = owned.iter().collect();
            evaluate(exp, &gates, s, &mut rng)
        }
    }
}

/// Per-length statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub m: u64,
    #[serde(rename = "K_mN")]
    pub mean: f64,
    pub sample_variance: f64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(default)]
    pub exact_variance: Option<f64>,
    #[serde(default)]
    pub exact_mean: Option<f64>,
    #[serde(default)]
    pub bound_spamfree: Option<f64>,
    #[serde(default)]
    pub bound_spam: Option<f64>,
}

/// One sequence of the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub m: u64,
    pub index: u64,
    pub k: f64,
    pub k_exact: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayDataset {
    pub version: u32,
    pub qubits: usize,
    pub seed: u64,
    pub shots: Option<u64>,
    pub points: Vec<DecayPoint>,
    #[serde(default)]
    pub sequences: Option<Vec<SequenceRecord>>,
}

impl DecayDataset {
    /// Builds a dataset from per-length values (no per-sequence records).
    pub fn from_means(qubits: usize, points: Vec<DecayPoint>) -> Self {
        Self {
            version: DATASET_VERSION,
            qubits,
            seed: 0,
            shots: None,
            points,
            sequences: None,
        }
    }

    /// CSV with columns `m, K_mN, sample_variance, N, exact_variance,
    /// exact_mean, bound_spamfree, bound_spam` (empty cells for absent
    /// values).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(p)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the per-length CSV written by [`DecayDataset::write_csv`].
    pub fn read_csv<R: Read>(r: R, qubits: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let points = rd.deserialize().collect::<std::result::Result<Vec<DecayPoint>, _>>()?;
        Ok(Self::from_means(qubits, points))
    }

    pub fn write_sequences_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for s in self.sequences.iter().flatten() {
            wr.serialize(s)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Runs `n` random sequences at each length of `m_list`.
pub fn run_lengths(exp: &Experiment, m_list: &[u64], n: u64, seed: u64, record: bool) -> Result<DecayDataset> {
    let src = GateSource::new(exp.qubits)?;
    let dim = dim_of(exp.qubits).pow(2);
    let mut points = Vec::with_capacity(m_list.len());
    let mut records = record.then(Vec::new);
    for &m in m_list {
        if m == 0 {
            return Err(invalid("m_list", "sequence lengths must be at least 1"));
        }
        let outcomes: Vec<SequenceOutcome> = (0..n)
            .into_par_iter()
            .map_init(|| Scratch::new(dim), |s, i| random_sequence(exp, &src, seed, m, i, s))
            .collect();
        let ks: Vec<f64> = outcomes.iter().map(|o| o.estimate).collect();
        let (mean, var) = mean_and_variance(&ks);
        points.push(DecayPoint {
            m,
            mean,
            sample_variance: var,
            n,
            exact_variance: None,
            exact_mean: None,
            bound_spamfree: None,
            bound_spam: None,
        });
        if let Some(r) = records.as_mut() {
            r.extend(outcomes.iter().enumerate().map(|(i, o)| SequenceRecord {
                m,
                index: i as u64,
                k: o.estimate,
                k_exact: o.exact,
            }));
        }
    }
    Ok(DecayDataset {
        version: DATASET_VERSION,
        qubits: exp.qubits,
        seed,
        shots: exp.shots,
        points,
        sequences: records,
    })
}

/// Runs the experiment described by `cfg`.
pub fn run_experiment(cfg: &RBConfig) -> Result<DecayDataset> {
    let exp = Experiment::from_config(cfg)?;
    run_lengths(&exp, &cfg.m_list, cfg.n, cfg.seed, cfg.record_sequences)
}

/// Fitted decay `K_m ≈ A f^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(rename = "A")]
    pub a: f64,
    pub f_hat: f64,
    pub r_hat: f64,
    pub method: FitMethod,
    /// Root-mean-square residual `K_m − A f^m` over the fitted lengths.
    pub residual_rms: f64,
    pub points_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LogLinear,
    GaussNewton,
}

/// Relative floor applied to sample variances when forming weights, so that
/// noiseless data gets equal (large) weights instead of infinite ones.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Weighted least-squares fit of `A f^m`.
///
/// With all means positive the fit is linear in `(log A, log f)` with
/// weights `N K²/var` (the inverse variance of `log K`); otherwise it falls
/// back to Gauss–Newton on `Σ N/var (K − A f^m)²` started from the
/// positive-mean log fit.  Returns `r̂ = (1 − f̂)(d − 1)/d`.
pub fn fit_decay(ds: &DecayDataset, d: u64) -> Result<FitResult> {
    if d < 2 {
        return Err(invalid("d", "dimension must be at least 2"));
    }
    let mut ms: Vec<u64> = ds.points.iter().map(|p| p.m).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < 2 {
        return Err(Error::Fit("need at least two distinct sequence lengths".into()));
    }
    let pts = &ds.points;
    let scale = pts.iter().map(|p| p.mean.abs()).fold(0.0, f64::max);
    if pts.iter().all(|p| p.mean <= 0.0) {
        return Err(Error::Fit(
            "all sequence averages are non-positive; no decay to fit".into(),
        ));
    }
    let positive: Vec<&DecayPoint> = pts.iter().filter(|p| p.mean > 0.0).collect();
    let log_fit = |points: &[&DecayPoint]| -> Option<(f64, f64)> {
        let rows: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|p| {
                let k2 = p.mean * p.mean;
                let w = p.n.max(1) as f64 * k2 / p.sample_variance.max(VARIANCE_FLOOR * k2);
                (p.m as f64, p.mean.ln(), w)
            })
            .collect();
        let sw: f64 = rows.iter().map(|r| r.2).sum();
        let mx = rows.iter().map(|r| r.2 * r.0).sum::<f64>() / sw;
        let my = rows.iter().map(|r| r.2 * r.1).sum::<f64>() / sw;
        let sxx: f64 = rows.iter().map(|r| r.2 * (r.0 - mx).powi(2)).sum();
        if sxx <= 0.0 {
            return None;
        }
        let sxy: f64 = rows.iter().map(|r| r.2 * (r.0 - mx) * (r.1 - my)).sum();
        let slope = sxy / sxx;
        Some(((my - slope * mx).exp(), slope.exp()))
    };
    let all_positive = positive.len() == pts.len();
    let (a, f, method) = if all_positive {
        let (a, f) = log_fit(&positive).ok_or_else(|| Error::Fit("degenerate sequence lengths".into()))?;
        (a, f, FitMethod::LogLinear)
    } else {
        let start = log_fit(&positive).unwrap_or((positive[0].mean, 0.9));
        let (a, f) = gauss_newton(pts, start, scale)?;
        (a, f, FitMethod::GaussNewton)
    };
    let residual_rms = (pts
        .iter()
        .map(|p| (p.mean - a * f.powf(p.m as f64)).powi(2))
        .sum::<f64>()
        / pts.len() as f64)
        .sqrt();
    let df = d as f64;
    Ok(FitResult {
        a,
        f_hat: f,
        r_hat: (1.0 - f) * (df - 1.0) / df,
        method,
        residual_rms,
        points_used: pts.len(),
    })
}

fn gauss_newton(pts: &[DecayPoint], start: (f64, f64), scale: f64) -> Result<(f64, f64)> {
    let floor = VARIANCE_FLOOR * scale * scale;
    let w: Vec<f64> = pts
        .iter()
        .map(|p| p.n.max(1) as f64 / p.sample_variance.max(floor))
        .collect();
    let cost = |a: f64, f: f64| -> f64 {
        pts.iter()
            .zip(&w)
            .map(|(p, w)| w * (p.mean - a * f.powf(p.m as f64)).powi(2))
            .sum()
    };
    let (mut a, mut f) = start;
    let mut lambda = 1e-3;
    let mut c = cost(a, f);
    for _ in 0..500 {
        // Normal equations of the linearized residuals, Levenberg-damped.
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (p, wi) in pts.iter().zip(&w) {
            let mf = p.m as f64;
            let fm = f.powf(mf);
            let ja = fm;
            let jf = a * mf * f.powf(mf - 1.0);
            let r = p.mean - a * fm;
            jtj[0][0] += wi * ja * ja;
            jtj[0][1] += wi * ja * jf;
            jtj[1][1] += wi * jf * jf;
            jtr[0] += wi * ja * r;
            jtr[1] += wi * jf * r;
        }
        jtj[1][0] = jtj[0][1];
        let mut improved = false;
        for _ in 0..30 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let da = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let dfv = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nf) = (a + da, (f + dfv).clamp(-1.0, 1.0));
            let nc = cost(na, nf);
            if nc.is_finite() && nc <= c {
                let converged = (c - nc) <= 1e-15 * c.max(f64::MIN_POSITIVE) && da.abs() < 1e-14 && dfv.abs() < 1e-14;
                a = na;
                f = nf;
                c = nc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = !converged;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(a.is_finite() && f.is_finite()) {
        return Err(Error::Fit("Gauss–Newton diverged".into()));
    }
    Ok((a, f))
}

/// One row of [`empirical_vs_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub m: u64,
    pub empirical_mean: f64,
    pub exact_mean: f64,
    pub empirical_variance: f64,
    pub exact_variance: f64,
    /// Standard error of the sample variance (from the fourth moment when
    /// per-sequence values are available, Gaussian approximation otherwise).
    pub variance_standard_error: f64,
    pub bound_spamfree: f64,
    pub bound_small_m: f64,
    pub bound_spam: f64,
    pub bound_spam_derived: f64,
    pub trivial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metrics: ChannelMetrics,
    pub eta: f64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// `exact ≤ bound + tol` for the derivation-backed bounds at every `m`.
    pub fn exact_within_bounds(&self, tol: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.exact_variance <= r.bound_spam_derived + tol && r.exact_variance <= r.trivial + tol)
    }

    /// Largest `|empirical − exact|` in units of the standard error.
    pub fn max_standardized_deviation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let d = (r.empirical_variance - r.exact_variance).abs();
                if r.variance_standard_error > 0.0 {
                    d / r.variance_standard_error
                } else if d <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Simulates `cfg` and sets each empirical variance next to the exact
/// variance and every bound (uniform noise, `q ≤ 2`).  The SPAM factor used
/// in the SPAM-aware bounds is [`eta_exact`].
pub fn empirical_vs_bound(cfg: &RBConfig) -> Result<ComparisonReport> {
    let exp = Experiment::from_config(cfg)?;
    let NoiseModel::Uniform(e) = &exp.noise else {
        return Err(Error::Precondition(
            "exact variances are only available for gate-independent noise ℰ∘G".into(),
        ));
    };
    let dec = extract_irreps(cfg.qubits)?;
    let mut ds = run_lengths(&exp, &cfg.m_list, cfg.n, cfg.seed, true)?;
    annotate_dataset(&mut ds, &exp, &dec)?;
    let met = e.metrics()?;
    if met.r > MAX_INFIDELITY {
        return Err(Error::InfidelityTooLarge(met.r));
    }
    let q_eff = exp.effective_effect()?;
    let eta = eta_exact(&q_eff, &exp.spam.nu, exp.spam.target, &dec)?;
    let d = dim_of(cfg.qubits) as u64;
    let seqs = ds.sequences.take().unwrap_or_default();
    let mut rows = Vec::with_capacity(ds.points.len());
    for p in &ds.points {
        let inp = BoundInputs::new(met.r, met.u, d, p.m, eta)?;
        let ks: Vec<f64> = seqs.iter().filter(|s| s.m == p.m).map(|s| s.k).collect();
        rows.push(ComparisonRow {
            m: p.m,
            empirical_mean: p.mean,
            exact_mean: p.exact_mean.expect("annotated"),
            empirical_variance: p.sample_variance,
            exact_variance: p.exact_variance.expect("annotated"),
            variance_standard_error: variance_standard_error(&ks, p.sample_variance),
            bound_spamfree: variance_bound_spamfree(&inp),
            bound_small_m: variance_bound_small_m(&inp, false),
            bound_spam: variance_bound_spam(&inp),
            bound_spam_derived: variance_bound_spam_derived(&inp),
            trivial: TRIVIAL_VARIANCE,
        });
    }
    Ok(ComparisonReport {
        metrics: met,
        eta,
        rows,
    })
}

/// Standard error of the unbiased sample variance.
pub fn variance_standard_error(xs: &[f64], var: f64) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return (2.0 / (n - 1.0).max(1.0)).sqrt() * var;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Fills the exact-mean/variance and bound columns of a dataset produced
/// with uniform noise.
pub fn annotate_dataset(ds: &mut DecayDataset, exp: &Experiment, dec: &IrrepDecomposition) -> Result<()> {
    let NoiseModel::Uniform(e) = &exp.noise else {
        return Err(Error::Precondition(
            "exact variances are only available for gate-independent noise ℰ∘G".into(),
        ));
    };
    let q_eff = exp.effective_effect()?;
    let met = e.metrics()?;
    let d = dim_of(exp.qubits) as u64;
    let eta = eta_exact(&q_eff, &exp.spam.nu, exp.spam.target, dec)?;
    for p in &mut ds.points {
        p.exact_variance = Some(dec.exact_variance(e, &q_eff, &exp.spam.nu, p.m)?);
        p.exact_mean = Some(exact_mean(e, &q_eff, &exp.spam.nu, p.m)?);
        if met.r <= MAX_INFIDELITY {
            let inp = BoundInputs::new(met.r, met.u, d, p.m, eta)?;
            p.bound_spamfree = Some(variance_bound_spamfree(&inp));
            p.bound_spam = Some(variance_bound_spam(&inp));
        }
    }
    Ok(())
}

/// Shot-noise contribution of a finite-`L` experiment, by a normal
/// approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseReport {
    pub shots: u64,
    pub sequences: u64,
    /// Upper bound on the standard deviation that shot noise adds to
    /// `K_{m,N}`: `√(1/(8 L N))`.
    pub std_bound: f64,
    /// Half-width `ε_L` holding with probability `1 − δ_L`.
    pub epsilon_l: f64,
    pub delta_l: f64,
}

/// `(ε_L, δ_L)` for `L` shots per preparation and `N` sequences.  Each of
/// the two underlying frequencies has variance at most `1/(4L)`, so the
/// halved difference has variance at most `1/(8L)`.
pub fn shot_noise_report(shots: u64, sequences: u64, delta_l: f64) -> Result<ShotNoiseReport> {
    use statrs::distribution::{ContinuousCDF, Normal};
    if shots == 0 || sequences == 0 {
        return Err(invalid("shots", "shots and sequences must be positive"));
    }
    if !(delta_l > 0.0 && delta_l < 1.0) {
        return Err(invalid("delta_l", format!("must lie in (0, 1), got {delta_l}")));
    }
    let std_bound = (1.0 / (8.0 * shots as f64 * sequences as f64)).sqrt();
    let z = Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - delta_l / 2.0);
    Ok(ShotNoiseReport {
        shots,
        sequences,
        std_bound,
        epsilon_l: z * std_bound,
        delta_l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn depolarizing_config(f: f64) -> RBConfig {
        RBConfig {
            qubits: 1,
            m_list: vec![1, 5, 20],
            n: 16,
            noise: NoiseSpec::Uniform(ChannelSpec::Depolarizing { f: Some(f), r: None }),
            spam: SpamSpec::ideal("Z"),
            shots: None,
            seed: 7,
            noisy_inversion: false,
            record_sequences: false,
        }
    }

    #[test]
    fn depolarizing_gives_constant_sequences() {
        let ds = run_experiment(&depolarizing_config(0.99)).unwrap();
        for p in &ds.points {
            assert!((p.mean - 0.5 * 0.99f64.powi(p.m as i32)).abs() < 1e-14);
            assert!(p.sample_variance < 1e-28);
        }
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(sequence_seed(1, 2, 3), sequence_seed(1, 3, 2));
    }
}
