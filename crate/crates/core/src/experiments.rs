//! Seeded experiment runner behind the `asq-lab` binary.
//!
//! An experiment is a list of settings (dimension, oversampling factor, …)
//! times a number of trials. Trial `t` of the whole run draws everything from
//! `derive_seed(seed, t)`, trials run in a worker pool, and rows come out in
//! trial order, so identical configurations give byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::TcpListener;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::access::{relative_estimate, AccessHandle, NoiseModel, NoisyQueryHandle, NoisyScalar, DEFAULT_ITERATION_CAP};
use crate::backends::gof::chi_square_p;
use crate::backends::io::load_vector;
use crate::backends::{
    perturb_to_distance, random_oversampling, tomography_shots, wrap_oversampled, wrap_perturbed, ExactHandle, MatrixBlockEncoding,
    PrepMeasureBackend,
};
use crate::compose::{lincomb_deterministic, lincomb_probabilistic, LinearCombinationSpec};
use crate::error::{AsqError, Result};
use crate::estimators::{
    asym_perturbation_budget, asym_sample_budget, inner_product_asym, inner_product_asym_perturbed, inner_product_real_exact,
    inner_product_sym, inner_product_sym_perturbed, sym_perturbation_budget, InnerProductConfig, Mode,
};
use crate::ledger::{CostLedger, LedgerSnapshot};
use crate::net::{coordinate_overlap, party_seed, spawn_tcp_party, CoordinatorReport, PartyEndpoint, Role, TcpTransport};
use crate::numeric::{
    derive_seed, l2_distribution, norm2sq, one_norm, random_complex_unit, random_real_unit, seeded_rng, tvd, DenseVector, SeededRng,
};
use crate::pauli::states::{clifford_t_circuit, low_magic_pair, t_state};
use crate::pauli::{distributed_overlap, magic_report, pauli_cdf, pauli_representation, OverlapSeeds};

/// Version tag written at the top of every output.
pub const FORMAT_VERSION: &str = "asq-lab v1";

/// CSV header row.
pub const CSV_COLUMNS: &str = "trial,estimate,truth,abs_error,within_bound,samples,sample_failures,queries,norms";

/// Thresholds of the CDF sweep.
pub const CDF_TAUS: [f64; 5] = [0.01, 0.1, 0.25, 0.5, 1.0];

/// Tolerance of the exact Pauli identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Noise of the `noisy` backend: each estimate leaves its ε-ball with
/// probability 1/3, the most an oracle may.
pub const WORST_CASE_NOISE: NoiseModel = NoiseModel::Adversarial { p_fail: 1.0 / 3.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Relative,
    InprodAsym,
    InprodSym,
    InprodReal,
    Perturbed,
    Lincomb,
    Tomography,
    PauliDist,
    Colsample,
    TvdSweep,
    MagicReport,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::Relative,
        Experiment::InprodAsym,
        Experiment::InprodSym,
        Experiment::InprodReal,
        Experiment::Perturbed,
        Experiment::Lincomb,
        Experiment::Tomography,
        Experiment::PauliDist,
        Experiment::Colsample,
        Experiment::TvdSweep,
        Experiment::MagicReport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Relative => "relative",
            Experiment::InprodAsym => "inprod-asym",
            Experiment::InprodSym => "inprod-sym",
            Experiment::InprodReal => "inprod-real",
            Experiment::Perturbed => "perturbed",
            Experiment::Lincomb => "lincomb",
            Experiment::Tomography => "tomography",
            Experiment::PauliDist => "pauli-dist",
            Experiment::Colsample => "colsample",
            Experiment::TvdSweep => "tvd-sweep",
            Experiment::MagicReport => "magic-report",
        }
    }
}

impl FromStr for Experiment {
    type Err = AsqError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| AsqError::InvalidParameter(format!("unknown experiment {s}")))
    }
}

/// Where vector handles come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Exact sampling and exact queries.
    #[default]
    Exact,
    /// Exact sampling; queries and norms corrupted by [`WORST_CASE_NOISE`].
    Noisy,
}

impl FromStr for Backend {
    type Err = AsqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "noisy" => Ok(Backend::Noisy),
            other => Err(AsqError::InvalidParameter(format!("backend must be exact or noisy, got {other}"))),
        }
    }
}

/// How `pauli-dist` reaches the two parties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportMode {
    /// Direct calls on local samplers.
    #[default]
    Local,
    /// Parties behind TCP sockets (in-process on loopback unless addresses
    /// are given).
    Tcp,
    /// Both, checking that the estimates agree bit for bit.
    Both,
}

impl FromStr for TransportMode {
    type Err = AsqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(TransportMode::Local),
            "tcp" => Ok(TransportMode::Tcp),
            "both" => Ok(TransportMode::Both),
            other => Err(AsqError::InvalidParameter(format!("transport must be local, tcp or both, got {other}"))),
        }
    }
}

/// Everything an experiment run depends on. Fields an experiment does not use
/// are ignored.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Vector dimensions; one setting per entry. For `lincomb` and
    /// `tvd-sweep` the largest dimension drawn.
    pub dims: Vec<usize>,
    /// Qubit count; for `inprod-real` it sets the dimension to `4ⁿ`, for
    /// `magic-report` it is the largest qubit count drawn.
    pub qubits: Option<u32>,
    pub eps: f64,
    /// Oversampling factors; one setting per entry.
    pub phis: Vec<f64>,
    /// ℓ2 perturbation sizes Δ of `inprod-real`; one setting per entry.
    pub deltas: Vec<f64>,
    /// Trials per setting.
    pub trials: usize,
    pub seed: u64,
    pub backend: Backend,
    /// Scalars estimated by `relative`; one setting per entry.
    pub values: Vec<f64>,
    /// Relative precision of `relative`.
    pub rho: f64,
    /// Failure probability δ of `relative` and `tomography`.
    pub fail_prob: f64,
    /// Sampler attempts per matrix in `colsample`.
    pub attempts: u64,
    /// Sampling distance of `perturbed` as a fraction of the budget.
    pub budget_fraction: f64,
    /// Largest number of terms in `lincomb`.
    pub max_terms: usize,
    pub transport: TransportMode,
    /// Addresses of externally started parties.
    pub alice: Option<String>,
    pub bob: Option<String>,
    /// Fixed states for `pauli-dist` (both or neither).
    pub psi: Option<PathBuf>,
    pub phi_state: Option<PathBuf>,
    /// State file for a single `magic-report`.
    pub state: Option<PathBuf>,
    /// Run the CDF bound sweep instead of the identity sweep.
    pub cdf: bool,
    /// Worker threads; the global pool when `None`.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// The defaults of each experiment reproduce its acceptance sweep.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        let (dims, eps, trials) = match experiment {
            Experiment::Relative => (vec![1], 0.1, 1000),
            Experiment::InprodAsym | Experiment::InprodSym | Experiment::Perturbed => (vec![1024], 0.1, 300),
            Experiment::InprodReal => (vec![4096], 0.05, 300),
            Experiment::Lincomb => (vec![64], 0.1, 1000),
            Experiment::Tomography => (vec![16], 0.1, 100),
            Experiment::PauliDist => (vec![4096], 0.1, 200),
            Experiment::Colsample => (vec![4, 16], 0.1, 1),
            Experiment::TvdSweep => (vec![256], 0.1, 1000),
            Experiment::MagicReport => (vec![256], 0.1, 1000),
        };
        Self {
            experiment,
            dims,
            qubits: None,
            eps,
            phis: vec![1.0],
            deltas: vec![0.0],
            trials,
            seed,
            backend: Backend::Exact,
            values: vec![1.0, 0.1, 0.01],
            rho: 0.1,
            fail_prob: 0.1,
            attempts: 100_000,
            budget_fraction: 0.5,
            max_terms: 8,
            transport: TransportMode::Local,
            alice: None,
            bob: None,
            psi: None,
            phi_state: None,
            state: None,
            cdf: false,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AsqError::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("epsilon must lie in (0,1], got {}", self.eps));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dimensions must be positive".into());
        }
        if self.phis.is_empty() || self.phis.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
            return bad("oversampling factors must be finite and at least 1".into());
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d >= 0.0 && *d < 2.0)) {
            return bad("perturbations must lie in [0,2)".into());
        }
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return bad("scalar values must be finite".into());
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must lie in (0,1], got {}", self.rho));
        }
        if !(self.fail_prob > 0.0 && self.fail_prob < 1.0) {
            return bad(format!("failure probability must lie in (0,1), got {}", self.fail_prob));
        }
        if self.attempts == 0 {
            return bad("attempts must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.budget_fraction) {
            return bad(format!("budget fraction must lie in [0,1], got {}", self.budget_fraction));
        }
        if self.max_terms == 0 {
            return bad("max terms must be at least 1".into());
        }
        if let Some(n) = self.qubits {
            if n == 0 || n > crate::pauli::MAX_QUBITS {
                return bad(format!("qubits must lie in 1..={}", crate::pauli::MAX_QUBITS));
            }
        }
        if self.psi.is_some() != self.phi_state.is_some() {
            return bad("--psi and --phi-state go together".into());
        }
        if self.alice.is_some() != self.bob.is_some() {
            return bad("--alice and --bob go together".into());
        }
        if self.alice.is_some() && self.psi.is_none() {
            return bad("remote parties need --psi and --phi-state for the ground truth".into());
        }
        if self.alice.is_some() && self.transport == TransportMode::Local {
            return bad("remote parties need --transport tcp or both".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    /// The estimate (real part for complex estimates) or the checked quantity.
    pub estimate: f64,
    /// Ground truth (real part) or the bound the quantity is checked against.
    pub truth: f64,
    /// `|estimate − truth|` in the complex plane, or a bound's violation.
    pub abs_error: f64,
    pub within_bound: bool,
    pub samples: u64,
    pub sample_failures: u64,
    pub queries: u64,
    pub norms: u64,
}

impl TrialRow {
    fn check(trial: usize, estimate: f64, bound: f64, holds: bool) -> Self {
        TrialRow {
            trial,
            estimate,
            truth: bound,
            abs_error: (estimate - bound).max(0.0),
            within_bound: holds,
            samples: 0,
            sample_failures: 0,
            queries: 0,
            norms: 0,
        }
    }

    fn estimate(trial: usize, estimate: Complex64, truth: Complex64, bound: f64, ledger: &LedgerSnapshot) -> Self {
        let abs_error = (estimate - truth).norm();
        TrialRow {
            trial,
            estimate: estimate.re,
            truth: truth.re,
            abs_error,
            within_bound: abs_error <= bound,
            samples: ledger.sample_calls,
            sample_failures: ledger.sample_failures,
            queries: ledger.total_queries(),
            norms: ledger.total_norms(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub success_fraction: f64,
    pub mean_abs_error: f64,
    /// Experiment-specific figures (per-setting success fractions, …).
    pub notes: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutput {
    pub version: &'static str,
    pub experiment: Experiment,
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

impl ExperimentOutput {
    fn new(experiment: Experiment, rows: Vec<TrialRow>, notes: BTreeMap<String, f64>) -> Self {
        let n = rows.len().max(1) as f64;
        let summary = Summary {
            trials: rows.len(),
            success_fraction: rows.iter().filter(|r| r.within_bound).count() as f64 / n,
            mean_abs_error: rows.iter().map(|r| r.abs_error).sum::<f64>() / n,
            notes,
        };
        Self { version: FORMAT_VERSION, experiment, rows, summary }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {FORMAT_VERSION}\n{CSV_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.trial, r.estimate, r.truth, r.abs_error, r.within_bound as u8, r.samples, r.sample_failures, r.queries, r.norms
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable output");
        s.push('\n');
        s
    }

    /// `success_fraction=… mean_abs_error=… trials=…` followed by the notes.
    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        let mut line = format!("success_fraction={:.4} mean_abs_error={:.6} trials={}", s.success_fraction, s.mean_abs_error, s.trials);
        for (k, v) in &s.notes {
            let _ = write!(line, " {k}={v}");
        }
        line
    }

    /// Success fraction of the rows whose trial index lies in `range`.
    pub fn success_fraction_in(&self, range: std::ops::Range<usize>) -> f64 {
        let rows: Vec<_> = self.rows.iter().filter(|r| range.contains(&r.trial)).collect();
        rows.iter().filter(|r| r.within_bound).count() as f64 / rows.len().max(1) as f64
    }
}

/// Why a run stopped.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(AsqError),
    #[error("trial {trial} failed: {error}")]
    Trial { trial: usize, error: AsqError },
}

impl RunError {
    /// 1 for configuration errors, 2 for experiment failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Trial { .. } => 2,
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    cfg.validate().map_err(RunError::Config)?;
    let run = || match cfg.experiment {
        Experiment::Relative => relative(cfg),
        Experiment::InprodAsym => inprod_asym(cfg),
        Experiment::InprodSym => inprod_sym(cfg),
        Experiment::InprodReal => inprod_real(cfg),
        Experiment::Perturbed => perturbed(cfg),
        Experiment::Lincomb => lincomb(cfg),
        Experiment::Tomography => tomography(cfg),
        Experiment::PauliDist => pauli_dist(cfg),
        Experiment::Colsample => colsample(cfg),
        Experiment::TvdSweep => tvd_sweep(cfg),
        Experiment::MagicReport => magic(cfg),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunError::Config(AsqError::InvalidParameter(e.to_string())))?
            .install(run),
        None => run(),
    }
}

/// Runs `settings × cfg.trials` trials in parallel; `f(setting, trial, seed)`.
fn run_settings<T: Send>(cfg: &ExperimentConfig, settings: usize, f: impl Fn(usize, usize, u64) -> Result<T> + Sync) -> RunResult<Vec<T>> {
    (0..settings * cfg.trials)
        .into_par_iter()
        .map(|t| f(t / cfg.trials, t, derive_seed(cfg.seed, t as u64)).map_err(|error| RunError::Trial { trial: t, error }))
        .collect()
}

/// Per-setting success fractions, keyed `success_fraction[label]`.
fn setting_notes(cfg: &ExperimentConfig, rows: &[TrialRow], labels: &[String]) -> BTreeMap<String, f64> {
    let mut notes = BTreeMap::new();
    for (s, label) in labels.iter().enumerate() {
        let chunk = &rows[s * cfg.trials..(s + 1) * cfg.trials];
        let ok = chunk.iter().filter(|r| r.within_bound).count() as f64 / cfg.trials as f64;
        notes.insert(format!("success_fraction[{label}]"), ok);
    }
    notes
}

fn grid<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

/// An exact or noisy handle on `x`, oversampled to `phi` when `phi > 1`.
fn vector_handle(x: &DenseVector, phi: f64, backend: Backend, seed: u64, rng: &mut SeededRng) -> Result<Box<dyn AccessHandle>> {
    let base: Box<dyn AccessHandle> = match backend {
        Backend::Exact => Box::new(ExactHandle::new(x.clone(), seed)),
        Backend::Noisy => Box::new(NoisyQueryHandle::new(x.clone(), WORST_CASE_NOISE, seed)?),
    };
    if phi > 1.0 {
        let x_tilde = random_oversampling(x, phi, rng)?;
        return Ok(Box::new(wrap_oversampled(base, x_tilde, derive_seed(seed, 1))?));
    }
    Ok(base)
}

fn relative(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let rows = run_settings(cfg, cfg.values.len(), |s, trial, seed| {
        let x = Complex64::new(cfg.values[s], 0.0);
        let mut q = NoisyScalar::new(x, WORST_CASE_NOISE, seed);
        let r = relative_estimate(&mut q, cfg.rho, cfg.fail_prob, DEFAULT_ITERATION_CAP)?;
        let abs_error = (r.value - x).norm();
        Ok(TrialRow {
            trial,
            estimate: r.value.re,
            truth: x.re,
            abs_error,
            within_bound: abs_error <= cfg.rho * x.norm(),
            samples: 0,
            sample_failures: 0,
            queries: r.raw_calls,
            norms: 0,
        })
    })?;
    let labels: Vec<String> = cfg.values.iter().map(|v| format!("x={v}")).collect();
    let notes = setting_notes(cfg, &rows, &labels);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

fn inprod_asym(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let settings = grid(&cfg.dims, &cfg.phis);
    let results = run_settings(cfg, settings.len(), |s, trial, seed| {
        let (d, phi) = settings[s];
        let mut rng = seeded_rng(seed);
        let x = random_complex_unit(d, &mut rng);
        let y = random_complex_unit(d, &mut rng);
        let mut hx = vector_handle(&x, phi, cfg.backend, derive_seed(seed, 1), &mut rng)?;
        let est = inner_product_asym(&mut hx, &y, &InnerProductConfig::new(cfg.eps, Mode::Asymmetric)?)?;
        let (hist, draws) = asym_sample_budget(cfg.eps, est.diagnostics.norm_estimates[0], d);
        let over_budget = est.report.ledger.sample_calls > 2 * (hist + draws);
        Ok((TrialRow::estimate(trial, est.report.estimate, x.inner(&y)?, est.report.error_bound, &est.report.ledger), over_budget))
    })?;
    let violations = results.iter().filter(|r| r.1).count() as f64;
    let rows: Vec<TrialRow> = results.into_iter().map(|r| r.0).collect();
    let labels: Vec<String> = settings.iter().map(|(d, p)| format!("d={d},phi={p}")).collect();
    let mut notes = setting_notes(cfg, &rows, &labels);
    notes.insert("budget_violations".into(), violations);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

fn inprod_sym(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let settings = grid(&cfg.dims, &cfg.phis);
    let rows = run_settings(cfg, settings.len(), |s, trial, seed| {
        let (d, phi) = settings[s];
        let mut rng = seeded_rng(seed);
        let x = random_complex_unit(d, &mut rng);
        let y = random_complex_unit(d, &mut rng);
        let mut hx = vector_handle(&x, phi, cfg.backend, derive_seed(seed, 1), &mut rng)?;
        let mut hy = vector_handle(&y, phi, cfg.backend, derive_seed(seed, 2), &mut rng)?;
        let ic = InnerProductConfig::new(cfg.eps, Mode::Symmetric)?;
        let est = inner_product_sym(&mut hx, &mut hy, &ic, derive_seed(seed, 3))?;
        Ok(TrialRow::estimate(trial, est.report.estimate, x.inner(&y)?, est.report.error_bound, &est.report.ledger))
    })?;
    let labels: Vec<String> = settings.iter().map(|(d, p)| format!("d={d},phi={p}")).collect();
    let notes = setting_notes(cfg, &rows, &labels);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// `x + (Δ/2)z` for a random real unit `z`: a vector at ℓ2 distance `Δ/2`.
fn real_perturbation(x: &DenseVector, delta: f64, rng: &mut SeededRng) -> Result<DenseVector> {
    let z = random_real_unit(x.dim(), rng);
    DenseVector::new(x.entries().iter().zip(z.entries()).map(|(a, b)| a + b * (delta / 2.0)).collect())
}

fn inprod_real(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let dims = match cfg.qubits {
        Some(n) => vec![1usize << (2 * n)],
        None => cfg.dims.clone(),
    };
    let settings = grid(&dims, &cfg.deltas);
    let rows = run_settings(cfg, settings.len(), |s, trial, seed| {
        let (d, delta) = settings[s];
        let mut rng = seeded_rng(seed);
        let x = random_real_unit(d, &mut rng);
        let y = random_real_unit(d, &mut rng);
        let kappa = one_norm(&x).max(one_norm(&y));
        let mut ic = InnerProductConfig::new(cfg.eps, Mode::RealExact)?;
        let mut hx = vector_handle(&x, 1.0, cfg.backend, derive_seed(seed, 1), &mut rng)?;
        let mut hy = vector_handle(&y, 1.0, cfg.backend, derive_seed(seed, 2), &mut rng)?;
        if delta > 0.0 {
            ic = ic.with_perturbation(delta);
            hx = Box::new(wrap_perturbed(hx, real_perturbation(&x, delta, &mut rng)?, 2.0, derive_seed(seed, 3))?);
            hy = Box::new(wrap_perturbed(hy, real_perturbation(&y, delta, &mut rng)?, 2.0, derive_seed(seed, 4))?);
        }
        let est = inner_product_real_exact(&mut hx, &mut hy, &ic, kappa, derive_seed(seed, 5))?;
        Ok(TrialRow::estimate(trial, est.report.estimate, x.inner(&y)?, est.report.error_bound, &est.report.ledger))
    })?;
    let labels: Vec<String> = settings.iter().map(|(d, delta)| format!("d={d},delta={delta}")).collect();
    let notes = setting_notes(cfg, &rows, &labels);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// Runs the asymmetric perturbed estimator for each φ, then the symmetric
/// one for each φ, at `budget_fraction` of their sampling budget. Every
/// trial also reruns at distance zero and compares with the exact-sampling
/// estimator on the same seeds.
fn perturbed(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let d = cfg.dims[0];
    let settings = grid(&[false, true], &cfg.phis);
    let results = run_settings(cfg, settings.len(), |s, trial, seed| {
        let (symmetric, phi) = settings[s];
        let mut rng = seeded_rng(seed);
        let x = random_complex_unit(d, &mut rng);
        let y = random_complex_unit(d, &mut rng);
        let truth = x.inner(&y)?;
        let (sx, sy) = (derive_seed(seed, 1), derive_seed(seed, 2));
        let over_x = if phi > 1.0 { random_oversampling(&x, phi, &mut rng)? } else { x.clone() };
        let over_y = if phi > 1.0 { random_oversampling(&y, phi, &mut rng)? } else { y.clone() };
        let handle = |v: &DenseVector, over: &DenseVector, inner_seed: u64| -> Result<Box<dyn AccessHandle>> {
            let base = Box::new(ExactHandle::new(v.clone(), inner_seed));
            if phi > 1.0 {
                Ok(Box::new(wrap_oversampled(base, over.clone(), derive_seed(inner_seed, 1))?))
            } else {
                Ok(base)
            }
        };
        if !symmetric {
            let ic = InnerProductConfig::new(cfg.eps, Mode::Asymmetric)?;
            let budget = asym_perturbation_budget(cfg.eps, phi, &ic.constants);
            let x_prime = perturb_to_distance(&over_x, cfg.budget_fraction * budget, &mut rng)?;
            let mut h = wrap_perturbed(handle(&x, &over_x, derive_seed(sx, 7))?, x_prime, budget, sx)?;
            let est = inner_product_asym_perturbed(&mut h, &y, &ic, phi)?;

            let mut zero = wrap_perturbed(handle(&x, &over_x, derive_seed(sx, 8))?, over_x.clone(), 0.0, sx)?;
            let z = inner_product_asym_perturbed(&mut zero, &y, &ic, phi)?;
            let mut exact = if phi > 1.0 {
                Box::new(wrap_oversampled(Box::new(ExactHandle::new(x.clone(), derive_seed(sx, 9))), over_x.clone(), sx)?) as Box<dyn AccessHandle>
            } else {
                Box::new(ExactHandle::new(x.clone(), sx))
            };
            let e = inner_product_asym(&mut exact, &y, &ic)?;
            let row = TrialRow::estimate(trial, est.report.estimate, truth, est.report.error_bound, &est.report.ledger);
            Ok((row, z.report != e.report))
        } else {
            let ic = InnerProductConfig::new(cfg.eps, Mode::Symmetric)?;
            let budget = sym_perturbation_budget(cfg.eps, phi, &ic.constants);
            let x_prime = perturb_to_distance(&over_x, cfg.budget_fraction * budget, &mut rng)?;
            let y_prime = perturb_to_distance(&over_y, cfg.budget_fraction * budget, &mut rng)?;
            let mut px = wrap_perturbed(handle(&x, &over_x, derive_seed(sx, 7))?, x_prime, budget, sx)?;
            let mut py = wrap_perturbed(handle(&y, &over_y, derive_seed(sy, 7))?, y_prime, budget, sy)?;
            let coin = derive_seed(seed, 3);
            let est = inner_product_sym_perturbed(&mut px, &mut py, &ic, phi, coin)?;

            let mut zx = wrap_perturbed(handle(&x, &over_x, derive_seed(sx, 8))?, over_x.clone(), 0.0, sx)?;
            let mut zy = wrap_perturbed(handle(&y, &over_y, derive_seed(sy, 8))?, over_y.clone(), 0.0, sy)?;
            let z = inner_product_sym_perturbed(&mut zx, &mut zy, &ic, phi, coin)?;
            let exact = |v: &DenseVector, over: &DenseVector, s: u64| -> Result<Box<dyn AccessHandle>> {
                if phi > 1.0 {
                    Ok(Box::new(wrap_oversampled(Box::new(ExactHandle::new(v.clone(), derive_seed(s, 9))), over.clone(), s)?))
                } else {
                    Ok(Box::new(ExactHandle::new(v.clone(), s)))
                }
            };
            let (mut ex, mut ey) = (exact(&x, &over_x, sx)?, exact(&y, &over_y, sy)?);
            let e = inner_product_sym(&mut ex, &mut ey, &ic, coin)?;
            let row = TrialRow::estimate(trial, est.report.estimate, truth, est.report.error_bound, &est.report.ledger);
            Ok((row, z.report != e.report))
        }
    })?;
    let mismatches = results.iter().filter(|r| r.1).count() as f64;
    let rows: Vec<TrialRow> = results.into_iter().map(|r| r.0).collect();
    let labels: Vec<String> = settings.iter().map(|(sym, p)| format!("{},phi={p}", if *sym { "sym" } else { "asym" })).collect();
    let mut notes = setting_notes(cfg, &rows, &labels);
    notes.insert("zero_budget_mismatches".into(), mismatches);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// A constituent of a random linear combination.
enum Term {
    Leaf { x: DenseVector, x_tilde: Option<DenseVector> },
    Nested { leaves: Vec<(DenseVector, Option<DenseVector>)>, coefficients: Vec<Complex64> },
}

fn random_coefficient(rng: &mut SeededRng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_leaf(d: usize, rng: &mut SeededRng) -> Result<(DenseVector, Option<DenseVector>)> {
    let x = random_complex_unit(d, rng).scaled(Complex64::new(rng.gen_range(0.2..2.0), 0.0));
    let x_tilde = if rng.gen_bool(0.5) { Some(random_oversampling(&x, rng.gen_range(1.0..3.0), rng)?) } else { None };
    Ok((x, x_tilde))
}

fn leaf_handle(x: &DenseVector, x_tilde: &Option<DenseVector>, seed: u64) -> Result<Box<dyn AccessHandle>> {
    let base = ExactHandle::new(x.clone(), seed);
    Ok(match x_tilde {
        Some(t) => Box::new(wrap_oversampled(base, t.clone(), derive_seed(seed, 1))?),
        None => Box::new(base),
    })
}

impl Term {
    fn handle(&self, seed: u64) -> Result<Box<dyn AccessHandle>> {
        match self {
            Term::Leaf { x, x_tilde } => leaf_handle(x, x_tilde, seed),
            Term::Nested { leaves, coefficients } => {
                let handles = leaves.iter().enumerate().map(|(k, (x, t))| leaf_handle(x, t, derive_seed(seed, k as u64))).collect::<Result<_>>()?;
                let spec = LinearCombinationSpec::new(handles, coefficients.clone())?;
                Ok(Box::new(lincomb_deterministic(spec, None, derive_seed(seed, 99))?))
            }
        }
    }
}

/// Entrywise dominance `|ũ(i)| ≥ |u(i)|` and the realized factor
/// `‖ũ‖²/‖u‖²` of a composed handle.
fn realized(h: &dyn AccessHandle) -> Result<(bool, f64)> {
    let g = h.ground_truth().ok_or_else(|| AsqError::InvalidParameter("composition lost its ground truth".into()))?;
    let dominates = g.oversampling.entries().iter().zip(g.target.entries()).all(|(a, b)| a.norm() >= b.norm() * (1.0 - 1e-9) - 1e-12);
    let u = norm2sq(&g.target);
    let ratio = if u == 0.0 { f64::INFINITY } else { norm2sq(&g.oversampling) / u };
    Ok((dominates, ratio))
}

/// `φ′` of the combination `3e₁ + 4e₂`.
pub fn worked_example_phi() -> Result<f64> {
    let handles: Vec<Box<dyn AccessHandle>> =
        vec![Box::new(ExactHandle::new(DenseVector::basis(2, 0)?, 1)), Box::new(ExactHandle::new(DenseVector::basis(2, 1)?, 2))];
    let spec = LinearCombinationSpec::new(handles, vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)])?;
    let h = lincomb_deterministic(spec, None, 0)?;
    let (dominates, ratio) = realized(&h)?;
    if !dominates || h.phi() != ratio {
        return Err(AsqError::ConstructionFailed(format!("declared {} but realized {ratio}", h.phi())));
    }
    Ok(h.phi())
}

/// Each trial draws τ ≤ `max_terms` terms of dimension ≤ `dims[0]` (half the
/// time with one nested combination as a term) and checks both
/// constructions. Columns: realized factor of the deterministic construction
/// against its declared `φ′`.
fn lincomb(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let max_d = cfg.dims[0];
    let results = run_settings(cfg, 1, |_, trial, seed| {
        let mut rng = seeded_rng(seed);
        let d = rng.gen_range(1..=max_d);
        let tau = rng.gen_range(1..=cfg.max_terms);
        let nested = rng.gen_bool(0.5);
        let mut terms = Vec::with_capacity(tau);
        for k in 0..tau {
            if nested && k == 0 {
                let inner = rng.gen_range(1..=3);
                let leaves = (0..inner).map(|_| random_leaf(d, &mut rng)).collect::<Result<Vec<_>>>()?;
                let coefficients = (0..inner).map(|_| random_coefficient(&mut rng)).collect();
                terms.push(Term::Nested { leaves, coefficients });
            } else {
                let (x, x_tilde) = random_leaf(d, &mut rng)?;
                terms.push(Term::Leaf { x, x_tilde });
            }
        }
        let coefficients: Vec<Complex64> = (0..tau).map(|_| random_coefficient(&mut rng)).collect();
        let build = |salt: u64| -> Result<LinearCombinationSpec> {
            let handles = terms.iter().enumerate().map(|(k, t)| t.handle(derive_seed(seed, salt + k as u64))).collect::<Result<_>>()?;
            LinearCombinationSpec::new(handles, coefficients.clone())
        };

        let det = lincomb_deterministic(build(100)?, None, derive_seed(seed, 1))?;
        let (det_dom, det_ratio) = realized(&det)?;
        let det_bound = det.phi();
        let det_ok = det_dom && det_ratio <= det_bound * (1.0 + 1e-9);

        let prob = lincomb_probabilistic(build(200)?, cfg.fail_prob, derive_seed(seed, 2))?;
        let truths: Vec<_> = prob.spec().handles.iter().map(|h| h.ground_truth()).collect::<Option<_>>().expect("simulated handles");
        let in_range = prob
            .norm_estimates()
            .expect("probabilistic construction")
            .iter()
            .zip(&truths)
            .all(|(n, g)| (0.5 * norm2sq(&g.oversampling)..=1.5 * norm2sq(&g.oversampling)).contains(n));
        let (prob_dom, prob_ratio) = realized(&prob)?;
        let prob_ok = !in_range || (prob_dom && prob_ratio <= prob.phi() * (1.0 + 1e-9));
        let norms: u64 = prob.spec().handles.iter().map(|h| h.ledger().snapshot().total_norms()).sum();

        let mut row = TrialRow::check(trial, det_ratio, det_bound, det_ok && prob_ok);
        row.norms = norms;
        Ok((row, in_range, nested))
    })?;
    let mut notes = BTreeMap::new();
    notes.insert("probabilistic_in_range".into(), results.iter().filter(|r| r.1).count() as f64);
    notes.insert("nested_instances".into(), results.iter().filter(|r| r.2).count() as f64);
    notes.insert("worked_example_phi_prime".into(), worked_example_phi().map_err(|error| RunError::Trial { trial: 0, error })?);
    let rows = results.into_iter().map(|r| r.0).collect();
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// Learns `|x(i)|` of random states; the error is the ∞-norm deviation.
fn tomography(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let rows = run_settings(cfg, cfg.dims.len(), |s, trial, seed| {
        let d = cfg.dims[s];
        let mut rng = seeded_rng(seed);
        let x = random_complex_unit(d, &mut rng);
        let backend = PrepMeasureBackend::new(x.clone(), 1.0)?;
        let ledger = CostLedger::new();
        let table = backend.estimate_abs_amplitudes(cfg.eps, cfg.fail_prob, &mut rng, &ledger)?;
        let err = (0..d).map(|i| (table.get(i) - x[i].norm()).abs()).fold(0.0, f64::max);
        debug_assert_eq!(table.shots, tomography_shots(d, cfg.eps, cfg.fail_prob));
        Ok(TrialRow {
            trial,
            estimate: err,
            truth: 0.0,
            abs_error: err,
            within_bound: err <= cfg.eps,
            samples: table.shots,
            sample_failures: 0,
            queries: 0,
            norms: 0,
        })
    })?;
    let labels: Vec<String> = cfg.dims.iter().map(|d| format!("d={d}")).collect();
    let notes = setting_notes(cfg, &rows, &labels);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// Runs one overlap session against parties listening on loopback.
pub fn loopback_overlap(psi: &DenseVector, phi: &DenseVector, eps: f64, root: u64, session: u64) -> Result<CoordinatorReport> {
    let la = TcpListener::bind("127.0.0.1:0")?;
    let lb = TcpListener::bind("127.0.0.1:0")?;
    let (aa, ab) = (la.local_addr()?, lb.local_addr()?);
    let alice = Arc::new(PartyEndpoint::new(Role::Alice, psi, party_seed(root, Role::Alice))?);
    let bob = Arc::new(PartyEndpoint::new(Role::Bob, phi, party_seed(root, Role::Bob))?);
    let ja = spawn_tcp_party(alice, la, Some(1));
    let jb = spawn_tcp_party(bob, lb, Some(1));
    let ta = TcpTransport::connect(aa)?;
    let tb = TcpTransport::connect(ab)?;
    let report = coordinate_overlap(ta, tb, eps, session, OverlapSeeds::for_session(root, session).coordinator)?;
    for j in [ja, jb] {
        j.join().map_err(|_| AsqError::SessionAbort("party thread panicked".into()))??;
    }
    Ok(report)
}

/// Runs one overlap session against externally started parties.
pub fn remote_overlap(alice: &str, bob: &str, eps: f64, root: u64, session: u64) -> Result<CoordinatorReport> {
    let ta = TcpTransport::connect(alice)?;
    let tb = TcpTransport::connect(bob)?;
    coordinate_overlap(ta, tb, eps, session, OverlapSeeds::for_session(root, session).coordinator)
}

fn load_state(path: &PathBuf) -> RunResult<DenseVector> {
    load_vector(path).map_err(|e| RunError::Config(AsqError::InvalidParameter(format!("{}: {e}", path.display()))))
}

/// Same oracle calls; cost units stay with the parties.
fn same_calls(a: &LedgerSnapshot, b: &LedgerSnapshot) -> bool {
    a.sample_calls == b.sample_calls && a.sample_failures == b.sample_failures && a.queries() == b.queries() && a.norms() == b.norms()
}

/// Trial `t` is session `t`. The pair is read from `--psi`/`--phi-state`
/// when given, else drawn per trial as a low-magic pair.
fn pauli_dist(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let n = cfg.qubits.unwrap_or(6);
    let fixed = match (&cfg.psi, &cfg.phi_state) {
        (Some(a), Some(b)) => Some((load_state(a)?, load_state(b)?)),
        _ => None,
    };
    let results = run_settings(cfg, 1, |_, trial, seed| {
        let (psi, phi) = match &fixed {
            Some(pair) => pair.clone(),
            None => low_magic_pair(n, &mut seeded_rng(seed)),
        };
        let truth = psi.inner(&phi)?.norm_sqr();
        let session = trial as u64;
        let local = match cfg.transport {
            TransportMode::Local | TransportMode::Both => {
                Some(distributed_overlap(&psi, &phi, cfg.eps, OverlapSeeds::for_session(cfg.seed, session))?)
            }
            TransportMode::Tcp => None,
        };
        let remote = match cfg.transport {
            TransportMode::Local => None,
            _ => Some(match (&cfg.alice, &cfg.bob) {
                (Some(a), Some(b)) => remote_overlap(a, b, cfg.eps, cfg.seed, session)?,
                _ => loopback_overlap(&psi, &phi, cfg.eps, cfg.seed, session)?,
            }),
        };
        let mismatch = matches!((&local, &remote), (Some(l), Some(r)) if l.estimate != r.report.estimate || !same_calls(&l.ledger, &r.report.ledger));
        let report = remote.map(|r| r.report).or(local).expect("one mode ran");
        let mut row = TrialRow::estimate(trial, report.estimate, Complex64::new(truth, 0.0), report.error_bound, &report.ledger);
        row.within_bound &= !mismatch;
        Ok((row, mismatch))
    })?;
    let mut notes = BTreeMap::new();
    if cfg.transport == TransportMode::Both {
        notes.insert("transport_mismatches".into(), results.iter().filter(|r| r.1).count() as f64);
    }
    let rows = results.into_iter().map(|r| r.0).collect();
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// A random square matrix scaled so every row and column has norm ≤ 1.
fn random_matrix(d: usize, rng: &mut SeededRng) -> Result<MatrixBlockEncoding> {
    let raw = random_complex_unit(d * d, rng);
    let row_max = (0..d).map(|i| (0..d).map(|k| raw[i * d + k].norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
    let col_max = (0..d).map(|k| (0..d).map(|i| raw[i * d + k].norm_sqr()).sum::<f64>()).fold(0.0, f64::max);
    let scale = rng.gen_range(0.3..1.0) / row_max.max(col_max).sqrt();
    MatrixBlockEncoding::new(d, d, raw.entries().iter().map(|z| z * scale).collect(), 1.0)
}

/// Success rate against `‖A‖_F²/d` (3σ) and the χ² p-value of the column law
/// against `‖A(*,k)‖²/‖A‖_F²` (≥ 10⁻³).
fn colsample(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let results = run_settings(cfg, cfg.dims.len(), |s, trial, seed| {
        let d = cfg.dims[s];
        let mut rng = seeded_rng(seed);
        let a = random_matrix(d, &mut rng)?;
        let ledger = CostLedger::new();
        let mut counts = vec![0u64; d];
        for _ in 0..cfg.attempts {
            if let Some(k) = a.sample_column_index(&mut rng, &ledger).index() {
                counts[k] += 1;
            }
        }
        let n = cfg.attempts as f64;
        let successes: u64 = counts.iter().sum();
        let p_hat = successes as f64 / n;
        let p = a.frobenius_sq() / d as f64;
        let sigma = (p * (1.0 - p) / n).sqrt();
        let law: Vec<f64> = a.column_norms_sq().iter().map(|c| c / a.frobenius_sq()).collect();
        let gof = chi_square_p(&counts, &law);
        let snap = ledger.snapshot();
        let row = TrialRow {
            trial,
            estimate: p_hat,
            truth: p,
            abs_error: (p_hat - p).abs(),
            within_bound: (p_hat - p).abs() <= 3.0 * sigma && gof >= 1e-3,
            samples: snap.sample_calls,
            sample_failures: snap.sample_failures,
            queries: 0,
            norms: 0,
        };
        Ok((row, gof))
    })?;
    let labels: Vec<String> = cfg.dims.iter().map(|d| format!("d={d}")).collect();
    let rows: Vec<TrialRow> = results.iter().map(|r| r.0.clone()).collect();
    let mut notes = setting_notes(cfg, &rows, &labels);
    notes.insert("min_gof_p".into(), results.iter().map(|r| r.1).fold(1.0, f64::min));
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

/// `Σ|D_x − D_y|` against `4‖x − y‖/‖x‖` for random pairs at random
/// distances.
fn tvd_sweep(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    let max_d = cfg.dims[0];
    let rows = run_settings(cfg, 1, |_, trial, seed| {
        let mut rng = seeded_rng(seed);
        let d = rng.gen_range(1..=max_d);
        let x = random_complex_unit(d, &mut rng).scaled(Complex64::new(10f64.powf(rng.gen_range(-1.0..1.0)), 0.0));
        let y = loop {
            let z = random_complex_unit(d, &mut rng);
            let step = x.norm() * 10f64.powf(rng.gen_range(-4.0..0.5));
            let y = DenseVector::new(x.entries().iter().zip(z.entries()).map(|(a, b)| a + b * step).collect())?;
            if y.norm() > 0.0 {
                break y;
            }
        };
        let lhs = tvd(&l2_distribution(&x)?, &l2_distribution(&y)?)?;
        let rhs = 4.0 * x.distance(&y)? / x.norm();
        Ok(TrialRow::check(trial, lhs, rhs, lhs <= rhs + 1e-12))
    })?;
    Ok(ExperimentOutput::new(cfg.experiment, rows, BTreeMap::new()))
}

/// A random `n`-qubit state: Haar-random for even `k`, a Clifford+T state
/// with up to `n` T gates otherwise.
fn random_state(n: u32, k: u64, rng: &mut SeededRng) -> DenseVector {
    if k.is_multiple_of(2) {
        random_complex_unit(1 << n, rng)
    } else {
        let t = rng.gen_range(0..=n as usize);
        clifford_t_circuit(n, 4 * n as usize, t, rng).state()
    }
}

fn magic(cfg: &ExperimentConfig) -> RunResult<ExperimentOutput> {
    if let Some(path) = &cfg.state {
        let psi = load_state(path)?;
        let pi = pauli_representation(&psi).map_err(RunError::Config)?;
        let r = magic_report(&pi);
        let identity = 2.0 * r.stab_norm.ln();
        let row = TrialRow {
            trial: 0,
            estimate: r.m_half,
            truth: identity,
            abs_error: (r.m_half - identity).abs(),
            within_bound: (r.m_half - identity).abs() <= IDENTITY_TOLERANCE,
            samples: 0,
            sample_failures: 0,
            queries: 0,
            norms: 0,
        };
        let notes = BTreeMap::from([
            ("m_0".to_string(), r.m_0),
            ("m_half".to_string(), r.m_half),
            ("m_2".to_string(), r.m_2),
            ("stab_norm".to_string(), r.stab_norm),
            ("exp_half_m_half".to_string(), r.exp_half_m_half),
        ]);
        return Ok(ExperimentOutput::new(cfg.experiment, vec![row], notes));
    }
    if cfg.cdf {
        let max_n = cfg.qubits.unwrap_or(6);
        let rows = run_settings(cfg, 1, |_, trial, seed| {
            let mut rng = seeded_rng(seed);
            let n = rng.gen_range(1..=max_n);
            let pi = pauli_representation(&random_state(n, trial as u64, &mut rng))?;
            let scale = magic_report(&pi).exp_half_m_half;
            let worst = CDF_TAUS.iter().map(|&tau| pauli_cdf(&pi, tau) / (tau.sqrt() * scale)).fold(0.0, f64::max);
            Ok(TrialRow::check(trial, worst, 1.0, worst <= 1.0 + 1e-12))
        })?;
        return Ok(ExperimentOutput::new(cfg.experiment, rows, BTreeMap::new()));
    }
    let max_n = cfg.qubits.unwrap_or(8);
    let rows = run_settings(cfg, 1, |_, trial, seed| {
        let mut rng = seeded_rng(seed);
        let n = rng.gen_range(1..=max_n);
        let psi = random_state(n, trial as u64, &mut rng);
        let phi = random_state(n, trial as u64 + 1, &mut rng);
        let (pa, pb) = (pauli_representation(&psi)?, pauli_representation(&phi)?);
        let r = magic_report(&pa);
        let deviation = [
            (pa.two_norm() - 1.0).abs(),
            (pa.dot(&pb)? - psi.inner(&phi)?.norm_sqr()).abs(),
            (r.m_half - 2.0 * r.stab_norm.ln()).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let mut row = TrialRow::check(trial, deviation, IDENTITY_TOLERANCE, deviation <= IDENTITY_TOLERANCE);
        row.abs_error = deviation;
        Ok(row)
    })?;
    let zero = magic_report(&pauli_representation(&DenseVector::basis(1 << max_n, 0).map_err(RunError::Config)?).map_err(RunError::Config)?);
    let t = magic_report(&pauli_representation(&t_state()).map_err(RunError::Config)?);
    let notes = BTreeMap::from([
        ("zero_state_m_half".to_string(), zero.m_half),
        ("t_state_stab_norm".to_string(), t.stab_norm),
        ("t_state_m_half".to_string(), t.m_half),
    ]);
    Ok(ExperimentOutput::new(cfg.experiment, rows, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(experiment, 5);
        cfg.trials = 3;
        cfg
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn csv_layout_and_determinism() {
        let mut cfg = small(Experiment::TvdSweep);
        cfg.trials = 20;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# asq-lab v1"));
        assert_eq!(lines.next(), Some(CSV_COLUMNS));
        let trials: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        assert_eq!(trials, (0..20).collect::<Vec<_>>());
        assert_eq!(a.summary.success_fraction, 1.0);
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["version"], "asq-lab v1");
        assert_eq!(json["rows"].as_array().unwrap().len(), 20);
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let mut cfg = small(Experiment::Relative);
        cfg.values = vec![0.5];
        cfg.threads = Some(1);
        let one = run_experiment(&cfg).unwrap().to_csv();
        cfg.threads = Some(3);
        assert_eq!(run_experiment(&cfg).unwrap().to_csv(), one);
    }

    #[test]
    fn config_errors_exit_one() {
        let mut cfg = small(Experiment::InprodAsym);
        cfg.trials = 0;
        assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 1);
        let mut cfg = small(Experiment::MagicReport);
        cfg.state = Some("/nonexistent/state.json".into());
        assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn trial_failures_exit_two() {
        let mut cfg = small(Experiment::Relative);
        cfg.values = vec![0.0];
        let err = run_experiment(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn small_runs_of_every_experiment() {
        let mut asym = small(Experiment::InprodAsym);
        asym.dims = vec![16];
        asym.eps = 0.3;
        let mut sym = small(Experiment::InprodSym);
        sym.dims = vec![16];
        sym.eps = 0.3;
        sym.phis = vec![1.0, 2.0];
        let mut real = small(Experiment::InprodReal);
        real.dims = vec![64];
        real.eps = 0.2;
        real.deltas = vec![0.0, 0.02];
        let mut pert = small(Experiment::Perturbed);
        pert.dims = vec![16];
        pert.eps = 0.3;
        let mut lin = small(Experiment::Lincomb);
        lin.trials = 20;
        let mut dist = small(Experiment::PauliDist);
        dist.qubits = Some(2);
        dist.eps = 0.3;
        dist.transport = TransportMode::Both;
        let mut col = small(Experiment::Colsample);
        col.attempts = 2000;
        col.trials = 1;
        let mut cdf = small(Experiment::MagicReport);
        cdf.cdf = true;
        cdf.qubits = Some(3);
        let mut ids = small(Experiment::MagicReport);
        ids.qubits = Some(3);
        for cfg in [asym, sym, real, pert, lin, small(Experiment::Tomography), dist, col, cdf, ids] {
            let out = run_experiment(&cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.experiment.name()));
            assert!(!out.rows.is_empty());
            assert!(out.summary_line().starts_with("success_fraction="));
        }
    }

    #[test]
    fn transports_agree() {
        let mut cfg = small(Experiment::PauliDist);
        cfg.qubits = Some(2);
        cfg.eps = 0.3;
        cfg.transport = TransportMode::Both;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.summary.notes["transport_mismatches"], 0.0);
    }

    #[test]
    fn worked_example() {
        assert_eq!(worked_example_phi().unwrap(), 4.0);
    }
}
