//! The approximate sample-and-query oracle interface, its failure semantics,
//! the median booster and the relative-error estimator built on top of it.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AsqError, Result};
use crate::histogram::Histogram;
use crate::ledger::{CostLedger, LedgerSnapshot};
use crate::numeric::{complex_median, lower_median, DenseVector, SeededRng};

/// Consecutive failed sample attempts tolerated before a handle is declared
/// nonconforming.
pub const STARVATION_CAP: u32 = 100;

/// Default iteration cap of [`relative_estimate`].
pub const DEFAULT_ITERATION_CAP: u32 = 64;

/// Result of one sampling attempt. Failure is always signaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleOutcome {
    Index(usize),
    Failed,
}

impl SampleOutcome {
    pub fn index(self) -> Option<usize> {
        match self {
            SampleOutcome::Index(i) => Some(i),
            SampleOutcome::Failed => None,
        }
    }
}

/// An entry estimate. There is deliberately no validity flag: a bad estimate
/// is indistinguishable from a good one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryResult {
    pub value: Complex64,
    pub requested_eps: f64,
}

/// The vectors behind a handle, available from simulated backends.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// The vector `x` that queries estimate.
    pub target: DenseVector,
    /// The dominating vector `x̃` whose squared norm `norm_sq` estimates.
    pub oversampling: DenseVector,
    /// The vector whose ℓ2 distribution `sample` actually follows.
    pub sampling: DenseVector,
}

impl GroundTruth {
    pub fn exact(x: DenseVector) -> Self {
        Self { target: x.clone(), oversampling: x.clone(), sampling: x }
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AsqError::InvalidParameter(format!("precision must be positive, got {eps}")));
    }
    Ok(())
}

pub(crate) fn check_index(index: usize, dim: usize) -> Result<()> {
    if index >= dim {
        return Err(AsqError::IndexOutOfRange { index, dim });
    }
    Ok(())
}

/// φ-oversample-and-query access to a vector `x ∈ C^d`.
///
/// * `sample` succeeds with probability ≥ 2/3 and then follows `D_x̃`;
/// * `query(i, ε)` is within ε of `x(i)` with probability ≥ 2/3;
/// * `norm_sq(ε)` is within ε of `‖x̃‖²` with probability ≥ 2/3;
/// * `|x̃(i)| ≥ |x(i)|` and `‖x̃‖² ≤ φ‖x‖²`.
///
/// Handles own their randomness, so a handle is a single-consumer object;
/// concurrent estimators use one handle per worker.
pub trait AccessHandle: Send {
    fn dim(&self) -> usize;

    /// Declared oversampling factor; may be `f64::INFINITY`.
    fn phi(&self) -> f64;

    fn sample(&mut self) -> Result<SampleOutcome>;

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult>;

    fn norm_sq(&mut self, eps: f64) -> Result<f64>;

    fn ledger(&self) -> &CostLedger;

    /// Retries `sample` until it succeeds.
    fn sample_valid(&mut self) -> Result<usize> {
        for _ in 0..STARVATION_CAP {
            if let SampleOutcome::Index(i) = self.sample()? {
                return Ok(i);
            }
        }
        Err(AsqError::SamplerStarvation { failures: STARVATION_CAP })
    }

    /// Histogram of `n` valid samples.
    ///
    /// Backends that know their sampling law override this with a multinomial
    /// draw, which has the same law as `n` calls to [`AccessHandle::sample_valid`].
    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        let mut h = Histogram::new();
        for _ in 0..n {
            h.insert(self.sample_valid()?);
        }
        Ok(h)
    }

    /// `reps` independent raw queries of the same entry.
    fn query_batch(&mut self, index: usize, eps: f64, reps: u64) -> Result<Vec<Complex64>> {
        (0..reps).map(|_| self.query(index, eps).map(|q| q.value)).collect()
    }

    /// Component-wise median of `reps` raw queries at precision `eps`.
    fn median_query(&mut self, index: usize, eps: f64, reps: u64) -> Result<Complex64> {
        if let Some(value) = self.exact_entry(index) {
            check_eps(eps)?;
            self.ledger().record_queries(eps, reps);
            return Ok(value);
        }
        Ok(complex_median(&self.query_batch(index, eps, reps)?))
    }

    /// `Some(x(i))` when this handle's queries are error-free, so a query is
    /// fully determined; lets estimators aggregate identical draws.
    fn exact_entry(&self, _index: usize) -> Option<Complex64> {
        None
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        None
    }
}

impl<H: AccessHandle + ?Sized> AccessHandle for Box<H> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn phi(&self) -> f64 {
        (**self).phi()
    }
    fn sample(&mut self) -> Result<SampleOutcome> {
        (**self).sample()
    }
    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        (**self).query(index, eps)
    }
    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        (**self).norm_sq(eps)
    }
    fn ledger(&self) -> &CostLedger {
        (**self).ledger()
    }
    fn sample_valid(&mut self) -> Result<usize> {
        (**self).sample_valid()
    }
    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        (**self).sample_valid_counts(n)
    }
    fn query_batch(&mut self, index: usize, eps: f64, reps: u64) -> Result<Vec<Complex64>> {
        (**self).query_batch(index, eps, reps)
    }
    fn median_query(&mut self, index: usize, eps: f64, reps: u64) -> Result<Complex64> {
        (**self).median_query(index, eps, reps)
    }
    fn exact_entry(&self, index: usize) -> Option<Complex64> {
        (**self).exact_entry(index)
    }
    fn ground_truth(&self) -> Option<GroundTruth> {
        (**self).ground_truth()
    }
}

/// `⌈18 ln(1/δ)⌉`, the median-trick repetition count.
pub fn repetitions(delta: f64) -> u64 {
    (18.0 * (1.0 / delta).ln()).ceil().max(1.0) as u64
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AsqError::InvalidParameter(format!("failure probability must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// Boosts a two-sided query to failure probability δ: `⌈18 ln(1/δ)⌉` raw
/// queries at precision ε/√2, real and imaginary parts medianed separately.
pub fn boosted_query<H: AccessHandle + ?Sized>(h: &mut H, index: usize, eps: f64, delta: f64) -> Result<Complex64> {
    check_eps(eps)?;
    check_delta(delta)?;
    h.median_query(index, eps / SQRT_2, repetitions(delta))
}

/// A randomized absolute-error estimator of an unknown scalar: `estimate(ε)` is
/// within ε of the scalar with probability ≥ 2/3.
pub trait ScalarOracle {
    fn estimate(&mut self, eps: f64) -> Result<Complex64>;
}

impl<F: FnMut(f64) -> Result<Complex64>> ScalarOracle for F {
    fn estimate(&mut self, eps: f64) -> Result<Complex64> {
        self(eps)
    }
}

/// The squared norm `‖x̃‖²` seen through a handle's `norm_sq`.
pub struct NormSqOracle<'a, H: AccessHandle + ?Sized>(pub &'a mut H);

impl<H: AccessHandle + ?Sized> ScalarOracle for NormSqOracle<'_, H> {
    fn estimate(&mut self, eps: f64) -> Result<Complex64> {
        Ok(Complex64::new(self.0.norm_sq(eps)?, 0.0))
    }
}

/// Output of [`relative_estimate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeEstimate {
    pub value: Complex64,
    /// The value of `k` at which the doubling loop exited.
    pub iterations: u32,
    /// Raw oracle calls made, across both phases.
    pub raw_calls: u64,
}

/// Per-iteration repetition count `⌈18 ln(10⁴·2^{k+1}/δ)⌉`.
pub fn loop_repetitions(k: u32, delta: f64) -> u64 {
    (18.0 * (1e4 * 2f64.powi(k as i32 + 1) / delta).ln()).ceil() as u64
}

/// Final-phase repetition count `⌈18 ln(8/δ)⌉`.
pub fn final_repetitions(delta: f64) -> u64 {
    (18.0 * (8.0 / delta).ln()).ceil() as u64
}

/// Estimates a scalar to relative error ρ with probability ≥ 1 − δ from
/// absolute-error estimates.
///
/// Doubling loop `k = 1, 2, …` at precision `2^{-k}/√2`, taking the median
/// magnitude of `⌈18 ln(10⁴·2^{k+1}/δ)⌉` estimates, until the precision is at
/// most half the median. The final phase queries `⌈18 ln(8/δ)⌉` times at
/// precision `ρ(μ − ε)`; each call supplies both a real and an imaginary part.
pub fn relative_estimate<Q: ScalarOracle + ?Sized>(q: &mut Q, rho: f64, delta: f64, cap: u32) -> Result<RelativeEstimate> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(AsqError::InvalidParameter(format!("relative precision must lie in (0,1], got {rho}")));
    }
    check_delta(delta)?;
    let mut raw_calls = 0u64;
    let mut magnitudes = Vec::new();
    for k in 1..=cap {
        let eps = 2f64.powi(-(k as i32)) / SQRT_2;
        let reps = loop_repetitions(k, delta);
        magnitudes.clear();
        for _ in 0..reps {
            magnitudes.push(q.estimate(eps)?.norm());
        }
        raw_calls += reps;
        let mu = lower_median(&mut magnitudes);
        if eps <= mu / 2.0 {
            let floor = mu - eps;
            let reps = final_repetitions(delta);
            let mut values = Vec::with_capacity(reps as usize);
            for _ in 0..reps {
                values.push(q.estimate(rho * floor)?);
            }
            raw_calls += reps;
            return Ok(RelativeEstimate { value: complex_median(&values), iterations: k, raw_calls });
        }
    }
    Err(AsqError::NonterminationCap { cap })
}

/// Error model of [`NoisyScalar`] and [`NoisyQueryHandle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// With probability `p_fail` return `truth + 3ε·e^{iθ}` (outside the
    /// ε-ball); otherwise `truth + ε√U·e^{iθ}` (uniform in the ε-disc).
    Adversarial { p_fail: f64 },
    /// `truth + U(−ε, ε)` on the real part.
    UniformReal,
}

impl NoiseModel {
    pub fn perturb<R: Rng + ?Sized>(&self, truth: Complex64, eps: f64, rng: &mut R) -> Complex64 {
        match *self {
            NoiseModel::Adversarial { p_fail } => {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let radius = if rng.gen_bool(p_fail) { 3.0 * eps } else { eps * rng.gen::<f64>().sqrt() };
                truth + Complex64::from_polar(radius, theta)
            }
            NoiseModel::UniformReal => truth + Complex64::new(rng.gen_range(-eps..=eps), 0.0),
        }
    }
}

/// A synthetic absolute-error estimator of a fixed scalar.
pub struct NoisyScalar {
    pub truth: Complex64,
    pub model: NoiseModel,
    rng: SeededRng,
    pub calls: u64,
}

impl NoisyScalar {
    pub fn new(truth: Complex64, model: NoiseModel, seed: u64) -> Self {
        Self { truth, model, rng: crate::numeric::seeded_rng(seed), calls: 0 }
    }
}

impl ScalarOracle for NoisyScalar {
    fn estimate(&mut self, eps: f64) -> Result<Complex64> {
        check_eps(eps)?;
        self.calls += 1;
        Ok(self.model.perturb(self.truth, eps, &mut self.rng))
    }
}

/// Exact sampling of `D_x` with queries and norms corrupted by a [`NoiseModel`].
pub struct NoisyQueryHandle {
    x: DenseVector,
    law: crate::backends::SamplingLaw,
    model: NoiseModel,
    rng: SeededRng,
    ledger: CostLedger,
}

impl NoisyQueryHandle {
    pub fn new(x: DenseVector, model: NoiseModel, seed: u64) -> Result<Self> {
        let law = crate::backends::SamplingLaw::new(&x.weights(), 1.0)?;
        Ok(Self { x, law, model, rng: crate::numeric::seeded_rng(seed), ledger: CostLedger::new() })
    }
}

impl AccessHandle for NoisyQueryHandle {
    fn dim(&self) -> usize {
        self.x.dim()
    }
    fn phi(&self) -> f64 {
        1.0
    }
    fn sample(&mut self) -> Result<SampleOutcome> {
        let outcome = self.law.sample(&mut self.rng);
        self.ledger.record_sample(outcome.index().is_some());
        Ok(outcome)
    }
    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_eps(eps)?;
        let truth = self.x.get(index)?;
        self.ledger.record_queries(eps, 1);
        Ok(QueryResult { value: self.model.perturb(truth, eps, &mut self.rng), requested_eps: eps })
    }
    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.ledger.record_norms(eps, 1);
        let truth = Complex64::new(crate::numeric::norm2sq(&self.x), 0.0);
        Ok(self.model.perturb(truth, eps, &mut self.rng).re)
    }
    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }
    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        self.law.valid_counts(n, &mut self.rng, &self.ledger)
    }
    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth::exact(self.x.clone()))
    }
}

/// Estimate plus the evidence needed to audit it.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub estimate: Complex64,
    /// The absolute error the estimator promises.
    pub error_bound: f64,
    /// The promised probability that the bound holds.
    pub success_prob: f64,
    /// Oracle calls made to produce the estimate, summed over all handles.
    pub ledger: LedgerSnapshot,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    estimate_re: f64,
    estimate_im: f64,
    error_bound: f64,
    success_prob: f64,
    ledger: LedgerSnapshot,
}

impl Serialize for EstimatorReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            estimate_re: self.estimate.re,
            estimate_im: self.estimate.im,
            error_bound: self.error_bound,
            success_prob: self.success_prob,
            ledger: self.ledger.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EstimatorReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = ReportJson::deserialize(deserializer)?;
        Ok(EstimatorReport {
            estimate: Complex64::new(json.estimate_re, json.estimate_im),
            error_bound: json.error_bound,
            success_prob: json.success_prob,
            ledger: json.ledger,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ExactHandle;
    use crate::numeric::{derive_seed, seeded_rng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn repetition_constants() {
        assert_eq!(repetitions(1.0 / 6.0), 33);
        assert_eq!(final_repetitions(0.1), 79);
        assert_eq!(loop_repetitions(1, 0.1), (18.0f64 * (4e5f64).ln()).ceil() as u64);
    }

    #[test]
    fn boosted_exact_is_exact_and_metered() {
        let x = DenseVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let mut h = ExactHandle::new(x, 1);
        assert_eq!(boosted_query(&mut h, 1, 0.1, 1.0 / 6.0).unwrap(), c(0.0, 0.8));
        let snap = h.ledger().snapshot();
        assert_eq!(snap.total_queries(), 33);
        assert_eq!(snap.query_count(0.1 / SQRT_2), 33);
    }

    #[test]
    fn boosted_defeats_corruption() {
        let x = DenseVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let trials = 10_000;
        let mut ok = 0;
        for t in 0..trials {
            let model = NoiseModel::Adversarial { p_fail: 1.0 / 3.0 };
            let mut h = NoisyQueryHandle::new(x.clone(), model, derive_seed(5, t)).unwrap();
            let v = boosted_query(&mut h, 0, 0.01, 0.01).unwrap();
            ok += ((v - c(0.6, 0.0)).norm() <= 0.01) as u32;
        }
        assert!(ok as f64 / trials as f64 >= 0.99, "{ok}");
    }

    #[test]
    fn booster_contract_at_worst_case_rate() {
        let x = DenseVector::from_real(&[1.0]).unwrap();
        let trials = 10_000;
        let mut fails = 0;
        for t in 0..trials {
            let model = NoiseModel::Adversarial { p_fail: 1.0 / 3.0 };
            let mut h = NoisyQueryHandle::new(x.clone(), model, derive_seed(6, t)).unwrap();
            let v = boosted_query(&mut h, 0, 0.05, 0.05).unwrap();
            fails += ((v - c(1.0, 0.0)).norm() > 0.05) as u32;
        }
        assert!(fails as f64 / trials as f64 <= 0.05, "{fails}");
    }

    #[test]
    fn relative_estimate_exact_unit() {
        let mut q = |_eps: f64| Ok(c(1.0, 0.0));
        let r = relative_estimate(&mut q, 0.1, 0.1, DEFAULT_ITERATION_CAP).unwrap();
        assert_eq!(r.value, c(1.0, 0.0));
        assert_eq!(r.iterations, 1);
        assert_eq!(r.raw_calls, loop_repetitions(1, 0.1) + final_repetitions(0.1));
    }

    #[test]
    fn relative_estimate_zero_hits_cap() {
        let mut q = |_eps: f64| Ok(c(0.0, 0.0));
        assert_eq!(relative_estimate(&mut q, 0.1, 0.1, 20), Err(AsqError::NonterminationCap { cap: 20 }));
    }

    #[test]
    fn relative_estimate_uniform_noise() {
        let mut ok = 0;
        for t in 0..1000 {
            let mut q = NoisyScalar::new(c(0.1, 0.0), NoiseModel::UniformReal, derive_seed(9, t));
            let r = relative_estimate(&mut q, 0.1, 0.1, DEFAULT_ITERATION_CAP).unwrap();
            ok += ((r.value - c(0.1, 0.0)).norm() <= 0.01) as u32;
        }
        assert!(ok >= 900, "{ok}");
    }

    #[test]
    fn relative_estimate_halting_and_ledger() {
        let mut rng = seeded_rng(2);
        for _ in 0..200 {
            let magnitude = 2f64.powf(-rng.gen_range(0.0..20.0));
            let mut q = |_eps: f64| Ok(c(magnitude, 0.0));
            let r = relative_estimate(&mut q, 0.5, 0.1, DEFAULT_ITERATION_CAP).unwrap();
            let limit = (3.0 / magnitude).log2().ceil() as u32 + 8;
            assert!(r.iterations <= limit);
            let expected: u64 = (1..=r.iterations).map(|k| loop_repetitions(k, 0.1)).sum::<u64>() + final_repetitions(0.1);
            assert_eq!(r.raw_calls, expected);
        }
    }

    #[test]
    fn report_json() {
        let report = EstimatorReport {
            estimate: c(0.5, -0.25),
            error_bound: 0.1,
            success_prob: 2.0 / 3.0,
            ledger: LedgerSnapshot::default(),
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["estimate_re"], 0.5);
        assert_eq!(json["estimate_im"], -0.25);
        assert_eq!(json["ledger"]["samples"], 0);
        let back: EstimatorReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }
}
