use num_complex::Complex64;
use rand::Rng;

use super::SamplingLaw;
use crate::access::{check_eps, AccessHandle, GroundTruth, QueryResult, SampleOutcome};
use crate::error::{AsqError, Result};
use crate::histogram::Histogram;
use crate::ledger::CostLedger;
use crate::numeric::{check_dims, l2_distribution, norm2sq, random_complex_unit, seeded_rng, tvd, DenseVector, SeededRng};

const DOMINANCE_SLACK: f64 = 1e-12;

/// Samples from `D_x̃` for a dominating `x̃` while queries still target `x`.
pub struct OversampledHandle<H> {
    inner: H,
    x_tilde: DenseVector,
    law: SamplingLaw,
    phi: f64,
    norm_sq: f64,
    rng: SeededRng,
    ledger: CostLedger,
}

/// Degrades `inner` (which must expose its ground truth) into φ-oversampled
/// access with `φ = ‖x̃‖²/‖x‖²`.
pub fn wrap_oversampled<H: AccessHandle>(inner: H, x_tilde: DenseVector, seed: u64) -> Result<OversampledHandle<H>> {
    let truth = inner
        .ground_truth()
        .ok_or_else(|| AsqError::InvalidParameter("oversampling needs a handle with known ground truth".into()))?;
    let x = truth.target;
    check_dims(x.dim(), x_tilde.dim())?;
    for (index, (a, b)) in x.entries().iter().zip(x_tilde.entries()).enumerate() {
        if b.norm() < a.norm() - DOMINANCE_SLACK {
            return Err(AsqError::DominanceViolation { index });
        }
    }
    let norm_sq = norm2sq(&x_tilde);
    let x_norm_sq = norm2sq(&x);
    let phi = if x_norm_sq == 0.0 { f64::INFINITY } else { (norm_sq / x_norm_sq).max(1.0) };
    let law = SamplingLaw::new(&x_tilde.weights(), 1.0)?;
    Ok(OversampledHandle { inner, x_tilde, law, phi, norm_sq, rng: seeded_rng(seed), ledger: CostLedger::new() })
}

impl<H: AccessHandle> OversampledHandle<H> {
    pub fn inner(&self) -> &H {
        &self.inner
    }
}

impl<H: AccessHandle> AccessHandle for OversampledHandle<H> {
    fn dim(&self) -> usize {
        self.x_tilde.dim()
    }

    fn phi(&self) -> f64 {
        self.phi
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        let outcome = self.law.sample(&mut self.rng);
        self.ledger.record_sample(outcome.index().is_some());
        Ok(outcome)
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        let result = self.inner.query(index, eps)?;
        self.ledger.record_queries(eps, 1);
        Ok(result)
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.ledger.record_norms(eps, 1);
        Ok(self.norm_sq)
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        self.law.valid_counts(n, &mut self.rng, &self.ledger)
    }

    fn query_batch(&mut self, index: usize, eps: f64, reps: u64) -> Result<Vec<Complex64>> {
        let values = self.inner.query_batch(index, eps, reps)?;
        self.ledger.record_queries(eps, reps);
        Ok(values)
    }

    fn exact_entry(&self, index: usize) -> Option<Complex64> {
        self.inner.exact_entry(index)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        let target = self.inner.ground_truth()?.target;
        Some(GroundTruth { target, oversampling: self.x_tilde.clone(), sampling: self.x_tilde.clone() })
    }
}

/// Samples from `D_x′` for an approximation `x′` of the oversampling vector;
/// queries and norms go to the inner handle unchanged.
pub struct PerturbedHandle<H> {
    inner: H,
    x_prime: DenseVector,
    law: SamplingLaw,
    distance: f64,
    budget: f64,
    rng: SeededRng,
    ledger: CostLedger,
}

/// Replaces the sampling law of `inner` by `D_x′`, provided the ℓ1 distance
/// `Σ|D_x̃ − D_x′|` is within `budget`.
pub fn wrap_perturbed<H: AccessHandle>(inner: H, x_prime: DenseVector, budget: f64, seed: u64) -> Result<PerturbedHandle<H>> {
    if !(budget >= 0.0) {
        return Err(AsqError::InvalidParameter(format!("budget must be non-negative, got {budget}")));
    }
    let truth = inner
        .ground_truth()
        .ok_or_else(|| AsqError::InvalidParameter("perturbation needs a handle with known ground truth".into()))?;
    check_dims(truth.oversampling.dim(), x_prime.dim())?;
    let distance = tvd(&l2_distribution(&truth.oversampling)?, &l2_distribution(&x_prime)?)?;
    if distance > budget {
        return Err(AsqError::BudgetExceeded { actual: distance, budget });
    }
    let law = SamplingLaw::new(&x_prime.weights(), 1.0)?;
    Ok(PerturbedHandle { inner, x_prime, law, distance, budget, rng: seeded_rng(seed), ledger: CostLedger::new() })
}

impl<H: AccessHandle> PerturbedHandle<H> {
    /// `Σ|D_x̃ − D_x′|` as computed at construction.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn inner(&self) -> &H {
        &self.inner
    }
}

impl<H: AccessHandle> AccessHandle for PerturbedHandle<H> {
    fn dim(&self) -> usize {
        self.x_prime.dim()
    }

    fn phi(&self) -> f64 {
        self.inner.phi()
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        let outcome = self.law.sample(&mut self.rng);
        self.ledger.record_sample(outcome.index().is_some());
        Ok(outcome)
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        let result = self.inner.query(index, eps)?;
        self.ledger.record_queries(eps, 1);
        Ok(result)
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        let value = self.inner.norm_sq(eps)?;
        self.ledger.record_norms(eps, 1);
        Ok(value)
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        self.law.valid_counts(n, &mut self.rng, &self.ledger)
    }

    fn query_batch(&mut self, index: usize, eps: f64, reps: u64) -> Result<Vec<Complex64>> {
        let values = self.inner.query_batch(index, eps, reps)?;
        self.ledger.record_queries(eps, reps);
        Ok(values)
    }

    fn exact_entry(&self, index: usize) -> Option<Complex64> {
        self.inner.exact_entry(index)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        let truth = self.inner.ground_truth()?;
        Some(GroundTruth { sampling: self.x_prime.clone(), ..truth })
    }
}

/// A dominating vector with `‖x̃‖² = φ‖x‖²`: the extra mass `(φ−1)‖x‖²` is
/// spread over the entries with random weights.
pub fn random_oversampling<R: Rng + ?Sized>(x: &DenseVector, phi: f64, rng: &mut R) -> Result<DenseVector> {
    if !(phi >= 1.0 && phi.is_finite()) {
        return Err(AsqError::InvalidParameter(format!("oversampling factor must be finite and at least 1, got {phi}")));
    }
    let weights: Vec<f64> = (0..x.dim()).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let extra = (phi - 1.0) * norm2sq(x);
    let entries = x
        .entries()
        .iter()
        .zip(&weights)
        .map(|(v, w)| Complex64::new((v.norm_sqr() + extra * w / total).sqrt(), 0.0))
        .collect();
    DenseVector::new(entries)
}

/// A random `x′` whose ℓ2 distribution is at distance `Σ|D_x − D_x′|` of
/// (just below) `target` from that of `x`, found by bisection along a random
/// direction.
pub fn perturb_to_distance<R: Rng + ?Sized>(x: &DenseVector, target: f64, rng: &mut R) -> Result<DenseVector> {
    if !(0.0..2.0).contains(&target) {
        return Err(AsqError::InvalidParameter(format!("distance target must lie in [0,2), got {target}")));
    }
    let base = l2_distribution(x)?;
    let direction = random_complex_unit(x.dim(), rng).scaled(Complex64::new(x.norm(), 0.0));
    let at = |t: f64| -> Result<(DenseVector, f64)> {
        let v = DenseVector::new(x.entries().iter().zip(direction.entries()).map(|(a, b)| a + b * t).collect())?;
        let d = tvd(&base, &l2_distribution(&v)?)?;
        Ok((v, d))
    };
    let mut hi = 1.0;
    while at(hi)?.1 < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(AsqError::InvalidParameter(format!("distance {target} not reachable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.1 <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo)?.0)
}
