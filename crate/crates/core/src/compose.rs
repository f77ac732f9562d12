//! Oversample-and-query access to linear combinations `u = Σ_j λ_j x_j`.
//!
//! Two constructions are provided. [`lincomb_deterministic`] always succeeds
//! but pays the squared condition number of the matrix `X = [x_1 … x_τ]` in its
//! oversampling factor. [`lincomb_probabilistic`] first learns every `‖x̃_j‖²`
//! to relative error 1/2, which removes the condition number at the price of a
//! construction that fails with probability at most δ.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};

use crate::access::{
    boosted_query, check_eps, relative_estimate, repetitions, AccessHandle, GroundTruth, NormSqOracle, QueryResult,
    SampleOutcome, DEFAULT_ITERATION_CAP,
};
use crate::error::{AsqError, Result};
use crate::ledger::CostLedger;
use crate::numeric::{check_dims, lower_median, norm2sq, seeded_rng, DenseVector, SeededRng};

/// Handles over `x_1 … x_τ` (common dimension) and nonzero coefficients.
pub struct LinearCombinationSpec {
    pub handles: Vec<Box<dyn AccessHandle>>,
    pub coefficients: Vec<Complex64>,
}

impl LinearCombinationSpec {
    pub fn new(handles: Vec<Box<dyn AccessHandle>>, coefficients: Vec<Complex64>) -> Result<Self> {
        if handles.is_empty() {
            return Err(AsqError::InvalidParameter("a linear combination needs at least one term".into()));
        }
        check_dims(handles.len(), coefficients.len())?;
        let dim = handles[0].dim();
        for h in &handles[1..] {
            check_dims(dim, h.dim())?;
        }
        if coefficients.iter().any(|c| c.norm() == 0.0 || !c.norm().is_finite()) {
            return Err(AsqError::InvalidParameter("coefficients must be nonzero and finite".into()));
        }
        Ok(Self { handles, coefficients })
    }

    pub fn terms(&self) -> usize {
        self.handles.len()
    }
}

/// Spectral condition number `σ_max/σ_min` of the matrix whose columns are
/// `vectors`; infinite when the columns are linearly dependent.
pub fn condition_number(vectors: &[DenseVector]) -> Result<f64> {
    let first = vectors.first().ok_or_else(|| AsqError::InvalidParameter("no vectors".into()))?;
    let d = first.dim();
    for v in vectors {
        check_dims(d, v.dim())?;
    }
    let x = DMatrix::from_fn(d, vectors.len(), |i, j| vectors[j][i]);
    let sv = x.singular_values();
    let max = sv.max();
    let min = if vectors.len() > d { 0.0 } else { sv.min() };
    if max == 0.0 || min <= max * 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// How the composed handle chooses its term and estimates its norm.
enum Weighting {
    /// Term `j` with probability `|λ_j|²/‖λ‖²`; norm estimated on demand.
    Deterministic,
    /// Term `j` with probability ∝ `|λ_j|² n̂_j²`; stored norm.
    Probabilistic { norm_estimates: Vec<f64>, norm_sq: f64 },
}

/// Access to a linear combination of handles.
pub struct LinearCombinationHandle {
    spec: LinearCombinationSpec,
    weighting: Weighting,
    chooser: WeightedIndex<f64>,
    phi: f64,
    rng: SeededRng,
    ledger: CostLedger,
}

fn target_vector(spec: &LinearCombinationSpec, truths: &[GroundTruth]) -> Result<DenseVector> {
    let d = spec.handles[0].dim();
    let mut u = vec![Complex64::new(0.0, 0.0); d];
    for (lambda, truth) in spec.coefficients.iter().zip(truths) {
        for (slot, x) in u.iter_mut().zip(truth.target.entries()) {
            *slot += lambda * x;
        }
    }
    DenseVector::new(u)
}

fn truths(spec: &LinearCombinationSpec) -> Option<Vec<GroundTruth>> {
    spec.handles.iter().map(|h| h.ground_truth()).collect()
}

/// Deterministic composition.
///
/// * `query(i, ε)` = `Σ_j λ_j·boosted_query(x_j, i, ε/(τ|λ_j|), 1/(6τ))`;
/// * `sample` picks `j` with probability `|λ_j|²/‖λ‖²` and forwards;
/// * `norm_sq(ε)` = `τ‖λ‖² Σ_j n̂_j` with every `n̂_j` the median of
///   `⌈18 ln(3τ)⌉` estimates at precision `ε/(τ²‖λ‖²)`;
/// * declared `φ′ = φτ²κ²`, where φ is the largest constituent factor and
///   κ is `kappa` if given, else computed from ground truth, else infinite.
///   A zero combination declares an infinite φ′.
pub fn lincomb_deterministic(spec: LinearCombinationSpec, kappa: Option<f64>, seed: u64) -> Result<LinearCombinationHandle> {
    let tau = spec.terms() as f64;
    let phi = spec.handles.iter().map(|h| h.phi()).fold(1.0, f64::max);
    let truths = truths(&spec);
    let kappa = match (kappa, &truths) {
        (Some(k), _) => k,
        (None, Some(t)) => condition_number(&t.iter().map(|g| g.target.clone()).collect::<Vec<_>>())?,
        (None, None) => f64::INFINITY,
    };
    let zero = match &truths {
        Some(t) => norm2sq(&target_vector(&spec, t)?) == 0.0,
        None => false,
    };
    let phi_prime = if zero { f64::INFINITY } else { phi * tau * tau * kappa * kappa };
    let weights: Vec<f64> = spec.coefficients.iter().map(|c| c.norm_sqr()).collect();
    let chooser = WeightedIndex::new(&weights).map_err(|e| AsqError::InvalidParameter(e.to_string()))?;
    Ok(LinearCombinationHandle {
        spec,
        weighting: Weighting::Deterministic,
        chooser,
        phi: phi_prime,
        rng: seeded_rng(seed),
        ledger: CostLedger::new(),
    })
}

/// Probabilistic composition.
///
/// A preliminary phase learns `n̂_j² ≈ ‖x̃_j‖²` to relative error 1/2 (each with
/// failure probability δ/τ); afterwards `sample` picks `j` with probability
/// ∝ `|λ_j|² n̂_j²` and `norm_sq` returns the stored `2τ Σ_k |λ_k|² n̂_k²`.
/// The declared `φ′ = 4τφ(Σ_k ‖λ_k x_k‖²)/‖u‖²` needs ground truth and is
/// infinite otherwise.
pub fn lincomb_probabilistic(mut spec: LinearCombinationSpec, delta: f64, seed: u64) -> Result<LinearCombinationHandle> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AsqError::InvalidParameter(format!("failure probability must lie in (0,1), got {delta}")));
    }
    let tau = spec.terms() as f64;
    let mut norm_estimates = Vec::with_capacity(spec.terms());
    for h in spec.handles.iter_mut() {
        let estimate = relative_estimate(&mut NormSqOracle(h.as_mut()), 0.5, delta / tau, DEFAULT_ITERATION_CAP)
            .map_err(|e| AsqError::ConstructionFailed(format!("norm estimate: {e}")))?;
        norm_estimates.push(estimate.value.re.max(0.0));
    }
    let weights: Vec<f64> = spec.coefficients.iter().zip(&norm_estimates).map(|(c, n)| c.norm_sqr() * n).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(AsqError::ConstructionFailed("every norm estimate is zero".into()));
    }
    let chooser = WeightedIndex::new(&weights).map_err(|e| AsqError::ConstructionFailed(e.to_string()))?;
    let phi = spec.handles.iter().map(|h| h.phi()).fold(1.0, f64::max);
    let phi_prime = match truths(&spec) {
        Some(t) => {
            let u = norm2sq(&target_vector(&spec, &t)?);
            let weighted: f64 = spec.coefficients.iter().zip(&t).map(|(c, g)| c.norm_sqr() * norm2sq(&g.target)).sum();
            if u == 0.0 {
                f64::INFINITY
            } else {
                4.0 * tau * phi * weighted / u
            }
        }
        None => f64::INFINITY,
    };
    Ok(LinearCombinationHandle {
        spec,
        weighting: Weighting::Probabilistic { norm_estimates, norm_sq: 2.0 * tau * total },
        chooser,
        phi: phi_prime,
        rng: seeded_rng(seed),
        ledger: CostLedger::new(),
    })
}

impl LinearCombinationHandle {
    pub fn spec(&self) -> &LinearCombinationSpec {
        &self.spec
    }

    /// The stored `n̂_j²` of the probabilistic construction.
    pub fn norm_estimates(&self) -> Option<&[f64]> {
        match &self.weighting {
            Weighting::Probabilistic { norm_estimates, .. } => Some(norm_estimates),
            Weighting::Deterministic => None,
        }
    }

    /// The oversampling vector `ũ` that the sampler realizes.
    fn realized_oversampling(&self, truths: &[GroundTruth]) -> Result<DenseVector> {
        let tau = self.spec.terms() as f64;
        let d = self.spec.handles[0].dim();
        let scaled: Vec<(f64, &DenseVector)> = match &self.weighting {
            Weighting::Deterministic => {
                let total: f64 = truths.iter().map(|t| norm2sq(&t.oversampling)).sum();
                self.spec.coefficients.iter().zip(truths).map(|(c, t)| (tau * total * c.norm_sqr(), &t.oversampling)).collect()
            }
            Weighting::Probabilistic { norm_estimates, .. } => self
                .spec
                .coefficients
                .iter()
                .zip(norm_estimates)
                .zip(truths)
                .map(|((c, n), t)| (2.0 * tau * c.norm_sqr() * n, &t.oversampling))
                .collect(),
        };
        let mut u = vec![0.0; d];
        for (factor, x_tilde) in scaled {
            let norm = norm2sq(x_tilde);
            if norm == 0.0 {
                continue;
            }
            for (slot, z) in u.iter_mut().zip(x_tilde.entries()) {
                *slot += factor * z.norm_sqr() / norm;
            }
        }
        DenseVector::from_real(&u.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
    }
}

impl AccessHandle for LinearCombinationHandle {
    fn dim(&self) -> usize {
        self.spec.handles[0].dim()
    }

    fn phi(&self) -> f64 {
        self.phi
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        let j = self.chooser.sample(&mut self.rng);
        let outcome = self.spec.handles[j].sample()?;
        self.ledger.record_sample(outcome.index().is_some());
        Ok(outcome)
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_eps(eps)?;
        let tau = self.spec.terms();
        let delta = 1.0 / (6.0 * tau as f64);
        let mut value = Complex64::new(0.0, 0.0);
        for (h, lambda) in self.spec.handles.iter_mut().zip(&self.spec.coefficients) {
            value += lambda * boosted_query(h.as_mut(), index, eps / (tau as f64 * lambda.norm()), delta)?;
        }
        self.ledger.record_queries(eps, 1);
        Ok(QueryResult { value, requested_eps: eps })
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.ledger.record_norms(eps, 1);
        match &self.weighting {
            Weighting::Probabilistic { norm_sq, .. } => Ok(*norm_sq),
            Weighting::Deterministic => {
                let tau = self.spec.terms() as f64;
                let lambda_sq: f64 = self.spec.coefficients.iter().map(|c| c.norm_sqr()).sum();
                let per_term = eps / (tau * tau * lambda_sq);
                let reps = repetitions(1.0 / (3.0 * tau));
                let mut total = 0.0;
                for h in self.spec.handles.iter_mut() {
                    let mut estimates = (0..reps).map(|_| h.norm_sq(per_term)).collect::<Result<Vec<_>>>()?;
                    total += lower_median(&mut estimates);
                }
                Ok(tau * lambda_sq * total)
            }
        }
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn exact_entry(&self, index: usize) -> Option<Complex64> {
        let mut value = Complex64::new(0.0, 0.0);
        for (h, lambda) in self.spec.handles.iter().zip(&self.spec.coefficients) {
            value += lambda * h.exact_entry(index)?;
        }
        Some(value)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        let truths = truths(&self.spec)?;
        let target = target_vector(&self.spec, &truths).ok()?;
        let oversampling = self.realized_oversampling(&truths).ok()?;
        Some(GroundTruth { target, sampling: oversampling.clone(), oversampling })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ExactHandle;

    fn boxed(v: DenseVector, seed: u64) -> Box<dyn AccessHandle> {
        Box::new(ExactHandle::new(v, seed))
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn worked_example() {
        let spec = LinearCombinationSpec::new(
            vec![boxed(DenseVector::basis(2, 0).unwrap(), 1), boxed(DenseVector::basis(2, 1).unwrap(), 2)],
            vec![c(3.0), c(4.0)],
        )
        .unwrap();
        let mut h = lincomb_deterministic(spec, None, 3).unwrap();
        assert!((h.phi() - 4.0).abs() < 1e-12);
        let truth = h.ground_truth().unwrap();
        assert_eq!(truth.oversampling, DenseVector::from_real(&[6.0, 8.0]).unwrap());
        assert_eq!(norm2sq(&truth.oversampling) / norm2sq(&truth.target), 4.0);
        assert_eq!(h.norm_sq(0.1).unwrap(), 100.0);
        assert_eq!(h.query(1, 0.1).unwrap().value, c(4.0));
        let ones = (0..10_000).filter(|_| h.sample_valid().unwrap() == 1).count();
        assert!((ones as f64 / 1e4 - 0.64).abs() < 0.02);
    }

    #[test]
    fn single_term_is_transparent() {
        let x = DenseVector::from_real(&[0.6, 0.8]).unwrap();
        let spec = LinearCombinationSpec::new(vec![boxed(x.clone(), 1)], vec![c(1.0)]).unwrap();
        let mut h = lincomb_deterministic(spec, None, 3).unwrap();
        assert_eq!(h.phi(), 1.0);
        assert_eq!(h.query(0, 0.05).unwrap().value, c(0.6));
        assert_eq!(h.ground_truth().unwrap().oversampling, x);
    }

    #[test]
    fn cancellation_reports_infinite_phi() {
        let e = DenseVector::basis(2, 0).unwrap();
        let spec = LinearCombinationSpec::new(vec![boxed(e.clone(), 1), boxed(e, 2)], vec![c(1.0), c(-1.0)]).unwrap();
        let mut h = lincomb_deterministic(spec, None, 3).unwrap();
        assert!(h.phi().is_infinite());
        assert_eq!(h.sample_valid().unwrap(), 0);
        assert!(h.query(0, 0.1).unwrap().value.norm() <= 0.1);
    }

    #[test]
    fn probabilistic_examples() {
        let spec = LinearCombinationSpec::new(
            vec![boxed(DenseVector::basis(2, 0).unwrap(), 1), boxed(DenseVector::basis(2, 1).unwrap(), 2)],
            vec![c(1.0), c(1.0)],
        )
        .unwrap();
        let mut h = lincomb_probabilistic(spec, 0.1, 3).unwrap();
        assert!((h.phi() - 8.0).abs() < 1e-12);
        let before = h.ledger().snapshot();
        assert_eq!(h.norm_sq(0.01).unwrap(), 8.0);
        assert_eq!(h.ledger().snapshot().since(&before).total_norms(), 1);

        let x = DenseVector::from_real(&[0.6, 0.8]).unwrap();
        let spec = LinearCombinationSpec::new(vec![boxed(x, 1)], vec![c(5.0)]).unwrap();
        let h = lincomb_probabilistic(spec, 0.1, 3).unwrap();
        assert!((h.phi() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn condition_numbers() {
        let e0 = DenseVector::basis(3, 0).unwrap();
        let e1 = DenseVector::basis(3, 1).unwrap();
        assert!((condition_number(&[e0.clone(), e1.clone()]).unwrap() - 1.0).abs() < 1e-12);
        assert!((condition_number(&[e0.clone(), e1.scaled(c(2.0))]).unwrap() - 2.0).abs() < 1e-12);
        assert!(condition_number(&[e0.clone(), e0]).unwrap().is_infinite());
    }
}
