use num_complex::Complex64;

use super::{histogram_size, ledger_delta, norm_estimate, Diagnostics, DrawRecord, Estimate, InnerProductConfig, PointEstimatorTrace, SUCCESS_PROB};
use crate::access::{repetitions, AccessHandle, EstimatorReport};
use crate::error::Result;
use crate::histogram::Histogram;
use crate::numeric::{check_dims, one_norm, DenseVector};
use std::f64::consts::SQRT_2;

/// Norm estimate, rejection scale and learned histogram of the asymmetric
/// estimator; each call to [`AsymmetricEstimator::draw`] is one evaluation of
/// the point estimator.
pub struct AsymmetricEstimator<'a, H: AccessHandle + ?Sized> {
    hx: &'a mut H,
    y: &'a DenseVector,
    eps: f64,
    n_hat_sq: f64,
    gamma: f64,
    histogram: Histogram,
    improve_eps: f64,
    improve_reps: u64,
}

/// `(histogram samples, draws)` for a given norm estimate.
pub fn asym_sample_budget(eps: f64, n_hat_sq: f64, dim: usize) -> (u64, u64) {
    let gamma = eps * eps / (135.0 * n_hat_sq);
    (histogram_size(512.0, gamma, dim), (7.0 * n_hat_sq / (eps * eps)).ceil() as u64)
}

impl<'a, H: AccessHandle + ?Sized> AsymmetricEstimator<'a, H> {
    /// Runs the norm estimate and the histogram phase.
    pub fn prepare(hx: &'a mut H, y: &'a DenseVector, cfg: &InnerProductConfig) -> Result<Self> {
        check_dims(hx.dim(), y.dim())?;
        let eps = cfg.eps;
        let n_hat_sq = norm_estimate(&mut *hx, 0.25, 1.0 / 9.0, cfg.iteration_cap)?;
        let gamma = eps * eps / (135.0 * n_hat_sq);
        let histogram = hx.sample_valid_counts(histogram_size(512.0, gamma, hx.dim()))?;
        let improve_delta = (eps * eps / (127.0 * n_hat_sq)).min(0.5);
        Ok(Self {
            hx,
            y,
            eps,
            n_hat_sq,
            gamma,
            histogram,
            improve_eps: eps / 4.0 / SQRT_2,
            improve_reps: repetitions(improve_delta),
        })
    }

    pub fn n_hat_sq(&self) -> f64 {
        self.n_hat_sq
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Estimated probability of `index` from the histogram.
    pub fn p_hat(&self, index: usize) -> f64 {
        self.histogram.frequency(index)
    }

    /// Number of draws the estimator averages.
    pub fn draw_count(&self) -> u64 {
        (7.0 * self.n_hat_sq / (self.eps * self.eps)).ceil() as u64
    }

    /// One sample of the point estimator.
    pub fn draw(&mut self) -> Result<DrawRecord> {
        let index = self.hx.sample_valid()?;
        let p_hat = self.histogram.frequency(index);
        let y_value = self.y[index];
        if p_hat < 1.5 * self.gamma {
            return Ok(DrawRecord { index, p_hat, accepted: false, x_hat: None, y_value: Some(y_value), contribution: Complex64::new(0.0, 0.0) });
        }
        let x_hat = self.hx.median_query(index, self.improve_eps, self.improve_reps)?;
        let contribution = x_hat.conj() * y_value / (p_hat + self.gamma / 2.0);
        Ok(DrawRecord { index, p_hat, accepted: true, x_hat: Some(x_hat), y_value: Some(y_value), contribution })
    }

    fn finish(mut self, record_trace: bool) -> Result<(Complex64, Diagnostics, Option<PointEstimatorTrace>)> {
        let draws = self.draw_count();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut accepted = 0;
        let mut trace = record_trace.then(|| PointEstimatorTrace { draws: Vec::new(), threshold: 1.5 * self.gamma, strict: false });
        for _ in 0..draws {
            let d = self.draw()?;
            sum += d.contribution;
            accepted += d.accepted as u64;
            if let Some(t) = trace.as_mut() {
                t.draws.push(d);
            }
        }
        let diagnostics = Diagnostics {
            norm_estimates: vec![self.n_hat_sq],
            gamma: self.gamma,
            histogram_samples: self.histogram.total(),
            draws,
            accepted,
            improve_reps: self.improve_reps,
        };
        Ok((sum / draws.max(1) as f64, diagnostics, trace))
    }
}

/// Estimates `x†y` from φ-oversampled access to `x` and exact reads of `y`.
///
/// Rejected draws count as zero in the average. The error bound is `ε‖y‖₁`.
pub fn inner_product_asym<H: AccessHandle + ?Sized>(hx: &mut H, y: &DenseVector, cfg: &InnerProductConfig) -> Result<Estimate> {
    let before = hx.ledger().snapshot();
    let est = AsymmetricEstimator::prepare(&mut *hx, y, cfg)?;
    let (estimate, diagnostics, trace) = est.finish(cfg.record_trace)?;
    let report = EstimatorReport {
        estimate,
        error_bound: cfg.eps * one_norm(y),
        success_prob: SUCCESS_PROB,
        ledger: ledger_delta(&*hx, &before),
    };
    Ok(Estimate { report, trace, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{wrap_oversampled, ExactHandle};
    use crate::estimators::Mode;
    use crate::error::AsqError;
    use crate::numeric::{norm2sq, random_complex_unit, seeded_rng};
    use rand::Rng;

    fn cfg(eps: f64) -> InnerProductConfig {
        InnerProductConfig::new(eps, Mode::Asymmetric).unwrap()
    }

    #[test]
    fn basis_vector_self_overlap() {
        let e1 = DenseVector::basis(4, 0).unwrap();
        let ok = (0..300)
            .filter(|&s| {
                let mut h = ExactHandle::new(e1.clone(), s);
                let r = inner_product_asym(&mut h, &e1, &cfg(0.1)).unwrap().report;
                (r.estimate - 1.0).norm() <= 0.1
            })
            .count();
        assert!(ok >= 285, "{ok}");
    }

    #[test]
    fn orthogonal_pair() {
        let mut rng = seeded_rng(5);
        for s in 0..20 {
            let i = rng.gen_range(0..16);
            let j = (i + 1 + rng.gen_range(0..15)) % 16;
            let x = DenseVector::basis(16, i).unwrap();
            let y = DenseVector::basis(16, j).unwrap();
            let mut h = ExactHandle::new(x, s);
            let r = inner_product_asym(&mut h, &y, &cfg(0.1)).unwrap().report;
            assert!(r.estimate.norm() <= r.error_bound);
        }
    }

    #[test]
    fn zero_vector_fails_norm_estimate() {
        let x = DenseVector::new(vec![Complex64::new(0.0, 0.0); 4]).unwrap();
        let y = DenseVector::basis(4, 0).unwrap();
        let mut h = ExactHandle::new(x, 0);
        let mut c = cfg(0.5);
        c.iteration_cap = 8;
        assert!(matches!(inner_product_asym(&mut h, &y, &c), Err(AsqError::RelativeEstimateFailed(_))));
    }

    #[test]
    fn trace_is_consistent_and_budget_holds() {
        let mut rng = seeded_rng(9);
        let x = random_complex_unit(64, &mut rng);
        let y = random_complex_unit(64, &mut rng);
        let mut h = ExactHandle::new(x, 3);
        let est = inner_product_asym(&mut h, &y, &cfg(0.2).with_trace()).unwrap();
        let trace = est.trace.unwrap();
        assert_eq!(trace.draws.len() as u64, est.diagnostics.draws);
        assert!(trace.is_consistent(|d| d.p_hat));
        let (hist, draws) = asym_sample_budget(0.2, est.diagnostics.norm_estimates[0], 64);
        assert_eq!(est.report.ledger.sample_calls, hist + draws);
        assert_eq!(est.report.ledger.total_queries(), est.diagnostics.accepted * est.diagnostics.improve_reps);
    }

    #[test]
    fn bias_and_variance_envelopes() {
        // Point-estimator mean and variance over many draws against x†y.
        let mut rng = seeded_rng(21);
        let d = 32;
        let x = random_complex_unit(d, &mut rng);
        let y = random_complex_unit(d, &mut rng);
        let truth = x.inner(&y).unwrap();
        let x_tilde = DenseVector::new(x.entries().iter().map(|v| Complex64::new(v.norm() + 0.1, 0.0)).collect()).unwrap();
        let eps = 0.2;
        let mut h = wrap_oversampled(ExactHandle::new(x, 1), x_tilde.clone(), 2).unwrap();
        let c = cfg(eps);
        let mut est = AsymmetricEstimator::prepare(&mut h, &y, &c).unwrap();
        let n = 1_000_000u64;
        let (mut sum, mut sum_sq) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            let v = est.draw().unwrap().contribution;
            sum += v;
            sum_sq += v.norm_sqr();
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean.norm_sqr();
        let sigma = var.sqrt();
        assert!((mean - truth).norm() <= 2.0 / 3.0 * eps * one_norm(&y) + 3.0 * sigma / 1e3, "{mean} vs {truth}");
        assert!(var <= 10.0 * norm2sq(&x_tilde) * norm2sq(&y), "{var}");
    }
}
