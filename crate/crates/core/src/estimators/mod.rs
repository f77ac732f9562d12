//! Inner-product estimators over sample-and-query access.
//!
//! All estimators share one shape: learn an empirical sampling distribution
//! (histogram phase), then average or median a rejection-filtered importance
//! estimator over fresh draws (estimation phase). Draws whose estimated
//! probability is below a threshold are rejected and contribute zero.

mod asym;
mod perturbed;
mod real_exact;
mod sym;

pub use asym::{asym_sample_budget, inner_product_asym, AsymmetricEstimator};
pub use perturbed::{
    asym_perturbation_budget, inner_product_asym_perturbed, inner_product_sym_perturbed, perturbed_asym_draws, perturbed_variance_constant,
    sym_perturbation_budget,
};
pub use real_exact::{inner_product_real_exact, real_exact_draws};
pub use sym::{inner_product_sym, sym_draws};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::access::{relative_estimate, AccessHandle, EstimatorReport, NormSqOracle};
use crate::error::{AsqError, Result};
use crate::ledger::LedgerSnapshot;
use crate::numeric::{one_norm, DenseVector};

/// The "suitably chosen constants" of the approximate-sampling and real-exact
/// estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c1: 1.0 / 8.0, c2: 1.0 / 16.0, c3: 1.0 / 16.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Asymmetric,
    Symmetric,
    RealExact,
}

/// Parameters shared by every estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerProductConfig {
    /// Target precision ε ∈ (0, 1].
    pub eps: f64,
    pub mode: Mode,
    /// Sampling-distance budget Δ, for the approximate-sampling variants and
    /// the real-exact estimator.
    pub perturbation: Option<f64>,
    pub constants: Constants,
    /// Iteration cap of the relative-error norm estimates.
    pub iteration_cap: u32,
    /// Keep a per-draw record (disables aggregated fast paths).
    pub record_trace: bool,
}

impl InnerProductConfig {
    pub fn new(eps: f64, mode: Mode) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(AsqError::InvalidParameter(format!("precision must lie in (0,1], got {eps}")));
        }
        Ok(Self {
            eps,
            mode,
            perturbation: None,
            constants: Constants::default(),
            iteration_cap: crate::access::DEFAULT_ITERATION_CAP,
            record_trace: false,
        })
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_perturbation(mut self, delta: f64) -> Self {
        self.perturbation = Some(delta);
        self
    }

    pub fn with_constants(mut self, constants: Constants) -> Self {
        self.constants = constants;
        self
    }
}

/// One draw of a point estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawRecord {
    pub index: usize,
    /// Estimated sampling probability (for the real-exact estimator, the
    /// probability recomputed from the two queried entries).
    pub p_hat: f64,
    pub accepted: bool,
    pub x_hat: Option<Complex64>,
    /// Exact `y(i)` for the asymmetric estimators, else the queried estimate.
    pub y_value: Option<Complex64>,
    pub contribution: Complex64,
}

/// Every draw of one estimator run, with the rejection rule in force.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointEstimatorTrace {
    pub draws: Vec<DrawRecord>,
    /// Acceptance threshold on the compared quantity.
    pub threshold: f64,
    /// Whether acceptance is `> threshold` (strict) or `≥ threshold`.
    pub strict: bool,
}

impl PointEstimatorTrace {
    /// Accepted draws pass the threshold and rejected draws contribute zero.
    pub fn is_consistent(&self, compared: impl Fn(&DrawRecord) -> f64) -> bool {
        self.draws.iter().all(|d| {
            let value = compared(d);
            if d.accepted {
                if self.strict {
                    value > self.threshold
                } else {
                    value >= self.threshold
                }
            } else {
                d.contribution == Complex64::new(0.0, 0.0)
                    && if self.strict { value <= self.threshold } else { value < self.threshold }
            }
        })
    }
}

/// Intermediate quantities of a run, for auditing call budgets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Estimated squared norms (`n̂²`), in handle order.
    pub norm_estimates: Vec<f64>,
    /// Rejection scale (γ, ε_P, …).
    pub gamma: f64,
    pub histogram_samples: u64,
    pub draws: u64,
    pub accepted: u64,
    /// Raw queries behind one boosted entry estimate.
    pub improve_reps: u64,
}

/// The report plus optional trace and diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub report: EstimatorReport,
    pub trace: Option<PointEstimatorTrace>,
    pub diagnostics: Diagnostics,
}

/// The promised probability of every estimator.
pub const SUCCESS_PROB: f64 = 2.0 / 3.0;

pub(crate) fn ledger_delta<H: AccessHandle + ?Sized>(h: &H, before: &LedgerSnapshot) -> LedgerSnapshot {
    h.ledger().snapshot().since(before)
}

/// `min(‖x‖₁/‖x‖, ‖y‖₁/‖y‖)` from ground truth, or the worst case `√d`.
pub(crate) fn peakedness<H1: AccessHandle + ?Sized, H2: AccessHandle + ?Sized>(hx: &H1, hy: &H2, normalized: bool) -> f64 {
    let ratio = |v: &DenseVector| {
        let n = v.norm();
        if n == 0.0 {
            0.0
        } else if normalized {
            one_norm(v) / n
        } else {
            one_norm(v)
        }
    };
    match (hx.ground_truth(), hy.ground_truth()) {
        (Some(a), Some(b)) => ratio(&a.target).min(ratio(&b.target)),
        _ => (hx.dim() as f64).sqrt(),
    }
}

/// `n̂²` via the relative-error estimator on `norm_sq`.
pub(crate) fn norm_estimate<H: AccessHandle + ?Sized>(h: &mut H, rho: f64, delta: f64, cap: u32) -> Result<f64> {
    let est = relative_estimate(&mut NormSqOracle(h), rho, delta, cap).map_err(|e| AsqError::RelativeEstimateFailed(Box::new(e)))?;
    Ok(est.value.norm())
}

/// `⌈2 g⁻² ln(18d)⌉`-style histogram sizes.
pub(crate) fn histogram_size(factor: f64, gamma: f64, dim: usize) -> u64 {
    (factor / (gamma * gamma) * (18.0 * dim as f64).ln()).ceil() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(InnerProductConfig::new(0.0, Mode::Asymmetric).is_err());
        assert!(InnerProductConfig::new(1.5, Mode::Asymmetric).is_err());
        let cfg = InnerProductConfig::new(1.0, Mode::Symmetric).unwrap();
        assert_eq!(cfg.constants, Constants { c1: 0.125, c2: 0.0625, c3: 0.0625 });
    }
}
