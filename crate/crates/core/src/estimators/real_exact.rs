use num_complex::Complex64;
use rand::Rng;

use super::sym::merged_ledgers;
use super::{Diagnostics, DrawRecord, Estimate, InnerProductConfig, PointEstimatorTrace, SUCCESS_PROB};
use crate::access::{boosted_query, AccessHandle, EstimatorReport};
use crate::error::{AsqError, Result};
use crate::numeric::{check_dims, seeded_rng};

const UNIT_TOLERANCE: f64 = 1e-9;

/// Number of draws `⌈16/ε²⌉`.
pub fn real_exact_draws(eps: f64) -> u64 {
    (16.0 / (eps * eps)).ceil() as u64
}

fn check_ground_truth<H: AccessHandle + ?Sized>(h: &H, delta: f64) -> Result<()> {
    let Some(truth) = h.ground_truth() else { return Ok(()) };
    let norm = truth.target.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(AsqError::NonUnitNorm { norm });
    }
    if !truth.target.is_real() {
        return Err(AsqError::InvalidParameter("real-exact estimation needs real vectors".into()));
    }
    let distance = truth.target.distance(&truth.sampling)?;
    if distance > delta / 2.0 + UNIT_TOLERANCE {
        return Err(AsqError::BudgetExceeded { actual: 2.0 * distance, budget: delta });
    }
    Ok(())
}

/// Estimates `xᵀy` for real unit vectors with error-free queries, sampling
/// from `x′`, `y′` with `‖x − x′‖, ‖y − y′‖ ≤ Δ/2` (Δ from
/// `cfg.perturbation`, default 0) and `κ ≥ min(‖x‖₁, ‖y‖₁)`.
///
/// The sampling probability is recomputed from the two queried entries, so no
/// histogram is needed. The error bound is `ε + Δ`.
pub fn inner_product_real_exact<H1, H2>(hx: &mut H1, hy: &mut H2, cfg: &InnerProductConfig, kappa: f64, seed: u64) -> Result<Estimate>
where
    H1: AccessHandle + ?Sized,
    H2: AccessHandle + ?Sized,
{
    check_dims(hx.dim(), hy.dim())?;
    if !(kappa >= 1.0) {
        return Err(AsqError::InvalidParameter(format!("1-norm bound of a unit vector must be at least 1, got {kappa}")));
    }
    let delta = cfg.perturbation.unwrap_or(0.0);
    check_ground_truth(&*hx, delta)?;
    check_ground_truth(&*hy, delta)?;
    let (bx, by) = (hx.ledger().snapshot(), hy.ledger().snapshot());
    let c = cfg.constants;
    let eps = cfg.eps;
    let gamma = c.c1 * eps / kappa;
    let eps_q = c.c2 * eps * eps / kappa;
    let draws = real_exact_draws(eps);
    let improve_delta = 1.0 / (18.0 * draws as f64);
    let threshold = 1.5 * gamma;

    let mut rng = seeded_rng(seed);
    let mut sum = 0.0;
    let mut accepted = 0;
    let mut trace = cfg.record_trace.then(|| PointEstimatorTrace { draws: Vec::new(), threshold, strict: true });
    for _ in 0..draws {
        let index = if rng.gen_bool(0.5) { hx.sample_valid()? } else { hy.sample_valid()? };
        let x_hat = boosted_query(&mut *hx, index, eps_q, improve_delta)?.re;
        let y_hat = boosted_query(&mut *hy, index, eps_q, improve_delta)?.re;
        let p_hat = (x_hat * x_hat + y_hat * y_hat) / 2.0;
        let accept = p_hat.sqrt() > threshold;
        let value = if accept { x_hat * y_hat / p_hat } else { 0.0 };
        sum += value;
        accepted += accept as u64;
        if let Some(t) = trace.as_mut() {
            t.draws.push(DrawRecord {
                index,
                p_hat,
                accepted: accept,
                x_hat: Some(Complex64::new(x_hat, 0.0)),
                y_value: Some(Complex64::new(y_hat, 0.0)),
                contribution: Complex64::new(value, 0.0),
            });
        }
    }
    let report = EstimatorReport {
        estimate: Complex64::new(sum / draws as f64, 0.0),
        error_bound: eps + delta,
        success_prob: SUCCESS_PROB,
        ledger: merged_ledgers(&*hx, &*hy, &bx, &by),
    };
    let diagnostics = Diagnostics {
        norm_estimates: Vec::new(),
        gamma,
        histogram_samples: 0,
        draws,
        accepted,
        improve_reps: crate::access::repetitions(improve_delta),
    };
    Ok(Estimate { report, trace, diagnostics })
}
