use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use super::sym::{merged_ledgers, mixture_median, MixturePlan};
use super::{
    histogram_size, inner_product_asym, inner_product_sym, ledger_delta, peakedness, Constants, Diagnostics, DrawRecord, Estimate,
    InnerProductConfig, PointEstimatorTrace, SUCCESS_PROB,
};
use crate::access::{repetitions, AccessHandle, EstimatorReport};
use crate::backends::PerturbedHandle;
use crate::error::{AsqError, Result};
use crate::numeric::{check_dims, one_norm, seeded_rng, DenseVector};

/// `3(1+2C₁)² + 3C₁²/C₃ + 3C₂²/C₃`, the variance factor of the perturbed
/// asymmetric point estimator (in units of `φ‖y‖²`).
pub fn perturbed_variance_constant(c: &Constants) -> f64 {
    3.0 * (1.0 + 2.0 * c.c1).powi(2) + 3.0 * c.c1 * c.c1 / c.c3 + 3.0 * c.c2 * c.c2 / c.c3
}

/// Draws of the perturbed asymmetric estimator: `⌈81·V·φ/ε²⌉`, enough for
/// the mean to be within `ε‖y‖/9` of its expectation with probability 8/9.
pub fn perturbed_asym_draws(eps: f64, phi: f64, c: &Constants) -> u64 {
    (81.0 * perturbed_variance_constant(c) * phi / (eps * eps)).ceil() as u64
}

/// Largest admissible sampling distance for the asymmetric variant, `C₁ε/√φ`.
pub fn asym_perturbation_budget(eps: f64, phi: f64, c: &Constants) -> f64 {
    c.c1 * eps / phi.sqrt()
}

/// Largest admissible sampling distance for the symmetric variant, `C₁ε/φ`.
pub fn sym_perturbation_budget(eps: f64, phi: f64, c: &Constants) -> f64 {
    c.c1 * eps / phi
}

fn check_phi(phi: f64) -> Result<()> {
    if !(phi >= 1.0 && phi.is_finite()) {
        return Err(AsqError::InvalidParameter(format!("oversampling bound must be finite and at least 1, got {phi}")));
    }
    Ok(())
}

fn check_budget<H: AccessHandle>(h: &PerturbedHandle<H>, allowed: f64) -> Result<()> {
    if h.distance() > allowed {
        return Err(AsqError::BudgetExceeded { actual: h.distance(), budget: allowed });
    }
    Ok(())
}

/// Estimates `x†y` when sampling follows `D_x′` instead of `D_x̃`.
///
/// Rejection scale `ε_P = C₃ε²/φ`, entry precision `C₂ε`, distance budget
/// `C₁ε/√φ`. A handle at distance zero runs the exact-sampling estimator, so
/// both coincide seed for seed. The error bound is `ε‖y‖₁`.
pub fn inner_product_asym_perturbed<H: AccessHandle>(
    hx: &mut PerturbedHandle<H>,
    y: &DenseVector,
    cfg: &InnerProductConfig,
    phi: f64,
) -> Result<Estimate> {
    check_dims(hx.dim(), y.dim())?;
    check_phi(phi)?;
    let (eps, c) = (cfg.eps, cfg.constants);
    check_budget(hx, asym_perturbation_budget(eps, phi, &c))?;
    if hx.distance() == 0.0 {
        return inner_product_asym(hx, y, cfg);
    }

    let before = hx.ledger().snapshot();
    let eps_p = c.c3 * eps * eps / phi;
    let histogram_samples = histogram_size(2.0, eps_p, hx.dim());
    let histogram = hx.sample_valid_counts(histogram_samples)?;
    let draws = perturbed_asym_draws(eps, phi, &c);
    let reps = repetitions(1.0 / (18.0 * draws as f64));
    let raw_eps = c.c2 * eps / SQRT_2;
    let threshold = 1.5 * eps_p;

    let mut sum = Complex64::new(0.0, 0.0);
    let mut accepted = 0;
    let mut trace = cfg.record_trace.then(|| PointEstimatorTrace { draws: Vec::new(), threshold, strict: true });
    for _ in 0..draws {
        let index = hx.sample_valid()?;
        let p_hat = histogram.frequency(index);
        let y_value = y[index];
        let record = if p_hat <= threshold {
            DrawRecord { index, p_hat, accepted: false, x_hat: None, y_value: Some(y_value), contribution: Complex64::new(0.0, 0.0) }
        } else {
            accepted += 1;
            let x_hat = hx.median_query(index, raw_eps, reps)?;
            let contribution = x_hat.conj() * y_value / (p_hat + eps_p / 2.0);
            DrawRecord { index, p_hat, accepted: true, x_hat: Some(x_hat), y_value: Some(y_value), contribution }
        };
        sum += record.contribution;
        if let Some(t) = trace.as_mut() {
            t.draws.push(record);
        }
    }
    let report = EstimatorReport {
        estimate: sum / draws as f64,
        error_bound: eps * one_norm(y),
        success_prob: SUCCESS_PROB,
        ledger: ledger_delta(&*hx, &before),
    };
    let diagnostics = Diagnostics { norm_estimates: Vec::new(), gamma: eps_p, histogram_samples, draws, accepted, improve_reps: reps };
    Ok(Estimate { report, trace, diagnostics })
}

/// Symmetric estimation when neither sampler is exact.
///
/// Rejection scale `γ = C₂ε²/φ`, entry precision `C₃ε²/φ`, distance budget
/// `C₁ε/φ` per handle, `⌈864(1+2φ)²ε⁻²⌉` draws and a median. Two handles at
/// distance zero run the exact-sampling estimator. The error bound is
/// `ε[1 + min(‖x‖₁, ‖y‖₁)]`.
pub fn inner_product_sym_perturbed<H1: AccessHandle, H2: AccessHandle>(
    hx: &mut PerturbedHandle<H1>,
    hy: &mut PerturbedHandle<H2>,
    cfg: &InnerProductConfig,
    phi: f64,
    seed: u64,
) -> Result<Estimate> {
    check_dims(hx.dim(), hy.dim())?;
    check_phi(phi)?;
    let (eps, c) = (cfg.eps, cfg.constants);
    let allowed = sym_perturbation_budget(eps, phi, &c);
    check_budget(hx, allowed)?;
    check_budget(hy, allowed)?;
    if hx.distance() == 0.0 && hy.distance() == 0.0 {
        return inner_product_sym(hx, hy, cfg, seed);
    }

    let (bx, by) = (hx.ledger().snapshot(), hy.ledger().snapshot());
    let gamma = c.c2 * eps * eps / phi;
    let eps_q = c.c3 * eps * eps / phi;
    let draws = (864.0 * (1.0 + 2.0 * phi).powi(2) / (eps * eps)).ceil() as u64;
    let plan = MixturePlan {
        gamma,
        raw_eps_x: eps_q / SQRT_2,
        raw_eps_y: eps_q / SQRT_2,
        histogram_samples: histogram_size(2.0, gamma, hx.dim()),
        draws,
        reps: repetitions(1.0 / (18.0 * draws as f64)),
    };
    let mut rng = seeded_rng(seed);
    let (estimate, accepted, trace) = mixture_median(&mut *hx, &mut *hy, &plan, cfg.record_trace, &mut rng)?;
    let report = EstimatorReport {
        estimate,
        error_bound: eps * (1.0 + peakedness(&*hx, &*hy, false)),
        success_prob: SUCCESS_PROB,
        ledger: merged_ledgers(&*hx, &*hy, &bx, &by),
    };
    let diagnostics = Diagnostics {
        norm_estimates: Vec::new(),
        gamma,
        histogram_samples: plan.histogram_samples,
        draws,
        accepted,
        improve_reps: plan.reps,
    };
    Ok(Estimate { report, trace, diagnostics })
}
