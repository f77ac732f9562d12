use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use super::{histogram_size, ledger_delta, norm_estimate, peakedness, Diagnostics, DrawRecord, Estimate, InnerProductConfig, PointEstimatorTrace, SUCCESS_PROB};
use crate::access::{repetitions, AccessHandle, EstimatorReport};
use crate::error::Result;
use crate::histogram::Histogram;
use crate::numeric::{binomial, check_dims, complex_median, seeded_rng, weighted_lower_median, SeededRng};

/// Number of draws `⌈864(1+2n̂ₓ²)(1+2n̂ᵧ²)ε⁻²⌉`.
pub fn sym_draws(eps: f64, nx_sq: f64, ny_sq: f64) -> u64 {
    (864.0 * (1.0 + 2.0 * nx_sq) * (1.0 + 2.0 * ny_sq) / (eps * eps)).ceil() as u64
}

/// Parameters of one median-of-mixture run.
pub(crate) struct MixturePlan {
    pub gamma: f64,
    /// Raw query precisions (already divided by √2 for the booster).
    pub raw_eps_x: f64,
    pub raw_eps_y: f64,
    pub histogram_samples: u64,
    pub draws: u64,
    pub reps: u64,
}

/// `n` valid samples from the fair mixture of the two samplers.
fn mixture_counts<H1, H2>(hx: &mut H1, hy: &mut H2, n: u64, rng: &mut SeededRng) -> Result<Histogram>
where
    H1: AccessHandle + ?Sized,
    H2: AccessHandle + ?Sized,
{
    let from_x = binomial(n, 0.5, rng);
    let mut h = hx.sample_valid_counts(from_x)?;
    h.absorb(&hy.sample_valid_counts(n - from_x)?);
    Ok(h)
}

/// Histogram phase, then the median of `draws` rejection-filtered point
/// estimates `(p̂ + γ/2)⁻¹ x̂* ŷ` over mixture draws.
pub(crate) fn mixture_median<H1, H2>(
    hx: &mut H1,
    hy: &mut H2,
    plan: &MixturePlan,
    record_trace: bool,
    rng: &mut SeededRng,
) -> Result<(Complex64, u64, Option<PointEstimatorTrace>)>
where
    H1: AccessHandle + ?Sized,
    H2: AccessHandle + ?Sized,
{
    let histogram = mixture_counts(hx, hy, plan.histogram_samples, rng)?;
    let threshold = 1.5 * plan.gamma;
    let aggregated = !record_trace && hx.exact_entry(0).is_some() && hy.exact_entry(0).is_some();

    if aggregated {
        // Error-free queries make a draw's contribution a function of its
        // index alone, so identical draws are evaluated once.
        let draws = mixture_counts(hx, hy, plan.draws, rng)?;
        let mut re = Vec::with_capacity(draws.len());
        let mut im = Vec::with_capacity(draws.len());
        let mut accepted = 0;
        for (index, count) in draws.entries() {
            let p_hat = histogram.frequency(index);
            if p_hat <= threshold {
                re.push((0.0, count));
                im.push((0.0, count));
                continue;
            }
            accepted += count;
            let x_hat = hx.median_query(index, plan.raw_eps_x, count * plan.reps)?;
            let y_hat = hy.median_query(index, plan.raw_eps_y, count * plan.reps)?;
            let v = x_hat.conj() * y_hat / (p_hat + plan.gamma / 2.0);
            re.push((v.re, count));
            im.push((v.im, count));
        }
        let estimate = Complex64::new(weighted_lower_median(&mut re), weighted_lower_median(&mut im));
        return Ok((estimate, accepted, None));
    }

    let mut values = Vec::with_capacity(plan.draws as usize);
    let mut accepted = 0;
    let mut trace = record_trace.then(|| PointEstimatorTrace { draws: Vec::new(), threshold, strict: true });
    for _ in 0..plan.draws {
        let index = if rng.gen_bool(0.5) { hx.sample_valid()? } else { hy.sample_valid()? };
        let p_hat = histogram.frequency(index);
        let record = if p_hat <= threshold {
            DrawRecord { index, p_hat, accepted: false, x_hat: None, y_value: None, contribution: Complex64::new(0.0, 0.0) }
        } else {
            accepted += 1;
            let x_hat = hx.median_query(index, plan.raw_eps_x, plan.reps)?;
            let y_hat = hy.median_query(index, plan.raw_eps_y, plan.reps)?;
            let contribution = x_hat.conj() * y_hat / (p_hat + plan.gamma / 2.0);
            DrawRecord { index, p_hat, accepted: true, x_hat: Some(x_hat), y_value: Some(y_hat), contribution }
        };
        values.push(record.contribution);
        if let Some(t) = trace.as_mut() {
            t.draws.push(record);
        }
    }
    Ok((complex_median(&values), accepted, trace))
}

pub(crate) fn merged_ledgers<H1, H2>(hx: &H1, hy: &H2, bx: &crate::ledger::LedgerSnapshot, by: &crate::ledger::LedgerSnapshot) -> crate::ledger::LedgerSnapshot
where
    H1: AccessHandle + ?Sized,
    H2: AccessHandle + ?Sized,
{
    let mut total = ledger_delta(hx, bx);
    total.merge(&ledger_delta(hy, by));
    total
}

/// Estimates `x†y` from φ-oversampled access to both vectors.
///
/// The result is the median of the single-draw estimates. The error bound is
/// `ε[1 + min(‖x‖₁/‖x‖, ‖y‖₁/‖y‖)]`, computed from ground truth when the
/// handles expose it and with the worst case `√d` otherwise. `seed` drives the
/// mixture coin.
pub fn inner_product_sym<H1, H2>(hx: &mut H1, hy: &mut H2, cfg: &InnerProductConfig, seed: u64) -> Result<Estimate>
where
    H1: AccessHandle + ?Sized,
    H2: AccessHandle + ?Sized,
{
    check_dims(hx.dim(), hy.dim())?;
    let (bx, by) = (hx.ledger().snapshot(), hy.ledger().snapshot());
    let eps = cfg.eps;
    let nx_sq = norm_estimate(&mut *hx, 0.5, 1.0 / 18.0, cfg.iteration_cap)?;
    let ny_sq = norm_estimate(&mut *hy, 0.5, 1.0 / 18.0, cfg.iteration_cap)?;

    let gamma = (1.0f64).min(1.0 / nx_sq) * (1.0f64).min(1.0 / ny_sq) * eps * eps / 100.0;
    let eps_x = eps * gamma.sqrt() * (1.0f64).min(1.0 / ny_sq.sqrt()) / 100.0;
    let eps_y = eps * gamma.sqrt() * (1.0f64).min(1.0 / nx_sq.sqrt()) / 100.0;
    let draws = sym_draws(eps, nx_sq, ny_sq);
    let plan = MixturePlan {
        gamma,
        raw_eps_x: eps_x / SQRT_2,
        raw_eps_y: eps_y / SQRT_2,
        histogram_samples: histogram_size(32.0, gamma, hx.dim()),
        draws,
        reps: repetitions(1.0 / (18.0 * draws as f64)),
    };
    let mut rng = seeded_rng(seed);
    let (estimate, accepted, trace) = mixture_median(&mut *hx, &mut *hy, &plan, cfg.record_trace, &mut rng)?;
    let report = EstimatorReport {
        estimate,
        error_bound: eps * (1.0 + peakedness(&*hx, &*hy, true)),
        success_prob: SUCCESS_PROB,
        ledger: merged_ledgers(&*hx, &*hy, &bx, &by),
    };
    let diagnostics = Diagnostics {
        norm_estimates: vec![nx_sq, ny_sq],
        gamma,
        histogram_samples: plan.histogram_samples,
        draws,
        accepted,
        improve_reps: plan.reps,
    };
    Ok(Estimate { report, trace, diagnostics })
}
