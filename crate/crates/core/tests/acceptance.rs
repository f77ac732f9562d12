//! End-to-end acceptance checks, each run exactly as its CLI invocation in the
//! README. Every test writes one `[PASS]`/`[FAIL] criterion N` line straight
//! to standard output (bypassing the test harness's capture) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use asq_lab::experiments::{run_experiment, Experiment, ExperimentConfig, ExperimentOutput, TransportMode};

const FLOOR: f64 = 0.667;

fn run(cfg: &ExperimentConfig) -> (ExperimentOutput, Duration) {
    let start = Instant::now();
    let out = run_experiment(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.experiment.name()));
    (out, start.elapsed())
}

fn note(out: &ExperimentOutput, key: &str) -> f64 {
    *out.summary.notes.get(key).unwrap_or_else(|| panic!("missing note {key}"))
}

/// Smallest per-setting success fraction.
fn worst_setting(out: &ExperimentOutput) -> f64 {
    out.summary.notes.iter().filter(|(k, _)| k.starts_with("success_fraction[")).map(|(_, v)| *v).fold(1.0, f64::min)
}

fn verdict(n: u32, pass: bool, detail: String) {
    let line = format!("[{}] criterion {n}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{}", line.trim_end());
}

#[test]
fn criterion_01_relative_error_estimation() {
    let cfg = ExperimentConfig::new(Experiment::Relative, 1);
    assert_eq!((cfg.values.as_slice(), cfg.rho, cfg.fail_prob, cfg.trials), ([1.0, 0.1, 0.01].as_slice(), 0.1, 0.1, 1000));
    let (out, took) = run(&cfg);
    let worst = worst_setting(&out);
    verdict(1, worst >= 0.9 && took < Duration::from_secs(30), format!("worst success {worst:.4} (≥ 0.9), {:.1}s (< 30s)", took.as_secs_f64()));
}

#[test]
fn criterion_02_asymmetric_inner_product() {
    let cfg = ExperimentConfig::new(Experiment::InprodAsym, 2);
    assert_eq!((cfg.dims[0], cfg.eps, cfg.trials, cfg.phis[0]), (1024, 0.1, 300, 1.0));
    let (out, took) = run(&cfg);
    let s = out.summary.success_fraction;
    let over = note(&out, "budget_violations");
    verdict(
        2,
        s >= FLOOR && over == 0.0 && took < Duration::from_secs(300),
        format!("success {s:.4} (≥ {FLOOR}), {over} runs over twice the sample formula, {:.1}s (< 300s)", took.as_secs_f64()),
    );
}

#[test]
fn criterion_03_symmetric_inner_product() {
    let mut cfg = ExperimentConfig::new(Experiment::InprodSym, 3);
    cfg.phis = vec![1.0, 2.0];
    let (out, _) = run(&cfg);
    let worst = worst_setting(&out);
    verdict(3, worst >= FLOOR, format!("worst success over phi in {{1,2}} {worst:.4} (≥ {FLOOR})"));
}

#[test]
fn criterion_04_real_inner_product_with_perturbation() {
    let mut cfg = ExperimentConfig::new(Experiment::InprodReal, 4);
    cfg.deltas = vec![0.0, 0.02];
    assert_eq!((cfg.dims[0], cfg.eps), (4096, 0.05));
    let (out, _) = run(&cfg);
    let worst = worst_setting(&out);
    verdict(4, worst >= FLOOR, format!("worst success over delta in {{0,0.02}} {worst:.4} (≥ {FLOOR})"));
}

#[test]
fn criterion_05_linear_combination_bounds() {
    let cfg = ExperimentConfig::new(Experiment::Lincomb, 5);
    assert_eq!((cfg.trials, cfg.max_terms, cfg.dims[0]), (1000, 8, 64));
    let (out, _) = run(&cfg);
    let s = out.summary.success_fraction;
    let example = note(&out, "worked_example_phi_prime");
    verdict(
        5,
        s == 1.0 && example == 4.0,
        format!("bounds hold in {s:.4} of instances (need 1), worked example phi' = {example} (need 4)"),
    );
}

#[test]
fn criterion_06_distribution_distance_bound() {
    let cfg = ExperimentConfig::new(Experiment::TvdSweep, 6);
    assert_eq!((cfg.trials, cfg.dims[0]), (1000, 256));
    let (out, _) = run(&cfg);
    let s = out.summary.success_fraction;
    verdict(6, s == 1.0, format!("bound holds in {s:.4} of pairs (need 1)"));
}

#[test]
fn criterion_07_pauli_identities() {
    let cfg = ExperimentConfig::new(Experiment::MagicReport, 7);
    assert_eq!(cfg.trials, 1000);
    let (out, _) = run(&cfg);
    let s = out.summary.success_fraction;
    let zero = note(&out, "zero_state_m_half");
    let t = note(&out, "t_state_stab_norm");
    let t_err = (t - (1.0 + 2f64.sqrt()) / 2.0).abs();
    verdict(
        7,
        s == 1.0 && zero.abs() <= 1e-9 && t_err <= 1e-9,
        format!("identities hold in {s:.4} of states, M_half(|0..0>) = {zero:e}, |T> stab_norm error {t_err:e}"),
    );
}

#[test]
fn criterion_08_pauli_cdf_bound() {
    let mut cfg = ExperimentConfig::new(Experiment::MagicReport, 8);
    cfg.cdf = true;
    let (out, _) = run(&cfg);
    let s = out.summary.success_fraction;
    verdict(8, s == 1.0, format!("bound holds at every threshold in {s:.4} of states (need 1)"));
}

#[test]
fn criterion_09_two_party_overlap() {
    let mut cfg = ExperimentConfig::new(Experiment::PauliDist, 9);
    cfg.transport = TransportMode::Both;
    assert_eq!((cfg.qubits.unwrap_or(6), cfg.eps, cfg.trials), (6, 0.1, 200));
    let (out, took) = run(&cfg);
    let s = out.summary.success_fraction;
    let mismatches = note(&out, "transport_mismatches");
    verdict(
        9,
        s >= FLOOR && mismatches == 0.0 && took < Duration::from_secs(600),
        format!(
            "success {s:.4} (≥ {FLOOR}) locally and over TCP, {mismatches} transport mismatches, {:.1}s (< 600s)",
            took.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_column_sampler() {
    let mut cfg = ExperimentConfig::new(Experiment::Colsample, 10);
    cfg.trials = 3;
    assert_eq!((cfg.dims.as_slice(), cfg.attempts), ([4, 16].as_slice(), 100_000));
    let (out, _) = run(&cfg);
    let s = out.summary.success_fraction;
    let p = note(&out, "min_gof_p");
    verdict(10, s == 1.0, format!("rate within 3 sigma and column law accepted for {s:.4} of matrices, min p-value {p:.4}"));
}

#[test]
fn criterion_11_perturbed_estimators() {
    let mut cfg = ExperimentConfig::new(Experiment::Perturbed, 11);
    cfg.phis = vec![1.0, 2.0];
    assert_eq!(cfg.budget_fraction, 0.5);
    let (out, _) = run(&cfg);
    let worst = worst_setting(&out);
    let mismatches = note(&out, "zero_budget_mismatches");
    verdict(
        11,
        worst >= FLOOR && mismatches == 0.0,
        format!("worst success at half budget {worst:.4} (≥ {FLOOR}), {mismatches} zero-budget runs differing from exact sampling"),
    );
}
