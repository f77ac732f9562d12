// Prepare-and-measure access: amplitude magnitudes from basis measurements,
// then phase-consistent entry queries by interference.
//
// ```bash
// cargo run --example tomography
// ```

use std::sync::Arc;

use asq_lab::backends::{tomography_shots, PrepMeasureBackend, PrepMeasureHandle};
use asq_lab::ledger::CostLedger;
use asq_lab::numeric::{random_complex_unit, seeded_rng};
use asq_lab::AccessHandle;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(4);
    let state = random_complex_unit(64, &mut rng);
    let backend = PrepMeasureBackend::new(state.clone(), 1.0)?;
    let ledger = CostLedger::new();
    let (eps, delta) = (0.1, 0.1);
    let table = backend.estimate_abs_amplitudes(eps, delta, &mut rng, &ledger)?;
    let worst = (0..64).map(|i| (table.get(i) - state[i].norm()).abs()).fold(0.0, f64::max);
    println!("{} shots, ∞-norm error {worst:.4} (target {eps}), prep cost {}", tomography_shots(64, eps, delta), ledger.snapshot().cost_units);

    // Entry queries agree with x up to one global phase.
    let mut h = PrepMeasureHandle::new(Arc::new(backend), 0.05, 5)?;
    let (a, b) = (h.query(3, 0.05)?.value, h.query(17, 0.05)?.value);
    let phase_a = (a / state[3]).arg();
    let phase_b = (b / state[17]).arg();
    println!("x̂(3)/x(3) phase {phase_a:.3}, x̂(17)/x(17) phase {phase_b:.3}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
