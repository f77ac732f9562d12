// Exact and oversampled sample-and-query access, metered by a cost ledger.
//
// ```bash
// cargo run --example exact_access
// ```

use asq_lab::backends::{random_oversampling, wrap_oversampled, ExactHandle};
use asq_lab::numeric::{random_complex_unit, seeded_rng};
use asq_lab::{boosted_query, AccessHandle, DenseVector};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let x = DenseVector::from_real(&[0.6, 0.0, 0.8, 0.0])?;
    let mut h = ExactHandle::new(x.clone(), 7);
    let mut counts = [0u64; 4];
    for _ in 0..1000 {
        counts[h.sample_valid()?] += 1;
    }
    assert_eq!(counts[1] + counts[3], 0);
    println!("sample counts over D_x: {counts:?} (expect ≈ [360, 0, 640, 0])");

    let value = boosted_query(&mut h, 2, 0.01, 0.05)?;
    assert!((value.re - 0.8).abs() < 1e-12);
    println!("boosted query x(2) = {value}, norm_sq = {}", h.norm_sq(0.01)?);
    let ledger = h.ledger().snapshot();
    println!("ledger: {} samples, {} queries, {} norms", ledger.sample_calls, ledger.total_queries(), ledger.total_norms());

    // Oversampling: sampling follows a dominating x̃ while queries still return x.
    let mut rng = seeded_rng(3);
    let y = random_complex_unit(16, &mut rng);
    let y_tilde = random_oversampling(&y, 2.0, &mut rng)?;
    let mut over = wrap_oversampled(ExactHandle::new(y.clone(), 1), y_tilde, 2)?;
    assert!(over.phi() <= 2.0 + 1e-9);
    assert_eq!(over.query(5, 0.1)?.value, y[5]);
    println!("oversampled handle: phi = {:.4}, norm_sq ≈ {:.4}", over.phi(), over.norm_sq(1e-3)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
