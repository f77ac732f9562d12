// Column sampling from a block-encoded matrix: index k is returned with
// probability `‖A(*,k)‖²/d` and the rest is signaled as failure.
//
// ```bash
// cargo run --example column_sampling
// ```

use asq_lab::backends::gof::chi_square_p;
use asq_lab::backends::MatrixBlockEncoding;
use asq_lab::ledger::CostLedger;
use asq_lab::numeric::seeded_rng;
use asq_lab::SampleOutcome;
use num_complex::Complex64;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let entries = [0.5, 0.1, 0.0, 0.2, 0.3, 0.6, 0.1, 0.0, 0.0, 0.2, 0.4, 0.1, 0.1, 0.0, 0.3, 0.7];
    let a = MatrixBlockEncoding::new(4, 4, entries.iter().map(|&v| Complex64::new(v, 0.0)).collect(), 1.0)?;
    let norms = a.column_norms_sq();
    let ledger = CostLedger::new();
    let mut rng = seeded_rng(10);
    let mut counts = [0u64; 4];
    let attempts = 100_000;
    for _ in 0..attempts {
        if let SampleOutcome::Index(k) = a.sample_column_index(&mut rng, &ledger) {
            counts[k] += 1;
        }
    }
    let successes: u64 = counts.iter().sum();
    let rate = successes as f64 / attempts as f64;
    let expected = a.frobenius_sq() / 4.0;
    let probs: Vec<f64> = norms.iter().map(|n| n / a.frobenius_sq()).collect();
    println!("success rate {rate:.4} (expected {expected:.4}), column counts {counts:?}");
    println!("goodness of fit against ‖A(*,k)‖²/‖A‖_F²: p = {:.4}", chi_square_p(&counts, &probs));
    let column = a.column_handle(0, 0.1, 3)?;
    println!("column 0 handle over dimension {}", asq_lab::AccessHandle::dim(&column));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
