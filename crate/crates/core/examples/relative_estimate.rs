// Relative-error estimation of a scalar from an absolute-error oracle that
// lies a third of the time.
//
// ```bash
// cargo run --example relative_estimate
// ```

use asq_lab::access::{NoiseModel, NoisyScalar, DEFAULT_ITERATION_CAP};
use asq_lab::relative_estimate;
use num_complex::Complex64;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (rho, delta) = (0.1, 0.1);
    for (seed, magnitude) in [1.0, 0.1, 0.01].into_iter().enumerate() {
        let truth = Complex64::from_polar(magnitude, 0.7);
        let mut oracle = NoisyScalar::new(truth, NoiseModel::Adversarial { p_fail: 1.0 / 3.0 }, seed as u64);
        let r = relative_estimate(&mut oracle, rho, delta, DEFAULT_ITERATION_CAP)?;
        let relative_error = (r.value - truth).norm() / truth.norm();
        println!(
            "|x| = {magnitude:<5} estimate {:.5} relative error {relative_error:.4} after k = {} ({} raw calls)",
            r.value, r.iterations, r.raw_calls
        );
        assert!(relative_error <= rho);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
