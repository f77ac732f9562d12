// Composing access to `u = Σ λ_j x_j` from access to each `x_j`.
//
// ```bash
// cargo run --example linear_combination
// ```

use asq_lab::backends::ExactHandle;
use asq_lab::compose::{lincomb_deterministic, lincomb_probabilistic, LinearCombinationSpec};
use asq_lab::numeric::{norm2sq, random_complex_unit, seeded_rng};
use asq_lab::{AccessHandle, DenseVector};
use num_complex::Complex64;

fn basis_pair() -> Result<Vec<Box<dyn AccessHandle>>, asq_lab::AsqError> {
    Ok(vec![Box::new(ExactHandle::new(DenseVector::basis(2, 0)?, 1)), Box::new(ExactHandle::new(DenseVector::basis(2, 1)?, 2))])
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // 3e₁ + 4e₂: τ = 2, κ = 1, so φ′ = τ²κ² = 4.
    let coefficients = vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)];
    let mut u = lincomb_deterministic(LinearCombinationSpec::new(basis_pair()?, coefficients.clone())?, None, 0)?;
    let truth = u.ground_truth().expect("exact constituents");
    println!("deterministic: phi' = {}, realized ‖ũ‖²/‖u‖² = {}", u.phi(), norm2sq(&truth.oversampling) / norm2sq(&truth.target));
    assert_eq!(u.phi(), 4.0);
    println!("u(1) ≈ {:.4}", u.query(1, 0.01)?.value);

    let p = lincomb_probabilistic(LinearCombinationSpec::new(basis_pair()?, coefficients)?, 0.1, 0)?;
    println!("probabilistic: phi' = {:.4}, learnt norms {:?}", p.phi(), p.norm_estimates().unwrap_or_default());

    // A random four-term combination in dimension 32.
    let mut rng = seeded_rng(9);
    let handles: Vec<Box<dyn AccessHandle>> =
        (0..4).map(|k| Box::new(ExactHandle::new(random_complex_unit(32, &mut rng), k)) as Box<dyn AccessHandle>).collect();
    let lambdas = vec![Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.2), Complex64::new(0.3, 0.0), Complex64::new(0.0, 2.0)];
    let mut v = lincomb_deterministic(LinearCombinationSpec::new(handles, lambdas)?, None, 5)?;
    let g = v.ground_truth().expect("exact constituents");
    let realized = norm2sq(&g.oversampling) / norm2sq(&g.target);
    println!("random τ=4: declared phi' = {:.3} ≥ realized {realized:.3}; sample -> {}", v.phi(), v.sample_valid()?);
    assert!(realized <= v.phi());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
