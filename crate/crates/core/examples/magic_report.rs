// Pauli-basis representation of a state and its stabilizer Rényi entropies.
//
// ```bash
// cargo run --example magic_report
// ```

use asq_lab::numeric::seeded_rng;
use asq_lab::pauli::states::{clifford_t_circuit, t_state};
use asq_lab::pauli::{magic_report, pauli_cdf, pauli_representation};
use asq_lab::DenseVector;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let zero = magic_report(&pauli_representation(&DenseVector::basis(8, 0)?)?);
    println!("|000>: M_half = {:.2e}, stab_norm = {:.6}", zero.m_half, zero.stab_norm);

    let t = magic_report(&pauli_representation(&t_state())?);
    println!("|T>:   M_0 = {:.6}, M_half = {:.6}, M_2 = {:.6}, stab_norm = {:.6}", t.m_0, t.m_half, t.m_2, t.stab_norm);
    assert!((t.stab_norm - (1.0 + 2f64.sqrt()) / 2.0).abs() < 1e-12);

    let mut rng = seeded_rng(7);
    let psi = clifford_t_circuit(4, 32, 3, &mut rng).state();
    let pi = pauli_representation(&psi)?;
    let r = magic_report(&pi);
    println!("4 qubits, 3 T gates: M_half = {:.4}, stab_norm = {:.4}", r.m_half, r.stab_norm);
    for tau in [0.01f64, 0.1, 0.25, 0.5, 1.0] {
        let bound = tau.sqrt() * r.exp_half_m_half;
        println!("  F({tau}) = {:.4} ≤ {bound:.4}", pauli_cdf(&pi, tau));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
