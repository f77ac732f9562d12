//! Cross-module invariants checked on random instances.

use asq_lab::backends::{random_oversampling, wrap_oversampled, ExactHandle};
use asq_lab::compose::{condition_number, lincomb_deterministic, lincomb_probabilistic, LinearCombinationSpec};
use asq_lab::numeric::{norm2sq, random_complex_unit, seeded_rng, SeededRng};
use asq_lab::pauli::states::clifford_t_circuit;
use asq_lab::pauli::{magic_report, pauli_cdf, pauli_representation};
use asq_lab::{AccessHandle, DenseVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn leaf(d: usize, oversample: bool, rng: &mut SeededRng) -> (Box<dyn AccessHandle>, DenseVector) {
    let x = random_complex_unit(d, rng).scaled(Complex64::new(rng.gen_range(0.2..2.0), 0.0));
    let seed = rng.gen();
    let h: Box<dyn AccessHandle> = if oversample {
        let t = random_oversampling(&x, rng.gen_range(1.0..3.0), rng).unwrap();
        Box::new(wrap_oversampled(ExactHandle::new(x.clone(), seed), t, seed ^ 1).unwrap())
    } else {
        Box::new(ExactHandle::new(x.clone(), seed))
    };
    (h, x)
}

fn coefficient(rng: &mut SeededRng) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.1..3.0), rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Dominance holds entrywise and the realized factor stays within φ′.
fn check_composed(h: &dyn AccessHandle) -> Result<(), TestCaseError> {
    let g = h.ground_truth().expect("exact leaves");
    for (a, b) in g.oversampling.entries().iter().zip(g.target.entries()) {
        prop_assert!(a.norm() >= b.norm() * (1.0 - 1e-9) - 1e-12);
    }
    let u = norm2sq(&g.target);
    prop_assume!(u > 1e-12);
    prop_assert!(norm2sq(&g.oversampling) / u <= h.phi() * (1.0 + 1e-9));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn deterministic_composition_dominates(seed in any::<u64>(), tau in 1usize..=8, d in 1usize..=64, nested in any::<bool>()) {
        let mut rng = seeded_rng(seed);
        let mut handles = Vec::new();
        let mut vectors = Vec::new();
        for k in 0..tau {
            if nested && k == 0 {
                let inner: Vec<_> = (0..rng.gen_range(1..=3)).map(|_| leaf(d, rng.gen(), &mut rng)).collect();
                let lambdas: Vec<_> = inner.iter().map(|_| coefficient(&mut rng)).collect();
                let target = inner.iter().zip(&lambdas).fold(vec![Complex64::new(0.0, 0.0); d], |mut acc, ((_, x), l)| {
                    acc.iter_mut().zip(x.entries()).for_each(|(a, b)| *a += l * b);
                    acc
                });
                let spec = LinearCombinationSpec::new(inner.into_iter().map(|(h, _)| h).collect(), lambdas).unwrap();
                let h = lincomb_deterministic(spec, None, rng.gen()).unwrap();
                check_composed(&h)?;
                handles.push(Box::new(h) as Box<dyn AccessHandle>);
                vectors.push(DenseVector::new(target).unwrap());
            } else {
                let (h, x) = leaf(d, rng.gen(), &mut rng);
                handles.push(h);
                vectors.push(x);
            }
        }
        let lambdas: Vec<_> = (0..tau).map(|_| coefficient(&mut rng)).collect();
        let phi = handles.iter().map(|h| h.phi()).fold(1.0, f64::max);
        let kappa = condition_number(&vectors).unwrap();
        let h = lincomb_deterministic(LinearCombinationSpec::new(handles, lambdas).unwrap(), None, seed).unwrap();
        if h.phi().is_finite() {
            prop_assert!((h.phi() - phi * (tau * tau) as f64 * kappa * kappa).abs() <= 1e-9 * h.phi());
        }
        check_composed(&h)?;
    }

    #[test]
    fn probabilistic_composition_dominates(seed in any::<u64>(), tau in 1usize..=8, d in 1usize..=64) {
        let mut rng = seeded_rng(seed);
        let (handles, _): (Vec<_>, Vec<_>) = (0..tau).map(|_| leaf(d, rng.gen(), &mut rng)).unzip();
        let lambdas: Vec<_> = (0..tau).map(|_| coefficient(&mut rng)).collect();
        let h = lincomb_probabilistic(LinearCombinationSpec::new(handles, lambdas).unwrap(), 0.1, seed).unwrap();
        check_composed(&h)?;
    }

    #[test]
    fn pauli_identities(seed in any::<u64>(), n in 1u32..=6, t in 0usize..=4) {
        let mut rng = seeded_rng(seed);
        let psi = clifford_t_circuit(n, 6 * n as usize, t, &mut rng).state();
        let phi = random_complex_unit(1 << n, &mut rng);
        let (pa, pb) = (pauli_representation(&psi).unwrap(), pauli_representation(&phi).unwrap());
        prop_assert!((pa.two_norm() - 1.0).abs() <= 1e-9);
        prop_assert!((pa.dot(&pb).unwrap() - psi.inner(&phi).unwrap().norm_sqr()).abs() <= 1e-9);
        let r = magic_report(&pa);
        prop_assert!((r.exp_half_m_half - r.stab_norm).abs() <= 1e-9);
        for tau in [0.01f64, 0.1, 0.25, 0.5, 1.0] {
            prop_assert!(pauli_cdf(&pa, tau) <= tau.sqrt() * r.exp_half_m_half + 1e-12);
        }
    }
}
