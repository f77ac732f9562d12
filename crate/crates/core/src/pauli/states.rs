//! Small state-vector circuits for test states with tunable magic: random
//! Clifford circuits (H, S, CNOT) with a few injected T gates.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{AsqError, Result};
use crate::numeric::DenseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    H(u32),
    S(u32),
    T(u32),
    X(u32),
    Cnot { control: u32, target: u32 },
}

/// A gate list on `n` qubits, applied left to right.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    pub n: u32,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: u32) -> Self {
        Self { n, gates: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn t_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::T(_))).count()
    }

    pub fn apply(&self, psi: &DenseVector) -> Result<DenseVector> {
        if psi.dim() != 1usize << self.n {
            return Err(AsqError::DimensionMismatch { expected: 1 << self.n, got: psi.dim() });
        }
        let mut amps = psi.entries().to_vec();
        for &gate in &self.gates {
            apply_gate(&mut amps, self.n, gate);
        }
        DenseVector::new(amps)
    }

    /// The circuit applied to `|0…0⟩`.
    pub fn state(&self) -> DenseVector {
        self.apply(&DenseVector::basis(1 << self.n, 0).expect("nonempty")).expect("matching dimension")
    }
}

fn mask(n: u32, qubit: u32) -> usize {
    1 << (n - 1 - qubit)
}

fn apply_gate(amps: &mut [Complex64], n: u32, gate: Gate) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match gate {
        Gate::H(q) => {
            let m = mask(n, q);
            for b in 0..amps.len() {
                if b & m == 0 {
                    let (u, v) = (amps[b], amps[b | m]);
                    amps[b] = (u + v) * h;
                    amps[b | m] = (u - v) * h;
                }
            }
        }
        Gate::S(q) | Gate::T(q) => {
            let phase = if matches!(gate, Gate::S(_)) { Complex64::new(0.0, 1.0) } else { Complex64::new(h, h) };
            let m = mask(n, q);
            amps.iter_mut().enumerate().filter(|(b, _)| b & m != 0).for_each(|(_, a)| *a *= phase);
        }
        Gate::X(q) => {
            let m = mask(n, q);
            for b in 0..amps.len() {
                if b & m == 0 {
                    amps.swap(b, b | m);
                }
            }
        }
        Gate::Cnot { control, target } => {
            let (c, t) = (mask(n, control), mask(n, target));
            for b in 0..amps.len() {
                if b & c != 0 && b & t == 0 {
                    amps.swap(b, b | t);
                }
            }
        }
    }
}

/// A uniformly random gate from {H, S, CNOT}.
fn random_clifford_gate<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Gate {
    let q = rng.gen_range(0..n);
    match rng.gen_range(0..if n > 1 { 3 } else { 2 }) {
        0 => Gate::H(q),
        1 => Gate::S(q),
        _ => {
            let mut target = rng.gen_range(0..n - 1);
            if target >= q {
                target += 1;
            }
            Gate::Cnot { control: q, target }
        }
    }
}

/// `depth` random Clifford gates.
pub fn random_clifford_circuit<R: Rng + ?Sized>(n: u32, depth: usize, rng: &mut R) -> Circuit {
    Circuit { n, gates: (0..depth).map(|_| random_clifford_gate(n, rng)).collect() }
}

/// A random Clifford circuit of `depth` gates with `t_count` T gates inserted
/// at random positions on random qubits.
pub fn clifford_t_circuit<R: Rng + ?Sized>(n: u32, depth: usize, t_count: usize, rng: &mut R) -> Circuit {
    let mut c = random_clifford_circuit(n, depth, rng);
    for _ in 0..t_count {
        let at = rng.gen_range(0..=c.gates.len());
        c.gates.insert(at, Gate::T(rng.gen_range(0..n)));
    }
    c
}

/// `|T⟩ = (|0⟩ + e^{iπ/4}|1⟩)/√2`.
pub fn t_state() -> DenseVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DenseVector::new(vec![Complex64::new(h, 0.0), Complex64::new(0.5, 0.5)]).expect("finite")
}

/// A pair of low-magic states with overlaps spread over `[0, 1]`: `ψ` from a
/// random Clifford+T circuit (at most 3 T gates), and `φ = Cψ` for a short
/// random Clifford `C`. Both share the magic of `ψ`.
pub fn low_magic_pair<R: Rng + ?Sized>(n: u32, rng: &mut R) -> (DenseVector, DenseVector) {
    let t_count = rng.gen_range(0..=3);
    let psi = clifford_t_circuit(n, 8 * n as usize, t_count, rng).state();
    let tweak = random_clifford_circuit(n, rng.gen_range(1..=3), rng);
    let phi = tweak.apply(&psi).expect("matching dimension");
    (psi, phi)
}

/// Orthogonal stabilizer states `U|0⟩` and `U X₀|0⟩` for a random Clifford `U`.
pub fn orthogonal_stabilizer_pair<R: Rng + ?Sized>(n: u32, rng: &mut R) -> (DenseVector, DenseVector) {
    let u = random_clifford_circuit(n, 8 * n as usize, rng);
    let mut flipped = Circuit::new(n);
    flipped.push(Gate::X(0));
    flipped.gates.extend(u.gates.iter().copied());
    (u.state(), flipped.state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;

    #[test]
    fn gates_preserve_norm_and_bell_state() {
        let mut c = Circuit::new(2);
        c.push(Gate::H(0)).push(Gate::Cnot { control: 0, target: 1 });
        let bell = c.state();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((bell[0].re - h).abs() < 1e-12 && (bell[3].re - h).abs() < 1e-12);
        let mut rng = seeded_rng(1);
        let s = clifford_t_circuit(4, 40, 3, &mut rng).state();
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_is_orthogonal() {
        let mut rng = seeded_rng(2);
        let (a, b) = orthogonal_stabilizer_pair(5, &mut rng);
        assert!(a.inner(&b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn t_gate_builds_t_state() {
        let mut c = Circuit::new(1);
        c.push(Gate::H(0)).push(Gate::T(0));
        assert!(c.state().distance(&t_state()).unwrap() < 1e-12);
    }
}
