//! Pauli-basis representations of pure states, stabilizer Rényi entropies,
//! an exact Pauli sampler and the local two-state overlap driver.
//!
//! Pauli strings are indexed in tableau order: the index is a `2n`-bit
//! big-endian string whose bit pair `k` is `(x_k, z_k)` for qubit `k`, and the
//! pair `(1, 1)` denotes the Hermitian `Y`. Qubit 0 is the most significant
//! bit of a computational basis index.

mod sampler;
pub mod states;

pub use sampler::{pauli_query_shots, CorollaryCost, ExactPauliSampler};

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::EstimatorReport;
use crate::error::{AsqError, Result};
use crate::estimators::{inner_product_real_exact, InnerProductConfig, Mode};
use crate::numeric::{derive_seed, DenseVector};

/// Largest supported qubit count.
pub const MAX_QUBITS: u32 = 10;

/// Support cutoff of the α = 0 entropy, on `|α(i)| = √d |π(i)|`.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

const NORM_TOLERANCE: f64 = 1e-9;
const FILE_MAGIC: &[u8; 4] = b"ASQP";

/// A Pauli string on `n` qubits, modulo phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliIndex {
    pub n: u32,
    pub bits: u64,
}

impl PauliIndex {
    pub fn new(n: u32, bits: u64) -> Result<Self> {
        if n > MAX_QUBITS || bits >= 1u64 << (2 * n) {
            return Err(AsqError::IndexOutOfRange { index: bits as usize, dim: 1usize << (2 * n.min(MAX_QUBITS)) });
        }
        Ok(Self { n, bits })
    }

    pub fn identity(n: u32) -> Self {
        Self { n, bits: 0 }
    }

    /// Builds the index from X and Z masks over basis-index bits.
    pub fn from_masks(n: u32, x: u64, z: u64) -> Self {
        let mut bits = 0;
        for j in 0..n {
            bits |= ((x >> j) & 1) << (2 * j + 1) | ((z >> j) & 1) << (2 * j);
        }
        Self { n, bits }
    }

    /// `(x, z)` masks over basis-index bits.
    pub fn masks(self) -> (u64, u64) {
        let (mut x, mut z) = (0, 0);
        for j in 0..self.n {
            x |= ((self.bits >> (2 * j + 1)) & 1) << j;
            z |= ((self.bits >> (2 * j)) & 1) << j;
        }
        (x, z)
    }

    /// Label such as `"XIZY"`, qubit 0 first.
    pub fn label(self) -> String {
        let (x, z) = self.masks();
        (0..self.n)
            .rev()
            .map(|j| match ((x >> j) & 1, (z >> j) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect()
    }
}

/// `π_ρ(i) = Tr(ρ P_i)/√d` for a pure state, in tableau order.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliRepresentation {
    n: u32,
    values: Vec<f64>,
}

fn qubit_count(dim: usize) -> Result<u32> {
    if !dim.is_power_of_two() {
        return Err(AsqError::DimensionNotPowerOfTwo { dim });
    }
    let n = dim.trailing_zeros();
    if n > MAX_QUBITS {
        return Err(AsqError::InvalidParameter(format!("at most {MAX_QUBITS} qubits are supported, got {n}")));
    }
    Ok(n)
}

/// In-place Walsh–Hadamard transform: `out(z) = Σ_b (−1)^{z·b} in(b)`.
fn walsh_hadamard(values: &mut [Complex64]) {
    let mut h = 1;
    while h < values.len() {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Computes the Pauli representation of `psi`.
///
/// For each X mask the expectation values of all Z masks come from one
/// Walsh–Hadamard transform of `conj(ψ(b ⊕ x)) ψ(b)`, so the cost is
/// `O(4ⁿ n)` rather than `O(8ⁿ)`.
pub fn pauli_representation(psi: &DenseVector) -> Result<PauliRepresentation> {
    let n = qubit_count(psi.dim())?;
    let norm_sq: f64 = psi.entries().iter().map(|z| z.norm_sqr()).sum();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
        return Err(AsqError::NotNormalized { norm_sq });
    }
    let d = psi.dim();
    let amps = psi.entries();
    let scale = 1.0 / (d as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..d as u64)
        .into_par_iter()
        .map(|x| {
            let mut g: Vec<Complex64> = (0..d).map(|b| amps[b ^ x as usize].conj() * amps[b]).collect();
            walsh_hadamard(&mut g);
            (0..d as u64)
                .map(|z| {
                    // P = i^{|x∧z|} X^x Z^z.
                    let phase = match (x & z).count_ones() % 4 {
                        0 => Complex64::new(1.0, 0.0),
                        1 => Complex64::new(0.0, 1.0),
                        2 => Complex64::new(-1.0, 0.0),
                        _ => Complex64::new(0.0, -1.0),
                    };
                    (phase * g[z as usize]).re * scale
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; d * d];
    for (x, row) in rows.into_iter().enumerate() {
        for (z, v) in row.into_iter().enumerate() {
            values[PauliIndex::from_masks(n, x as u64, z as u64).bits as usize] = v;
        }
    }
    values[0] = scale;
    Ok(PauliRepresentation { n, values })
}

impl PauliRepresentation {
    /// Wraps raw values, checking length `4ⁿ`.
    pub fn from_values(n: u32, values: Vec<f64>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(AsqError::InvalidParameter(format!("at most {MAX_QUBITS} qubits are supported, got {n}")));
        }
        if values.len() != 1usize << (2 * n) {
            return Err(AsqError::DimensionMismatch { expected: 1usize << (2 * n), got: values.len() });
        }
        Ok(Self { n, values })
    }

    pub fn qubits(&self) -> u32 {
        self.n
    }

    /// Hilbert-space dimension `d = 2ⁿ`.
    pub fn hilbert_dim(&self) -> usize {
        1 << self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: PauliIndex) -> f64 {
        self.values[index.bits as usize]
    }

    pub fn one_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn two_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `π_ψᵀ π_φ`, which equals `|⟨ψ|φ⟩|²`.
    pub fn dot(&self, other: &PauliRepresentation) -> Result<f64> {
        if self.n != other.n {
            return Err(AsqError::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn to_vector(&self) -> DenseVector {
        DenseVector::from_real(&self.values).expect("finite values")
    }

    /// Binary form: `"ASQP"`, `u32` qubit count, then `4ⁿ` `f64` values, all
    /// little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FILE_MAGIC)?;
        w.write_all(&self.n.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FILE_MAGIC {
            return Err(AsqError::Parse("missing ASQP header".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word);
        if n > MAX_QUBITS {
            return Err(AsqError::Parse(format!("qubit count {n} exceeds {MAX_QUBITS}")));
        }
        let mut values = Vec::with_capacity(1 << (2 * n));
        let mut buf = [0u8; 8];
        for _ in 0..1u64 << (2 * n) {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Self::from_values(n, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Stabilizer Rényi entropies (natural logarithms) and the stabilizer norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicReport {
    /// `ln |supp α| − ln d`.
    pub m_0: f64,
    pub m_half: f64,
    pub m_2: f64,
    /// `d⁻¹ Σ |Tr(P_i ρ)| = d^{−1/2} ‖π‖₁`.
    pub stab_norm: f64,
    /// `e^{M_{1/2}/2}`.
    pub exp_half_m_half: f64,
}

pub fn magic_report(pi: &PauliRepresentation) -> MagicReport {
    magic_report_with_threshold(pi, SUPPORT_THRESHOLD)
}

/// As [`magic_report`] with a custom support cutoff for `M_0`.
pub fn magic_report_with_threshold(pi: &PauliRepresentation, threshold: f64) -> MagicReport {
    let d = pi.hilbert_dim() as f64;
    let ln_d = d.ln();
    let sqrt_d = d.sqrt();
    let support = pi.values.iter().filter(|v| v.abs() * sqrt_d > threshold).count() as f64;
    let stab_norm = pi.one_norm() / sqrt_d;
    let fourth: f64 = pi.values.iter().map(|v| v.powi(4)).sum();
    let m_half = 2.0 * pi.one_norm().ln() - ln_d;
    MagicReport {
        m_0: support.ln() - ln_d,
        m_half,
        m_2: -fourth.ln() - ln_d,
        stab_norm,
        exp_half_m_half: (m_half / 2.0).exp(),
    }
}

/// `F(τ) = P_{i∼D_π}[α(i)² < τ]` with `α(i) = √d π(i)`.
pub fn pauli_cdf(pi: &PauliRepresentation, tau: f64) -> f64 {
    let d = pi.hilbert_dim() as f64;
    pi.values.iter().filter(|v| d * v.powi(2) < tau).map(|v| v * v).sum()
}

/// Seeds of one overlap run: the two parties' samplers and the coordinator's
/// mixture coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapSeeds {
    pub alice: u64,
    pub bob: u64,
    pub coordinator: u64,
}

impl OverlapSeeds {
    /// Seeds of session `session` of an experiment with root seed `root`; a
    /// party started with seed `derive_seed(root, 1)` (Alice) or
    /// `derive_seed(root, 2)` (Bob) uses the same sampler seeds.
    pub fn for_session(root: u64, session: u64) -> Self {
        Self {
            alice: derive_seed(derive_seed(root, 1), session),
            bob: derive_seed(derive_seed(root, 2), session),
            coordinator: derive_seed(derive_seed(root, 3), session),
        }
    }
}

/// Estimates `|⟨ψ|φ⟩|²` as the inner product of the two Pauli
/// representations, with exact Pauli samplers on both sides.
pub fn distributed_overlap(psi: &DenseVector, phi: &DenseVector, eps: f64, seeds: OverlapSeeds) -> Result<EstimatorReport> {
    let pa = pauli_representation(psi)?;
    let pb = pauli_representation(phi)?;
    let kappa = pa.one_norm().max(pb.one_norm());
    let mut ha = ExactPauliSampler::new(pa, seeds.alice);
    let mut hb = ExactPauliSampler::new(pb, seeds.bob);
    let cfg = InnerProductConfig::new(eps, Mode::RealExact)?;
    Ok(inner_product_real_exact(&mut ha, &mut hb, &cfg, kappa, seeds.coordinator)?.report)
}
