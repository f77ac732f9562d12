use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{magic_report, PauliRepresentation};
use crate::access::{check_eps, check_index, AccessHandle, GroundTruth, QueryResult, SampleOutcome};
use crate::backends::SamplingLaw;
use crate::error::{AsqError, Result};
use crate::histogram::Histogram;
use crate::ledger::CostLedger;
use crate::numeric::{binomial, seeded_rng, SeededRng};

/// Cost of one Bell-sampling-based draw from `D_π`:
/// `N = e^{4χ} e^{2M_{1/2}} Δ⁻⁴ (ln d)³ ln(1/δ)` state copies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryCost {
    /// Entanglement bound χ.
    pub chi: f64,
    /// Sampling distance budget Δ.
    pub delta_tvd: f64,
    /// Failure probability δ.
    pub delta_fail: f64,
}

impl CorollaryCost {
    pub fn copies(&self, m_half: f64, qubits: u32) -> Result<f64> {
        if !(self.delta_tvd > 0.0 && self.delta_fail > 0.0 && self.delta_fail < 1.0 && self.chi >= 0.0) {
            return Err(AsqError::InvalidParameter("cost model needs χ ≥ 0, Δ > 0 and δ ∈ (0,1)".into()));
        }
        let ln_d = qubits as f64 * std::f64::consts::LN_2;
        Ok((4.0 * self.chi).exp() * (2.0 * m_half).exp() * self.delta_tvd.powi(-4) * ln_d.powi(3) * (1.0 / self.delta_fail).ln())
    }
}

/// Sample-and-query access to `π_ψ`.
///
/// Samples are exact draws from `D_π`; a query of `π(i)` to precision ε
/// simulates `⌈3/(dε²)⌉` ±1 measurements of `P_i`, whose mean estimates
/// `α(i) = √d π(i)` to within `ε√d` with probability ≥ 2/3; `norm_sq` returns
/// 1 at no cost. Every shot costs `prep_cost` ledger units and every sample
/// the attached [`CorollaryCost`], if any.
pub struct ExactPauliSampler {
    pi: Arc<PauliRepresentation>,
    law: SamplingLaw,
    prep_cost: f64,
    sample_cost: f64,
    rng: SeededRng,
    ledger: CostLedger,
}

/// `⌈3/(dε²)⌉` shots per query.
pub fn pauli_query_shots(dim: usize, eps: f64) -> u64 {
    (3.0 / (dim as f64 * eps * eps)).ceil().max(1.0) as u64
}

impl ExactPauliSampler {
    pub fn new(pi: PauliRepresentation, seed: u64) -> Self {
        Self::shared(Arc::new(pi), seed)
    }

    pub fn shared(pi: Arc<PauliRepresentation>, seed: u64) -> Self {
        let weights: Vec<f64> = pi.values().iter().map(|v| v * v).collect();
        let law = SamplingLaw::new(&weights, 1.0).expect("non-negative weights");
        Self { pi, law, prep_cost: 1.0, sample_cost: 0.0, rng: seeded_rng(seed), ledger: CostLedger::new() }
    }

    /// Attaches the per-sample cost of a Bell-sampling realization.
    pub fn with_cost(mut self, cost: CorollaryCost) -> Result<Self> {
        self.sample_cost = cost.copies(magic_report(&self.pi).m_half, self.pi.qubits())?;
        Ok(self)
    }

    /// Cost units per measurement shot (the state-preparation time T).
    pub fn with_prep_cost(mut self, prep_cost: f64) -> Self {
        self.prep_cost = prep_cost;
        self
    }

    pub fn representation(&self) -> &PauliRepresentation {
        &self.pi
    }

    pub fn sample_cost(&self) -> f64 {
        self.sample_cost
    }
}

impl AccessHandle for ExactPauliSampler {
    fn dim(&self) -> usize {
        self.pi.values().len()
    }

    fn phi(&self) -> f64 {
        1.0
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        let outcome = self.law.sample(&mut self.rng);
        self.ledger.record_sample(outcome.index().is_some());
        self.ledger.add_cost(self.sample_cost);
        Ok(outcome)
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_eps(eps)?;
        check_index(index, self.dim())?;
        let d = self.pi.hilbert_dim();
        let sqrt_d = (d as f64).sqrt();
        let mut alpha = (self.pi.values()[index] * sqrt_d).clamp(-1.0, 1.0);
        if 1.0 - alpha.abs() < 1e-12 {
            alpha = alpha.signum();
        }
        let shots = pauli_query_shots(d, eps);
        let plus = binomial(shots, (1.0 + alpha) / 2.0, &mut self.rng);
        let alpha_hat = 2.0 * plus as f64 / shots as f64 - 1.0;
        self.ledger.record_queries(eps, 1);
        self.ledger.add_cost(self.prep_cost * shots as f64);
        Ok(QueryResult { value: Complex64::new(alpha_hat / sqrt_d, 0.0), requested_eps: eps })
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.ledger.record_norms(eps, 1);
        Ok(1.0)
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        let h = self.law.valid_counts(n, &mut self.rng, &self.ledger)?;
        self.ledger.add_cost(self.sample_cost * n as f64);
        Ok(h)
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth::exact(self.pi.to_vector()))
    }
}
