use num_complex::Complex64;

use super::SamplingLaw;
use crate::access::{check_eps, AccessHandle, GroundTruth, QueryResult, SampleOutcome};
use crate::error::Result;
use crate::histogram::Histogram;
use crate::ledger::CostLedger;
use crate::numeric::{norm2sq, seeded_rng, DenseVector, SeededRng};

/// Error-free sample-and-query access to a stored vector (φ = 1).
///
/// Sampling never fails for a nonzero vector; queries and norms are exact
/// within f64 precision, whatever ε is requested.
pub struct ExactHandle {
    x: DenseVector,
    law: SamplingLaw,
    norm_sq: f64,
    rng: SeededRng,
    ledger: CostLedger,
}

impl ExactHandle {
    pub fn new(x: DenseVector, seed: u64) -> Self {
        let law = SamplingLaw::new(&x.weights(), 1.0).expect("weights of a valid vector");
        Self { norm_sq: norm2sq(&x), x, law, rng: seeded_rng(seed), ledger: CostLedger::new() }
    }

    pub fn vector(&self) -> &DenseVector {
        &self.x
    }
}

impl AccessHandle for ExactHandle {
    fn dim(&self) -> usize {
        self.x.dim()
    }

    fn phi(&self) -> f64 {
        1.0
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        let outcome = self.law.sample(&mut self.rng);
        self.ledger.record_sample(outcome.index().is_some());
        Ok(outcome)
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_eps(eps)?;
        let value = self.x.get(index)?;
        self.ledger.record_queries(eps, 1);
        Ok(QueryResult { value, requested_eps: eps })
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        self.ledger.record_norms(eps, 1);
        Ok(self.norm_sq)
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        self.law.valid_counts(n, &mut self.rng, &self.ledger)
    }

    fn exact_entry(&self, index: usize) -> Option<Complex64> {
        self.x.entries().get(index).copied()
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth::exact(self.x.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::gof::chi_square_p;
    use crate::numeric::{l2_distribution, random_complex_unit};

    #[test]
    fn exact_queries_and_norm() {
        let x = DenseVector::from_real(&[3.0, 4.0]).unwrap();
        let mut h = ExactHandle::new(x, 0);
        assert_eq!(h.query(1, 0.3).unwrap().value, Complex64::new(4.0, 0.0));
        assert_eq!(h.norm_sq(0.1).unwrap(), 25.0);
        assert!(h.query(2, 0.1).is_err());
        assert!(h.query(0, 0.0).is_err());
    }

    #[test]
    fn sampler_matches_l2_law() {
        let mut rng = seeded_rng(17);
        let x = random_complex_unit(64, &mut rng);
        let probs = l2_distribution(&x).unwrap().weights().to_vec();
        let mut h = ExactHandle::new(x, 18);
        let mut counts = vec![0u64; 64];
        for _ in 0..100_000 {
            counts[h.sample_valid().unwrap()] += 1;
        }
        assert!(chi_square_p(&counts, &probs) > 0.001);
        let batch = h.sample_valid_counts(100_000).unwrap();
        let dense: Vec<u64> = (0..64).map(|i| batch.count(i)).collect();
        assert!(chi_square_p(&dense, &probs) > 0.001);
    }
}
