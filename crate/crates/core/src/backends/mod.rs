//! Concrete oracle implementations: exact vectors, simulated
//! prepare-and-measure states, block-encoded matrices, and wrappers that
//! degrade exact access into oversampled or perturbed access.

mod exact;
pub mod io;
mod matrix;
mod prep_measure;
mod wrappers;

pub use exact::ExactHandle;
pub use matrix::MatrixBlockEncoding;
pub use prep_measure::{interference_shots, tomography_shots, AmplitudeTable, PrepMeasureBackend, PrepMeasureHandle};
pub use wrappers::{perturb_to_distance, random_oversampling, wrap_oversampled, wrap_perturbed, OversampledHandle, PerturbedHandle};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::{Gamma, Poisson};

use crate::access::{SampleOutcome, STARVATION_CAP};
use crate::error::{AsqError, Result};
use crate::histogram::Histogram;
use crate::ledger::CostLedger;
use crate::numeric::multinomial_counts;

/// Below this success probability, batched sampling falls back to explicit
/// attempts so that the starvation cap keeps its meaning.
const BATCH_MIN_SUCCESS: f64 = 0.5;

/// A post-selected categorical law: each attempt succeeds with probability
/// `success`, and a success lands on `i` with probability ∝ `weights[i]`.
#[derive(Clone, Debug)]
pub struct SamplingLaw {
    probs: Vec<f64>,
    index: Option<WeightedIndex<f64>>,
    success: f64,
}

impl SamplingLaw {
    pub fn new(weights: &[f64], success: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success) {
            return Err(AsqError::InvalidParameter(format!("success probability {success} outside [0,1]")));
        }
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            return Ok(Self { probs: vec![0.0; weights.len()], index: None, success: 0.0 });
        }
        let index = WeightedIndex::new(weights).map_err(|e| AsqError::InvalidParameter(e.to_string()))?;
        Ok(Self { probs: weights.iter().map(|w| w / total).collect(), index: Some(index), success })
    }

    pub fn success(&self) -> f64 {
        self.success
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// One attempt; metering is the caller's job.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleOutcome {
        match &self.index {
            None => SampleOutcome::Failed,
            Some(index) => {
                if self.success < 1.0 && !rng.gen_bool(self.success) {
                    SampleOutcome::Failed
                } else {
                    SampleOutcome::Index(index.sample(rng))
                }
            }
        }
    }

    /// Histogram of `n` valid samples, metering every attempt on `ledger`.
    ///
    /// The number of failed attempts before the `n`-th success is negative
    /// binomial; it is drawn as a Gamma–Poisson mixture.
    pub fn valid_counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R, ledger: &CostLedger) -> Result<Histogram> {
        if n == 0 {
            return Ok(Histogram::new());
        }
        if self.index.is_none() || self.success == 0.0 {
            ledger.record_samples(0, STARVATION_CAP as u64);
            return Err(AsqError::SamplerStarvation { failures: STARVATION_CAP });
        }
        if self.success < BATCH_MIN_SUCCESS {
            let mut h = Histogram::new();
            for _ in 0..n {
                let mut failures = 0u32;
                loop {
                    match self.sample(rng) {
                        SampleOutcome::Index(i) => {
                            ledger.record_sample(true);
                            h.insert(i);
                            break;
                        }
                        SampleOutcome::Failed => {
                            ledger.record_sample(false);
                            failures += 1;
                            if failures == STARVATION_CAP {
                                return Err(AsqError::SamplerStarvation { failures });
                            }
                        }
                    }
                }
            }
            return Ok(h);
        }
        let failures = if self.success >= 1.0 {
            0
        } else {
            let scale = (1.0 - self.success) / self.success;
            let lambda = Gamma::new(n as f64, scale).expect("positive shape and scale").sample(rng);
            if lambda > 0.0 {
                Poisson::new(lambda).expect("positive rate").sample(rng) as u64
            } else {
                0
            }
        };
        ledger.record_samples(n, failures);
        Ok(Histogram::from_dense(&multinomial_counts(n, &self.probs, rng)))
    }
}

pub mod gof {
    //! Goodness-of-fit check for sampler output.

    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// p-value of Pearson's χ² test of `counts` against `probs`; cells with
    /// zero expected mass must be empty, otherwise the p-value is 0.
    pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let mut stat = 0.0;
        let mut cells = 0;
        for (&c, &p) in counts.iter().zip(probs) {
            if p == 0.0 {
                if c != 0 {
                    return 0.0;
                }
                continue;
            }
            let e = p * n as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
        if cells <= 1 {
            return 1.0;
        }
        1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;

    #[test]
    fn batched_failures_follow_negative_binomial() {
        let law = SamplingLaw::new(&[1.0, 3.0], 0.75).unwrap();
        let ledger = CostLedger::new();
        let mut rng = seeded_rng(4);
        let h = law.valid_counts(1_000_000, &mut rng, &ledger).unwrap();
        let s = ledger.snapshot();
        // mean failures n(1−p)/p = 333 333
        assert!((s.sample_failures as f64 - 333_333.0).abs() < 5_000.0);
        assert!((h.frequency(1) - 0.75).abs() < 0.005);
    }

    #[test]
    fn zero_law_starves() {
        let law = SamplingLaw::new(&[0.0, 0.0], 1.0).unwrap();
        let ledger = CostLedger::new();
        assert!(matches!(
            law.valid_counts(3, &mut seeded_rng(1), &ledger),
            Err(AsqError::SamplerStarvation { .. })
        ));
        assert_eq!(law.sample(&mut seeded_rng(1)), SampleOutcome::Failed);
    }
}
