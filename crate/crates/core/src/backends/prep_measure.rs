//! A simulated state-preparation oracle observed only through measurement
//! statistics. Interference experiments are modelled by Bernoulli outcomes with
//! the exact probabilities implied by the stored amplitudes.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::SamplingLaw;
use crate::access::{check_eps, check_index, AccessHandle, GroundTruth, QueryResult, SampleOutcome};
use crate::error::{AsqError, Result};
use crate::histogram::Histogram;
use crate::ledger::CostLedger;
use crate::numeric::{binomial, multinomial_counts, norm2sq, seeded_rng, DenseVector, SeededRng};

const NORM_SLACK: f64 = 1e-9;

/// Failure probability used when a handle learns its amplitude table.
const TABLE_DELTA: f64 = 1.0 / 9.0;

/// A (possibly subnormalized) state `x` with `‖x‖ ≤ 1`; a measurement of the
/// flag register succeeds with probability `‖x‖²`.
#[derive(Clone, Debug)]
pub struct PrepMeasureBackend {
    state: DenseVector,
    prep_cost: f64,
    norm_sq: f64,
    law: SamplingLaw,
}

/// Estimated magnitudes `|x(i)|`, thresholded at ε/2.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeTable {
    entries: BTreeMap<usize, f64>,
    pub shots: u64,
    pub eps: f64,
    /// Largest entry, lowest index on ties; `None` if every entry rounded to 0.
    pub reference: Option<usize>,
}

impl AmplitudeTable {
    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    /// Nonzero `(index, magnitude)` pairs.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &v)| (i, v))
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }
}

/// `⌈8 ε⁻² ln(2d/δ)⌉`.
pub fn tomography_shots(dim: usize, eps: f64, delta: f64) -> u64 {
    (8.0 / (eps * eps) * (2.0 * dim as f64 / delta).ln()).ceil() as u64
}

/// Shots per interference experiment in a phase query, `⌈576/ε²⌉`.
pub fn interference_shots(eps: f64) -> u64 {
    (576.0 / (eps * eps)).ceil() as u64
}

impl PrepMeasureBackend {
    /// `prep_cost` is the abstract cost of one state preparation.
    pub fn new(state: DenseVector, prep_cost: f64) -> Result<Self> {
        let norm_sq = norm2sq(&state);
        if norm_sq > 1.0 + NORM_SLACK {
            return Err(AsqError::NotSubnormalized { norm_sq });
        }
        if !(prep_cost >= 0.0 && prep_cost.is_finite()) {
            return Err(AsqError::InvalidParameter(format!("preparation cost must be non-negative, got {prep_cost}")));
        }
        let law = SamplingLaw::new(&state.weights(), norm_sq.min(1.0))?;
        Ok(Self { state, prep_cost, norm_sq, law })
    }

    pub fn state(&self) -> &DenseVector {
        &self.state
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn prep_cost(&self) -> f64 {
        self.prep_cost
    }

    /// One preparation followed by a measurement; fails with probability
    /// `1 − ‖x‖²`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, ledger: &CostLedger) -> SampleOutcome {
        let outcome = self.law.sample(rng);
        ledger.record_sample(outcome.index().is_some());
        ledger.add_cost(self.prep_cost);
        outcome
    }

    /// Learns `|x(i)|` to ∞-norm error ε with probability ≥ 1 − δ from
    /// `⌈8 ε⁻² ln(2d/δ)⌉` computational-basis measurements.
    pub fn estimate_abs_amplitudes<R: Rng + ?Sized>(&self, eps: f64, delta: f64, rng: &mut R, ledger: &CostLedger) -> Result<AmplitudeTable> {
        check_eps(eps)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AsqError::InvalidParameter(format!("failure probability must lie in (0,1), got {delta}")));
        }
        let shots = tomography_shots(self.dim(), eps, delta);
        // the last cell is the failed post-selection outcome
        let mut cells = self.state.weights();
        cells.push((1.0 - self.norm_sq).max(0.0));
        let counts = multinomial_counts(shots, &cells, rng);
        ledger.add_cost(shots as f64 * self.prep_cost);
        let mut entries = BTreeMap::new();
        let mut reference: Option<(usize, f64)> = None;
        for (i, &k) in counts[..self.dim()].iter().enumerate() {
            let magnitude = (k as f64 / shots as f64).sqrt();
            if magnitude < eps / 2.0 {
                continue;
            }
            entries.insert(i, magnitude);
            if reference.is_none_or(|(_, best)| magnitude > best) {
                reference = Some((i, magnitude));
            }
        }
        Ok(AmplitudeTable { entries, shots, eps, reference: reference.map(|r| r.0) })
    }

    /// Estimates `x(i)·e^{−iθ}`, where θ is the phase making `x(m)` real and
    /// non-negative for the table's reference index `m`.
    ///
    /// Two interference experiments estimate `s² = |x(m) − x(i)|²` and
    /// `t² = |x(m) + i·x(i)|²`; with `r = tbl` the result is
    /// `[r(m)² + r(i)² − s²]/(2r(m)) + i·[r(m)² + r(i)² − t²]/(2r(m))`.
    pub fn query_amplitude<R: Rng + ?Sized>(&self, tbl: &AmplitudeTable, index: usize, eps: f64, rng: &mut R, ledger: &CostLedger) -> Result<Complex64> {
        check_index(index, self.dim())?;
        check_eps(eps)?;
        let r_i = tbl.get(index);
        let m = match tbl.reference {
            Some(m) if r_i > 0.0 => m,
            _ => return Ok(Complex64::new(0.0, 0.0)),
        };
        let r_m = tbl.get(m);
        if index == m {
            return Ok(Complex64::new(r_m, 0.0));
        }
        let (x_m, x_i) = (self.state[m], self.state[index]);
        let shots = interference_shots(eps);
        let mut estimate_sq = |prob: f64| {
            let k = binomial(shots, (prob / 2.0).clamp(0.0, 1.0), rng);
            2.0 * k as f64 / shots as f64
        };
        let s_sq = estimate_sq((x_m - x_i).norm_sqr());
        let t_sq = estimate_sq((x_m + Complex64::i() * x_i).norm_sqr());
        ledger.add_cost(2.0 * shots as f64 * self.prep_cost);
        let base = r_m * r_m + r_i * r_i;
        Ok(Complex64::new(base - s_sq, base - t_sq) / (2.0 * r_m))
    }

    /// Estimates `‖x‖²` as a post-selection success frequency over
    /// `⌈3/(4ε²)⌉` preparations (Chebyshev at failure probability 1/3).
    pub fn estimate_norm_sq<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R, ledger: &CostLedger) -> Result<f64> {
        check_eps(eps)?;
        let shots = (0.75 / (eps * eps)).ceil() as u64;
        let k = binomial(shots, self.norm_sq.min(1.0), rng);
        ledger.add_cost(shots as f64 * self.prep_cost);
        Ok(k as f64 / shots as f64)
    }
}

/// Sample-and-query access backed by a [`PrepMeasureBackend`].
///
/// The amplitude table is learnt on the first query, at precision
/// `table_eps/16`, and then fixed, so every answer shares one global phase.
pub struct PrepMeasureHandle {
    backend: Arc<PrepMeasureBackend>,
    table_eps: f64,
    table: Option<AmplitudeTable>,
    rng: SeededRng,
    ledger: CostLedger,
}

impl PrepMeasureHandle {
    pub fn new(backend: Arc<PrepMeasureBackend>, table_eps: f64, seed: u64) -> Result<Self> {
        check_eps(table_eps)?;
        Ok(Self { backend, table_eps, table: None, rng: seeded_rng(seed), ledger: CostLedger::new() })
    }

    pub fn backend(&self) -> &PrepMeasureBackend {
        &self.backend
    }

    /// The table, learning it on first use.
    pub fn table(&mut self) -> Result<&AmplitudeTable> {
        if self.table.is_none() {
            let table = self.backend.estimate_abs_amplitudes(self.table_eps / 16.0, TABLE_DELTA, &mut self.rng, &self.ledger)?;
            self.table = Some(table);
        }
        Ok(self.table.as_ref().expect("table just learnt"))
    }
}

impl AccessHandle for PrepMeasureHandle {
    fn dim(&self) -> usize {
        self.backend.dim()
    }

    fn phi(&self) -> f64 {
        1.0
    }

    fn sample(&mut self) -> Result<SampleOutcome> {
        Ok(self.backend.sample(&mut self.rng, &self.ledger))
    }

    fn query(&mut self, index: usize, eps: f64) -> Result<QueryResult> {
        check_index(index, self.dim())?;
        self.table()?;
        let table = self.table.as_ref().expect("table learnt above");
        let value = self.backend.query_amplitude(table, index, eps, &mut self.rng, &self.ledger)?;
        self.ledger.record_queries(eps, 1);
        Ok(QueryResult { value, requested_eps: eps })
    }

    fn norm_sq(&mut self, eps: f64) -> Result<f64> {
        let value = self.backend.estimate_norm_sq(eps, &mut self.rng, &self.ledger)?;
        self.ledger.record_norms(eps, 1);
        Ok(value)
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn sample_valid_counts(&mut self, n: u64) -> Result<Histogram> {
        let before = self.ledger.snapshot().sample_calls;
        let result = self.backend.law.valid_counts(n, &mut self.rng, &self.ledger);
        let attempts = self.ledger.snapshot().sample_calls - before;
        self.ledger.add_cost(attempts as f64 * self.backend.prep_cost);
        result
    }

    fn ground_truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth::exact(self.backend.state.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{derive_seed, random_complex_unit};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn shot_count() {
        assert_eq!(tomography_shots(1024, 0.1, 0.1), 7942);
    }

    #[test]
    fn basis_state_table() {
        let b = PrepMeasureBackend::new(DenseVector::basis(4, 0).unwrap(), 1.0).unwrap();
        let t = b.estimate_abs_amplitudes(0.1, 0.1, &mut seeded_rng(0), &CostLedger::new()).unwrap();
        assert_eq!(t.entries().collect::<Vec<_>>(), vec![(0, 1.0)]);
        assert_eq!(t.reference, Some(0));
    }

    #[test]
    fn uniform_pair_table() {
        let b = PrepMeasureBackend::new(DenseVector::from_real(&[FRAC_1_SQRT_2; 2]).unwrap(), 1.0).unwrap();
        let mut ok = 0;
        for t in 0..1000 {
            let tbl = b.estimate_abs_amplitudes(0.05, 0.1, &mut seeded_rng(derive_seed(1, t)), &CostLedger::new()).unwrap();
            ok += ((tbl.get(0) - FRAC_1_SQRT_2).abs() <= 0.05 && (tbl.get(1) - FRAC_1_SQRT_2).abs() <= 0.05) as u32;
        }
        assert!(ok >= 900, "{ok}");
    }

    #[test]
    fn phase_query_examples() {
        let b = Arc::new(PrepMeasureBackend::new(DenseVector::basis(2, 0).unwrap(), 1.0).unwrap());
        let mut h = PrepMeasureHandle::new(b, 0.02, 0).unwrap();
        assert_eq!(h.query(0, 0.02).unwrap().value, c(1.0, 0.0));
        let spent = h.ledger().snapshot().cost_units;
        assert_eq!(h.query(1, 0.02).unwrap().value, c(0.0, 0.0));
        assert_eq!(h.ledger().snapshot().cost_units, spent);

        let x = DenseVector::new(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)]).unwrap();
        let b = Arc::new(PrepMeasureBackend::new(x, 1.0).unwrap());
        // |x(0)| = |x(1)|, so either index may become the reference
        let (mut ok, mut with_first) = (0, 0);
        for t in 0..300 {
            let mut h = PrepMeasureHandle::new(b.clone(), 0.02, derive_seed(3, t)).unwrap();
            if h.table().unwrap().reference != Some(0) {
                continue;
            }
            with_first += 1;
            ok += ((h.query(1, 0.02).unwrap().value - c(0.0, FRAC_1_SQRT_2)).norm() <= 0.02) as u32;
        }
        assert!(with_first > 50 && ok * 3 >= with_first * 2, "{ok}/{with_first}");
    }

    #[test]
    fn phases_are_consistent() {
        let mut rng = seeded_rng(12);
        let x = random_complex_unit(6, &mut rng);
        let b = Arc::new(PrepMeasureBackend::new(x.clone(), 1.0).unwrap());
        let eps = 0.05;
        let mut ok = 0;
        for t in 0..100 {
            let mut h = PrepMeasureHandle::new(b.clone(), eps, derive_seed(4, t)).unwrap();
            let m = h.table().unwrap().reference.unwrap();
            let phase = x[m].conj() / x[m].norm();
            let good = (0..6).all(|i| (h.query(i, eps).unwrap().value - x[i] * phase).norm() <= eps);
            ok += good as u32;
        }
        assert!(ok >= 67, "{ok}");
    }

    #[test]
    fn subnormalized_sampling() {
        let b = PrepMeasureBackend::new(DenseVector::from_real(&[0.5, 0.5]).unwrap(), 1.0).unwrap();
        let mut rng = seeded_rng(5);
        let ledger = CostLedger::new();
        let fails = (0..10_000).filter(|_| b.sample(&mut rng, &ledger) == SampleOutcome::Failed).count();
        assert!((fails as f64 / 1e4 - 0.5).abs() < 0.02);

        let b = PrepMeasureBackend::new(DenseVector::from_real(&[0.6, 0.0]).unwrap(), 1.0).unwrap();
        let mut hits = 0;
        for _ in 0..10_000 {
            match b.sample(&mut rng, &ledger) {
                SampleOutcome::Index(i) => {
                    assert_eq!(i, 0);
                    hits += 1;
                }
                SampleOutcome::Failed => {}
            }
        }
        assert!((hits as f64 / 1e4 - 0.36).abs() < 0.02);
        assert!(matches!(
            PrepMeasureBackend::new(DenseVector::from_real(&[1.0, 1.0]).unwrap(), 1.0),
            Err(AsqError::NotSubnormalized { .. })
        ));
    }
}
