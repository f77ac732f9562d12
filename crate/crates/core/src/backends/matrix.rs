use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use super::{PrepMeasureBackend, PrepMeasureHandle, SamplingLaw};
use crate::access::{check_index, SampleOutcome};
use crate::error::{AsqError, Result};
use crate::ledger::CostLedger;
use crate::numeric::DenseVector;

const NORM_SLACK: f64 = 1e-9;

/// A matrix `A` block-encoded in a unitary, accessed column by column.
///
/// Every row and column must have norm at most one. One attempt of the
/// column-index sampler prepares a uniformly random basis state `|i⟩`, applies
/// the encoding and post-selects on the block: it succeeds with probability
/// `‖A(i,*)‖²` and then reports column `k` with probability
/// `|A(i,k)|²/‖A(i,*)‖²`. Overall it succeeds with probability `‖A‖_F²/d`
/// (so `d/‖A‖_F²` attempts are expected), and a success reports `k` with
/// probability `‖A(*,k)‖²/‖A‖_F²`.
#[derive(Clone, Debug)]
pub struct MatrixBlockEncoding {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
    row_laws: Vec<SamplingLaw>,
    prep_cost: f64,
}

impl MatrixBlockEncoding {
    /// `entries` is row-major.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>, prep_cost: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(AsqError::InvalidParameter("matrix must have at least one row and column".into()));
        }
        if entries.len() != rows * cols {
            return Err(AsqError::DimensionMismatch { expected: rows * cols, got: entries.len() });
        }
        let mut row_laws = Vec::with_capacity(rows);
        for row in entries.chunks(cols) {
            let weights: Vec<f64> = row.iter().map(|z| z.norm_sqr()).collect();
            let norm_sq: f64 = weights.iter().sum();
            if norm_sq > 1.0 + NORM_SLACK {
                return Err(AsqError::NotSubnormalized { norm_sq });
            }
            row_laws.push(SamplingLaw::new(&weights, norm_sq.min(1.0))?);
        }
        for k in 0..cols {
            let norm_sq: f64 = (0..rows).map(|i| entries[i * cols + k].norm_sqr()).sum();
            if norm_sq > 1.0 + NORM_SLACK {
                return Err(AsqError::NotSubnormalized { norm_sq });
            }
        }
        Ok(Self { rows, cols, entries, row_laws, prep_cost })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, k: usize) -> Complex64 {
        self.entries[i * self.cols + k]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn column(&self, k: usize) -> Result<DenseVector> {
        check_index(k, self.cols)?;
        DenseVector::new((0..self.rows).map(|i| self.entry(i, k)).collect())
    }

    /// Squared column norms `‖A(*,k)‖²`.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.cols).map(|k| (0..self.rows).map(|i| self.entry(i, k).norm_sqr()).sum()).collect()
    }

    /// One post-selection round; the ledger records one preparation per round.
    pub fn sample_column_index<R: Rng + ?Sized>(&self, rng: &mut R, ledger: &CostLedger) -> SampleOutcome {
        let i = rng.gen_range(0..self.rows);
        let outcome = self.row_laws[i].sample(rng);
        ledger.record_sample(outcome.index().is_some());
        ledger.add_cost(self.prep_cost);
        outcome
    }

    /// Prepare-and-measure access to the subnormalized column `A(*,j)`.
    pub fn column_handle(&self, j: usize, table_eps: f64, seed: u64) -> Result<PrepMeasureHandle> {
        let backend = PrepMeasureBackend::new(self.column(j)?, self.prep_cost)?;
        PrepMeasureHandle::new(Arc::new(backend), table_eps, seed)
    }
}
