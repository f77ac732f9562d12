//! Approximate sample-and-query (ASQ) access to vectors and block-encoded
//! matrices: metered oracles, composition into linear combinations, inner
//! product estimators, Pauli-basis machinery and a two-party overlap protocol.
//!
//! Every oracle call is tallied on a [`ledger::CostLedger`], so complexity
//! claims become call-count budgets that tests can check.

pub mod access;
pub mod backends;
pub mod compose;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod histogram;
pub mod ledger;
pub mod net;
pub mod numeric;
pub mod pauli;

pub use access::{boosted_query, relative_estimate, AccessHandle, EstimatorReport, SampleOutcome};
pub use error::{AsqError, Result};
pub use numeric::DenseVector;
