//! Oracle-call metering.
//!
//! Query and norm calls are tallied per requested precision so that complexity
//! claims can be phrased as call-count budgets rather than wall-clock times.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Interior-mutable tally shared by a handle and whoever inspects it.
#[derive(Debug, Default)]
pub struct CostLedger {
    inner: Mutex<LedgerSnapshot>,
}

/// A point-in-time copy of a [`CostLedger`].
///
/// Precisions are keyed by their IEEE-754 bit pattern; for positive values the
/// bit order coincides with numeric order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LedgerSnapshot {
    pub sample_calls: u64,
    pub sample_failures: u64,
    queries: BTreeMap<u64, u64>,
    norms: BTreeMap<u64, u64>,
    /// Abstract cost units (state preparations, measurement shots, …).
    pub cost_units: f64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn with<R>(&self, f: impl FnOnce(&mut LedgerSnapshot) -> R) -> R {
        let mut guard = self.inner.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
        f(&mut guard)
    }

    pub fn record_sample(&self, success: bool) {
        self.with(|s| {
            s.sample_calls += 1;
            if !success {
                s.sample_failures += 1;
            }
        });
    }

    /// Records `successes + failures` attempts in one step.
    pub fn record_samples(&self, successes: u64, failures: u64) {
        self.with(|s| {
            s.sample_calls += successes + failures;
            s.sample_failures += failures;
        });
    }

    pub fn record_queries(&self, eps: f64, count: u64) {
        if count > 0 {
            self.with(|s| *s.queries.entry(eps.to_bits()).or_default() += count);
        }
    }

    pub fn record_norms(&self, eps: f64, count: u64) {
        if count > 0 {
            self.with(|s| *s.norms.entry(eps.to_bits()).or_default() += count);
        }
    }

    pub fn add_cost(&self, units: f64) {
        self.with(|s| s.cost_units += units);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        self.with(|s| s.clone())
    }
}

impl LedgerSnapshot {
    /// `(ε, count)` pairs in increasing ε.
    pub fn queries(&self) -> Vec<(f64, u64)> {
        self.queries.iter().map(|(&k, &v)| (f64::from_bits(k), v)).collect()
    }

    pub fn norms(&self) -> Vec<(f64, u64)> {
        self.norms.iter().map(|(&k, &v)| (f64::from_bits(k), v)).collect()
    }

    pub fn query_count(&self, eps: f64) -> u64 {
        self.queries.get(&eps.to_bits()).copied().unwrap_or(0)
    }

    pub fn total_queries(&self) -> u64 {
        self.queries.values().sum()
    }

    pub fn total_norms(&self) -> u64 {
        self.norms.values().sum()
    }

    /// Adds another snapshot's tallies into this one.
    pub fn merge(&mut self, other: &LedgerSnapshot) {
        self.sample_calls += other.sample_calls;
        self.sample_failures += other.sample_failures;
        for (&k, &v) in &other.queries {
            *self.queries.entry(k).or_default() += v;
        }
        for (&k, &v) in &other.norms {
            *self.norms.entry(k).or_default() += v;
        }
        self.cost_units += other.cost_units;
    }

    /// The activity between `earlier` and `self` (both from the same ledger).
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        let diff = |now: &BTreeMap<u64, u64>, then: &BTreeMap<u64, u64>| {
            now.iter()
                .filter_map(|(&k, &v)| {
                    let d = v - then.get(&k).copied().unwrap_or(0);
                    (d > 0).then_some((k, d))
                })
                .collect()
        };
        LedgerSnapshot {
            sample_calls: self.sample_calls - earlier.sample_calls,
            sample_failures: self.sample_failures - earlier.sample_failures,
            queries: diff(&self.queries, &earlier.queries),
            norms: diff(&self.norms, &earlier.norms),
            cost_units: self.cost_units - earlier.cost_units,
        }
    }

    /// Whether every counter of `self` is at least the matching one in `earlier`.
    pub fn dominates(&self, earlier: &LedgerSnapshot) -> bool {
        let covers = |now: &BTreeMap<u64, u64>, then: &BTreeMap<u64, u64>| {
            then.iter().all(|(k, &v)| now.get(k).copied().unwrap_or(0) >= v)
        };
        self.sample_calls >= earlier.sample_calls
            && self.sample_failures >= earlier.sample_failures
            && covers(&self.queries, &earlier.queries)
            && covers(&self.norms, &earlier.norms)
            && self.cost_units >= earlier.cost_units
    }
}

#[derive(Serialize, Deserialize)]
struct EpsCount {
    eps: f64,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct LedgerJson {
    samples: u64,
    sample_failures: u64,
    queries: Vec<EpsCount>,
    norms: Vec<EpsCount>,
}

impl Serialize for LedgerSnapshot {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let to_pairs = |pairs: Vec<(f64, u64)>| {
            pairs.into_iter().map(|(eps, count)| EpsCount { eps, count }).collect()
        };
        LedgerJson {
            samples: self.sample_calls,
            sample_failures: self.sample_failures,
            queries: to_pairs(self.queries()),
            norms: to_pairs(self.norms()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LedgerSnapshot {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = LedgerJson::deserialize(deserializer)?;
        let to_map = |pairs: Vec<EpsCount>| pairs.into_iter().map(|p| (p.eps.to_bits(), p.count)).collect();
        Ok(LedgerSnapshot {
            sample_calls: json.samples,
            sample_failures: json.sample_failures,
            queries: to_map(json.queries),
            norms: to_map(json.norms),
            cost_units: 0.0,
        })
    }
}
