//! Dense complex vectors, ℓ2 sampling distributions and small numeric helpers
//! shared by every other module.

use std::ops::Index;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AsqError, Result};

/// An immutable complex vector of dimension `d >= 1`.
///
/// Cloning is cheap: the entries live behind an `Arc`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVector {
    entries: Arc<[Complex64]>,
}

impl DenseVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(AsqError::InvalidParameter("vector dimension must be at least 1".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(AsqError::InvalidParameter("vector entries must be finite".into()));
        }
        Ok(Self { entries: entries.into() })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// The `index`-th standard basis vector (zero-based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(AsqError::IndexOutOfRange { index, dim });
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); dim];
        entries[index] = Complex64::new(1.0, 0.0);
        Self::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> Result<Complex64> {
        self.entries
            .get(index)
            .copied()
            .ok_or(AsqError::IndexOutOfRange { index, dim: self.dim() })
    }

    pub fn norm(&self) -> f64 {
        norm2sq(self).sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> DenseVector {
        DenseVector { entries: self.entries.iter().map(|z| z * factor).collect() }
    }

    pub fn normalized(&self) -> Result<DenseVector> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(AsqError::ZeroVector);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    /// `self† other`, conjugate-linear in `self`.
    pub fn inner(&self, other: &DenseVector) -> Result<Complex64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.entries.iter().zip(other.entries.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &DenseVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// Squared magnitudes `|v(i)|²`.
    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.norm_sqr()).collect()
    }
}

impl Index<usize> for DenseVector {
    type Output = Complex64;

    fn index(&self, index: usize) -> &Complex64 {
        &self.entries[index]
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(AsqError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `Σ|v(i)|²`.
pub fn norm2sq(v: &DenseVector) -> f64 {
    v.entries().iter().map(|z| z.norm_sqr()).sum()
}

/// `Σ|v(i)|`.
pub fn one_norm(v: &DenseVector) -> f64 {
    v.entries().iter().map(|z| z.norm()).sum()
}

/// A probability mass function over `0..d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Distribution {
    weights: Vec<f64>,
}

impl L2Distribution {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(AsqError::InvalidParameter("distribution support must be non-empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AsqError::InvalidParameter("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            return Err(AsqError::ZeroVector);
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.weights.get(index).copied().unwrap_or(0.0)
    }
}

/// The ℓ2 sampling distribution `D_v(i) = |v(i)|²/‖v‖²`.
pub fn l2_distribution(v: &DenseVector) -> Result<L2Distribution> {
    if norm2sq(v) == 0.0 {
        return Err(AsqError::ZeroVector);
    }
    L2Distribution::from_weights(v.weights())
}

/// Un-halved ℓ1 distance `Σ|p(i) − q(i)|`.
pub fn tvd(p: &L2Distribution, q: &L2Distribution) -> Result<f64> {
    check_dims(p.len(), q.len())?;
    Ok(p.weights.iter().zip(q.weights.iter()).map(|(a, b)| (a - b).abs()).sum())
}

/// Whether `Σ|D_x − D_y| ≤ 4‖x − y‖/‖x‖`.
pub fn check_tvd_bound(x: &DenseVector, y: &DenseVector) -> Result<bool> {
    let (dx, dy) = (l2_distribution(x)?, l2_distribution(y)?);
    let lhs = tvd(&dx, &dy)?;
    let rhs = 4.0 * x.distance(y)? / x.norm();
    // Slack for the x = y case where both sides are rounding noise.
    Ok(lhs <= rhs + 1e-12)
}

/// Lower median; the slice is reordered.
pub fn lower_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mid = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Component-wise lower median of complex values.
pub fn complex_median(values: &[Complex64]) -> Complex64 {
    let mut re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = values.iter().map(|z| z.im).collect();
    Complex64::new(lower_median(&mut re), lower_median(&mut im))
}

/// Lower median of a multiset given as `(value, multiplicity)` pairs.
pub fn weighted_lower_median(pairs: &mut [(f64, u64)]) -> f64 {
    let total: u64 = pairs.iter().map(|p| p.1).sum();
    assert!(total > 0, "median of an empty multiset");
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // zero-based rank of the lower median
    let rank = (total - 1) / 2;
    let mut seen = 0u64;
    for &(value, count) in pairs.iter() {
        seen += count;
        if seen > rank {
            return value;
        }
    }
    unreachable!("rank is below the total multiplicity")
}

/// A Binomial(n, p) draw that stays exact for huge `n` with tiny mean, where
/// the stock sampler is unreliable: small means use geometric waiting times.
pub fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        return n - binomial(n, 1.0 - p, rng);
    }
    if (n as f64) * p < 16.0 {
        let log_q = (-p).ln_1p();
        let mut successes = 0u64;
        let mut position = 0u64;
        loop {
            let u: f64 = rng.gen();
            // failures before the next success
            let skip = ((1.0 - u).ln() / log_q).floor();
            if skip >= (n - position) as f64 {
                return successes;
            }
            position += skip as u64 + 1;
            successes += 1;
            if position >= n {
                return successes;
            }
        }
    }
    Binomial::new(n, p).expect("probability in (0,1)").sample(rng)
}

/// One multinomial draw of `n` trials over `probs` (need not be normalized).
///
/// Equivalent in law to `n` independent categorical draws.
pub fn multinomial_counts<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_mass: f64 = probs.iter().sum();
    for (slot, &p) in counts.iter_mut().zip(probs.iter()) {
        if remaining_n == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let k = binomial(remaining_n, (p / remaining_mass).clamp(0.0, 1.0), rng);
        *slot = k;
        remaining_n -= k;
        remaining_mass -= p;
        if remaining_mass <= 0.0 {
            // rounding: dump the rest on the current slot
            *slot += remaining_n;
            remaining_n = 0;
        }
    }
    if remaining_n > 0 {
        // rounding left trials unassigned; give them to the last supported entry
        if let Some(pos) = probs.iter().rposition(|&p| p > 0.0) {
            counts[pos] += remaining_n;
        }
    }
    counts
}

/// SplitMix64 finalizer; derives independent stream seeds from a root seed.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

/// A Gaussian random complex vector normalized to unit length.
pub fn random_complex_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseVector {
    loop {
        let entries: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(v) = DenseVector::new(entries).and_then(|v| v.normalized()) {
            return v;
        }
    }
}

/// A Gaussian random real vector normalized to unit length.
pub fn random_real_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseVector {
    loop {
        let entries: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(v) = DenseVector::from_real(&entries).and_then(|v| v.normalized()) {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn norm2sq_examples() {
        assert_eq!(norm2sq(&DenseVector::basis(4, 0).unwrap()), 1.0);
        assert_eq!(norm2sq(&DenseVector::from_real(&[3.0, 4.0]).unwrap()), 25.0);
        assert_eq!(norm2sq(&DenseVector::from_real(&[0.0, 0.0]).unwrap()), 0.0);
        assert!(DenseVector::new(vec![]).is_err());
    }

    #[test]
    fn one_norm_examples() {
        assert_eq!(one_norm(&DenseVector::from_real(&[1.0, 0.0]).unwrap()), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = DenseVector::from_real(&[h, h]).unwrap();
        assert!((one_norm(&v) - 2f64.sqrt()).abs() < 1e-12);
        let v = DenseVector::new(vec![c(0.6, 0.8), c(0.0, 0.0)]).unwrap();
        assert!((one_norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_distribution_examples() {
        let d = l2_distribution(&DenseVector::from_real(&[1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(d.weights(), &[1.0, 0.0]);
        let d = l2_distribution(&DenseVector::from_real(&[3.0, 4.0]).unwrap()).unwrap();
        assert!((d.prob(0) - 0.36).abs() < 1e-15 && (d.prob(1) - 0.64).abs() < 1e-15);
        let d = l2_distribution(&DenseVector::from_real(&[0.5; 4]).unwrap()).unwrap();
        assert!(d.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
        assert_eq!(
            l2_distribution(&DenseVector::from_real(&[0.0, 0.0]).unwrap()),
            Err(AsqError::ZeroVector)
        );
    }

    #[test]
    fn tvd_examples() {
        let p = L2Distribution::from_weights(vec![1.0, 0.0]).unwrap();
        let q = L2Distribution::from_weights(vec![0.64, 0.36]).unwrap();
        assert_eq!(tvd(&p, &p).unwrap(), 0.0);
        assert!((tvd(&p, &q).unwrap() - 0.72).abs() < 1e-12);
        let a = L2Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        let b = L2Distribution::from_weights(vec![0.0, 1.0]).unwrap();
        assert!((tvd(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let three = L2Distribution::from_weights(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(tvd(&a, &three), Err(AsqError::DimensionMismatch { .. })));
    }

    #[test]
    fn tvd_bound_examples() {
        let x = DenseVector::from_real(&[1.0, 0.0]).unwrap();
        assert!(check_tvd_bound(&x, &x).unwrap());
        let y = DenseVector::from_real(&[0.8, 0.6]).unwrap();
        // tvd = 0.72, bound = 4·‖(0.2, −0.6)‖ ≈ 2.5298
        assert!((x.distance(&y).unwrap() * 4.0 - 2.529_822).abs() < 1e-6);
        assert!(check_tvd_bound(&x, &y).unwrap());
        let zero = DenseVector::from_real(&[0.0, 0.0]).unwrap();
        assert_eq!(check_tvd_bound(&zero, &x), Err(AsqError::ZeroVector));
    }

    #[test]
    fn tvd_bound_sweep() {
        let mut rng = seeded_rng(11);
        for trial in 0..1000 {
            let dim = 1 + trial % 8;
            let x = random_complex_unit(dim, &mut rng).scaled(c(rng.gen_range(0.1..3.0), 0.0));
            let y = random_complex_unit(dim, &mut rng).scaled(c(rng.gen_range(0.1..3.0), 0.0));
            assert!(check_tvd_bound(&x, &y).unwrap());
        }
    }

    #[test]
    fn medians() {
        assert_eq!(lower_median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(weighted_lower_median(&mut [(5.0, 1), (1.0, 2), (3.0, 1)]), 1.0);
        assert_eq!(weighted_lower_median(&mut [(5.0, 3), (1.0, 2)]), 5.0);
        assert_eq!(weighted_lower_median(&mut [(5.0, 2), (1.0, 2)]), 1.0);
    }

    #[test]
    fn binomial_extremes() {
        let mut rng = seeded_rng(21);
        let n = 1_000_000_000_000u64;
        for &p in &[1e-16, 1e-13, 1e-11, 0.3, 1.0 - 1e-13, 1.0 - 2e-16] {
            let draws: Vec<u64> = (0..2000).map(|_| binomial(n, p, &mut rng)).collect();
            let mean = draws.iter().map(|&k| k as f64).sum::<f64>() / 2000.0;
            let sd = (n as f64 * p * (1.0 - p)).sqrt().max(1e-3);
            assert!((mean - n as f64 * p).abs() <= 5.0 * sd / 2000f64.sqrt() + 1e-3, "p={p} mean={mean}");
        }
        let small: Vec<u64> = (0..100_000).map(|_| binomial(20, 0.1, &mut rng)).collect();
        let zeros = small.iter().filter(|&&k| k == 0).count() as f64 / 1e5;
        assert!((zeros - 0.9f64.powi(20)).abs() < 0.005);
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = seeded_rng(3);
        let counts = multinomial_counts(1_000_000_000_000, &[0.2, 0.0, 0.5, 0.3], &mut rng);
        assert_eq!(counts.iter().sum::<u64>(), 1_000_000_000_000);
        assert_eq!(counts[1], 0);
        assert!((counts[2] as f64 / 1e12 - 0.5).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn l2_distribution_sums_to_one(entries in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..64)) {
            let v = DenseVector::new(entries.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            prop_assume!(norm2sq(&v) > 0.0);
            let total: f64 = l2_distribution(&v).unwrap().weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn one_norm_dominates_two_norm(entries in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..64)) {
            let v = DenseVector::new(entries.iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let (l1, l2) = (one_norm(&v), norm2sq(&v).sqrt());
            prop_assert!(l1 + 1e-12 >= l2);
            let nonzero = v.entries().iter().filter(|z| z.norm() > 0.0).count();
            if nonzero <= 1 {
                prop_assert!((l1 - l2).abs() < 1e-9);
            }
        }

        #[test]
        fn tvd_bound_holds(seed in any::<u64>(), dim in 1usize..=256) {
            let mut rng = seeded_rng(seed);
            let x = random_complex_unit(dim, &mut rng);
            let y = random_complex_unit(dim, &mut rng).scaled(c(rng.gen_range(0.05..4.0), 0.0));
            prop_assert!(check_tvd_bound(&x, &y).unwrap());
        }
    }
}
