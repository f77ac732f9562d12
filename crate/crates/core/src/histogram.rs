//! Open-addressing count map used for the empirical sampling distribution.

const EMPTY: u64 = u64::MAX;

/// Counts of sampled indices; `frequency(i)` is the count over the total.
#[derive(Clone, Debug)]
pub struct Histogram {
    keys: Vec<u64>,
    counts: Vec<u64>,
    occupied: usize,
    total: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Self::with_capacity(16)
    }
}

fn mix(key: u64) -> u64 {
    let mut z = key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z ^= z >> 32;
    z
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(entries: usize) -> Self {
        let slots = (entries.max(8) * 2).next_power_of_two();
        Self { keys: vec![EMPTY; slots], counts: vec![0; slots], occupied: 0, total: 0 }
    }

    fn slot(&self, key: u64) -> usize {
        let mask = self.keys.len() - 1;
        let mut pos = mix(key) as usize & mask;
        loop {
            let k = self.keys[pos];
            if k == key || k == EMPTY {
                return pos;
            }
            pos = (pos + 1) & mask;
        }
    }

    fn grow(&mut self) {
        let old_keys = std::mem::take(&mut self.keys);
        let old_counts = std::mem::take(&mut self.counts);
        self.keys = vec![EMPTY; old_keys.len() * 2];
        self.counts = vec![0; old_keys.len() * 2];
        for (k, c) in old_keys.into_iter().zip(old_counts) {
            if k != EMPTY {
                let pos = self.slot(k);
                self.keys[pos] = k;
                self.counts[pos] = c;
            }
        }
    }

    pub fn insert(&mut self, index: usize) {
        self.add(index, 1);
    }

    /// Adds `count` observations of `index`.
    pub fn add(&mut self, index: usize, count: u64) {
        if count == 0 {
            return;
        }
        let key = index as u64;
        assert!(key != EMPTY, "index reserved as the empty marker");
        if (self.occupied + 1) * 4 > self.keys.len() * 3 {
            self.grow();
        }
        let pos = self.slot(key);
        if self.keys[pos] == EMPTY {
            self.keys[pos] = key;
            self.occupied += 1;
        }
        self.counts[pos] += count;
        self.total += count;
    }

    pub fn count(&self, index: usize) -> u64 {
        let pos = self.slot(index as u64);
        if self.keys[pos] == EMPTY {
            0
        } else {
            self.counts[pos]
        }
    }

    /// Empirical frequency; zero for an empty histogram.
    pub fn frequency(&self, index: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(index) as f64 / self.total as f64
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct indices observed.
    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// `(index, count)` pairs in increasing index order.
    pub fn entries(&self) -> Vec<(usize, u64)> {
        let mut out: Vec<(usize, u64)> = self
            .keys
            .iter()
            .zip(self.counts.iter())
            .filter(|(k, _)| **k != EMPTY)
            .map(|(&k, &c)| (k as usize, c))
            .collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    /// Adds every observation of `other`.
    pub fn absorb(&mut self, other: &Histogram) {
        for (index, count) in other.entries() {
            self.add(index, count);
        }
    }

    /// Builds a histogram from dense per-index counts.
    pub fn from_dense(counts: &[u64]) -> Self {
        let nonzero = counts.iter().filter(|&&c| c > 0).count();
        let mut h = Self::with_capacity(nonzero);
        for (i, &c) in counts.iter().enumerate() {
            h.add(i, c);
        }
        h
    }
}
