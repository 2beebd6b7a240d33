//! Empirical drops of candidates over a scored sample.

use crate::sampling::PerturbationSample;

/// `(mean, drops)` with `mean = (1/n) Σ f(x_i)` and `drop_i = mean - f(x_i)`.
pub fn sample_drops(predictions: &[f64]) -> (f64, Vec<f64>) {
    if predictions.is_empty() {
        return (0.0, Vec::new());
    }
    let mean = predictions.iter().sum::<f64>() / predictions.len() as f64;
    (mean, predictions.iter().map(|f| mean - f).collect())
}

/// Per-position bitsets over the samples: bit `i` of column `j` is set iff
/// position `j` is perturbed in sample `i`. A candidate is excluded from a
/// sample iff all its columns have the sample's bit set.
#[derive(Debug, Clone)]
pub struct DropIndex {
    n: usize,
    words: usize,
    columns: Vec<Vec<u64>>,
    values: Vec<f64>,
    mean: f64,
}

impl DropIndex {
    /// `values[i]` is the explained score `f(x_i)` of sample `i`.
    pub fn new(samples: &[PerturbationSample], values: &[f64]) -> Self {
        assert_eq!(samples.len(), values.len(), "one value per sample");
        let n = samples.len();
        let b = samples.first().map(|s| s.mask.len()).unwrap_or(0);
        let words = n.div_ceil(64);
        let mut columns = vec![vec![0u64; words]; b];
        for (i, s) in samples.iter().enumerate() {
            for (j, &m) in s.mask.iter().enumerate() {
                if m {
                    columns[j][i / 64] |= 1 << (i % 64);
                }
            }
        }
        let (mean, _) = sample_drops(values);
        DropIndex {
            n,
            words,
            columns,
            values: values.to_vec(),
            mean,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    /// Document length `b`.
    pub fn n_positions(&self) -> usize {
        self.columns.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }

    pub(crate) fn column(&self, position: usize) -> &[u64] {
        &self.columns[position]
    }

    /// `(n_c, Σ_{c ∉ x_i} f(x_i))` for the samples selected by `set`.
    pub(crate) fn stats_of(&self, set: &[u64]) -> (usize, f64) {
        let mut count = 0usize;
        let mut sum = 0.0;
        for (w, &word) in set.iter().enumerate() {
            let mut bits = word;
            count += bits.count_ones() as usize;
            while bits != 0 {
                let t = bits.trailing_zeros() as usize;
                sum += self.values[w * 64 + t];
                bits &= bits - 1;
            }
        }
        (count, sum)
    }

    /// `(n_c, D̂_c)`; the drop is `None` when no sample excludes the candidate.
    pub fn candidate_stats(&self, positions: &[usize]) -> (usize, Option<f64>) {
        let mut set = vec![u64::MAX; self.words];
        if let Some(last) = set.last_mut() {
            if !self.n.is_multiple_of(64) {
                *last = (1u64 << (self.n % 64)) - 1;
            }
        }
        for &p in positions {
            for (s, c) in set.iter_mut().zip(&self.columns[p]) {
                *s &= c;
            }
        }
        let (count, sum) = self.stats_of(&set);
        (count, self.drop_from(count, sum))
    }

    /// `D̂_c = mean - (1/n_c) Σ_{c ∉ x_i} f(x_i)`.
    pub fn empirical_drop(&self, positions: &[usize]) -> Option<f64> {
        self.candidate_stats(positions).1
    }

    pub(crate) fn drop_from(&self, count: usize, sum: f64) -> Option<f64> {
        (count > 0).then(|| self.mean - sum / count as f64)
    }
}
