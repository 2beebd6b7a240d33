//! Size-ordered search for the smallest candidate whose empirical drop
//! reaches `epsilon * mean_prediction`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::drops::DropIndex;

/// A set of token positions with its empirical drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Sorted, 0-based positions into the example.
    pub positions: Vec<usize>,
    /// Number of samples in which every position is perturbed.
    pub n_excluded: usize,
    pub drop: f64,
}

impl Candidate {
    pub fn size(&self) -> usize {
        self.positions.len()
    }
}

/// True when `a` should replace `b` as the best candidate: larger drop,
/// then smaller size, then lexicographically smaller positions.
pub fn better(a: &Candidate, b: &Candidate) -> bool {
    rank(a, b) == Ordering::Less
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.drop
        .partial_cmp(&a.drop)
        .unwrap_or(Ordering::Equal)
        .then(a.size().cmp(&b.size()))
        .then_with(|| a.positions.cmp(&b.positions))
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if rank(&b, &a) == Ordering::Less { b } else { a }),
        (a, b) => a.or(b),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubsetSearch {
    /// Best candidate found; `None` only when every candidate was skipped.
    pub best: Option<Candidate>,
    pub threshold_met: bool,
    /// `epsilon * mean_prediction`.
    pub threshold: f64,
    pub evaluated: usize,
    /// Candidates never excluded from any sample.
    pub skipped: usize,
}

/// `s_i = D̂_{{i}}`, `None` for positions never perturbed.
pub fn token_scores(index: &DropIndex) -> Vec<Option<f64>> {
    (0..index.n_positions()).map(|i| index.empirical_drop(&[i])).collect()
}

/// Positions used for candidates of size ≥ 2: all of them when
/// `pool_size ≥ b`, else the `pool_size` best-scoring positions (ties by
/// position). Returned sorted.
pub fn candidate_pool(scores: &[Option<f64>], pool_size: usize) -> Vec<usize> {
    if pool_size >= scores.len() {
        return (0..scores.len()).collect();
    }
    let mut ranked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let mut pool: Vec<usize> = ranked.into_iter().take(pool_size).map(|(i, _)| i).collect();
    pool.sort_unstable();
    pool
}

struct SizeResult {
    best: Option<Candidate>,
    evaluated: usize,
    skipped: usize,
}

impl SizeResult {
    fn merge(self, other: SizeResult) -> SizeResult {
        SizeResult {
            best: pick(self.best, other.best),
            evaluated: self.evaluated + other.evaluated,
            skipped: self.skipped + other.skipped,
        }
    }
}

/// Depth-first enumeration of all `size`-subsets of `pool[start..]` extending
/// `chosen`, with running bitset intersections in `stack`.
#[allow(clippy::too_many_arguments)]
fn enumerate(
    index: &DropIndex,
    pool: &[usize],
    start: usize,
    size: usize,
    chosen: &mut Vec<usize>,
    stack: &mut Vec<Vec<u64>>,
    out: &mut SizeResult,
) {
    let depth = chosen.len();
    if depth == size {
        let (count, sum) = index.stats_of(&stack[depth - 1]);
        out.evaluated += 1;
        match index.drop_from(count, sum) {
            Some(drop) => {
                let cand = Candidate {
                    positions: chosen.clone(),
                    n_excluded: count,
                    drop,
                };
                out.best = pick(out.best.take(), Some(cand));
            }
            None => out.skipped += 1,
        }
        return;
    }
    let remaining = size - depth;
    for k in start..=pool.len() - remaining {
        let column = index.column(pool[k]);
        if depth == 0 {
            stack[0].copy_from_slice(column);
        } else {
            let (prev, next) = stack.split_at_mut(depth);
            for ((n, p), c) in next[0].iter_mut().zip(&prev[depth - 1]).zip(column) {
                *n = p & c;
            }
            // no sample left: every extension is skipped as well
            if next[0].iter().all(|&w| w == 0) {
                let skipped = binomial(pool.len() - k - 1, remaining - 1);
                out.evaluated += skipped;
                out.skipped += skipped;
                continue;
            }
        }
        chosen.push(pool[k]);
        enumerate(index, pool, k + 1, size, chosen, stack, out);
        chosen.pop();
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn best_of_size(index: &DropIndex, pool: &[usize], size: usize) -> SizeResult {
    let empty = || SizeResult {
        best: None,
        evaluated: 0,
        skipped: 0,
    };
    if size == 0 || size > pool.len() {
        return empty();
    }
    (0..=pool.len() - size)
        .into_par_iter()
        .map(|first| {
            let mut out = empty();
            let mut stack = vec![vec![0u64; index.words()]; size];
            stack[0].copy_from_slice(index.column(pool[first]));
            let mut chosen = vec![pool[first]];
            if size == 1 {
                let (count, sum) = index.stats_of(&stack[0]);
                out.evaluated = 1;
                match index.drop_from(count, sum) {
                    Some(drop) => {
                        out.best = Some(Candidate {
                            positions: chosen,
                            n_excluded: count,
                            drop,
                        })
                    }
                    None => out.skipped = 1,
                }
                return out;
            }
            enumerate(index, pool, first + 1, size, &mut chosen, &mut stack, &mut out);
            out
        })
        .reduce(empty, SizeResult::merge)
}

/// For `size = 1..=l_max`, enumerates candidates (singletons over all
/// positions, larger sizes over [`candidate_pool`]), keeps the best candidate
/// seen so far across all sizes, and stops at the first size where that
/// best reaches `epsilon * mean`. Falls back to the overall best.
pub fn find_minimal_subset(
    index: &DropIndex,
    scores: &[Option<f64>],
    epsilon: f64,
    l_max: usize,
    pool_size: usize,
) -> SubsetSearch {
    let b = index.n_positions();
    let threshold = epsilon * index.mean();
    let all: Vec<usize> = (0..b).collect();
    let pool = candidate_pool(scores, pool_size);
    let mut result = SubsetSearch {
        threshold,
        ..SubsetSearch::default()
    };
    for size in 1..=l_max.min(b) {
        let positions = if size == 1 { &all } else { &pool };
        let found = best_of_size(index, positions, size);
        result.evaluated += found.evaluated;
        result.skipped += found.skipped;
        result.best = pick(result.best.take(), found.best);
        if let Some(best) = &result.best {
            if best.drop >= threshold {
                result.threshold_met = true;
                return result;
            }
        }
    }
    result
}
