//! Exact expectations under mask-sampling by enumerating every mask
//! pattern, and closed-form drops for the built-in linear and shortcut
//! models.

pub mod instances;
pub mod verify;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::predictor::{Predictor, TargetClass};
use crate::text::Document;

/// Longest document the enumeration accepts (2^20 patterns).
pub const MAX_EXACT_LENGTH: usize = 20;

const PREDICT_CHUNK: usize = 4096;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Neumaier::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.total()
}

/// How a perturbed position is removed from the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal<'a> {
    Mask(&'a str),
    Delete,
}

/// Conditional statistics of `f` given that a candidate is absent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional {
    /// `P(c ∉ x)`.
    pub probability: f64,
    /// `E[f | c ∉ x]`.
    pub mean: f64,
    /// `Var[f | c ∉ x]`.
    pub variance: f64,
}

/// The mask-sampling distribution of a `b`-token example: pattern `s` (bit
/// `i` set = position `i` perturbed) has probability `p^|s| (1-p)^(b-|s|)`.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    b: usize,
    p_perturb: f64,
    probabilities: Vec<f64>,
    values: Vec<f64>,
}

fn pattern_probability(b: usize, p: f64, pattern: usize) -> f64 {
    let k = pattern.count_ones() as i32;
    p.powi(k) * (1.0 - p).powi(b as i32 - k)
}

fn check_length(b: usize) -> Result<()> {
    if b > MAX_EXACT_LENGTH {
        return Err(Error::TooLarge {
            b,
            max: MAX_EXACT_LENGTH,
        });
    }
    Ok(())
}

fn to_mask(positions: &[usize]) -> usize {
    positions.iter().fold(0, |m, &i| m | (1 << i))
}

fn to_positions(mask: usize, b: usize) -> Vec<usize> {
    (0..b).filter(|&i| mask & (1 << i) != 0).collect()
}

impl ExactDistribution {
    /// Builds the distribution from a function of the perturbation mask.
    pub fn from_fn(b: usize, p_perturb: f64, mut f: impl FnMut(&[bool]) -> f64) -> Result<Self> {
        check_length(b)?;
        let mut mask = vec![false; b];
        let mut probabilities = Vec::with_capacity(1 << b);
        let mut values = Vec::with_capacity(1 << b);
        for s in 0..1usize << b {
            for (i, m) in mask.iter_mut().enumerate() {
                *m = s & (1 << i) != 0;
            }
            probabilities.push(pattern_probability(b, p_perturb, s));
            values.push(f(&mask));
        }
        Ok(ExactDistribution {
            b,
            p_perturb,
            probabilities,
            values,
        })
    }

    /// Scores every perturbation of `xi` with `model`.
    pub fn of_model<P: Predictor + ?Sized>(
        model: &P,
        xi: &Document,
        p_perturb: f64,
        target: TargetClass,
        removal: Removal<'_>,
    ) -> Result<Self> {
        let b = xi.len();
        check_length(b)?;
        let target = target.resolve(&model.predict_one(xi)?);
        let build = |s: usize| -> Document {
            let positions = to_positions(s, b);
            match removal {
                Removal::Mask(token) => xi.masked(&positions, token),
                Removal::Delete => xi.without(&positions.into_iter().collect()),
            }
        };
        let total = 1usize << b;
        let mut values = Vec::with_capacity(total);
        let mut start = 0;
        while start < total {
            let end = (start + PREDICT_CHUNK).min(total);
            let docs: Vec<Document> = (start..end).map(build).collect();
            for p in model.predict_batch(&docs)? {
                values.push(p.target_score(target)?);
            }
            start = end;
        }
        if values.len() != total {
            return Err(Error::invalid("model returned a wrong number of predictions"));
        }
        let probabilities = (0..total).map(|s| pattern_probability(b, p_perturb, s)).collect();
        Ok(ExactDistribution {
            b,
            p_perturb,
            probabilities,
            values,
        })
    }

    pub fn n_positions(&self) -> usize {
        self.b
    }

    pub fn p_perturb(&self) -> f64 {
        self.p_perturb
    }

    pub fn total_probability(&self) -> f64 {
        neumaier_sum(self.probabilities.iter().copied())
    }

    /// `E[f(x)]`.
    pub fn mean(&self) -> f64 {
        neumaier_sum(self.probabilities.iter().zip(&self.values).map(|(p, v)| p * v))
    }

    /// `Var[f(x)]`.
    pub fn variance(&self) -> f64 {
        self.conditional_on_mask(0).variance
    }

    fn conditional_on_mask(&self, c: usize) -> Conditional {
        let full = (1usize << self.b) - 1;
        let free = full & !c;
        let (mut pr, mut first, mut second) = (Neumaier::default(), Neumaier::default(), Neumaier::default());
        let mut sub = free;
        loop {
            let s = c | sub;
            let (p, v) = (self.probabilities[s], self.values[s]);
            pr.add(p);
            first.add(p * v);
            second.add(p * v * v);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
        let probability = pr.total();
        let mean = first.total() / probability;
        let variance = (second.total() / probability - mean * mean).max(0.0);
        Conditional {
            probability,
            mean,
            variance,
        }
    }

    /// Statistics of `f` over the samples that exclude `positions`.
    pub fn conditional(&self, positions: &[usize]) -> Conditional {
        self.conditional_on_mask(to_mask(positions))
    }

    /// `D_c = E[f(x)] - E[f(x) 1{c ∉ x}] / P(c ∉ x)`.
    pub fn candidate_drop(&self, positions: &[usize]) -> f64 {
        self.mean() - self.conditional(positions).mean
    }

    /// Approximate standard error of the empirical drop from `n` samples.
    pub fn drop_standard_error(&self, positions: &[usize], n: usize) -> f64 {
        let cond = self.conditional(positions);
        (cond.variance / (n as f64 * cond.probability)).sqrt()
    }
}

/// Exact drop of `c` under mask-sampling of `xi`, explaining `target`.
pub fn exact_candidate_drop<P: Predictor + ?Sized>(
    model: &P,
    xi: &Document,
    c: &[usize],
    p_perturb: f64,
    target: TargetClass,
    mask_token: &str,
) -> Result<f64> {
    if let Some(&i) = c.iter().find(|&&i| i >= xi.len()) {
        return Err(Error::invalid(format!("position {i} outside the document")));
    }
    let dist = ExactDistribution::of_model(model, xi, p_perturb, target, Removal::Mask(mask_token))?;
    Ok(dist.candidate_drop(c))
}

/// `q_keep * Σ_j w_j c_j` with `w_j = λ_j idf_j`.
pub fn linear_drop_closed_form(weights: &[f64], counts: &[usize], q_keep: f64) -> f64 {
    q_keep * neumaier_sum(weights.iter().zip(counts).map(|(w, &c)| w * c as f64))
}

/// `∏_j (1 - p^{m_j}) - ∏_j (1 - p^{m_j - c_j})` over the shortcut words.
pub fn shortcut_drop_closed_form(multiplicities: &[usize], counts: &[usize], p_perturb: f64) -> f64 {
    let present = |m: usize| 1.0 - p_perturb.powi(m as i32);
    let before: f64 = multiplicities.iter().map(|&m| present(m)).product();
    let after: f64 = multiplicities
        .iter()
        .zip(counts)
        .map(|(&m, &c)| present(m - c))
        .product();
    before - after
}

/// Number of positions of each word in `positions`.
pub fn word_counts(doc: &Document, positions: &[usize]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for &i in positions {
        *out.entry(doc.tokens()[i].clone()).or_insert(0) += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptimum {
    pub positions: Vec<usize>,
    pub drop: f64,
    /// Whether the drop reaches `epsilon * E[f]`.
    pub feasible: bool,
    pub threshold: f64,
}

fn equal_within(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Larger drop, then smaller size, then smaller positions; drops equal to
/// rounding error count as ties.
fn oracle_better(a: &OracleOptimum, b: &OracleOptimum) -> bool {
    if !equal_within(a.drop, b.drop) {
        return a.drop > b.drop;
    }
    (a.positions.len(), &a.positions) < (b.positions.len(), &b.positions)
}

/// Exhaustive solution of: minimise `|c|` subject to `D_c ≥ ε E[f]`,
/// `|c| ≤ l_max`, with the largest drop among minimal candidates. When no
/// candidate is feasible, the largest-drop candidate flagged infeasible.
pub fn oracle_optimal_candidate(dist: &ExactDistribution, epsilon: f64, l_max: usize) -> OracleOptimum {
    let b = dist.n_positions();
    let mean = dist.mean();
    let threshold = epsilon * mean;
    let mut by_size: Vec<Option<OracleOptimum>> = vec![None; b + 1];
    for c in 1..1usize << b {
        let size = c.count_ones() as usize;
        if size > l_max {
            continue;
        }
        let drop = mean - dist.conditional_on_mask(c).mean;
        let cand = OracleOptimum {
            positions: to_positions(c, b),
            drop,
            feasible: drop >= threshold,
            threshold,
        };
        let slot = &mut by_size[size];
        if slot.as_ref().is_none_or(|s| oracle_better(&cand, s)) {
            *slot = Some(cand);
        }
    }
    if let Some(first) = by_size.iter().flatten().find(|c| c.feasible) {
        return first.clone();
    }
    by_size
        .into_iter()
        .flatten()
        .reduce(|a, b| if oracle_better(&b, &a) { b } else { a })
        .unwrap_or(OracleOptimum {
            positions: Vec::new(),
            drop: 0.0,
            feasible: false,
            threshold,
        })
}

/// Builds the distribution for `model` and solves the exact problem.
pub fn oracle_optimal_for_model<P: Predictor + ?Sized>(
    model: &P,
    xi: &Document,
    epsilon: f64,
    l_max: usize,
    p_perturb: f64,
    target: TargetClass,
    mask_token: &str,
) -> Result<OracleOptimum> {
    let dist = ExactDistribution::of_model(model, xi, p_perturb, target, Removal::Mask(mask_token))?;
    Ok(oracle_optimal_candidate(&dist, epsilon, l_max))
}

/// Every allocation `c` with `Σ c_j = total` and `c_j ≤ m_j`, in
/// lexicographic order.
pub fn allocations(multiplicities: &[usize], total: usize) -> Vec<Vec<usize>> {
    fn rec(m: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest: usize = m[cur.len() + 1..].iter().sum();
        let j = cur.len();
        for c in left.saturating_sub(rest)..=m[j].min(left) {
            cur.push(c);
            rec(m, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(multiplicities, total, &mut Vec::new(), &mut out);
    out
}

/// Drop-maximising allocation of `total` removals over the shortcut words
/// (first maximiser in lexicographic order).
pub fn best_shortcut_allocation(multiplicities: &[usize], total: usize, p_perturb: f64) -> Option<Vec<usize>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for c in allocations(multiplicities, total) {
        let d = shortcut_drop_closed_form(multiplicities, &c, p_perturb);
        if best.as_ref().is_none_or(|(bd, _)| d > *bd && !equal_within(d, *bd)) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{ConstantModel, LinearTfIdfModel, Prediction, ShortcutModel};
    use crate::text::{tokenize, TfIdfVectorizer};
    use approx::assert_abs_diff_eq;

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        assert_eq!(neumaier_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for &p in &[0.5, 0.1, 0.93] {
            let d = ExactDistribution::from_fn(9, p, |_| 0.0).unwrap();
            assert!((d.total_probability() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_documents_refused() {
        let doc = Document::from_tokens((0..21).map(|i| i.to_string()));
        let r = ExactDistribution::of_model(
            &ShortcutModel::new(["0"]),
            &doc,
            0.5,
            TargetClass::Index(1),
            Removal::Mask("UNK"),
        );
        assert!(matches!(r, Err(Error::TooLarge { b: 21, max: 20 })));
    }

    #[test]
    fn constant_model_has_zero_drops() {
        let model = ConstantModel(Prediction::Probabilities(vec![0.4, 0.6]));
        let xi = tokenize("a b c");
        for c in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            let d = exact_candidate_drop(&model, &xi, &c, 0.5, TargetClass::default(), "UNK").unwrap();
            assert!(d.abs() < 1e-15);
        }
    }

    #[test]
    fn shortcut_both_positions() {
        let model = ShortcutModel::new(["a"]);
        let d = exact_candidate_drop(&model, &tokenize("a a"), &[0, 1], 0.5, TargetClass::Index(1), "UNK").unwrap();
        assert_abs_diff_eq!(d, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(shortcut_drop_closed_form(&[2], &[2], 0.5), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn linear_closed_form_examples() {
        assert_eq!(linear_drop_closed_form(&[2.0, 1.0], &[0, 0], 0.5), 0.0);
        assert_abs_diff_eq!(linear_drop_closed_form(&[2.0, 1.0], &[1, 1], 0.5), 1.5);
    }

    #[test]
    fn linear_singleton_is_keep_probability_times_weight() {
        let vec = TfIdfVectorizer::from_idf([("good", 1.5), ("bad", 2.0)]).unwrap();
        let weights = [("good".to_string(), 0.8), ("bad".to_string(), -0.4)]
            .into_iter()
            .collect();
        let model = LinearTfIdfModel::new(vec, &weights, 0.1).unwrap();
        let xi = tokenize("good bad good");
        for &p in &[0.5, 0.3] {
            let d = exact_candidate_drop(&model, &xi, &[0], p, TargetClass::Index(0), "UNK").unwrap();
            assert_abs_diff_eq!(d, (1.0 - p) * 0.8 * 1.5, epsilon = 1e-12);
            let d = exact_candidate_drop(&model, &xi, &[1], p, TargetClass::Index(0), "UNK").unwrap();
            assert_abs_diff_eq!(d, (1.0 - p) * -0.4 * 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shortcut_closed_form_matches_enumeration_on_fixed_doc() {
        let model = ShortcutModel::new(["a", "b", "c"]);
        let xi = tokenize("a b b c c c");
        let dist = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(1), Removal::Mask("UNK")).unwrap();
        let m = [1usize, 2, 3];
        for c in 1usize..64 {
            if c.count_ones() > 3 {
                continue;
            }
            let pos = to_positions(c, 6);
            let counts = word_counts(&xi, &pos);
            let cj: Vec<usize> = ["a", "b", "c"]
                .iter()
                .map(|w| counts.get(*w).copied().unwrap_or(0))
                .collect();
            let closed = shortcut_drop_closed_form(&m, &cj, 0.5);
            assert!((dist.candidate_drop(&pos) - closed).abs() < 1e-12, "{pos:?}");
        }
        // removing every "a" leaves f = 0, so the drop is maximal
        assert_abs_diff_eq!(
            shortcut_drop_closed_form(&m, &[1, 0, 0], 0.5),
            m.iter().map(|&m| 1.0 - 0.5f64.powi(m as i32)).product::<f64>(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn deletion_and_masking_agree_for_tfidf_models() {
        let vec = TfIdfVectorizer::from_idf([("x", 1.2), ("y", 1.7)]).unwrap();
        let weights = [("x".to_string(), 1.0), ("y".to_string(), -0.5)].into_iter().collect();
        let model = LinearTfIdfModel::new(vec, &weights, 0.0).unwrap();
        let xi = tokenize("x y x z");
        let a = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(0), Removal::Mask("UNK")).unwrap();
        let b = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(0), Removal::Delete).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn infeasible_threshold_is_flagged() {
        let model = ShortcutModel::new(["a"]);
        let xi = tokenize("a a a b");
        let dist = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(1), Removal::Mask("UNK")).unwrap();
        let opt = oracle_optimal_candidate(&dist, 0.9, 2);
        assert!(!opt.feasible);
        assert_eq!(word_counts(&xi, &opt.positions).get("a"), Some(&2));
        let opt = oracle_optimal_candidate(&dist, 0.9, 3);
        assert!(opt.feasible);
        assert_eq!(opt.positions, vec![0, 1, 2]);
    }

    #[test]
    fn allocations_enumerate_bounded_compositions() {
        assert_eq!(allocations(&[1, 2], 2), vec![vec![0, 2], vec![1, 1]]);
        assert_eq!(allocations(&[3, 4, 5], 4).len(), 14);
        assert!(allocations(&[1], 2).is_empty());
    }

    #[test]
    fn removals_concentrate_on_the_rarest_word() {
        for m1 in 2..5 {
            let m = [m1, m1 + 1, m1 + 3];
            for l in 1..m1 {
                let best = best_shortcut_allocation(&m, l, 0.5).unwrap();
                assert_eq!(best, vec![l, 0, 0]);
            }
        }
    }
}
