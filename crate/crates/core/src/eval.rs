//! Faithfulness and stability metrics over a set of explained documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::{Explainer, ExplainerConfig};
use crate::predictor::{predict_deduplicated, Predictor, TargetClass};
use crate::sampling::{PosLexicon, Scheme};
use crate::text::{Corpus, Document};

/// `f(ξ) - f(ξ with e masked)`.
pub fn comprehensiveness<P: Predictor + ?Sized>(
    model: &P,
    xi: &Document,
    e: &[usize],
    target: usize,
    mask_token: &str,
) -> Result<f64> {
    let preds = model.predict_batch(&[xi.clone(), xi.masked(e, mask_token)])?;
    Ok(preds[0].target_score(target)? - preds[1].target_score(target)?)
}

/// `f(ξ) - f(only e kept)`, every other position masked.
pub fn sufficiency<P: Predictor + ?Sized>(
    model: &P,
    xi: &Document,
    e: &[usize],
    target: usize,
    mask_token: &str,
) -> Result<f64> {
    let keep: BTreeSet<usize> = e.iter().copied().collect();
    let rest: Vec<usize> = (0..xi.len()).filter(|i| !keep.contains(i)).collect();
    let preds = model.predict_batch(&[xi.clone(), xi.masked(&rest, mask_token)])?;
    Ok(preds[0].target_score(target)? - preds[1].target_score(target)?)
}

/// Positions with a positive score, highest first, ties by position.
pub fn positive_ranking(scores: &[Option<f64>]) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.filter(|&s| s > 0.0).map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(i, _)| i).collect()
}

/// `(1/D) Σ_{k=2}^{D} (f(y^(k-1)) + f(y^(k))) / 2` where `y^(k)` masks the
/// `k` highest positive-score positions and `D = min(20, |e+|)`. `None`
/// when fewer than two scores are positive.
pub fn auc_morf<P: Predictor + ?Sized>(
    model: &P,
    xi: &Document,
    scores: &[Option<f64>],
    target: usize,
    mask_token: &str,
) -> Result<Option<f64>> {
    let ranking = positive_ranking(scores);
    let d = ranking.len().min(20);
    if d < 2 {
        return Ok(None);
    }
    let curve: Vec<Document> = (1..=d).map(|k| xi.masked(&ranking[..k], mask_token)).collect();
    let f = predict_deduplicated(model, &curve)?
        .iter()
        .map(|p| p.target_score(target))
        .collect::<Result<Vec<f64>>>()?;
    let area: f64 = (1..d).map(|k| (f[k - 1] + f[k]) / 2.0).sum();
    Ok(Some(area / d as f64))
}

/// `|a ∩ b| / |a ∪ b|`, 1 when both are empty.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Mean Jaccard similarity between `reference` and each rerun.
pub fn robustness(reference: &[usize], reruns: &[Vec<usize>]) -> Option<f64> {
    if reruns.is_empty() {
        return None;
    }
    Some(reruns.iter().map(|r| jaccard(reference, r)).sum::<f64>() / reruns.len() as f64)
}

/// `|e| / b`.
pub fn proportion(b: usize, e_len: usize) -> f64 {
    e_len as f64 / b as f64
}

/// The `k` best positions by score (undefined scores last, ties by
/// position), sorted.
pub fn top_k(scores: &[Option<f64>], k: usize) -> Vec<usize> {
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| {
        let sa = scores[a].unwrap_or(f64::NEG_INFINITY);
        let sb = scores[b].unwrap_or(f64::NEG_INFINITY);
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    let mut out: Vec<usize> = ranked.into_iter().take(k).collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sufficiency,
    Comprehensiveness,
    Robustness,
    Aucmorf,
    Time,
    Proportion,
}

impl Metric {
    /// Table column order.
    pub const ALL: [Metric; 6] = [
        Metric::Sufficiency,
        Metric::Comprehensiveness,
        Metric::Robustness,
        Metric::Aucmorf,
        Metric::Time,
        Metric::Proportion,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Metric::Sufficiency => "suffic. ↓",
            Metric::Comprehensiveness => "compreh. ↑",
            Metric::Robustness => "robust. ↑",
            Metric::Aucmorf => "aucmorf ↓",
            Metric::Time => "time (s) ↓",
            Metric::Proportion => "proport. ↓",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sufficiency => "sufficiency",
            Metric::Comprehensiveness => "comprehensiveness",
            Metric::Robustness => "robustness",
            Metric::Aucmorf => "aucmorf",
            Metric::Time => "time",
            Metric::Proportion => "proportion",
        }
    }

    /// Parses a comma-separated list; the result follows table order.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut set = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            set.insert(part.parse::<Metric>()?);
        }
        if set.is_empty() {
            return Err(Error::config("no metric selected"));
        }
        Ok(set.into_iter().collect())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sufficiency" | "suffic" => Metric::Sufficiency,
            "comprehensiveness" | "compreh" => Metric::Comprehensiveness,
            "robustness" | "robust" => Metric::Robustness,
            "aucmorf" | "auc-morf" => Metric::Aucmorf,
            "time" => Metric::Time,
            "proportion" | "proport" => Metric::Proportion,
            other => return Err(Error::config(format!("unknown metric {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fred,
    Fredpos,
    /// Random scores; the explanation is the top `|FRED subset|` positions.
    Random,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fred => "fred",
            Method::Fredpos => "fredpos",
            Method::Random => "random",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fred" => Ok(Method::Fred),
            "fredpos" | "fred-pos" => Ok(Method::Fredpos),
            "random" => Ok(Method::Random),
            other => Err(Error::config(format!("unknown method {other:?}"))),
        }
    }
}

/// Seeds of the robustness reruns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedPolicy {
    /// Rerun `i` uses `seed + i`.
    #[default]
    Fresh,
    /// Every rerun uses the original seed.
    Reuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthOrder {
    /// Corpus order.
    #[default]
    None,
    Ascending,
    Descending,
}

/// Which corpus documents are evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentSelector {
    pub count: Option<usize>,
    /// Keep documents the model assigns to this class.
    pub predicted_class: Option<usize>,
    /// Keep documents with this corpus label.
    pub label: Option<String>,
    pub order: LengthOrder,
}

impl DocumentSelector {
    /// Indices into `corpus`, filtered, ordered (stable) and truncated.
    pub fn select<P: Predictor + ?Sized>(&self, model: &P, corpus: &Corpus) -> Result<Vec<usize>> {
        let docs = corpus.documents();
        let mut keep: Vec<usize> = (0..docs.len()).filter(|&i| !docs[i].is_empty()).collect();
        if let Some(label) = &self.label {
            keep.retain(|&i| corpus.labels()[i].as_deref() == Some(label.as_str()));
        }
        if let Some(class) = self.predicted_class {
            let batch: Vec<Document> = keep.iter().map(|&i| docs[i].clone()).collect();
            let preds = predict_deduplicated(model, &batch)?;
            keep = keep
                .into_iter()
                .zip(preds)
                .filter(|(_, p)| p.argmax() == Some(class))
                .map(|(i, _)| i)
                .collect();
        }
        match self.order {
            LengthOrder::None => {}
            LengthOrder::Ascending => keep.sort_by_key(|&i| docs[i].len()),
            LengthOrder::Descending => keep.sort_by_key(|&i| std::cmp::Reverse(docs[i].len())),
        }
        if let Some(n) = self.count {
            keep.truncate(n);
        }
        Ok(keep)
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub explainer: ExplainerConfig,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    /// Number of reruns for robustness.
    pub robustness_runs: usize,
    pub seed_policy: SeedPolicy,
    pub selector: DocumentSelector,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            explainer: ExplainerConfig::default(),
            methods: vec![Method::Fred, Method::Random],
            metrics: Metric::ALL.to_vec(),
            robustness_runs: 10,
            seed_policy: SeedPolicy::Fresh,
            selector: DocumentSelector::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMetrics {
    /// Index into the corpus.
    pub document: usize,
    pub length: usize,
    pub explanation: Vec<usize>,
    pub values: BTreeMap<Metric, Option<f64>>,
}

impl DocumentMetrics {
    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values.get(&m).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Documents on which the metric is defined.
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut n, mut sum, mut sumsq) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            sum += v;
            sumsq += v * v;
        }
        if n == 0 {
            return None;
        }
        let mean = sum / n as f64;
        Some(Aggregate {
            mean,
            std: (sumsq / n as f64 - mean * mean).max(0.0).sqrt(),
            count: n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub documents: Vec<DocumentMetrics>,
    pub aggregates: BTreeMap<Metric, Option<Aggregate>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    pub methods: Vec<MethodReport>,
}

impl MetricReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Aligned text table, one row per method, `mean ± std` per column.
    pub fn table(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("method".to_string())
            .chain(self.metrics.iter().map(|m| m.header().to_string()))
            .collect()];
        for r in &self.methods {
            let mut row = vec![r.method.name().to_string()];
            for m in &self.metrics {
                row.push(match r.aggregates.get(m).copied().flatten() {
                    Some(a) => format!("{:.3} ± {:.3}", a.mean, a.std),
                    None => "n/a".to_string(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}

struct Explained {
    subset: Vec<usize>,
    scores: Vec<Option<f64>>,
    seconds: f64,
}

struct Harness<'a, P: Predictor + ?Sized> {
    model: &'a P,
    cfg: &'a EvalConfig,
    lexicon: Option<&'a PosLexicon>,
}

impl<P: Predictor + ?Sized> Harness<'_, P> {
    fn fred(&self, xi: &Document, scheme: Scheme, seed: u64) -> Result<Explained> {
        let mut cfg = self.cfg.explainer.with_seed(seed);
        cfg.sampling.scheme = scheme;
        let start = Instant::now();
        let mut explainer = Explainer::new(self.model, cfg)?;
        if let Some(lex) = self.lexicon {
            explainer = explainer.with_lexicon(lex);
        }
        let e = explainer.explain(xi)?;
        Ok(Explained {
            subset: e.subset_positions().to_vec(),
            scores: e.scores,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn random(&self, xi: &Document, k: usize, seed: u64) -> Explained {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..xi.len()).collect();
        order.shuffle(&mut rng);
        let mut scores = vec![None; xi.len()];
        for (rank, &i) in order.iter().enumerate() {
            scores[i] = Some(1.0 - rank as f64 / xi.len() as f64 + rng.gen::<f64>() * 1e-9);
        }
        Explained {
            subset: top_k(&scores, k),
            scores,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn run(&self, method: Method, xi: &Document, k: usize, seed: u64) -> Result<Explained> {
        match method {
            Method::Fred => self.fred(xi, Scheme::Mask, seed),
            Method::Fredpos => self.fred(xi, Scheme::Pos, seed),
            Method::Random => Ok(self.random(xi, k, seed)),
        }
    }
}

/// Explains every selected document with every method and computes the
/// requested metrics. Random baselines use `k = |FRED subset|` of the same
/// document.
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    corpus: &Corpus,
    cfg: &EvalConfig,
    lexicon: Option<&PosLexicon>,
) -> Result<MetricReport> {
    if cfg.methods.contains(&Method::Fredpos) && lexicon.is_none() {
        return Err(Error::config("method fredpos requires a POS lexicon (--lexicon)"));
    }
    let harness = Harness { model, cfg, lexicon };
    let mask = cfg.explainer.sampling.mask_token.as_str();
    let seed = cfg.explainer.sampling.seed;
    let selected = cfg.selector.select(model, corpus)?;
    let wants = |m: Metric| cfg.metrics.contains(&m);

    let mut per_method: Vec<Vec<DocumentMetrics>> = vec![Vec::new(); cfg.methods.len()];
    for &doc_index in &selected {
        let xi = &corpus.documents()[doc_index];
        let at_example = model.predict_one(xi)?;
        let target = cfg.explainer.target.resolve(&at_example);
        let mut fred_size: Option<usize> = None;
        for (slot, &method) in cfg.methods.iter().enumerate() {
            let k = match fred_size {
                Some(k) => k,
                None => {
                    let k = harness.fred(xi, Scheme::Mask, seed)?.subset.len();
                    fred_size = Some(k);
                    k
                }
            };
            let main = harness.run(method, xi, k, seed)?;
            if method == Method::Fred {
                fred_size = Some(main.subset.len());
            }
            let mut values = BTreeMap::new();
            for &m in &cfg.metrics {
                let v = match m {
                    Metric::Sufficiency => Some(sufficiency(model, xi, &main.subset, target, mask)?),
                    Metric::Comprehensiveness => Some(comprehensiveness(model, xi, &main.subset, target, mask)?),
                    Metric::Aucmorf => auc_morf(model, xi, &main.scores, target, mask)?,
                    Metric::Time => Some(main.seconds),
                    Metric::Proportion => Some(proportion(xi.len(), main.subset.len())),
                    Metric::Robustness => None,
                };
                values.insert(m, v);
            }
            if wants(Metric::Robustness) {
                let reruns = (1..=cfg.robustness_runs)
                    .map(|i| {
                        let s = match cfg.seed_policy {
                            SeedPolicy::Fresh => seed.wrapping_add(i as u64),
                            SeedPolicy::Reuse => seed,
                        };
                        harness.run(method, xi, k, s).map(|e| e.subset)
                    })
                    .collect::<Result<Vec<_>>>()?;
                values.insert(Metric::Robustness, robustness(&main.subset, &reruns));
            }
            per_method[slot].push(DocumentMetrics {
                document: doc_index,
                length: xi.len(),
                explanation: main.subset,
                values,
            });
        }
    }

    let methods = cfg
        .methods
        .iter()
        .zip(per_method)
        .map(|(&method, documents)| {
            let aggregates = cfg
                .metrics
                .iter()
                .map(|&m| (m, Aggregate::of(documents.iter().filter_map(|d| d.get(m)))))
                .collect();
            MethodReport {
                method,
                documents,
                aggregates,
            }
        })
        .collect();
    Ok(MetricReport {
        metrics: cfg.metrics.clone(),
        methods,
    })
}

/// Explanation target used by the harness for `xi`.
pub fn target_of<P: Predictor + ?Sized>(model: &P, xi: &Document, target: TargetClass) -> Result<usize> {
    Ok(target.resolve(&model.predict_one(xi)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{ConstantModel, Prediction, ShortcutModel};
    use crate::text::tokenize;
    use proptest::prelude::*;

    const UNK: &str = "UNK";

    #[test]
    fn shortcut_metric_examples() {
        let m = ShortcutModel::new(["a"]);
        let xi = tokenize("a b");
        assert_eq!(comprehensiveness(&m, &xi, &[0], 1, UNK).unwrap(), 1.0);
        assert_eq!(comprehensiveness(&m, &xi, &[], 1, UNK).unwrap(), 0.0);
        assert_eq!(sufficiency(&m, &xi, &[0], 1, UNK).unwrap(), 0.0);
        assert_eq!(sufficiency(&m, &xi, &[0, 1], 1, UNK).unwrap(), 0.0);
        assert_eq!(sufficiency(&m, &xi, &[], 1, UNK).unwrap(), 1.0);
    }

    #[test]
    fn constant_model_metrics() {
        let m = ConstantModel(Prediction::Probabilities(vec![0.5, 0.5]));
        let xi = tokenize("a b c");
        assert_eq!(comprehensiveness(&m, &xi, &[0, 2], 0, UNK).unwrap(), 0.0);
        let scores = [Some(0.3), Some(0.2), Some(0.1)];
        assert_eq!(auc_morf(&m, &xi, &scores, 0, UNK).unwrap(), Some(1.0 / 3.0));
    }

    #[test]
    fn auc_morf_examples() {
        let m = ShortcutModel::new(["a"]);
        let xi = tokenize("a b c");
        let scores = [Some(0.9), Some(0.1), Some(-0.2)];
        assert_eq!(auc_morf(&m, &xi, &scores, 1, UNK).unwrap(), Some(0.0));
        let negative = [Some(-0.9), Some(-0.1), None];
        assert_eq!(auc_morf(&m, &xi, &negative, 1, UNK).unwrap(), None);
        assert_eq!(auc_morf(&m, &xi, &[Some(0.5), None, None], 1, UNK).unwrap(), None);
    }

    #[test]
    fn auc_morf_depends_on_ranking() {
        let m = ShortcutModel::new(["c"]);
        let xi = tokenize("a b c d");
        let good = [Some(0.1), Some(0.2), Some(0.9), Some(0.3)];
        let bad = [Some(0.9), Some(0.8), Some(0.1), Some(0.7)];
        let g = auc_morf(&m, &xi, &good, 1, UNK).unwrap().unwrap();
        let b = auc_morf(&m, &xi, &bad, 1, UNK).unwrap().unwrap();
        assert!(g < b, "{g} vs {b}");
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&[1, 2], &[1, 3]), 1.0 / 3.0);
        assert_eq!(jaccard(&[1, 2], &[2, 1]), 1.0);
        assert_eq!(jaccard(&[1], &[2]), 0.0);
        assert_eq!(jaccard(&[], &[]), 1.0);
        assert_eq!(robustness(&[1, 2], &[vec![1, 2], vec![1, 2]]), Some(1.0));
        assert_eq!(robustness(&[1], &[vec![2], vec![3]]), Some(0.0));
        assert_eq!(robustness(&[1], &[]), None);
    }

    #[test]
    fn proportion_examples() {
        assert_eq!(proportion(10, 1), 0.1);
        assert_eq!(proportion(10, 10), 1.0);
        assert!((proportion(6, 2) - 0.333).abs() < 1e-3);
    }

    #[test]
    fn full_removal_identity() {
        let m = ShortcutModel::new(["a", "b"]);
        let xi = tokenize("a b a c");
        let all: Vec<usize> = (0..xi.len()).collect();
        let c = comprehensiveness(&m, &xi, &all, 1, UNK).unwrap();
        let empty = m.predict_one(&xi.masked(&all, UNK)).unwrap().target_score(1).unwrap();
        let f = m.predict_one(&xi).unwrap().target_score(1).unwrap();
        assert_eq!(c + empty, f);
    }

    #[test]
    fn top_k_prefers_defined_scores() {
        assert_eq!(top_k(&[None, Some(0.1), Some(0.5), Some(0.5)], 2), vec![2, 3]);
        assert_eq!(top_k(&[None, Some(-1.0)], 2), vec![0, 1]);
    }

    #[test]
    fn metric_lists_follow_table_order() {
        assert_eq!(
            Metric::parse_list("time, sufficiency").unwrap(),
            vec![Metric::Sufficiency, Metric::Time]
        );
        assert!(Metric::parse_list("speed").is_err());
        assert!(Metric::parse_list("").is_err());
    }

    #[test]
    fn aggregate_is_population_statistics() {
        let a = Aggregate::of([1.0, 3.0]).unwrap();
        assert_eq!((a.mean, a.std, a.count), (2.0, 1.0, 2));
        assert!(Aggregate::of(std::iter::empty()).is_none());
    }

    fn corpus() -> Corpus {
        Corpus::from_texts(["a b c d", "x a y", "b c", "a a b c d e", "q r s"])
    }

    #[test]
    fn reused_seeds_give_perfect_robustness() {
        let model = ShortcutModel::new(["a", "b"]);
        let cfg = EvalConfig {
            methods: vec![Method::Fred, Method::Random],
            robustness_runs: 3,
            seed_policy: SeedPolicy::Reuse,
            ..EvalConfig::default()
        };
        let report = evaluate(&model, &corpus(), &cfg, None).unwrap();
        for m in &report.methods {
            for d in &m.documents {
                assert_eq!(d.get(Metric::Robustness), Some(1.0));
            }
        }
    }

    #[test]
    fn random_baseline_matches_fred_size() {
        let model = ShortcutModel::new(["a"]);
        let report = evaluate(
            &model,
            &corpus(),
            &EvalConfig {
                robustness_runs: 2,
                ..EvalConfig::default()
            },
            None,
        )
        .unwrap();
        let fred = report.method(Method::Fred).unwrap();
        let random = report.method(Method::Random).unwrap();
        for (f, r) in fred.documents.iter().zip(&random.documents) {
            assert_eq!(f.explanation.len(), r.explanation.len());
        }
        let table = report.table();
        let header = table.lines().next().unwrap();
        let cols: Vec<usize> = Metric::ALL.iter().map(|m| header.find(m.header()).unwrap()).collect();
        assert!(cols.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(table.lines().count(), 4);
    }

    #[test]
    fn selector_filters_and_orders() {
        let model = ShortcutModel::new(["a"]);
        let sel = DocumentSelector {
            count: Some(2),
            predicted_class: Some(1),
            label: None,
            order: LengthOrder::Ascending,
        };
        assert_eq!(sel.select(&model, &corpus()).unwrap(), vec![1, 0]);
        let labelled =
            Corpus::parse("{\"text\": \"a\", \"label\": \"pos\"}\n{\"text\": \"b\", \"label\": \"neg\"}\n").unwrap();
        let sel = DocumentSelector {
            label: Some("neg".into()),
            ..DocumentSelector::default()
        };
        assert_eq!(sel.select(&model, &labelled).unwrap(), vec![1]);
    }

    #[test]
    fn fredpos_without_lexicon_is_config_error() {
        let model = ShortcutModel::new(["a"]);
        let cfg = EvalConfig {
            methods: vec![Method::Fredpos],
            ..EvalConfig::default()
        };
        assert!(matches!(evaluate(&model, &corpus(), &cfg, None), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn jaccard_is_a_similarity(a in prop::collection::vec(0usize..8, 0..6), b in prop::collection::vec(0usize..8, 0..6)) {
            let j = jaccard(&a, &b);
            prop_assert!((0.0..=1.0).contains(&j));
            prop_assert_eq!(j, jaccard(&b, &a));
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
    }
}
