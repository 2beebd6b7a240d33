//! Minimal influential subsets, token scores and counterfactual samples for
//! one prediction of a black-box model.

mod drops;
mod report;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{predict_deduplicated, Prediction, Predictor, TargetClass};
use crate::sampling::{self, PerturbationSample, PosLexicon, SamplingConfig};
use crate::text::Document;

pub use drops::{sample_drops, DropIndex};
pub use report::{CounterfactualJson, ExplanationJson, SubsetJson};
pub use search::{better, candidate_pool, find_minimal_subset, token_scores, Candidate, SubsetSearch};

pub const DEFAULT_EPSILON: f64 = 0.15;
pub const DEFAULT_POOL_SIZE: usize = 20;
pub const DEFAULT_COUNTERFACTUALS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub sampling: SamplingConfig,
    /// Relative drop of the mean prediction the subset must cause.
    pub epsilon: f64,
    /// Positions considered for candidates of size ≥ 2.
    pub pool_size: usize,
    /// Number of counterfactual samples reported.
    pub counterfactuals: usize,
    pub target: TargetClass,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            sampling: SamplingConfig::default(),
            epsilon: DEFAULT_EPSILON,
            pool_size: DEFAULT_POOL_SIZE,
            counterfactuals: DEFAULT_COUNTERFACTUALS,
            target: TargetClass::ArgmaxAtExample,
        }
    }
}

impl ExplainerConfig {
    pub fn validated(mut self) -> Result<Self> {
        self.sampling = self.sampling.validated()?;
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::config(format!(
                "epsilon must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.pool_size == 0 {
            return Err(Error::config("candidate pool size must be at least 1"));
        }
        Ok(self)
    }

    /// Same configuration with a different sampling seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.sampling.seed = seed;
        cfg
    }
}

/// A generated sample classified differently from the example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub document: Document,
    pub perturbed: Vec<usize>,
    pub class: usize,
}

impl Counterfactual {
    pub fn n_perturbed(&self) -> usize {
        self.perturbed.len()
    }
}

/// The `k` distinct samples with the fewest perturbed positions whose
/// predicted class differs from `example_class` (ties by sample order).
pub fn counterfactuals(
    samples: &[PerturbationSample],
    predictions: &[Prediction],
    example_class: usize,
    k: usize,
) -> Vec<Counterfactual> {
    let mut flipped: Vec<(usize, usize, usize)> = samples
        .iter()
        .zip(predictions)
        .enumerate()
        .filter_map(|(i, (s, p))| {
            p.argmax()
                .filter(|&c| c != example_class)
                .map(|c| (s.n_perturbed(), i, c))
        })
        .collect();
    flipped.sort_unstable_by_key(|&(n, i, _)| (n, i));
    let mut out: Vec<Counterfactual> = Vec::with_capacity(k);
    for (_, i, class) in flipped {
        if out.len() == k {
            break;
        }
        let s = &samples[i];
        if out.iter().any(|c| c.document == s.document) {
            continue;
        }
        out.push(Counterfactual {
            document: s.document.clone(),
            perturbed: (0..s.mask.len()).filter(|&j| s.mask[j]).collect(),
            class,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub document: Document,
    /// `None` only when no candidate was ever excluded from a sample.
    pub minimal_subset: Option<Candidate>,
    pub threshold_met: bool,
    /// `epsilon * mean_prediction`.
    pub threshold: f64,
    /// Per-position scores; `None` for positions never perturbed.
    pub scores: Vec<Option<f64>>,
    pub counterfactuals: Vec<Counterfactual>,
    /// Mean explained score over the sample.
    pub mean_prediction: f64,
    /// Explained score on the unperturbed example.
    pub example_score: f64,
    pub target_class: usize,
    /// Predicted class of the example; `None` for regression.
    pub example_class: Option<usize>,
    pub class_names: Option<Vec<String>>,
    pub n_samples: usize,
    pub candidates_evaluated: usize,
    pub config: ExplainerConfig,
    pub warnings: Vec<String>,
    pub wall_time: Duration,
}

impl Explanation {
    pub fn subset_positions(&self) -> &[usize] {
        self.minimal_subset
            .as_ref()
            .map(|c| c.positions.as_slice())
            .unwrap_or(&[])
    }

    pub fn subset_words(&self) -> Vec<&str> {
        self.subset_positions()
            .iter()
            .map(|&i| self.document.tokens()[i].as_str())
            .collect()
    }

    pub fn class_name(&self, class: usize) -> String {
        self.class_names
            .as_ref()
            .and_then(|n| n.get(class).cloned())
            .unwrap_or_else(|| class.to_string())
    }
}

/// Runs the whole pipeline against one model.
pub struct Explainer<'a, P: Predictor + ?Sized> {
    model: &'a P,
    cfg: ExplainerConfig,
    lexicon: Option<&'a PosLexicon>,
}

impl<'a, P: Predictor + ?Sized> Explainer<'a, P> {
    pub fn new(model: &'a P, cfg: ExplainerConfig) -> Result<Self> {
        Ok(Explainer {
            model,
            cfg: cfg.validated()?,
            lexicon: None,
        })
    }

    pub fn with_lexicon(mut self, lexicon: &'a PosLexicon) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn config(&self) -> &ExplainerConfig {
        &self.cfg
    }

    pub fn explain(&self, xi: &Document) -> Result<Explanation> {
        self.explain_with_seed(xi, self.cfg.sampling.seed)
    }

    pub fn explain_with_seed(&self, xi: &Document, seed: u64) -> Result<Explanation> {
        let start = Instant::now();
        if xi.is_empty() {
            return Err(Error::invalid("cannot explain an empty document"));
        }
        let cfg = self.cfg.with_seed(seed);
        let n = cfg.sampling.sample_size();
        let samples = sampling::generate(xi, &cfg.sampling, self.lexicon, n)?;

        let mut batch = Vec::with_capacity(n + 1);
        batch.push(xi.clone());
        batch.extend(samples.iter().map(|s| s.document.clone()));
        let mut predictions = predict_deduplicated(self.model, &batch)?;
        let at_example = predictions.remove(0);

        let target = cfg.target.resolve(&at_example);
        let example_score = at_example.target_score(target)?;
        let values = predictions
            .iter()
            .map(|p| p.target_score(target))
            .collect::<Result<Vec<f64>>>()?;

        let index = DropIndex::new(&samples, &values);
        let scores = token_scores(&index);
        let mut warnings = Vec::new();
        let never: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_none()).collect();
        if !never.is_empty() {
            warnings.push(format!("positions never perturbed, score undefined: {never:?}"));
        }
        let search = find_minimal_subset(&index, &scores, cfg.epsilon, cfg.sampling.l_max, cfg.pool_size);
        if search.skipped > 0 {
            warnings.push(format!("{} candidates skipped: absent from no sample", search.skipped));
        }

        let example_class = at_example.argmax();
        let counterfactuals = match example_class {
            Some(class) => counterfactuals(&samples, &predictions, class, cfg.counterfactuals),
            None => {
                warnings.push("counterfactuals unavailable for regression outputs".into());
                Vec::new()
            }
        };
        for w in &warnings {
            log::debug!("{w}");
        }

        Ok(Explanation {
            document: xi.clone(),
            minimal_subset: search.best,
            threshold_met: search.threshold_met,
            threshold: search.threshold,
            scores,
            counterfactuals,
            mean_prediction: index.mean(),
            example_score,
            target_class: target,
            example_class,
            class_names: self.model.class_names(),
            n_samples: n,
            candidates_evaluated: search.evaluated,
            config: cfg,
            warnings,
            wall_time: start.elapsed(),
        })
    }
}
