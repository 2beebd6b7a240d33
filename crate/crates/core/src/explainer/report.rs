//! Stable JSON form of an [`Explanation`](super::Explanation).

use serde::{Deserialize, Serialize};

use super::{Explainer, ExplainerConfig, Explanation};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetJson {
    pub positions: Vec<usize>,
    pub words: Vec<String>,
    pub drop: f64,
    pub threshold_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualJson {
    pub text: String,
    pub n_perturbed: usize,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationJson {
    pub tokens: Vec<String>,
    pub minimal_subset: Option<SubsetJson>,
    pub scores: Vec<Option<f64>>,
    pub counterfactuals: Vec<CounterfactualJson>,
    pub mean_prediction: f64,
    pub target_class: usize,
    pub n_samples: usize,
    pub config: ExplainerConfig,
    /// `null` unless timing was requested, keeping output reproducible.
    pub wall_time_s: Option<f64>,
    pub warnings: Vec<String>,
}

impl ExplanationJson {
    pub fn new(e: &Explanation, with_timing: bool) -> Self {
        ExplanationJson {
            tokens: e.document.tokens().to_vec(),
            minimal_subset: e.minimal_subset.as_ref().map(|c| SubsetJson {
                positions: c.positions.clone(),
                words: e.subset_words().into_iter().map(String::from).collect(),
                drop: c.drop,
                threshold_met: e.threshold_met,
            }),
            scores: e.scores.clone(),
            counterfactuals: e
                .counterfactuals
                .iter()
                .map(|c| CounterfactualJson {
                    text: c.document.detokenize(),
                    n_perturbed: c.n_perturbed(),
                    class: c.class,
                })
                .collect(),
            mean_prediction: e.mean_prediction,
            target_class: e.target_class,
            n_samples: e.n_samples,
            config: e.config.clone(),
            wall_time_s: with_timing.then_some(e.wall_time.as_secs_f64()),
            warnings: e.warnings.clone(),
        }
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(content: &str) -> Result<Self> {
        Ok(serde_json::from_str(content)?)
    }
}

impl Explanation {
    pub fn to_json(&self, with_timing: bool) -> ExplanationJson {
        ExplanationJson::new(self, with_timing)
    }
}

impl<P: crate::predictor::Predictor + ?Sized> Explainer<'_, P> {
    /// Convenience wrapper returning the pretty-printed JSON report.
    pub fn explain_json(&self, xi: &crate::text::Document, with_timing: bool) -> Result<String> {
        self.explain(xi)?.to_json(with_timing).to_string_pretty()
    }
}
