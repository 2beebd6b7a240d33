//! The black-box interface: documents in, confidence scores out.

mod builtin;
mod remote;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Document;

pub use builtin::{ConstantModel, LinearTfIdfModel, Link, ModelFile, ShortcutModel};
pub use remote::{RemoteConfig, RemoteModel, AUTH_HEADER_ENV};

/// Output of a model on one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    /// Per-class confidences in `[0, 1]`.
    Probabilities(Vec<f64>),
    /// A single real output (regression, or a raw linear score).
    Value(f64),
}

impl Prediction {
    /// The scalar `f(x)` for the explained class. Regression outputs only
    /// accept class 0.
    pub fn target_score(&self, target: usize) -> Result<f64> {
        match self {
            Prediction::Probabilities(p) => p
                .get(target)
                .copied()
                .ok_or_else(|| Error::config(format!("target class {target} out of range for {} classes", p.len()))),
            Prediction::Value(v) if target == 0 => Ok(*v),
            Prediction::Value(_) => Err(Error::config(format!(
                "target class {target} requested for a regression output"
            ))),
        }
    }

    /// Predicted class (lowest index among ties); `None` for regression.
    pub fn argmax(&self) -> Option<usize> {
        match self {
            Prediction::Probabilities(p) => {
                let mut best: Option<(usize, f64)> = None;
                for (i, &v) in p.iter().enumerate() {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((i, v));
                    }
                }
                best.map(|(i, _)| i)
            }
            Prediction::Value(_) => None,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Prediction::Probabilities(_))
    }
}

/// A model that scores batches of documents.
pub trait Predictor: Send + Sync {
    /// One prediction per input document, in input order.
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>>;

    /// Human-readable class names, when the model knows them.
    fn class_names(&self) -> Option<Vec<String>> {
        None
    }

    fn predict_one(&self, doc: &Document) -> Result<Prediction> {
        let mut out = self.predict_batch(std::slice::from_ref(doc))?;
        out.pop().ok_or_else(|| Error::invalid("model returned no prediction"))
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        (**self).predict_batch(docs)
    }

    fn class_names(&self) -> Option<Vec<String>> {
        (**self).class_names()
    }
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        (**self).predict_batch(docs)
    }

    fn class_names(&self) -> Option<Vec<String>> {
        (**self).class_names()
    }
}

/// Predicts every distinct token sequence of `docs` once, in a single batch
/// call, and scatters the results back to input order.
pub fn predict_deduplicated<P: Predictor + ?Sized>(model: &P, docs: &[Document]) -> Result<Vec<Prediction>> {
    let mut slot_of: HashMap<&Document, usize> = HashMap::with_capacity(docs.len());
    let mut unique: Vec<Document> = Vec::new();
    let mut slots = Vec::with_capacity(docs.len());
    for doc in docs {
        let slot = *slot_of.entry(doc).or_insert_with(|| {
            unique.push(doc.clone());
            unique.len() - 1
        });
        slots.push(slot);
    }
    let preds = model.predict_batch(&unique)?;
    if preds.len() != unique.len() {
        return Err(Error::invalid(format!(
            "model returned {} predictions for {} documents",
            preds.len(),
            unique.len()
        )));
    }
    Ok(slots.into_iter().map(|s| preds[s].clone()).collect())
}

/// Which class's confidence is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetClass {
    /// The class predicted on the unperturbed example.
    #[default]
    ArgmaxAtExample,
    Index(usize),
}

impl TargetClass {
    pub fn resolve(self, at_example: &Prediction) -> usize {
        match self {
            TargetClass::Index(i) => i,
            TargetClass::ArgmaxAtExample => at_example.argmax().unwrap_or(0),
        }
    }
}

/// Where predictions come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorKind {
    /// A built-in model file (`linear` or `shortcut`), with an optional
    /// vectorizer file supplying idf values for linear models.
    Builtin {
        model: PathBuf,
        vectorizer: Option<PathBuf>,
    },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub target: TargetClass,
}

impl PredictorSpec {
    pub fn builtin(model: impl Into<PathBuf>) -> Self {
        PredictorSpec {
            kind: PredictorKind::Builtin {
                model: model.into(),
                vectorizer: None,
            },
            target: TargetClass::ArgmaxAtExample,
        }
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        PredictorSpec {
            kind: PredictorKind::Remote(RemoteConfig::new(endpoint)),
            target: TargetClass::ArgmaxAtExample,
        }
    }

    pub fn resolve(&self) -> Result<Box<dyn Predictor>> {
        match &self.kind {
            PredictorKind::Builtin { model, vectorizer } => load_builtin(model, vectorizer.as_deref()),
            PredictorKind::Remote(cfg) => Ok(Box::new(RemoteModel::new(cfg.clone())?)),
        }
    }
}

/// Loads a built-in model file.
pub fn load_builtin(model: &Path, vectorizer: Option<&Path>) -> Result<Box<dyn Predictor>> {
    if !model.exists() {
        return Err(Error::config(format!("model file {} does not exist", model.display())));
    }
    let content = std::fs::read_to_string(model).map_err(|e| Error::io(model, e))?;
    let file: ModelFile =
        serde_json::from_str(&content).map_err(|e| Error::config(format!("model file {}: {e}", model.display())))?;
    let vectorizer = vectorizer.map(crate::text::TfIdfVectorizer::load).transpose()?;
    file.into_predictor(vectorizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn target_score_projects() {
        let p = Prediction::Probabilities(vec![0.2, 0.8]);
        assert_eq!(p.target_score(1).unwrap(), 0.8);
        assert!(matches!(p.target_score(2), Err(Error::Config(_))));
        assert_eq!(Prediction::Value(3.7).target_score(0).unwrap(), 3.7);
        assert!(Prediction::Value(3.7).target_score(1).is_err());
    }

    #[test]
    fn argmax_takes_lowest_index_on_ties() {
        assert_eq!(Prediction::Probabilities(vec![0.5, 0.5]).argmax(), Some(0));
        assert_eq!(Prediction::Probabilities(vec![0.1, 0.9]).argmax(), Some(1));
        assert_eq!(Prediction::Value(1.0).argmax(), None);
    }

    struct Counting {
        calls: AtomicUsize,
        docs: AtomicUsize,
    }

    impl Predictor for Counting {
        fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.docs.fetch_add(docs.len(), Ordering::SeqCst);
            Ok(docs.iter().map(|d| Prediction::Value(d.len() as f64)).collect())
        }
    }

    #[test]
    fn deduplicated_prediction_calls_once_per_unique_doc() {
        let model = Counting {
            calls: AtomicUsize::new(0),
            docs: AtomicUsize::new(0),
        };
        let docs = vec![tokenize("a b"), tokenize("a"), tokenize("a b"), tokenize("c d e")];
        let preds = predict_deduplicated(&model, &docs).unwrap();
        assert_eq!(
            preds,
            vec![
                Prediction::Value(2.0),
                Prediction::Value(1.0),
                Prediction::Value(2.0),
                Prediction::Value(3.0)
            ]
        );
        assert_eq!(model.calls.load(Ordering::SeqCst), 1);
        assert_eq!(model.docs.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn missing_model_file_is_config_error() {
        let spec = PredictorSpec::builtin("/nonexistent/model.json");
        assert!(matches!(spec.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn target_class_resolution() {
        let p = Prediction::Probabilities(vec![0.3, 0.7]);
        assert_eq!(TargetClass::ArgmaxAtExample.resolve(&p), 1);
        assert_eq!(TargetClass::Index(0).resolve(&p), 0);
        assert_eq!(TargetClass::ArgmaxAtExample.resolve(&Prediction::Value(-2.0)), 0);
    }
}
