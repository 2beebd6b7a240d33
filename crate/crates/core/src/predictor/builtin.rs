//! Interpretable built-in models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Prediction, Predictor};
use crate::error::{Error, Result};
use crate::text::{Document, TfIdfVectorizer};

/// How the linear score is turned into an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Raw score `λᵀφ(doc) + λ0`, reported as a regression value.
    #[default]
    Identity,
    /// Two-class probabilities `[1 - σ(z), σ(z)]`.
    Logistic,
}

/// `f(doc) = λᵀφ(doc) + λ0` over a fitted TF-IDF vectorizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTfIdfModel {
    vectorizer: TfIdfVectorizer,
    coefficients: Vec<f64>,
    intercept: f64,
    link: Link,
    classes: Option<Vec<String>>,
}

impl LinearTfIdfModel {
    /// Coefficients are given per token; vocabulary tokens without a weight
    /// get 0. A weight for a token outside the vocabulary is an error.
    pub fn new(vectorizer: TfIdfVectorizer, weights: &BTreeMap<String, f64>, intercept: f64) -> Result<Self> {
        let mut coefficients = vec![0.0; vectorizer.dim()];
        for (token, &w) in weights {
            let j = vectorizer
                .index_of(token)
                .ok_or_else(|| Error::config(format!("coefficient for {token:?} has no idf entry")))?;
            coefficients[j] = w;
        }
        Ok(LinearTfIdfModel {
            vectorizer,
            coefficients,
            intercept,
            link: Link::Identity,
            classes: None,
        })
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    /// Names of the two classes of a logistic model.
    pub fn with_classes(mut self, classes: Option<Vec<String>>) -> Self {
        self.classes = classes;
        self
    }

    pub fn vectorizer(&self) -> &TfIdfVectorizer {
        &self.vectorizer
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn coefficient(&self, token: &str) -> f64 {
        self.vectorizer
            .index_of(token)
            .map(|j| self.coefficients[j])
            .unwrap_or(0.0)
    }

    /// `λ_j · idf_j`, the per-occurrence contribution of `token` to the score.
    pub fn weight(&self, token: &str) -> f64 {
        self.vectorizer
            .index_of(token)
            .map(|j| self.coefficients[j] * self.vectorizer.idf_values()[j])
            .unwrap_or(0.0)
    }

    /// The linear score before the link.
    pub fn score(&self, doc: &Document) -> f64 {
        self.vectorizer.vectorize(doc).dot(&self.coefficients) + self.intercept
    }

    pub fn predict(&self, doc: &Document) -> Prediction {
        let z = self.score(doc);
        match self.link {
            Link::Identity => Prediction::Value(z),
            Link::Logistic => {
                let p = 1.0 / (1.0 + (-z).exp());
                Prediction::Probabilities(vec![1.0 - p, p])
            }
        }
    }
}

impl Predictor for LinearTfIdfModel {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        Ok(docs.iter().map(|d| self.predict(d)).collect())
    }

    fn class_names(&self) -> Option<Vec<String>> {
        match self.link {
            Link::Logistic => self.classes.clone(),
            Link::Identity => None,
        }
    }
}

/// `f(doc) = 1{every token of J occurs in doc}`, reported as two-class
/// probabilities `[1 - f, f]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortcutModel {
    tokens: Vec<String>,
}

impl ShortcutModel {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ShortcutModel {
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn indicator(&self, doc: &Document) -> bool {
        self.tokens.iter().all(|t| doc.contains(t))
    }
}

impl Predictor for ShortcutModel {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        Ok(docs
            .iter()
            .map(|d| {
                let f = if self.indicator(d) { 1.0 } else { 0.0 };
                Prediction::Probabilities(vec![1.0 - f, f])
            })
            .collect())
    }

    fn class_names(&self) -> Option<Vec<String>> {
        Some(vec!["absent".into(), "present".into()])
    }
}

/// Returns the same prediction for every input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel(pub Prediction);

impl Predictor for ConstantModel {
    fn predict_batch(&self, docs: &[Document]) -> Result<Vec<Prediction>> {
        Ok(vec![self.0.clone(); docs.len()])
    }
}

/// On-disk format of a built-in model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Linear {
        coefficients: BTreeMap<String, f64>,
        intercept: f64,
        /// Per-token idf values; used when no vectorizer file is supplied.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idf: Option<BTreeMap<String, f64>>,
        #[serde(default)]
        link: Link,
        /// Class names of a logistic model, negative class first.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        classes: Option<Vec<String>>,
    },
    Shortcut {
        tokens: Vec<String>,
    },
}

impl ModelFile {
    /// Builds the model. Linear models take idf values from `vectorizer`
    /// when given, else from the file's `idf` map, else idf = 1 for every
    /// coefficient token (a plain term-count model).
    pub fn into_predictor(self, vectorizer: Option<TfIdfVectorizer>) -> Result<Box<dyn Predictor>> {
        match self {
            ModelFile::Shortcut { tokens } => {
                if tokens.is_empty() {
                    return Err(Error::config("shortcut model needs at least one token"));
                }
                let tokens: Vec<String> = tokens.iter().map(|t| crate::text::normalize_token(t)).collect();
                Ok(Box::new(ShortcutModel::new(tokens)))
            }
            ModelFile::Linear {
                coefficients,
                intercept,
                idf,
                link,
                classes,
            } => {
                if classes.as_ref().is_some_and(|c| c.len() != 2) {
                    return Err(Error::config("a linear model has exactly two classes"));
                }
                let vectorizer = match (vectorizer, idf) {
                    (Some(v), _) => v,
                    (None, Some(idf)) => TfIdfVectorizer::from_idf(idf)?,
                    (None, None) => TfIdfVectorizer::from_idf(coefficients.keys().map(|t| (t.clone(), 1.0)))?,
                };
                Ok(Box::new(
                    LinearTfIdfModel::new(vectorizer, &coefficients, intercept)?
                        .with_link(link)
                        .with_classes(classes),
                ))
            }
        }
    }
}
