//! Tokenization, documents, corpora and TF-IDF vectorization.
//!
//! Tokens are lowercased, NFC-normalized, whitespace-separated words with
//! punctuation trimmed from both edges. Two tokens are the same word iff
//! their normalized strings are equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Default mask token used by mask-sampling and by the faithfulness metrics.
pub const DEFAULT_MASK_TOKEN: &str = "UNK";

fn is_edge_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}')
        || matches!(
            c,
            '¡' | '¿' | '«' | '»' | '·' | '§' | '¶' | '、' | '。' | '「' | '」' | '『' | '』'
        )
}

/// Normalizes a single word the way [`tokenize`] does: NFC, lowercase,
/// edge punctuation stripped. Returns an empty string for pure punctuation.
pub fn normalize_token(raw: &str) -> String {
    let nfc: String = raw.nfc().collect();
    let lowered: String = nfc.to_lowercase().nfc().collect();
    lowered.trim_matches(is_edge_punctuation).to_string()
}

/// An ordered token sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Document {
    tokens: Vec<String>,
}

impl Document {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Document {
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    /// Number of tokens, `b`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The distinct tokens of the document, sorted.
    pub fn local_dict(&self) -> BTreeSet<&str> {
        self.tokens.iter().map(String::as_str).collect()
    }

    /// Number of distinct tokens, `d`.
    pub fn distinct(&self) -> usize {
        self.local_dict().len()
    }

    /// Occurrence count of every distinct token.
    pub fn multiplicities(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        counts
    }

    pub fn multiplicity(&self, token: &str) -> usize {
        self.tokens.iter().filter(|t| t.as_str() == token).count()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    /// Positions (0-based) at which `token` occurs.
    pub fn positions_of(&self, token: &str) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() == token)
            .map(|(i, _)| i)
            .collect()
    }

    /// Single-space join of the tokens.
    pub fn detokenize(&self) -> String {
        self.tokens.join(" ")
    }

    /// Copy of the document with every position in `positions` replaced by `mask`.
    pub fn masked<'a, I>(&self, positions: I, mask: &str) -> Document
    where
        I: IntoIterator<Item = &'a usize>,
    {
        let mut tokens = self.tokens.clone();
        for &i in positions {
            if let Some(t) = tokens.get_mut(i) {
                *t = mask.to_string();
            }
        }
        Document { tokens }
    }

    /// Copy of the document with the given positions deleted.
    pub fn without(&self, positions: &BTreeSet<usize>) -> Document {
        Document {
            tokens: self
                .tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| !positions.contains(i))
                .map(|(_, t)| t.clone())
                .collect(),
        }
    }
}

/// Splits on whitespace, normalizes every word and drops the empty ones.
pub fn tokenize(text: &str) -> Document {
    Document {
        tokens: text
            .split_whitespace()
            .map(normalize_token)
            .filter(|t| !t.is_empty())
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusLine {
    text: String,
    #[serde(default)]
    label: Option<serde_json::Value>,
}

/// A collection of tokenized documents with optional labels.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    labels: Vec<Option<String>>,
    doc_frequency: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        let labels = vec![None; documents.len()];
        Self::with_labels(documents, labels)
    }

    pub fn with_labels(documents: Vec<Document>, labels: Vec<Option<String>>) -> Self {
        assert_eq!(documents.len(), labels.len());
        let mut doc_frequency = BTreeMap::new();
        for doc in &documents {
            for t in doc.local_dict() {
                *doc_frequency.entry(t.to_string()).or_insert(0) += 1;
            }
        }
        Corpus {
            documents,
            labels,
            doc_frequency,
        }
    }

    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(texts.into_iter().map(|t| tokenize(t.as_ref())).collect())
    }

    /// Parses a corpus file: JSON lines with a `text` field (and optional
    /// `label`) when the first non-blank line is a JSON object, one plain
    /// text document per non-blank line otherwise.
    pub fn parse(content: &str) -> Result<Self> {
        let lines: Vec<&str> = content.lines().filter(|l| !l.trim().is_empty()).collect();
        let is_jsonl = lines.first().map(|l| l.trim_start().starts_with('{')).unwrap_or(false);
        let mut documents = Vec::with_capacity(lines.len());
        let mut labels = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if is_jsonl {
                let parsed: CorpusLine =
                    serde_json::from_str(line).map_err(|e| Error::config(format!("corpus line {}: {e}", i + 1)))?;
                documents.push(tokenize(&parsed.text));
                labels.push(parsed.label.map(|v| match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                }));
            } else {
                documents.push(tokenize(line));
                labels.push(None);
            }
        }
        Ok(Self::with_labels(documents, labels))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    /// Number of documents, `N`.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Number of documents containing `token`, `N_j` (0 when absent).
    pub fn doc_frequency(&self, token: &str) -> usize {
        self.doc_frequency.get(token).copied().unwrap_or(0)
    }

    /// Distinct tokens of the whole corpus, sorted.
    pub fn dictionary(&self) -> impl Iterator<Item = &str> {
        self.doc_frequency.keys().map(String::as_str)
    }
}

/// Smoothed inverse document frequency, `ln((N + 1) / (N_j + 1)) + 1`.
pub fn smooth_idf(n_docs: usize, doc_freq: usize) -> f64 {
    ((n_docs as f64 + 1.0) / (doc_freq as f64 + 1.0)).ln() + 1.0
}

/// Sparse vector with entries sorted by index. Zero entries are not stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector(Vec<(usize, f64)>);

impl SparseVector {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0
            .binary_search_by_key(&index, |&(j, _)| j)
            .map(|k| self.0[k].1)
            .unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.0.iter().map(|&(j, v)| v * dense[j]).sum()
    }
}

/// A fitted TF-IDF vectorizer: `phi(doc)_j = m_j(doc) * idf_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfVectorizer {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfVectorizer {
    pub fn fit(corpus: &Corpus) -> Result<Self> {
        Self::fit_with(corpus, smooth_idf)
    }

    /// Fits with an arbitrary `(N, N_j) -> idf` rule. Used to check that the
    /// verification suite catches a wrong idf formula.
    pub fn fit_with(corpus: &Corpus, idf_rule: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::config("cannot fit a vectorizer on an empty corpus"));
        }
        let n = corpus.len();
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::new();
        for (j, token) in corpus.dictionary().enumerate() {
            vocabulary.insert(token.to_string(), j);
            idf.push(idf_rule(n, corpus.doc_frequency(token)));
        }
        Ok(TfIdfVectorizer { vocabulary, idf })
    }

    /// Builds a vectorizer from explicit per-token idf values.
    pub fn from_idf<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let sorted: BTreeMap<String, f64> = entries.into_iter().map(|(t, v)| (t.into(), v)).collect();
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(sorted.len());
        for (j, (token, value)) in sorted.into_iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::config(format!("non-finite idf for {token:?}")));
            }
            vocabulary.insert(token, j);
            idf.push(value);
        }
        Ok(TfIdfVectorizer { vocabulary, idf })
    }

    pub fn from_json(content: &str) -> Result<Self> {
        let v: TfIdfVectorizer = serde_json::from_str(content)?;
        v.validate()?;
        Ok(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&content)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.idf.len()];
        for (token, &j) in &self.vocabulary {
            match seen.get_mut(j) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::config(format!(
                        "vocabulary index {j} for {token:?} is out of range or duplicated"
                    )))
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::config("idf vector longer than vocabulary"));
        }
        Ok(())
    }

    /// Fails when the mask token is part of the fitted vocabulary, since
    /// masking would then no longer be equivalent to deletion.
    pub fn ensure_mask_absent(&self, mask_token: &str) -> Result<()> {
        if self.vocabulary.contains_key(mask_token) {
            return Err(Error::config(format!(
                "mask token {mask_token:?} is part of the fitted vocabulary"
            )));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    /// Vocabulary size `D`.
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|j| self.idf[j])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    pub fn vectorize(&self, doc: &Document) -> SparseVector {
        self.vectorize_tokens(doc.tokens())
    }

    pub fn vectorize_tokens(&self, tokens: &[String]) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in tokens {
            if let Some(&j) = self.vocabulary.get(t) {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
        SparseVector(counts.into_iter().map(|(j, m)| (j, m as f64 * self.idf[j])).collect())
    }
}
