//! Random model/document instances with known structure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::predictor::{LinearTfIdfModel, ShortcutModel};
use crate::text::{smooth_idf, Corpus, Document, TfIdfVectorizer};

/// Token used for zero-weight filler positions.
pub const FILLER: &str = "the";

fn word(j: usize) -> String {
    format!("w{j}")
}

fn shuffled_document<R: Rng + ?Sized>(rng: &mut R, counts: &[(String, usize)]) -> Document {
    let mut tokens: Vec<String> = counts
        .iter()
        .flat_map(|(w, m)| std::iter::repeat_n(w.clone(), *m))
        .collect();
    tokens.shuffle(rng);
    Document::from_tokens(tokens)
}

/// A linear TF-IDF model fitted on a small synthetic corpus, with a
/// document to explain.
#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub corpus: Corpus,
    pub model: LinearTfIdfModel,
    pub document: Document,
    pub coefficients: BTreeMap<String, f64>,
    /// `λ_j * idf_j` with idf recomputed from document frequencies by the
    /// smoothed formula, independently of the model's vectorizer.
    pub reference_weights: BTreeMap<String, f64>,
    pub epsilon: f64,
}

/// Corpus of `n_docs` documents in which `w{j}` occurs in exactly
/// `doc_freq[j]` documents and the filler in all of them.
fn synthetic_corpus(doc_freq: &[usize], n_docs: usize) -> Corpus {
    Corpus::new(
        (0..n_docs)
            .map(|k| {
                let mut tokens = vec![FILLER.to_string()];
                tokens.extend((0..doc_freq.len()).filter(|&j| k < doc_freq[j]).map(word));
                Document::from_tokens(tokens)
            })
            .collect(),
    )
}

/// Greedy-order instance: positive words with well separated `λ·idf`
/// values, sometimes one negative word, some filler, and an `epsilon`
/// halfway between two consecutive greedy prefix drops.
pub fn linear_instance<R: Rng + ?Sized>(
    rng: &mut R,
    idf_rule: fn(usize, usize) -> f64,
    max_len: usize,
) -> Result<LinearInstance> {
    const N_DOCS: usize = 8;
    let d = rng.gen_range(2..=4);
    let negative = rng.gen_bool(0.5);
    let n_words = d + usize::from(negative);
    let doc_freq: Vec<usize> = (0..n_words).map(|_| rng.gen_range(1..=N_DOCS)).collect();
    let corpus = synthetic_corpus(&doc_freq, N_DOCS);

    let mut target = rng.gen_range(1.0..2.0);
    let mut targets = Vec::with_capacity(n_words);
    for _ in 0..d {
        targets.push(target);
        target /= rng.gen_range(1.4..2.0);
    }
    let mut mults: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=3)).collect();
    if negative {
        targets.push(-rng.gen_range(0.05..0.2));
        mults.push(1);
    }
    while mults.iter().sum::<usize>() > max_len.saturating_sub(1) {
        let j = (0..mults.len()).max_by_key(|&j| mults[j]).unwrap_or(0);
        mults[j] -= 1;
    }
    let filler = rng.gen_range(0..=(max_len - mults.iter().sum::<usize>()).min(2));

    let mut coefficients = BTreeMap::new();
    let mut reference_weights = BTreeMap::new();
    for j in 0..n_words {
        let idf = smooth_idf(N_DOCS, doc_freq[j]);
        coefficients.insert(word(j), targets[j] / idf);
        reference_weights.insert(word(j), targets[j]);
    }
    let vectorizer = TfIdfVectorizer::fit_with(&corpus, idf_rule)?;
    let model = LinearTfIdfModel::new(vectorizer, &coefficients, 0.0)?;

    let mut counts: Vec<(String, usize)> = (0..n_words)
        .filter(|&j| mults[j] > 0)
        .map(|j| (word(j), mults[j]))
        .collect();
    if filler > 0 {
        counts.push((FILLER.to_string(), filler));
    }
    let document = shuffled_document(rng, &counts);

    // occurrence weights in greedy order, and the expected total
    let mut occurrences: Vec<f64> = (0..d).flat_map(|j| std::iter::repeat_n(targets[j], mults[j])).collect();
    occurrences.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = (0..n_words).map(|j| targets[j] * mults[j] as f64).sum();
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(occurrences.iter().scan(0.0, |s, w| {
            *s += w;
            Some(*s)
        }))
        .collect();
    let sizes: Vec<usize> = (1..prefix.len())
        .filter(|&l| (prefix[l - 1] + prefix[l]) / 2.0 < 0.95 * total)
        .collect();
    let l = *sizes.choose(rng).unwrap_or(&1);
    let epsilon = ((prefix[l - 1] + prefix[l]) / (2.0 * total)).min(0.95);

    Ok(LinearInstance {
        corpus,
        model,
        document,
        coefficients,
        reference_weights,
        epsilon,
    })
}

/// Any linear model on a short random document, coefficients of order
/// `scale`, identity link.
pub fn random_linear<R: Rng + ?Sized>(rng: &mut R, max_len: usize, scale: f64) -> Result<(LinearTfIdfModel, Document)> {
    let n_words = rng.gen_range(1..=5);
    let doc_freq: Vec<usize> = (0..n_words).map(|_| rng.gen_range(1..=6)).collect();
    let corpus = synthetic_corpus(&doc_freq, 6);
    let coefficients: BTreeMap<String, f64> = (0..n_words).map(|j| (word(j), rng.gen_range(-scale..scale))).collect();
    let intercept = rng.gen_range(-scale..scale);
    let model = LinearTfIdfModel::new(TfIdfVectorizer::fit(&corpus)?, &coefficients, intercept)?;
    let b = rng.gen_range(1..=max_len);
    let tokens: Vec<String> = (0..b)
        .map(|_| {
            if rng.gen_bool(0.15) {
                "zz".to_string()
            } else {
                word(rng.gen_range(0..n_words))
            }
        })
        .collect();
    Ok((model, Document::from_tokens(tokens)))
}

/// A shortcut model over some of the words of a short random document.
/// Returns the model, the document and the multiplicities of the shortcut
/// words.
pub fn random_shortcut<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> (ShortcutModel, Document, Vec<usize>) {
    let b = rng.gen_range(1..=max_len);
    let n_words = rng.gen_range(1..=4);
    let tokens: Vec<String> = (0..b).map(|_| word(rng.gen_range(0..n_words))).collect();
    let doc = Document::from_tokens(tokens);
    let mut present: Vec<String> = doc.local_dict().into_iter().map(String::from).collect();
    present.shuffle(rng);
    let k = rng.gen_range(1..=present.len());
    let j: Vec<String> = present[..k].to_vec();
    let mults = j.iter().map(|w| doc.multiplicity(w)).collect();
    (ShortcutModel::new(j), doc, mults)
}

/// Shortcut model with strictly increasing multiplicities `m_1 < … < m_k`.
#[derive(Debug, Clone)]
pub struct ShortcutInstance {
    pub model: ShortcutModel,
    pub document: Document,
    /// Shortcut words, rarest first.
    pub words: Vec<String>,
    pub multiplicities: Vec<usize>,
    pub epsilon: f64,
    pub l_max: usize,
}

pub fn shortcut_instance<R: Rng + ?Sized>(rng: &mut R, max_len: usize) -> ShortcutInstance {
    let k = rng.gen_range(1..=3);
    let mut mults = vec![rng.gen_range(1..=3)];
    for _ in 1..k {
        let next = mults[mults.len() - 1] + rng.gen_range(1..=2);
        if mults.iter().sum::<usize>() + next > max_len {
            break;
        }
        mults.push(next);
    }
    let words: Vec<String> = (0..mults.len()).map(word).collect();
    let used: usize = mults.iter().sum();
    let filler = rng.gen_range(0..=(max_len - used).min(3));
    let mut counts: Vec<(String, usize)> = words.iter().cloned().zip(mults.iter().copied()).collect();
    if filler > 0 {
        counts.push((FILLER.to_string(), filler));
    }
    let mut order = words.clone();
    order.shuffle(rng);
    ShortcutInstance {
        model: ShortcutModel::new(order),
        document: shuffled_document(rng, &counts),
        words,
        multiplicities: mults,
        epsilon: rng.gen_range(0.6..0.9),
        l_max: rng.gen_range(1..=4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_instances_have_the_intended_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let inst = linear_instance(&mut rng, smooth_idf, 12).unwrap();
            assert!(inst.document.len() <= 12);
            assert!(inst.epsilon > 0.0 && inst.epsilon < 1.0);
            for (w, &r) in &inst.reference_weights {
                assert!((inst.model.weight(w) - r).abs() < 1e-12);
            }
            assert_eq!(inst.model.weight(FILLER), 0.0);
        }
    }

    #[test]
    fn shortcut_instances_are_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..40 {
            let inst = shortcut_instance(&mut rng, 12);
            assert!(inst.document.len() <= 12);
            assert!(inst.multiplicities.windows(2).all(|w| w[0] < w[1]));
            for (w, &m) in inst.words.iter().zip(&inst.multiplicities) {
                assert_eq!(inst.document.multiplicity(w), m);
            }
        }
    }
}
