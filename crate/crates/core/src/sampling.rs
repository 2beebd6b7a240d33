//! Perturbed copies of the example: mask-sampling and pos-sampling, and the
//! sample size that makes every short candidate absent at least once with
//! high probability.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{normalize_token, Document, DEFAULT_MASK_TOKEN};

pub const MIN_P_PERTURB: f64 = 0.01;
pub const MAX_P_PERTURB: f64 = 0.99;

/// Tag assigned to tokens missing from the lexicon.
pub const OTHER_TAG: &str = "OTHER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Mask,
    Pos,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Mask => "mask",
            Scheme::Pos => "pos",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mask" => Ok(Scheme::Mask),
            "pos" => Ok(Scheme::Pos),
            other => Err(Error::config(format!("unknown sampling scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub scheme: Scheme,
    /// Probability that a position is perturbed.
    pub p_perturb: f64,
    /// Probability that a given candidate is absent from at least one sample.
    pub alpha: f64,
    /// Largest candidate size considered.
    pub l_max: usize,
    /// Explicit sample count, bypassing [`required_sample_size`].
    pub n_override: Option<usize>,
    pub seed: u64,
    pub mask_token: String,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            scheme: Scheme::Mask,
            p_perturb: 0.5,
            alpha: 0.95,
            l_max: 10,
            n_override: None,
            seed: 0,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
        }
    }
}

impl SamplingConfig {
    /// Checks ranges and clamps `p_perturb` into `[0.01, 0.99]`.
    pub fn validated(mut self) -> Result<Self> {
        if !self.p_perturb.is_finite() {
            return Err(Error::config("p must be a finite probability"));
        }
        self.p_perturb = self.p_perturb.clamp(MIN_P_PERTURB, MAX_P_PERTURB);
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.l_max == 0 {
            return Err(Error::config("l_max must be at least 1"));
        }
        if self.n_override == Some(0) {
            return Err(Error::config("sample count must be at least 1"));
        }
        if self.mask_token.is_empty() {
            return Err(Error::config("mask token must not be empty"));
        }
        Ok(self)
    }

    /// `n_override` if set, else [`required_sample_size`].
    pub fn sample_size(&self) -> usize {
        self.n_override
            .unwrap_or_else(|| required_sample_size(self.alpha, self.p_perturb, self.l_max))
    }
}

/// Smallest `n` such that a candidate of size `l_max` is absent from at
/// least one of `n` samples with probability `alpha`:
/// `max(1, ceil(ln(1 - alpha) / ln(1 - p^l_max)))`.
pub fn required_sample_size(alpha: f64, p_perturb: f64, l_max: usize) -> usize {
    let absent = p_perturb.powi(l_max.min(i32::MAX as usize) as i32);
    let ratio = (-alpha).ln_1p() / (-absent).ln_1p();
    if !ratio.is_finite() {
        return if ratio.is_nan() { 1 } else { usize::MAX };
    }
    // Absorb rounding noise so that mathematically integral ratios stay put.
    let n = (ratio * (1.0 - 1e-12)).ceil();
    (n as usize).max(1)
}

/// A perturbed copy of the example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSample {
    pub document: Document,
    /// `mask[i]` is true iff position `i` was selected for perturbation.
    pub mask: Vec<bool>,
}

impl PerturbationSample {
    pub fn n_perturbed(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// True iff every position of `positions` is perturbed.
    pub fn excludes(&self, positions: &[usize]) -> bool {
        positions.iter().all(|&i| self.mask[i])
    }
}

fn check_example(xi: &Document) -> Result<()> {
    if xi.is_empty() {
        return Err(Error::invalid("cannot perturb an empty document"));
    }
    Ok(())
}

/// Replaces each position independently with probability `p_perturb` by the
/// mask token.
pub fn mask_sample(xi: &Document, cfg: &SamplingConfig, n: usize) -> Result<Vec<PerturbationSample>> {
    check_example(xi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.p_perturb.clamp(0.0, 1.0);
    Ok((0..n)
        .map(|_| {
            let mut tokens = xi.tokens().to_vec();
            let mask: Vec<bool> = tokens
                .iter_mut()
                .map(|t| {
                    let hit = rng.gen_bool(p);
                    if hit {
                        *t = cfg.mask_token.clone();
                    }
                    hit
                })
                .collect();
            PerturbationSample {
                document: Document::from_tokens(tokens),
                mask,
            }
        })
        .collect())
}

/// Replaces each position independently with probability `p_perturb` by a
/// word of the same part of speech and opposite sentiment.
pub fn pos_sample(xi: &Document, cfg: &SamplingConfig, lex: &PosLexicon, n: usize) -> Result<Vec<PerturbationSample>> {
    check_example(xi)?;
    let pools: Vec<&[String]> = xi.tokens().iter().map(|t| lex.replacement_pool(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = cfg.p_perturb.clamp(0.0, 1.0);
    Ok((0..n)
        .map(|_| {
            let mut tokens = xi.tokens().to_vec();
            let mask: Vec<bool> = tokens
                .iter_mut()
                .zip(&pools)
                .map(|(t, pool)| {
                    let hit = rng.gen_bool(p);
                    if hit {
                        *t = draw_replacement(&mut rng, pool, t, &cfg.mask_token);
                    }
                    hit
                })
                .collect();
            PerturbationSample {
                document: Document::from_tokens(tokens),
                mask,
            }
        })
        .collect())
}

/// Uniform draw from `pool` (sorted), skipping `original` when the pool has
/// at least two entries. An empty pool yields the mask token.
fn draw_replacement(rng: &mut ChaCha8Rng, pool: &[String], original: &str, mask: &str) -> String {
    match pool.len() {
        0 => mask.to_string(),
        1 => pool[0].clone(),
        len => match pool.binary_search_by(|w| w.as_str().cmp(original)) {
            Ok(skip) => {
                let mut k = rng.gen_range(0..len - 1);
                if k >= skip {
                    k += 1;
                }
                pool[k].clone()
            }
            Err(_) => pool[rng.gen_range(0..len)].clone(),
        },
    }
}

/// Dispatches on `cfg.scheme`.
pub fn generate(
    xi: &Document,
    cfg: &SamplingConfig,
    lexicon: Option<&PosLexicon>,
    n: usize,
) -> Result<Vec<PerturbationSample>> {
    match cfg.scheme {
        Scheme::Mask => mask_sample(xi, cfg, n),
        Scheme::Pos => {
            let lex = lexicon.ok_or_else(|| Error::config("pos sampling requires a lexicon (--lexicon)"))?;
            pos_sample(xi, cfg, lex, n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pos" | "positive" => Ok(Sentiment::Positive),
            "neg" | "negative" => Ok(Sentiment::Negative),
            "neu" | "neutral" => Ok(Sentiment::Neutral),
            other => Err(Error::config(format!("unknown sentiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct TagPools {
    /// Positive and neutral words.
    positive: Vec<String>,
    /// Negative and neutral words.
    negative: Vec<String>,
    all: Vec<String>,
}

/// Token → (part of speech, sentiment) lookup with per-tag replacement pools.
#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    entries: BTreeMap<String, (String, Sentiment)>,
    pools: BTreeMap<String, TagPools>,
    neutral: Vec<String>,
}

impl PosLexicon {
    pub fn from_entries<I, S, T>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, T, Sentiment)>,
        S: AsRef<str>,
        T: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (token, tag, sentiment) in entries {
            let token = normalize_token(token.as_ref());
            if !token.is_empty() {
                map.insert(token, (tag.into(), sentiment));
            }
        }
        let mut by_tag: BTreeMap<String, [BTreeSet<String>; 3]> = BTreeMap::new();
        let mut neutral = BTreeSet::new();
        for (token, (tag, sentiment)) in &map {
            let sets = by_tag.entry(tag.clone()).or_default();
            match sentiment {
                Sentiment::Positive => {
                    sets[0].insert(token.clone());
                }
                Sentiment::Negative => {
                    sets[1].insert(token.clone());
                }
                Sentiment::Neutral => {
                    sets[0].insert(token.clone());
                    sets[1].insert(token.clone());
                    neutral.insert(token.clone());
                }
            }
            sets[2].insert(token.clone());
        }
        let pools = by_tag
            .into_iter()
            .map(|(tag, [pos, neg, all])| {
                (
                    tag,
                    TagPools {
                        positive: pos.into_iter().collect(),
                        negative: neg.into_iter().collect(),
                        all: all.into_iter().collect(),
                    },
                )
            })
            .collect();
        PosLexicon {
            entries: map,
            pools,
            neutral: neutral.into_iter().collect(),
        }
    }

    /// Parses `token<TAB>pos<TAB>sentiment` lines (`pos`/`neg`/`neu`).
    /// Blank lines and `#` comments are skipped; later duplicates win.
    pub fn parse(content: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::config(format!(
                    "lexicon line {}: expected 3 tab-separated columns, got {}",
                    i + 1,
                    cols.len()
                )));
            }
            let sentiment: Sentiment = cols[2]
                .parse()
                .map_err(|e| Error::config(format!("lexicon line {}: {e}", i + 1)))?;
            entries.push((cols[0].to_string(), cols[1].trim().to_string(), sentiment));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(tag, sentiment)`; unknown tokens are `OTHER`/neutral.
    pub fn tag(&self, token: &str) -> (&str, Sentiment) {
        match self.entries.get(token) {
            Some((tag, s)) => (tag.as_str(), *s),
            None => (OTHER_TAG, Sentiment::Neutral),
        }
    }

    /// Candidate replacements for `token`: same tag with opposite sentiment,
    /// the whole tag for neutral words, the neutral vocabulary for unknown ones.
    pub fn replacement_pool(&self, token: &str) -> &[String] {
        let Some((tag, sentiment)) = self.entries.get(token) else {
            return &self.neutral;
        };
        let pools = &self.pools[tag];
        match sentiment {
            Sentiment::Positive => &pools.negative,
            Sentiment::Negative => &pools.positive,
            Sentiment::Neutral => &pools.all,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn cfg(seed: u64) -> SamplingConfig {
        SamplingConfig {
            seed,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn sample_size_values() {
        // ceil(ln 0.05 / ln(1 - 2^-10)) = ceil(3066.13)
        assert_eq!(required_sample_size(0.95, 0.5, 10), 3067);
        // ceil(ln 0.05 / ln 0.5) = ceil(4.3219)
        assert_eq!(required_sample_size(0.95, 0.5, 1), 5);
        assert_eq!(required_sample_size(0.5, 0.5, 1), 1);
        assert_eq!(required_sample_size(1e-300, 0.5, 10), 1);
        // ceil(ln 0.05 / ln(7/8)) = ceil(22.43)
        assert_eq!(required_sample_size(0.95, 0.5, 3), 23);
    }

    #[test]
    fn sample_size_guarantee_holds_and_is_tight() {
        for &(alpha, p, l) in &[(0.95, 0.5, 10), (0.9, 0.1, 2), (0.99, 0.3, 4), (0.5, 0.5, 1)] {
            let n = required_sample_size(alpha, p, l) as i32;
            let absent = f64::powi(p, l as i32);
            let prob = |n: i32| 1.0 - (1.0 - absent).powi(n);
            assert!(prob(n) >= alpha - 1e-12);
            if n > 1 {
                assert!(prob(n - 1) < alpha);
            }
        }
    }

    #[test]
    fn config_validation_clamps_p() {
        let c = SamplingConfig {
            p_perturb: 0.0,
            ..SamplingConfig::default()
        }
        .validated()
        .unwrap();
        assert_eq!(c.p_perturb, MIN_P_PERTURB);
        let c = SamplingConfig {
            p_perturb: 1.0,
            ..SamplingConfig::default()
        }
        .validated()
        .unwrap();
        assert_eq!(c.p_perturb, MAX_P_PERTURB);
        assert!(SamplingConfig {
            alpha: 1.0,
            ..SamplingConfig::default()
        }
        .validated()
        .is_err());
        assert!(SamplingConfig {
            l_max: 0,
            ..SamplingConfig::default()
        }
        .validated()
        .is_err());
    }

    #[test]
    fn zero_probability_generator_leaves_example_untouched() {
        let xi = tokenize("poor drinks decent food great service");
        let c = SamplingConfig {
            p_perturb: 0.0,
            ..cfg(1)
        };
        for s in mask_sample(&xi, &c, 50).unwrap() {
            assert_eq!(s.document, xi);
            assert!(s.mask.iter().all(|m| !m));
        }
    }

    #[test]
    fn mask_sampling_is_deterministic_and_masks_selected_positions() {
        let xi = tokenize("poor drinks decent food great service");
        let a = mask_sample(&xi, &cfg(7), 200).unwrap();
        let b = mask_sample(&xi, &cfg(7), 200).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, mask_sample(&xi, &cfg(8), 200).unwrap());
        for s in &a {
            assert_eq!(s.document.len(), xi.len());
            for i in 0..xi.len() {
                if s.mask[i] {
                    assert_eq!(s.document.tokens()[i], "UNK");
                } else {
                    assert_eq!(s.document.tokens()[i], xi.tokens()[i]);
                }
            }
        }
    }

    #[test]
    fn empty_example_rejected() {
        let err = mask_sample(&Document::default(), &cfg(0), 3);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn perturbation_rate_within_three_standard_errors() {
        let xi = tokenize("a b c d e f g h i j");
        let n = 3000;
        let samples = mask_sample(&xi, &cfg(11), n).unwrap();
        let se = (0.25f64 / n as f64).sqrt();
        for i in 0..xi.len() {
            let rate = samples.iter().filter(|s| s.mask[i]).count() as f64 / n as f64;
            assert!((rate - 0.5).abs() <= 3.0 * se, "position {i}: rate {rate}");
        }
    }

    fn lexicon() -> PosLexicon {
        PosLexicon::parse(
            "great\tADJ\tpos\ndecent\tADJ\tpos\nbad\tADJ\tneg\nawful\tADJ\tneg\npoor\tADJ\tneg\n\
             food\tNOUN\tneu\ndrinks\tNOUN\tneu\nservice\tNOUN\tneu\nview\tNOUN\tneu\n\
             lonely\tVERB\tneg\n",
        )
        .unwrap()
    }

    #[test]
    fn lexicon_parsing_and_duplicates() {
        let lex = PosLexicon::parse("good\tADJ\tpos\n# comment\n\ngood\tADJ\tneg\n").unwrap();
        assert_eq!(lex.len(), 1);
        assert_eq!(lex.tag("good"), ("ADJ", Sentiment::Negative));
        assert_eq!(lex.tag("unknown"), (OTHER_TAG, Sentiment::Neutral));
        assert!(PosLexicon::parse("good\tADJ\n").is_err());
        assert!(PosLexicon::parse("good\tADJ\tmaybe\n").is_err());
    }

    #[test]
    fn positive_adjective_replaced_by_negative_one() {
        let lex = lexicon();
        let pool = lex.replacement_pool("great");
        assert_eq!(pool, ["awful", "bad", "poor"]);
        assert_eq!(lex.replacement_pool("bad"), ["decent", "great"]);
        // neutral nouns draw from the whole noun set
        assert_eq!(lex.replacement_pool("food"), ["drinks", "food", "service", "view"]);
        // unknown tokens draw from the neutral vocabulary
        assert_eq!(lex.replacement_pool("xyz"), ["drinks", "food", "service", "view"]);
    }

    #[test]
    fn pos_sampling_respects_sentiment_and_positions() {
        let lex = lexicon();
        let xi = tokenize("poor drinks decent food great service");
        let samples = pos_sample(&xi, &cfg(3), &lex, 500).unwrap();
        for s in &samples {
            assert_eq!(s.document.len(), xi.len());
            for (i, orig) in xi.tokens().iter().enumerate() {
                let now = &s.document.tokens()[i];
                if !s.mask[i] {
                    assert_eq!(now, orig);
                    continue;
                }
                assert_ne!(now, orig, "original redrawn at {i}");
                match orig.as_str() {
                    "great" | "decent" => assert!(["bad", "awful", "poor"].contains(&now.as_str())),
                    "poor" => assert!(["great", "decent"].contains(&now.as_str())),
                    _ => assert!(["food", "drinks", "service", "view"].contains(&now.as_str())),
                }
            }
        }
        assert_eq!(samples, pos_sample(&xi, &cfg(3), &lex, 500).unwrap());
    }

    #[test]
    fn empty_pool_falls_back_to_mask() {
        // "lonely" is the only VERB and negative: its positive pool is empty.
        let lex = lexicon();
        let xi = tokenize("lonely");
        let c = SamplingConfig {
            p_perturb: 0.99,
            ..cfg(5)
        };
        let samples = pos_sample(&xi, &c, &lex, 20).unwrap();
        assert!(samples
            .iter()
            .filter(|s| s.mask[0])
            .all(|s| s.document.tokens()[0] == "UNK"));
    }

    #[test]
    fn pos_scheme_without_lexicon_is_config_error() {
        let c = SamplingConfig {
            scheme: Scheme::Pos,
            ..cfg(0)
        };
        assert!(matches!(generate(&tokenize("a"), &c, None, 3), Err(Error::Config(_))));
    }
}
