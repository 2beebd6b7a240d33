//! End-to-end checks of the explainer against the exact oracles.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::instances::{linear_instance, random_linear, random_shortcut, shortcut_instance, FILLER};
use super::{
    best_shortcut_allocation, linear_drop_closed_form, oracle_optimal_candidate, shortcut_drop_closed_form,
    word_counts, ExactDistribution, OracleOptimum, Removal,
};
use crate::error::Result;
use crate::explainer::{DropIndex, Explainer, ExplainerConfig};
use crate::predictor::{predict_deduplicated, Predictor, TargetClass};
use crate::sampling::{mask_sample, required_sample_size, SamplingConfig};
use crate::text::{smooth_idf, Document};

const MASK: &str = "UNK";

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    /// idf rule used when fitting the linear models under test.
    pub idf_rule: fn(usize, usize) -> f64,
    pub cross_oracle_instances: usize,
    pub subset_instances: usize,
    pub convergence_instances: usize,
    pub convergence_samples: usize,
    pub convergence_seeds: usize,
    pub convergence_tolerance: f64,
    pub absence_trials: usize,
    pub subset_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            idf_rule: smooth_idf,
            cross_oracle_instances: 100,
            subset_instances: 50,
            convergence_instances: 20,
            convergence_samples: 20_000,
            convergence_seeds: 5,
            convergence_tolerance: 0.02,
            absence_trials: 1000,
            subset_samples: 20_000,
        }
    }
}

impl VerifyConfig {
    /// Reduced instance counts for fast runs.
    pub fn quick(seed: u64) -> Self {
        VerifyConfig {
            seed,
            cross_oracle_instances: 10,
            subset_instances: 10,
            convergence_instances: 4,
            convergence_seeds: 5,
            ..VerifyConfig::default()
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(serialize_with = "as_secs")]
    pub elapsed: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

impl CheckOutcome {
    fn new(name: &'static str, start: Instant, failure: Option<String>, summary: String) -> Self {
        CheckOutcome {
            name,
            passed: failure.is_none(),
            detail: failure.unwrap_or(summary),
            elapsed: start.elapsed(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    Ok(VerifyReport {
        checks: vec![
            cross_oracle_linear(cfg)?,
            cross_oracle_shortcut(cfg)?,
            mask_equivalence(cfg)?,
            corner_allocations(),
            drop_convergence(cfg)?,
            absence_guarantee(cfg)?,
            linear_subsets(cfg)?,
            shortcut_subsets(cfg)?,
        ],
    })
}

fn counts_for(words: &[String], counts: &BTreeMap<String, usize>) -> Vec<usize> {
    words.iter().map(|w| counts.get(w).copied().unwrap_or(0)).collect()
}

/// Closed-form linear drops equal exhaustive enumeration on every candidate.
pub fn cross_oracle_linear(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(1);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    let mut candidates = 0usize;
    for inst in 0..cfg.cross_oracle_instances {
        let (model, xi) = random_linear(&mut rng, 10, 1.0)?;
        let p = rng.gen_range(0.2..0.8);
        let dist = ExactDistribution::of_model(&model, &xi, p, TargetClass::Index(0), Removal::Mask(MASK))?;
        let mean = dist.mean();
        let words: Vec<String> = xi.local_dict().into_iter().map(String::from).collect();
        let weights: Vec<f64> = words.iter().map(|w| model.weight(w)).collect();
        for c in 1usize..1 << xi.len() {
            let pos = super::to_positions(c, xi.len());
            let closed = linear_drop_closed_form(&weights, &counts_for(&words, &word_counts(&xi, &pos)), 1.0 - p);
            let err = (mean - dist.conditional_on_mask(c).mean - closed).abs();
            candidates += 1;
            worst = worst.max(err);
            if err > 1e-12 && failure.is_none() {
                failure = Some(format!("instance {inst}, candidate {pos:?}: |error| = {err:e}"));
            }
        }
    }
    Ok(CheckOutcome::new(
        "cross-oracle linear",
        start,
        failure,
        format!("{candidates} candidates, max |error| {worst:.1e}"),
    ))
}

/// Closed-form shortcut drops equal exhaustive enumeration on every candidate.
pub fn cross_oracle_shortcut(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(2);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    let mut candidates = 0usize;
    for inst in 0..cfg.cross_oracle_instances {
        let (model, xi, mults) = random_shortcut(&mut rng, 10);
        let p = rng.gen_range(0.2..0.8);
        let dist = ExactDistribution::of_model(&model, &xi, p, TargetClass::Index(1), Removal::Mask(MASK))?;
        let mean = dist.mean();
        for c in 1usize..1 << xi.len() {
            let pos = super::to_positions(c, xi.len());
            let counts = counts_for(model.tokens(), &word_counts(&xi, &pos));
            let closed = shortcut_drop_closed_form(&mults, &counts, p);
            let err = (mean - dist.conditional_on_mask(c).mean - closed).abs();
            candidates += 1;
            worst = worst.max(err);
            if err > 1e-12 && failure.is_none() {
                failure = Some(format!("instance {inst}, candidate {pos:?}: |error| = {err:e}"));
            }
        }
    }
    Ok(CheckOutcome::new(
        "cross-oracle shortcut",
        start,
        failure,
        format!("{candidates} candidates, max |error| {worst:.1e}"),
    ))
}

/// Deleting and masking perturbed tokens give identical oracle values.
pub fn mask_equivalence(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(3);
    let mut failure = None;
    for inst in 0..cfg.cross_oracle_instances {
        let (model, xi) = random_linear(&mut rng, 8, 1.0)?;
        let masked = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(0), Removal::Mask(MASK))?;
        let deleted = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(0), Removal::Delete)?;
        let err = masked
            .values
            .iter()
            .zip(&deleted.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > 1e-12 {
            failure = Some(format!("instance {inst}: masking and deletion differ by {err:e}"));
            break;
        }
    }
    Ok(CheckOutcome::new(
        "mask equivalence",
        start,
        failure,
        format!("{} instances", cfg.cross_oracle_instances),
    ))
}

/// With fewer removals than the rarest word's multiplicity, the best
/// integer allocation puts every removal on that word.
pub fn corner_allocations() -> CheckOutcome {
    let start = Instant::now();
    let mut failure = None;
    let mut cases = 0;
    for m1 in 2..=5usize {
        for gaps in [[1, 1], [1, 2], [2, 1], [3, 3]] {
            for k in 1..=3 {
                let mut m = vec![m1];
                for g in gaps.iter().take(k - 1) {
                    m.push(m[m.len() - 1] + g);
                }
                for l in 1..m1 {
                    cases += 1;
                    let best = best_shortcut_allocation(&m, l, 0.5);
                    let mut want = vec![0; m.len()];
                    want[0] = l;
                    if best.as_ref() != Some(&want) && failure.is_none() {
                        failure = Some(format!("m = {m:?}, {l} removals: best allocation {best:?}"));
                    }
                }
            }
        }
    }
    CheckOutcome::new("corner allocations", start, failure, format!("{cases} cases"))
}

fn sample_values<P: Predictor + ?Sized>(
    model: &P,
    samples: &[crate::sampling::PerturbationSample],
    target: usize,
) -> Result<Vec<f64>> {
    let docs: Vec<Document> = samples.iter().map(|s| s.document.clone()).collect();
    predict_deduplicated(model, &docs)?
        .iter()
        .map(|p| p.target_score(target))
        .collect()
}

fn candidates_up_to(b: usize, l: usize) -> Vec<Vec<usize>> {
    (1usize..1 << b)
        .filter(|c| c.count_ones() as usize <= l)
        .map(|c| super::to_positions(c, b))
        .collect()
}

/// Seed-averaged empirical drops approach the exact drops.
pub fn drop_convergence(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(4);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    let mut compared = 0usize;
    for inst in 0..cfg.convergence_instances {
        let (model, xi, target): (Box<dyn Predictor>, Document, usize) = if inst % 2 == 0 {
            let (m, d) = random_linear(&mut rng, 10, 0.1)?;
            (Box::new(m), d, 0)
        } else {
            let (m, d, _) = random_shortcut(&mut rng, 10);
            (Box::new(m), d, 1)
        };
        let dist = ExactDistribution::of_model(&model, &xi, 0.5, TargetClass::Index(target), Removal::Mask(MASK))?;
        let candidates = candidates_up_to(xi.len(), 3);
        let mut sums = vec![0.0; candidates.len()];
        for _ in 0..cfg.convergence_seeds {
            let sampling = SamplingConfig {
                seed: rng.gen(),
                ..SamplingConfig::default()
            };
            let samples = mask_sample(&xi, &sampling, cfg.convergence_samples)?;
            let index = DropIndex::new(&samples, &sample_values(&model, &samples, target)?);
            for (sum, c) in sums.iter_mut().zip(&candidates) {
                // a candidate absent from every sample contributes an
                // infinite error and fails the check
                *sum += index.empirical_drop(c).unwrap_or(f64::INFINITY);
            }
        }
        let mean = dist.mean();
        for (sum, c) in sums.iter().zip(&candidates) {
            let estimate = sum / cfg.convergence_seeds as f64;
            let err = (estimate - (mean - dist.conditional(c).mean)).abs();
            compared += 1;
            worst = worst.max(err);
            if (err.is_nan() || err > cfg.convergence_tolerance) && failure.is_none() {
                failure = Some(format!("instance {inst}, candidate {c:?}: |error| = {err:.4}"));
            }
        }
    }
    Ok(CheckOutcome::new(
        "drop convergence",
        start,
        failure,
        format!(
            "{compared} candidates, n = {}, {} seeds, max |error| {worst:.4}",
            cfg.convergence_samples, cfg.convergence_seeds
        ),
    ))
}

/// Results of the absence-guarantee experiment.
#[derive(Debug, Clone, Serialize)]
pub struct AbsenceStats {
    pub n: usize,
    pub trials: usize,
    /// Fraction of (trial, candidate) pairs in which the candidate is never
    /// excluded: the estimate of the failure probability of one candidate.
    pub candidate_rate: f64,
    /// Largest per-candidate fraction of trials in which the candidate is
    /// never excluded.
    pub worst_candidate_rate: f64,
    /// Fraction of trials in which at least one size-`l_max` candidate is
    /// never excluded.
    pub any_candidate_rate: f64,
    pub bound: f64,
}

pub fn absence_experiment(seed: u64, b: usize, l_max: usize, alpha: f64, trials: usize) -> Result<AbsenceStats> {
    let n = required_sample_size(alpha, 0.5, l_max);
    let xi = Document::from_tokens((0..b).map(|i| format!("t{i}")));
    let candidates: Vec<Vec<usize>> = (1usize..1 << b)
        .filter(|c| c.count_ones() as usize == l_max)
        .map(|c| super::to_positions(c, b))
        .collect();
    let mut misses = vec![0usize; candidates.len()];
    let mut any = 0usize;
    for t in 0..trials {
        let cfg = SamplingConfig {
            seed: seed.wrapping_mul(1_000_003).wrapping_add(t as u64),
            l_max,
            alpha,
            ..SamplingConfig::default()
        };
        let samples = mask_sample(&xi, &cfg, n)?;
        let index = DropIndex::new(&samples, &vec![0.0; n]);
        let mut missed = false;
        for (miss, c) in misses.iter_mut().zip(&candidates) {
            if index.candidate_stats(c).0 == 0 {
                *miss += 1;
                missed = true;
            }
        }
        any += usize::from(missed);
    }
    let fail = 1.0 - alpha;
    Ok(AbsenceStats {
        n,
        trials,
        candidate_rate: misses.iter().sum::<usize>() as f64 / (trials * candidates.len()) as f64,
        worst_candidate_rate: misses.iter().copied().max().unwrap_or(0) as f64 / trials as f64,
        any_candidate_rate: any as f64 / trials as f64,
        bound: fail + 3.0 * (fail * alpha / trials as f64).sqrt(),
    })
}

/// At the computed sample size each size-`l_max` candidate is excluded from
/// some sample in at least a fraction `alpha` of runs.
pub fn absence_guarantee(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let stats = absence_experiment(cfg.seed, 10, 3, 0.95, cfg.absence_trials)?;
    let failure = (stats.candidate_rate > stats.bound).then(|| {
        format!(
            "candidates were never excluded in {:.4} of runs (bound {:.4})",
            stats.candidate_rate, stats.bound
        )
    });
    Ok(CheckOutcome::new(
        "absence guarantee",
        start,
        failure,
        format!(
            "n = {}, candidate never excluded in {:.4} <= {:.4} of runs (worst single candidate {:.4})",
            stats.n, stats.candidate_rate, stats.bound, stats.worst_candidate_rate
        ),
    ))
}

fn explainer_config(
    epsilon: f64,
    l_max: usize,
    pool: usize,
    n: usize,
    seed: u64,
    target: TargetClass,
) -> ExplainerConfig {
    ExplainerConfig {
        sampling: SamplingConfig {
            l_max,
            n_override: Some(n),
            seed,
            ..SamplingConfig::default()
        },
        epsilon,
        pool_size: pool,
        counterfactuals: 0,
        target,
    }
}

/// Per-word counts that a greedy choice by decreasing weight makes with
/// `size` removals.
fn greedy_counts(ranked: &[(String, f64, usize)], size: usize) -> BTreeMap<String, usize> {
    let mut left = size;
    let mut out = BTreeMap::new();
    for (w, _, m) in ranked {
        let take = left.min(*m);
        if take > 0 {
            out.insert(w.clone(), take);
        }
        left -= take;
    }
    out
}

fn nonzero(counts: BTreeMap<String, usize>) -> BTreeMap<String, usize> {
    counts.into_iter().filter(|(w, c)| *c > 0 && w != FILLER).collect()
}

#[derive(Debug, Default)]
struct Tally {
    exact: usize,
    excused: usize,
}

/// Whether an explainer result that differs from the oracle optimum is
/// within 3 standard errors of it.
fn within_noise(dist: &ExactDistribution, opt: &OracleOptimum, got: &[usize], n: usize, epsilon: f64) -> bool {
    let se = |c: &[usize]| dist.drop_standard_error(c, n);
    let threshold_se = epsilon * (dist.variance() / n as f64).sqrt();
    let drop = dist.candidate_drop(got);
    match got.len().cmp(&opt.positions.len()) {
        std::cmp::Ordering::Equal => opt.drop - drop <= 3.0 * (se(&opt.positions).powi(2) + se(got).powi(2)).sqrt(),
        std::cmp::Ordering::Less => opt.threshold - drop <= 3.0 * (se(got) + threshold_se),
        std::cmp::Ordering::Greater => opt.drop - opt.threshold <= 3.0 * (se(&opt.positions) + threshold_se),
    }
}

/// Linear models: the explainer finds the exhaustive optimum, which takes
/// words greedily by `λ·idf` and never a negative-coefficient word.
pub fn linear_subsets(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(5);
    let mut tally = Tally::default();
    let mut failure = None;
    for inst in 0..cfg.subset_instances {
        let li = linear_instance(&mut rng, cfg.idf_rule, 12)?;
        let xi = &li.document;
        let b = xi.len();
        let dist = ExactDistribution::of_model(&li.model, xi, 0.5, TargetClass::Index(0), Removal::Mask(MASK))?;
        let opt = oracle_optimal_candidate(&dist, li.epsilon, b);
        let opt_counts = nonzero(word_counts(xi, &opt.positions));

        // the reference optimum from the closed form: smallest greedy prefix
        // reaching the threshold
        let mut ranked: Vec<(String, f64, usize)> = xi
            .multiplicities()
            .into_iter()
            .map(|(w, m)| (w.to_string(), li.reference_weights.get(w).copied().unwrap_or(0.0), m))
            .filter(|(_, w, _)| *w > 0.0)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let all: Vec<f64> = xi
            .multiplicities()
            .keys()
            .map(|w| li.reference_weights.get(*w).copied().unwrap_or(0.0))
            .collect();
        let mults: Vec<usize> = xi.multiplicities().values().copied().collect();
        let reference_mean = linear_drop_closed_form(&all, &mults, 0.5);
        let reference = (1..=b).map(|l| greedy_counts(&ranked, l)).find(|c| {
            let w: Vec<f64> = c.keys().map(|w| li.reference_weights[w]).collect();
            let m: Vec<usize> = c.values().copied().collect();
            linear_drop_closed_form(&w, &m, 0.5) >= li.epsilon * reference_mean
        });

        let explainer_cfg = explainer_config(li.epsilon, b, b, cfg.subset_samples, rng.gen(), TargetClass::Index(0));
        let e = Explainer::new(&li.model, explainer_cfg)?.explain(xi)?;
        let got = e.subset_positions().to_vec();
        let got_counts = nonzero(word_counts(xi, &got));

        let problem = if reference.as_ref() != Some(&opt_counts) {
            Some(format!(
                "oracle optimum {opt_counts:?} is not the greedy λ·idf prefix {reference:?}"
            ))
        } else if let Some(w) = got
            .iter()
            .map(|&i| &xi.tokens()[i])
            .find(|w| li.coefficients.get(*w).is_some_and(|&c| c < 0.0))
        {
            Some(format!("subset contains negative-coefficient word {w:?}"))
        } else if got_counts == opt_counts {
            tally.exact += 1;
            None
        } else if within_noise(&dist, &opt, &got, cfg.subset_samples, li.epsilon) {
            tally.excused += 1;
            None
        } else {
            Some(format!("explainer chose {got_counts:?}, oracle {opt_counts:?}"))
        };
        if let Some(p) = problem {
            failure = Some(format!("instance {inst} ({}): {p}", xi.detokenize()));
            break;
        }
    }
    Ok(CheckOutcome::new(
        "linear greedy subsets",
        start,
        failure,
        format!("{} exact, {} within 3 standard errors", tally.exact, tally.excused),
    ))
}

/// Shortcut models: the subset is `min(m_1, l_max)` occurrences of the
/// rarest shortcut word.
pub fn shortcut_subsets(cfg: &VerifyConfig) -> Result<CheckOutcome> {
    let start = Instant::now();
    let mut rng = cfg.rng(6);
    let mut failure = None;
    for inst in 0..cfg.subset_instances {
        let si = shortcut_instance(&mut rng, 12);
        let xi = &si.document;
        let want = si.multiplicities[0].min(si.l_max);
        let rarest = &si.words[0];
        let counts = |positions: &[usize]| -> Option<usize> {
            positions
                .iter()
                .all(|&i| &xi.tokens()[i] == rarest)
                .then_some(positions.len())
        };
        let dist = ExactDistribution::of_model(&si.model, xi, 0.5, TargetClass::Index(1), Removal::Mask(MASK))?;
        let opt = oracle_optimal_candidate(&dist, si.epsilon, si.l_max);
        let explainer_cfg = explainer_config(
            si.epsilon,
            si.l_max,
            xi.len(),
            cfg.subset_samples,
            rng.gen(),
            TargetClass::ArgmaxAtExample,
        );
        let e = Explainer::new(&si.model, explainer_cfg)?.explain(xi)?;
        let problem = if counts(&opt.positions) != Some(want) {
            Some(format!("oracle optimum {:?}", opt.positions))
        } else if counts(e.subset_positions()) != Some(want) {
            Some(format!("explainer chose {:?}", e.subset_words()))
        } else if e.threshold_met != (si.multiplicities[0] <= si.l_max) {
            Some(format!("threshold_met = {}", e.threshold_met))
        } else {
            None
        };
        if let Some(p) = problem {
            failure = Some(format!(
                "instance {inst} ({}, m = {:?}, l_max = {}): {p}",
                xi.detokenize(),
                si.multiplicities,
                si.l_max
            ));
            break;
        }
    }
    Ok(CheckOutcome::new(
        "shortcut rarest-word subsets",
        start,
        failure,
        format!("{} instances exact", cfg.subset_instances),
    ))
}
