//! Sampling aligned pairs for judging and scoring the judges' labels.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_io::BilingualPairRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("only {available} pairs survive filtering, {needed} needed")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("no labels for model {0:?}")]
    NoLabels(String),
    #[error("no ground truth for pair {0:?}")]
    MissingGroundTruth(String),
}

/// Sampler configuration. The defaults draw 2000 pairs per language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub min_chars: usize,
    pub min_words: usize,
    pub n_longest: usize,
    pub n_shortest: usize,
    pub n_uniform: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            min_chars: 32,
            min_words: 5,
            n_longest: 100,
            n_shortest: 100,
            n_uniform: 1800,
            seed: 0,
        }
    }
}

impl SampleSpec {
    pub fn total(&self) -> usize {
        self.n_longest + self.n_shortest + self.n_uniform
    }

    /// A pair is too short only when its English side is below both limits.
    pub fn keeps(&self, en_text: &str) -> bool {
        en_text.chars().count() >= self.min_chars || en_text.split_whitespace().count() >= self.min_words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Longest,
    Shortest,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPair {
    pub pair_id: String,
    pub stratum: Stratum,
    #[serde(flatten)]
    pub pair: BilingualPairRecord,
}

/// Filters the pool, then takes the longest and shortest English sides (by
/// character count, ties by pair id) and a seeded uniform sample of the rest.
pub fn sample_pairs(pairs: &[BilingualPairRecord], spec: &SampleSpec) -> Result<Vec<SampledPair>, EvalError> {
    let mut pool: Vec<(usize, String, &BilingualPairRecord)> = pairs
        .iter()
        .filter(|p| spec.keeps(&p.en_text))
        .map(|p| (p.en_text.chars().count(), p.pair_id(), p))
        .collect();
    if pool.len() < spec.total() {
        return Err(EvalError::PoolTooSmall {
            needed: spec.total(),
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| a.1.cmp(&b.1));

    let mut by_length: Vec<usize> = (0..pool.len()).collect();
    by_length.sort_by(|&a, &b| pool[a].0.cmp(&pool[b].0).then_with(|| pool[a].1.cmp(&pool[b].1)));
    let mut longest = by_length.clone();
    longest.sort_by(|&a, &b| pool[b].0.cmp(&pool[a].0).then_with(|| pool[a].1.cmp(&pool[b].1)));

    let mut stratum: Vec<Option<Stratum>> = vec![None; pool.len()];
    let mut order = Vec::with_capacity(spec.total());
    for &i in longest.iter().take(spec.n_longest) {
        stratum[i] = Some(Stratum::Longest);
        order.push(i);
    }
    let shortest: Vec<usize> = by_length
        .iter()
        .copied()
        .filter(|&i| stratum[i].is_none())
        .take(spec.n_shortest)
        .collect();
    for i in shortest {
        stratum[i] = Some(Stratum::Shortest);
        order.push(i);
    }
    let rest: Vec<usize> = (0..pool.len()).filter(|&i| stratum[i].is_none()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picked = rand::seq::index::sample(&mut rng, rest.len(), spec.n_uniform).into_vec();
    picked.sort_unstable();
    for k in picked {
        stratum[rest[k]] = Some(Stratum::Uniform);
        order.push(rest[k]);
    }

    let out = order
        .into_iter()
        .map(|i| SampledPair {
            pair_id: pool[i].1.clone(),
            stratum: stratum[i].expect("selected"),
            pair: pool[i].2.clone(),
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub symbol: String,
    pub pair_id: String,
    pub model: String,
    pub verdict: bool,
}

/// Fraction of documents whose sampled pairs were all judged correct by
/// `model`.
pub fn document_accuracy(labels: &[LabeledPair], model: &str) -> Result<f64, EvalError> {
    let mut docs: BTreeMap<&str, bool> = BTreeMap::new();
    for l in labels.iter().filter(|l| l.model == model) {
        *docs.entry(l.symbol.as_str()).or_insert(true) &= l.verdict;
    }
    if docs.is_empty() {
        return Err(EvalError::NoLabels(model.to_string()));
    }
    let good = docs.values().filter(|&&g| g).count();
    Ok(good as f64 / docs.len() as f64)
}

/// Ground truth keyed by pair id.
pub fn ground_truth_from(labels: &[LabeledPair]) -> HashMap<String, bool> {
    labels.iter().map(|l| (l.pair_id.clone(), l.verdict)).collect()
}

/// Returns `(false_positives, false_negatives)`: pairs the model accepted
/// that humans rejected, and the reverse.
pub fn confusion_counts(
    labels: &[LabeledPair],
    ground_truth: &HashMap<String, bool>,
) -> Result<(usize, usize), EvalError> {
    let mut fp = 0;
    let mut fn_ = 0;
    for l in labels {
        let truth = *ground_truth
            .get(&l.pair_id)
            .ok_or_else(|| EvalError::MissingGroundTruth(l.pair_id.clone()))?;
        match (l.verdict, truth) {
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok((fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn rec(i: usize, en: &str) -> BilingualPairRecord {
        BilingualPairRecord {
            symbol: format!("S/{}", i / 3),
            src_lang: "fr".into(),
            src_text: "x".into(),
            en_text: en.into(),
            hit_rate_src: 1.0,
            hit_rate_en: 1.0,
            src_start: i,
            src_end: i + 1,
            en_start: i,
            en_end: i + 1,
        }
    }

    fn label(symbol: &str, id: &str, verdict: bool) -> LabeledPair {
        LabeledPair {
            symbol: symbol.into(),
            pair_id: id.into(),
            model: "m".into(),
            verdict,
        }
    }

    fn small_spec(seed: u64) -> SampleSpec {
        SampleSpec {
            n_longest: 3,
            n_shortest: 3,
            n_uniform: 6,
            seed,
            ..SampleSpec::default()
        }
    }

    #[test]
    fn and_filter() {
        let spec = SampleSpec::default();
        assert!(!spec.keeps("ok"));
        assert!(spec.keeps("a b c d e f"));
        assert!(spec.keeps(&"x".repeat(32)));
        assert!(!spec.keeps("a b c d"));
    }

    #[test]
    fn exact_pool_selects_everything() {
        let pool: Vec<_> = (0..12).map(|i| rec(i, &"word ".repeat(5 + i))).collect();
        let out = sample_pairs(&pool, &small_spec(1)).unwrap();
        let ids: HashSet<_> = out.iter().map(|s| s.pair_id.clone()).collect();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn strata_pick_extremes() {
        let pool: Vec<_> = (0..40).map(|i| rec(i, &"w ".repeat(5 + i))).collect();
        let out = sample_pairs(&pool, &small_spec(7)).unwrap();
        let longest: Vec<usize> = out.iter().filter(|s| s.stratum == Stratum::Longest).map(|s| s.pair.src_start).collect();
        let shortest: Vec<usize> = out.iter().filter(|s| s.stratum == Stratum::Shortest).map(|s| s.pair.src_start).collect();
        assert_eq!(longest, vec![39, 38, 37]);
        assert_eq!(shortest, vec![0, 1, 2]);
    }

    #[test]
    fn too_small() {
        let pool: Vec<_> = (0..12).map(|i| rec(i, if i == 0 { "ok" } else { "one two three four five" })).collect();
        assert_eq!(
            sample_pairs(&pool, &small_spec(0)),
            Err(EvalError::PoolTooSmall { needed: 12, available: 11 })
        );
    }

    #[test]
    fn accuracy_examples() {
        let all_true = vec![label("A", "1", true), label("B", "2", true), label("C", "3", true)];
        assert_eq!(document_accuracy(&all_true, "m"), Ok(1.0));
        let half = vec![label("A", "1", true), label("A", "2", false), label("B", "3", true)];
        assert_eq!(document_accuracy(&half, "m"), Ok(0.5));
        let none = vec![label("A", "1", false), label("B", "2", true), label("B", "3", false)];
        assert_eq!(document_accuracy(&none, "m"), Ok(0.0));
        assert_eq!(document_accuracy(&half, "other"), Err(EvalError::NoLabels("other".into())));
    }

    #[test]
    fn confusion_examples() {
        let labels: Vec<_> = (0..10).map(|i| label("A", &i.to_string(), true)).collect();
        let agree = ground_truth_from(&labels);
        assert_eq!(confusion_counts(&labels, &agree), Ok((0, 0)));
        let humans_false: HashMap<_, _> = agree.keys().map(|k| (k.clone(), false)).collect();
        assert_eq!(confusion_counts(&labels, &humans_false), Ok((10, 0)));
        let mut partial = agree.clone();
        partial.remove("3");
        assert_eq!(confusion_counts(&labels, &partial), Err(EvalError::MissingGroundTruth("3".into())));
    }

    proptest! {
        #[test]
        fn sampler_deterministic_and_disjoint(lens in prop::collection::vec(0usize..60, 12..80), seed: u64) {
            let pool: Vec<_> = lens.iter().enumerate().map(|(i, &l)| rec(i, &"y".repeat(32 + l))).collect();
            let a = sample_pairs(&pool, &small_spec(seed)).unwrap();
            let b = sample_pairs(&pool, &small_spec(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            let ids: HashSet<_> = a.iter().map(|s| &s.pair_id).collect();
            prop_assert_eq!(ids.len(), 12);
        }

        #[test]
        fn accuracy_bounded_and_monotone(
            verdicts in prop::collection::vec((0usize..5, any::<bool>()), 1..30),
            extra_doc in 0usize..5,
        ) {
            let labels: Vec<_> = verdicts
                .iter()
                .enumerate()
                .map(|(i, &(d, v))| label(&d.to_string(), &i.to_string(), v))
                .collect();
            let acc = document_accuracy(&labels, "m").unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            let mut more = labels.clone();
            more.push(label(&extra_doc.to_string(), "extra", false));
            prop_assert!(document_accuracy(&more, "m").unwrap() <= acc);
        }
    }
}
