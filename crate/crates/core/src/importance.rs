//! Per-word importance scoring.
//!
//! The deletion score of word `i` toward label `y` is the drop in the
//! classifier's confidence when the word is removed:
//! `s_i = F_y(w_1..w_n) - F_y(w_1..w_{i-1}, w_{i+1}..w_n)`, always measured
//! against the same full-text baseline. An alternative scorer uses the
//! magnitude of the loss gradient through each word's feature contribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, LinearTextModel, TextClassifier};
use crate::text::TokenizedText;

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error("cannot score an empty text")]
    EmptyText,
    #[error("label {label} out of range for {k} labels")]
    InvalidLabel { label: usize, k: usize },
    #[error("baseline query failed")]
    BaselineQuery(#[source] ClassifierError),
    #[error("deletion query for word {index} failed")]
    DeletionQuery {
        index: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Deletion,
    Gradient,
}

/// Which word indices to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Sampler {
    /// Score every word.
    All,
    /// Score `size` distinct indices sampled uniformly without replacement;
    /// falls back to all words when `size >= n`.
    Random { size: usize, seed: u64 },
}

impl Sampler {
    fn select(&self, n: usize) -> Vec<usize> {
        match *self {
            Sampler::All => (0..n).collect(),
            Sampler::Random { size, seed } => {
                if size >= n {
                    return (0..n).collect();
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
                picked.sort_unstable();
                picked
            }
        }
    }
}

/// Importance scores for a subset of a text's words, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceProfile {
    scores: Vec<(usize, f64)>,
    n: usize,
    label_used: usize,
    method: ImportanceMethod,
}

impl ImportanceProfile {
    pub fn new(
        scores: Vec<(usize, f64)>,
        n: usize,
        label_used: usize,
        method: ImportanceMethod,
    ) -> Result<Self, ImportanceError> {
        for window in scores.windows(2) {
            if window[0].0 >= window[1].0 {
                return Err(ImportanceError::InvalidProfile(
                    "indices must be strictly increasing".to_owned(),
                ));
            }
        }
        if let Some(&(last, _)) = scores.last() {
            if last >= n {
                return Err(ImportanceError::InvalidProfile(format!(
                    "index {last} out of range for n = {n}"
                )));
            }
        }
        for &(i, s) in &scores {
            let ok = match method {
                ImportanceMethod::Deletion => s.is_finite() && s.abs() <= 1.0,
                ImportanceMethod::Gradient => s.is_finite() && s >= 0.0,
            };
            if !ok {
                return Err(ImportanceError::InvalidProfile(format!(
                    "score {s} at index {i} invalid for {method:?}"
                )));
            }
        }
        Ok(Self {
            scores,
            n,
            label_used,
            method,
        })
    }

    /// `(index, score)` pairs in strictly increasing index order.
    pub fn scores(&self) -> &[(usize, f64)] {
        &self.scores
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label_used(&self) -> usize {
        self.label_used
    }

    pub fn method(&self) -> ImportanceMethod {
        self.method
    }

    pub fn sample_size(&self) -> usize {
        self.scores.len()
    }
}

/// Concurrency knob for the per-word deletion queries. The default of 1 is
/// right for in-process models; remote endpoints tolerate more in flight.
#[derive(Debug, Clone, Copy)]
pub struct WirOptions {
    pub max_in_flight: usize,
}

impl Default for WirOptions {
    fn default() -> Self {
        Self { max_in_flight: 1 }
    }
}

/// Deletion-based word importance toward `label`.
///
/// Issues exactly `1 + sample_size` classify calls: one full-text baseline,
/// one per scored word.
pub fn wir_deletion<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    label: usize,
    sampler: &Sampler,
) -> Result<ImportanceProfile, ImportanceError> {
    wir_deletion_with(classifier, text, label, sampler, WirOptions::default())
}

pub fn wir_deletion_with<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    label: usize,
    sampler: &Sampler,
    options: WirOptions,
) -> Result<ImportanceProfile, ImportanceError> {
    let n = text.n();
    if n == 0 {
        return Err(ImportanceError::EmptyText);
    }
    let baseline = classifier
        .classify(text)
        .map_err(ImportanceError::BaselineQuery)?;
    if label >= baseline.k() {
        return Err(ImportanceError::InvalidLabel {
            label,
            k: baseline.k(),
        });
    }
    let base_confidence = baseline.confidence(label);
    let indices = sampler.select(n);

    let score_one = |&index: &usize| -> Result<(usize, f64), ImportanceError> {
        let deleted = text.delete_word(index).expect("index within range");
        let dist = classifier
            .classify(&deleted)
            .map_err(|source| ImportanceError::DeletionQuery { index, source })?;
        if dist.k() != baseline.k() {
            return Err(ImportanceError::DeletionQuery {
                index,
                source: ClassifierError::Protocol(format!(
                    "label count changed from {} to {}",
                    baseline.k(),
                    dist.k()
                )),
            });
        }
        Ok((index, base_confidence - dist.confidence(label)))
    };

    let results: Vec<Result<(usize, f64), ImportanceError>> =
        if options.max_in_flight <= 1 || indices.len() <= 1 {
            indices.iter().map(score_one).collect()
        } else {
            // Bounded fan-out: work proceeds in chunks of at most
            // `max_in_flight` concurrent queries; assembly stays in index
            // order regardless of completion order.
            let mut out = Vec::with_capacity(indices.len());
            for chunk in indices.chunks(options.max_in_flight) {
                let chunk_results = std::thread::scope(|scope| {
                    let handles: Vec<_> = chunk
                        .iter()
                        .map(|index| scope.spawn(move || score_one(index)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("scorer thread panicked"))
                        .collect::<Vec<_>>()
                });
                out.extend(chunk_results);
            }
            out
        };

    let mut scores = Vec::with_capacity(results.len());
    for result in results {
        scores.push(result?);
    }
    ImportanceProfile::new(scores, n, label, ImportanceMethod::Deletion)
}

/// Gradient-based importance for the in-repo linear model; scores all words.
pub fn wir_gradient(
    model: &LinearTextModel,
    text: &TokenizedText,
    label: usize,
) -> Result<ImportanceProfile, ImportanceError> {
    if label >= model.k() {
        return Err(ImportanceError::InvalidLabel {
            label,
            k: model.k(),
        });
    }
    let grads = model.word_loss_gradient(text, label);
    ImportanceProfile::new(
        grads.into_iter().enumerate().collect(),
        text.n(),
        label,
        ImportanceMethod::Gradient,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{
        CachingClassifier, ConstantClassifier, CountingClassifier, LabelDistribution,
        LinearTextModel, TrainConfig,
    };
    use crate::dataset::LabeledDataset;

    fn toy_model() -> LinearTextModel {
        let mut pairs = Vec::new();
        for _ in 0..50 {
            pairs.push(("good".to_owned(), 1));
            pairs.push(("bad".to_owned(), 0));
        }
        LinearTextModel::train(&LabeledDataset::from_pairs(pairs), TrainConfig::default(), None)
            .unwrap()
    }

    #[test]
    fn constant_classifier_gives_all_zero_scores() {
        let clf = ConstantClassifier::new(LabelDistribution::new(vec![0.7, 0.3]).unwrap());
        let text = TokenizedText::tokenize("one two three");
        let profile = wir_deletion(&clf, &text, 0, &Sampler::All).unwrap();
        assert_eq!(profile.sample_size(), 3);
        assert!(profile.scores().iter().all(|&(_, s)| s == 0.0));
    }

    #[test]
    fn single_word_scores_against_empty_text_prior() {
        let model = toy_model();
        let text = TokenizedText::tokenize("good");
        let y = model.predict(&text).argmax();
        let profile = wir_deletion(&model, &text, y, &Sampler::All).unwrap();
        let full = model.predict(&text).confidence(y);
        let prior = model.predict(&TokenizedText::tokenize("")).confidence(y);
        assert_eq!(profile.scores().len(), 1);
        let (_, s) = profile.scores()[0];
        assert!((s - (full - prior)).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_an_error() {
        let model = toy_model();
        let err = wir_deletion(&model, &TokenizedText::tokenize(""), 0, &Sampler::All);
        assert!(matches!(err, Err(ImportanceError::EmptyText)));
    }

    #[test]
    fn invalid_label_is_an_error() {
        let model = toy_model();
        let err = wir_deletion(&model, &TokenizedText::tokenize("good"), 2, &Sampler::All);
        assert!(matches!(
            err,
            Err(ImportanceError::InvalidLabel { label: 2, k: 2 })
        ));
    }

    #[test]
    fn query_budget_is_sample_size_plus_one() {
        let model = toy_model();
        let counting = CountingClassifier::new(&model);
        let text = TokenizedText::tokenize("good bad good bad good bad good bad good bad");
        wir_deletion(&counting, &text, 1, &Sampler::All).unwrap();
        assert_eq!(counting.count(), 11);

        let counting = CountingClassifier::new(&model);
        let sampler = Sampler::Random { size: 3, seed: 9 };
        let p = wir_deletion(&counting, &text, 1, &sampler).unwrap();
        assert_eq!(p.sample_size(), 3);
        assert_eq!(counting.count(), 4);
    }

    #[test]
    fn random_sampler_is_deterministic_and_distinct() {
        let model = toy_model();
        let text = TokenizedText::tokenize("a b c d e f g h i j");
        let sampler = Sampler::Random { size: 2, seed: 7 };
        let p1 = wir_deletion(&model, &text, 0, &sampler).unwrap();
        let p2 = wir_deletion(&model, &text, 0, &sampler).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(p1.sample_size(), 2);
        let idx: Vec<usize> = p1.scores().iter().map(|&(i, _)| i).collect();
        assert!(idx[0] < idx[1]);
    }

    #[test]
    fn oversized_sample_scores_all_words() {
        let model = toy_model();
        let text = TokenizedText::tokenize("a b c");
        let sampler = Sampler::Random { size: 10, seed: 1 };
        let p = wir_deletion(&model, &text, 0, &sampler).unwrap();
        assert_eq!(p.sample_size(), 3);
    }

    #[test]
    fn caching_layer_does_not_change_scores() {
        let model = toy_model();
        let text = TokenizedText::tokenize("good bad good");
        let direct = wir_deletion(&model, &text, 1, &Sampler::All).unwrap();
        let cached = CachingClassifier::new(&model);
        let via_cache = wir_deletion(&cached, &text, 1, &Sampler::All).unwrap();
        assert_eq!(direct, via_cache);
    }

    #[test]
    fn concurrent_scoring_matches_sequential() {
        let model = toy_model();
        let text = TokenizedText::tokenize("good bad good bad good bad good");
        let seq = wir_deletion(&model, &text, 1, &Sampler::All).unwrap();
        let par = wir_deletion_with(
            &model,
            &text,
            1,
            &Sampler::All,
            WirOptions { max_in_flight: 4 },
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn gradient_profile_scores_every_word() {
        let model = toy_model();
        let text = TokenizedText::tokenize("good zz bad");
        let p = wir_gradient(&model, &text, 1).unwrap();
        assert_eq!(p.sample_size(), 3);
        assert_eq!(p.method(), ImportanceMethod::Gradient);
        assert!(p.scores().iter().all(|&(_, s)| s >= 0.0));
    }

    #[test]
    fn abs_scores_bounded_by_one() {
        let model = toy_model();
        let text = TokenizedText::tokenize("good good bad");
        let p = wir_deletion(&model, &text, 1, &Sampler::All).unwrap();
        let total: f64 = p.scores().iter().map(|&(_, s)| s.abs()).sum();
        assert!(total <= p.sample_size() as f64);
    }
}
