//! Greedy word-importance-guided attacks at desk scale.
//!
//! Words are ranked once by deletion importance toward the true label, then
//! visited in rank order; at each word every candidate is evaluated and the
//! one minimizing the true-label confidence is kept, provided it strictly
//! decreases it (and, in adaptive mode, keeps the detector statistic at or
//! below the defender's threshold). The attack stops at the goal - a flipped
//! prediction or a confidence below the target score - or when the word list
//! or perturbation budget runs out.

mod candidates;
mod lexicon;

pub use candidates::{char_candidates, synonym_candidates};
pub use lexicon::SynonymLexicon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, CountingClassifier, TextClassifier};
use crate::detection::{detection_statistic, DetectError};
use crate::importance::{wir_deletion, ImportanceError, Sampler};
use crate::scoring::MetricKind;
use crate::text::{TextError, TokenizedText};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("cannot attack an empty text")]
    EmptyText,
    #[error("invalid attack config: {0}")]
    InvalidConfig(String),
    #[error("word-level attack requires a synonym lexicon")]
    MissingLexicon,
    #[error("lexicon line {line}: {reason}")]
    LexiconFormat { line: usize, reason: String },
    #[error("lexicon file I/O failed")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error("adaptive statistic evaluation failed")]
    Detector(#[from] DetectError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("attack suites are misaligned: {0}")]
    MisalignedSuite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    CharLevel,
    WordLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum AttackGoal {
    /// Change the predicted label.
    Flip,
    /// Drive the true label's confidence strictly below `t`.
    TargetScore(f64),
}

/// Detector awareness: admissible perturbations must keep the detector
/// statistic at or below the defender's threshold. The statistic is
/// re-evaluated with the defender's own procedure over all words (strongest
/// attacker assumption).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConstraint {
    pub threshold: f64,
    pub metric: MetricKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub goal: AttackGoal,
    /// Fraction of words the attack may perturb; the budget is
    /// `floor(fraction * n)` words.
    pub max_perturb_fraction: f64,
    pub max_candidates_per_word: usize,
    pub seed: u64,
    pub adaptive: Option<AdaptiveConstraint>,
    /// Recompute the importance ranking after each committed substitution
    /// instead of ranking once up front.
    pub rerank_each_step: bool,
}

impl AttackConfig {
    pub fn new(kind: AttackKind, goal: AttackGoal) -> Self {
        Self {
            kind,
            goal,
            max_perturb_fraction: 1.0,
            max_candidates_per_word: 32,
            seed: 0,
            adaptive: None,
            rerank_each_step: false,
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if !(self.max_perturb_fraction > 0.0 && self.max_perturb_fraction <= 1.0) {
            return Err(AttackError::InvalidConfig(format!(
                "max_perturb_fraction must be in (0, 1], got {}",
                self.max_perturb_fraction
            )));
        }
        if let AttackGoal::TargetScore(t) = self.goal {
            if !(t > 0.0 && t < 0.5) {
                return Err(AttackError::InvalidConfig(format!(
                    "target score must be in (0, 0.5), got {t}"
                )));
            }
        }
        if self.max_candidates_per_word == 0 {
            return Err(AttackError::InvalidConfig(
                "max_candidates_per_word must be positive".to_owned(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackResult {
    pub original: TokenizedText,
    pub adversarial: TokenizedText,
    pub true_label: usize,
    pub success: bool,
    /// Indices whose tokens differ from the original, ascending.
    pub perturbed_indices: Vec<usize>,
    /// Every classify call made on the attacker's behalf, ranking included.
    pub queries: u64,
    /// Confidence of the true label on the returned text.
    pub final_confidence: f64,
    /// Detector statistic of the returned text (adaptive runs only; absent
    /// when nothing was perturbed).
    pub final_statistic: Option<f64>,
}

impl AttackResult {
    /// Perturbed-word fraction of this attempt.
    pub fn perturbed_fraction(&self) -> f64 {
        if self.original.n() == 0 {
            0.0
        } else {
            self.perturbed_indices.len() as f64 / self.original.n() as f64
        }
    }
}

fn word_candidates(
    config: &AttackConfig,
    lexicon: Option<&SynonymLexicon>,
    word: &str,
    index: usize,
) -> Result<Vec<String>, AttackError> {
    let mut cands = match config.kind {
        AttackKind::CharLevel => {
            char_candidates(word, crate::seeding::mix_seed(config.seed, index as u64))
        }
        AttackKind::WordLevel => {
            let lexicon = lexicon.ok_or(AttackError::MissingLexicon)?;
            synonym_candidates(word, lexicon)
        }
    };
    cands.truncate(config.max_candidates_per_word);
    Ok(cands)
}

/// Run the greedy attack against `classifier`.
///
/// If the classifier already misclassifies the text the result is returned
/// immediately with `success = false` and no perturbations.
pub fn greedy_attack<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    true_label: usize,
    config: &AttackConfig,
    lexicon: Option<&SynonymLexicon>,
) -> Result<AttackResult, AttackError> {
    config.validate()?;
    if text.is_empty() {
        return Err(AttackError::EmptyText);
    }
    let counting = CountingClassifier::new(&classifier);
    let base = counting.classify(text)?;
    let base_confidence = base.confidence(true_label);
    if base.argmax() != true_label {
        return Ok(AttackResult {
            original: text.clone(),
            adversarial: text.clone(),
            true_label,
            success: false,
            perturbed_indices: Vec::new(),
            queries: counting.count(),
            final_confidence: base_confidence,
            final_statistic: None,
        });
    }

    let n = text.n();
    let budget = (config.max_perturb_fraction * n as f64).floor() as usize;
    let ranking = rank_by_importance(&counting, text, true_label)?;

    let mut current = text.clone();
    let mut current_confidence = base_confidence;
    let mut current_statistic = None;
    let mut perturbed: Vec<usize> = Vec::new();
    let mut attempted: Vec<bool> = vec![false; n];
    let mut success = false;
    let mut order = ranking.into_iter();

    loop {
        if success || perturbed.len() >= budget {
            break;
        }
        let index = if config.rerank_each_step && !perturbed.is_empty() {
            // Fresh ranking over the words not yet attempted.
            let fresh = rank_by_importance(&counting, &current, true_label)?;
            match fresh.into_iter().find(|&i| !attempted[i]) {
                Some(i) => i,
                None => break,
            }
        } else {
            match order.by_ref().find(|&i| !attempted[i]) {
                Some(i) => i,
                None => break,
            }
        };
        attempted[index] = true;

        let word = current.tokens()[index].clone();
        let mut best: Option<(String, f64, usize, Option<f64>)> = None;
        for candidate in word_candidates(config, lexicon, &word, index)? {
            if candidate == word {
                continue;
            }
            let trial = current.replace_word(index, &candidate)?;
            let dist = counting.classify(&trial)?;
            let confidence = dist.confidence(true_label);
            if confidence >= current_confidence {
                continue;
            }
            let statistic = match &config.adaptive {
                Some(constraint) => {
                    let (stat, _, _) = detection_statistic(
                        &counting,
                        &trial,
                        constraint.metric,
                        &Sampler::All,
                        1,
                    )?;
                    if stat > constraint.threshold {
                        continue;
                    }
                    Some(stat)
                }
                None => None,
            };
            let improves = match &best {
                Some((_, best_confidence, _, _)) => confidence < *best_confidence,
                None => true,
            };
            if improves {
                best = Some((candidate, confidence, dist.argmax(), statistic));
            }
        }

        if let Some((candidate, confidence, argmax, statistic)) = best {
            current = current.replace_word(index, &candidate)?;
            current_confidence = confidence;
            current_statistic = statistic;
            perturbed.push(index);
            success = match config.goal {
                AttackGoal::Flip => argmax != true_label,
                AttackGoal::TargetScore(t) => confidence < t,
            };
        }
    }

    perturbed.sort_unstable();
    Ok(AttackResult {
        original: text.clone(),
        adversarial: current,
        true_label,
        success,
        perturbed_indices: perturbed,
        queries: counting.count(),
        final_confidence: current_confidence,
        final_statistic: current_statistic,
    })
}

/// Word indices sorted by deletion importance toward `label`, descending;
/// score ties break toward the earlier index.
fn rank_by_importance<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    label: usize,
) -> Result<Vec<usize>, AttackError> {
    let profile = wir_deletion(classifier, text, label, &Sampler::All)?;
    let mut ranked: Vec<(usize, f64)> = profile.scores().to_vec();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(i, _)| i).collect())
}

/// Fraction of texts on which every attack in the suite failed. Each inner
/// slice holds one attack's results over the same texts, in the same order.
pub fn empirical_robustness(suite: &[Vec<AttackResult>]) -> Result<f64, AttackError> {
    let Some(first) = suite.first() else {
        return Err(AttackError::MisalignedSuite("empty suite".to_owned()));
    };
    if first.is_empty() {
        return Err(AttackError::MisalignedSuite("no texts".to_owned()));
    }
    for (i, run) in suite.iter().enumerate() {
        if run.len() != first.len() {
            return Err(AttackError::MisalignedSuite(format!(
                "attack {i} covers {} texts, expected {}",
                run.len(),
                first.len()
            )));
        }
        for (j, (a, b)) in run.iter().zip(first).enumerate() {
            if a.original.tokens() != b.original.tokens() {
                return Err(AttackError::MisalignedSuite(format!(
                    "attack {i}, text {j}: originals differ"
                )));
            }
        }
    }
    let robust = (0..first.len())
        .filter(|&j| suite.iter().all(|run| !run[j].success))
        .count();
    Ok(robust as f64 / first.len() as f64)
}
