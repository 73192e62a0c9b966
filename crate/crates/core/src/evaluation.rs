//! Experiment orchestration: attack a labeled eval set, score the detector,
//! and aggregate the quantitative metrics into a reproducible report.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{greedy_attack, AttackConfig, AttackError, AttackResult, SynonymLexicon};
use crate::classifier::{ClassifierError, TextClassifier};
use crate::detection::{detection_statistic, DetectError, DetectorConfig};
use crate::importance::Sampler;
use crate::seeding::mix_seed;
use crate::text::TokenizedText;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no evaluable texts (all empty or absent)")]
    NoTexts,
    #[error("label sets differ: target has {target} labels, surrogate has {surrogate}")]
    LabelSetMismatch { target: usize, surrogate: usize },
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error("classifier failed on eval text {index}")]
    Classifier {
        index: usize,
        #[source]
        source: ClassifierError,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentOptions {
    /// Base seed; per-text attack and sampler seeds are derived from it, so
    /// reports are identical for any `jobs` value.
    pub seed: u64,
    pub jobs: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { seed: 0, jobs: 1 }
    }
}

/// Clean/adversarial statistic pair for one successfully attacked text.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairMargin {
    pub clean: f64,
    pub adversarial: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub attack: String,
    /// Eval texts considered.
    pub n_texts: usize,
    /// Texts the classifier got right, i.e. the ASR denominator.
    pub n_attacked: usize,
    pub n_successes: usize,
    pub asr: Option<f64>,
    /// Mean perturbed-word fraction over successful attacks.
    pub mean_pw: Option<f64>,
    /// Detector AUC between clean and successfully-attacked statistics;
    /// absent when there are no successes rather than a sentinel value.
    pub auc: Option<f64>,
    pub threshold: f64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub f1: Option<f64>,
    pub attack_queries_total: u64,
    pub attack_queries_mean: Option<f64>,
    /// Raw statistic values for external plotting.
    pub clean_statistics: Vec<f64>,
    pub adversarial_statistics: Vec<f64>,
    pub pair_margins: Vec<PairMargin>,
    pub seed: u64,
    pub attack_config: AttackConfig,
    pub detector_config: DetectorConfig,
}

struct PerText {
    attacked: bool,
    result: Option<AttackResult>,
    clean_stat: Option<f64>,
    adv_stat: Option<f64>,
}

fn per_text_sampler(base: &Sampler, seed: u64, index: usize) -> Sampler {
    match *base {
        Sampler::All => Sampler::All,
        Sampler::Random { size, .. } => Sampler::Random {
            size,
            seed: mix_seed(seed, 2 * index as u64 + 1),
        },
    }
}

fn run_pool<T: Send + Sync>(
    jobs: usize,
    items: Vec<T>,
    work: impl Fn(usize, &T) -> Result<PerText, EvalError> + Sync,
) -> Result<Vec<PerText>, EvalError> {
    if jobs <= 1 {
        return items
            .iter()
            .enumerate()
            .map(|(i, item)| work(i, item))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool construction");
    pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .map(|(i, item)| work(i, item))
            .collect()
    })
}

/// Attack every correctly-classified eval text, then measure how well the
/// detector separates the originals from the successful adversarials.
pub fn run_detection_experiment<C: TextClassifier + ?Sized>(
    classifier: &C,
    texts: &[(String, usize)],
    attack_config: &AttackConfig,
    detector_config: &DetectorConfig,
    lexicon: Option<&SynonymLexicon>,
    options: ExperimentOptions,
) -> Result<ExperimentReport, EvalError> {
    let tokenized: Vec<(TokenizedText, usize)> = texts
        .iter()
        .map(|(raw, label)| (TokenizedText::tokenize(raw), *label))
        .filter(|(t, _)| !t.is_empty())
        .collect();
    if tokenized.is_empty() {
        return Err(EvalError::NoTexts);
    }

    let outcomes = run_pool(options.jobs, tokenized, |i, (text, label)| {
        let prediction = classifier
            .classify(text)
            .map_err(|source| EvalError::Classifier { index: i, source })?;
        if prediction.argmax() != *label {
            return Ok(PerText {
                attacked: false,
                result: None,
                clean_stat: None,
                adv_stat: None,
            });
        }
        let mut config = attack_config.clone();
        config.seed = mix_seed(options.seed, 2 * i as u64);
        let result = greedy_attack(classifier, text, *label, &config, lexicon)?;

        let sampler = per_text_sampler(&detector_config.sampler, options.seed, i);
        let (clean_stat, _, _) = detection_statistic(
            classifier,
            text,
            detector_config.metric,
            &sampler,
            detector_config.max_in_flight,
        )?;
        let adv_stat = if result.success {
            let (s, _, _) = detection_statistic(
                classifier,
                &result.adversarial,
                detector_config.metric,
                &sampler,
                detector_config.max_in_flight,
            )?;
            Some(s)
        } else {
            None
        };
        Ok(PerText {
            attacked: true,
            result: Some(result),
            clean_stat: Some(clean_stat),
            adv_stat,
        })
    })?;

    Ok(assemble_report(
        attack_label(attack_config),
        texts.len(),
        outcomes,
        attack_config,
        detector_config,
        options.seed,
    ))
}

/// Generate attacks on the surrogate, then measure success and detection on
/// the target. Success means the target's prediction flipped.
pub fn run_transfer_experiment<T, S>(
    target: &T,
    surrogate: &S,
    texts: &[(String, usize)],
    attack_config: &AttackConfig,
    detector_config: &DetectorConfig,
    lexicon: Option<&SynonymLexicon>,
    options: ExperimentOptions,
) -> Result<ExperimentReport, EvalError>
where
    T: TextClassifier + ?Sized,
    S: TextClassifier + ?Sized,
{
    if let (Some(t), Some(s)) = (target.num_labels(), surrogate.num_labels()) {
        if t != s {
            return Err(EvalError::LabelSetMismatch {
                target: t,
                surrogate: s,
            });
        }
    }
    let tokenized: Vec<(TokenizedText, usize)> = texts
        .iter()
        .map(|(raw, label)| (TokenizedText::tokenize(raw), *label))
        .filter(|(t, _)| !t.is_empty())
        .collect();
    if tokenized.is_empty() {
        return Err(EvalError::NoTexts);
    }

    let outcomes = run_pool(options.jobs, tokenized, |i, (text, label)| {
        let target_prediction = target
            .classify(text)
            .map_err(|source| EvalError::Classifier { index: i, source })?;
        if target_prediction.argmax() != *label {
            return Ok(PerText {
                attacked: false,
                result: None,
                clean_stat: None,
                adv_stat: None,
            });
        }
        let mut config = attack_config.clone();
        config.seed = mix_seed(options.seed, 2 * i as u64);
        let surrogate_result = greedy_attack(surrogate, text, *label, &config, lexicon)?;

        // Transfer: the candidate only counts if the surrogate attack
        // produced one and it flips the target.
        let mut result = surrogate_result;
        if result.success {
            let transferred = target
                .classify(&result.adversarial)
                .map_err(|source| EvalError::Classifier { index: i, source })?;
            result.success = transferred.argmax() != *label;
            result.final_confidence = transferred.confidence(*label);
        }

        let sampler = per_text_sampler(&detector_config.sampler, options.seed, i);
        let (clean_stat, _, _) = detection_statistic(
            target,
            text,
            detector_config.metric,
            &sampler,
            detector_config.max_in_flight,
        )?;
        let adv_stat = if result.success {
            let (s, _, _) = detection_statistic(
                target,
                &result.adversarial,
                detector_config.metric,
                &sampler,
                detector_config.max_in_flight,
            )?;
            Some(s)
        } else {
            None
        };
        Ok(PerText {
            attacked: true,
            result: Some(result),
            clean_stat: Some(clean_stat),
            adv_stat,
        })
    })?;

    Ok(assemble_report(
        format!("transfer/{}", attack_label(attack_config)),
        texts.len(),
        outcomes,
        attack_config,
        detector_config,
        options.seed,
    ))
}

fn attack_label(config: &AttackConfig) -> String {
    let kind = match config.kind {
        crate::attack::AttackKind::CharLevel => "char_level",
        crate::attack::AttackKind::WordLevel => "word_level",
    };
    let goal = match config.goal {
        crate::attack::AttackGoal::Flip => "flip".to_owned(),
        crate::attack::AttackGoal::TargetScore(t) => format!("target_score_{t}"),
    };
    let adaptive = if config.adaptive.is_some() {
        "/adaptive"
    } else {
        ""
    };
    format!("{kind}/{goal}{adaptive}")
}

fn assemble_report(
    attack: String,
    n_texts: usize,
    outcomes: Vec<PerText>,
    attack_config: &AttackConfig,
    detector_config: &DetectorConfig,
    seed: u64,
) -> ExperimentReport {
    let attacked: Vec<&PerText> = outcomes.iter().filter(|o| o.attacked).collect();
    let n_attacked = attacked.len();
    let successes: Vec<&AttackResult> = attacked
        .iter()
        .filter_map(|o| o.result.as_ref())
        .filter(|r| r.success)
        .collect();
    let n_successes = successes.len();

    let clean_statistics: Vec<f64> = attacked.iter().filter_map(|o| o.clean_stat).collect();
    let adversarial_statistics: Vec<f64> = attacked.iter().filter_map(|o| o.adv_stat).collect();
    let pair_margins: Vec<PairMargin> = attacked
        .iter()
        .filter_map(|o| match (o.clean_stat, o.adv_stat) {
            (Some(clean), Some(adversarial)) => Some(PairMargin {
                clean,
                adversarial,
            }),
            _ => None,
        })
        .collect();

    let asr = (n_attacked > 0).then(|| n_successes as f64 / n_attacked as f64);
    let mean_pw = (n_successes > 0).then(|| {
        successes.iter().map(|r| r.perturbed_fraction()).sum::<f64>() / n_successes as f64
    });
    let auc = if clean_statistics.is_empty() || adversarial_statistics.is_empty() {
        None
    } else {
        crate::detection::auc(&clean_statistics, &adversarial_statistics).ok()
    };

    let threshold = detector_config.threshold;
    let above = |stats: &[f64]| stats.iter().filter(|&&s| s > threshold).count();
    let fpr = (!clean_statistics.is_empty())
        .then(|| above(&clean_statistics) as f64 / clean_statistics.len() as f64);
    let (tpr, f1) = if adversarial_statistics.is_empty() {
        (None, None)
    } else {
        let tp = above(&adversarial_statistics) as f64;
        let fp = above(&clean_statistics) as f64;
        let fnn = adversarial_statistics.len() as f64 - tp;
        (
            Some(tp / adversarial_statistics.len() as f64),
            Some(2.0 * tp / (2.0 * tp + fp + fnn)),
        )
    };

    let attack_queries_total: u64 = attacked
        .iter()
        .filter_map(|o| o.result.as_ref())
        .map(|r| r.queries)
        .sum();
    let attack_queries_mean =
        (n_attacked > 0).then(|| attack_queries_total as f64 / n_attacked as f64);

    ExperimentReport {
        attack,
        n_texts,
        n_attacked,
        n_successes,
        asr,
        mean_pw,
        auc,
        threshold,
        tpr,
        fpr,
        f1,
        attack_queries_total,
        attack_queries_mean,
        clean_statistics,
        adversarial_statistics,
        pair_margins,
        seed,
        attack_config: attack_config.clone(),
        detector_config: detector_config.clone(),
    }
}
