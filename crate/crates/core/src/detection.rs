//! Verdicts and threshold calibration.
//!
//! A text is flagged adversarial when its detection statistic (entropy of
//! the word-importance scores at the predicted label, by default) strictly
//! exceeds a threshold calibrated to maximize F1 on local clean/adversarial
//! samples, adversarial as the positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::TextClassifier;
use crate::importance::{wir_deletion_with, ImportanceError, Sampler, WirOptions};
use crate::scoring::{metric_score, MetricKind, ScoreError};
use crate::text::TokenizedText;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("cannot run detection on an empty text")]
    EmptyText,
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("calibration requires non-empty statistic lists")]
    EmptyStatistics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub metric: MetricKind,
    pub sampler: Sampler,
    pub threshold: f64,
    /// Cap on concurrent deletion queries (1 for local models, raise for
    /// remote endpoints).
    pub max_in_flight: usize,
}

impl DetectorConfig {
    pub fn new(metric: MetricKind, sampler: Sampler, threshold: f64) -> Result<Self, DetectError> {
        if !threshold.is_finite() {
            return Err(DetectError::InvalidConfig(format!(
                "threshold {threshold} is not finite"
            )));
        }
        if metric == MetricKind::Entropy && threshold < 0.0 {
            return Err(DetectError::InvalidConfig(format!(
                "entropy threshold must be >= 0, got {threshold}"
            )));
        }
        Ok(Self {
            metric,
            sampler,
            threshold,
            max_in_flight: 1,
        })
    }

    pub fn with_max_in_flight(mut self, max_in_flight: usize) -> Self {
        self.max_in_flight = max_in_flight.max(1);
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub statistic: f64,
    pub threshold: f64,
    pub is_adversarial: bool,
    /// Predicted label the profile was computed against.
    pub label_used: usize,
    pub sample_size: usize,
}

/// The statistic the detector would compute on `text`: the configured metric
/// over deletion importance at the predicted label. Shared with the adaptive
/// attacker so both sides evaluate the identical quantity.
pub fn detection_statistic<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    metric: MetricKind,
    sampler: &Sampler,
    max_in_flight: usize,
) -> Result<(f64, usize, usize), DetectError> {
    if text.is_empty() {
        return Err(DetectError::EmptyText);
    }
    let predicted = classifier
        .classify(text)
        .map_err(ImportanceError::BaselineQuery)?
        .argmax();
    let profile = wir_deletion_with(
        classifier,
        text,
        predicted,
        sampler,
        WirOptions { max_in_flight },
    )?;
    let statistic = metric_score(&profile, metric)?;
    Ok((statistic, predicted, profile.sample_size()))
}

/// Score a text and compare against the configured threshold (strict
/// inequality; a statistic equal to the threshold is clean).
pub fn detect<C: TextClassifier + ?Sized>(
    classifier: &C,
    text: &TokenizedText,
    config: &DetectorConfig,
) -> Result<DetectionVerdict, DetectError> {
    let (statistic, label_used, sample_size) = detection_statistic(
        classifier,
        text,
        config.metric,
        &config.sampler,
        config.max_in_flight,
    )?;
    Ok(DetectionVerdict {
        statistic,
        threshold: config.threshold,
        is_adversarial: statistic > config.threshold,
        label_used,
        sample_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub rows: Vec<ThresholdRow>,
    /// F1-maximizing threshold; ties break toward the smaller threshold
    /// (higher TPR).
    pub chosen: f64,
    pub n_clean: usize,
    pub n_adv: usize,
}

/// Sweep thresholds over midpoints between consecutive distinct pooled
/// statistics (plus one candidate below the minimum and one above the
/// maximum) and pick the F1 maximizer, adversarial as positive class.
pub fn calibrate(clean: &[f64], adversarial: &[f64]) -> Result<CalibrationReport, DetectError> {
    let mut pooled: Vec<f64> = clean.iter().chain(adversarial).copied().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    pooled.dedup();
    let (&min, &max) = match (pooled.first(), pooled.last()) {
        (Some(a), Some(b)) if !clean.is_empty() && !adversarial.is_empty() => (a, b),
        _ => return Err(DetectError::EmptyStatistics),
    };
    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(min - 1.0);
    candidates.extend(pooled.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    candidates.push(max + 1.0);
    sweep(clean, adversarial, candidates)
}

/// Fixed-grid variant: thresholds at multiples of `step` spanning the pooled
/// statistics, for grid-style reports.
pub fn calibrate_with_grid(
    clean: &[f64],
    adversarial: &[f64],
    step: f64,
) -> Result<CalibrationReport, DetectError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(DetectError::InvalidConfig(format!(
            "grid step must be positive, got {step}"
        )));
    }
    if clean.is_empty() || adversarial.is_empty() {
        return Err(DetectError::EmptyStatistics);
    }
    let min = clean
        .iter()
        .chain(adversarial)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = clean
        .iter()
        .chain(adversarial)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = (min / step).floor() as i64 - 1;
    let hi = (max / step).floor() as i64 + 1;
    let candidates: Vec<f64> = (lo..=hi).map(|k| k as f64 * step).collect();
    sweep(clean, adversarial, candidates)
}

fn sweep(
    clean: &[f64],
    adversarial: &[f64],
    candidates: Vec<f64>,
) -> Result<CalibrationReport, DetectError> {
    let mut clean_sorted = clean.to_vec();
    let mut adv_sorted = adversarial.to_vec();
    clean_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    adv_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let count_above = |sorted: &[f64], th: f64| sorted.len() - sorted.partition_point(|&x| x <= th);

    let n_adv = adversarial.len();
    let n_clean = clean.len();
    let mut rows = Vec::with_capacity(candidates.len());
    let mut chosen = candidates[0];
    let mut best_f1 = f64::NEG_INFINITY;
    for th in candidates {
        let tp = count_above(&adv_sorted, th);
        let fp = count_above(&clean_sorted, th);
        let fnn = n_adv - tp;
        let f1 = 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fnn as f64);
        let row = ThresholdRow {
            threshold: th,
            tpr: tp as f64 / n_adv as f64,
            fpr: fp as f64 / n_clean as f64,
            f1,
        };
        if row.f1 > best_f1 {
            best_f1 = row.f1;
            chosen = row.threshold;
        }
        rows.push(row);
    }
    Ok(CalibrationReport {
        rows,
        chosen,
        n_clean,
        n_adv,
    })
}

/// Rank-based (Mann-Whitney) AUC: the probability that a random adversarial
/// statistic exceeds a random clean one, ties counted 1/2.
pub fn auc(clean: &[f64], adversarial: &[f64]) -> Result<f64, DetectError> {
    if clean.is_empty() || adversarial.is_empty() {
        return Err(DetectError::EmptyStatistics);
    }
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(clean.len() + adversarial.len());
    all.extend(clean.iter().map(|&v| (v, false)));
    all.extend(adversarial.iter().map(|&v| (v, true)));
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("statistics are finite"));

    // Average ranks across tie groups, then sum adversarial ranks.
    let mut adv_rank_sum = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                adv_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let n_adv = adversarial.len() as f64;
    let n_clean = clean.len() as f64;
    let u = adv_rank_sum - n_adv * (n_adv + 1.0) / 2.0;
    Ok(u / (n_adv * n_clean))
}
