//! textsentry: model-agnostic adversarial text detection.
//!
//! The detector scores each word of an input by how much its deletion moves
//! the classifier's confidence in the predicted label, summarizes the
//! absolute scores with an entropy statistic, and flags texts whose
//! statistic exceeds a calibrated threshold. The classifier is treated as a
//! black box, so the same detector runs against the bundled linear model or
//! any remote endpoint.
//!
//! The crate also ships what is needed to exercise the detector end to end:
//! greedy character- and word-level attacks (including detector-aware
//! adaptive variants), a synthetic corpus generator, threshold calibration,
//! and an experiment harness computing ASR / AUC / perturbed-word metrics.

pub mod artifact;
pub mod attack;
pub mod classifier;
pub mod dataset;
pub mod detection;
pub mod evaluation;
pub mod importance;
pub mod scoring;
pub mod seeding;
pub mod synth;
pub mod text;

pub use attack::{
    empirical_robustness, greedy_attack, AdaptiveConstraint, AttackConfig, AttackGoal, AttackKind,
    AttackResult, SynonymLexicon,
};
pub use classifier::{
    CachingClassifier, ConstantClassifier, CountingClassifier, LabelDistribution, LinearTextModel,
    RemoteClassifier, RemoteConfig, TextClassifier, TrainConfig,
};
pub use dataset::{LabeledDataset, LabeledExample};
pub use detection::{
    auc, calibrate, calibrate_with_grid, detect, detection_statistic, CalibrationReport,
    DetectionVerdict, DetectorConfig, ThresholdRow,
};
pub use evaluation::{
    run_detection_experiment, run_transfer_experiment, ExperimentOptions, ExperimentReport,
};
pub use importance::{wir_deletion, wir_gradient, ImportanceProfile, Sampler};
pub use scoring::{entropy_score, metric_score, MetricKind};
pub use synth::{synth_dataset, SynthConfig, SynthProfile};
pub use text::TokenizedText;
