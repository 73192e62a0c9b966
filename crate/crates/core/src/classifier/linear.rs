//! Trainable linear bag-of-words classifier: tf-idf features into a softmax
//! over `k` labels. Stands in for heavyweight targets in desk-scale runs;
//! the detector only sees it through [`TextClassifier`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClassifierError, LabelDistribution, TextClassifier};
use crate::artifact::{check_format_version, VersionError, FORMAT_VERSION};
use crate::dataset::LabeledDataset;
use crate::text::TokenizedText;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("dataset contains a single class; need at least two")]
    SingleClass,
    #[error("label names ({names}) do not match label count ({k})")]
    LabelNameMismatch { names: usize, k: usize },
    #[error("model file I/O failed")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Version(#[from] VersionError),
    #[error("model file is inconsistent: {0}")]
    Inconsistent(String),
}

/// Training hyperparameters. Training is full-batch gradient descent from a
/// zero initialization, so results are bit-identical across runs with the
/// same dataset and config; the seed is carried for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.5,
            max_epochs: 350,
            seed: 0,
        }
    }
}

/// Linear softmax classifier over tf-idf features with a bias column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearTextModel {
    labels: Vec<String>,
    /// Dense word -> feature index map (indices 0..V-1 in sorted word order).
    vocabulary: BTreeMap<String, usize>,
    /// Smoothed inverse document frequency per feature: ln((1+N)/(1+df)) + 1.
    idf: Vec<f64>,
    /// k rows of V+1 columns; the last column is the bias.
    weights: Vec<Vec<f64>>,
    config: TrainConfig,
}

/// Tokens are matched case-insensitively with edge punctuation stripped, so
/// "Good," and "good" hit the same feature. Interior edits ("go0d") miss the
/// vocabulary and contribute nothing.
fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

impl LinearTextModel {
    /// Fit on a labeled dataset. `label_names`, when given, must cover every
    /// label index in the data.
    pub fn train(
        dataset: &LabeledDataset,
        config: TrainConfig,
        label_names: Option<Vec<String>>,
    ) -> Result<Self, TrainError> {
        if dataset.is_empty() {
            return Err(TrainError::EmptyDataset);
        }
        let k = dataset
            .examples()
            .iter()
            .map(|ex| ex.label)
            .max()
            .expect("non-empty")
            + 1;
        let distinct: std::collections::BTreeSet<usize> =
            dataset.examples().iter().map(|ex| ex.label).collect();
        if distinct.len() < 2 {
            return Err(TrainError::SingleClass);
        }
        let labels = match label_names {
            Some(names) if names.len() == k => names,
            Some(names) => {
                return Err(TrainError::LabelNameMismatch {
                    names: names.len(),
                    k,
                })
            }
            None => (0..k).map(|i| format!("label_{i}")).collect(),
        };

        // Vocabulary and document frequencies over normalized tokens.
        let docs: Vec<Vec<String>> = dataset
            .examples()
            .iter()
            .map(|ex| {
                TokenizedText::tokenize(&ex.text)
                    .tokens()
                    .iter()
                    .map(|t| normalize_token(t))
                    .filter(|t| !t.is_empty())
                    .collect()
            })
            .collect();
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in &docs {
            let mut seen: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
            for tok in doc {
                seen.insert(tok);
            }
            for tok in seen {
                *df.entry(tok.to_owned()).or_insert(0) += 1;
            }
        }
        let vocabulary: BTreeMap<String, usize> = df
            .keys()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let n_docs = docs.len() as f64;
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n_docs) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let v = vocabulary.len();

        // Sparse tf-idf features per document.
        let features: Vec<Vec<(usize, f64)>> = docs
            .iter()
            .map(|doc| {
                let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
                for tok in doc {
                    if let Some(&j) = vocabulary.get(tok) {
                        *counts.entry(j).or_insert(0.0) += 1.0;
                    }
                }
                counts.into_iter().map(|(j, tf)| (j, tf * idf[j])).collect()
            })
            .collect();

        // Full-batch gradient descent on cross-entropy with L2 on the
        // non-bias weights.
        let mut weights = vec![vec![0.0f64; v + 1]; k];
        let inv_n = 1.0 / n_docs;
        for _ in 0..config.max_epochs {
            let mut grad = vec![vec![0.0f64; v + 1]; k];
            for (feats, ex) in features.iter().zip(dataset.examples()) {
                let probs = softmax(&logits_sparse(&weights, feats, v));
                for (c, grad_row) in grad.iter_mut().enumerate() {
                    let err = probs[c] - if c == ex.label { 1.0 } else { 0.0 };
                    for &(j, x) in feats {
                        grad_row[j] += err * x;
                    }
                    grad_row[v] += err;
                }
            }
            for (w_row, g_row) in weights.iter_mut().zip(&grad) {
                for j in 0..=v {
                    let reg = if j < v { config.l2 * w_row[j] } else { 0.0 };
                    w_row[j] -= config.learning_rate * (g_row[j] * inv_n + reg);
                }
            }
        }

        Ok(Self {
            labels,
            vocabulary,
            idf,
            weights,
            config,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Sparse tf-idf feature vector of a text (bias not included).
    pub fn features(&self, text: &TokenizedText) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in text.tokens() {
            let norm = normalize_token(tok);
            if let Some(&j) = self.vocabulary.get(&norm) {
                *counts.entry(j).or_insert(0.0) += 1.0;
            }
        }
        counts
            .into_iter()
            .map(|(j, tf)| (j, tf * self.idf[j]))
            .collect()
    }

    /// Softmax distribution from explicit sparse features.
    pub fn distribution_from_features(&self, feats: &[(usize, f64)]) -> LabelDistribution {
        let z = logits_sparse(&self.weights, feats, self.vocabulary.len());
        LabelDistribution::new(softmax(&z)).expect("softmax output is a valid distribution")
    }

    pub fn predict(&self, text: &TokenizedText) -> LabelDistribution {
        self.distribution_from_features(&self.features(text))
    }

    /// Cross-entropy loss of `gold` given explicit sparse features.
    pub fn loss_from_features(&self, feats: &[(usize, f64)], gold: usize) -> f64 {
        let z = logits_sparse(&self.weights, feats, self.vocabulary.len());
        let probs = softmax(&z);
        -probs[gold].max(f64::MIN_POSITIVE).ln()
    }

    /// Per-word loss gradient magnitudes: for word `i` mapped to feature `j`,
    /// `|idf_j * sum_c (p_c - 1{c=gold}) * W[c][j]|`; out-of-vocabulary words
    /// get 0. Length equals the token count.
    pub fn word_loss_gradient(&self, text: &TokenizedText, gold: usize) -> Vec<f64> {
        let feats = self.features(text);
        let z = logits_sparse(&self.weights, &feats, self.vocabulary.len());
        let probs = softmax(&z);
        text.tokens()
            .iter()
            .map(|tok| {
                let norm = normalize_token(tok);
                match self.vocabulary.get(&norm) {
                    Some(&j) => {
                        let g: f64 = (0..self.k())
                            .map(|c| {
                                let err = probs[c] - if c == gold { 1.0 } else { 0.0 };
                                err * self.weights[c][j]
                            })
                            .sum();
                        (g * self.idf[j]).abs()
                    }
                    None => 0.0,
                }
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let file = PersistedModel {
            format_version: FORMAT_VERSION.to_owned(),
            model: self.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let raw = fs::read_to_string(path)?;
        let file: PersistedModel = serde_json::from_str(&raw)?;
        check_format_version(&file.format_version)?;
        file.model.validate()?;
        Ok(file.model)
    }

    fn validate(&self) -> Result<(), TrainError> {
        let v = self.vocabulary.len();
        let k = self.labels.len();
        if k < 2 {
            return Err(TrainError::Inconsistent(format!("{k} labels")));
        }
        if self.idf.len() != v {
            return Err(TrainError::Inconsistent(format!(
                "{} idf entries for {v} vocabulary words",
                self.idf.len()
            )));
        }
        if self.weights.len() != k || self.weights.iter().any(|row| row.len() != v + 1) {
            return Err(TrainError::Inconsistent("weight matrix shape".to_owned()));
        }
        if self
            .weights
            .iter()
            .flatten()
            .chain(self.idf.iter())
            .any(|x| !x.is_finite())
        {
            return Err(TrainError::Inconsistent("non-finite parameter".to_owned()));
        }
        let mut indices: Vec<usize> = self.vocabulary.values().copied().collect();
        indices.sort_unstable();
        if indices.iter().enumerate().any(|(want, &got)| want != got) {
            return Err(TrainError::Inconsistent(
                "vocabulary indices are not dense".to_owned(),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PersistedModel {
    format_version: String,
    #[serde(flatten)]
    model: LinearTextModel,
}

impl TextClassifier for LinearTextModel {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        Ok(self.predict(text))
    }

    fn num_labels(&self) -> Option<usize> {
        Some(self.k())
    }
}

fn logits_sparse(weights: &[Vec<f64>], feats: &[(usize, f64)], bias_col: usize) -> Vec<f64> {
    weights
        .iter()
        .map(|row| {
            feats.iter().map(|&(j, x)| row[j] * x).sum::<f64>() + row[bias_col]
        })
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;

    fn separable_corpus() -> LabeledDataset {
        let mut examples = Vec::new();
        for _ in 0..100 {
            examples.push(("good".to_owned(), 1));
            examples.push(("bad".to_owned(), 0));
        }
        LabeledDataset::from_pairs(examples)
    }

    #[test]
    fn separable_classes_reach_full_training_accuracy() {
        let model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        let correct = separable_corpus()
            .examples()
            .iter()
            .filter(|ex| model.predict(&TokenizedText::tokenize(&ex.text)).argmax() == ex.label)
            .count();
        assert_eq!(correct, 200);
        let good = model.predict(&TokenizedText::tokenize("good"));
        assert!(good.confidence(1) > 0.5);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let err = LinearTextModel::train(
            &LabeledDataset::from_pairs(vec![]),
            TrainConfig::default(),
            None,
        );
        assert!(matches!(err, Err(TrainError::EmptyDataset)));
    }

    #[test]
    fn single_class_is_an_error() {
        let data = LabeledDataset::from_pairs(vec![("a".into(), 1), ("b".into(), 1)]);
        let err = LinearTextModel::train(&data, TrainConfig::default(), None);
        assert!(matches!(err, Err(TrainError::SingleClass)));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let a = LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        let b = LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.idf, b.idf);
    }

    #[test]
    fn empty_text_with_zero_bias_is_uniform() {
        let mut model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        for row in &mut model.weights {
            let bias = row.len() - 1;
            row[bias] = 0.0;
        }
        let dist = model.predict(&TokenizedText::tokenize(""));
        for c in dist.confidences() {
            assert!((c - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_is_pure() {
        let model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        let text = TokenizedText::tokenize("good bad good");
        let a = model.predict(&text);
        let b = model.predict(&text);
        assert_eq!(a.confidences(), b.confidences());
    }

    #[test]
    fn normalization_strips_edges_only() {
        assert_eq!(normalize_token("Good,"), "good");
        assert_eq!(normalize_token("(movie)!"), "movie");
        assert_eq!(normalize_token("go0d"), "go0d");
        assert_eq!(normalize_token("!!"), "");
    }

    #[test]
    fn oov_words_get_zero_gradient() {
        let model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        let grads =
            model.word_loss_gradient(&TokenizedText::tokenize("good zzxqy bad"), 1);
        assert_eq!(grads.len(), 3);
        assert_eq!(grads[1], 0.0);
        assert!(grads[0] > 0.0);
    }

    #[test]
    fn zero_weight_model_has_zero_gradients() {
        let mut model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        for row in &mut model.weights {
            row.iter_mut().for_each(|w| *w = 0.0);
        }
        let grads = model.word_loss_gradient(&TokenizedText::tokenize("good bad"), 0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let corpus = LabeledDataset::from_pairs(vec![
            ("good fine movie".into(), 1),
            ("great solid plot".into(), 1),
            ("bad dull movie".into(), 0),
            ("poor weak plot".into(), 0),
            ("good plot bad acting".into(), 0),
            ("great movie fine cast".into(), 1),
        ]);
        let model = LinearTextModel::train(&corpus, TrainConfig::default(), None).unwrap();
        let text = TokenizedText::tokenize("good bad plot zzz");
        for gold in 0..2 {
            let analytic = model.word_loss_gradient(&text, gold);
            let feats = model.features(&text);
            for (i, tok) in text.tokens().iter().enumerate() {
                let norm = normalize_token(tok);
                let Some(&j) = model.vocabulary.get(&norm) else {
                    assert_eq!(analytic[i], 0.0);
                    continue;
                };
                // Central difference on feature j, scaled by idf (one more
                // occurrence of the word adds idf_j to feature j).
                let eps = 1e-6;
                let perturbed = |delta: f64| -> f64 {
                    let mut f = feats.clone();
                    match f.iter_mut().find(|(fj, _)| *fj == j) {
                        Some((_, x)) => *x += delta,
                        None => f.push((j, delta)),
                    }
                    model.loss_from_features(&f, gold)
                };
                let fd = (perturbed(eps) - perturbed(-eps)) / (2.0 * eps) * model.idf[j];
                let rel = (analytic[i] - fd.abs()).abs() / fd.abs().max(1e-12);
                assert!(
                    rel < 1e-5,
                    "word {i} ({tok}): analytic {} vs fd {}",
                    analytic[i],
                    fd.abs()
                );
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        model.save(&path).unwrap();
        let loaded = LinearTextModel::load(&path).unwrap();
        assert_eq!(model.weights, loaded.weights);
        assert_eq!(model.vocabulary, loaded.vocabulary);
    }

    #[test]
    fn load_rejects_wrong_major_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model =
            LinearTextModel::train(&separable_corpus(), TrainConfig::default(), None).unwrap();
        model.save(&path).unwrap();
        let patched = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": \"1.0\"", "\"format_version\": \"2.0\"");
        fs::write(&path, patched).unwrap();
        assert!(matches!(
            LinearTextModel::load(&path),
            Err(TrainError::Version(_))
        ));
    }
}
