//! The target model abstraction: anything that maps a text to a confidence
//! vector over labels. Ships a trainable linear bag-of-words model for
//! desk-scale experiments and an HTTP client for remote classifiers.

mod linear;
mod remote;

pub use linear::{LinearTextModel, TrainConfig, TrainError};
pub use remote::{RemoteClassifier, RemoteConfig};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::TokenizedText;

#[derive(Debug, Error)]
pub enum ClassifierError {
    /// The query could not be completed (transport failure, non-200 status).
    #[error("classifier query failed after {attempts} attempt(s): {reason}")]
    Query { attempts: u32, reason: String },
    /// The service answered, but the payload violates the protocol.
    #[error("classifier protocol error: {0}")]
    Protocol(String),
}

/// Confidence vector over `k >= 2` labels; entries in `[0, 1]` summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelDistribution {
    confidences: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(confidences: Vec<f64>) -> Result<Self, String> {
        if confidences.len() < 2 {
            return Err(format!(
                "a label distribution needs at least 2 labels, got {}",
                confidences.len()
            ));
        }
        if confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(format!("confidences outside [0, 1]: {confidences:?}"));
        }
        let sum: f64 = confidences.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("confidences sum to {sum}, expected 1"));
        }
        Ok(Self { confidences })
    }

    pub fn k(&self) -> usize {
        self.confidences.len()
    }

    pub fn confidence(&self, label: usize) -> f64 {
        self.confidences[label]
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    /// Index of the highest confidence; ties break toward the smaller index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.confidences.iter().enumerate() {
            if c > self.confidences[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for LabelDistribution {
    type Error = String;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LabelDistribution> for Vec<f64> {
    fn from(d: LabelDistribution) -> Self {
        d.confidences
    }
}

/// A black-box text classifier. Implementations must be safe to query
/// concurrently; repeated identical calls must return identical
/// distributions.
pub trait TextClassifier: Send + Sync {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError>;

    /// Label count, when known up front.
    fn num_labels(&self) -> Option<usize> {
        None
    }
}

impl<T: TextClassifier + ?Sized> TextClassifier for &T {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        (**self).classify(text)
    }

    fn num_labels(&self) -> Option<usize> {
        (**self).num_labels()
    }
}

/// Wrapper that counts every `classify` call. Used to audit query budgets.
pub struct CountingClassifier<'a> {
    inner: &'a dyn TextClassifier,
    count: AtomicU64,
}

impl<'a> CountingClassifier<'a> {
    pub fn new(inner: &'a dyn TextClassifier) -> Self {
        Self {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::SeqCst)
    }
}

impl TextClassifier for CountingClassifier<'_> {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.classify(text)
    }

    fn num_labels(&self) -> Option<usize> {
        self.inner.num_labels()
    }
}

/// Memoizes classify calls by the canonical token rendering. Useful in front
/// of remote endpoints, where attack loops re-query identical texts.
pub struct CachingClassifier<C> {
    inner: C,
    cache: Mutex<HashMap<String, LabelDistribution>>,
}

impl<C: TextClassifier> CachingClassifier<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<C: TextClassifier> TextClassifier for CachingClassifier<C> {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        let key = text.detokenized();
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let dist = self.inner.classify(text)?;
        self.cache
            .lock()
            .expect("cache poisoned")
            .insert(key, dist.clone());
        Ok(dist)
    }

    fn num_labels(&self) -> Option<usize> {
        self.inner.num_labels()
    }
}

/// Returns the same distribution for every input.
pub struct ConstantClassifier {
    dist: LabelDistribution,
}

impl ConstantClassifier {
    pub fn new(dist: LabelDistribution) -> Self {
        Self { dist }
    }

    pub fn uniform(k: usize) -> Self {
        let dist = LabelDistribution::new(vec![1.0 / k as f64; k]).expect("uniform is valid");
        Self { dist }
    }
}

impl TextClassifier for ConstantClassifier {
    fn classify(&self, _text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        Ok(self.dist.clone())
    }

    fn num_labels(&self) -> Option<usize> {
        Some(self.dist.k())
    }
}
