//! HTTP client for classifiers served behind `POST {base}/classify`.
//!
//! Request body: `{"text": "<string>"}`. Expected response (HTTP 200 only):
//! `{"labels": ["...", ...], "confidences": [c_1, ..., c_k]}`. Anything else
//! is a query error; a 200 with a malformed payload is a protocol error.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ClassifierError, LabelDistribution, TextClassifier};
use crate::text::TokenizedText;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    /// Additional attempts after the first failed one.
    pub retries: u32,
    /// Known label names; when absent the client trusts the service's
    /// ordering and only validates distribution well-formedness.
    pub labels: Option<Vec<String>>,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout_ms: 5_000,
            retries: 2,
            labels: None,
        }
    }
}

pub struct RemoteClassifier {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ClassifyRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct ClassifyResponse {
    #[allow(dead_code)]
    labels: Vec<String>,
    confidences: Vec<f64>,
}

impl RemoteClassifier {
    pub fn new(config: RemoteConfig) -> Result<Self, ClassifierError> {
        if config.timeout_ms == 0 {
            return Err(ClassifierError::Protocol(
                "remote timeout must be positive".to_owned(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ClassifierError::Protocol(format!("client construction: {e}")))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/classify", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, text: &str) -> Result<LabelDistribution, AttemptError> {
        let response = self
            .client
            .post(self.endpoint())
            .json(&ClassifyRequest { text })
            .send()
            .map_err(|e| AttemptError::Retryable(e.to_string()))?;
        let status = response.status();
        if status != reqwest::StatusCode::OK {
            return Err(AttemptError::Retryable(format!("HTTP status {status}")));
        }
        let body: ClassifyResponse = response
            .json()
            .map_err(|e| AttemptError::Protocol(format!("unparseable response: {e}")))?;
        LabelDistribution::new(body.confidences).map_err(AttemptError::Protocol)
    }
}

enum AttemptError {
    Retryable(String),
    Protocol(String),
}

impl TextClassifier for RemoteClassifier {
    fn classify(&self, text: &TokenizedText) -> Result<LabelDistribution, ClassifierError> {
        let payload = text.raw().to_owned();
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&payload) {
                Ok(dist) => return Ok(dist),
                Err(AttemptError::Protocol(reason)) => {
                    return Err(ClassifierError::Protocol(reason))
                }
                Err(AttemptError::Retryable(reason)) => last = reason,
            }
            if attempt < attempts {
                std::thread::sleep(Duration::from_millis(25 * attempt as u64));
            }
        }
        Err(ClassifierError::Query {
            attempts,
            reason: last,
        })
    }

    fn num_labels(&self) -> Option<usize> {
        self.config.labels.as_ref().map(Vec::len)
    }
}
