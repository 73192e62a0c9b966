//! Labeled dataset ingestion: JSONL (one `{"text", "label"}` object per
//! line) and CSV with `text,label` columns.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file I/O failed")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line} is not valid JSON")]
    Jsonl {
        line: usize,
        source: serde_json::Error,
    },
    #[error("dataset CSV is malformed")]
    Csv(#[from] csv::Error),
    #[error("unsupported dataset extension {0:?} (expected .jsonl or .csv)")]
    UnsupportedExtension(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub label: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    examples: Vec<LabeledExample>,
}

impl LabeledDataset {
    pub fn from_pairs(pairs: Vec<(String, usize)>) -> Self {
        Self {
            examples: pairs
                .into_iter()
                .map(|(text, label)| LabeledExample { text, label })
                .collect(),
        }
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of distinct labels assuming dense labels `0..k`.
    pub fn num_labels(&self) -> usize {
        self.examples
            .iter()
            .map(|ex| ex.label + 1)
            .max()
            .unwrap_or(0)
    }

    /// Split by index: the first `n` examples and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.examples.len());
        let (a, b) = self.examples.split_at(n);
        (
            Self {
                examples: a.to_vec(),
            },
            Self {
                examples: b.to_vec(),
            },
        )
    }

    /// Dispatch on extension: `.jsonl` or `.csv`.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => Self::load_jsonl(path),
            Some("csv") => Self::load_csv(path),
            other => Err(DatasetError::UnsupportedExtension(
                other.unwrap_or("").to_owned(),
            )),
        }
    }

    pub fn load_jsonl(path: &Path) -> Result<Self, DatasetError> {
        let raw = fs::read_to_string(path)?;
        let mut examples = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: LabeledExample = serde_json::from_str(line)
                .map_err(|source| DatasetError::Jsonl { line: i + 1, source })?;
            examples.push(ex);
        }
        Ok(Self { examples })
    }

    pub fn load_csv(path: &Path) -> Result<Self, DatasetError> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut examples = Vec::new();
        for record in reader.deserialize() {
            examples.push(record?);
        }
        Ok(Self { examples })
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), DatasetError> {
        let mut out = fs::File::create(path)?;
        for ex in &self.examples {
            serde_json::to_writer(&mut out, ex).map_err(|source| DatasetError::Jsonl {
                line: 0,
                source,
            })?;
            writeln!(out)?;
        }
        Ok(())
    }
}
