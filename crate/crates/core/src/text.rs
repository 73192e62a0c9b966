//! Whitespace-token text representation shared by the scorer and the attackers.
//!
//! Words are whitespace-delimited tokens with any surrounding punctuation kept
//! attached, so deleting index `i` removes the whole surface form. Classifiers
//! decide their own case/punctuation normalization; none is applied here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("word index {index} out of range for text with {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("replacement token {0:?} contains whitespace")]
    WhitespaceInToken(String),
}

/// A text split into word tokens. Immutable; all edits return a new value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    raw: String,
    tokens: Vec<String>,
}

impl TokenizedText {
    /// Splits on whitespace, collapsing runs. The empty string yields an
    /// empty text.
    pub fn tokenize(raw: &str) -> Self {
        let tokens: Vec<String> = raw.split_whitespace().map(str::to_owned).collect();
        Self {
            raw: raw.to_owned(),
            tokens,
        }
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let raw = tokens.join(" ");
        Self { raw, tokens }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn n(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Canonical single-space rendering; re-tokenizes to the same token list.
    pub fn detokenized(&self) -> String {
        self.tokens.join(" ")
    }

    /// New text with token `i` removed and the rest joined by single spaces.
    pub fn delete_word(&self, i: usize) -> Result<Self, TextError> {
        if i >= self.tokens.len() {
            return Err(TextError::IndexOutOfRange {
                index: i,
                len: self.tokens.len(),
            });
        }
        let mut tokens = self.tokens.clone();
        tokens.remove(i);
        Ok(Self::from_tokens(tokens))
    }

    /// New text with token `i` replaced. The replacement must be a single
    /// non-empty whitespace-free token.
    pub fn replace_word(&self, i: usize, token: &str) -> Result<Self, TextError> {
        if i >= self.tokens.len() {
            return Err(TextError::IndexOutOfRange {
                index: i,
                len: self.tokens.len(),
            });
        }
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(TextError::WhitespaceInToken(token.to_owned()));
        }
        let mut tokens = self.tokens.clone();
        tokens[i] = token.to_owned();
        Ok(Self::from_tokens(tokens))
    }
}
