//! Option resolution: command-line flags override values from an optional
//! TOML config file, which override built-in defaults. Every command echoes
//! the fully-resolved values into its output artifact.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use textsentry::importance::Sampler;
use textsentry::scoring::MetricKind;
use textsentry::seeding::mix_seed;

/// Keys accepted in the `--config` TOML file. All optional; flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub metric: Option<String>,
    pub sample_size: Option<String>,
    pub attack: Option<String>,
    pub goal: Option<String>,
    pub target_score: Option<f64>,
    pub budget: Option<f64>,
    pub lexicon: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let raw = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                toml::from_str(&raw)
                    .with_context(|| format!("parsing config file {}", path.display()))
            }
        }
    }
}

/// `all` or a word count for the importance sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    All,
    Words(usize),
}

impl Serialize for SampleSize {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SampleSize::All => serializer.serialize_str("all"),
            SampleSize::Words(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl SampleSize {
    pub fn parse(raw: &str) -> Result<Self> {
        if raw == "all" {
            Ok(Self::All)
        } else {
            let n: usize = raw
                .parse()
                .with_context(|| format!("sample size must be `all` or an integer, got {raw:?}"))?;
            Ok(Self::Words(n))
        }
    }

    /// Sampler with a per-run seed; harness code further derives per-text
    /// seeds from it.
    pub fn sampler(&self, seed: u64) -> Sampler {
        match *self {
            SampleSize::All => Sampler::All,
            SampleSize::Words(size) => Sampler::Random {
                size,
                seed: mix_seed(seed, 0x5A3D),
            },
        }
    }
}

/// Flag value if present, else file value, else default.
pub fn resolve<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn resolve_metric(flag: Option<MetricKind>, file: &FileConfig) -> Result<MetricKind> {
    match (flag, &file.metric) {
        (Some(m), _) => Ok(m),
        (None, Some(raw)) => raw
            .parse::<MetricKind>()
            .map_err(|e| anyhow::anyhow!("config file metric: {e}")),
        (None, None) => Ok(MetricKind::Entropy),
    }
}

pub fn resolve_sample_size(flag: Option<&str>, file: &FileConfig) -> Result<SampleSize> {
    match (flag, &file.sample_size) {
        (Some(raw), _) => SampleSize::parse(raw),
        (None, Some(raw)) => SampleSize::parse(raw),
        (None, None) => Ok(SampleSize::All),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        assert_eq!(resolve(Some(3u64), Some(2), 1), 3);
        assert_eq!(resolve(None, Some(2u64), 1), 2);
        assert_eq!(resolve::<u64>(None, None, 1), 1);
    }

    #[test]
    fn sample_size_parses_all_and_numbers() {
        assert_eq!(SampleSize::parse("all").unwrap(), SampleSize::All);
        assert_eq!(SampleSize::parse("10").unwrap(), SampleSize::Words(10));
        assert!(SampleSize::parse("ten").is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = toml::from_str::<FileConfig>("sede = 7\n");
        assert!(err.is_err());
    }
}
