//! Versioning for persisted artifacts (models, calibration files, reports).

use thiserror::Error;

/// Version written into every persisted artifact.
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VersionError {
    #[error("artifact is missing a format_version field")]
    Missing,
    #[error("malformed format_version {0:?}")]
    Malformed(String),
    #[error("unsupported artifact major version {found} (supported: {supported})")]
    UnsupportedMajor { found: String, supported: String },
}

/// Accepts any version with the same major component as [`FORMAT_VERSION`].
pub fn check_format_version(version: &str) -> Result<(), VersionError> {
    let major = |v: &str| v.split('.').next().map(str::to_owned);
    let found = major(version).filter(|m| !m.is_empty() && m.chars().all(|c| c.is_ascii_digit()));
    let Some(found) = found else {
        return Err(VersionError::Malformed(version.to_owned()));
    };
    let supported = major(FORMAT_VERSION).expect("const version is well-formed");
    if found != supported {
        return Err(VersionError::UnsupportedMajor {
            found,
            supported,
        });
    }
    Ok(())
}
