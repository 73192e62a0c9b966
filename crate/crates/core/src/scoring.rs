//! Collapse an importance profile into a scalar detection statistic.
//!
//! All metrics operate on the absolute values of the per-word scores. The
//! headline statistic is the entropy `H = -sum(|s| * ln|s|)` with the `|s| = 0`
//! term defined as 0; natural log is fixed so thresholds are reproducible
//! across implementations (any other base rescales every statistic by the
//! same constant and calibration absorbs it).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::importance::ImportanceProfile;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("cannot score an empty importance profile")]
    EmptyProfile,
    #[error("coefficient of variation is undefined when the mean |s| is zero")]
    ZeroMean,
}

/// The nine summary statistics available for detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Entropy,
    Mean,
    Stddev,
    Range,
    Midrange,
    Q1,
    Q3,
    QuartileDeviation,
    CoeffVariation,
}

impl MetricKind {
    pub const ALL: [MetricKind; 9] = [
        MetricKind::Entropy,
        MetricKind::Mean,
        MetricKind::Stddev,
        MetricKind::Range,
        MetricKind::Midrange,
        MetricKind::Q1,
        MetricKind::Q3,
        MetricKind::QuartileDeviation,
        MetricKind::CoeffVariation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Entropy => "entropy",
            MetricKind::Mean => "mean",
            MetricKind::Stddev => "stddev",
            MetricKind::Range => "range",
            MetricKind::Midrange => "midrange",
            MetricKind::Q1 => "q1",
            MetricKind::Q3 => "q3",
            MetricKind::QuartileDeviation => "quartile_deviation",
            MetricKind::CoeffVariation => "coeff_variation",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricKind::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Entropy of the absolute scores: `-sum(|s| * ln|s|)`, with `0 * ln 0 := 0`.
///
/// Nonnegative for scores in `[-1, 1]`.
pub fn entropy_score(profile: &ImportanceProfile) -> Result<f64, ScoreError> {
    metric_score(profile, MetricKind::Entropy)
}

/// Apply one of the nine metrics to the absolute scores of a profile.
pub fn metric_score(profile: &ImportanceProfile, kind: MetricKind) -> Result<f64, ScoreError> {
    if profile.sample_size() == 0 {
        return Err(ScoreError::EmptyProfile);
    }
    let abs: Vec<f64> = profile.scores().iter().map(|&(_, s)| s.abs()).collect();
    match kind {
        MetricKind::Entropy => Ok(entropy_of_abs(&abs)),
        MetricKind::Mean => Ok(mean(&abs)),
        MetricKind::Stddev => Ok(population_stddev(&abs)),
        MetricKind::Range => {
            let (lo, hi) = min_max(&abs);
            Ok(hi - lo)
        }
        MetricKind::Midrange => {
            let (lo, hi) = min_max(&abs);
            Ok((hi + lo) / 2.0)
        }
        MetricKind::Q1 => Ok(quartile(&abs, 0.25)),
        MetricKind::Q3 => Ok(quartile(&abs, 0.75)),
        MetricKind::QuartileDeviation => Ok(quartile(&abs, 0.75) - quartile(&abs, 0.25)),
        MetricKind::CoeffVariation => {
            let m = mean(&abs);
            if m == 0.0 {
                return Err(ScoreError::ZeroMean);
            }
            Ok(population_stddev(&abs) / m)
        }
    }
}

fn entropy_of_abs(abs: &[f64]) -> f64 {
    abs.iter()
        .map(|&a| if a > 0.0 { -a * a.ln() } else { 0.0 })
        .sum()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_stddev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    (lo, hi)
}

/// Quartile by linear interpolation between closest ranks, endpoints
/// inclusive: position `q * (m - 1)` in the sorted data.
fn quartile(xs: &[f64], q: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::{ImportanceMethod, ImportanceProfile};
    use proptest::prelude::*;

    fn profile(scores: &[f64]) -> ImportanceProfile {
        ImportanceProfile::new(
            scores.iter().copied().enumerate().collect(),
            scores.len(),
            0,
            ImportanceMethod::Deletion,
        )
        .unwrap()
    }

    #[test]
    fn entropy_of_zeros_is_zero() {
        assert_eq!(entropy_score(&profile(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_one_is_zero() {
        assert_eq!(entropy_score(&profile(&[1.0])).unwrap(), 0.0);
    }

    #[test]
    fn entropy_of_two_halves_is_ln_2() {
        let h = entropy_score(&profile(&[0.5, 0.5])).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12, "got {h}");
    }

    #[test]
    fn entropy_uses_absolute_scores() {
        let pos = entropy_score(&profile(&[0.3, 0.2])).unwrap();
        let neg = entropy_score(&profile(&[-0.3, -0.2])).unwrap();
        assert_eq!(pos, neg);
    }

    #[test]
    fn empty_profile_is_an_error() {
        let p = ImportanceProfile::new(vec![], 3, 0, ImportanceMethod::Deletion).unwrap();
        assert_eq!(entropy_score(&p), Err(ScoreError::EmptyProfile));
        assert_eq!(
            metric_score(&p, MetricKind::Mean),
            Err(ScoreError::EmptyProfile)
        );
    }

    #[test]
    fn mean_of_simple_pair() {
        let v = metric_score(&profile(&[0.1, 0.3]), MetricKind::Mean).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_vector_has_zero_spread() {
        let p = profile(&[0.2, 0.2, 0.2]);
        // The mean of three 0.2s carries one ulp of rounding; the spread
        // metrics must still vanish to within that.
        assert!(metric_score(&p, MetricKind::Stddev).unwrap() < 1e-12);
        assert_eq!(metric_score(&p, MetricKind::Range).unwrap(), 0.0);
        assert_eq!(
            metric_score(&p, MetricKind::QuartileDeviation).unwrap(),
            0.0
        );
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let p = profile(&[0.0, 0.1, 0.2, 0.3]);
        let q1 = metric_score(&p, MetricKind::Q1).unwrap();
        let q3 = metric_score(&p, MetricKind::Q3).unwrap();
        assert!((q1 - 0.075).abs() < 1e-12, "q1 = {q1}");
        assert!((q3 - 0.225).abs() < 1e-12, "q3 = {q3}");
        let qd = metric_score(&p, MetricKind::QuartileDeviation).unwrap();
        assert!((qd - 0.15).abs() < 1e-12, "qd = {qd}");
    }

    #[test]
    fn coeff_variation_needs_nonzero_mean() {
        assert_eq!(
            metric_score(&profile(&[0.0, 0.0]), MetricKind::CoeffVariation),
            Err(ScoreError::ZeroMean)
        );
        let v = metric_score(&profile(&[0.1, 0.3]), MetricKind::CoeffVariation).unwrap();
        assert!((v - 0.5).abs() < 1e-12, "got {v}"); // std 0.1, mean 0.2
    }

    #[test]
    fn metric_names_round_trip() {
        for kind in MetricKind::ALL {
            assert_eq!(kind.name().parse::<MetricKind>().unwrap(), kind);
        }
        assert!("median".parse::<MetricKind>().is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_permutation_invariant(
            mut scores in proptest::collection::vec(-1.0f64..=1.0, 1..20),
            shift in 0usize..20,
        ) {
            let before = profile(&scores);
            let len = scores.len();
            scores.rotate_left(shift % len);
            let after = profile(&scores);
            for kind in MetricKind::ALL {
                let a = metric_score(&before, kind);
                let b = metric_score(&after, kind);
                match (a, b) {
                    (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12, "{kind}: {x} vs {y}"),
                    (Err(e), Err(f)) => prop_assert_eq!(e, f),
                    other => prop_assert!(false, "{:?}", other),
                }
            }
        }

        #[test]
        fn appending_zero_never_changes_entropy(
            scores in proptest::collection::vec(-1.0f64..=1.0, 1..20),
        ) {
            let h = entropy_score(&profile(&scores)).unwrap();
            let mut extended = scores.clone();
            extended.push(0.0);
            let h2 = entropy_score(&profile(&extended)).unwrap();
            prop_assert_eq!(h, h2);
        }

        #[test]
        fn entropy_bounded_by_sample_size_over_e(
            scores in proptest::collection::vec(-1.0f64..=1.0, 1..50),
        ) {
            let h = entropy_score(&profile(&scores)).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= scores.len() as f64 / std::f64::consts::E + 1e-12);
        }

        #[test]
        fn entropy_zero_iff_scores_are_zero_or_one(
            scores in proptest::collection::vec(
                prop_oneof![Just(0.0f64), Just(1.0), Just(-1.0), -1.0f64..=1.0],
                1..20,
            ),
        ) {
            let h = entropy_score(&profile(&scores)).unwrap();
            let degenerate = scores.iter().all(|s| s.abs() == 0.0 || s.abs() == 1.0);
            prop_assert_eq!(h == 0.0, degenerate, "h = {}, scores = {:?}", h, scores);
        }
    }
}
