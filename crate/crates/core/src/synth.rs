//! Deterministic two-class sentiment-like corpus generator.
//!
//! Texts are templated review sentences: class-indicative adjectives in
//! three strength tiers plus neutral nouns and function words. Most texts
//! carry several same-class adjectives (redundant signal); some carry a
//! concessive opposite-class clause; a "contrast" shape leans on a single
//! dominant adjective against an opposite one. Labels alternate, so any
//! even-sized corpus is exactly balanced.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledDataset;
use crate::seeding::mix_seed;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("synthetic corpus needs size >= 2, got {0}")]
    TooSmall(usize),
}

/// Vocabulary richness of the generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthProfile {
    /// Full tiered vocabulary and all sentence shapes.
    #[default]
    Standard,
    /// Tiny vocabulary, short sentences; handy for quick smoke tests.
    Tiny,
}

impl std::str::FromStr for SynthProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "tiny" => Ok(Self::Tiny),
            other => Err(format!("unknown profile {other:?} (standard|tiny)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    pub seed: u64,
    pub profile: SynthProfile,
}

// Adjective tiers. Strong words appear only in their own class; weak words
// mostly in their own class with occasional concessive use in the other.
// Each tier deliberately includes polysemous words whose synonyms lean the
// other way (hilarious/ridiculous, grim/gritty, slow/deliberate), the lever
// real synonym attacks exploit.
const STRONG_POS: &[&str] = &[
    "excellent",
    "wonderful",
    "fantastic",
    "amazing",
    "superb",
    "brilliant",
    "outstanding",
    "marvelous",
    "terrific",
    "classic",
];
// Dominant adjectives for contrast texts. Each has lexicon synonyms leaning
// the other way (hilarious/ridiculous, grim/gritty), the lever real synonym
// attacks exploit; they appear only in the compact contrast shape.
const CONTRAST_POS: &[&str] = &["hilarious", "thrilling", "striking", "intense", "daring"];
const MID_POS: &[&str] = &[
    "good",
    "great",
    "enjoyable",
    "impressive",
    "engaging",
    "charming",
    "satisfying",
    "entertaining",
    "delightful",
    "gripping",
];
const WEAK_POS: &[&str] = &[
    "fine",
    "decent",
    "solid",
    "pleasant",
    "nice",
    "watchable",
    "likable",
    "passable",
    "deliberate",
    "quiet",
    "subtle",
    "modest",
    "surreal",
    "gritty",
    "campy",
    "energetic",
    "lively",
];
const STRONG_NEG: &[&str] = &[
    "terrible",
    "awful",
    "horrible",
    "dreadful",
    "atrocious",
    "abysmal",
    "unbearable",
    "appalling",
    "disastrous",
    "unwatchable",
    "ridiculous",
];
const CONTRAST_NEG: &[&str] = &["predictable", "absurd", "grim", "chaotic", "cheesy"];
const MID_NEG: &[&str] = &[
    "bad",
    "poor",
    "boring",
    "disappointing",
    "tedious",
    "annoying",
    "messy",
    "mediocre",
    "lackluster",
];
const WEAK_NEG: &[&str] = &[
    "dull",
    "bland",
    "slow",
    "forgettable",
    "shallow",
    "uneven",
    "clumsy",
    "flat",
    "tense",
    "sentimental",
    "showy",
    "silly",
    "quaint",
    "safe",
    "alarming",
    "shocking",
    "exhausting",
    "reckless",
    "numbing",
];
const NOUNS: &[&str] = &[
    "movie",
    "film",
    "plot",
    "story",
    "cast",
    "acting",
    "script",
    "dialogue",
    "music",
    "score",
    "pacing",
    "ending",
    "director",
    "visuals",
    "performance",
    "characters",
    "humor",
    "action",
    "atmosphere",
    "scenery",
    "editing",
    "premise",
    "soundtrack",
    "writing",
];
const INTENSIFIERS: &[&str] = &["really", "quite", "truly", "very", "rather", "honestly"];
const TAILS: &[&str] = &[
    "from start to finish",
    "in my opinion",
    "all things considered",
    "on every level",
    "for the most part",
    "as far as i can tell",
];

#[derive(Clone, Copy)]
enum Tier {
    Contrast,
    Strong,
    Mid,
    Weak,
}

fn adjective(rng: &mut ChaCha8Rng, label: usize, tier: Tier) -> &'static str {
    let pool = match (label, tier) {
        (1, Tier::Contrast) => CONTRAST_POS,
        (0, Tier::Contrast) => CONTRAST_NEG,
        (1, Tier::Strong) => STRONG_POS,
        (1, Tier::Mid) => MID_POS,
        (1, Tier::Weak) => WEAK_POS,
        (0, Tier::Strong) => STRONG_NEG,
        (0, Tier::Mid) => MID_NEG,
        (0, Tier::Weak) => WEAK_NEG,
        _ => unreachable!("two labels"),
    };
    pool.choose(rng).expect("pools are non-empty")
}

fn noun(rng: &mut ChaCha8Rng) -> &'static str {
    NOUNS.choose(rng).expect("non-empty")
}

/// `the {noun} was {adj}` with optional intensifier.
fn clause(rng: &mut ChaCha8Rng, label: usize, tier: Tier, out: &mut Vec<String>) {
    out.push("the".into());
    out.push(noun(rng).into());
    out.push(if rng.random_bool(0.5) { "was" } else { "felt" }.into());
    if rng.random_bool(0.35) {
        out.push(INTENSIFIERS.choose(rng).expect("non-empty").to_string());
    }
    out.push(adjective(rng, label, tier).into());
}

fn generate_text(rng: &mut ChaCha8Rng, label: usize, profile: SynthProfile) -> String {
    let opposite = 1 - label;
    let mut tokens: Vec<String> = Vec::new();

    match profile {
        SynthProfile::Tiny => {
            clause(rng, label, Tier::Mid, &mut tokens);
        }
        SynthProfile::Standard => {
            let shape = rng.random_range(0..100);
            if shape < 25 {
                // Contrast: compact, one dominant adjective against an
                // opposite mid one.
                let a1 = adjective(rng, label, Tier::Contrast);
                tokens.push(a1.into());
                tokens.push(noun(rng).into());
                tokens.push("but".into());
                let a2 = adjective(rng, opposite, Tier::Mid);
                tokens.push(a2.into());
                tokens.push(noun(rng).into());
            } else if shape < 43 {
                // Mild: mid-tier adjectives only, no strong anchor.
                let count = rng.random_range(3..=4);
                for i in 0..count {
                    if i > 0 {
                        tokens.push("and".into());
                    }
                    clause(rng, label, Tier::Mid, &mut tokens);
                }
                if rng.random_bool(0.5) {
                    tokens.push("but".into());
                    clause(rng, opposite, Tier::Weak, &mut tokens);
                }
            } else if shape < 76 {
                // Medium: strong anchor plus mid clauses, sometimes a
                // concessive opposite-class tail.
                let count = rng.random_range(2..=3);
                for i in 0..count {
                    if i > 0 {
                        tokens.push("and".into());
                    }
                    let tier = if i == 0 { Tier::Strong } else { Tier::Mid };
                    clause(rng, label, tier, &mut tokens);
                }
                if rng.random_bool(0.45) {
                    tokens.push("but".into());
                    clause(rng, opposite, Tier::Weak, &mut tokens);
                }
                if rng.random_bool(0.4) {
                    for word in TAILS.choose(rng).expect("non-empty").split(' ') {
                        tokens.push(word.into());
                    }
                }
            } else {
                // Long: several clauses tapering from strong to weak words.
                let count = rng.random_range(3..=4);
                tokens.push("overall".into());
                for i in 0..count {
                    if i > 0 {
                        tokens.push("and".into());
                    }
                    let tier = match i {
                        0 => Tier::Strong,
                        1 => Tier::Mid,
                        _ => Tier::Weak,
                    };
                    clause(rng, label, tier, &mut tokens);
                }
                if rng.random_bool(0.45) {
                    tokens.push("but".into());
                    clause(rng, opposite, Tier::Weak, &mut tokens);
                }
            }
        }
    }

    // Attach final punctuation to the last token.
    if let Some(last) = tokens.last_mut() {
        last.push(if rng.random_bool(0.25) { '!' } else { '.' });
    }
    tokens.join(" ")
}

/// Generate a balanced labeled corpus, deterministic under `seed`. Labels
/// alternate 0, 1, 0, 1, ...; even sizes are exactly balanced.
pub fn synth_dataset(config: &SynthConfig) -> Result<LabeledDataset, SynthError> {
    if config.size < 2 {
        return Err(SynthError::TooSmall(config.size));
    }
    let mut pairs = Vec::with_capacity(config.size);
    for i in 0..config.size {
        let label = i % 2;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, i as u64));
        pairs.push((generate_text(&mut rng, label, config.profile), label));
    }
    Ok(LabeledDataset::from_pairs(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{LinearTextModel, TrainConfig};
    use crate::text::TokenizedText;

    #[test]
    fn labels_balance_exactly_for_even_sizes() {
        let data = synth_dataset(&SynthConfig {
            size: 10,
            seed: 1,
            profile: SynthProfile::Standard,
        })
        .unwrap();
        assert_eq!(data.len(), 10);
        let ones = data.examples().iter().filter(|ex| ex.label == 1).count();
        assert_eq!(ones, 5);
    }

    #[test]
    fn same_seed_reproduces_the_corpus() {
        let config = SynthConfig {
            size: 40,
            seed: 7,
            profile: SynthProfile::Standard,
        };
        let a = synth_dataset(&config).unwrap();
        let b = synth_dataset(&config).unwrap();
        for (x, y) in a.examples().iter().zip(b.examples()) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.label, y.label);
        }
    }

    #[test]
    fn size_below_two_is_an_error() {
        let err = synth_dataset(&SynthConfig {
            size: 1,
            seed: 0,
            profile: SynthProfile::Standard,
        });
        assert_eq!(err.unwrap_err(), SynthError::TooSmall(1));
    }

    #[test]
    fn texts_are_non_empty_and_word_like() {
        let data = synth_dataset(&SynthConfig {
            size: 100,
            seed: 3,
            profile: SynthProfile::Standard,
        })
        .unwrap();
        for ex in data.examples() {
            let t = TokenizedText::tokenize(&ex.text);
            assert!(t.n() >= 2, "too short: {:?}", ex.text);
            assert!(t.n() <= 40, "too long: {:?}", ex.text);
        }
    }

    #[test]
    fn corpus_trains_to_high_held_out_accuracy() {
        let data = synth_dataset(&SynthConfig {
            size: 600,
            seed: 11,
            profile: SynthProfile::Standard,
        })
        .unwrap();
        let (train, held_out) = data.split_at(400);
        let model = LinearTextModel::train(&train, TrainConfig::default(), None).unwrap();
        let correct = held_out
            .examples()
            .iter()
            .filter(|ex| model.predict(&TokenizedText::tokenize(&ex.text)).argmax() == ex.label)
            .count();
        let accuracy = correct as f64 / held_out.len() as f64;
        assert!(accuracy >= 0.9, "held-out accuracy {accuracy}");
    }
}
