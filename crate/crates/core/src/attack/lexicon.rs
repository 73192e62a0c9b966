//! Flat synonym lexicon: TSV lines of `headword<TAB>syn1,syn2,...` with
//! lowercase headwords. A curated English lexicon is bundled for the
//! synthetic corpus; custom files use the same format.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use super::AttackError;

const BUNDLED_TSV: &str = include_str!("../../assets/lexicon.tsv");

#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    pub fn from_tsv_str(tsv: &str) -> Result<Self, AttackError> {
        let mut entries = BTreeMap::new();
        for (i, line) in tsv.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, rest) = line.split_once('\t').ok_or_else(|| {
                AttackError::LexiconFormat {
                    line: i + 1,
                    reason: "expected headword<TAB>synonyms".to_owned(),
                }
            })?;
            let head = head.trim().to_lowercase();
            let synonyms: Vec<String> = rest
                .split(',')
                .map(|s| s.trim().to_owned())
                .filter(|s| !s.is_empty())
                .collect();
            if head.is_empty() || synonyms.is_empty() {
                return Err(AttackError::LexiconFormat {
                    line: i + 1,
                    reason: "empty headword or synonym list".to_owned(),
                });
            }
            if synonyms.iter().any(|s| s.contains(char::is_whitespace)) {
                return Err(AttackError::LexiconFormat {
                    line: i + 1,
                    reason: "synonyms must be single tokens".to_owned(),
                });
            }
            entries.insert(head, synonyms);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, AttackError> {
        let raw = std::fs::read_to_string(path)?;
        Self::from_tsv_str(&raw)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static SynonymLexicon {
        static BUNDLED: OnceLock<SynonymLexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            SynonymLexicon::from_tsv_str(BUNDLED_TSV).expect("bundled lexicon is well-formed")
        })
    }

    pub fn lookup(&self, lowercase_word: &str) -> Option<&[String]> {
        self.entries.get(lowercase_word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_tsv() {
        let lex = SynonymLexicon::from_tsv_str(
            "# comment\ngood\tgreat, fine\nbad\tpoor\n\n",
        )
        .unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.lookup("good").unwrap(), ["great", "fine"]);
        assert!(lex.lookup("ugly").is_none());
    }

    #[test]
    fn headwords_are_lowercased() {
        let lex = SynonymLexicon::from_tsv_str("GOOD\tgreat\n").unwrap();
        assert!(lex.lookup("good").is_some());
    }

    #[test]
    fn missing_tab_is_an_error() {
        assert!(matches!(
            SynonymLexicon::from_tsv_str("good great\n"),
            Err(AttackError::LexiconFormat { line: 1, .. })
        ));
    }

    #[test]
    fn multiword_synonyms_are_rejected() {
        assert!(SynonymLexicon::from_tsv_str("good\tvery nice\n").is_err());
    }

    #[test]
    fn bundled_lexicon_loads_and_covers_sentiment_words() {
        let lex = SynonymLexicon::bundled();
        assert!(lex.len() >= 200, "bundled lexicon has {} headwords", lex.len());
        for word in ["good", "bad", "excellent", "terrible", "movie"] {
            assert!(lex.lookup(word).is_some(), "missing {word}");
        }
    }
}
