use std::fmt;

use serde::{Deserialize, Serialize};

use super::LanguageError;

/// Consonants of the generator alphabet.
pub const CONSONANTS: [char; 8] = ['w', 't', 'p', 's', 'n', 'k', 'g', 'f'];
/// Vowels of the generator alphabet.
pub const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
/// Maximum label length after sanitization.
pub const MAX_LABEL_CHARS: usize = 16;
/// Reserved padding symbol for position-wise metrics. Never part of a label.
pub const PAD: char = '·';

pub fn in_alphabet(c: char) -> bool {
    CONSONANTS.contains(&c) || VOWELS.contains(&c)
}

/// Number of characters in the generator alphabet.
pub fn alphabet_size() -> usize {
    CONSONANTS.len() + VOWELS.len()
}

/// All 40 consonant-vowel syllables in consonant-major order.
pub fn syllabary() -> Vec<String> {
    CONSONANTS
        .iter()
        .flat_map(|c| VOWELS.iter().map(move |v| format!("{c}{v}")))
        .collect()
}

/// Splits a label into CV syllables, or `None` if it is not a syllable string.
pub fn syllabify(text: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() || !chars.len().is_multiple_of(2) {
        return None;
    }
    chars
        .chunks(2)
        .map(|pair| {
            (CONSONANTS.contains(&pair[0]) && VOWELS.contains(&pair[1]))
                .then(|| pair.iter().collect::<String>())
        })
        .collect()
}

/// A sanitized, nonempty signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label(String);

impl Label {
    /// Accepts text that is already in sanitized form.
    pub fn new(text: impl Into<String>) -> Result<Self, LanguageError> {
        let text = text.into();
        match Label::sanitize(&text) {
            Some(l) if l.0 == text => Ok(l),
            _ => Err(LanguageError::InvalidLabel(text)),
        }
    }

    /// Lowercases, drops whitespace and punctuation, truncates to 16 characters.
    /// Returns `None` when nothing survives.
    pub fn sanitize(raw: &str) -> Option<Self> {
        let text: String = raw
            .chars()
            .flat_map(char::to_lowercase)
            .filter(|c| c.is_alphanumeric())
            .take(MAX_LABEL_CHARS)
            .collect();
        (!text.is_empty()).then_some(Label(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn char_len(&self) -> usize {
        self.0.chars().count()
    }

    /// True when any character falls outside the generator alphabet.
    pub fn off_alphabet(&self) -> bool {
        !self.0.chars().all(in_alphabet)
    }
}

impl TryFrom<String> for Label {
    type Error = LanguageError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Label::new(s)
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_rules() {
        assert_eq!(Label::sanitize("WaToPo!").unwrap().as_str(), "watopo");
        assert_eq!(Label::sanitize("  giniwite'}").unwrap().as_str(), "giniwite");
        assert_eq!(Label::sanitize("pu fe\n").unwrap().as_str(), "pufe");
        assert!(Label::sanitize(" \t\n").is_none());
        assert!(Label::sanitize("'}").is_none());
        assert_eq!(Label::sanitize("abcdefghijklmnopqrstuvwxyz").unwrap().char_len(), 16);
        assert!(Label::sanitize("a·b").unwrap().as_str() == "ab");
    }

    #[test]
    fn off_alphabet_flag() {
        assert!(!Label::new("watopo").unwrap().off_alphabet());
        assert!(Label::new("blue").unwrap().off_alphabet());
    }

    #[test]
    fn strict_constructor_rejects_unsanitized() {
        assert!(Label::new("Watopo").is_err());
        assert!(Label::new("").is_err());
        assert!(serde_json::from_str::<Label>("\"wa to\"").is_err());
    }

    #[test]
    fn syllabary_and_syllabify() {
        let s = syllabary();
        assert_eq!(s.len(), 40);
        assert!(!PAD.is_alphanumeric());
        assert!(!in_alphabet(PAD));
        assert_eq!(syllabify("watopo").unwrap(), vec!["wa", "to", "po"]);
        assert_eq!(syllabify("sanasowi").unwrap().concat(), "sanasowi");
        assert!(syllabify("pikuk").is_none());
        assert!(syllabify("aawa").is_none());
    }
}
