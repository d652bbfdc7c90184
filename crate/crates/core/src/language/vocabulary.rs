use serde::{Deserialize, Serialize};

use super::{Colour, Label, LanguageError, Meaning};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub meaning: Meaning,
    pub label: Label,
    #[serde(rename = "lastSuccess")]
    pub last_success: bool,
    #[serde(rename = "updatedAt")]
    pub updated_at: u64,
}

/// An agent's meaning-to-label mapping. At most one entry per meaning; entries
/// are kept in canonical meaning order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
}

impl Vocabulary {
    pub fn from_pairs<I>(pairs: I) -> Result<Self, LanguageError>
    where
        I: IntoIterator<Item = (Meaning, Label)>,
    {
        let mut vocab = Vocabulary::default();
        for (meaning, label) in pairs {
            if vocab.get(&meaning).is_some() {
                return Err(LanguageError::DuplicateMeaning(meaning));
            }
            vocab.entries.push(VocabEntry { meaning, label, last_success: false, updated_at: 0 });
        }
        vocab.entries.sort_by_key(|e| e.meaning);
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn get(&self, meaning: &Meaning) -> Option<&VocabEntry> {
        self.entries.iter().find(|e| &e.meaning == meaning)
    }

    pub fn label_of(&self, meaning: &Meaning) -> Option<&Label> {
        self.get(meaning).map(|e| &e.label)
    }

    pub fn meanings(&self) -> impl Iterator<Item = Meaning> + '_ {
        self.entries.iter().map(|e| e.meaning)
    }

    /// Inserts a new meaning or overwrites the label of an existing one.
    pub fn upsert(&mut self, meaning: Meaning, label: Label, at: u64) {
        match self.entries.binary_search_by_key(&meaning, |e| e.meaning) {
            Ok(i) => {
                self.entries[i].label = label;
                self.entries[i].updated_at = at;
            }
            Err(i) => self.entries.insert(
                i,
                VocabEntry { meaning, label, last_success: false, updated_at: at },
            ),
        }
    }

    /// Rewrites the label of an existing meaning. Never adds meanings.
    pub fn replace_label(
        &mut self,
        meaning: &Meaning,
        label: Label,
        at: u64,
    ) -> Result<(), LanguageError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| &e.meaning == meaning)
            .ok_or(LanguageError::UnknownMeaning(*meaning))?;
        entry.label = label;
        entry.updated_at = at;
        Ok(())
    }

    pub fn set_success(&mut self, meaning: &Meaning, success: bool) -> Result<(), LanguageError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| &e.meaning == meaning)
            .ok_or(LanguageError::UnknownMeaning(*meaning))?;
        entry.last_success = success;
        Ok(())
    }

    /// Serializes as `shape,colour,amount,word` lines under a header row.
    pub fn to_lines(&self) -> String {
        let mut out = String::from("shape,colour,amount,word\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.meaning.shape(),
                e.meaning.colour(),
                e.meaning.amount(),
                e.label
            ));
        }
        out
    }

    pub fn parse_lines(text: &str) -> Result<Self, LanguageError> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line == "shape,colour,amount,word") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || LanguageError::Parse { line: n + 1, content: line.to_string() };
            if fields.len() != 4 {
                return Err(bad());
            }
            let shape: u8 = fields[0].parse().map_err(|_| bad())?;
            let amount: u8 = fields[2].parse().map_err(|_| bad())?;
            let meaning = Meaning::new(shape, Colour::parse(fields[1])?, amount)?;
            pairs.push((meaning, Label::new(fields[3])?));
        }
        Vocabulary::from_pairs(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: u8, c: Colour, a: u8) -> Meaning {
        Meaning::new(s, c, a).unwrap()
    }

    #[test]
    fn replacement_keeps_meanings() {
        let mut v = Vocabulary::from_pairs([
            (m(1, Colour::Blue, 1), Label::new("watopo").unwrap()),
            (m(2, Colour::Orange, 1), Label::new("giniwite").unwrap()),
        ])
        .unwrap();
        v.replace_label(&m(1, Colour::Blue, 1), Label::new("pufe").unwrap(), 7).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.label_of(&m(1, Colour::Blue, 1)).unwrap().as_str(), "pufe");
        assert_eq!(v.get(&m(1, Colour::Blue, 1)).unwrap().updated_at, 7);
        assert!(v.replace_label(&m(3, Colour::Blue, 1), Label::new("x").unwrap(), 8).is_err());
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn duplicate_meaning_rejected() {
        let l = Label::new("wa").unwrap();
        let r = Vocabulary::from_pairs([(m(1, Colour::Blue, 1), l.clone()), (m(1, Colour::Blue, 1), l)]);
        assert!(matches!(r, Err(LanguageError::DuplicateMeaning(_))));
    }

    #[test]
    fn line_format() {
        let v = Vocabulary::from_pairs([
            (m(2, Colour::Orange, 1), Label::new("giniwite").unwrap()),
            (m(3, Colour::Blue, 2), Label::new("tusetetu").unwrap()),
        ])
        .unwrap();
        let text = v.to_lines();
        assert_eq!(text, "shape,colour,amount,word\n2,orange,1,giniwite\n3,blue,2,tusetetu\n");
        assert_eq!(Vocabulary::parse_lines(&text).unwrap(), v);
        assert!(Vocabulary::parse_lines("1,purple,1,wa").is_err());
        assert!(Vocabulary::parse_lines("1,blue,1").is_err());
    }
}
