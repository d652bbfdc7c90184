//! Meaning space, labels, vocabularies and the distance kernels shared by
//! every other module.

mod distance;
mod generator;
mod label;
mod meaning;
mod split;
mod vocabulary;

use thiserror::Error;

pub use distance::{levenshtein, meaning_distance, normalized_edit_distance};
pub use generator::{
    generate_holistic_language, random_label, HOLISTIC_TOPSIM_BOUND, MAX_SYLLABLES, MIN_SYLLABLES,
};
pub use label::{
    alphabet_size, in_alphabet, syllabary, syllabify, Label, CONSONANTS, MAX_LABEL_CHARS, PAD,
    VOWELS,
};
pub use meaning::{enumerate_meanings, Attribute, Colour, Meaning};
pub use split::{split_train_test, SplitSpec, TEST_ONLY_SIZE, TRAIN_SIZE};
pub use vocabulary::{VocabEntry, Vocabulary};

#[derive(Debug, Error)]
pub enum LanguageError {
    #[error("invalid meaning: {0}")]
    InvalidMeaning(String),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("meaning {0} appears twice")]
    DuplicateMeaning(Meaning),
    #[error("meaning {0} is not in the vocabulary")]
    UnknownMeaning(Meaning),
    #[error("split is not a 15/12 partition of the meaning space")]
    InvalidSplit,
    #[error("no holistic language after {attempts} attempts (last TopSim {last_topsim:.3})")]
    GenerationFailed { attempts: usize, last_topsim: f64 },
    #[error("line {line}: cannot parse {content:?}")]
    Parse { line: usize, content: String },
}
