use rand::seq::SliceRandom;
use rand::Rng;

use super::{syllabary, Label, LanguageError, SplitSpec, Vocabulary};
use crate::metrics::{topsim, Corpus};
use crate::rng::{self, SimRng};

pub const MIN_SYLLABLES: usize = 2;
pub const MAX_SYLLABLES: usize = 4;
/// Initial vocabularies must have |TopSim| strictly below this bound.
pub const HOLISTIC_TOPSIM_BOUND: f64 = 0.25;
const MAX_ATTEMPTS: usize = 500;

/// Draws a random label of 2..=4 CV syllables.
pub fn random_label(rng: &mut SimRng) -> Label {
    let syllables = syllabary();
    let n = rng.gen_range(MIN_SYLLABLES..=MAX_SYLLABLES);
    let text: String = (0..n)
        .map(|_| syllables.choose(rng).expect("syllabary is nonempty").as_str())
        .collect();
    Label::new(text).expect("syllable strings are valid labels")
}

/// Generates an unstructured language over the training meanings of `split`.
///
/// Candidate vocabularies are rejected until their topographic similarity falls
/// inside the holistic band.
pub fn generate_holistic_language(split: &SplitSpec, seed: u64) -> Result<Vocabulary, LanguageError> {
    if !split.validate() {
        return Err(LanguageError::InvalidSplit);
    }
    let mut rng = rng::stream(seed, "language");
    let mut last = f64::NAN;
    for _ in 0..MAX_ATTEMPTS {
        let mut labels: Vec<Label> = Vec::with_capacity(split.train.len());
        while labels.len() < split.train.len() {
            let candidate = random_label(&mut rng);
            if !labels.contains(&candidate) {
                labels.push(candidate);
            }
        }
        let pairs: Vec<_> = split.train.iter().copied().zip(labels).collect();
        let corpus = Corpus::new(pairs.clone());
        let score = topsim(&corpus).ok().and_then(|v| v.get()).unwrap_or(0.0);
        last = score;
        if score.abs() < HOLISTIC_TOPSIM_BOUND {
            return Vocabulary::from_pairs(pairs);
        }
    }
    Err(LanguageError::GenerationFailed { attempts: MAX_ATTEMPTS, last_topsim: last })
}
