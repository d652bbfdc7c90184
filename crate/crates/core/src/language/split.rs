use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{enumerate_meanings, Attribute, Meaning};
use crate::rng;

pub const TRAIN_SIZE: usize = 15;
pub const TEST_ONLY_SIZE: usize = 12;

/// Partition of the meaning space into training and held-out meanings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(rename = "trainMeanings")]
    pub train: Vec<Meaning>,
    #[serde(rename = "testOnlyMeanings")]
    pub test_only: Vec<Meaning>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn is_train(&self, m: &Meaning) -> bool {
        self.train.binary_search(m).is_ok()
    }

    pub fn validate(&self) -> bool {
        let mut all: Vec<Meaning> = self.train.iter().chain(&self.test_only).copied().collect();
        all.sort();
        all.dedup();
        self.train.len() == TRAIN_SIZE
            && self.test_only.len() == TEST_ONLY_SIZE
            && all == enumerate_meanings()
    }
}

fn covers_every_value(train: &[Meaning]) -> bool {
    Attribute::ALL.iter().all(|&attr| {
        (0..Attribute::CARDINALITY).all(|v| train.iter().any(|m| m.value_index(attr) == v))
    })
}

/// Seeded 15/12 split; redraws until every attribute value occurs in training.
pub fn split_train_test(seed: u64) -> SplitSpec {
    let mut rng = rng::stream(seed, "split");
    let mut all = enumerate_meanings();
    loop {
        all.shuffle(&mut rng);
        let mut train = all[..TRAIN_SIZE].to_vec();
        if !covers_every_value(&train) {
            continue;
        }
        let mut test_only = all[TRAIN_SIZE..].to_vec();
        train.sort();
        test_only.sort();
        return SplitSpec { train, test_only, seed };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_postconditions() {
        let s = split_train_test(7);
        assert_eq!(s.train.len(), 15);
        assert_eq!(s.test_only.len(), 12);
        assert!(s.train.iter().all(|m| !s.test_only.contains(m)));
        assert!(s.validate());
        assert_eq!(s, split_train_test(7));
    }

    #[test]
    fn every_value_covered_over_many_seeds() {
        for seed in 0..1000 {
            let s = split_train_test(seed);
            assert!(s.validate(), "seed {seed}");
            for attr in Attribute::ALL {
                for v in 0..3 {
                    assert!(s.train.iter().any(|m| m.value_index(attr) == v), "seed {seed}");
                }
            }
        }
    }
}
