use serde::{Deserialize, Serialize};

use crate::engine::BlockKind;
use crate::language::{Label, Meaning, Vocabulary};

/// (meaning, label) pairs produced in one block, the input to every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub pairs: Vec<(Meaning, Label)>,
    #[serde(default)]
    pub block: Option<BlockKind>,
    #[serde(default)]
    pub round_id: Option<u32>,
    #[serde(default)]
    pub agent_id: Option<String>,
}

impl Corpus {
    pub fn new(pairs: Vec<(Meaning, Label)>) -> Self {
        Corpus { pairs, block: None, round_id: None, agent_id: None }
    }

    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        Corpus::new(vocab.entries().iter().map(|e| (e.meaning, e.label.clone())).collect())
    }

    pub fn with_meta(mut self, block: BlockKind, round_id: Option<u32>, agent_id: Option<&str>) -> Self {
        self.block = Some(block);
        self.round_id = round_id;
        self.agent_id = agent_id.map(str::to_string);
        self
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.pairs.iter().map(|(_, l)| l)
    }

    pub fn meanings(&self) -> impl Iterator<Item = &Meaning> {
        self.pairs.iter().map(|(m, _)| m)
    }

    pub fn distinct_meanings(&self) -> usize {
        let mut ms: Vec<_> = self.meanings().collect();
        ms.sort();
        ms.dedup();
        ms.len()
    }

    /// Keeps only pairs whose meaning satisfies `keep`.
    pub fn filter_meanings(&self, keep: impl Fn(&Meaning) -> bool) -> Corpus {
        Corpus {
            pairs: self.pairs.iter().filter(|(m, _)| keep(m)).cloned().collect(),
            block: self.block,
            round_id: self.round_id,
            agent_id: self.agent_id.clone(),
        }
    }
}
