use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{BlockKind, EngineError, SessionConfig, Slot};
use crate::language::{enumerate_meanings, Meaning, SplitSpec};
use crate::rng::{self, SimRng};

/// Communication tasks per round: every training meaning once per speaker.
pub const TASKS_PER_ROUND: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Task {
    pub block: BlockKind,
    pub round_id: Option<u32>,
    /// Exposure/guessing pass, 1-based.
    pub pass: Option<u32>,
    pub trial_index: u32,
    pub speaker: Option<Slot>,
    pub target: Meaning,
    pub distractors: Vec<Meaning>,
    /// Display order of target and distractors; empty for blocks without choices.
    pub candidates: Vec<Meaning>,
}

impl Task {
    /// Position of the target among the displayed candidates.
    pub fn target_index(&self) -> Option<usize> {
        self.candidates.iter().position(|m| m == &self.target)
    }
}

/// Draws `n` distinct meanings from `pool` other than `target`, uniformly
/// without replacement.
pub fn sample_distractors(
    target: &Meaning,
    pool: &[Meaning],
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<Meaning>, EngineError> {
    let eligible: Vec<Meaning> = pool.iter().filter(|m| *m != target).copied().collect();
    if eligible.len() < n {
        return Err(EngineError::PoolTooSmall { needed: n, available: eligible.len() });
    }
    Ok(index::sample(rng, eligible.len(), n).into_iter().map(|i| eligible[i]).collect())
}

/// Shuffled display order of the target together with its distractors.
pub fn display_order(target: &Meaning, distractors: &[Meaning], rng: &mut SimRng) -> Vec<Meaning> {
    let mut c = Vec::with_capacity(distractors.len() + 1);
    c.push(*target);
    c.extend_from_slice(distractors);
    c.shuffle(rng);
    c
}

fn shuffled(meanings: &[Meaning], rng: &mut SimRng) -> Vec<Meaning> {
    let mut v = meanings.to_vec();
    v.shuffle(rng);
    v
}

/// Shuffles (meaning, speaker) items until no meaning occupies two consecutive trials.
fn shuffle_round(train: &[Meaning], rng: &mut SimRng) -> Vec<(Meaning, Slot)> {
    let mut items: Vec<(Meaning, Slot)> =
        train.iter().flat_map(|&m| Slot::BOTH.map(|s| (m, s))).collect();
    loop {
        items.shuffle(rng);
        if items.windows(2).all(|w| w[0].0 != w[1].0) {
            return items;
        }
    }
}

/// Lays out the full session: exposure and guessing passes, labelling,
/// communication rounds and testing.
pub fn build_schedule(config: &SessionConfig, split: &SplitSpec) -> Result<Vec<Task>, EngineError> {
    config.validate()?;
    if !split.validate() {
        return Err(crate::language::LanguageError::InvalidSplit.into());
    }
    let mut rng = rng::stream(config.seed, "schedule");
    let train = &split.train;
    let mut tasks = Vec::with_capacity(config.task_count() as usize);
    let push = |tasks: &mut Vec<Task>, mut t: Task| {
        t.trial_index = tasks.len() as u32;
        tasks.push(t);
    };
    let plain = |block, target, pass| Task {
        block,
        round_id: None,
        pass,
        trial_index: 0,
        speaker: None,
        target,
        distractors: Vec::new(),
        candidates: Vec::new(),
    };

    for pass in 1..=config.exposure_passes {
        for m in shuffled(train, &mut rng) {
            push(&mut tasks, plain(BlockKind::Exposure, m, Some(pass)));
        }
        for m in shuffled(train, &mut rng) {
            let distractors = sample_distractors(&m, train, config.guessing_distractors, &mut rng)?;
            let candidates = display_order(&m, &distractors, &mut rng);
            push(&mut tasks, Task { distractors, candidates, ..plain(BlockKind::Guessing, m, Some(pass)) });
        }
    }
    for m in shuffled(train, &mut rng) {
        push(&mut tasks, plain(BlockKind::Labelling, m, None));
    }
    for round in 1..=config.rounds {
        for (m, speaker) in shuffle_round(train, &mut rng) {
            let distractors = sample_distractors(&m, train, config.distractor_count, &mut rng)?;
            let candidates = display_order(&m, &distractors, &mut rng);
            push(
                &mut tasks,
                Task {
                    round_id: Some(round),
                    speaker: Some(speaker),
                    distractors,
                    candidates,
                    ..plain(BlockKind::Communication, m, None)
                },
            );
        }
    }
    for m in shuffled(&enumerate_meanings(), &mut rng) {
        push(&mut tasks, plain(BlockKind::Testing, m, None));
    }
    debug_assert_eq!(tasks.len() as u32, config.task_count());
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentDescriptor;
    use crate::engine::Condition;
    use crate::language::split_train_test;
    use std::collections::HashMap;

    fn config(seed: u64) -> SessionConfig {
        SessionConfig::new("s", Condition::Ll, seed, AgentDescriptor::memorizer(), AgentDescriptor::memorizer())
    }

    #[test]
    fn default_schedule_has_222_tasks() {
        let cfg = config(5);
        let tasks = build_schedule(&cfg, &split_train_test(5)).unwrap();
        assert_eq!(tasks.len(), 15 * 2 * 2 + 15 + 4 * 30 + 27);
        assert_eq!(tasks.len(), 222);
        let count = |b| tasks.iter().filter(|t| t.block == b).count();
        assert_eq!(count(BlockKind::Exposure), 30);
        assert_eq!(count(BlockKind::Guessing), 30);
        assert_eq!(count(BlockKind::Labelling), 15);
        assert_eq!(count(BlockKind::Communication), 120);
        assert_eq!(count(BlockKind::Testing), 27);
        for (i, t) in tasks.iter().enumerate() {
            assert_eq!(t.trial_index as usize, i);
        }
    }

    #[test]
    fn rounds_are_role_balanced_and_never_repeat_adjacent() {
        let split = split_train_test(9);
        for seed in 0..20 {
            let tasks = build_schedule(&config(seed), &split).unwrap();
            for round in 1..=4 {
                let r: Vec<&Task> = tasks.iter().filter(|t| t.round_id == Some(round)).collect();
                assert_eq!(r.len(), 30);
                assert_eq!(r.iter().filter(|t| t.speaker == Some(Slot::A)).count(), 15);
                assert_eq!(r.iter().filter(|t| t.speaker == Some(Slot::B)).count(), 15);
                let mut per: HashMap<(Meaning, Slot), usize> = HashMap::new();
                for t in &r {
                    *per.entry((t.target, t.speaker.unwrap())).or_default() += 1;
                    assert_eq!(t.distractors.len(), 3);
                    assert!(!t.distractors.contains(&t.target));
                    assert!(t.distractors.iter().all(|d| split.is_train(d)));
                    assert_eq!(t.candidates.len(), 4);
                    assert!(t.target_index().is_some());
                }
                assert_eq!(per.len(), 30);
                assert!(r.windows(2).all(|w| w[0].target != w[1].target));
            }
        }
    }

    #[test]
    fn schedule_is_deterministic() {
        let split = split_train_test(1);
        assert_eq!(build_schedule(&config(3), &split).unwrap(), build_schedule(&config(3), &split).unwrap());
        assert_ne!(build_schedule(&config(3), &split).unwrap(), build_schedule(&config(4), &split).unwrap());
    }

    #[test]
    fn invalid_config_rejected() {
        let split = split_train_test(1);
        let mut c = config(1);
        c.rounds = 0;
        assert!(matches!(build_schedule(&c, &split), Err(EngineError::InvalidConfig(_))));
        let mut c = config(1);
        c.distractor_count = 15;
        assert!(build_schedule(&c, &split).is_err());
    }

    #[test]
    fn distractor_sampling() {
        let split = split_train_test(2);
        let mut rng = rng::stream(0, "t");
        let target = split.train[0];
        let d = sample_distractors(&target, &split.train, 3, &mut rng).unwrap();
        assert_eq!(d.len(), 3);
        assert!(!d.contains(&target));
        let mut dd = d.clone();
        dd.sort();
        dd.dedup();
        assert_eq!(dd.len(), 3);

        let mut all = sample_distractors(&target, &split.train, 14, &mut rng).unwrap();
        all.sort();
        let mut expected: Vec<_> = split.train.iter().copied().filter(|m| *m != target).collect();
        expected.sort();
        assert_eq!(all, expected);

        assert!(matches!(
            sample_distractors(&target, &split.train, 15, &mut rng),
            Err(EngineError::PoolTooSmall { needed: 15, available: 14 })
        ));
    }

    #[test]
    fn distractor_sampling_is_uniform() {
        // Each of the 14 eligible meanings is drawn with probability 3/14 per draw.
        let split = split_train_test(3);
        let target = split.train[4];
        let mut rng = rng::stream(42, "uniformity");
        let draws = 10_000;
        let mut counts: HashMap<Meaning, usize> = HashMap::new();
        for _ in 0..draws {
            for m in sample_distractors(&target, &split.train, 3, &mut rng).unwrap() {
                *counts.entry(m).or_default() += 1;
            }
        }
        assert_eq!(counts.len(), 14);
        let p = 3.0 / 14.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs {mean}±{sd}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        // Chi-square, 13 df; 0.999 quantile is 34.53.
        assert!(chi2 < 34.53, "chi2 = {chi2}");
    }
}
