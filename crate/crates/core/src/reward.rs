//! Inclusivity score and the pick/discard reward.
//!
//! Inclusivity is the Shannon entropy (base 2) of the class frequencies in
//! the window of the last `m` picked labels, normalized by `log2 C` so that
//! it lies in `[0, 1]`. A pick earns `rho * exp(delta * (inclusivity - 1))`,
//! which is `rho` for a perfectly balanced window and decays quickly as the
//! window concentrates; a discard earns the constant `lambda`.

use std::collections::VecDeque;

use crate::{OrisError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Discard = 0,
    Pick = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        match i {
            0 => Some(Action::Discard),
            1 => Some(Action::Pick),
            _ => None,
        }
    }

    pub fn is_pick(self) -> bool {
        self == Action::Pick
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub rho: f64,
    pub delta: f64,
    pub lambda: f64,
    pub m: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            rho: 5.0,
            delta: 8.0,
            lambda: 0.01,
            m: 10,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.rho > 0.0) {
            errs.push(format!("reward.rho must be > 0, got {}", self.rho));
        }
        if !(self.delta > 0.0) {
            errs.push(format!("reward.delta must be > 0, got {}", self.delta));
        }
        if !(self.lambda >= 0.0) {
            errs.push(format!("reward.lambda must be >= 0, got {}", self.lambda));
        }
        if self.m == 0 {
            errs.push("reward.m must be >= 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(OrisError::Config(errs))
        }
    }
}

/// Sliding window of the labels of the most recent picks.
#[derive(Debug, Clone, PartialEq)]
pub struct PickMemory {
    capacity: usize,
    labels: VecDeque<usize>,
}

impl PickMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "pick memory needs capacity >= 1");
        PickMemory {
            capacity,
            labels: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_labels(capacity: usize, labels: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::new(capacity);
        labels.into_iter().for_each(|l| m.push(l));
        m
    }

    pub fn push(&mut self, label: usize) {
        if self.labels.len() == self.capacity {
            self.labels.pop_front();
        }
        self.labels.push_back(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().copied()
    }
}

/// Normalized entropy of the window; 0 for an empty window.
pub fn inclusivity(memory: &PickMemory, num_classes: usize) -> f64 {
    if memory.is_empty() || num_classes < 2 {
        return 0.0;
    }
    let mut counts = vec![0usize; num_classes];
    for l in memory.labels() {
        counts[l] += 1;
    }
    let n = memory.len() as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * (1.0 / p).log2()
        })
        .sum();
    (entropy / (num_classes as f64).log2()).clamp(0.0, 1.0)
}

pub fn reward_for_inclusivity(action: Action, inclusivity: f64, cfg: &RewardConfig) -> f64 {
    match action {
        Action::Pick => cfg.rho * (cfg.delta * (inclusivity - 1.0)).exp(),
        Action::Discard => cfg.lambda,
    }
}

/// For a pick, `memory` must already contain the newly emitted label.
pub fn compute_reward(action: Action, memory: &PickMemory, num_classes: usize, cfg: &RewardConfig) -> f64 {
    match action {
        Action::Pick => reward_for_inclusivity(action, inclusivity(memory, num_classes), cfg),
        Action::Discard => cfg.lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_window_is_fully_inclusive() {
        let m = PickMemory::from_labels(10, [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert!((inclusivity(&m, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_window_is_zero() {
        let m = PickMemory::from_labels(10, [3; 7]);
        assert_eq!(inclusivity(&m, 5), 0.0);
        assert_eq!(inclusivity(&PickMemory::new(10), 5), 0.0);
    }

    #[test]
    fn two_of_five_classes() {
        let m = PickMemory::from_labels(10, [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let expected = 1.0 / 5f64.log2();
        assert!((inclusivity(&m, 5) - expected).abs() < 1e-12);
        assert!((expected - 0.43068).abs() < 1e-5);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut m = PickMemory::new(2);
        m.push(0);
        m.push(1);
        m.push(1);
        assert_eq!(m.labels().collect::<Vec<_>>(), vec![1, 1]);
    }

    #[test]
    fn reward_endpoints() {
        let cfg = RewardConfig::default();
        assert!((reward_for_inclusivity(Action::Pick, 1.0, &cfg) - 5.0).abs() < 1e-12);
        let low = reward_for_inclusivity(Action::Pick, 0.0, &cfg);
        assert!((low - 5.0 * (-8f64).exp()).abs() < 1e-12);
        assert!((low - 1.6773e-3).abs() < 1e-7);
        let m = PickMemory::from_labels(10, [1, 2]);
        assert_eq!(compute_reward(Action::Discard, &m, 5, &cfg), 0.01);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        let bad = RewardConfig {
            rho: 0.0,
            m: 0,
            ..RewardConfig::default()
        };
        match bad.validate() {
            Err(OrisError::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn inclusivity_properties(
            classes in 2usize..8,
            raw in proptest::collection::vec(0usize..8, 1..30),
            rotate in 0usize..30,
            shift in 0usize..8,
        ) {
            let labels: Vec<usize> = raw.iter().map(|l| l % classes).collect();
            let m = PickMemory::from_labels(labels.len(), labels.iter().copied());
            let base = inclusivity(&m, classes);
            prop_assert!((0.0..=1.0).contains(&base));

            let mut permuted = labels.clone();
            permuted.rotate_left(rotate % labels.len());
            permuted.reverse();
            let p = inclusivity(&PickMemory::from_labels(labels.len(), permuted), classes);
            prop_assert!((p - base).abs() < 1e-12);

            let relabeled = labels.iter().map(|l| (l + shift) % classes);
            let r = inclusivity(&PickMemory::from_labels(labels.len(), relabeled), classes);
            prop_assert!((r - base).abs() < 1e-12);

            let distinct = labels.iter().collect::<std::collections::HashSet<_>>().len();
            if distinct == 1 {
                prop_assert_eq!(base, 0.0);
            }
        }

        #[test]
        fn pick_reward_is_increasing_and_capped(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let cfg = RewardConfig::default();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let rl = reward_for_inclusivity(Action::Pick, lo, &cfg);
            let rh = reward_for_inclusivity(Action::Pick, hi, &cfg);
            prop_assert!(rh <= cfg.rho);
            if hi > lo {
                prop_assert!(rh > rl);
            }
        }
    }
}
