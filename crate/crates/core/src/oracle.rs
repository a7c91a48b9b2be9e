//! Simulated annotator whose slip probability grows with the time since it
//! last emitted a class.
//!
//! Time is measured in stream steps: every arriving document advances the
//! clock, picked or not. Memory is refreshed with the label the oracle
//! actually emits, including wrong ones, since that is all the surrounding
//! system can observe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{OrisError, Result};

/// Slip-probability curve as a function of time since a class was last seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// Never errs.
    Perfect,
    /// `1 / (1 + exp(-alpha * dt + beta))`: slow forgetting with a knee at `dt = beta / alpha`.
    Sigmoid { alpha: f64, beta: f64 },
    /// `min(1, exp(alpha * dt + beta))`: fast forgetting, saturating at certainty.
    Exponential { alpha: f64, beta: f64 },
}

impl DecayModel {
    /// Slow-forgetting parameters used in the reference experiments.
    pub const SLOW_SIGMOID: DecayModel = DecayModel::Sigmoid {
        alpha: 0.3,
        beta: 9.0,
    };
    /// Fast-forgetting parameters used in the reference experiments.
    pub const FAST_EXPONENTIAL: DecayModel = DecayModel::Exponential {
        alpha: 0.6,
        beta: -19.0,
    };

    pub fn from_parts(kind: &str, alpha: f64, beta: f64) -> Result<Self> {
        let model = match kind {
            "perfect" => return Ok(DecayModel::Perfect),
            "sigmoid" => DecayModel::Sigmoid { alpha, beta },
            "exponential" => DecayModel::Exponential { alpha, beta },
            other => {
                return Err(OrisError::Invalid(format!(
                    "unknown oracle kind {other:?} (expected perfect, sigmoid or exponential)"
                )))
            }
        };
        if !(alpha >= 0.0) || !beta.is_finite() {
            return Err(OrisError::Invalid(format!(
                "oracle decay needs alpha >= 0 and finite beta, got alpha={alpha} beta={beta}"
            )));
        }
        Ok(model)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DecayModel::Perfect => "perfect",
            DecayModel::Sigmoid { .. } => "sigmoid",
            DecayModel::Exponential { .. } => "exponential",
        }
    }

    pub fn error_probability(&self, dt: f64) -> f64 {
        match *self {
            DecayModel::Perfect => 0.0,
            DecayModel::Sigmoid { alpha, beta } => 1.0 / (1.0 + (-alpha * dt + beta).exp()),
            DecayModel::Exponential { alpha, beta } => (alpha * dt + beta).exp().min(1.0),
        }
    }
}

/// Annotator state for one run.
#[derive(Debug, Clone)]
pub struct Oracle {
    model: DecayModel,
    last_seen_step: Vec<u64>,
    current_step: u64,
    rng: ChaCha8Rng,
}

impl Oracle {
    pub fn new(model: DecayModel, num_classes: usize, seed: u64) -> Self {
        Oracle {
            model,
            last_seen_step: vec![0; num_classes],
            current_step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn model(&self) -> DecayModel {
        self.model
    }

    pub fn num_classes(&self) -> usize {
        self.last_seen_step.len()
    }

    pub fn current_step(&self) -> u64 {
        self.current_step
    }

    /// Stream steps since the oracle last emitted `class`.
    pub fn delta_t(&self, class: usize) -> u64 {
        self.current_step - self.last_seen_step[class]
    }

    /// Labels a document of class `true_class`, possibly slipping to a
    /// uniformly chosen other class, then refreshes memory with the emitted label.
    pub fn annotate(&mut self, true_class: usize) -> usize {
        let p = self.model.error_probability(self.delta_t(true_class) as f64);
        let emitted = if p > 0.0 && self.rng.random::<f64>() < p {
            let other = self.rng.random_range(0..self.num_classes() - 1);
            if other >= true_class {
                other + 1
            } else {
                other
            }
        } else {
            true_class
        };
        self.refresh_memory(emitted);
        emitted
    }

    pub fn refresh_memory(&mut self, emitted: usize) {
        self.last_seen_step[emitted] = self.current_step;
    }

    pub fn advance_step(&mut self) {
        self.current_step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_knee_is_one_half() {
        let p = DecayModel::SLOW_SIGMOID.error_probability(30.0);
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero() {
        let p = DecayModel::SLOW_SIGMOID.error_probability(0.0);
        assert!((p - 1.2339e-4).abs() < 1e-8, "{p}");
    }

    #[test]
    fn exponential_values_and_clipping() {
        let m = DecayModel::FAST_EXPONENTIAL;
        assert!((m.error_probability(20.0) - 9.1188e-4).abs() < 1e-8);
        assert_eq!(m.error_probability(35.0), 1.0);
        assert_eq!(m.error_probability(1e6), 1.0);
    }

    #[test]
    fn perfect_never_errs() {
        let mut o = Oracle::new(DecayModel::Perfect, 4, 1);
        for step in 0..1000 {
            let c = step % 4;
            assert_eq!(o.annotate(c), c);
            for _ in 0..step % 7 {
                o.advance_step();
            }
        }
        assert_eq!(DecayModel::Perfect.error_probability(1e9), 0.0);
    }

    #[test]
    fn certain_slip_never_returns_truth() {
        let model = DecayModel::Exponential { alpha: 1.0, beta: 0.0 };
        let mut o = Oracle::new(model, 3, 2);
        for _ in 0..500 {
            o.advance_step();
            // exp(dt) >= 1 for any dt >= 0
            assert_ne!(o.annotate(1), 1);
        }
    }

    #[test]
    fn memory_bookkeeping() {
        let mut o = Oracle::new(DecayModel::Perfect, 2, 0);
        for _ in 0..7 {
            o.advance_step();
        }
        o.annotate(0);
        assert_eq!(o.delta_t(0), 0);
        assert_eq!(o.delta_t(1), 7);
        o.advance_step();
        assert_eq!(o.delta_t(0), 1);
        assert_eq!(o.delta_t(1), 8);
    }

    #[test]
    fn advance_counts_steps() {
        let mut o = Oracle::new(DecayModel::Perfect, 3, 0);
        o.advance_step();
        assert_eq!(o.current_step(), 1);
        for _ in 0..99 {
            o.advance_step();
        }
        assert_eq!(o.current_step(), 100);
        assert_eq!(o.delta_t(2), 100);
    }

    #[test]
    fn interleaved_emissions_stay_bounded_by_gap() {
        // emissions: class 0 at even steps, class 1 every third step
        let mut o = Oracle::new(DecayModel::Perfect, 2, 0);
        let mut last = [0u64; 2];
        for step in 0..60u64 {
            if step % 2 == 0 {
                o.annotate(0);
                last[0] = step;
            }
            if step % 3 == 0 {
                o.annotate(1);
                last[1] = step;
            }
            assert_eq!(o.delta_t(0), step - last[0]);
            assert_eq!(o.delta_t(1), step - last[1]);
            assert!(o.delta_t(0) <= 2 && o.delta_t(1) <= 3);
            o.advance_step();
        }
    }

    #[test]
    fn error_rate_matches_sigmoid_floor() {
        let n = 100_000;
        let mut o = Oracle::new(DecayModel::SLOW_SIGMOID, 5, 77);
        let mut errors = 0;
        for i in 0..n {
            // refresh every class at the current step so dt stays 0
            for c in 0..5 {
                o.refresh_memory(c);
            }
            if o.annotate(i % 5) != i % 5 {
                errors += 1;
            }
            o.advance_step();
        }
        let p = 1.0 / (1.0 + 9f64.exp());
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let rate = errors as f64 / n as f64;
        assert!((rate - p).abs() <= 3.0 * sigma + 1.0 / n as f64, "rate {rate} vs {p}");
    }

    #[test]
    fn forced_errors_are_uniform_over_other_classes() {
        let classes = 5;
        let truth = 2;
        let n = 100_000;
        let model = DecayModel::Exponential { alpha: 0.0, beta: 1.0 };
        let mut o = Oracle::new(model, classes, 11);
        let mut counts = vec![0usize; classes];
        for _ in 0..n {
            counts[o.annotate(truth)] += 1;
        }
        assert_eq!(counts[truth], 0);
        let expected = n as f64 / (classes - 1) as f64;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != truth)
            .map(|(_, &k)| (k as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square with 3 dof: p = 0.01 at 11.345
        assert!(chi2 < 11.345, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn from_parts_validates() {
        assert_eq!(
            DecayModel::from_parts("sigmoid", 0.3, 9.0).unwrap(),
            DecayModel::SLOW_SIGMOID
        );
        assert!(DecayModel::from_parts("sigmoid", -1.0, 0.0).is_err());
        assert!(DecayModel::from_parts("linear", 1.0, 0.0).is_err());
        assert_eq!(DecayModel::from_parts("perfect", -5.0, f64::NAN).unwrap(), DecayModel::Perfect);
    }

    proptest! {
        #[test]
        fn probability_is_bounded_and_monotone(
            alpha in 0.0f64..3.0,
            beta in -30.0f64..30.0,
            dt in 0.0f64..200.0,
            step in 0.0f64..50.0,
            exponential in any::<bool>(),
        ) {
            let m = if exponential {
                DecayModel::Exponential { alpha, beta }
            } else {
                DecayModel::Sigmoid { alpha, beta }
            };
            let p0 = m.error_probability(dt);
            let p1 = m.error_probability(dt + step);
            prop_assert!((0.0..=1.0).contains(&p0));
            prop_assert!((0.0..=1.0).contains(&p1));
            prop_assert!(p1 >= p0);
        }
    }
}
