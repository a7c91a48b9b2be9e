//! DQN state construction.
//!
//! The state is the document embedding followed by one entry per class: the
//! mean, over the `k` most recent emissions of that class, of the number of
//! stream steps elapsed since each emission. Buffers start filled with step
//! 0, so every class reads zero at the start of a stream and drifts upward
//! until it is picked.

use std::collections::VecDeque;

use crate::{OrisError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// History depth per class.
    pub k: usize,
    /// Divisor applied to the time-last-seen tail of the state.
    pub dt_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { k: 3, dt_scale: 1.0 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(OrisError::Invalid("encoder.k must be >= 1".into()));
        }
        if !(self.dt_scale > 0.0) || !self.dt_scale.is_finite() {
            return Err(OrisError::Invalid(format!(
                "encoder.dt_scale must be positive, got {}",
                self.dt_scale
            )));
        }
        Ok(())
    }
}

/// Per-class ring buffers of the steps at which a class was emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct LastSeenTracker {
    k: usize,
    buffers: Vec<VecDeque<u64>>,
    current_step: u64,
}

impl LastSeenTracker {
    pub fn new(num_classes: usize, k: usize) -> Self {
        assert!(k >= 1, "history depth must be at least 1");
        LastSeenTracker {
            k,
            buffers: vec![VecDeque::from(vec![0; k]); num_classes],
            current_step: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.buffers.len()
    }

    pub fn current_step(&self) -> u64 {
        self.current_step
    }

    pub fn averaged_last_seen(&self, class: usize) -> f64 {
        let buf = &self.buffers[class];
        let total: u64 = buf.iter().map(|&s| self.current_step - s).sum();
        total as f64 / buf.len() as f64
    }

    /// Pushes the current step into `class`'s buffer, evicting the oldest entry.
    pub fn record_emission(&mut self, class: usize) {
        let buf = &mut self.buffers[class];
        if buf.len() == self.k {
            buf.pop_front();
        }
        buf.push_back(self.current_step);
    }

    pub fn advance_step(&mut self) {
        self.current_step += 1;
    }
}

/// Embedding followed by the scaled per-class time-last-seen values.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_state(embedding: &[f64], tracker: &LastSeenTracker, dt_scale: f64) -> StateVector {
    let mut values = Vec::with_capacity(embedding.len() + tracker.num_classes());
    values.extend_from_slice(embedding);
    values.extend((0..tracker.num_classes()).map(|c| tracker.averaged_last_seen(c) / dt_scale));
    StateVector(values)
}
