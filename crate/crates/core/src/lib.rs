//! Online active learning over document streams with an error-prone
//! simulated annotator.
//!
//! The crate provides a DQN-based inclusive sampling agent (ORIS) that
//! decides, per arriving document, whether to spend labeling budget on it.
//! The agent is rewarded for keeping the class distribution of recent picks
//! balanced, which both helps rare classes and keeps the annotator from
//! forgetting classes it has not labeled for a while.
//!
//! Module map:
//!
//! - [`corpus`]: labels, documents, word vectors, dataset files, synthetic corpora, streams
//! - [`oracle`]: annotator simulation with sigmoid / exponential memory decay
//! - [`encoder`]: DQN state = document embedding ++ k-averaged time-last-seen per class
//! - [`reward`]: normalized-entropy inclusivity and the pick/discard reward
//! - [`nnet`]: dense ReLU network, smooth-L1 loss, Adam, checkpoints
//! - [`dqn`]: replay buffer, epsilon schedule, training loop, soft target updates
//! - [`learner`]: softmax classifier and f1-macro metrics
//! - [`harness`]: the online active-learning loop and the baselines
//! - [`config`]: flat `key = value` experiment configuration
//! - [`cli`]: the `oris` command-line entry point

pub mod cli;
pub mod config;
pub mod corpus;
pub mod dqn;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod learner;
pub mod nnet;
pub mod oracle;
pub mod reward;

pub use error::{OrisError, Result};

/// Derives an independent sub-seed from a base seed and a stream tag.
///
/// SplitMix64 finalizer over `seed ^ tag`; used so that the stream order,
/// the oracle, the agent and the learner of one run never share an RNG.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
