//! The ORIS sampling agent: a DQN over pick/discard decisions.
//!
//! Training replays shuffled passes over a corpus. Each pass is an episode
//! that ends once the labeling budget is spent or the stream runs out. The
//! labels fed back during training come from an error-free oracle, so the
//! learned policy is not tied to one memory-decay curve; the reward only
//! depends on how balanced the recent picks are.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{shuffle_stream, Document, StreamSource};
use crate::encoder::{encode_state, EncoderConfig, LastSeenTracker, StateVector};
use crate::nnet::{smooth_l1, Adam, AdamConfig, DenseNet};
use crate::reward::{compute_reward, inclusivity, Action, PickMemory, RewardConfig};
use crate::{derive_seed, OrisError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    /// Drop the bootstrap term for this transition.
    pub terminal: bool,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay buffer needs capacity >= 1");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample with replacement of `min(batch, len)` transitions.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(OrisError::Empty("replay buffer".into()));
        }
        if batch == 0 {
            return Err(OrisError::Invalid("minibatch size must be >= 1".into()));
        }
        let n = batch.min(self.items.len());
        Ok((0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

pub fn store_and_sample<'b, R: Rng>(
    buffer: &'b mut ReplayBuffer,
    transition: Transition,
    batch: usize,
    rng: &mut R,
) -> Result<Vec<&'b Transition>> {
    buffer.push(transition);
    buffer.sample(batch, rng)
}

/// `end + (start - end) * exp(-rate * step)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_rate: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 0.9,
            end: 0.05,
            decay_rate: 0.0005,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        self.end + (self.start - self.end) * (-self.decay_rate * step as f64).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub tau: f64,
    pub minibatch: usize,
    /// Picks per training episode.
    pub budget: usize,
    pub episodes: usize,
    pub buffer_capacity: usize,
    /// Buffer size required before the first gradient step; `None` means `minibatch`.
    pub warmup: Option<usize>,
    pub hidden: Vec<usize>,
    pub optimizer: AdamConfig,
    pub epsilon: EpsilonSchedule,
    /// Flag the last transition of each episode as terminal. Off by default:
    /// every transition bootstraps, episode boundaries included.
    pub terminal_masking: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            tau: 0.005,
            minibatch: 512,
            budget: 500,
            episodes: 10_000,
            buffer_capacity: 50_000,
            warmup: None,
            hidden: vec![256, 256],
            optimizer: AdamConfig::default(),
            epsilon: EpsilonSchedule::default(),
            terminal_masking: false,
        }
    }
}

impl AgentConfig {
    pub fn warmup_threshold(&self) -> usize {
        self.warmup.unwrap_or(self.minibatch)
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            errs.push(format!("agent.gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            errs.push(format!("agent.tau must be in (0, 1], got {}", self.tau));
        }
        if self.minibatch == 0 {
            errs.push("agent.minibatch must be >= 1".into());
        }
        if self.minibatch > self.buffer_capacity {
            errs.push(format!(
                "agent.minibatch ({}) exceeds agent.buffer_capacity ({})",
                self.minibatch, self.buffer_capacity
            ));
        }
        if self.budget == 0 {
            errs.push("agent.budget must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            errs.push("agent.hidden sizes must be >= 1".into());
        }
        if !(self.optimizer.learning_rate > 0.0) {
            errs.push(format!(
                "agent.learning_rate must be > 0, got {}",
                self.optimizer.learning_rate
            ));
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || e.end > e.start {
            errs.push(format!(
                "agent epsilon needs 0 <= end <= start <= 1, got start={} end={}",
                e.start, e.end
            ));
        }
        if !(e.decay_rate >= 0.0) {
            errs.push(format!("agent.epsilon_decay must be >= 0, got {}", e.decay_rate));
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.validation_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(OrisError::Config(errs))
        }
    }

    pub fn layer_sizes(&self, state_len: usize) -> Vec<usize> {
        let mut sizes = vec![state_len];
        sizes.extend(&self.hidden);
        sizes.push(2);
        sizes
    }
}

/// Greedy action; ties go to pick.
pub fn decide(net: &DenseNet, state: &StateVector) -> Result<Action> {
    let q = net.forward(state.as_slice())?;
    Ok(greedy(&q))
}

fn greedy(q: &[f64]) -> Action {
    if q[Action::Pick.index()] >= q[Action::Discard.index()] {
        Action::Pick
    } else {
        Action::Discard
    }
}

pub fn select_action<R: Rng>(net: &DenseNet, state: &StateVector, epsilon: f64, rng: &mut R) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(OrisError::Invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(if rng.random::<bool>() {
            Action::Pick
        } else {
            Action::Discard
        });
    }
    decide(net, state)
}

fn stack(rows: impl ExactSizeIterator<Item = Vec<f64>>, width: usize) -> Result<Array2<f64>> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * width);
    for r in rows {
        if r.len() != width {
            return Err(OrisError::Shape {
                expected: width,
                actual: r.len(),
            });
        }
        flat.extend(r);
    }
    Array2::from_shape_vec((n, width), flat).map_err(|e| OrisError::Invalid(e.to_string()))
}

/// One gradient step on the source network; returns the mean smooth-L1 loss.
///
/// Targets are `r + gamma * max_a Q_target(s', a)`, or just `r` for
/// transitions flagged terminal.
pub fn train_step(
    source: &mut DenseNet,
    target: &DenseNet,
    batch: &[&Transition],
    gamma: f64,
    opt: &mut Adam,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(OrisError::Empty("training minibatch".into()));
    }
    let n = batch.len();
    let width = source.input_size();
    let states = stack(batch.iter().map(|t| t.state.0.clone()), width)?;
    let next_states = stack(batch.iter().map(|t| t.next_state.0.clone()), width)?;

    let next_q = target.forward_batch(&next_states)?;
    let trace = source.forward_trace(states)?;
    let q = trace.output();

    let mut grad_out = Array2::zeros(q.dim());
    let mut total = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let best_next = next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = if t.terminal { t.reward } else { t.reward + gamma * best_next };
        let a = t.action.index();
        let (loss, grad) = smooth_l1(q[[i, a]], y);
        total += loss;
        grad_out[[i, a]] = grad / n as f64;
    }
    let grads = source.backward(&trace, &grad_out)?;
    opt.step(source, &grads)?;
    Ok(total / n as f64)
}

pub fn soft_update(source: &DenseNet, target: &mut DenseNet, tau: f64) -> Result<()> {
    target.blend_from(source, tau)
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: StateVector,
    /// Inclusivity of the pick window after a pick.
    pub inclusivity: Option<f64>,
    pub done: bool,
}

/// Episode environment shared by training and policy evaluation: a
/// shuffled stream, an error-free labeler, the time-last-seen tracker and
/// the reward window.
pub struct SamplingEnv<'a> {
    docs: &'a [Document],
    num_classes: usize,
    budget: usize,
    reward: RewardConfig,
    encoder: EncoderConfig,
    stream: Option<StreamSource<'a>>,
    current: Option<&'a Document>,
    tracker: LastSeenTracker,
    memory: PickMemory,
    picks: usize,
}

impl<'a> SamplingEnv<'a> {
    pub fn new(
        docs: &'a [Document],
        num_classes: usize,
        budget: usize,
        reward: RewardConfig,
        encoder: EncoderConfig,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(OrisError::Empty("training documents".into()));
        }
        reward.validate()?;
        encoder.validate()?;
        Ok(SamplingEnv {
            docs,
            num_classes,
            budget,
            reward,
            encoder,
            stream: None,
            current: None,
            tracker: LastSeenTracker::new(num_classes, encoder.k),
            memory: PickMemory::new(reward.m),
            picks: 0,
        })
    }

    pub fn state_len(&self) -> usize {
        self.docs[0].embedding.len() + self.num_classes
    }

    pub fn reset(&mut self, seed: u64) -> Result<()> {
        let mut stream = shuffle_stream(self.docs, seed)?;
        self.current = stream.next();
        self.stream = Some(stream);
        self.tracker = LastSeenTracker::new(self.num_classes, self.encoder.k);
        self.memory = PickMemory::new(self.reward.m);
        self.picks = 0;
        Ok(())
    }

    pub fn picks(&self) -> usize {
        self.picks
    }

    pub fn state(&self) -> Result<StateVector> {
        let doc = self
            .current
            .ok_or_else(|| OrisError::Invalid("environment not reset or already finished".into()))?;
        Ok(encode_state(&doc.embedding, &self.tracker, self.encoder.dt_scale))
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let doc = self
            .current
            .ok_or_else(|| OrisError::Invalid("step called on a finished episode".into()))?;
        let mut incl = None;
        if action.is_pick() {
            self.picks += 1;
            let label = doc.true_class;
            self.memory.push(label);
            self.tracker.record_emission(label);
            incl = Some(inclusivity(&self.memory, self.num_classes));
        }
        let reward = compute_reward(action, &self.memory, self.num_classes, &self.reward);
        self.tracker.advance_step();
        let next = self.stream.as_mut().and_then(Iterator::next);
        // at the end of the stream the current document stands in for the next one
        let next_doc = next.unwrap_or(doc);
        let next_state = encode_state(&next_doc.embedding, &self.tracker, self.encoder.dt_scale);
        self.current = next;
        let done = self.picks >= self.budget || next.is_none();
        if done {
            self.current = None;
        }
        Ok(StepOutcome {
            reward,
            next_state,
            inclusivity: incl,
            done,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub total_reward: f64,
    pub mean_inclusivity: f64,
    pub epsilon: f64,
    /// Mean training loss over the episode; NaN before warmup completes.
    pub loss: f64,
    pub picks: usize,
    pub steps: usize,
    /// The stream ran out before the budget was spent.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("episode,total_reward,mean_inclusivity,epsilon,loss\n");
        for e in &self.episodes {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                e.episode, e.total_reward, e.mean_inclusivity, e.epsilon, e.loss
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| OrisError::io(path, e))
    }

    pub fn mean_reward_last(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter().map(|e| e.total_reward).sum::<f64>() / tail.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub net: DenseNet,
    pub log: TrainingLog,
    pub buffer_len: usize,
}

const TAG_NET: u64 = 1;
const TAG_ACTIONS: u64 = 2;
const TAG_REPLAY: u64 = 3;
const TAG_EPISODE: u64 = 0x100;

pub fn train_agent(
    docs: &[Document],
    num_classes: usize,
    cfg: &AgentConfig,
    reward: &RewardConfig,
    encoder: &EncoderConfig,
    seed: u64,
) -> Result<TrainedAgent> {
    cfg.validate()?;
    let mut env = SamplingEnv::new(docs, num_classes, cfg.budget, *reward, *encoder)?;
    let mut source = DenseNet::new(&cfg.layer_sizes(env.state_len()), derive_seed(seed, TAG_NET))?;
    let mut target = source.clone();
    let mut opt = Adam::new(&source, cfg.optimizer);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut action_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_ACTIONS));
    let mut replay_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_REPLAY));
    let warmup = cfg.warmup_threshold().max(1);

    let mut log = TrainingLog::default();
    let mut global_step = 0u64;
    for episode in 0..cfg.episodes {
        env.reset(derive_seed(seed, TAG_EPISODE + episode as u64))?;
        let mut total_reward = 0.0;
        let mut incl_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut steps = 0usize;
        loop {
            let state = env.state()?;
            let eps = cfg.epsilon.value(global_step);
            let action = select_action(&source, &state, eps, &mut action_rng)?;
            let out = env.step(action)?;
            total_reward += out.reward;
            if let Some(i) = out.inclusivity {
                incl_sum += i;
            }
            buffer.push(Transition {
                state,
                action,
                reward: out.reward,
                next_state: out.next_state,
                terminal: cfg.terminal_masking && out.done,
            });
            if buffer.len() >= warmup {
                let batch = buffer.sample(cfg.minibatch, &mut replay_rng)?;
                loss_sum += train_step(&mut source, &target, &batch, cfg.gamma, &mut opt)?;
                loss_count += 1;
                soft_update(&source, &mut target, cfg.tau)?;
            }
            global_step += 1;
            steps += 1;
            if out.done {
                break;
            }
        }
        let picks = env.picks();
        log.episodes.push(EpisodeLog {
            episode,
            total_reward,
            mean_inclusivity: if picks > 0 { incl_sum / picks as f64 } else { 0.0 },
            epsilon: cfg.epsilon.value(global_step),
            loss: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                f64::NAN
            },
            picks,
            steps,
            truncated: picks < cfg.budget,
        });
        if !source.is_finite() {
            return Err(OrisError::Invalid(format!(
                "network parameters diverged in episode {episode}"
            )));
        }
    }
    Ok(TrainedAgent {
        net: source,
        log,
        buffer_len: buffer.len(),
    })
}

/// Total reward of each of `episodes` episodes played by `policy` in the
/// training environment.
pub fn evaluate_policy<F>(
    docs: &[Document],
    num_classes: usize,
    budget: usize,
    reward: &RewardConfig,
    encoder: &EncoderConfig,
    episodes: usize,
    seed: u64,
    mut policy: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&StateVector) -> Result<Action>,
{
    let mut env = SamplingEnv::new(docs, num_classes, budget, *reward, *encoder)?;
    let mut totals = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        env.reset(derive_seed(seed, TAG_EPISODE + episode as u64))?;
        let mut total = 0.0;
        loop {
            let state = env.state()?;
            let out = env.step(policy(&state)?)?;
            total += out.reward;
            if out.done {
                break;
            }
        }
        totals.push(total);
    }
    Ok(totals)
}
