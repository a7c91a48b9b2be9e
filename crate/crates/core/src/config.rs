//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma
//! separated. Unknown keys are rejected and every problem in a file is
//! reported at once. Relative data paths resolve against the directory of
//! the config file.
//!
//! ```text
//! seeds = 0, 1, 2, 3, 4
//! data.labels = sadness, joy, surprise, anger, fear
//! oracle.kind = sigmoid
//! oracle.alpha = 0.3
//! oracle.beta = 9
//! harness.budget = 500
//! harness.frequency = 25
//! synth.proportions = 0.32, 0.36, 0.04, 0.15, 0.13
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{generate_synthetic, load_dataset, load_word_vectors, proportional_counts, Document, LabelSpace};
use crate::dqn::AgentConfig;
use crate::encoder::EncoderConfig;
use crate::harness::HarnessConfig;
use crate::oracle::DecayModel;
use crate::reward::RewardConfig;
use crate::{derive_seed, OrisError, Result};

pub const DEFAULT_LABELS: [&str; 5] = ["sadness", "joy", "surprise", "anger", "fear"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
}

/// Gaussian corpus used when no data files are configured.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Class proportions; `None` means uniform.
    pub proportions: Option<Vec<f64>>,
    pub train_size: usize,
    pub test_size: usize,
    pub dim: usize,
    pub sep: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            proportions: None,
            train_size: 2000,
            test_size: 500,
            dim: 16,
            sep: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub labels: Vec<String>,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub encoder: EncoderConfig,
    pub reward: RewardConfig,
    pub agent: AgentConfig,
    /// Also carries the oracle, the learner and the run seeds.
    pub harness: HarnessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            encoder: EncoderConfig::default(),
            reward: RewardConfig::default(),
            agent: AgentConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

/// Train and test documents plus their label space.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub labels: LabelSpace,
    pub train: Vec<Document>,
    pub test: Vec<Document>,
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn parse_one<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

#[derive(Default)]
struct OracleParts {
    kind: Option<String>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| OrisError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut errs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut oracle = OracleParts::default();
        let mut runs: Option<usize> = None;
        let mut seeds: Option<Vec<u64>> = None;

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let Some((key, value)) = line.split_once('=') else {
                errs.push(format!("line {lineno}: expected `key = value`, got {line:?}"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                errs.push(format!("line {lineno}: duplicate key {key}"));
                continue;
            }
            let path = |v: &str| Some(base.join(v));
            let r: std::result::Result<(), String> = (|| {
                match key {
                    "seeds" => seeds = Some(parse_list(value)?),
                    "runs" => runs = Some(parse_one(value)?),
                    "data.train" => cfg.data.train = path(value),
                    "data.test" => cfg.data.test = path(value),
                    "data.vectors" => cfg.data.vectors = path(value),
                    "data.labels" => cfg.labels = parse_list(value)?,
                    "oracle.kind" => oracle.kind = Some(value.to_string()),
                    "oracle.alpha" => oracle.alpha = Some(parse_one(value)?),
                    "oracle.beta" => oracle.beta = Some(parse_one(value)?),
                    "encoder.k" => cfg.encoder.k = parse_one(value)?,
                    "encoder.dt_scale" => cfg.encoder.dt_scale = parse_one(value)?,
                    "reward.rho" => cfg.reward.rho = parse_one(value)?,
                    "reward.delta" => cfg.reward.delta = parse_one(value)?,
                    "reward.lambda" => cfg.reward.lambda = parse_one(value)?,
                    "reward.m" => cfg.reward.m = parse_one(value)?,
                    "agent.gamma" => cfg.agent.gamma = parse_one(value)?,
                    "agent.tau" => cfg.agent.tau = parse_one(value)?,
                    "agent.minibatch" => cfg.agent.minibatch = parse_one(value)?,
                    "agent.budget" => cfg.agent.budget = parse_one(value)?,
                    "agent.episodes" => cfg.agent.episodes = parse_one(value)?,
                    "agent.buffer_capacity" => cfg.agent.buffer_capacity = parse_one(value)?,
                    "agent.warmup" => cfg.agent.warmup = Some(parse_one(value)?),
                    "agent.hidden" => cfg.agent.hidden = parse_list(value)?,
                    "agent.learning_rate" => cfg.agent.optimizer.learning_rate = parse_one(value)?,
                    "agent.epsilon_start" => cfg.agent.epsilon.start = parse_one(value)?,
                    "agent.epsilon_end" => cfg.agent.epsilon.end = parse_one(value)?,
                    "agent.epsilon_decay" => cfg.agent.epsilon.decay_rate = parse_one(value)?,
                    "harness.budget" => cfg.harness.budget = parse_one(value)?,
                    "harness.frequency" => cfg.harness.frequency = parse_one(value)?,
                    "harness.random_pick_prob" => cfg.harness.random_pick_prob = Some(parse_one(value)?),
                    "harness.uncertainty_theta0" => cfg.harness.uncertainty_theta0 = parse_one(value)?,
                    "harness.diversity_cap" => cfg.harness.diversity_cap = parse_one(value)?,
                    "learner.epochs" => cfg.harness.learner.epochs = parse_one(value)?,
                    "learner.batch_size" => cfg.harness.learner.batch_size = parse_one(value)?,
                    "learner.learning_rate" => cfg.harness.learner.learning_rate = parse_one(value)?,
                    "synth.proportions" => cfg.synth.proportions = Some(parse_list(value)?),
                    "synth.train_size" => cfg.synth.train_size = parse_one(value)?,
                    "synth.test_size" => cfg.synth.test_size = parse_one(value)?,
                    "synth.dim" => cfg.synth.dim = parse_one(value)?,
                    "synth.sep" => cfg.synth.sep = parse_one(value)?,
                    "synth.seed" => cfg.synth.seed = parse_one(value)?,
                    _ => return Err(format!("unknown key {key}")),
                }
                Ok(())
            })();
            if let Err(e) = r {
                errs.push(format!("line {lineno}: {key}: {e}"));
            }
        }

        match (runs, seeds) {
            (Some(n), Some(s)) if n != s.len() => {
                errs.push(format!("runs = {n} but {} seeds were listed", s.len()))
            }
            (_, Some(s)) => cfg.harness.seeds = s,
            (Some(n), None) => cfg.harness.seeds = (0..n as u64).collect(),
            (None, None) => {}
        }

        let (def_alpha, def_beta) = match oracle.kind.as_deref() {
            Some("exponential") => (0.6, -19.0),
            _ => (0.3, 9.0),
        };
        match DecayModel::from_parts(
            oracle.kind.as_deref().unwrap_or("sigmoid"),
            oracle.alpha.unwrap_or(def_alpha),
            oracle.beta.unwrap_or(def_beta),
        ) {
            Ok(m) => cfg.harness.oracle = m,
            Err(e) => errs.push(e.to_string()),
        }
        cfg.harness.encoder = cfg.encoder;

        errs.extend(cfg.validation_errors());
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(OrisError::Config(errs))
        }
    }

    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Err(e) = LabelSpace::new(self.labels.iter().cloned()) {
            errs.push(format!("data.labels: {e}"));
        }
        if let Err(e) = self.encoder.validate() {
            errs.push(e.to_string());
        }
        match self.reward.validate() {
            Err(OrisError::Config(v)) => errs.extend(v),
            Err(e) => errs.push(e.to_string()),
            Ok(()) => {}
        }
        errs.extend(self.agent.validation_errors());
        errs.extend(self.harness.validation_errors());
        errs.extend(self.harness.learner.validation_errors());

        let d = &self.data;
        let given = [&d.train, &d.test, &d.vectors].iter().filter(|p| p.is_some()).count();
        if given != 0 && given != 3 {
            errs.push("data.train, data.test and data.vectors must be set together".into());
        }
        if given == 0 {
            let s = &self.synth;
            if let Some(p) = &s.proportions {
                if p.len() != self.labels.len() {
                    errs.push(format!(
                        "synth.proportions has {} entries for {} classes",
                        p.len(),
                        self.labels.len()
                    ));
                }
                if p.iter().any(|&x| !(x >= 0.0)) || p.iter().sum::<f64>() <= 0.0 {
                    errs.push("synth.proportions must be nonnegative with a positive sum".into());
                }
            }
            if s.dim < self.labels.len() {
                errs.push(format!("synth.dim ({}) must be >= the class count ({})", s.dim, self.labels.len()));
            }
            if s.train_size == 0 || s.test_size == 0 {
                errs.push("synth.train_size and synth.test_size must be >= 1".into());
            }
            if !(s.sep >= 0.0) {
                errs.push(format!("synth.sep must be >= 0, got {}", s.sep));
            }
        }
        errs
    }

    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.labels.iter().cloned())
    }

    pub fn uses_files(&self) -> bool {
        self.data.train.is_some()
    }

    /// Loads the configured dataset files, or generates the synthetic corpus.
    pub fn corpus(&self) -> Result<Corpus> {
        let labels = self.label_space()?;
        if let (Some(train), Some(test), Some(vectors)) = (&self.data.train, &self.data.test, &self.data.vectors) {
            let table = load_word_vectors(vectors)?;
            let train = load_dataset(train, &table, &labels)?;
            let test = load_dataset(test, &table, &labels)?;
            return Ok(Corpus { labels, train, test });
        }
        let s = &self.synth;
        let props = s.proportions.clone().unwrap_or_else(|| vec![1.0; labels.len()]);
        let train = generate_synthetic(
            &labels,
            &proportional_counts(&props, s.train_size),
            s.dim,
            s.sep,
            derive_seed(s.seed, 1),
        )?;
        let test = generate_synthetic(
            &labels,
            &proportional_counts(&props, s.test_size),
            s.dim,
            s.sep,
            derive_seed(s.seed, 2),
        )?;
        Ok(Corpus { labels, train, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("/cfg"))
    }

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = parse("# nothing\n\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.harness.budget, 500);
        assert_eq!(cfg.harness.frequency, 25);
        assert_eq!(cfg.harness.oracle, DecayModel::SLOW_SIGMOID);
        assert_eq!(cfg.agent.minibatch, 512);
        assert_eq!(cfg.labels.len(), 5);
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse(
            "seeds = 3, 9\noracle.kind = exponential\nharness.budget = 40 # small\nharness.frequency = 10\n\
             agent.hidden = 32, 16\nagent.learning_rate = 0.001\ndata.train = t.tsv\ndata.test = /abs/x.tsv\n\
             data.vectors = v.txt\nlearner.epochs = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.harness.seeds, vec![3, 9]);
        assert_eq!(cfg.harness.oracle, DecayModel::FAST_EXPONENTIAL);
        assert_eq!(cfg.harness.budget, 40);
        assert_eq!(cfg.agent.hidden, vec![32, 16]);
        assert_eq!(cfg.agent.optimizer.learning_rate, 0.001);
        assert_eq!(cfg.data.train, Some(PathBuf::from("/cfg/t.tsv")));
        assert_eq!(cfg.data.test, Some(PathBuf::from("/abs/x.tsv")));
        assert_eq!(cfg.harness.learner.epochs, 5);
    }

    #[test]
    fn runs_expands_to_seeds() {
        assert_eq!(parse("runs = 3").unwrap().harness.seeds, vec![0, 1, 2]);
        assert!(parse("runs = 3\nseeds = 1, 2").is_err());
    }

    #[test]
    fn all_errors_reported_together() {
        let err = parse("bogus = 1\nharness.budget = 10\nharness.frequency = 20\nreward.m = x\nno equals sign\n")
            .unwrap_err();
        match err {
            OrisError::Config(errs) => {
                assert_eq!(errs.len(), 4, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("bogus")));
                assert!(errs.iter().any(|e| e.contains("harness.frequency")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn partial_data_paths_rejected() {
        assert!(parse("data.train = a.tsv").is_err());
    }

    #[test]
    fn duplicate_keys_rejected() {
        assert!(parse("reward.m = 5\nreward.m = 6").is_err());
    }

    #[test]
    fn synthetic_corpus_follows_proportions() {
        let cfg = parse("synth.proportions = 0.32, 0.36, 0.04, 0.15, 0.13\nsynth.train_size = 1000\nsynth.test_size = 100").unwrap();
        let c = cfg.corpus().unwrap();
        assert_eq!(c.train.len(), 1000);
        assert_eq!(c.test.len(), 100);
        let rare = c.train.iter().filter(|d| d.true_class == 2).count();
        assert_eq!(rare, 40);
        assert_ne!(c.train[0].embedding, c.test[0].embedding);
    }
}
