//! `oris` subcommands.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use crate::config::ExperimentConfig;
use crate::corpus::{materialize_tokens, write_dataset, write_word_vectors};
use crate::dqn::train_agent;
use crate::harness::{aggregate, aggregate_to_csv, read_record, run_agent, write_record, AgentKind};
use crate::nnet::DenseNet;

#[derive(Debug, Parser)]
#[command(name = "oris", version, about = "Online active learning with an inclusive sampling agent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the DQN sampling agent and write its checkpoint.
    TrainAgent {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Per-episode training log (csv).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run online active learning with one sampling strategy.
    RunAl {
        #[arg(long)]
        config: PathBuf,
        /// random, uncertainty, diversity or oris
        #[arg(long)]
        agent: AgentKind,
        /// Trained checkpoint, required for the oris agent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean and standard deviation per budget interval across result files.
    Aggregate {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the configured synthetic corpus as dataset and word-vector files.
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::TrainAgent { config, out, log, seed } => {
            let cfg = load_config(&config)?;
            let corpus = cfg.corpus()?;
            info!(
                "training agent on {} documents, {} episodes of budget {}",
                corpus.train.len(),
                cfg.agent.episodes,
                cfg.agent.budget
            );
            let trained = train_agent(&corpus.train, corpus.labels.len(), &cfg.agent, &cfg.reward, &cfg.encoder, seed)?;
            trained.net.save(&out)?;
            if let Some(log_path) = log {
                trained.log.write_csv(&log_path)?;
            }
            info!(
                "mean reward over the last 50 episodes: {:.4}",
                trained.log.mean_reward_last(50)
            );
        }
        Command::RunAl {
            config,
            agent,
            checkpoint,
            out,
        } => {
            let cfg = load_config(&config)?;
            let corpus = cfg.corpus()?;
            let net = match (agent, checkpoint) {
                (AgentKind::Oris, None) => bail!("--checkpoint is required for the oris agent"),
                (AgentKind::Oris, Some(p)) => {
                    Some(DenseNet::load(&p).with_context(|| format!("loading checkpoint {}", p.display()))?)
                }
                _ => None,
            };
            let record = run_agent(agent, &corpus.train, &corpus.test, corpus.labels.len(), &cfg.harness, net.as_ref())?;
            for r in record.runs.iter().filter(|r| r.truncated) {
                log::warn!(
                    "run {} exhausted the stream after {} of {} picks",
                    r.run_id,
                    r.oracle_queries,
                    cfg.harness.budget
                );
            }
            write_record(&record, &out)?;
            info!(
                "{agent}: mean final machine f1 {:.4}, human f1 {:.4}",
                record.mean_final(|r| r.machine_f1_macro),
                record.mean_final(|r| r.human_f1_macro)
            );
        }
        Command::Aggregate { inputs, out } => {
            let mut rows = Vec::new();
            for p in &inputs {
                rows.extend(read_record(p)?);
            }
            fs::write(&out, aggregate_to_csv(&aggregate(&rows)))
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::GenSynth { config, out_dir } => {
            let cfg = load_config(&config)?;
            if cfg.uses_files() {
                bail!("gen-synth needs a config without data.train/test/vectors");
            }
            let mut corpus = cfg.corpus()?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            let mut table = materialize_tokens(&mut corpus.train, "train");
            table.merge(materialize_tokens(&mut corpus.test, "test"))?;
            write_dataset(&corpus.train, &corpus.labels, out_dir.join("train.tsv"))?;
            write_dataset(&corpus.test, &corpus.labels, out_dir.join("test.tsv"))?;
            write_word_vectors(&table, out_dir.join("vectors.txt"))?;
        }
    }
    Ok(())
}

pub fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
