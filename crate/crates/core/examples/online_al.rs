//! Online active learning on an imbalanced five-class stream: trains the
//! sampling agent, then compares it with the random, uncertainty and
//! diversity baselines under a forgetting annotator.
//!
//! cargo run --release --example online_al

use std::time::Instant;

use oris::corpus::{generate_synthetic, proportional_counts, LabelSpace};
use oris::dqn::{train_agent, AgentConfig};
use oris::encoder::EncoderConfig;
use oris::harness::{run_agent, AgentKind, HarnessConfig};
use oris::reward::RewardConfig;

fn main() -> oris::Result<()> {
    let proportions = [0.32, 0.36, 0.04, 0.15, 0.13];
    let labels = LabelSpace::new(["sadness", "joy", "surprise", "anger", "fear"])?;
    let corpus = |n, seed| generate_synthetic(&labels, &proportional_counts(&proportions, n), 8, 3.0, seed);
    let (rl_train, stream, test) = (corpus(2000, 70)?, corpus(20_000, 71)?, corpus(1000, 72)?);

    let t = Instant::now();
    let agent_cfg = AgentConfig {
        episodes: 100,
        minibatch: 64,
        ..AgentConfig::default()
    };
    let agent = train_agent(&rl_train, 5, &agent_cfg, &RewardConfig::default(), &EncoderConfig::default(), 7)?;
    println!("agent trained in {:.1?}", t.elapsed());

    let cfg = HarnessConfig::default();
    for kind in AgentKind::ALL {
        let rec = run_agent(kind, &stream, &test, 5, &cfg, Some(&agent.net))?;
        let truncated = rec.runs.iter().filter(|r| r.truncated).count();
        println!(
            "{kind:<11} final machine f1 {:.3}  human f1 {:.3}  oracle errors {:>5.1}  truncated runs {truncated}",
            rec.mean_final(|r| r.machine_f1_macro),
            rec.mean_final(|r| r.human_f1_macro),
            rec.mean_final(|r| r.oracle_errors as f64),
        );
    }
    Ok(())
}
