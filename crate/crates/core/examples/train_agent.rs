//! Trains the sampling agent on a two-class toy stream and compares its
//! greedy policy against a coin-flip policy.
//!
//! cargo run --release --example train_agent -- [seed] [episodes]

use std::time::Instant;

use oris::corpus::{generate_synthetic, LabelSpace};
use oris::dqn::{decide, evaluate_policy, train_agent, AgentConfig};
use oris::encoder::EncoderConfig;
use oris::harness::random_decide;
use oris::reward::RewardConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> oris::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seed = args.first().copied().unwrap_or(1);
    let episodes = args.get(1).copied().unwrap_or(300) as usize;

    let labels = LabelSpace::numbered(2)?;
    let docs = generate_synthetic(&labels, &[500, 500], 4, 10.0, seed)?;
    let cfg = AgentConfig {
        budget: 20,
        episodes,
        minibatch: 32,
        ..AgentConfig::default()
    };
    let reward = RewardConfig {
        delta: 16.0,
        ..RewardConfig::default()
    };
    let encoder = EncoderConfig::default();

    let t = Instant::now();
    let agent = train_agent(&docs, 2, &cfg, &reward, &encoder, seed)?;
    println!("trained {episodes} episodes in {:.1?}", t.elapsed());
    for e in agent.log.episodes.iter().step_by((episodes / 10).max(1)) {
        println!(
            "episode {:4}  reward {:7.2}  inclusivity {:.3}  eps {:.3}  loss {:.4}",
            e.episode, e.total_reward, e.mean_inclusivity, e.epsilon, e.loss
        );
    }

    let greedy = evaluate_policy(&docs, 2, 20, &reward, &encoder, 50, seed + 1000, |s| decide(&agent.net, s))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = evaluate_policy(&docs, 2, 20, &reward, &encoder, 50, seed + 1000, |_| {
        Ok(random_decide(&mut rng, 0.5))
    })?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("training log, last 50 episodes: {:.2}", agent.log.mean_reward_last(50));
    println!("greedy policy: {:.2}   random policy: {:.2}", mean(&greedy), mean(&random));
    Ok(())
}
