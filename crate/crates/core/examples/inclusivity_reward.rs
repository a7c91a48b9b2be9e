//! Inclusivity of a few pick windows over five classes and the reward a
//! pick earns with the default shaping parameters.

use oris::reward::{compute_reward, inclusivity, Action, PickMemory, RewardConfig};

fn main() {
    let cfg = RewardConfig::default();
    let windows: [(&str, Vec<usize>); 5] = [
        ("balanced", vec![0, 1, 2, 3, 4, 0, 1, 2, 3, 4]),
        ("one rare class missing", vec![0, 1, 3, 4, 0, 1, 3, 4, 0, 1]),
        ("two classes", vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]),
        ("majority heavy", vec![1, 1, 1, 1, 1, 1, 1, 0, 3, 4]),
        ("single class", vec![2; 10]),
    ];
    println!("{:<24} {:>11} {:>12}", "window", "inclusivity", "pick reward");
    for (name, labels) in windows {
        let m = PickMemory::from_labels(cfg.m, labels);
        println!(
            "{name:<24} {:>11.4} {:>12.6}",
            inclusivity(&m, 5),
            compute_reward(Action::Pick, &m, 5, &cfg)
        );
    }
    println!("discard reward: {}", cfg.lambda);
}
