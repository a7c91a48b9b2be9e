//! Error probability of the simulated annotator as a function of the steps
//! since a class was last labeled, and a Monte Carlo check of the slip rate.

use oris::oracle::{DecayModel, Oracle};

fn main() {
    let models = [
        ("sigmoid (0.3, 9)", DecayModel::SLOW_SIGMOID),
        ("exponential (0.6, -19)", DecayModel::FAST_EXPONENTIAL),
    ];
    println!("{:>4}  {:>18}  {:>22}", "dt", models[0].0, models[1].0);
    for dt in (0..=50).step_by(5) {
        println!(
            "{dt:>4}  {:>18.6}  {:>22.6}",
            models[0].1.error_probability(dt as f64),
            models[1].1.error_probability(dt as f64)
        );
    }

    // class 0 is labeled once, then again after 30 quiet steps: half of those slip
    let trials = 20_000;
    let mut slips = 0;
    for seed in 0..trials {
        let mut oracle = Oracle::new(DecayModel::SLOW_SIGMOID, 5, seed);
        for _ in 0..30 {
            oracle.advance_step();
        }
        if oracle.annotate(0) != 0 {
            slips += 1;
        }
    }
    println!("\nslip rate at dt = 30: {:.4} (expected 0.5)", slips as f64 / trials as f64);
}
