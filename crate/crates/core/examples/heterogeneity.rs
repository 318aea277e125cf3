//! Accuracy and unfairness as client heterogeneity varies, at lambda = 50.
//!
//! cargo run --release --example heterogeneity -- [seeds]

use fairfl::experiment::{heterogeneity_ablation, ExperimentConfig, Trainer};

fn main() -> fairfl::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).map_or(Ok(3), |s| s.parse()).expect("seed count");
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let config = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.0, 0);
    println!("{:>6} {:>18} {:>18}", "alpha", "accuracy", "sp");
    for r in heterogeneity_ablation(&config, &seeds, 1)? {
        println!(
            "{:>6.2} {:>9.4} +- {:<6.4} {:>9.4} +- {:<6.4}",
            r.heterogeneity, r.accuracy_mean, r.accuracy_ci, r.sp_mean, r.sp_ci
        );
    }
    Ok(())
}
