//! Per-round cross-entropy and MMD on train and test, averaged over seeds.
//!
//! cargo run --release --example convergence -- [seeds]

use fairfl::experiment::{convergence_ablation, ExperimentConfig, Trainer};

fn main() -> fairfl::Result<()> {
    let n_seeds: u64 = std::env::args().nth(1).map_or(Ok(3), |s| s.parse()).expect("seed count");
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let config = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.0, 0);
    let rows = convergence_ablation(&config, &seeds, 1)?;
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "round", "train_ce", "train_mmd", "test_ce", "test_mmd");
    for r in rows.iter().filter(|r| r.round == 1 || r.round % 10 == 0) {
        println!(
            "{:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            r.round, r.train_ce, r.train_mmd, r.test_ce, r.test_mmd
        );
    }
    Ok(())
}
