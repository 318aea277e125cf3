//! Global versus local fairness regularization on the synthetic federation.
//!
//! Every client is unfair on its own under the Bayes classifier, yet the
//! pooled distribution is fair. Regularizing the global MMD keeps accuracy;
//! regularizing each client's MMD does not.
//!
//! cargo run --release --example synthetic_separation -- [seeds] [n_lambdas]

use fairfl::experiment::{sweep, ExperimentConfig, LambdaGrid, Trainer};

fn main() -> fairfl::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().map_or(Ok(3), |s| s.parse()).expect("seed count");
    let n_lambdas: usize = args.next().map_or(Ok(8), |s| s.parse()).expect("grid size");
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let lambdas = LambdaGrid { lo: 1e-5, hi: 100.0, n: n_lambdas }.values();

    println!("{:>10} {:>14} {:>10} {:>10} {:>10}", "lambda", "trainer", "accuracy", "sp", "runs");
    for trainer in [Trainer::Algorithm1, Trainer::LocalFair, Trainer::Centralized] {
        let config = ExperimentConfig::synthetic(trainer, 0.0, 0);
        let result = sweep(&config, &lambdas, &seeds, 1)?;
        for p in &result.table {
            println!(
                "{:>10.2e} {:>14} {:>10.4} {:>10.4} {:>10}",
                p.lambda,
                trainer.as_str(),
                p.accuracy_mean,
                p.sp_mean,
                p.runs
            );
        }
    }
    Ok(())
}
