//! Accuracy and unfairness against lambda for tracked sets of 20, 50 and 100
//! scores per group.
//!
//! cargo run --release --example set_size_ablation -- [seeds] [n_lambdas] [max_lambda] [local_lr]

use fairfl::experiment::{set_size_ablation, ExperimentConfig, LambdaGrid, Trainer};

fn main() -> fairfl::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().map_or(Ok(5), |s| s.parse()).expect("seed count");
    let n_lambdas: usize = args.next().map_or(Ok(8), |s| s.parse()).expect("grid size");
    let hi: f64 = args.next().map_or(Ok(10.0), |s| s.parse()).expect("max lambda");
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let lambdas = LambdaGrid { lo: 1e-5, hi, n: n_lambdas }.values();
    let mut config = ExperimentConfig::synthetic(Trainer::Algorithm1, 0.0, 0);
    if let Some(lr) = args.next() {
        config.training.local_lr = lr.parse().expect("local step size");
    }

    for (size, result) in set_size_ablation(&config, &lambdas, &seeds, 1)? {
        println!("set size {size}");
        println!("{:>10} {:>16} {:>16}", "lambda", "accuracy", "sp");
        for p in &result.table {
            println!(
                "{:>10.2e} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4}",
                p.lambda,
                p.accuracy_mean,
                1.96 * p.accuracy_se,
                p.sp_mean,
                1.96 * p.sp_se
            );
        }
    }
    Ok(())
}
