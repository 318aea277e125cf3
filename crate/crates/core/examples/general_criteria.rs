//! Training under each supported fairness criterion.
//!
//! cargo run --release --example general_criteria -- [lambda]

use fairfl::experiment::{run_experiment, ExperimentConfig, Trainer};
use fairfl::fairness::{Criterion, FairnessSpec};

fn main() -> fairfl::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse()).expect("lambda");
    let criteria = [
        Criterion::StatisticalParity,
        Criterion::EqualOpportunity,
        Criterion::EqualizedOdds,
        Criterion::PredictiveEquality,
        Criterion::RiskParity,
        Criterion::ConditionalStatisticalParity { feature: 0, threshold: 0.0 },
    ];
    println!("{:<50} {:>9} {:>9} {:>9}", "criterion", "accuracy", "mmd", "sp");
    for criterion in criteria {
        let mut config = ExperimentConfig::synthetic(Trainer::Algorithm2, lambda, 0);
        config.fairness = FairnessSpec::new(criterion);
        config.training.rounds = 30;
        config.training.eval_every = 30;
        let out = run_experiment(&config)?;
        let m = &out.final_record().and_then(|r| r.metrics.as_ref()).expect("final round is evaluated").test;
        println!("{:<50} {:>9.4} {:>9.4} {:>9.4}", format!("{criterion:?}"), m.accuracy, m.mmd, m.sp_unfairness);
    }
    Ok(())
}
