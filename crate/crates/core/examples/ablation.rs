//! Runs every recommender on one synthetic dataset and prints mean AUCs.
//!
//!     cargo run --release --example ablation -- 3

use ocrank::config::RunConfig;
use ocrank::experiment::run_ablation;
use ocrank::parallel::Execution;

fn main() -> ocrank::Result<()> {
    env_logger::init();
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(0);
    let report = run_ablation(&RunConfig::default(), seed, Execution::Parallel)?;
    for (name, r) in &report.reports {
        println!("{}", r.summary(name));
    }
    println!(
        "ensemble weights: cf {:.4}, ppr {:.4}",
        report.ensemble_model.weight[0], report.ensemble_model.weight[1]
    );
    println!(
        "two-stage over single-stage: mean diff {:+.4}, t p {:.3e}, sign p {:.3e}",
        report.test_two_stage.mean_difference,
        report.test_two_stage.t_p_value,
        report.test_two_stage.sign_p_value
    );
    Ok(())
}
