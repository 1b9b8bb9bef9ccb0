//! Risk medians over a grid of sample sizes and seeds, run in parallel.

use ldp_partition::evaluate::{consistency_sweep, SweepConfig};
use ldp_partition::Result;

fn main() -> Result<()> {
    let mut config = SweepConfig::new("lipschitz-uniform", 1, 2.0, vec![1 << 10, 1 << 12, 1 << 14], (0..4).collect());
    config.n_test = 20_000;
    let jobs = std::thread::available_parallelism().map_or(1, |p| p.get());
    let result = consistency_sweep(&config, jobs)?;
    for row in result.summary() {
        println!("n={:>6}  median {:.5}  range [{:.5}, {:.5}]", row.n, row.median_risk, row.min_risk, row.max_risk);
    }
    if let Some(slope) = result.loglog_slope() {
        println!("log-log slope of the medians: {slope:.3}");
    }
    Ok(())
}
