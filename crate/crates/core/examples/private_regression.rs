//! Fit the private partitioning estimate at the default schedules and
//! compare it with the non-private fit on the same data.

use ldp_partition::evaluate::l2_risk;
use ldp_partition::rng::Purpose;
use ldp_partition::{aggregate_fast, calibrate, fit_nonprivate_baseline, fit_private_regression, make_scenario, schedules, Partition, PartitionSpec, Result, ScenarioParams, SeedStream};

fn main() -> Result<()> {
    let stream = SeedStream::new(3);
    let scenario = make_scenario("lipschitz-uniform", 1, &ScenarioParams::default())?;
    println!("{:>7} {:>8} {:>10} {:>12} {:>12}", "n", "h", "cells", "private L2", "plain L2");
    for k in [12, 14, 16] {
        let n = 1u64 << k;
        let s = schedules(n, 1, 1.0, 1.0, 1.0)?;
        let partition = Partition::new(PartitionSpec::new(s.h, 1, s.radius)?)?;
        let params = calibrate(2.0, s.m_trunc)?;
        let data = scenario.sample_xy(&mut stream.rng(Purpose::Data, n), n as usize);

        let agg = aggregate_fast(&partition, &params, &data, &mut stream.rng(Purpose::Aggregate, n))?;
        let private = fit_private_regression(&agg, s.c)?;
        let plain = fit_nonprivate_baseline(&data, &partition, f64::INFINITY)?;

        let r_private = l2_risk(&private, scenario.as_ref(), 50_000, &mut stream.rng(Purpose::TestPoints, n))?;
        let r_plain = l2_risk(&plain, scenario.as_ref(), 50_000, &mut stream.rng(Purpose::TestPoints, n))?;
        println!(
            "{n:>7} {:>8.4} {:>10} {:>12.5} {:>12.5}",
            s.h,
            partition.len(),
            r_private.point_estimate,
            r_plain.point_estimate
        );
    }
    Ok(())
}
