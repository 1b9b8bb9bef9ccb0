//! Plug-in classification from the privatised response sums.

use ldp_partition::evaluate::excess_class_risk;
use ldp_partition::rng::Purpose;
use ldp_partition::{aggregate_fast, calibrate, classify, make_scenario, schedules, Partition, PartitionSpec, PrivateClassifier, Result, ScenarioParams, SeedStream};

fn main() -> Result<()> {
    let stream = SeedStream::new(11);
    let scenario = make_scenario("classification-smooth", 1, &ScenarioParams::default())?;
    for k in [12, 14, 16] {
        let n = 1u64 << k;
        let s = schedules(n, 1, 1.0, 1.0, 1.0)?;
        let partition = Partition::new(PartitionSpec::new(s.h, 1, s.radius)?)?;
        let params = calibrate(2.0, 1.0)?;
        let data = scenario.sample_xy(&mut stream.rng(Purpose::Data, n), n as usize);
        let agg = aggregate_fast(&partition, &params, &data, &mut stream.rng(Purpose::Aggregate, n))?;

        let at_quarter = classify(&agg, &[0.25])?;
        let classifier = PrivateClassifier::from_aggregate(&agg);
        let risk = excess_class_risk(&classifier, scenario.as_ref(), 100_000, &mut stream.rng(Purpose::TestPoints, n))?;
        println!(
            "n={n:>6}: label at x=0.25 {:?}, excess risk {:.4} (se {:.4}), class condition {:.3}",
            at_quarter, risk.point_estimate, risk.std_error, s.class_condition
        );
    }
    Ok(())
}
