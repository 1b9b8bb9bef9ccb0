//! Privatise simulated individuals one record at a time, publish the
//! aggregate and read it back.

use ldp_partition::collector::privatize_and_aggregate;
use ldp_partition::rng::Purpose;
use ldp_partition::{calibrate, load, make_scenario, privatize_record, publish, Partition, PartitionSpec, Result, ScenarioParams, SeedStream};

fn main() -> Result<()> {
    let stream = SeedStream::new(7);
    let scenario = make_scenario("lipschitz-uniform", 1, &ScenarioParams::default())?;
    let data = scenario.sample_xy(&mut stream.rng(Purpose::Data, 0), 500);

    let partition = Partition::new(PartitionSpec::new(0.25, 1, 1.0)?)?;
    let params = calibrate(2.0, 1.5)?;
    println!("alpha=2, M=1.5: sigma_w={:.4} sigma_z={:.4}", params.sigma_w, params.sigma_z);

    let first = &data[0];
    let record = privatize_record(&partition, &params, &first.x, first.y, &mut stream.rng(Purpose::Privatize, 0))?;
    println!("x={:.3} y={:.3} is released as", first.x[0], first.y);
    println!("  w = {:?}", record.w.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    println!("  z = {:?}", record.z.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());

    let agg = privatize_and_aggregate(&partition, &params, &data, &stream)?.with_seed(7);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("aggregate.csv");
    publish(&agg, &path, None)?;
    print!("{}", std::fs::read_to_string(&path)?);

    let back = load(&path)?;
    assert_eq!(back.nu_tilde, agg.nu_tilde);
    assert_eq!(back.mu_tilde, agg.mu_tilde);
    println!("reloaded {} cells bit-for-bit", back.len());
    Ok(())
}
