//! Check the released densities against the privacy budget, for a correctly
//! calibrated mechanism and for one with too little response noise.

use ldp_partition::evaluate::privacy_ratio_audit;
use ldp_partition::rng::Purpose;
use ldp_partition::{calibrate, Partition, PartitionSpec, PrivacyParams, Result, SeedStream};

fn main() -> Result<()> {
    let partition = Partition::new(PartitionSpec::new(0.5, 2, 1.0)?)?;
    let stream = SeedStream::new(0);
    let good = calibrate(1.0, 2.0)?;
    let bad = PrivacyParams::new(1.0, good.sigma_w, good.sigma_z / 2.0, 2.0)?;
    for (label, params) in [("calibrated", good), ("sigma_z halved", bad)] {
        let audit = privacy_ratio_audit(&partition, &params, 10_000, &mut stream.rng(Purpose::Audit, 0))?;
        println!(
            "{label:<15} bound {:.6}  worst case {:.6}  max sampled {:.6}  -> {}",
            audit.bound,
            audit.worst_case,
            audit.max_log_ratio,
            if audit.pass { "within budget" } else { "exceeds budget" }
        );
    }
    Ok(())
}
