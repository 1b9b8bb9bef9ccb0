//! Build a partition, locate points in it and list its cells.

use ldp_partition::{Partition, PartitionSpec, Result};

fn main() -> Result<()> {
    let spec = PartitionSpec::new(1.0, 2, 1.0)?;
    let partition = Partition::new(spec)?;
    println!("h=1, d=2, radius=1: {} cells", partition.len());
    for (j, cell) in partition.cells().iter().enumerate() {
        println!("  {:>2}  ({cell})  center {:?}", j + 1, spec.cell_center(cell));
    }

    for x in [[0.3, -0.2], [-0.7, 0.9], [2.5, 0.0]] {
        let cell = spec.quantise(&x)?;
        match partition.locate(&x)? {
            Some(slot) => println!("{x:?} -> ({cell}), index {}", slot + 1),
            None => println!("{x:?} -> ({cell}), outside the ball"),
        }
    }

    let wide = PartitionSpec::new(0.05, 3, 2.0)?;
    println!("h=0.05, d=3, radius=2: {} cells", wide.cell_count());
    Ok(())
}
