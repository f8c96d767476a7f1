//! Clusters conditioned on `0 <-h-> n e_1`, their regeneration skeletons,
//! and the scaled skeleton path `gamma`.

use percbridge::percolation::{sample_ensemble, skeleton_gamma, summarize_ensemble, SlabSpec, DEFAULT_ATTEMPT_BUDGET};
use percbridge::prob::parse_rational;

fn main() -> percbridge::Result<()> {
    let n = 10;
    let slab = SlabSpec::axis(2, parse_rational("1/4")?, n, 4)?;
    let ensemble = sample_ensemble(&slab, 400, 9, DEFAULT_ATTEMPT_BUDGET)?;

    let first = &ensemble[0];
    println!("cluster of {} vertices, skeleton {:?}", first.cluster.vertices.len(), first.skeleton.points());
    let gamma = skeleton_gamma(&first.skeleton, n as usize, &[1, 0])?;
    gamma.write_csv(std::io::stdout())?;

    let summary = summarize_ensemble(&slab, &ensemble)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    Ok(())
}
