//! Exhaustive enumeration of a small slab at `p = 9/20`: exact `h` and `f`
//! connectivities, regeneration patterns, and the factorization of each
//! pattern into single-piece terms.

use percbridge::percolation::{enumerate_slab, SlabSpec};
use percbridge::prob::{format_rational, parse_rational};

fn main() -> percbridge::Result<()> {
    let slab = SlabSpec::axis(2, parse_rational("9/20")?, 4, 1)?;
    println!("{} vertices, {} edges", slab.vertices().len(), slab.edge_count());
    let en = enumerate_slab(&slab)?;

    for row in en.connectivity().iter().take(6) {
        println!("x = {:?}  h = {}  f = {}", row.x, format_rational(&row.h), format_rational(&row.f));
    }
    for check in en.factorizations() {
        println!(
            "pattern {:?}: {} ({})",
            check.pattern,
            format_rational(&check.lhs),
            if check.holds() { "factorizes" } else { "MISMATCH" }
        );
    }
    let relation = en.renewal_relation()?;
    println!("renewal relation exact: {}", relation.exact);
    Ok(())
}
