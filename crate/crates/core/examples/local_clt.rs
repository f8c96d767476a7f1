//! Sup distance between `sqrt(n) P[S_n = k]` and the Gaussian density for
//! the two centred one-dimensional built-in laws.

use percbridge::bridge::local_clt_profile;
use percbridge::lattice_walk::named_law;

fn main() -> percbridge::Result<()> {
    for name in ["lazy", "pm1"] {
        let law = named_law(name).expect("built-in law");
        for n in [16, 64, 256] {
            let r = local_clt_profile(&law, n)?;
            println!(
                "{name:>6} n={n:<4} variance {:.4}  sup distance {:.6} at x = {:.3}",
                r.variance, r.sup_distance, r.argmax
            );
        }
    }
    Ok(())
}
