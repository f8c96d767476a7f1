//! Inverse correlation length from connection frequencies on the whole
//! lattice, next to the path-counting bound `ln(1/p)`.

use percbridge::percolation::estimate_xi;

fn main() -> percbridge::Result<()> {
    for (p, ns) in [(0.1, [1, 2, 3, 4]), (0.25, [2, 3, 4, 5])] {
        let e = estimate_xi(2, p, &[1, 0], &ns, 200_000, 5)?;
        for pt in &e.points {
            println!("p={p} n={} P = {:.3e} ({} hits)", pt.n, pt.p_hat, pt.hits);
        }
        println!("xi = {:.4} +- {:.4}, bound {:.4}", e.xi, e.standard_error, e.path_bound);
    }
    Ok(())
}
