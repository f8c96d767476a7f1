//! Exact rational bridge tables for the simple walk: marginals, the
//! covariance scale `C_n`, and a few exactly sampled paths.

use percbridge::bridge::{estimate_cn, exact_bridge_law};
use percbridge::lattice_walk::named_law;
use percbridge::prob::format_rational;
use percbridge::seeding::stream_rng;

fn main() -> percbridge::Result<()> {
    let law = named_law("pm1").expect("built-in law");
    let tables = exact_bridge_law(&law, 4, &[0])?;

    println!("P[S_4 = 0] = {}", format_rational(&tables.total_probability()));
    for i in 0..=4 {
        let row: Vec<String> =
            tables.marginal(i).iter().map(|(x, p)| format!("{}: {}", x[0], format_rational(p))).collect();
        println!("step {i}: {}", row.join(", "));
    }
    let c = estimate_cn(&tables, 0)?;
    println!("C_4 = {}", format_rational(&c.value));
    println!("Cov(S_1, S_2) = {}", format_rational(&tables.conditional_covariance(1, 2, 0, 0)));

    let mut rng = stream_rng(1, 0);
    for _ in 0..3 {
        let path = tables.sample(&mut rng);
        let ys: Vec<i64> = path.points().iter().map(|p| p[0]).collect();
        println!("{ys:?}");
    }
    tables.write_exact_marginals_csv(std::io::stdout())?;
    Ok(())
}
