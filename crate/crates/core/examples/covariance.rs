//! Monte Carlo bridges of the lazy walk, rescaled to `[0, 1]`, checked
//! against `Cov(X(s), X(t)) = C_n s (1 - t)` on the default grid.

use percbridge::analysis::{
    bridge_covariance_test, default_grid, empirical_covariance, marginal_gaussian_test, render_table, SummaryStats,
};
use percbridge::bridge::{estimate_cn, exact_bridge_law, interpolate_scale};
use percbridge::lattice_walk::named_law;
use percbridge::seeding::stream_rng;

fn main() -> percbridge::Result<()> {
    let n = 64;
    let law = named_law("lazy").expect("built-in law").to_f64();
    let tables = exact_bridge_law(&law, n, &[0])?;
    let c_n = estimate_cn(&tables, 0)?.value;

    let mut stats = SummaryStats::new(default_grid(), 1);
    let mut rng = stream_rng(42, 0);
    for _ in 0..20_000 {
        stats.add_path(&interpolate_scale(&tables.sample(&mut rng), n)?)?;
    }

    for (s, t) in [(0.25, 0.5), (0.5, 0.75)] {
        let est = empirical_covariance(&stats, s, t, 0)?;
        println!("Cov({s}, {t}) = {:.4} +- {:.4}, predicted {:.4}", est.value, est.standard_error, c_n * s * (1.0 - t));
    }
    let reports = vec![bridge_covariance_test(&stats, n)?, marginal_gaussian_test(&stats, 0.5, 0, c_n / 4.0, Some(1.0 / (n as f64).sqrt()))?];
    print!("{}", render_table(&reports));
    Ok(())
}
