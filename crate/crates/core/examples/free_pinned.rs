//! Bridges pinned at `n a` after a random number of steps: the law of the
//! step count, its concentration in the window `I_M`, and sampled paths.

use percbridge::bridge::{pinning_time_distribution, time_deviation, FreePinnedSampler, PinningWindow};
use percbridge::lattice_walk::named_law;
use percbridge::seeding::stream_rng;

fn main() -> percbridge::Result<()> {
    let law = named_law("two-speed").expect("built-in law").to_f64();
    let (a, n) = ([1, 0], 40);

    let window = PinningWindow::new(&law, &a, n, 3.0)?;
    println!("kappa = {:.3}, window k in {:?}", window.kappa, window.k_range);
    let dist = pinning_time_distribution(&law, &a, n, &window, None)?;
    println!("mass of k outside the window: {:.3e} of {:.3e}", dist.outside, dist.total());

    let sampler = FreePinnedSampler::new(&law, &a, n)?;
    let mut rng = stream_rng(3, 0);
    for (k, path) in sampler.sample_many(5, &mut rng)? {
        println!(
            "k = {k:<3} end {:?}  time deviation {:+.3}",
            path.points().last().expect("non-empty"),
            time_deviation(&path, n, &a)
        );
    }
    Ok(())
}
