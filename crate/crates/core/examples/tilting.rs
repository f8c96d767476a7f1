//! Exponential tilting of a step law to a prescribed mean.

use percbridge::lattice_walk::{format_float_law, named_law, solve_tilt};

fn main() -> percbridge::Result<()> {
    let law = named_law("lazy").expect("built-in law");
    for target in [0.0, 0.3, 0.9] {
        let (tilt, tilted) = solve_tilt(&law, &[target])?;
        println!("mean {target}: theta = {:.6}, E exp(theta X) = {:.6}", tilt.theta[0], tilt.normalizer);
        print!("{}", format_float_law(&tilted));
    }
    Ok(())
}
