use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{Comparison, SummaryStats, TestReport};
use crate::{Error, Result};

const MIN_SAMPLES: u64 = 100;

/// Asymptotic Kolmogorov tail `P[K > lambda]`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn effective_root(n: u64) -> f64 {
    let r = (n as f64).sqrt();
    r + 0.12 + 0.11 / r
}

/// KS p-value for statistic `d` on `n` samples (Stephens' small-sample
/// adjustment of the asymptotic law).
pub fn ks_p_value(d: f64, n: u64) -> f64 {
    kolmogorov_tail(effective_root(n) * d)
}

/// Largest `D` with p-value at least `alpha`.
pub fn ks_critical_value(alpha: f64, n: u64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 5.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_tail(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo / effective_root(n)
}

/// Two-sided KS distance between weighted atoms `(value, count)` (ascending)
/// and a centered normal. With `lattice_width = Some(w)` the atoms live on a
/// lattice of mesh `w` and the comparison is continuity-corrected: the
/// empirical CDF at every lattice point `x` is matched against `Phi(x + w/2)`.
pub fn ks_distance(atoms: &[(f64, u64)], variance: f64, lattice_width: Option<f64>) -> f64 {
    let total: u64 = atoms.iter().map(|a| a.1).sum();
    if total == 0 {
        return f64::NAN;
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let n = total as f64;
    let mut d = 0.0f64;
    match lattice_width {
        None => {
            let mut below = 0u64;
            for &(x, c) in atoms {
                let f = normal.cdf(x);
                d = d.max((f - below as f64 / n).abs());
                below += c;
                d = d.max((below as f64 / n - f).abs());
            }
        }
        Some(w) => {
            let origin = atoms[0].0;
            let last = atoms[atoms.len() - 1].0;
            let steps = ((last - origin) / w).round() as i64;
            let mut idx = 0;
            let mut cum = 0u64;
            for k in -1..=steps {
                let x = origin + k as f64 * w;
                while idx < atoms.len() && atoms[idx].0 <= x + 0.25 * w {
                    cum += atoms[idx].1;
                    idx += 1;
                }
                d = d.max((cum as f64 / n - normal.cdf(x + 0.5 * w)).abs());
            }
        }
    }
    d
}

/// Marginal at grid time `t` against `N(0, variance)`; fails when the KS
/// p-value drops below 0.01.
pub fn marginal_gaussian_test(
    stats: &SummaryStats,
    t: f64,
    coord: usize,
    variance: f64,
    lattice_width: Option<f64>,
) -> Result<TestReport> {
    let atoms = stats.marginal(t, coord)?;
    if stats.count() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { have: stats.count(), need: MIN_SAMPLES });
    }
    if !(variance > 0.0) || t <= 0.0 || t >= 1.0 {
        return Err(Error::Degenerate(format!("pinned marginal at t = {t} with variance {variance}")));
    }
    let d = ks_distance(&atoms, variance, lattice_width);
    let n = stats.count();
    Ok(TestReport::new(
        "marginal_gaussian",
        d,
        ks_critical_value(0.01, n),
        Comparison::AtMost,
        n,
        json!({
            "null": format!("X({t}) ~ N(0, {variance})"),
            "t": t,
            "coordinate": coord,
            "p_value": ks_p_value(d, n),
            "lattice_width": lattice_width,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-3);
        assert!((kolmogorov_tail(0.5) - 0.9639).abs() < 1e-3);
        let c = ks_critical_value(0.01, 1_000_000);
        assert!((ks_p_value(c, 1_000_000) - 0.01).abs() < 1e-6);
    }

    fn normal_stats(n: usize, rng: &mut ChaCha8Rng) -> SummaryStats {
        let mut st = SummaryStats::new(vec![0.0, 0.5, 1.0], 1);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            st.add_values(&[vec![0.0], vec![0.5 * z], vec![0.0]]).unwrap();
        }
        st
    }

    #[test]
    fn calibrated_on_normal_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 1000;
        let mut small = 0;
        for _ in 0..reps {
            let st = normal_stats(200, &mut rng);
            let r = marginal_gaussian_test(&st, 0.5, 0, 0.25, None).unwrap();
            if r.details["p_value"].as_f64().unwrap() < 0.05 {
                small += 1;
            }
        }
        let frac = small as f64 / reps as f64;
        let sd = (0.05f64 * 0.95 / reps as f64).sqrt();
        assert!((frac - 0.05).abs() < 2.0 * sd + 0.005, "{frac}");
    }

    #[test]
    fn wrong_variance_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let st = normal_stats(5000, &mut rng);
        assert!(marginal_gaussian_test(&st, 0.5, 0, 0.25, None).unwrap().pass);
        assert!(!marginal_gaussian_test(&st, 0.5, 0, 0.5, None).unwrap().pass);
    }

    #[test]
    fn lattice_correction() {
        // binomial(400, 1/2) centered and scaled: lattice mesh 1/sqrt(400)
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut st = SummaryStats::new(vec![0.0, 0.5, 1.0], 1);
        for _ in 0..20_000 {
            let heads = (0..400).filter(|_| rng.random::<bool>()).count() as f64;
            st.add_values(&[vec![0.0], vec![(heads - 200.0) / 20.0], vec![0.0]]).unwrap();
        }
        let corrected = marginal_gaussian_test(&st, 0.5, 0, 0.25, Some(0.05)).unwrap();
        assert!(corrected.pass, "{}", corrected.to_json());
        let raw = marginal_gaussian_test(&st, 0.5, 0, 0.25, None).unwrap();
        assert!(raw.statistic > corrected.statistic);
    }

    #[test]
    fn guards() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = normal_stats(50, &mut rng);
        assert!(matches!(marginal_gaussian_test(&st, 0.5, 0, 0.25, None), Err(Error::TooFewSamples { .. })));
        let st = normal_stats(200, &mut rng);
        assert!(matches!(marginal_gaussian_test(&st, 0.0, 0, 0.25, None), Err(Error::Degenerate(_))));
        assert!(matches!(marginal_gaussian_test(&st, 0.3, 0, 0.25, None), Err(Error::TimeNotOnGrid(_))));
    }
}
