use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::analysis::{Comparison, TestReport};
use crate::{Error, Result};

const MIN_INCREMENTS: u64 = 1000;
const MIN_TAIL_COUNT: u64 = 10;
const PERMUTATIONS: usize = 999;

/// Least squares line `y = a + b x` and its `R^2`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (my - slope * mx, slope, r2)
}

/// Log-linear fit of the empirical tail `P[|X| > m]` at the observed
/// distinct values `m`, using only levels with at least ten exceedances.
/// The statistic is `R^2` signed by the slope, so it must reach 0.9 with a
/// negative slope. A tail with fewer than three usable levels is degenerate
/// and passes with a note.
pub fn increment_tail_test(norms: &[(f64, u64)]) -> Result<TestReport> {
    let total: u64 = norms.iter().map(|n| n.1).sum();
    if total < MIN_INCREMENTS {
        return Err(Error::TooFewSamples { have: total, need: MIN_INCREMENTS });
    }
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut above = total;
    for (m, c) in &sorted {
        above -= c;
        if above < MIN_TAIL_COUNT {
            break;
        }
        xs.push(*m);
        ys.push((above as f64 / total as f64).ln());
    }
    if xs.len() < 3 {
        return Ok(TestReport::new(
            "increment_tail",
            1.0,
            0.9,
            Comparison::AtLeast,
            total,
            json!({"note": "degenerate tail: fewer than three levels with ten exceedances", "levels": xs.len()}),
        ));
    }
    let (intercept, slope, r2) = linear_fit(&xs, &ys);
    let signed = if slope < 0.0 { r2 } else { -r2 };
    Ok(TestReport::new(
        "increment_tail",
        signed,
        0.9,
        Comparison::AtLeast,
        total,
        json!({
            "null": "log P[|X| > m] is linear in m with negative slope",
            "slope": slope,
            "intercept": intercept,
            "r_squared": r2,
            "levels": xs.len(),
        }),
    ))
}

fn consecutive_pairs(sequences: &[Vec<Vec<f64>>], coord: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for seq in sequences {
        for w in seq.windows(2) {
            u.push(w[0][coord]);
            v.push(w[1][coord]);
        }
    }
    (u, v)
}

fn correlation(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        suv += (a - mu) * (b - mv);
        suu += (a - mu) * (a - mu);
        svv += (b - mv) * (b - mv);
    }
    if suu == 0.0 || svv == 0.0 {
        0.0
    } else {
        suv / (suu * svv).sqrt()
    }
}

/// Pearson correlation of consecutive increments pooled over all sequences.
pub fn lag_one_correlation(sequences: &[Vec<Vec<f64>>], coord: usize) -> f64 {
    let (u, v) = consecutive_pairs(sequences, coord);
    if u.is_empty() {
        return f64::NAN;
    }
    correlation(&u, &v)
}

/// Lag-1 correlation of consecutive increments per coordinate with a
/// permutation p-value. Pinning the endpoint of a sequence of `k` pieces
/// induces a correlation of order `-1/k`, hence the threshold
/// `5/sqrt(count) + 2/k` with `k` the mean sequence length.
pub fn independence_diagnostic(sequences: &[Vec<Vec<f64>>], seed: u64) -> Result<TestReport> {
    let count: usize = sequences.iter().map(|s| s.len().saturating_sub(1)).sum();
    if (count as u64) < MIN_INCREMENTS {
        return Err(Error::TooFewSamples { have: count as u64, need: MIN_INCREMENTS });
    }
    let dim = sequences.iter().find(|s| !s.is_empty()).map(|s| s[0].len()).unwrap_or(0);
    let used: Vec<_> = sequences.iter().filter(|s| s.len() >= 2).collect();
    let k = used.iter().map(|s| s.len() as f64).sum::<f64>() / used.len() as f64;
    let threshold = 5.0 / (count as f64).sqrt() + 2.0 / k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for coord in 0..dim {
        let (u, mut v) = consecutive_pairs(sequences, coord);
        let r = correlation(&u, &v);
        let mut extreme = 0usize;
        for _ in 0..PERMUTATIONS {
            v.shuffle(&mut rng);
            if correlation(&u, &v).abs() >= r.abs() {
                extreme += 1;
            }
        }
        worst = worst.max(r.abs());
        rows.push(json!({
            "coordinate": coord,
            "correlation": r,
            "p_value": (extreme + 1) as f64 / (PERMUTATIONS + 1) as f64,
        }));
    }
    Ok(TestReport::new(
        "independence",
        worst,
        threshold,
        Comparison::AtMost,
        count as u64,
        json!({
            "null": "consecutive increments uncorrelated up to the pinning allowance",
            "mean_pieces": k,
            "coordinates": rows,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn geometric(q: f64, n: usize, seed: u64) -> Vec<(f64, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hist = std::collections::BTreeMap::new();
        for _ in 0..n {
            let mut k = 1u64;
            while rng.random::<f64>() > q {
                k += 1;
            }
            *hist.entry(k).or_insert(0u64) += 1;
        }
        hist.into_iter().map(|(k, c)| (k as f64, c)).collect()
    }

    #[test]
    fn geometric_tail_slope() {
        let r = increment_tail_test(&geometric(0.3, 100_000, 1)).unwrap();
        assert!(r.pass, "{}", r.to_json());
        let slope = r.details["slope"].as_f64().unwrap();
        assert!((slope - 0.7f64.ln()).abs() < 0.03, "{slope}");
    }

    #[test]
    fn pareto_tail_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hist = std::collections::BTreeMap::new();
        for _ in 0..100_000 {
            let u: f64 = rng.random();
            let k = (u.powf(-1.0 / 0.8)).floor() as u64;
            *hist.entry(k).or_insert(0u64) += 1;
        }
        let norms: Vec<(f64, u64)> = hist.into_iter().map(|(k, c)| (k as f64, c)).collect();
        let r = increment_tail_test(&norms).unwrap();
        assert!(!r.pass, "{}", r.to_json());
    }

    #[test]
    fn constant_tail_is_degenerate() {
        let r = increment_tail_test(&[(1.0, 5000)]).unwrap();
        assert!(r.pass);
        assert!(r.details["note"].is_string());
        assert!(matches!(increment_tail_test(&[(1.0, 10)]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn pinned_pm1_lag_correlation() {
        let paths = [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1], [-1, 1, 1, -1], [-1, 1, -1, 1], [-1, -1, 1, 1]];
        let seqs: Vec<Vec<Vec<f64>>> =
            paths.iter().map(|p| p.iter().map(|&x| vec![x as f64]).collect()).collect();
        assert!((lag_one_correlation(&seqs, 0) + 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(independence_diagnostic(&seqs, 0), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn iid_passes_markov_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let iid: Vec<Vec<Vec<f64>>> =
            (0..500).map(|_| (0..10).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect()).collect();
        assert!(independence_diagnostic(&iid, 9).unwrap().pass);
        let sticky: Vec<Vec<Vec<f64>>> = (0..500)
            .map(|_| {
                let mut x = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (0..10)
                    .map(|_| {
                        if rng.random::<f64>() < 0.1 {
                            x = -x;
                        }
                        vec![x]
                    })
                    .collect()
            })
            .collect();
        let r = independence_diagnostic(&sticky, 9).unwrap();
        assert!(!r.pass);
        assert!(r.details["coordinates"][0]["p_value"].as_f64().unwrap() < 0.01);
    }
}
