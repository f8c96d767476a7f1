use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{empirical_covariance, Comparison, SummaryStats, TestReport};
use crate::bridge::{covariance_prediction, BridgeTables};
use crate::prob::{format_rational, Prob, Rational};
use crate::{Error, Result};

/// Two-sided normal quantile with a Bonferroni split over `m` comparisons.
pub(crate) fn bonferroni_z(alpha: f64, m: usize) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(1.0 - alpha / (2.0 * m.max(1) as f64))
}

/// Fits one scale `C` to the empirical covariances by least squares against
/// `s (1 - t)` over interior grid pairs in different cells, then checks every
/// pair's residual in units of its jackknife standard error (Bonferroni at
/// level 0.01 over all pairs and coordinates).
pub fn bridge_covariance_test(stats: &SummaryStats, n: usize) -> Result<TestReport> {
    let interior: Vec<f64> = stats.grid().iter().cloned().filter(|t| *t > 0.0 && *t < 1.0).collect();
    if interior.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} interior grid times, need 3", interior.len())));
    }
    let nf = n as f64;
    let mut pairs = Vec::new();
    for (i, &s) in interior.iter().enumerate() {
        for &t in &interior[i + 1..] {
            if (nf * s).floor() < (nf * t).floor() {
                pairs.push((s, t));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateFit("no grid pairs in distinct cells".into()));
    }
    let m = pairs.len() * stats.dim();
    let threshold = bonferroni_z(0.01, m);
    let mut worst = 0.0f64;
    let mut per_coord = Vec::new();
    for coord in 0..stats.dim() {
        let est: Vec<_> = pairs
            .iter()
            .map(|&(s, t)| empirical_covariance(stats, s, t, coord))
            .collect::<Result<_>>()?;
        let g: Vec<f64> = pairs.iter().map(|(s, t)| s * (1.0 - t)).collect();
        let c = est.iter().zip(&g).map(|(e, g)| e.value * g).sum::<f64>() / g.iter().map(|g| g * g).sum::<f64>();
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::DegenerateFit(format!("fitted scale {c} for coordinate {coord}")));
        }
        let mut max_rel = 0.0f64;
        let mut max_z = 0.0f64;
        for (e, g) in est.iter().zip(&g) {
            let r = e.value - c * g;
            max_rel = max_rel.max((r / (c * g)).abs());
            let z = if e.standard_error > 0.0 {
                (r / e.standard_error).abs()
            } else if r == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_z = max_z.max(z);
        }
        worst = worst.max(max_z);
        per_coord.push(json!({
            "coordinate": coord,
            "fitted_c": c,
            "max_relative_residual": max_rel,
            "max_abs_z": max_z,
        }));
    }
    Ok(TestReport::new(
        "bridge_covariance",
        worst,
        threshold,
        Comparison::AtMost,
        stats.count(),
        json!({
            "null": "Cov(X(s), X(t)) = C s (1 - t) on grid pairs with [ns] < [nt]",
            "pairs": pairs.len(),
            "n": n,
            "coordinates": per_coord,
        }),
    ))
}

/// Scale-free check: `Cov(s, t) / Cov(s', t')` against
/// `s (1 - t) / (s' (1 - t'))` for every two of the given pairs. The statistic
/// is the largest relative deviation of the ratio.
pub fn covariance_ratio_test(stats: &SummaryStats, pairs: &[(f64, f64)], tolerance: f64) -> Result<TestReport> {
    if pairs.len() < 2 {
        return Err(Error::DegenerateFit("ratio test needs two pairs".into()));
    }
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for coord in 0..stats.dim() {
        let cov: Vec<f64> = pairs
            .iter()
            .map(|&(s, t)| empirical_covariance(stats, s, t, coord).map(|e| e.value))
            .collect::<Result<_>>()?;
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                let (s, t) = pairs[i];
                let (s2, t2) = pairs[j];
                let want = s * (1.0 - t) / (s2 * (1.0 - t2));
                let got = cov[i] / cov[j];
                let dev = (got / want - 1.0).abs();
                worst = worst.max(if dev.is_nan() { f64::INFINITY } else { dev });
                rows.push(json!({"coordinate": coord, "pair": [pairs[i], pairs[j]], "ratio": got, "predicted": want}));
            }
        }
    }
    Ok(TestReport::new(
        "covariance_ratio",
        worst,
        tolerance,
        Comparison::AtMost,
        stats.count(),
        json!({"null": "covariance ratios follow s (1 - t)", "ratios": rows}),
    ))
}

/// The covariance identity checked exactly on the full grid `{i/n}` of an
/// exact bridge: the scale is fitted in rationals and every residual,
/// including the diagonal, must be exactly zero.
pub fn exact_covariance_test(tables: &BridgeTables<Rational>, coord: usize) -> Result<TestReport> {
    let n = tables.steps();
    if n < 4 {
        return Err(Error::DegenerateFit(format!("n = {n} has fewer than 3 interior grid times")));
    }
    let nn = Rational::from_i64(n as i64);
    let cov = tables.covariance_matrix(coord);
    let time = |i: usize| Rational::from_ratio(i as i64, n as i64);
    let (mut num, mut den) = (Rational::zero(), Rational::zero());
    for i in 1..n {
        for j in i + 1..n {
            let g = time(i) * (Rational::one() - time(j));
            num = num + cov[i][j].clone() / nn.clone() * g.clone();
            den = den + g.clone() * g;
        }
    }
    let c = num / den;
    let mut worst = 0.0f64;
    let mut nonzero = 0usize;
    for i in 0..=n {
        for j in i..=n {
            let want = covariance_prediction(&time(i), &time(j), n, &c)?;
            let r = cov[i][j].clone() / nn.clone() - want;
            if !Prob::is_zero(&r) {
                nonzero += 1;
                worst = worst.max(r.to_f64().abs());
            }
        }
    }
    Ok(TestReport::new(
        "exact_covariance_identity",
        worst,
        0.0,
        Comparison::AtMost,
        0,
        json!({
            "fitted_c": format_rational(&c),
            "nonzero_residuals": nonzero,
            "n": n,
        }),
    ))
}
