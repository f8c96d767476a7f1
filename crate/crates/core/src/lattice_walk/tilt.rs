//! Exponential tilting: find `theta` so the tilted law has a prescribed mean.

use nalgebra::{DMatrix, DVector};

use crate::lattice_walk::law::dot_i;
use crate::lattice_walk::StepLaw;
use crate::prob::Prob;
use crate::{Error, Result};

/// Tilt vector and the MGF value `C_theta = E exp(theta . X)` under the untilted law.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltParameter {
    pub theta: Vec<f64>,
    pub normalizer: f64,
}

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const THETA_BLOWUP: f64 = 1e4;

/// Solves `grad log MGF(theta) = target` by damped Newton, falling back to
/// bisection for one-dimensional laws.
pub fn solve_tilt<P: Prob>(law: &StepLaw<P>, target: &[f64]) -> Result<(TiltParameter, StepLaw<f64>)> {
    let d = law.dim();
    if target.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.len() });
    }
    let points: Vec<Vec<f64>> = law
        .atoms()
        .iter()
        .map(|a| a.point.iter().map(|&v| v as f64).collect())
        .collect();
    let log_w: Vec<f64> = law.atoms().iter().map(|a| a.prob.to_f64().ln()).collect();
    check_affine_hull(&points, target)?;

    let theta = match newton(&points, &log_w, target) {
        Ok(theta) => theta,
        Err(Error::NoConvergence(_)) if d == 1 => bisect_1d(&points, &log_w, target[0])?,
        Err(e) => return Err(e),
    };
    let tilted = law.tilt(&theta)?;
    let normalizer = law
        .atoms()
        .iter()
        .map(|a| a.prob.to_f64() * dot_i(&theta, &a.point).exp())
        .sum();
    Ok((TiltParameter { theta, normalizer }, tilted))
}

/// `(log-partition, mean, covariance)` of the tilted law at `theta`.
fn moments(points: &[Vec<f64>], log_w: &[f64], theta: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
    let d = theta.len();
    let e: Vec<f64> = points
        .iter()
        .zip(log_w)
        .map(|(x, lw)| lw + x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let shift = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = e.iter().map(|v| (v - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut mean = vec![0.0; d];
    for (x, wi) in points.iter().zip(&w) {
        for j in 0..d {
            mean[j] += wi * x[j] / z;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (x, wi) in points.iter().zip(&w) {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += wi / z * (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    (shift + z.ln(), mean, cov)
}

fn objective(points: &[Vec<f64>], log_w: &[f64], theta: &[f64], target: &[f64]) -> f64 {
    let (lz, _, _) = moments(points, log_w, theta);
    lz - theta.iter().zip(target).map(|(a, b)| a * b).sum::<f64>()
}

fn residual(points: &[Vec<f64>], log_w: &[f64], theta: &[f64], target: &[f64]) -> f64 {
    let (_, mean, _) = moments(points, log_w, theta);
    mean.iter().zip(target).map(|(m, t)| (m - t).powi(2)).sum::<f64>().sqrt()
}

fn newton(points: &[Vec<f64>], log_w: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    let d = target.len();
    let mut theta = vec![0.0; d];
    for _ in 0..MAX_ITERATIONS {
        let (lz, mean, cov) = moments(points, log_w, &theta);
        let grad: Vec<f64> = mean.iter().zip(target).map(|(m, t)| m - t).collect();
        let res = residual(points, log_w, &theta, target);
        if res <= TOLERANCE {
            return Ok(theta);
        }
        let step = pseudo_solve(&cov, &grad);
        let f0 = lz - theta.iter().zip(target).map(|(a, b)| a * b).sum::<f64>();
        let slope: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - alpha * s).collect();
            // near the optimum the objective is flat to rounding; fall back on the residual
            let f = objective(points, log_w, &trial, target);
            if f <= f0 + 1e-4 * alpha * slope
                || (f <= f0 + 1e-12 * (1.0 + f0.abs()) && residual(points, log_w, &trial, target) < 0.5 * res)
            {
                theta = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if res <= 1e-10 {
                return Ok(theta);
            }
            return Err(Error::NoConvergence(MAX_ITERATIONS));
        }
        if theta.iter().any(|t| t.abs() > THETA_BLOWUP) {
            return Err(Error::TargetOutsideHull);
        }
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

/// Least-norm solution of `cov * x = rhs`, discarding directions with no variance.
fn pseudo_solve(cov: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let eig = cov.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let b = DVector::from_column_slice(rhs);
    let mut x = DVector::zeros(rhs.len());
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 1e-13 * max_ev.max(1e-300) {
            let v = eig.eigenvectors.column(k);
            x += v * (v.dot(&b) / ev);
        }
    }
    x.iter().cloned().collect()
}

/// Rejects targets that leave the affine hull of the support, or sit on the
/// boundary of a one-dimensional support.
fn check_affine_hull(points: &[Vec<f64>], target: &[f64]) -> Result<()> {
    let d = target.len();
    let base = &points[0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in &points[1..] {
        let mut v: Vec<f64> = p.iter().zip(base).map(|(a, b)| a - b).collect();
        for u in &basis {
            let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-9 {
            basis.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    let mut r: Vec<f64> = target.iter().zip(base).map(|(a, b)| a - b).collect();
    for u in &basis {
        let c: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
    }
    if r.iter().map(|a| a * a).sum::<f64>().sqrt() > 1e-9 {
        return Err(Error::TargetOutsideHull);
    }
    if d == 1 && points.len() > 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        if target[0] <= lo || target[0] >= hi {
            return Err(Error::TargetOutsideHull);
        }
    }
    Ok(())
}

fn bisect_1d(points: &[Vec<f64>], log_w: &[f64], target: f64) -> Result<Vec<f64>> {
    let mean_at = |t: f64| moments(points, log_w, &[t]).1[0];
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mean_at(lo) > target {
        lo *= 2.0;
        if lo < -THETA_BLOWUP {
            return Err(Error::TargetOutsideHull);
        }
    }
    while mean_at(hi) < target {
        hi *= 2.0;
        if hi > THETA_BLOWUP {
            return Err(Error::TargetOutsideHull);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(vec![0.5 * (lo + hi)])
}
