use nalgebra::DMatrix;
use num::Integer;
use rand::Rng;

use crate::bridge::{BridgePath, BridgeTables, DEFAULT_TABLE_BUDGET};
use crate::grid::{step_forward, volume, LatticeBox};
use crate::lattice_walk::{norm_i, StepLaw};
use crate::prob::Prob;
use crate::{Error, Result};

/// The window `I_M = [n/kappa - M sqrt(n), n/kappa + M sqrt(n)]` of step
/// counts carrying most of the mass of `{S_k = n a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinningWindow {
    /// `|mu_a| / |a|`.
    pub kappa: f64,
    /// `n / kappa`.
    pub center: f64,
    pub half_width: f64,
    /// Integer points of the window, `lo > hi` when it is empty.
    pub k_range: (u64, u64),
}

impl PinningWindow {
    pub fn new<P: Prob>(law: &StepLaw<P>, a: &[i64], n: u64, m: f64) -> Result<Self> {
        check_drift(law, a)?;
        let mu = law.mean_f64();
        let aa: f64 = a.iter().map(|v| (v * v) as f64).sum();
        let kappa = mu.iter().zip(a).map(|(m, &ai)| m * ai as f64).sum::<f64>() / aa;
        let center = n as f64 / kappa;
        let half_width = m * (n as f64).sqrt();
        let lo = (center - half_width).ceil().max(0.0) as u64;
        let hi = (center + half_width).floor().max(0.0) as u64;
        Ok(PinningWindow { kappa, center, half_width, k_range: (lo, hi) })
    }

    pub fn contains(&self, k: u64) -> bool {
        self.k_range.0 <= k && k <= self.k_range.1
    }

    pub fn is_empty(&self) -> bool {
        self.k_range.0 > self.k_range.1
    }
}

fn check_drift<P: Prob>(law: &StepLaw<P>, a: &[i64]) -> Result<()> {
    if a.len() != law.dim() {
        return Err(Error::DimensionMismatch { expected: law.dim(), got: a.len() });
    }
    if law.atoms().iter().any(|x| dot(&x.point, a) <= 0) {
        return Err(Error::DriftViolation);
    }
    Ok(())
}

fn dot(x: &[i64], a: &[i64]) -> i64 {
    x.iter().zip(a).map(|(u, v)| u * v).sum()
}

/// `P[S_k = n a]` for every `k` up to the cap, split by the window.
#[derive(Debug, Clone, PartialEq)]
pub struct PinningDistribution<P = f64> {
    pub n: u64,
    pub target: Vec<i64>,
    pub window: PinningWindow,
    pub cap: u64,
    /// `probs[k] = P[S_k = n a]`.
    pub probs: Vec<P>,
    pub inside: P,
    pub outside: P,
    /// Local-CLT prediction of `probs[k]` on the reachable set, `None` when
    /// the step covariance is singular.
    pub profile: Option<Vec<f64>>,
}

impl<P: Prob> PinningDistribution<P> {
    /// `P[S_k = n a for some k]`; the events are disjoint because `a . S_k`
    /// strictly increases.
    pub fn total(&self) -> P {
        self.inside.clone() + self.outside.clone()
    }

    /// Conditional law of the pinning time, as `(k, probability)`.
    pub fn k_law(&self) -> Vec<(u64, f64)> {
        let total = self.total().to_f64();
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(k, p)| (k as u64, p.to_f64() / total))
            .collect()
    }

    /// `(n - k kappa) / sqrt(k)` for each `k >= 1`, the coordinate in which the
    /// profile is Gaussian.
    pub fn standardized(&self) -> Vec<(u64, f64)> {
        (1..self.probs.len() as u64)
            .map(|k| (k, (self.n as f64 - k as f64 * self.window.kappa) / (k as f64).sqrt()))
            .collect()
    }
}

/// Default cap `4 n / kappa`.
pub fn default_cap(window: &PinningWindow, n: u64) -> u64 {
    (4.0 * n as f64 / window.kappa).ceil() as u64
}

/// Forward DP over `k` for `P[S_k = n a]`, pruned to states that can still
/// reach `n a` by steps with positive progress along `a`.
pub fn pinning_time_distribution<P: Prob>(
    law: &StepLaw<P>,
    a: &[i64],
    n: u64,
    window: &PinningWindow,
    cap: Option<u64>,
) -> Result<PinningDistribution<P>> {
    check_drift(law, a)?;
    let cap = cap.unwrap_or_else(|| default_cap(window, n));
    if !window.is_empty() && window.k_range.1 > cap {
        return Err(Error::CapExceeded(format!("window ends at k = {} beyond cap {cap}", window.k_range.1)));
    }
    let d = law.dim();
    let target: Vec<i64> = a.iter().map(|v| v * n as i64).collect();
    let progress = dot(&target, a);
    let min_step = law.atoms().iter().map(|x| dot(&x.point, a)).min().expect("non-empty");
    let last = (progress / min_step).min(cap as i64) as usize;

    // ratio bounds of z_j / (a . z) over the support
    let ratios: Vec<(f64, f64)> = (0..d)
        .map(|j| {
            law.atoms().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                let q = x.point[j] as f64 / dot(&x.point, a) as f64;
                (lo.min(q), hi.max(q))
            })
        })
        .collect();
    let viable = |x: &[i64]| {
        let rest = (progress - dot(x, a)) as f64;
        rest >= 0.0
            && (0..d).all(|j| {
                let gap = (target[j] - x[j]) as f64;
                gap >= rest * ratios[j].0 - 1e-9 && gap <= rest * ratios[j].1 + 1e-9
            })
    };

    // bounding box of all viable states
    let pf = progress as f64;
    let glo: Vec<i64> = (0..d).map(|j| target[j] - (pf * ratios[j].1.max(0.0)).floor() as i64).collect();
    let ghi: Vec<i64> = (0..d).map(|j| target[j] - (pf * ratios[j].0.min(0.0)).ceil() as i64).collect();
    let (zlo, zhi) = law.support_bounds();
    let mut boxes = Vec::with_capacity(last + 1);
    let mut needed: u128 = 0;
    for k in 0..=last as i64 {
        let lo: Vec<i64> = (0..d).map(|j| (k * zlo[j]).max(glo[j])).collect();
        let hi: Vec<i64> = (0..d).map(|j| (k * zhi[j]).min(ghi[j])).collect();
        match LatticeBox::new(lo.clone(), hi.clone()) {
            Some(b) => {
                needed += volume(&lo, &hi);
                boxes.push(b);
            }
            None => break,
        }
    }
    let last = boxes.len() - 1;
    if needed > DEFAULT_TABLE_BUDGET as u128 {
        return Err(Error::TableBudgetExceeded {
            needed: needed.min(u64::MAX as u128) as u64,
            budget: DEFAULT_TABLE_BUDGET,
        });
    }

    let mut probs = vec![P::zero(); last + 1];
    let mut cur = vec![P::one()];
    if target.iter().all(|&v| v == 0) {
        probs[0] = P::one();
    }
    for k in 1..=last {
        let mut keep = vec![false; boxes[k].len()];
        boxes[k].for_each(|i, x| keep[i] = viable(x));
        cur = step_forward(law, &boxes[k - 1], &cur, &boxes[k], Some(&keep));
        if let Some(i) = boxes[k].index(&target) {
            probs[k] = cur[i].clone();
        }
    }

    let (mut inside, mut outside) = (P::zero(), P::zero());
    for (k, p) in probs.iter().enumerate() {
        if window.contains(k as u64) {
            inside = inside + p.clone();
        } else {
            outside = outside + p.clone();
        }
    }
    let profile = clt_profile(law, &target, &probs);
    Ok(PinningDistribution { n, target, window: window.clone(), cap, probs, inside, outside, profile })
}

/// `index / ((2 pi k)^{d/2} sqrt(det Sigma)) exp(-(T - k mu)' Sigma^{-1} (T - k mu) / 2k)`
/// on the `k` where the exact probability is positive.
fn clt_profile<P: Prob>(law: &StepLaw<P>, target: &[i64], probs: &[P]) -> Option<Vec<f64>> {
    let d = law.dim();
    let cov = DMatrix::from_fn(d, d, |i, j| law.covariance()[i][j]);
    let det = cov.determinant();
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = cov.try_inverse()?;
    let index = lattice_index(law)? as f64;
    let mu = law.mean_f64();
    let profile = probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if k == 0 || p.is_zero() {
                return 0.0;
            }
            let kf = k as f64;
            let r = nalgebra::DVector::from_fn(d, |j, _| target[j] as f64 - kf * mu[j]);
            let q = (r.transpose() * &inv * &r)[(0, 0)];
            index / ((2.0 * std::f64::consts::PI * kf).powf(d as f64 / 2.0) * det.sqrt()) * (-q / (2.0 * kf)).exp()
        })
        .collect();
    Some(profile)
}

/// Index of the lattice generated by support differences: gcd of all
/// `d x d` minors. `None` if the differences do not span `R^d`.
fn lattice_index<P: Prob>(law: &StepLaw<P>) -> Option<i64> {
    let d = law.dim();
    let atoms = law.atoms();
    let diffs: Vec<Vec<i64>> = atoms[1..]
        .iter()
        .map(|x| x.point.iter().zip(&atoms[0].point).map(|(u, v)| u - v).collect())
        .collect();
    let mut g = 0i64;
    let mut pick = Vec::with_capacity(d);
    subsets(&diffs, d, 0, &mut pick, &mut g);
    (g != 0).then_some(g.abs())
}

fn subsets(rows: &[Vec<i64>], d: usize, start: usize, pick: &mut Vec<usize>, g: &mut i64) {
    if pick.len() == d {
        let m: Vec<Vec<i64>> = pick.iter().map(|&i| rows[i].clone()).collect();
        *g = g.gcd(&det_i(m));
        return;
    }
    for i in start..rows.len() {
        pick.push(i);
        subsets(rows, d, i + 1, pick, g);
        pick.pop();
    }
}

/// Integer determinant by cofactor expansion (small `d`).
fn det_i(m: Vec<Vec<i64>>) -> i64 {
    let d = m.len();
    if d == 1 {
        return m[0][0];
    }
    (0..d)
        .map(|c| {
            let minor: Vec<Vec<i64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect())
                .collect();
            let sign = if c % 2 == 0 { 1 } else { -1 };
            sign * m[0][c] * det_i(minor)
        })
        .sum()
}

/// Samples of the walk pinned at `n a` for some random `k`.
///
/// `k` is drawn with probability proportional to `P[S_k = n a]`, then the
/// path is an exact bridge of length `k`.
pub struct FreePinnedSampler {
    law: StepLaw<f64>,
    target: Vec<i64>,
    ks: Vec<u64>,
    weights: Vec<f64>,
}

impl FreePinnedSampler {
    pub fn new<P: Prob>(law: &StepLaw<P>, a: &[i64], n: u64) -> Result<Self> {
        let window = PinningWindow::new(law, a, n, 6.0)?;
        let cap = default_cap(&window, n).max(window.k_range.1);
        let law = law.to_f64();
        let dist = pinning_time_distribution(&law, a, n, &window, Some(cap))?;
        let (ks, weights): (Vec<u64>, Vec<f64>) = dist
            .probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| (k as u64, *p))
            .unzip();
        if ks.is_empty() {
            return Err(Error::NoPinningPossible);
        }
        Ok(FreePinnedSampler { law, target: dist.target, ks, weights })
    }

    pub fn target(&self) -> &[i64] {
        &self.target
    }

    /// Conditional law of `k` used by the sampler.
    pub fn k_law(&self) -> Vec<(u64, f64)> {
        let total: f64 = self.weights.iter().sum();
        self.ks.iter().zip(&self.weights).map(|(k, w)| (*k, w / total)).collect()
    }

    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total: f64 = self.weights.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (k, w) in self.ks.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *k;
            }
        }
        *self.ks.last().expect("non-empty")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, BridgePath)> {
        let k = self.sample_k(rng);
        let tables = BridgeTables::build(&self.law, k as usize, &self.target, DEFAULT_TABLE_BUDGET)?;
        Ok((k, tables.sample(rng)))
    }

    /// `count` samples; all `k` are drawn first, then one table per distinct
    /// `k` serves every path with that length, in draw order.
    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<(u64, BridgePath)>> {
        let ks: Vec<u64> = (0..count).map(|_| self.sample_k(rng)).collect();
        let mut distinct = ks.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let mut out: Vec<Option<BridgePath>> = vec![None; count];
        for k in distinct {
            let tables = BridgeTables::build(&self.law, k as usize, &self.target, DEFAULT_TABLE_BUDGET)?;
            for (slot, _) in out.iter_mut().zip(&ks).filter(|(_, kk)| **kk == k) {
                *slot = Some(tables.sample(rng));
            }
        }
        Ok(ks.into_iter().zip(out.into_iter().map(|p| p.expect("filled"))).collect())
    }
}

pub fn sample_free_pinned_bridge<P: Prob, R: Rng + ?Sized>(
    law: &StepLaw<P>,
    a: &[i64],
    n: u64,
    rng: &mut R,
) -> Result<(u64, BridgePath)> {
    FreePinnedSampler::new(law, a, n)?.sample(rng)
}

/// Independent cross-check: run the free walk until it passes the hyperplane
/// `a . x = n |a|^2` and keep it if it stopped exactly on `n a`.
pub fn sample_free_pinned_by_rejection<P: Prob, R: Rng + ?Sized>(
    law: &StepLaw<P>,
    a: &[i64],
    n: u64,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(u64, BridgePath)> {
    check_drift(law, a)?;
    let target: Vec<i64> = a.iter().map(|v| v * n as i64).collect();
    let progress = dot(&target, a);
    let probs: Vec<f64> = law.atoms().iter().map(|x| x.prob.to_f64()).collect();
    for _ in 0..max_attempts {
        let mut x = vec![0i64; law.dim()];
        let mut points = vec![x.clone()];
        while dot(&x, a) < progress {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            for (xj, zj) in x.iter_mut().zip(&law.atoms()[pick].point) {
                *xj += zj;
            }
            points.push(x.clone());
        }
        if x == target {
            let k = (points.len() - 1) as u64;
            return Ok((k, BridgePath::new(points, law)?));
        }
    }
    Err(Error::AttemptBudgetExhausted(max_attempts))
}

/// `max_j |t_j / (n |a|) - j / k|` with `t_j` the coordinate of `S_j` along `a`.
pub fn time_deviation(path: &BridgePath, n: u64, a: &[i64]) -> f64 {
    let k = path.steps();
    if k == 0 {
        return 0.0;
    }
    let norm = norm_i(a);
    let length = n as f64 * norm;
    path.points()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let t = dot(x, a) as f64 / norm;
            (t / length - j as f64 / k as f64).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::named_law;
    use crate::prob::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_step_pins_at_n() {
        let law = StepLaw::new(2, vec![(vec![1, 0], Rational::from_i64(1))]).unwrap();
        let w = PinningWindow::new(&law, &[1, 0], 10, 6.0).unwrap();
        assert_eq!(w.kappa, 1.0);
        let dist = pinning_time_distribution(&law, &[1, 0], 10, &w, None).unwrap();
        assert_eq!(dist.probs[10], Rational::from_i64(1));
        assert_eq!(dist.total(), Rational::from_i64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (k, path) = sample_free_pinned_bridge(&law, &[1, 0], 10, &mut rng).unwrap();
        assert_eq!(k, 10);
        assert_eq!(time_deviation(&path, 10, &[1, 0]), 0.0);
    }

    #[test]
    fn fixed_forward_speed_has_one_pinning_time() {
        // transverse component is 0 or 1, so S_10 = (10, 0) needs ten zeros
        let r = |n, d| Rational::from_ratio(n, d);
        let law = StepLaw::new(2, vec![(vec![1, 0], r(1, 2)), (vec![1, 1], r(1, 2))]).unwrap();
        let w = PinningWindow::new(&law, &[1, 0], 10, 6.0).unwrap();
        let dist = pinning_time_distribution(&law, &[1, 0], 10, &w, None).unwrap();
        assert_eq!(dist.probs[10], r(1, 1024));
        assert_eq!(dist.total(), r(1, 1024));

        let law = StepLaw::new(2, vec![(vec![1, 1], r(1, 2)), (vec![1, -1], r(1, 2))]).unwrap();
        let dist = pinning_time_distribution(&law, &[1, 0], 10, &w, None).unwrap();
        assert_eq!(dist.total(), r(252, 1024));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (k, path) = sample_free_pinned_bridge(&law, &[1, 0], 10, &mut rng).unwrap();
        assert_eq!(k, 10);
        assert_eq!(path.pinned_at(), &[10, 0]);
    }

    #[test]
    fn drift_must_be_positive() {
        let law = named_law("pm1").unwrap();
        assert!(matches!(PinningWindow::new(&law, &[1], 10, 6.0), Err(Error::DriftViolation)));
        let law = named_law("two-speed").unwrap();
        assert!(matches!(
            PinningWindow::new(&law, &[1, 1], 10, 6.0),
            Err(Error::DriftViolation)
        ));
    }

    #[test]
    fn no_pinning_possible() {
        let law = StepLaw::new(2, vec![(vec![2, 0], 1.0)]).unwrap();
        assert!(matches!(FreePinnedSampler::new(&law, &[1, 0], 3), Err(Error::NoPinningPossible)));
    }

    #[test]
    fn two_speed_window_holds_the_mass() {
        let law = named_law("two-speed").unwrap().to_f64();
        let w = PinningWindow::new(&law, &[1, 0], 60, 6.0).unwrap();
        assert!((w.kappa - 1.5).abs() < 1e-12);
        let dist = pinning_time_distribution(&law, &[1, 0], 60, &w, None).unwrap();
        assert!(dist.outside < 1e-3 * dist.inside);
        let profile = dist.profile.as_ref().unwrap();
        let k = 40;
        assert!((profile[k] - dist.probs[k]).abs() < 0.1 * dist.probs[k]);
        assert!(matches!(
            pinning_time_distribution(&law, &[1, 0], 60, &w, Some(10)),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn lattice_index_of_simple_walk() {
        assert_eq!(lattice_index(&named_law("pm1").unwrap()), Some(2));
        assert_eq!(lattice_index(&named_law("two-speed").unwrap()), Some(1));
        assert_eq!(lattice_index(&named_law("diag").unwrap()), None);
    }
}
