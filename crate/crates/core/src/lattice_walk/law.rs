use std::collections::BTreeMap;

use num::Integer;

use crate::prob::{rational_pow, Prob, Rational};
use crate::{Error, Result};

/// One support point of a step law.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<P> {
    pub point: Vec<i64>,
    pub prob: P,
}

/// A finitely supported probability law on `Z^d` increments.
///
/// Atoms are kept sorted by lattice point. The mean is stored in the law's own
/// scalar type so that exact laws have exact means; the covariance is only
/// needed numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLaw<P = f64> {
    dim: usize,
    atoms: Vec<Atom<P>>,
    mean: Vec<P>,
    covariance: Vec<Vec<f64>>,
}

/// Lattice span `h` and offset `b` of a one-dimensional projection:
/// `P[X in b + hZ] = 1` with `h` maximal and `0 <= b < h`.
///
/// A point mass has `h = 0` and `b` equal to the single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub h: u64,
    pub offset: i64,
}

/// Checks a list of atoms and builds the law with its derived moments.
pub fn validate_step_law<P: Prob>(dim: usize, atoms: Vec<(Vec<i64>, P)>) -> Result<StepLaw<P>> {
    if atoms.is_empty() {
        return Err(Error::EmptySupport);
    }
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let mut sorted: BTreeMap<Vec<i64>, P> = BTreeMap::new();
    let mut total = P::zero();
    for (point, prob) in atoms {
        if point.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: point.len() });
        }
        if prob <= P::zero() {
            return Err(Error::NonPositiveProbability(point));
        }
        total = total + prob.clone();
        if sorted.insert(point.clone(), prob).is_some() {
            return Err(Error::DuplicateSupportVector(point));
        }
    }
    if !total.sums_to_one() {
        return Err(Error::ProbabilitySumMismatch(total.to_f64()));
    }
    let atoms: Vec<Atom<P>> = sorted.into_iter().map(|(point, prob)| Atom { point, prob }).collect();
    let mut mean = vec![P::zero(); dim];
    for a in &atoms {
        for (m, &x) in mean.iter_mut().zip(&a.point) {
            *m = m.clone() + a.prob.clone() * P::from_i64(x);
        }
    }
    let mean_f: Vec<f64> = mean.iter().map(Prob::to_f64).collect();
    let mut covariance = vec![vec![0.0; dim]; dim];
    for a in &atoms {
        let w = a.prob.to_f64();
        for i in 0..dim {
            for j in 0..dim {
                covariance[i][j] += w * (a.point[i] as f64 - mean_f[i]) * (a.point[j] as f64 - mean_f[j]);
            }
        }
    }
    Ok(StepLaw { dim, atoms, mean, covariance })
}

impl<P: Prob> StepLaw<P> {
    pub fn new(dim: usize, atoms: Vec<(Vec<i64>, P)>) -> Result<Self> {
        validate_step_law(dim, atoms)
    }

    /// One-dimensional law from `(value, probability)` pairs.
    pub fn one_dim(atoms: Vec<(i64, P)>) -> Result<Self> {
        validate_step_law(1, atoms.into_iter().map(|(x, p)| (vec![x], p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom<P>] {
        &self.atoms
    }

    pub fn mean(&self) -> &[P] {
        &self.mean
    }

    pub fn mean_f64(&self) -> Vec<f64> {
        self.mean.iter().map(Prob::to_f64).collect()
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// Variance of `direction . X`.
    pub fn variance_along(&self, direction: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                v += direction[i] * self.covariance[i][j] * direction[j];
            }
        }
        v
    }

    pub fn prob_of(&self, point: &[i64]) -> Option<&P> {
        self.atoms
            .binary_search_by(|a| a.point.as_slice().cmp(point))
            .ok()
            .map(|i| &self.atoms[i].prob)
    }

    /// Per-coordinate minimum and maximum of the support.
    pub fn support_bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for a in &self.atoms {
            for j in 0..self.dim {
                lo[j] = lo[j].min(a.point[j]);
                hi[j] = hi[j].max(a.point[j]);
            }
        }
        (lo, hi)
    }

    pub fn to_f64(&self) -> StepLaw<f64> {
        StepLaw {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { point: a.point.clone(), prob: a.prob.to_f64() })
                .collect(),
            mean: self.mean_f64(),
            covariance: self.covariance.clone(),
        }
    }

    /// Law of `direction . X` as a one-dimensional law.
    pub fn project(&self, direction: &[i64]) -> Result<StepLaw<P>> {
        if direction.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: direction.len() });
        }
        let mut merged: BTreeMap<i64, P> = BTreeMap::new();
        for a in &self.atoms {
            let v: i64 = a.point.iter().zip(direction).map(|(x, d)| x * d).sum();
            let slot = merged.entry(v).or_insert_with(P::zero);
            *slot = slot.clone() + a.prob.clone();
        }
        StepLaw::one_dim(merged.into_iter().collect())
    }

    /// Lattice span of the projection of the law onto `direction`.
    pub fn span(&self, direction: &[f64]) -> Result<Span> {
        if direction.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: direction.len() });
        }
        let mut values = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let v: f64 = a.point.iter().zip(direction).map(|(&x, d)| x as f64 * d).sum();
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                return Err(Error::NonLatticeProjection);
            }
            values.push(r as i64);
        }
        Ok(span_of_values(&values))
    }

    pub fn contains(&self, step: &[i64]) -> bool {
        self.prob_of(step).is_some()
    }
}

pub(crate) fn span_of_values(values: &[i64]) -> Span {
    let first = values[0];
    let h = values.iter().fold(0i64, |g, &v| g.gcd(&(v - first))).unsigned_abs();
    let offset = if h == 0 { first } else { first.rem_euclid(h as i64) };
    Span { h, offset }
}

impl StepLaw<f64> {
    /// Moment generating function `E exp(theta . X)`.
    pub fn mgf(&self, theta: &[f64]) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * dot_i(theta, &a.point).exp())
            .sum()
    }
}

impl<P: Prob> StepLaw<P> {
    /// Exponentially tilted law with atoms proportional to `exp(theta . x) P[x]`.
    pub fn tilt(&self, theta: &[f64]) -> Result<StepLaw<f64>> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        let exps: Vec<f64> = self.atoms.iter().map(|a| dot_i(theta, &a.point)).collect();
        let shift = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = self
            .atoms
            .iter()
            .zip(&exps)
            .map(|(a, e)| a.prob.to_f64() * (e - shift).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let atoms = self
            .atoms
            .iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(a, w)| (a.point.clone(), w / total))
            .collect::<Vec<_>>();
        renormalized(self.dim, atoms)
    }
}

impl StepLaw<Rational> {
    /// Exact tilt with per-coordinate rational bases: atoms proportional to
    /// `prod_j base_j^{x_j} P[x]`, i.e. `theta_j = ln base_j`.
    pub fn tilt_exact(&self, bases: &[Rational]) -> Result<StepLaw<Rational>> {
        if bases.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: bases.len() });
        }
        if bases.iter().any(|b| *b <= Rational::zero()) {
            return Err(Error::Degenerate("tilt bases must be positive".into()));
        }
        let weights: Vec<Rational> = self
            .atoms
            .iter()
            .map(|a| {
                a.point
                    .iter()
                    .zip(bases)
                    .fold(a.prob.clone(), |acc, (&x, b)| acc * rational_pow(b, x))
            })
            .collect();
        let total = weights.iter().fold(Rational::zero(), |s, w| s + w.clone());
        validate_step_law(
            self.dim,
            self.atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| (a.point.clone(), w / total.clone()))
                .collect(),
        )
    }
}

/// Builds a floating-point law, absorbing rounding so the total is exactly representable as 1.
fn renormalized(dim: usize, atoms: Vec<(Vec<i64>, f64)>) -> Result<StepLaw<f64>> {
    let total: f64 = atoms.iter().map(|(_, p)| p).sum();
    validate_step_law(dim, atoms.into_iter().map(|(x, p)| (x, p / total)).collect())
}

pub(crate) fn dot_i(theta: &[f64], x: &[i64]) -> f64 {
    theta.iter().zip(x).map(|(t, &v)| t * v as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn symmetric_two_point_law() {
        let law = StepLaw::one_dim(vec![(1, r(1, 2)), (-1, r(1, 2))]).unwrap();
        assert_eq!(law.mean()[0], r(0, 1));
        assert!((law.covariance()[0][0] - 1.0).abs() < 1e-15);
        assert_eq!(law.span(&[1.0]).unwrap(), Span { h: 2, offset: 1 });
    }

    #[test]
    fn biased_law_mean() {
        let law = StepLaw::one_dim(vec![(1, r(2, 3)), (-1, r(1, 3))]).unwrap();
        assert_eq!(law.mean()[0], r(1, 3));
    }

    #[test]
    fn rejects_malformed_laws() {
        assert!(matches!(
            StepLaw::one_dim(vec![(1, 0.5), (-1, 0.6)]),
            Err(Error::ProbabilitySumMismatch(_))
        ));
        assert!(matches!(StepLaw::<f64>::one_dim(vec![]), Err(Error::EmptySupport)));
        assert!(matches!(
            StepLaw::one_dim(vec![(1, 0.5), (1, 0.5)]),
            Err(Error::DuplicateSupportVector(_))
        ));
        assert!(matches!(
            StepLaw::one_dim(vec![(1, 1.0), (2, 0.0)]),
            Err(Error::NonPositiveProbability(_))
        ));
        assert!(matches!(
            StepLaw::new(2, vec![(vec![1], 1.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spans() {
        let lazy = StepLaw::one_dim(vec![(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(lazy.span(&[1.0]).unwrap(), Span { h: 1, offset: 0 });
        let wide = StepLaw::one_dim(vec![(2, 0.5), (-2, 0.5)]).unwrap();
        assert_eq!(wide.span(&[1.0]).unwrap(), Span { h: 4, offset: 2 });
        let point = StepLaw::one_dim(vec![(3, 1.0)]).unwrap();
        assert_eq!(point.span(&[1.0]).unwrap(), Span { h: 0, offset: 3 });
        let diag = StepLaw::new(2, vec![(vec![1, 0], 0.5), (vec![0, 1], 0.5)]).unwrap();
        let s = 0.5f64.sqrt();
        assert!(matches!(diag.span(&[s, s]), Err(Error::NonLatticeProjection)));
        assert_eq!(diag.span(&[1.0, 1.0]).unwrap(), Span { h: 0, offset: 1 });
    }

    #[test]
    fn exact_tilt_by_base() {
        let uniform = StepLaw::one_dim(vec![(-1, r(1, 3)), (0, r(1, 3)), (1, r(1, 3))]).unwrap();
        let tilted = uniform.tilt_exact(&[r(2, 1)]).unwrap();
        assert_eq!(tilted.prob_of(&[-1]), Some(&r(1, 7)));
        assert_eq!(tilted.prob_of(&[0]), Some(&r(2, 7)));
        assert_eq!(tilted.prob_of(&[1]), Some(&r(4, 7)));
    }

    #[test]
    fn projection_merges_atoms() {
        let law = StepLaw::new(
            2,
            vec![(vec![1, 1], r(1, 4)), (vec![1, -1], r(1, 4)), (vec![2, 0], r(1, 2))],
        )
        .unwrap();
        let p = law.project(&[1, 0]).unwrap();
        assert_eq!(p.prob_of(&[1]), Some(&r(1, 2)));
        assert_eq!(p.prob_of(&[2]), Some(&r(1, 2)));
    }
}
