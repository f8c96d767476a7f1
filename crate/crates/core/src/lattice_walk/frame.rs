use crate::lattice_walk::StepLaw;
use crate::prob::Prob;
use crate::{Error, Result};

/// Orthonormal frame whose first vector points along a lattice direction `a`.
///
/// Coordinates in the frame are written `[t, y]`: `t` is the component along
/// `a/|a|`, `y` holds the `d - 1` transverse components.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFrame {
    direction: Vec<i64>,
    vectors: Vec<Vec<f64>>,
}

impl BasisFrame {
    /// Builds the frame by Gram-Schmidt over the standard basis, after `a/|a|`.
    pub fn new(direction: &[i64]) -> Result<Self> {
        let d = direction.len();
        if d == 0 || direction.iter().all(|&v| v == 0) {
            return Err(Error::Degenerate("frame direction must be nonzero".into()));
        }
        let norm = norm_i(direction);
        let mut vectors = vec![direction.iter().map(|&v| v as f64 / norm).collect::<Vec<_>>()];
        for j in 0..d {
            if vectors.len() == d {
                break;
            }
            let mut v = vec![0.0; d];
            v[j] = 1.0;
            for u in &vectors {
                let c = dot(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-6 {
                vectors.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        Ok(BasisFrame { direction: direction.to_vec(), vectors })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn direction(&self) -> &[i64] {
        &self.direction
    }

    /// `|a|`.
    pub fn direction_norm(&self) -> f64 {
        norm_i(&self.direction)
    }

    /// Unit vector `f_1 = a/|a|`.
    pub fn f1(&self) -> &[f64] {
        &self.vectors[0]
    }

    /// The `d - 1` transverse unit vectors.
    pub fn complement(&self) -> &[Vec<f64>] {
        &self.vectors[1..]
    }

    pub fn to_frame(&self, x: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| dot(v, x)).collect()
    }

    pub fn from_frame(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (c, v) in coords.iter().zip(&self.vectors) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        out
    }

    /// Frame coordinates `(t, y)` of a lattice point.
    pub fn split(&self, x: &[i64]) -> (f64, Vec<f64>) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let c = self.to_frame(&xf);
        (c[0], c[1..].to_vec())
    }
}

/// Splits the mean of `law` into its component along `a` and the orthogonal remainder.
///
/// Computed in the law's scalar type, so exact laws decompose exactly.
pub fn mean_decompose<P: Prob>(law: &StepLaw<P>, frame: &BasisFrame) -> Result<(Vec<P>, Vec<P>)> {
    if law.dim() != frame.dim() {
        return Err(Error::DimensionMismatch { expected: frame.dim(), got: law.dim() });
    }
    let a = frame.direction();
    let aa: i64 = a.iter().map(|v| v * v).sum();
    let mu = law.mean();
    let mu_dot_a = mu
        .iter()
        .zip(a)
        .fold(P::zero(), |s, (m, &ai)| s + m.clone() * P::from_i64(ai));
    let coef = mu_dot_a / P::from_i64(aa);
    let along: Vec<P> = a.iter().map(|&ai| coef.clone() * P::from_i64(ai)).collect();
    let orth: Vec<P> = mu.iter().zip(&along).map(|(m, p)| m.clone() - p.clone()).collect();
    Ok((along, orth))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_i(a: &[i64]) -> f64 {
    (a.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Rational;
    use proptest::prelude::*;

    #[test]
    fn axis_aligned_frame() {
        let f = BasisFrame::new(&[1, 0]).unwrap();
        assert_eq!(f.f1(), &[1.0, 0.0]);
        assert_eq!(f.complement(), &[vec![0.0, 1.0]]);
        assert!(BasisFrame::new(&[0, 0]).is_err());
    }

    #[test]
    fn decompositions() {
        let law = StepLaw::new(2, vec![(vec![1, 1], Rational::one())]).unwrap();
        let (a, o) = mean_decompose(&law, &BasisFrame::new(&[1, 0]).unwrap()).unwrap();
        assert_eq!(a, vec![Rational::one(), Rational::zero()]);
        assert_eq!(o, vec![Rational::zero(), Rational::one()]);

        let law = StepLaw::new(2, vec![(vec![2, 0], Rational::one())]).unwrap();
        let (a, o) = mean_decompose(&law, &BasisFrame::new(&[1, 1]).unwrap()).unwrap();
        assert_eq!(a, vec![Rational::one(), Rational::one()]);
        assert_eq!(o, vec![Rational::one(), -Rational::one()]);

        let sym = StepLaw::one_dim(vec![(1, 0.5), (-1, 0.5)]).unwrap();
        let (a, o) = mean_decompose(&sym, &BasisFrame::new(&[3]).unwrap()).unwrap();
        assert_eq!((a, o), (vec![0.0], vec![0.0]));
        assert!(mean_decompose(&sym, &BasisFrame::new(&[1, 1]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_and_invertible(
            a in prop::collection::vec(-5i64..=5, 1..=4),
            x in prop::collection::vec(-10.0f64..10.0, 4),
        ) {
            prop_assume!(a.iter().any(|&v| v != 0));
            let f = BasisFrame::new(&a).unwrap();
            let d = a.len();
            let n = norm_i(&a);
            for (fi, ai) in f.f1().iter().zip(&a) {
                prop_assert!((fi - *ai as f64 / n).abs() < 1e-12);
            }
            let all: Vec<&[f64]> = std::iter::once(f.f1()).chain(f.complement().iter().map(|v| v.as_slice())).collect();
            prop_assert_eq!(all.len(), d);
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot(all[i], all[j]) - want).abs() < 1e-12);
                }
            }
            let x = &x[..d];
            let back = f.from_frame(&f.to_frame(x));
            for (u, v) in back.iter().zip(x) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }

        #[test]
        fn mean_decomposition_is_orthogonal(
            pts in prop::collection::vec(prop::collection::vec(-4i64..=4, 3), 1..5),
            a in prop::collection::vec(-3i64..=3, 3),
        ) {
            prop_assume!(a.iter().any(|&v| v != 0));
            let mut pts = pts;
            pts.sort();
            pts.dedup();
            let w = 1.0 / pts.len() as f64;
            let law = StepLaw::new(3, pts.into_iter().map(|p| (p, w)).collect()).unwrap();
            let (along, orth) = mean_decompose(&law, &BasisFrame::new(&a).unwrap()).unwrap();
            let mu = law.mean_f64();
            prop_assert!(dot(&along, &orth).abs() < 1e-12);
            for j in 0..3 {
                prop_assert!((along[j] + orth[j] - mu[j]).abs() < 1e-12);
            }
            let af: Vec<f64> = a.iter().map(|&v| v as f64).collect();
            prop_assert!(dot(&orth, &af).abs() < 1e-12);
        }
    }
}
