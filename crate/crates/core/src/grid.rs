//! Dense axis-aligned boxes of lattice points, used as DP table domains.

use crate::lattice_walk::StepLaw;
use crate::prob::Prob;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LatticeBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
    strides: Vec<usize>,
    len: usize,
}

/// Number of lattice points in `[lo, hi]`, zero if the box is empty.
pub(crate) fn volume(lo: &[i64], hi: &[i64]) -> u128 {
    lo.iter()
        .zip(hi)
        .map(|(l, h)| if h < l { 0 } else { (h - l + 1) as u128 })
        .product()
}

impl LatticeBox {
    /// `None` when the box is empty.
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Option<Self> {
        if lo.iter().zip(&hi).any(|(l, h)| h < l) {
            return None;
        }
        let d = lo.len();
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * (hi[j + 1] - lo[j + 1] + 1) as usize;
        }
        let len = if d == 0 { 1 } else { strides[0] * (hi[0] - lo[0] + 1) as usize };
        Some(LatticeBox { lo, hi, strides, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| l <= v && v <= h)
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(
            x.iter()
                .zip(&self.lo)
                .zip(&self.strides)
                .map(|((v, l), s)| (v - l) as usize * s)
                .sum(),
        )
    }

    #[cfg(test)]
    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut x = Vec::with_capacity(self.lo.len());
        for (l, s) in self.lo.iter().zip(&self.strides) {
            x.push(l + (idx / s) as i64);
            idx %= s;
        }
        x
    }

    /// Calls `f(index, point)` for every point, in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[i64])) {
        let mut x = self.lo.clone();
        for idx in 0..self.len {
            f(idx, &x);
            for j in (0..x.len()).rev() {
                if x[j] < self.hi[j] {
                    x[j] += 1;
                    break;
                }
                x[j] = self.lo[j];
            }
        }
    }

    fn stride_offset(&self, z: &[i64]) -> isize {
        z.iter().zip(&self.strides).map(|(v, s)| *v as isize * *s as isize).sum()
    }

    fn base_index(&self, x: &[i64]) -> isize {
        x.iter()
            .zip(&self.lo)
            .zip(&self.strides)
            .map(|((v, l), s)| (v - l) as isize * *s as isize)
            .sum()
    }
}

/// One forward step: `out[y] = sum_z P[z] src[y - z]` for `y` in `to`.
///
/// `keep`, when given, masks out target points (set to zero).
pub(crate) fn step_forward<P: Prob>(
    law: &StepLaw<P>,
    from: &LatticeBox,
    src: &[P],
    to: &LatticeBox,
    keep: Option<&[bool]>,
) -> Vec<P> {
    let mut out = vec![P::zero(); to.len()];
    let offsets: Vec<isize> = law.atoms().iter().map(|a| to.stride_offset(&a.point)).collect();
    from.for_each(|i, x| {
        if src[i].is_zero() {
            return;
        }
        let base = to.base_index(x);
        for (a, off) in law.atoms().iter().zip(&offsets) {
            let inside = x
                .iter()
                .zip(&a.point)
                .zip(to.lo().iter().zip(to.hi()))
                .all(|((v, z), (l, h))| (l..=h).contains(&&(v + z)));
            if inside {
                let k = (base + off) as usize;
                if keep.is_none_or(|m| m[k]) {
                    out[k] = out[k].clone() + src[i].clone() * a.prob.clone();
                }
            }
        }
    });
    out
}

/// One backward step: `out[x] = sum_z P[z] src[x + z]` for `x` in `to`, with
/// `src` living on `from` (the later slice).
pub(crate) fn step_backward<P: Prob>(
    law: &StepLaw<P>,
    from: &LatticeBox,
    src: &[P],
    to: &LatticeBox,
) -> Vec<P> {
    let mut out = vec![P::zero(); to.len()];
    let offsets: Vec<isize> = law.atoms().iter().map(|a| from.stride_offset(&a.point)).collect();
    to.for_each(|i, x| {
        let base = from.base_index(x);
        let mut acc = P::zero();
        for (a, off) in law.atoms().iter().zip(&offsets) {
            let inside = x
                .iter()
                .zip(&a.point)
                .zip(from.lo().iter().zip(from.hi()))
                .all(|((v, z), (l, h))| (l..=h).contains(&&(v + z)));
            if inside {
                let v = &src[(base + off) as usize];
                if !v.is_zero() {
                    acc = acc + v.clone() * a.prob.clone();
                }
            }
        }
        out[i] = acc;
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_point_round_trip() {
        let b = LatticeBox::new(vec![-1, 2, 0], vec![1, 3, 2]).unwrap();
        assert_eq!(b.len(), 18);
        let mut seen = 0;
        b.for_each(|i, x| {
            assert_eq!(b.index(x), Some(i));
            assert_eq!(b.point(i), x);
            seen += 1;
        });
        assert_eq!(seen, 18);
        assert_eq!(b.index(&[2, 2, 0]), None);
        assert!(LatticeBox::new(vec![0], vec![-1]).is_none());
        assert_eq!(volume(&[0, 0], &[2, 4]), 15);
    }

    #[test]
    fn forward_then_backward_agree() {
        let law = StepLaw::one_dim(vec![(1, 0.5), (-1, 0.25), (0, 0.25)]).unwrap();
        let a = LatticeBox::new(vec![0], vec![0]).unwrap();
        let b = LatticeBox::new(vec![-1], vec![1]).unwrap();
        let f = step_forward(&law, &a, &[1.0], &b, None);
        assert_eq!(f, vec![0.25, 0.25, 0.5]);
        let g = step_backward(&law, &b, &[0.0, 0.0, 1.0], &a);
        assert_eq!(g, vec![0.5]);
    }
}
