use crate::lattice_walk::{Span, StepLaw};
use crate::prob::Prob;
use crate::{Error, Result};

/// Pointwise comparison of `(sqrt(n)/h) p_n(x)` with the normal density over
/// the lattice `Lambda_n = {(n b + h z) / sqrt(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCltReport {
    pub n: usize,
    pub span: Span,
    pub variance: f64,
    pub sup_distance: f64,
    /// Point of `Lambda_n` where the sup is attained.
    pub argmax: f64,
    /// `(x, (sqrt(n)/h) p_n(x), n(x))` for every lattice point scanned.
    pub points: Vec<(f64, f64, f64)>,
}

pub fn local_clt_distance<P: Prob>(law: &StepLaw<P>, n: usize) -> Result<f64> {
    local_clt_profile(law, n).map(|r| r.sup_distance)
}

/// Exact `p_n` by `n`-fold convolution, scanned over the support of `S_n`
/// plus one lattice point on each side (beyond that the density only falls).
pub fn local_clt_profile<P: Prob>(law: &StepLaw<P>, n: usize) -> Result<LocalCltReport> {
    if law.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: law.dim() });
    }
    if n == 0 {
        return Err(Error::InvalidLength("local CLT needs n >= 1".into()));
    }
    let mean = law.mean()[0].clone();
    let nonzero = if P::EXACT { !mean.is_zero() } else { mean.to_f64().abs() > 1e-12 };
    if nonzero {
        return Err(Error::NonzeroMean(mean.to_f64()));
    }
    let variance = law.covariance()[0][0];
    if variance <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let span = law.span(&[1.0])?;
    let h = span.h as i64;

    let (lo, hi) = law.support_bounds();
    let (lo, hi) = (lo[0], hi[0]);
    let width = (hi - lo) as usize;
    let mut p = vec![1.0f64];
    let atoms: Vec<(usize, f64)> = law.atoms().iter().map(|a| ((a.point[0] - lo) as usize, a.prob.to_f64())).collect();
    for _ in 0..n {
        let mut next = vec![0.0; p.len() + width];
        for (i, v) in p.iter().enumerate() {
            if *v != 0.0 {
                for (off, w) in &atoms {
                    next[i + off] += v * w;
                }
            }
        }
        p = next;
    }
    // p[i] = P[S_n = n lo + i]
    let base = n as i64 * lo;
    let root = (n as f64).sqrt();
    let density = |x: f64| (-x * x / (2.0 * variance)).exp() / (2.0 * std::f64::consts::PI * variance).sqrt();
    let first = base - h;
    let last = base + p.len() as i64 - 1 + h;
    let mut points = Vec::new();
    let (mut sup, mut argmax) = (0.0f64, 0.0);
    // lattice points n b + h z are exactly the support offsets congruent to n b mod h
    let start = first + (n as i64 * span.offset - first).rem_euclid(h);
    let mut s = start;
    while s <= last {
        let idx = s - base;
        let prob = if idx >= 0 && (idx as usize) < p.len() { p[idx as usize] } else { 0.0 };
        let x = s as f64 / root;
        let scaled = root / h as f64 * prob;
        let nx = density(x);
        let diff = (scaled - nx).abs();
        if diff > sup {
            sup = diff;
            argmax = x;
        }
        points.push((x, scaled, nx));
        s += h;
    }
    Ok(LocalCltReport { n, span, variance, sup_distance: sup, argmax, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::named_law;

    #[test]
    fn one_step_simple_walk() {
        let law = named_law("pm1").unwrap();
        let r = local_clt_profile(&law, 1).unwrap();
        let want = (0.25 - (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs();
        assert!((r.sup_distance - want).abs() < 1e-15);
        assert!((r.sup_distance - 0.00803).abs() < 1e-5);
        assert_eq!(r.span, Span { h: 2, offset: 1 });
        assert!(r.points.iter().all(|(x, _, _)| (x.round() as i64).rem_euclid(2) == 1));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(local_clt_distance(&named_law("drift").unwrap(), 4), Err(Error::NonzeroMean(_))));
        assert!(matches!(local_clt_distance(&named_law("pm1").unwrap(), 0), Err(Error::InvalidLength(_))));
        let point = StepLaw::one_dim(vec![(0, 1.0)]).unwrap();
        assert!(matches!(local_clt_distance(&point, 3), Err(Error::ZeroVariance)));
        assert!(local_clt_distance(&named_law("diag").unwrap(), 3).is_err());
    }

    #[test]
    fn lazy_walk_distance_shrinks() {
        let law = named_law("lazy").unwrap();
        let d: Vec<f64> = [16, 64, 256].iter().map(|&n| local_clt_distance(&law, n).unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d[2] < 0.02);
    }
}
