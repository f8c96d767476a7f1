use crate::bridge::BridgeTables;
use crate::lattice_walk::solve_tilt;
use crate::prob::Prob;
use crate::{Error, Result};

/// Predicted `Cov(X_n(s), X_n(t))` for a pinned bridge with scale `c_n`.
///
/// On different grid cells this is `c_n s (1 - t)`; within one cell
/// (`[ns] = [nt]`) the interpolation subtracts `c_n e1 (1 - e2) / n` with
/// `e1 = ns - [ns]`, `e2 = nt - [nt]`.
pub fn covariance_prediction<P: Prob>(s: &P, t: &P, n: usize, c_n: &P) -> Result<P> {
    let (zero, one) = (P::zero(), P::one());
    if *s < zero || *t > one || s > t || n == 0 {
        return Err(Error::OutOfRange { s: s.to_f64(), t: t.to_f64() });
    }
    let nn = P::from_i64(n as i64);
    let base = c_n.clone() * s.clone() * (one.clone() - t.clone());
    let (ns, nt) = (nn.clone() * s.clone(), nn.clone() * t.clone());
    let (fs, ft) = (ns.floor_i64(), nt.floor_i64());
    if fs < ft {
        return Ok(base);
    }
    let e1 = ns - P::from_i64(fs);
    let e2 = nt - P::from_i64(ft);
    Ok(base - c_n.clone() * e1 * (one - e2) / nn)
}

/// `C_n` from a bridge of length `n`, with the limit it approaches.
#[derive(Debug, Clone, PartialEq)]
pub struct CnEstimate<P = f64> {
    pub n: usize,
    pub value: P,
    /// Step variance of the law tilted to the bridge's mean slope.
    pub limit: Option<f64>,
    /// Present for Monte Carlo estimates.
    pub standard_error: Option<f64>,
}

/// Exact `C_n = 4 Var(X_n(1/2))`, times `n / (n - 1)` for odd `n`.
///
/// The variance is the conditional variance of coordinate `coord`; for a
/// bridge pinned at the origin this is the second moment.
pub fn estimate_cn<P: Prob>(tables: &BridgeTables<P>, coord: usize) -> Result<CnEstimate<P>> {
    let n = tables.steps();
    if n < 2 {
        return Err(Error::InvalidLength(format!("C_n needs n >= 2, got {n}")));
    }
    let nn = P::from_i64(n as i64);
    let four = P::from_i64(4);
    let value = if n % 2 == 0 {
        let m = n / 2;
        four * tables.conditional_covariance(m, m, coord, coord) / nn
    } else {
        // X_n(1/2) = (S_m + S_{m+1}) / (2 sqrt(n))
        let m = (n - 1) / 2;
        let var = tables.conditional_covariance(m, m, coord, coord)
            + P::from_i64(2) * tables.conditional_covariance(m, m + 1, coord, coord)
            + tables.conditional_covariance(m + 1, m + 1, coord, coord);
        var / nn.clone() * nn.clone() / (nn - P::one())
    };
    Ok(CnEstimate { n, value, limit: limit_variance(tables, coord), standard_error: None })
}

fn limit_variance<P: Prob>(tables: &BridgeTables<P>, coord: usize) -> Option<f64> {
    let law = tables.law();
    let slope: Vec<f64> = tables.endpoint().iter().map(|&e| e as f64 / tables.steps() as f64).collect();
    let mut e = vec![0.0; law.dim()];
    e[coord] = 1.0;
    let drifted = law.mean_f64().iter().zip(&slope).any(|(m, s)| (m - s).abs() > 1e-12);
    if !drifted {
        return Some(law.variance_along(&e));
    }
    solve_tilt(law, &slope).ok().map(|(_, tilted)| tilted.variance_along(&e))
}

impl<P: Prob> BridgeTables<P> {
    /// Exact `Cov(X_n(s), X_n(t))` at arbitrary times by expanding each
    /// interpolated value over its two neighbouring grid points.
    pub fn scaled_covariance(&self, s: &P, t: &P, coord: usize) -> Result<P> {
        let n = self.steps();
        let (zero, one) = (P::zero(), P::one());
        if *s < zero || *t > one || s > t || n == 0 {
            return Err(Error::OutOfRange { s: s.to_f64(), t: t.to_f64() });
        }
        let nn = P::from_i64(n as i64);
        let weights = |u: &P| -> Vec<(usize, P)> {
            let nu = nn.clone() * u.clone();
            let i = nu.floor_i64() as usize;
            let e = nu - P::from_i64(i as i64);
            if e.is_zero() {
                vec![(i, P::one())]
            } else {
                vec![(i, P::one() - e.clone()), (i + 1, e)]
            }
        };
        let mut acc = P::zero();
        for (i, wi) in weights(s) {
            for (j, wj) in weights(t) {
                acc = acc + wi.clone() * wj.clone() * self.conditional_covariance(i, j, coord, coord);
            }
        }
        Ok(acc / nn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::exact_bridge_law;
    use crate::lattice_walk::{named_law, StepLaw};
    use crate::prob::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn prediction_examples() {
        assert_eq!(covariance_prediction(&r(1, 4), &r(1, 2), 4, &r(4, 3)).unwrap(), r(1, 6));
        assert_eq!(covariance_prediction(&r(0, 1), &r(1, 2), 4, &r(4, 3)).unwrap(), r(0, 1));
        assert_eq!(covariance_prediction(&r(1, 2), &r(1, 1), 4, &r(4, 3)).unwrap(), r(0, 1));
        assert_eq!(covariance_prediction(&r(1, 2), &r(1, 2), 4, &r(4, 3)).unwrap(), r(1, 3));
        // same cell: s = 1/8, t = 3/16 with n = 4 gives e1 = 1/2, e2 = 3/4
        let c = r(4, 3);
        let want = c.clone() * r(1, 8) * r(13, 16) - c * r(1, 2) * r(1, 4) / r(4, 1);
        assert_eq!(covariance_prediction(&r(1, 8), &r(3, 16), 4, &r(4, 3)).unwrap(), want);
        assert!(covariance_prediction(&0.6, &0.5, 4, &1.0).is_err());
        assert!(covariance_prediction(&-0.1, &0.5, 4, &1.0).is_err());
    }

    #[test]
    fn cn_for_short_simple_bridge() {
        let t = exact_bridge_law(&named_law("pm1").unwrap(), 4, &[0]).unwrap();
        let c = estimate_cn(&t, 0).unwrap();
        assert_eq!(c.value, r(4, 3));
        assert_eq!(c.limit, Some(1.0));
        assert_eq!(t.scaled_covariance(&r(1, 4), &r(1, 2), 0).unwrap(), r(1, 6));
    }

    #[test]
    fn cn_zero_for_deterministic_coordinate() {
        let law = named_law("diag").unwrap();
        let t = exact_bridge_law(&law, 6, &[6, 0]).unwrap();
        assert_eq!(estimate_cn(&t, 0).unwrap().value, r(0, 1));
        assert!(estimate_cn(&t, 1).unwrap().value > r(0, 1));
    }

    #[test]
    fn odd_length_matches_off_grid_identity() {
        let law = named_law("lazy").unwrap();
        let t = exact_bridge_law(&law, 7, &[0]).unwrap();
        let c = estimate_cn(&t, 0).unwrap().value;
        let half = r(1, 2);
        assert_eq!(
            t.scaled_covariance(&half, &half, 0).unwrap(),
            covariance_prediction(&half, &half, 7, &c).unwrap()
        );
    }

    #[test]
    fn drifted_limit_uses_tilted_variance() {
        let law: StepLaw<Rational> = named_law("drift").unwrap();
        let t = exact_bridge_law(&law, 6, &[0]).unwrap();
        let c = estimate_cn(&t, 0).unwrap();
        assert!((c.limit.unwrap() - 1.0).abs() < 1e-12);
        assert!(estimate_cn(&exact_bridge_law(&law, 1, &[1]).unwrap(), 0).is_err());
    }
}
