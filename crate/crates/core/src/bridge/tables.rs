use std::io::Write;

use rand::Rng;

use crate::grid::{step_backward, step_forward, volume, LatticeBox};
use crate::lattice_walk::{BasisFrame, StepLaw};
use crate::prob::{format_rational, Prob, Rational};
use crate::{Error, Result};

pub const DEFAULT_TABLE_BUDGET: u64 = 100_000_000;

/// Forward/backward tables of a walk conditioned on `S_n = endpoint`.
///
/// Slice `i` lives on the box of points that are both reachable from the
/// origin in `i` steps and can still reach the endpoint in `n - i` steps.
/// On that box `forward[i][x] = P[S_i = x]` and
/// `backward[i][x] = P[S_n = endpoint | S_i = x]`.
#[derive(Debug, Clone)]
pub struct BridgeTables<P = f64> {
    law: StepLaw<P>,
    n: usize,
    endpoint: Vec<i64>,
    boxes: Vec<LatticeBox>,
    forward: Vec<Vec<P>>,
    backward: Vec<Vec<P>>,
}

/// Builds the bridge tables with the default state budget.
pub fn exact_bridge_law<P: Prob>(law: &StepLaw<P>, n: usize, endpoint: &[i64]) -> Result<BridgeTables<P>> {
    BridgeTables::build(law, n, endpoint, DEFAULT_TABLE_BUDGET)
}

impl<P: Prob> BridgeTables<P> {
    pub fn build(law: &StepLaw<P>, n: usize, endpoint: &[i64], budget: u64) -> Result<Self> {
        let d = law.dim();
        if endpoint.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: endpoint.len() });
        }
        let unreachable = || Error::UnreachableEndpoint(endpoint.to_vec());
        let (zlo, zhi) = law.support_bounds();
        let mut bounds = Vec::with_capacity(n + 1);
        let mut needed: u128 = 0;
        for i in 0..=n {
            let (ii, rest) = (i as i64, (n - i) as i64);
            let lo: Vec<i64> = (0..d).map(|j| (ii * zlo[j]).max(endpoint[j] - rest * zhi[j])).collect();
            let hi: Vec<i64> = (0..d).map(|j| (ii * zhi[j]).min(endpoint[j] - rest * zlo[j])).collect();
            let v = volume(&lo, &hi);
            if v == 0 {
                return Err(unreachable());
            }
            needed += v;
            bounds.push((lo, hi));
        }
        if needed > budget as u128 {
            return Err(Error::TableBudgetExceeded { needed: needed.min(u64::MAX as u128) as u64, budget });
        }
        let boxes: Vec<LatticeBox> = bounds
            .into_iter()
            .map(|(lo, hi)| LatticeBox::new(lo, hi).expect("non-empty"))
            .collect();

        let origin = vec![0; d];
        let mut f0 = vec![P::zero(); boxes[0].len()];
        f0[boxes[0].index(&origin).ok_or_else(unreachable)?] = P::one();
        let mut forward = vec![f0];
        for i in 1..=n {
            let next = step_forward(law, &boxes[i - 1], &forward[i - 1], &boxes[i], None);
            forward.push(next);
        }
        let mut gn = vec![P::zero(); boxes[n].len()];
        gn[boxes[n].index(endpoint).ok_or_else(unreachable)?] = P::one();
        let mut backward = vec![gn];
        for i in (0..n).rev() {
            let prev = step_backward(law, &boxes[i + 1], &backward[0], &boxes[i]);
            backward.insert(0, prev);
        }
        let tables = BridgeTables { law: law.clone(), n, endpoint: endpoint.to_vec(), boxes, forward, backward };
        if tables.total_probability().is_zero() {
            return Err(unreachable());
        }
        Ok(tables)
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn law(&self) -> &StepLaw<P> {
        &self.law
    }

    pub fn endpoint(&self) -> &[i64] {
        &self.endpoint
    }

    /// `P[S_n = endpoint]`.
    pub fn total_probability(&self) -> P {
        self.backward[0][0].clone()
    }

    /// `P[S_i = x]` for points that can still reach the endpoint; zero elsewhere.
    pub fn forward_prob(&self, i: usize, x: &[i64]) -> P {
        self.boxes[i].index(x).map_or_else(P::zero, |k| self.forward[i][k].clone())
    }

    /// `P[S_n = endpoint | S_i = x]`.
    pub fn backward_prob(&self, i: usize, x: &[i64]) -> P {
        self.boxes[i].index(x).map_or_else(P::zero, |k| self.backward[i][k].clone())
    }

    /// `P[S_i = x | S_n = endpoint]`.
    pub fn marginal_prob(&self, i: usize, x: &[i64]) -> P {
        self.forward_prob(i, x) * self.backward_prob(i, x) / self.total_probability()
    }

    /// Conditional law of `S_i`, nonzero atoms in lexicographic order.
    pub fn marginal(&self, i: usize) -> Vec<(Vec<i64>, P)> {
        let total = self.total_probability();
        let mut out = Vec::new();
        self.boxes[i].for_each(|k, x| {
            let w = self.forward[i][k].clone() * self.backward[i][k].clone();
            if !w.is_zero() {
                out.push((x.to_vec(), w / total.clone()));
            }
        });
        out
    }

    /// `E[S_i^(coord) | S_n = endpoint]`.
    pub fn conditional_mean(&self, i: usize, coord: usize) -> P {
        self.marginal(i)
            .into_iter()
            .fold(P::zero(), |s, (x, w)| s + w * P::from_i64(x[coord]))
    }

    /// `E[S_i^(a) S_j^(b) | S_n = endpoint]`.
    pub fn conditional_cross_moment(&self, i: usize, j: usize, a: usize, b: usize) -> P {
        let (i, j, a, b) = if i <= j { (i, j, a, b) } else { (j, i, b, a) };
        let mut m: Vec<P> = Vec::with_capacity(self.boxes[i].len());
        self.boxes[i].for_each(|k, x| m.push(self.forward[i][k].clone() * P::from_i64(x[a])));
        for l in i..j {
            m = step_forward(&self.law, &self.boxes[l], &m, &self.boxes[l + 1], None);
        }
        let mut acc = P::zero();
        self.boxes[j].for_each(|k, y| {
            if !m[k].is_zero() {
                acc = acc.clone() + m[k].clone() * self.backward[j][k].clone() * P::from_i64(y[b]);
            }
        });
        acc / self.total_probability()
    }

    /// `Cov(S_i^(a), S_j^(b) | S_n = endpoint)`.
    pub fn conditional_covariance(&self, i: usize, j: usize, a: usize, b: usize) -> P {
        self.conditional_cross_moment(i, j, a, b) - self.conditional_mean(i, a) * self.conditional_mean(j, b)
    }

    /// Full `(n+1) x (n+1)` conditional covariance matrix of one coordinate.
    pub fn covariance_matrix(&self, coord: usize) -> Vec<Vec<P>> {
        let means: Vec<P> = (0..=self.n).map(|i| self.conditional_mean(i, coord)).collect();
        let mut cov = vec![vec![P::zero(); self.n + 1]; self.n + 1];
        for i in 0..=self.n {
            for j in i..=self.n {
                let c = self.conditional_cross_moment(i, j, coord, coord) - means[i].clone() * means[j].clone();
                cov[i][j] = c.clone();
                cov[j][i] = c;
            }
        }
        cov
    }

    /// Exact sequential sample: each step is drawn from
    /// `P[z] P[S_n = e | S_{i+1} = x + z] / P[S_n = e | S_i = x]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BridgePath {
        let d = self.law.dim();
        let mut x = vec![0i64; d];
        let mut points = Vec::with_capacity(self.n + 1);
        points.push(x.clone());
        let mut weights = vec![0.0; self.law.atoms().len()];
        let mut y = vec![0i64; d];
        for i in 0..self.n {
            let mut total = 0.0;
            for (w, a) in weights.iter_mut().zip(self.law.atoms()) {
                for j in 0..d {
                    y[j] = x[j] + a.point[j];
                }
                *w = match self.boxes[i + 1].index(&y) {
                    Some(k) if !self.backward[i + 1][k].is_zero() => {
                        a.prob.to_f64() * self.backward[i + 1][k].to_f64()
                    }
                    _ => 0.0,
                };
                total += *w;
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (idx, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(idx);
                    acc += w;
                    if u < acc {
                        break;
                    }
                }
            }
            let z = &self.law.atoms()[pick.expect("bridge tables admit a continuation")].point;
            for j in 0..d {
                x[j] += z[j];
            }
            points.push(x.clone());
        }
        BridgePath { points }
    }

    /// Writes every conditional marginal as CSV `i,x1,...,xd,prob`.
    pub fn write_marginals_csv<W: Write>(&self, out: W, render: impl Fn(&P) -> String) -> Result<()> {
        let d = self.law.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["i".to_string()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        header.push("prob".into());
        w.write_record(&header)?;
        for i in 0..=self.n {
            for (x, p) in self.marginal(i) {
                let mut row = vec![i.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                row.push(render(&p));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl BridgeTables<Rational> {
    pub fn write_exact_marginals_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_marginals_csv(out, format_rational)
    }
}

/// A lattice path `S_0 = 0, S_1, ..., S_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgePath {
    points: Vec<Vec<i64>>,
}

impl BridgePath {
    /// Checks that the path starts at the origin and every step is in the support.
    pub fn new<P: Prob>(points: Vec<Vec<i64>>, law: &StepLaw<P>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::InvalidLength("empty path".into()))?;
        if first.iter().any(|&v| v != 0) {
            return Err(Error::Degenerate("path must start at the origin".into()));
        }
        for w in points.windows(2) {
            if w[1].len() != law.dim() {
                return Err(Error::DimensionMismatch { expected: law.dim(), got: w[1].len() });
            }
            let step: Vec<i64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            if !law.contains(&step) {
                return Err(Error::Degenerate(format!("step {step:?} is not in the support")));
            }
        }
        Ok(BridgePath { points })
    }

    /// A zero-length path at the origin of `Z^d`.
    pub fn origin(dim: usize) -> Self {
        BridgePath { points: vec![vec![0; dim]] }
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Last point, the value the path is pinned at.
    pub fn pinned_at(&self) -> &[i64] {
        self.points.last().expect("non-empty")
    }

    pub fn increments(&self) -> Vec<Vec<i64>> {
        self.points
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// CSV `index,t,y1,...`.
    ///
    /// Without a frame `t = index / k` and the `y` columns are the raw lattice
    /// coordinates. With a frame `t` is the coordinate along its direction and
    /// the `y` columns are the `d - 1` transverse coordinates.
    pub fn write_csv<W: Write>(&self, out: W, frame: Option<&BasisFrame>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ycols = if frame.is_some() { self.dim() - 1 } else { self.dim() };
        let mut header = vec!["index".to_string(), "t".to_string()];
        header.extend((1..=ycols).map(|j| format!("y{j}")));
        w.write_record(&header)?;
        let k = self.steps().max(1) as f64;
        for (i, x) in self.points.iter().enumerate() {
            let mut row = vec![i.to_string()];
            match frame {
                Some(f) => {
                    let (t, y) = f.split(x);
                    row.push(t.to_string());
                    row.extend(y.iter().map(|v| v.to_string()));
                }
                None => {
                    row.push((i as f64 / k).to_string());
                    row.extend(x.iter().map(|v| v.to_string()));
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice_walk::named_law;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn simple_bridge_marginal() {
        let law = named_law("pm1").unwrap();
        let t = exact_bridge_law(&law, 4, &[0]).unwrap();
        assert_eq!(t.total_probability(), r(6, 16));
        assert_eq!(t.marginal_prob(2, &[0]), r(2, 3));
        assert_eq!(t.marginal_prob(2, &[2]), r(1, 6));
        for i in 0..=4 {
            let s = t.marginal(i).into_iter().fold(r(0, 1), |s, (_, p)| s + p);
            assert_eq!(s, r(1, 1));
        }
    }

    #[test]
    fn zero_length_and_parity() {
        let law = named_law("pm1").unwrap();
        let t = exact_bridge_law(&law, 0, &[0]).unwrap();
        assert_eq!(t.total_probability(), r(1, 1));
        assert_eq!(t.sample(&mut ChaCha8Rng::seed_from_u64(0)), BridgePath::origin(1));
        assert!(matches!(exact_bridge_law(&law, 3, &[0]), Err(Error::UnreachableEndpoint(_))));
        assert!(matches!(exact_bridge_law(&law, 2, &[4]), Err(Error::UnreachableEndpoint(_))));
        assert!(matches!(
            BridgeTables::build(&law, 100, &[0], 50),
            Err(Error::TableBudgetExceeded { .. })
        ));
    }

    #[test]
    fn samples_are_valid_and_deterministic() {
        let law = named_law("two-speed").unwrap();
        let t = exact_bridge_law(&law, 8, &[12, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = t.sample(&mut rng);
            assert_eq!(p.pinned_at(), &[12, 1]);
            assert!(BridgePath::new(p.points().to_vec(), &law).is_ok());
        }
        let a = t.sample(&mut ChaCha8Rng::seed_from_u64(9));
        let b = t.sample(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn marginal_csv() {
        let law = named_law("pm1").unwrap();
        let t = exact_bridge_law(&law, 2, &[0]).unwrap();
        let mut buf = Vec::new();
        t.write_exact_marginals_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "i,x1,prob\n0,0,1\n1,-1,1/2\n1,1,1/2\n2,0,1\n"
        );
    }

    #[test]
    fn path_csv() {
        let law = named_law("diag").unwrap();
        let p = BridgePath::new(vec![vec![0, 0], vec![1, 1], vec![2, 0]], &law).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, Some(&BasisFrame::new(&[1, 0]).unwrap())).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,t,y1\n0,0,0\n1,1,1\n2,2,0\n");
        assert!(BridgePath::new(vec![vec![0, 0], vec![0, 1]], &law).is_err());
    }
}
