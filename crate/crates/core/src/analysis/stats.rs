use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bridge::ScaledPath;
use crate::{Error, Result};

/// Values are stored in fixed point with this many fractional bits so that
/// sums merge exactly.
pub const FRACTION_BITS: u32 = 20;
const SCALE: f64 = (1u64 << FRACTION_BITS) as f64;
/// Largest magnitude a recorded value may have.
pub const VALUE_LIMIT: f64 = 1024.0;

/// The default anchor grid `{i/16}`.
pub fn default_grid() -> Vec<f64> {
    (0..=16).map(|i| i as f64 / 16.0).collect()
}

pub(crate) fn quantize(x: f64) -> Result<i64> {
    if !x.is_finite() || x.abs() >= VALUE_LIMIT {
        return Err(Error::Degenerate(format!("value {x} outside the recordable range")));
    }
    Ok((x * SCALE).round() as i64)
}

pub(crate) fn dequantize(q: i64) -> f64 {
    q as f64 / SCALE
}

/// A value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

/// Mergeable moments of path values on a fixed time grid.
///
/// For every grid time and coordinate: the sum and a histogram of values;
/// for every pair of grid times `a <= b` and coordinate: the power sums of
/// `x_a x_b` up to fourth order (enough for a closed-form jackknife of the
/// covariance). Also histograms of path sup norms and of increment norms.
/// Everything is integer, so merging is exact, associative and commutative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    grid: Vec<f64>,
    dim: usize,
    count: u64,
    sum: Vec<i128>,
    xy: Vec<i128>,
    x2y: Vec<i128>,
    xy2: Vec<i128>,
    x2y2: Vec<i128>,
    marginals: Vec<BTreeMap<i64, u64>>,
    sup_hist: BTreeMap<i64, u64>,
    increment_hist: BTreeMap<i64, u64>,
}

impl SummaryStats {
    pub fn new(grid: Vec<f64>, dim: usize) -> Self {
        let g = grid.len();
        let pairs = g * (g + 1) / 2 * dim;
        SummaryStats {
            grid,
            dim,
            count: 0,
            sum: vec![0; g * dim],
            xy: vec![0; pairs],
            x2y: vec![0; pairs],
            xy2: vec![0; pairs],
            x2y2: vec![0; pairs],
            marginals: vec![BTreeMap::new(); g * dim],
            sup_hist: BTreeMap::new(),
            increment_hist: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn pair(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let g = self.grid.len();
        a * g - a * a.saturating_sub(1) / 2 + b - a
    }

    /// Index of a grid time, matched within `1e-12`.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        self.grid
            .iter()
            .position(|g| (g - t).abs() <= 1e-12)
            .ok_or(Error::TimeNotOnGrid(t))
    }

    /// Records one sample given its values at every grid time.
    pub fn add_values(&mut self, values: &[Vec<f64>]) -> Result<()> {
        let g = self.grid.len();
        if values.len() != g {
            return Err(Error::GridMismatch);
        }
        let mut q = vec![0i64; g * self.dim];
        for (a, v) in values.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
            }
            for (c, x) in v.iter().enumerate() {
                q[a * self.dim + c] = quantize(*x)?;
            }
        }
        self.count += 1;
        for a in 0..g {
            for c in 0..self.dim {
                let qa = q[a * self.dim + c];
                self.sum[a * self.dim + c] += qa as i128;
                *self.marginals[a * self.dim + c].entry(qa).or_insert(0) += 1;
                for b in a..g {
                    let qa = qa as i128;
                    let qb = q[b * self.dim + c] as i128;
                    let k = self.pair(a, b) * self.dim + c;
                    let p = qa * qb;
                    self.xy[k] += p;
                    self.x2y[k] += (p * qa) >> FRACTION_BITS;
                    self.xy2[k] += (p * qb) >> FRACTION_BITS;
                    self.x2y2[k] += (p * p) >> (2 * FRACTION_BITS);
                }
            }
        }
        Ok(())
    }

    /// Records a path: its values on the grid and its sup norm.
    pub fn add_path(&mut self, path: &ScaledPath) -> Result<()> {
        if path.value_dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: path.value_dim() });
        }
        let values: Vec<Vec<f64>> = self.grid.iter().map(|&t| path.eval(t)).collect();
        self.add_values(&values)?;
        *self.sup_hist.entry(quantize(path.sup_norm())?).or_insert(0) += 1;
        Ok(())
    }

    pub fn add_increment_norm(&mut self, norm: f64) -> Result<()> {
        *self.increment_hist.entry(quantize(norm)?).or_insert(0) += 1;
        Ok(())
    }

    pub fn mean(&self, t: f64, coord: usize) -> Result<f64> {
        let a = self.grid_index(t)?;
        if self.count == 0 {
            return Err(Error::TooFewSamples { have: 0, need: 1 });
        }
        Ok(dequantize_sum(self.sum[a * self.dim + coord], 1) / self.count as f64)
    }

    /// Sample values at a grid time as `(value, multiplicity)`, ascending.
    pub fn marginal(&self, t: f64, coord: usize) -> Result<Vec<(f64, u64)>> {
        let a = self.grid_index(t)?;
        Ok(self.marginals[a * self.dim + coord].iter().map(|(q, n)| (dequantize(*q), *n)).collect())
    }

    pub fn sup_values(&self) -> Vec<(f64, u64)> {
        self.sup_hist.iter().map(|(q, n)| (dequantize(*q), *n)).collect()
    }

    pub fn increment_norms(&self) -> Vec<(f64, u64)> {
        self.increment_hist.iter().map(|(q, n)| (dequantize(*q), *n)).collect()
    }

    fn raw(&self, a: usize, b: usize, coord: usize) -> Raw {
        let k = self.pair(a, b) * self.dim + coord;
        let (x2y, xy2) = if a <= b { (self.x2y[k], self.xy2[k]) } else { (self.xy2[k], self.x2y[k]) };
        Raw {
            n: self.count as f64,
            sx: dequantize_sum(self.sum[a * self.dim + coord], 1),
            sy: dequantize_sum(self.sum[b * self.dim + coord], 1),
            sxy: dequantize_sum(self.xy[k], 2),
            sx2: dequantize_sum(self.xy[self.pair(a, a) * self.dim + coord], 2),
            sy2: dequantize_sum(self.xy[self.pair(b, b) * self.dim + coord], 2),
            sx2y: dequantize_sum(x2y, 2),
            sxy2: dequantize_sum(xy2, 2),
            sx2y2: dequantize_sum(self.x2y2[k], 2),
        }
    }

    /// Population (divide-by-`N`) covariance, the moment of the ensemble
    /// viewed as an equally weighted law.
    pub fn population_covariance(&self, s: f64, t: f64, coord: usize) -> Result<f64> {
        let (a, b) = (self.grid_index(s)?, self.grid_index(t)?);
        if self.count == 0 {
            return Err(Error::TooFewSamples { have: 0, need: 1 });
        }
        let r = self.raw(a, b, coord);
        Ok((r.sxy - r.sx * r.sy / r.n) / r.n)
    }
}

fn dequantize_sum(v: i128, order: i32) -> f64 {
    v as f64 / SCALE.powi(order)
}

struct Raw {
    n: f64,
    sx: f64,
    sy: f64,
    sxy: f64,
    sx2: f64,
    sy2: f64,
    sx2y: f64,
    sxy2: f64,
    sx2y2: f64,
}

/// Unbiased covariance of the values at grid times `s` and `t` with its
/// delete-one jackknife standard error (NaN for fewer than three samples).
pub fn empirical_covariance(stats: &SummaryStats, s: f64, t: f64, coord: usize) -> Result<Estimate> {
    let (a, b) = (stats.grid_index(s)?, stats.grid_index(t)?);
    if stats.count < 2 {
        return Err(Error::TooFewSamples { have: stats.count, need: 2 });
    }
    let r = stats.raw(a, b, coord);
    let n = r.n;
    let value = (r.sxy - r.sx * r.sy / n) / (n - 1.0);
    if stats.count < 3 {
        return Ok(Estimate { value, standard_error: f64::NAN });
    }
    // delete-one values are B x_i + C y_i + D x_i y_i plus a constant
    let k = (n - 1.0) * (n - 2.0);
    let (bb, cc, dd) = (r.sy / k, r.sx / k, -n / k);
    let eu = (bb * r.sx + cc * r.sy + dd * r.sxy) / n;
    let eu2 = (bb * bb * r.sx2
        + cc * cc * r.sy2
        + dd * dd * r.sx2y2
        + 2.0 * bb * cc * r.sxy
        + 2.0 * bb * dd * r.sx2y
        + 2.0 * cc * dd * r.sxy2)
        / n;
    let var = (n - 1.0) * (eu2 - eu * eu);
    Ok(Estimate { value, standard_error: var.max(0.0).sqrt() })
}

/// Sum-merge of two summaries on the same grid.
pub fn merge_stats(a: &SummaryStats, b: &SummaryStats) -> Result<SummaryStats> {
    if a.grid != b.grid || a.dim != b.dim {
        return Err(Error::GridMismatch);
    }
    let add = |x: &[i128], y: &[i128]| x.iter().zip(y).map(|(u, v)| u + v).collect::<Vec<_>>();
    let merge_hist = |x: &BTreeMap<i64, u64>, y: &BTreeMap<i64, u64>| {
        let mut out = x.clone();
        for (k, v) in y {
            *out.entry(*k).or_insert(0) += v;
        }
        out
    };
    Ok(SummaryStats {
        grid: a.grid.clone(),
        dim: a.dim,
        count: a.count + b.count,
        sum: add(&a.sum, &b.sum),
        xy: add(&a.xy, &b.xy),
        x2y: add(&a.x2y, &b.x2y),
        xy2: add(&a.xy2, &b.xy2),
        x2y2: add(&a.x2y2, &b.x2y2),
        marginals: a.marginals.iter().zip(&b.marginals).map(|(x, y)| merge_hist(x, y)).collect(),
        sup_hist: merge_hist(&a.sup_hist, &b.sup_hist),
        increment_hist: merge_hist(&a.increment_hist, &b.increment_hist),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn six_paths() -> SummaryStats {
        // the six +-1 paths of length 4 pinned at 0, rescaled by 1/2
        let paths = [
            [0, 1, 2, 1, 0],
            [0, 1, 0, 1, 0],
            [0, 1, 0, -1, 0],
            [0, -1, 0, 1, 0],
            [0, -1, 0, -1, 0],
            [0, -1, -2, -1, 0],
        ];
        let grid: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let mut st = SummaryStats::new(grid, 1);
        for p in paths {
            let knots = p.iter().enumerate().map(|(i, &v)| (i as f64 / 4.0, vec![v as f64 / 2.0])).collect();
            st.add_path(&ScaledPath::new(knots).unwrap()).unwrap();
        }
        st
    }

    #[test]
    fn six_path_covariances() {
        let st = six_paths();
        assert_eq!(st.population_covariance(0.25, 0.5, 0).unwrap(), 1.0 / 6.0);
        let c = empirical_covariance(&st, 0.25, 0.5, 0).unwrap();
        assert!((c.value - 0.2).abs() < 1e-15);
        assert!(c.standard_error > 0.0);
        assert_eq!(empirical_covariance(&st, 0.0, 0.5, 0).unwrap().value, 0.0);
        assert_eq!(empirical_covariance(&st, 0.5, 1.0, 0).unwrap().value, 0.0);
        assert!(matches!(empirical_covariance(&st, 0.3, 0.5, 0), Err(Error::TimeNotOnGrid(_))));
        assert_eq!(st.sup_values(), vec![(0.5, 4), (1.0, 2)]);
    }

    #[test]
    fn single_sample_is_an_error() {
        let mut st = SummaryStats::new(vec![0.0, 0.5, 1.0], 1);
        st.add_values(&[vec![0.0], vec![1.0], vec![0.0]]).unwrap();
        assert!(matches!(empirical_covariance(&st, 0.5, 0.5, 0), Err(Error::TooFewSamples { .. })));
        assert!(st.add_values(&[vec![0.0], vec![2000.0], vec![0.0]]).is_err());
    }

    /// Direct delete-one jackknife over the raw sample.
    fn jackknife(xs: &[f64], ys: &[f64]) -> f64 {
        let cov = |x: &[f64], y: &[f64]| {
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
        };
        let n = xs.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let x: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                let y: Vec<f64> = ys.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                cov(&x, &y)
            })
            .collect();
        let m = loo.iter().sum::<f64>() / n as f64;
        ((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt()
    }

    proptest! {
        #[test]
        fn closed_form_jackknife_matches_direct(
            xs in prop::collection::vec((-40i64..40, -40i64..40), 3..40)
        ) {
            let grid = vec![0.0, 1.0];
            let mut st = SummaryStats::new(grid, 1);
            let (x, y): (Vec<f64>, Vec<f64>) = xs.iter().map(|(a, b)| (*a as f64 / 8.0, *b as f64 / 8.0)).unzip();
            for (a, b) in x.iter().zip(&y) {
                st.add_values(&[vec![*a], vec![*b]]).unwrap();
            }
            let e = empirical_covariance(&st, 0.0, 1.0, 0).unwrap();
            let want = jackknife(&x, &y);
            prop_assert!((e.standard_error - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", e.standard_error, want);
        }

        #[test]
        fn merge_is_associative_and_commutative(
            samples in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 0..30),
            cut1 in 0usize..30,
            cut2 in 0usize..30,
        ) {
            let grid = vec![0.0, 0.5, 1.0];
            let build = |chunk: &[Vec<f64>]| {
                let mut st = SummaryStats::new(grid.clone(), 1);
                for s in chunk {
                    let v: Vec<Vec<f64>> = s.iter().map(|x| vec![*x]).collect();
                    st.add_values(&v).unwrap();
                    st.add_increment_norm(s[0].abs()).unwrap();
                }
                st
            };
            let (i, j) = (cut1.min(cut2).min(samples.len()), cut1.max(cut2).min(samples.len()));
            let (a, b, c) = (build(&samples[..i]), build(&samples[i..j]), build(&samples[j..]));
            let left = merge_stats(&merge_stats(&a, &b).unwrap(), &c).unwrap();
            let right = merge_stats(&a, &merge_stats(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert_eq!(merge_stats(&a, &b).unwrap(), merge_stats(&b, &a).unwrap());
            prop_assert_eq!(&left, &build(&samples));
            let empty = SummaryStats::new(grid.clone(), 1);
            prop_assert_eq!(merge_stats(&a, &empty).unwrap(), a.clone());
        }
    }

    #[test]
    fn grid_mismatch() {
        let a = SummaryStats::new(vec![0.0, 1.0], 1);
        let b = SummaryStats::new(vec![0.0, 0.5, 1.0], 1);
        assert!(matches!(merge_stats(&a, &b), Err(Error::GridMismatch)));
    }
}
