use serde::Serialize;

use crate::bridge::ScaledPath;
use crate::Result;

/// Empirical law of `sup_t |X(t)|` and of the maxima over equal time windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationSummary {
    pub count: usize,
    pub sup: Vec<f64>,
    /// `windowed[j]` holds the sorted maxima over `[j/w, (j+1)/w]`.
    pub windowed: Vec<Vec<f64>>,
}

impl FluctuationSummary {
    /// Atoms `(value, frequency)` of the sup law.
    pub fn sup_law(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &v in &self.sup {
            match out.last_mut() {
                Some((x, c)) if *x == v => *c += 1.0,
                _ => out.push((v, 1.0)),
            }
        }
        for a in &mut out {
            a.1 /= self.count as f64;
        }
        out
    }

    /// Lower empirical quantile of the sup.
    pub fn quantile(&self, q: f64) -> f64 {
        quantile(&self.sup, q)
    }
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Sup norms of the paths plus maxima over `windows` equal windows; both use
/// the knots, where piecewise linear paths attain their extremes.
pub fn max_fluctuation_stats(paths: &[ScaledPath], windows: usize) -> Result<FluctuationSummary> {
    let windows = windows.max(1);
    let mut sup = Vec::with_capacity(paths.len());
    let mut windowed = vec![Vec::with_capacity(paths.len()); windows];
    for path in paths {
        sup.push(path.sup_norm());
        for (j, w) in windowed.iter_mut().enumerate() {
            let (a, b) = (j as f64 / windows as f64, (j + 1) as f64 / windows as f64);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut m = norm(&path.eval(a)).max(norm(&path.eval(b)));
            for (t, v) in path.knots() {
                if *t > a && *t < b {
                    m = m.max(norm(v));
                }
            }
            w.push(m);
        }
    }
    sup.sort_by(f64::total_cmp);
    for w in &mut windowed {
        w.sort_by(f64::total_cmp);
    }
    Ok(FluctuationSummary { count: paths.len(), sup, windowed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::{interpolate_scale, BridgePath};
    use crate::lattice_walk::named_law;

    #[test]
    fn zero_paths_point_mass() {
        let p = ScaledPath::new(vec![(0.0, vec![0.0]), (1.0, vec![0.0])]).unwrap();
        let s = max_fluctuation_stats(&[p.clone(), p], 4).unwrap();
        assert_eq!(s.sup_law(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn four_step_bridges() {
        let law = named_law("pm1").unwrap();
        let walks = [[1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1], [-1, 1, 1, -1], [-1, 1, -1, 1], [-1, -1, 1, 1]];
        let paths: Vec<ScaledPath> = walks
            .iter()
            .map(|w| {
                let mut pts = vec![vec![0i64]];
                for x in w {
                    let last = pts[pts.len() - 1][0];
                    pts.push(vec![last + x]);
                }
                interpolate_scale(&BridgePath::new(pts, &law).unwrap(), 4).unwrap()
            })
            .collect();
        let s = max_fluctuation_stats(&paths, 2).unwrap();
        let law = s.sup_law();
        assert_eq!(law.len(), 2);
        assert_eq!(law[0].0, 0.5);
        assert!((law[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(law[1].0, 1.0);
        assert_eq!(s.quantile(0.5), 0.5);
        assert_eq!(s.quantile(1.0), 1.0);
    }
}
