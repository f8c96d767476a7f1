use std::io::Write;

use crate::bridge::BridgePath;
use crate::lattice_walk::norm_i;
use crate::{Error, Result};

const PIN_TOLERANCE: f64 = 1e-9;

/// Piecewise-linear path on `[0, 1]` through its knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPath {
    knots: Vec<(f64, Vec<f64>)>,
}

impl ScaledPath {
    /// Knot times must increase strictly from 0 to 1.
    pub fn new(knots: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if knots.len() < 2 || knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::NonMonotoneTime);
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::NonMonotoneTime);
        }
        let dim = knots[0].1.len();
        if let Some(k) = knots.iter().find(|k| k.1.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: k.1.len() });
        }
        Ok(ScaledPath { knots })
    }

    pub fn knots(&self) -> &[(f64, Vec<f64>)] {
        &self.knots
    }

    pub fn value_dim(&self) -> usize {
        self.knots[0].1.len()
    }

    /// Value at `t`, clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, 1.0);
        let k = self.knots.partition_point(|(s, _)| *s <= t);
        if k == 0 {
            return self.knots[0].1.clone();
        }
        if k == self.knots.len() {
            return self.knots[k - 1].1.clone();
        }
        let (t0, v0) = &self.knots[k - 1];
        let (t1, v1) = &self.knots[k];
        let w = (t - t0) / (t1 - t0);
        v0.iter().zip(v1).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// `sup_t |X(t)|`, attained at a knot.
    pub fn sup_norm(&self) -> f64 {
        self.knots
            .iter()
            .map(|(_, v)| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// CSV `index,t,y1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "t".to_string()];
        header.extend((1..=self.value_dim()).map(|j| format!("y{j}")));
        w.write_record(&header)?;
        for (i, (t, v)) in self.knots.iter().enumerate() {
            let mut row = vec![i.to_string(), t.to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `X_n(t) = S_{nt} / sqrt(n)` interpolated linearly between `i/n`.
pub fn interpolate_scale(path: &BridgePath, n: usize) -> Result<ScaledPath> {
    if path.steps() != n {
        return Err(Error::LengthMismatch { expected: n, got: path.steps() });
    }
    if n == 0 {
        return Err(Error::InvalidLength("cannot rescale a zero-length path".into()));
    }
    let root = (n as f64).sqrt();
    let knots = path
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| (i as f64 / n as f64, x.iter().map(|&v| v as f64 / root).collect()))
        .collect();
    ScaledPath::new(knots)
}

/// Interpolation of `0` and the frame points `[t_i, Y_i]`, rescaled to
/// `[t_i / (n |a|), Y_i / sqrt(n)]`.
///
/// The last point must sit at `t = n |a|`, `Y = 0`; its knot is written as
/// exactly `(1, 0)`.
pub fn skeleton_scale(points: &[(f64, Vec<f64>)], n: usize, a: &[i64]) -> Result<ScaledPath> {
    let last = points.last().ok_or(Error::UnpinnedEndpoint)?;
    let dim = last.1.len();
    let length = n as f64 * norm_i(a);
    let mut prev = 0.0;
    for (t, _) in points {
        if *t <= prev {
            return Err(Error::NonMonotoneTime);
        }
        prev = *t;
    }
    if (last.0 - length).abs() > PIN_TOLERANCE * length.max(1.0) || last.1.iter().any(|y| y.abs() > PIN_TOLERANCE) {
        return Err(Error::UnpinnedEndpoint);
    }
    let root = (n as f64).sqrt();
    let mut knots = vec![(0.0, vec![0.0; dim])];
    for (t, y) in &points[..points.len() - 1] {
        knots.push((t / length, y.iter().map(|v| v / root).collect()));
    }
    knots.push((1.0, vec![0.0; dim]));
    ScaledPath::new(knots)
}
