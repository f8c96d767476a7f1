use std::collections::HashMap;
use std::sync::Arc;

use crate::prob::{Prob, Rational};
use crate::{Error, Result};

/// Vertices and nearest-neighbour edges of a truncated slab.
#[derive(Debug)]
pub(crate) struct Region {
    pub vertices: Vec<Vec<i64>>,
    pub index: HashMap<Vec<i64>, usize>,
    /// `(lower, upper, axis)`: `upper = lower + e_axis`.
    pub edges: Vec<(usize, usize, usize)>,
    /// Per vertex: `(neighbour, edge)`.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    pub levels: Vec<i64>,
}

/// The truncated slab `S^r_{x,y}`: lattice points `z` with
/// `r.x <= r.z <= r.y` whose transverse distance from the segment `[x, y]`
/// is at most `W` in every coordinate other than the axis of `e`.
#[derive(Debug, Clone)]
pub struct SlabSpec {
    dim: usize,
    p: Rational,
    direction: Vec<i64>,
    x: Vec<i64>,
    y: Vec<i64>,
    width: u32,
    e_axis: usize,
    e_sign: i64,
    region: Arc<Region>,
}

impl PartialEq for SlabSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.direction == other.direction
            && self.x == other.x
            && self.y == other.y
            && self.width == other.width
    }
}

impl SlabSpec {
    /// Rejects `p >= 1/2` in two dimensions.
    pub fn new(p: Rational, direction: Vec<i64>, x: Vec<i64>, y: Vec<i64>, width: u32) -> Result<Self> {
        if direction.len() == 2 && p >= Rational::from_ratio(1, 2) {
            return Err(Error::InvalidSlab(format!("p = {p} is not subcritical in d = 2")));
        }
        Self::build(p, direction, x, y, width)
    }

    /// Same as [`SlabSpec::new`] without the subcriticality check; prints a
    /// warning when it would have failed.
    pub fn new_unrestricted(p: Rational, direction: Vec<i64>, x: Vec<i64>, y: Vec<i64>, width: u32) -> Result<Self> {
        if direction.len() == 2 && p >= Rational::from_ratio(1, 2) {
            eprintln!("warning: p = {p} is at or above p_c = 1/2 in d = 2");
        }
        Self::build(p, direction, x, y, width)
    }

    /// Slab from the origin to `n e_1` with `r = e_1`.
    pub fn axis(dim: usize, p: Rational, n: i64, width: u32) -> Result<Self> {
        let mut dir = vec![0; dim];
        dir[0] = 1;
        let mut y = vec![0; dim];
        y[0] = n;
        Self::new(p, dir, vec![0; dim], y, width)
    }

    fn build(p: Rational, direction: Vec<i64>, x: Vec<i64>, y: Vec<i64>, width: u32) -> Result<Self> {
        let dim = direction.len();
        if dim < 2 {
            return Err(Error::InvalidSlab(format!("dimension {dim} < 2")));
        }
        if x.len() != dim || y.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: if x.len() != dim { x.len() } else { y.len() } });
        }
        if p < Rational::zero() || p > Rational::one() {
            return Err(Error::InvalidSlab(format!("p = {p} outside [0, 1]")));
        }
        if direction.iter().all(|&v| v == 0) {
            return Err(Error::InvalidSlab("direction r must be nonzero".into()));
        }
        let dot = |z: &[i64]| direction.iter().zip(z).map(|(a, b)| a * b).sum::<i64>();
        if dot(&y) < dot(&x) {
            return Err(Error::InvalidSlab("r.y < r.x: the slab is empty".into()));
        }
        let mut e_axis = 0;
        for (j, v) in direction.iter().enumerate() {
            if v.abs() > direction[e_axis].abs() {
                e_axis = j;
            }
        }
        let e_sign = direction[e_axis].signum();
        let region = Arc::new(build_region(&direction, &x, &y, width, e_axis));
        Ok(SlabSpec { dim, p, direction, x, y, width, e_axis, e_sign, region })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn p_f64(&self) -> f64 {
        self.p.to_f64()
    }

    pub fn direction(&self) -> &[i64] {
        &self.direction
    }

    pub fn x(&self) -> &[i64] {
        &self.x
    }

    pub fn y(&self) -> &[i64] {
        &self.y
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// The basis vector `e` maximizing `e.r`.
    pub fn e(&self) -> Vec<i64> {
        let mut e = vec![0; self.dim];
        e[self.e_axis] = self.e_sign;
        e
    }

    pub fn e_axis(&self) -> usize {
        self.e_axis
    }

    /// `r.z`.
    pub fn level(&self, z: &[i64]) -> i64 {
        self.direction.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    /// `r.e`.
    pub fn step_level(&self) -> i64 {
        self.direction[self.e_axis].abs()
    }

    pub fn contains(&self, z: &[i64]) -> bool {
        self.region.index.contains_key(z)
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.region.vertices
    }

    pub fn edge_count(&self) -> usize {
        self.region.edges.len()
    }

    /// Edges as endpoint pairs, in the fixed order used by configurations.
    pub fn edges(&self) -> Vec<(Vec<i64>, Vec<i64>)> {
        let v = &self.region.vertices;
        self.region.edges.iter().map(|&(a, b, _)| (v[a].clone(), v[b].clone())).collect()
    }

    /// Same slab with another transverse width.
    pub fn with_width(&self, width: u32) -> Result<Self> {
        Self::build(self.p.clone(), self.direction.clone(), self.x.clone(), self.y.clone(), width)
    }

    /// `(n, a)` with `y - x = n a` and `a` the slab direction, if the
    /// endpoint is a positive multiple of it.
    pub fn pinning_multiple(&self) -> Option<(usize, Vec<i64>)> {
        let a = &self.direction;
        let diff: Vec<i64> = self.y.iter().zip(&self.x).map(|(b, c)| b - c).collect();
        let k = self.e_axis;
        if diff[k] % a[k] != 0 {
            return None;
        }
        let n = diff[k] / a[k];
        (n > 0 && diff.iter().zip(a).all(|(d, a)| *d == n * a)).then(|| (n as usize, a.clone()))
    }

    pub(crate) fn region(&self) -> &Region {
        &self.region
    }

    pub(crate) fn vertex_index(&self, z: &[i64]) -> Result<usize> {
        self.region.index.get(z).copied().ok_or_else(|| Error::VertexOutsideSlab(z.to_vec()))
    }

    /// `z + s e` if it is in the slab.
    pub(crate) fn shifted(&self, z: usize, s: i64) -> Option<usize> {
        let mut w = self.region.vertices[z].clone();
        w[self.e_axis] += s * self.e_sign;
        self.region.index.get(&w).copied()
    }

    /// Edges at `z` perpendicular to `e`.
    pub(crate) fn perpendicular_edges(&self, z: usize) -> impl Iterator<Item = usize> + '_ {
        let axis = self.e_axis;
        let edges = &self.region.edges;
        self.region.adjacency[z].iter().map(|&(_, e)| e).filter(move |&e| edges[e].2 != axis)
    }

    /// `h(z, z)`: the probability that every edge at `z` perpendicular to `e`
    /// is closed, the junction weight between consecutive pieces.
    pub fn junction_weight(&self, z: &[i64]) -> Result<Rational> {
        let i = self.vertex_index(z)?;
        let m = self.perpendicular_edges(i).count();
        Ok(num::pow(Rational::one() - self.p.clone(), m))
    }
}

fn build_region(r: &[i64], x: &[i64], y: &[i64], width: u32, k: usize) -> Region {
    let d = r.len();
    let dot = |z: &[i64]| r.iter().zip(z).map(|(a, b)| a * b).sum::<i64>();
    let (lo_level, hi_level) = (dot(x), dot(y));
    let w = width as i64;
    let rk = r[k].abs();
    let spread: i64 = r.iter().map(|v| v.abs()).sum::<i64>();
    let pad = (w + 1) * (1 + spread / rk);
    let lo: Vec<i64> = (0..d).map(|j| x[j].min(y[j]) - pad).collect();
    let hi: Vec<i64> = (0..d).map(|j| x[j].max(y[j]) + pad).collect();
    let dk = y[k] - x[k];
    let inside = |z: &[i64]| {
        let l = dot(z);
        if l < lo_level || l > hi_level {
            return false;
        }
        (0..d).filter(|&j| j != k).all(|j| {
            if dk == 0 {
                (z[j] - x[j]).abs() <= w
            } else {
                ((z[j] - x[j]) * dk - (y[j] - x[j]) * (z[k] - x[k])).abs() <= w * dk.abs()
            }
        })
    };
    let mut vertices = Vec::new();
    let mut z = lo.clone();
    'odometer: loop {
        if inside(&z) {
            vertices.push(z.clone());
        }
        for j in (0..d).rev() {
            if z[j] < hi[j] {
                z[j] += 1;
                continue 'odometer;
            }
            z[j] = lo[j];
        }
        break;
    }
    let index: HashMap<Vec<i64>, usize> = vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); vertices.len()];
    for (a, v) in vertices.iter().enumerate() {
        for axis in 0..d {
            let mut u = v.clone();
            u[axis] += 1;
            if let Some(&b) = index.get(&u) {
                adjacency[a].push((b, edges.len()));
                adjacency[b].push((a, edges.len()));
                edges.push((a, b, axis));
            }
        }
    }
    let levels = vertices.iter().map(|v| dot(v)).collect();
    Region { vertices, index, edges, adjacency, levels }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn axis_slab_counts() {
        let s = SlabSpec::axis(2, r(1, 4), 3, 1).unwrap();
        assert_eq!(s.vertices().len(), 12);
        assert_eq!(s.edge_count(), 17);
        assert_eq!(s.e(), vec![1, 0]);
        let row = SlabSpec::axis(2, r(1, 4), 3, 0).unwrap();
        assert_eq!(row.edge_count(), 3);
        assert_eq!(row.junction_weight(&[1, 0]).unwrap(), Rational::one());
        assert_eq!(s.junction_weight(&[1, 0]).unwrap(), r(9, 16));
        assert_eq!(s.junction_weight(&[1, 1]).unwrap(), r(3, 4));
    }

    #[test]
    fn e_tie_break_and_sign() {
        let s = SlabSpec::new(r(1, 4), vec![-1, 1], vec![0, 0], vec![-2, 2], 1).unwrap();
        assert_eq!(s.e(), vec![-1, 0]);
        let s = SlabSpec::new(r(1, 4), vec![1, 2], vec![0, 0], vec![2, 4], 1).unwrap();
        assert_eq!(s.e(), vec![0, 1]);
        assert!(s.vertices().iter().all(|v| (0..=10).contains(&s.level(v))));
        assert!(s.contains(&[1, 2]) && s.contains(&[2, 4]));
    }

    #[test]
    fn invalid_slabs() {
        assert!(matches!(SlabSpec::axis(2, r(1, 2), 3, 1), Err(Error::InvalidSlab(_))));
        assert!(SlabSpec::new_unrestricted(r(1, 1), vec![1, 0], vec![0, 0], vec![3, 0], 1).is_ok());
        assert!(matches!(
            SlabSpec::new(r(1, 4), vec![1, 0], vec![0, 0], vec![-1, 0], 1),
            Err(Error::InvalidSlab(_))
        ));
        assert!(SlabSpec::axis(3, r(3, 5), 2, 1).is_ok());
    }
}
