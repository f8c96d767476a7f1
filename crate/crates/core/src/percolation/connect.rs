use std::io::Write;

use crate::percolation::config::reach;
use crate::percolation::{BondConfiguration, ClusterView, SlabSpec};
use crate::{Error, Result};

/// Checks the entry and exit conditions on a cluster of `u` and `v`
/// (`u != v`): near each end the cluster is exactly the single bond
/// `{u, u + e}`, resp. `{v - e, v}`. Both conditions are always imposed,
/// also when the two end slabs overlap.
fn clean_ends(slab: &SlabSpec, members: &[usize], u: usize, v: usize) -> bool {
    let (Some(ue), Some(ve)) = (slab.shifted(u, 1), slab.shifted(v, -1)) else {
        return false;
    };
    let levels = &slab.region().levels;
    let re = slab.step_level();
    let (lu, lv) = (levels[u], levels[v]);
    let (mut has_ue, mut has_ve) = (false, false);
    for &c in members {
        if levels[c] <= lu + re && c != u && c != ue {
            return false;
        }
        if levels[c] >= lv - re && c != v && c != ve {
            return false;
        }
        has_ue |= c == ue;
        has_ve |= c == ve;
    }
    has_ue && has_ve
}

pub(crate) fn h_connected_idx(slab: &SlabSpec, open: &[bool], u: usize, v: usize) -> bool {
    let levels = &slab.region().levels;
    let (lu, lv) = (levels[u], levels[v]);
    if lv < lu {
        return false;
    }
    if u == v {
        return slab.perpendicular_edges(u).all(|e| !open[e]);
    }
    let members = reach(slab, open, u, lu, lv);
    members.contains(&v) && clean_ends(slab, &members, u, v)
}

pub(crate) fn f_connected_idx(slab: &SlabSpec, open: &[bool], u: usize, v: usize) -> bool {
    if u == v || !h_connected_idx(slab, open, u, v) {
        return false;
    }
    let levels = &slab.region().levels;
    let members = reach(slab, open, u, levels[u], levels[v]);
    !members
        .iter()
        .any(|&z| z != u && z != v && h_connected_idx(slab, open, u, z) && h_connected_idx(slab, open, z, v))
}

/// `x <-h-> y` in the configuration.
pub fn is_h_connected(config: &BondConfiguration, x: &[i64], y: &[i64]) -> Result<bool> {
    let slab = config.slab();
    Ok(h_connected_idx(slab, config.states(), slab.vertex_index(x)?, slab.vertex_index(y)?))
}

/// `x <-f-> y`: `h`-connected, `x != y`, and no third point splits the
/// connection into two `h`-connections.
pub fn is_f_connected(config: &BondConfiguration, x: &[i64], y: &[i64]) -> Result<bool> {
    let slab = config.slab();
    Ok(f_connected_idx(slab, config.states(), slab.vertex_index(x)?, slab.vertex_index(y)?))
}

/// Regeneration points `x_1, x_1 + x_2, ...` ending at the endpoint, measured
/// from `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationSkeleton {
    origin: Vec<i64>,
    points: Vec<Vec<i64>>,
}

impl RegenerationSkeleton {
    pub fn new(origin: Vec<i64>, points: Vec<Vec<i64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("skeleton needs at least the endpoint".into()));
        }
        if points.iter().any(|p| p.len() != origin.len()) {
            return Err(Error::DimensionMismatch { expected: origin.len(), got: points[0].len() });
        }
        Ok(RegenerationSkeleton { origin, points })
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn endpoint(&self) -> &[i64] {
        &self.points[self.points.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The pieces `x_i = p_i - p_{i-1}` with `p_0` the origin.
    pub fn increments(&self) -> Vec<Vec<i64>> {
        let mut prev = self.origin.as_slice();
        let mut out = Vec::with_capacity(self.points.len());
        for p in &self.points {
            out.push(p.iter().zip(prev).map(|(a, b)| a - b).collect());
            prev = p;
        }
        out
    }

    /// CSV `i,x1,...,xd`; row 0 is the origin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["i".to_string()];
        header.extend((1..=self.origin.len()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for (i, p) in std::iter::once(&self.origin).chain(&self.points).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Regeneration points of an `h`-connected cluster `C_{x,y}`: the cluster
/// points `z` with `r.x + r.e <= r.z <= r.y - r.e` whose unit slab
/// `S_{z-e, z+e}` meets the cluster in exactly `{z - e, z, z + e}`, in
/// increasing `r` order, followed by `y` itself.
pub fn find_regeneration_points(cluster: &ClusterView, slab: &SlabSpec) -> Result<RegenerationSkeleton> {
    regeneration_points(cluster, slab, true)
}

/// [`find_regeneration_points`] without the check that the cluster has clean
/// `h`-type ends.
pub fn find_regeneration_points_unchecked(cluster: &ClusterView, slab: &SlabSpec) -> Result<RegenerationSkeleton> {
    regeneration_points(cluster, slab, false)
}

fn regeneration_points(cluster: &ClusterView, slab: &SlabSpec, checked: bool) -> Result<RegenerationSkeleton> {
    let (x, y) = (&cluster.endpoints.0, &cluster.endpoints.1);
    if !cluster.contains(x) || !cluster.contains(y) {
        return Err(Error::NotHConnected);
    }
    let e = slab.e();
    let plus = |z: &[i64], s: i64| z.iter().zip(&e).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    let re = slab.step_level();
    let (lx, ly) = (slab.level(x), slab.level(y));
    let mut by_level: Vec<(i64, &Vec<i64>)> = cluster.vertices.iter().map(|v| (slab.level(v), v)).collect();
    by_level.sort();
    let count_in = |lo: i64, hi: i64| {
        let a = by_level.partition_point(|(l, _)| *l < lo);
        let b = by_level.partition_point(|(l, _)| *l <= hi);
        &by_level[a..b]
    };
    if checked && x != y {
        let near_x = count_in(lx, lx + re);
        let near_y = count_in(ly - re, ly);
        let xe = plus(x, 1);
        let ye = plus(y, -1);
        let ok_x = near_x.len() == 2 && near_x.iter().all(|(_, v)| *v == x || **v == xe);
        let ok_y = near_y.len() == 2 && near_y.iter().all(|(_, v)| *v == y || **v == ye);
        if !ok_x || !ok_y || !cluster.contains(&xe) || !cluster.contains(&ye) {
            return Err(Error::NotHConnected);
        }
    }
    let mut points = Vec::new();
    for &(l, z) in &by_level {
        if l < lx + re || l > ly - re || z == y {
            continue;
        }
        let window = count_in(l - re, l + re);
        if window.len() == 3 && cluster.contains(&plus(z, -1)) && cluster.contains(&plus(z, 1)) {
            points.push(z.clone());
        }
    }
    points.push(y.clone());
    RegenerationSkeleton::new(x.clone(), points)
}

/// Whether consecutive skeleton points are `f`-connected in the configuration.
pub fn skeleton_pieces_f_connected(config: &BondConfiguration, skeleton: &RegenerationSkeleton) -> Result<bool> {
    let mut prev = skeleton.origin().to_vec();
    for p in skeleton.points() {
        if !is_f_connected(config, &prev, p)? {
            return Ok(false);
        }
        prev = p.clone();
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::common_cluster;
    use crate::prob::{Prob, Rational};

    fn slab(n: i64, w: u32) -> SlabSpec {
        SlabSpec::axis(2, Rational::from_ratio(1, 4), n, w).unwrap()
    }

    fn line(n: i64) -> Vec<(Vec<i64>, Vec<i64>)> {
        (0..n).map(|i| (vec![i, 0], vec![i + 1, 0])).collect()
    }

    #[test]
    fn origin_to_itself() {
        let s = slab(2, 1);
        let closed = BondConfiguration::from_open_edges(s.clone(), &[]).unwrap();
        assert!(is_h_connected(&closed, &[0, 0], &[0, 0]).unwrap());
        assert!(!is_f_connected(&closed, &[0, 0], &[0, 0]).unwrap());
        let up = BondConfiguration::from_open_edges(s, &[(vec![0, 0], vec![0, 1])]).unwrap();
        assert!(!is_h_connected(&up, &[0, 0], &[0, 0]).unwrap());
    }

    #[test]
    fn single_edge_row() {
        let s = slab(1, 0);
        let c = BondConfiguration::from_open_edges(s, &line(1)).unwrap();
        assert!(is_h_connected(&c, &[0, 0], &[1, 0]).unwrap());
        assert!(is_f_connected(&c, &[0, 0], &[1, 0]).unwrap());
    }

    #[test]
    fn straight_path_splits() {
        let s = slab(2, 1);
        let c = BondConfiguration::from_open_edges(s, &line(2)).unwrap();
        assert!(is_h_connected(&c, &[0, 0], &[2, 0]).unwrap());
        assert!(!is_f_connected(&c, &[0, 0], &[2, 0]).unwrap());
        assert!(is_f_connected(&c, &[0, 0], &[1, 0]).unwrap());
    }

    #[test]
    fn third_vertex_near_entry() {
        let s = slab(3, 1);
        let mut edges = line(3);
        edges.push((vec![1, 0], vec![1, 1]));
        let c = BondConfiguration::from_open_edges(s, &edges).unwrap();
        assert!(!is_h_connected(&c, &[0, 0], &[3, 0]).unwrap());
        let cl = common_cluster(&c, &[0, 0], &[3, 0]).unwrap().unwrap();
        assert!(matches!(find_regeneration_points(&cl, c.slab()), Err(Error::NotHConnected)));
    }

    #[test]
    fn straight_line_skeleton() {
        let s = slab(3, 1);
        let c = BondConfiguration::from_open_edges(s.clone(), &line(3)).unwrap();
        let cl = common_cluster(&c, &[0, 0], &[3, 0]).unwrap().unwrap();
        let sk = find_regeneration_points(&cl, &s).unwrap();
        assert_eq!(sk.points(), &[vec![1, 0], vec![2, 0], vec![3, 0]]);
        assert_eq!(sk.increments(), vec![vec![1, 0]; 3]);
        assert!(skeleton_pieces_f_connected(&c, &sk).unwrap());
        let mut buf = Vec::new();
        sk.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,x1,x2\n0,0,0\n1,1,0\n2,2,0\n3,3,0\n");
    }

    #[test]
    fn blob_excludes_point() {
        let s = slab(4, 1);
        let mut edges = line(4);
        edges.push((vec![2, 0], vec![2, 1]));
        let c = BondConfiguration::from_open_edges(s.clone(), &edges).unwrap();
        let cl = common_cluster(&c, &[0, 0], &[4, 0]).unwrap().unwrap();
        let sk = find_regeneration_points(&cl, &s).unwrap();
        assert_eq!(sk.points(), &[vec![4, 0]]);
        assert!(skeleton_pieces_f_connected(&c, &sk).unwrap());
    }

    #[test]
    fn full_slab_only_endpoint() {
        let s = SlabSpec::new_unrestricted(Rational::one(), vec![1, 0], vec![0, 0], vec![0, 0], 1).unwrap();
        let c = BondConfiguration::new(s.clone(), vec![true; s.edge_count()]).unwrap();
        let cl = common_cluster(&c, &[0, 0], &[0, 0]).unwrap().unwrap();
        assert_eq!(find_regeneration_points(&cl, &s).unwrap().points(), &[vec![0, 0]]);
        let s = SlabSpec::new_unrestricted(Rational::one(), vec![1, 0], vec![0, 0], vec![4, 0], 1).unwrap();
        let c = BondConfiguration::new(s.clone(), vec![true; s.edge_count()]).unwrap();
        let cl = common_cluster(&c, &[0, 0], &[4, 0]).unwrap().unwrap();
        assert!(matches!(find_regeneration_points(&cl, &s), Err(Error::NotHConnected)));
        assert_eq!(find_regeneration_points_unchecked(&cl, &s).unwrap().points(), &[vec![4, 0]]);
        let row = SlabSpec::new_unrestricted(Rational::one(), vec![1, 0], vec![0, 0], vec![4, 0], 0).unwrap();
        let c = BondConfiguration::new(row.clone(), vec![true; row.edge_count()]).unwrap();
        let cl = common_cluster(&c, &[0, 0], &[4, 0]).unwrap().unwrap();
        assert_eq!(find_regeneration_points(&cl, &row).unwrap().len(), 4);
    }
}
