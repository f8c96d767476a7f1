use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::percolation::SlabSpec;
use crate::{Error, Result};

/// Open/closed states for every edge of a truncated slab.
#[derive(Debug, Clone, PartialEq)]
pub struct BondConfiguration {
    slab: SlabSpec,
    open: Vec<bool>,
}

impl BondConfiguration {
    pub fn new(slab: SlabSpec, open: Vec<bool>) -> Result<Self> {
        if open.len() != slab.edge_count() {
            return Err(Error::LengthMismatch { expected: slab.edge_count(), got: open.len() });
        }
        Ok(BondConfiguration { slab, open })
    }

    /// Opens exactly the listed edges; each must join two slab vertices.
    pub fn from_open_edges(slab: SlabSpec, edges: &[(Vec<i64>, Vec<i64>)]) -> Result<Self> {
        let mut open = vec![false; slab.edge_count()];
        for (a, b) in edges {
            open[edge_id(&slab, a, b)?] = true;
        }
        Ok(BondConfiguration { slab, open })
    }

    pub fn slab(&self) -> &SlabSpec {
        &self.slab
    }

    pub fn states(&self) -> &[bool] {
        &self.open
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn is_open(&self, a: &[i64], b: &[i64]) -> Result<bool> {
        Ok(self.open[edge_id(&self.slab, a, b)?])
    }

    pub fn open_edges(&self) -> Vec<(Vec<i64>, Vec<i64>)> {
        self.slab.edges().into_iter().zip(&self.open).filter(|(_, &o)| o).map(|(e, _)| e).collect()
    }

    /// One line per slab edge: both endpoints' coordinates, then `open` or
    /// `closed`, separated by spaces.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for ((a, b), o) in self.slab.edges().iter().zip(&self.open) {
            let coords: Vec<String> = a.iter().chain(b).map(|v| v.to_string()).collect();
            writeln!(out, "{} {}", coords.join(" "), if *o { "open" } else { "closed" })?;
        }
        Ok(())
    }

    /// Inverse of [`BondConfiguration::write_edge_list`]; edges not listed
    /// are closed.
    pub fn read_edge_list<R: BufRead>(slab: SlabSpec, input: R) -> Result<Self> {
        let d = slab.dim();
        let mut open = vec![false; slab.edge_count()];
        for (no, line) in input.lines().enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 2 * d + 1 {
                return Err(Error::Parse(format!("line {}: expected {} fields", no + 1, 2 * d + 1)));
            }
            let coords: Vec<i64> = fields[..2 * d]
                .iter()
                .map(|f| f.parse().map_err(|_| Error::Parse(format!("line {}: bad coordinate {f:?}", no + 1))))
                .collect::<Result<_>>()?;
            let state = match fields[2 * d] {
                "open" => true,
                "closed" => false,
                other => return Err(Error::Parse(format!("line {}: bad state {other:?}", no + 1))),
            };
            open[edge_id(&slab, &coords[..d], &coords[d..])?] = state;
        }
        Ok(BondConfiguration { slab, open })
    }
}

fn edge_id(slab: &SlabSpec, a: &[i64], b: &[i64]) -> Result<usize> {
    let ia = slab.vertex_index(a)?;
    let ib = slab.vertex_index(b)?;
    slab.region()
        .adjacency[ia]
        .iter()
        .find(|(n, _)| *n == ib)
        .map(|(_, e)| *e)
        .ok_or_else(|| Error::Parse(format!("{a:?} and {b:?} are not nearest neighbours")))
}

/// Every slab edge open independently with probability `p`, drawn in edge order.
pub fn sample_configuration<R: Rng + ?Sized>(slab: &SlabSpec, rng: &mut R) -> BondConfiguration {
    let p = slab.p_f64();
    let open = (0..slab.edge_count()).map(|_| rng.random::<f64>() < p).collect();
    BondConfiguration { slab: slab.clone(), open }
}

/// Open cluster containing both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterView {
    /// Sorted.
    pub vertices: Vec<Vec<i64>>,
    pub edges: Vec<(Vec<i64>, Vec<i64>)>,
    pub endpoints: (Vec<i64>, Vec<i64>),
}

impl ClusterView {
    pub fn contains(&self, z: &[i64]) -> bool {
        self.vertices.binary_search_by(|v| v.as_slice().cmp(z)).is_ok()
    }
}

/// Vertex indices reachable from `from` through open edges whose endpoints
/// have levels in `[lo, hi]`.
pub(crate) fn reach(slab: &SlabSpec, open: &[bool], from: usize, lo: i64, hi: i64) -> Vec<usize> {
    let region = slab.region();
    let mut seen = vec![false; region.vertices.len()];
    let mut out = vec![from];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        for &(w, e) in &region.adjacency[v] {
            if open[e] && !seen[w] && (lo..=hi).contains(&region.levels[w]) {
                seen[w] = true;
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out
}

pub(crate) fn build_view(slab: &SlabSpec, open: &[bool], members: &[usize], x: &[i64], y: &[i64]) -> ClusterView {
    let region = slab.region();
    let mut inside = vec![false; region.vertices.len()];
    for &m in members {
        inside[m] = true;
    }
    let mut vertices: Vec<Vec<i64>> = members.iter().map(|&m| region.vertices[m].clone()).collect();
    vertices.sort();
    let edges = region
        .edges
        .iter()
        .enumerate()
        .filter(|(e, (a, b, _))| open[*e] && inside[*a] && inside[*b])
        .map(|(_, (a, b, _))| (region.vertices[*a].clone(), region.vertices[*b].clone()))
        .collect();
    ClusterView { vertices, edges, endpoints: (x.to_vec(), y.to_vec()) }
}

/// The open cluster of `x` and `y` within `S^r_{x,y}` (intersected with the
/// truncation), or `None` if they are not connected there.
pub fn common_cluster(config: &BondConfiguration, x: &[i64], y: &[i64]) -> Result<Option<ClusterView>> {
    let slab = &config.slab;
    let (ix, iy) = (slab.vertex_index(x)?, slab.vertex_index(y)?);
    let (lx, ly) = (slab.level(x), slab.level(y));
    if ly < lx {
        return Ok(None);
    }
    let members = reach(slab, &config.open, ix, lx, ly);
    if !members.contains(&iy) {
        return Ok(None);
    }
    Ok(Some(build_view(slab, &config.open, &members, x, y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Prob, Rational};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn slab(p: Rational, n: i64, w: u32) -> SlabSpec {
        SlabSpec::new_unrestricted(p, vec![1, 0], vec![0, 0], vec![n, 0], w).unwrap()
    }

    #[test]
    fn extreme_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = sample_configuration(&slab(Rational::zero(), 3, 1), &mut rng);
        assert_eq!(c.open_count(), 0);
        assert!(common_cluster(&c, &[0, 0], &[1, 0]).unwrap().is_none());
        let c = sample_configuration(&slab(Rational::one(), 3, 1), &mut rng);
        assert_eq!(c.open_count(), 17);
    }

    #[test]
    fn open_fraction() {
        let s = slab(Rational::from_ratio(3, 10), 50, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut open, mut total) = (0usize, 0usize);
        while total < 100_000 {
            let c = sample_configuration(&s, &mut rng);
            open += c.open_count();
            total += s.edge_count();
        }
        let frac = open as f64 / total as f64;
        let sd = (0.3f64 * 0.7 / total as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sd, "{frac}");
    }

    #[test]
    fn clusters() {
        let s = slab(Rational::from_ratio(1, 4), 3, 1);
        let c = BondConfiguration::from_open_edges(s.clone(), &[(vec![0, 0], vec![1, 0])]).unwrap();
        let v = common_cluster(&c, &[0, 0], &[1, 0]).unwrap().unwrap();
        assert_eq!(v.vertices, vec![vec![0, 0], vec![1, 0]]);
        // two routes from the origin to (2, 0), one through the upper row
        let edges = [
            (vec![0, 0], vec![1, 0]),
            (vec![1, 0], vec![2, 0]),
            (vec![0, 0], vec![0, 1]),
            (vec![0, 1], vec![1, 1]),
            (vec![1, 1], vec![2, 1]),
            (vec![2, 0], vec![2, 1]),
            (vec![3, -1], vec![3, 0]),
        ];
        let c = BondConfiguration::from_open_edges(s.clone(), &edges).unwrap();
        let v = common_cluster(&c, &[0, 0], &[2, 0]).unwrap().unwrap();
        assert_eq!(v.vertices, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1]]);
        assert_eq!(v.edges.len(), 6);
        assert!(common_cluster(&c, &[0, 0], &[3, 0]).unwrap().is_none());
        assert!(matches!(common_cluster(&c, &[0, 0], &[0, 2]), Err(Error::VertexOutsideSlab(_))));
    }

    #[test]
    fn edge_list_round_trip() {
        let s = slab(Rational::from_ratio(2, 5), 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_configuration(&s, &mut rng);
        let mut buf = Vec::new();
        c.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.lines().next().unwrap().ends_with("open") || text.lines().next().unwrap().ends_with("closed"));
        let back = BondConfiguration::read_edge_list(s.clone(), buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert!(BondConfiguration::read_edge_list(s.clone(), "0 0 2 0 open\n".as_bytes()).is_err());
        assert!(BondConfiguration::read_edge_list(s, "0 0 0 9 open\n".as_bytes()).is_err());
    }
}
