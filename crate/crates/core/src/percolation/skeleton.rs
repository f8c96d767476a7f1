use crate::bridge::{skeleton_scale, ScaledPath};
use crate::lattice_walk::BasisFrame;
use crate::percolation::{ClusterView, RegenerationSkeleton};
use crate::Result;

/// `gamma`: transverse coordinates of the interpolated skeleton, scaled by
/// `1/(n|a|)` along `a` (the time axis) and `1/sqrt(n)` across.
pub fn skeleton_gamma(skeleton: &RegenerationSkeleton, n: usize, a: &[i64]) -> Result<ScaledPath> {
    let frame = BasisFrame::new(a)?;
    let origin = skeleton.origin();
    let points: Vec<(f64, Vec<f64>)> = skeleton
        .points()
        .iter()
        .map(|p| {
            let rel: Vec<i64> = p.iter().zip(origin).map(|(a, b)| a - b).collect();
            frame.split(&rel)
        })
        .collect();
    skeleton_scale(&points, n, a)
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let s = if len2 == 0.0 { 0.0 } else { (ap.iter().zip(&ab).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0) };
    ap.iter().zip(&ab).map(|(u, v)| (u - s * v).powi(2)).sum::<f64>().sqrt()
}

/// Largest distance from a scaled cluster vertex to the graph
/// `{(t, gamma(t))}` of the scaled skeleton.
pub fn cluster_deviation(cluster: &ClusterView, skeleton: &RegenerationSkeleton, n: usize, a: &[i64]) -> Result<f64> {
    let gamma = skeleton_gamma(skeleton, n, a)?;
    let frame = BasisFrame::new(a)?;
    let length = n as f64 * frame.direction_norm();
    let root = (n as f64).sqrt();
    let graph: Vec<Vec<f64>> = gamma
        .knots()
        .iter()
        .map(|(t, y)| std::iter::once(*t).chain(y.iter().cloned()).collect())
        .collect();
    let origin = skeleton.origin();
    let mut worst = 0.0f64;
    for v in &cluster.vertices {
        let rel: Vec<i64> = v.iter().zip(origin).map(|(a, b)| a - b).collect();
        let (t, y) = frame.split(&rel);
        let point: Vec<f64> = std::iter::once(t / length).chain(y.iter().map(|c| c / root)).collect();
        let d = graph.windows(2).map(|w| segment_distance(&point, &w[0], &w[1])).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    Ok(worst)
}

/// `max_i |x_i - x_{i-1}|` with `x_0` the origin.
pub fn max_regeneration_gap(skeleton: &RegenerationSkeleton) -> f64 {
    skeleton
        .increments()
        .iter()
        .map(|x| (x.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skel(points: &[[i64; 2]]) -> RegenerationSkeleton {
        RegenerationSkeleton::new(vec![0, 0], points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn cluster(vertices: &[[i64; 2]], end: [i64; 2]) -> ClusterView {
        let mut vertices: Vec<Vec<i64>> = vertices.iter().map(|v| v.to_vec()).collect();
        vertices.sort();
        ClusterView { vertices, edges: Vec::new(), endpoints: (vec![0, 0], end.to_vec()) }
    }

    #[test]
    fn gamma_examples() {
        let g = skeleton_gamma(&skel(&[[4, 0]]), 4, &[1, 0]).unwrap();
        assert_eq!(g.knots(), &[(0.0, vec![0.0]), (1.0, vec![0.0])]);
        let g = skeleton_gamma(&skel(&[[1, 1], [3, -1], [4, 0]]), 4, &[1, 0]).unwrap();
        assert_eq!(
            g.knots(),
            &[(0.0, vec![0.0]), (0.25, vec![0.5]), (0.75, vec![-0.5]), (1.0, vec![0.0])]
        );
        assert!(skeleton_gamma(&skel(&[[4, 1]]), 4, &[1, 0]).is_err());
    }

    #[test]
    fn deviations() {
        let s = skel(&[[1, 0], [2, 0], [3, 0], [4, 0]]);
        let straight = cluster(&[[0, 0], [1, 0], [2, 0], [3, 0], [4, 0]], [4, 0]);
        assert_eq!(cluster_deviation(&straight, &s, 4, &[1, 0]).unwrap(), 0.0);
        let dangling = cluster(&[[0, 0], [1, 0], [2, 0], [2, 1], [3, 0], [4, 0]], [4, 0]);
        let s = skel(&[[1, 0], [4, 0]]);
        assert!((cluster_deviation(&dangling, &s, 4, &[1, 0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaps() {
        assert_eq!(max_regeneration_gap(&skel(&[[1, 0], [2, 0], [3, 0]])), 1.0);
        assert_eq!(max_regeneration_gap(&skel(&[[3, 0], [4, 0]])), 3.0);
    }
}
