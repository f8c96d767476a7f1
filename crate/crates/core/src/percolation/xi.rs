use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::seeding::{stream_id, stream_rng};
use crate::{Error, Result};

const SHARD: u64 = 1 << 15;
const COORD_BITS: u32 = 15;
const OFFSET: i64 = 1 << (COORD_BITS - 1);
/// Cluster explorations larger than this abort the estimate.
pub const MAX_EXPLORED: usize = 4_000_000;

/// Connection frequency of `0 <-> n a` at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiPoint {
    pub n: u64,
    pub hits: u64,
    pub samples: u64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiEstimate {
    pub xi: f64,
    pub standard_error: f64,
    /// `|a|_1 ln(1/p)`, the single-path upper bound.
    pub path_bound: f64,
    pub points: Vec<XiPoint>,
}

fn pack(z: &[i64]) -> Option<u64> {
    let mut key = 0u64;
    for &c in z {
        let v = c + OFFSET;
        if !(0..1 << COORD_BITS).contains(&v) {
            return None;
        }
        key = key << COORD_BITS | v as u64;
    }
    Some(key)
}

/// One draw of `{0 <-> target}` in the full lattice: the cluster of the
/// origin is explored with edges drawn on first contact, stopping once the
/// target is reached.
fn connected<R: Rng + ?Sized>(p: f64, target: &[i64], rng: &mut R) -> Result<bool> {
    let d = target.len();
    let mut edges: HashMap<(u64, usize), bool> = HashMap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let origin = vec![0i64; d];
    let key = |z: &[i64]| pack(z).ok_or_else(|| Error::CapExceeded("cluster left the coordinate range".into()));
    let goal = key(target)?;
    seen.insert(key(&origin)?);
    if goal == key(&origin)? {
        return Ok(true);
    }
    let mut queue = VecDeque::from([origin]);
    while let Some(v) = queue.pop_front() {
        for axis in 0..d {
            for step in [1i64, -1] {
                let mut w = v.clone();
                w[axis] += step;
                let lower = if step == 1 { key(&v)? } else { key(&w)? };
                let open = *edges.entry((lower, axis)).or_insert_with(|| rng.random::<f64>() < p);
                if !open {
                    continue;
                }
                let kw = key(&w)?;
                if seen.insert(kw) {
                    if kw == goal {
                        return Ok(true);
                    }
                    if seen.len() > MAX_EXPLORED {
                        return Err(Error::CapExceeded(format!("cluster exploration beyond {MAX_EXPLORED} vertices")));
                    }
                    queue.push_back(w);
                }
            }
        }
    }
    Ok(false)
}

/// Monte Carlo `P[0 <-> n a]` on the whole lattice for each `n`, then the
/// slope of `-ln P` against `n` by weighted least squares (weights
/// `hits/(1 - P)`, the inverse delta-method variance of `ln P`).
pub fn estimate_xi(d: usize, p: f64, direction: &[i64], n_range: &[u64], samples: u64, seed: u64) -> Result<XiEstimate> {
    if direction.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: direction.len() });
    }
    if d > 4 {
        return Err(Error::InvalidSlab(format!("estimate_xi supports d <= 4, got {d}")));
    }
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::InvalidSlab(format!("p = {p} outside (0, 1)")));
    }
    if n_range.len() < 2 {
        return Err(Error::DegenerateFit("need at least two values of n".into()));
    }
    let mut points = Vec::new();
    for &n in n_range {
        let target: Vec<i64> = direction.iter().map(|a| a * n as i64).collect();
        let shards = samples.div_ceil(SHARD);
        let hits = (0..shards)
            .into_par_iter()
            .map(|s| {
                let mut rng = stream_rng(seed, stream_id(3, n << 24 | s));
                let count = SHARD.min(samples - s * SHARD);
                let mut hits = 0u64;
                for _ in 0..count {
                    if connected(p, &target, &mut rng)? {
                        hits += 1;
                    }
                }
                Ok(hits)
            })
            .collect::<Result<Vec<u64>>>()?
            .into_iter()
            .sum::<u64>();
        if hits == 0 {
            return Err(Error::InsufficientAcceptances(n as i64));
        }
        points.push(XiPoint { n, hits, samples, p_hat: hits as f64 / samples as f64 });
    }
    let w: Vec<f64> = points.iter().map(|pt| pt.hits as f64 / (1.0 - pt.p_hat).max(1e-12)).collect();
    let x: Vec<f64> = points.iter().map(|pt| pt.n as f64).collect();
    let y: Vec<f64> = points.iter().map(|pt| -pt.p_hat.ln()).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = w.iter().zip(&x).zip(&y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    let l1: i64 = direction.iter().map(|a| a.abs()).sum();
    Ok(XiEstimate {
        xi: sxy / sxx,
        standard_error: (1.0 / sxx).sqrt(),
        path_bound: l1 as f64 * (1.0 / p).ln(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn neighbour_connection_frequency() {
        // P[0 <-> e_1] >= p, with the excess from detours of length >= 3
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trials = 20_000;
        let hits = (0..trials).filter(|_| connected(0.1, &[1, 0], &mut rng).unwrap()).count();
        let f = hits as f64 / trials as f64;
        assert!(f > 0.09 && f < 0.12, "{f}");
    }

    #[test]
    fn small_p_close_to_path_bound() {
        let est = estimate_xi(2, 0.05, &[1, 0], &[1, 2, 3], 400_000, 11).unwrap();
        assert!(est.xi <= est.path_bound + 2.0 * est.standard_error);
        assert!((est.xi - est.path_bound).abs() < 0.1 * est.path_bound, "{est:?}");
        let again = estimate_xi(2, 0.05, &[1, 0], &[1, 2, 3], 400_000, 11).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn errors() {
        assert!(matches!(estimate_xi(2, 0.01, &[1, 0], &[1, 6], 1000, 1), Err(Error::InsufficientAcceptances(6))));
        assert!(estimate_xi(2, 0.2, &[1, 0, 0], &[1, 2], 10, 1).is_err());
    }
}
