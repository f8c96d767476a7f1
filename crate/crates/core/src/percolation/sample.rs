use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use crate::percolation::config::build_view;
use crate::percolation::{find_regeneration_points, BondConfiguration, ClusterView, RegenerationSkeleton, SlabSpec};
use crate::{Error, Result};

/// Default number of configurations tried before giving up.
pub const DEFAULT_ATTEMPT_BUDGET: u64 = 100_000_000;

/// One configuration drawn from the law conditioned on `x <-h-> y`.
#[derive(Debug, Clone)]
pub struct ConditionedSample {
    pub config: BondConfiguration,
    pub cluster: ClusterView,
    pub skeleton: RegenerationSkeleton,
    /// Configurations drawn, the accepted one included.
    pub attempts: u64,
    /// Probability of the edge states fixed in advance, see [`ClusterSampler`].
    pub forced_probability: f64,
}

impl ConditionedSample {
    /// Single-sample estimate of `P[x <-h-> y]`.
    pub fn acceptance_rate(&self) -> f64 {
        self.forced_probability / self.attempts as f64
    }
}

const UNKNOWN: u8 = 0;
const OPEN: u8 = 1;
const CLOSED: u8 = 2;

/// Reusable rejection sampler for `x <-h-> y` on one slab.
///
/// Each attempt explores the open cluster of `x` edge by edge, drawing an
/// edge only when the exploration first reaches it, and stops as soon as the
/// cluster touches a forbidden vertex next to either end. Since edges are
/// independent this is the same as drawing the full configuration and
/// testing it; on acceptance the untouched edges are drawn afterwards.
///
/// The connection forces a product event on the edges around both ends: the
/// bonds `x -> x + e` and `y - e -> y` are open and every other edge from
/// these four vertices into the end slabs is closed. Those edges are set
/// rather than drawn, which leaves the conditional law unchanged and divides
/// the rejection rate by the probability of the forced states.
pub struct ClusterSampler {
    slab: SlabSpec,
    p: f64,
    x: usize,
    y: usize,
    xe: Option<usize>,
    ye: Option<usize>,
    state: Vec<u8>,
    seen: Vec<bool>,
    members: Vec<usize>,
    forced: Vec<(usize, u8)>,
    forced_probability: f64,
}

impl ClusterSampler {
    pub fn new(slab: &SlabSpec) -> Result<Self> {
        let x = slab.vertex_index(slab.x())?;
        let y = slab.vertex_index(slab.y())?;
        let mut sampler = ClusterSampler {
            p: slab.p_f64(),
            x,
            y,
            xe: slab.shifted(x, 1),
            ye: slab.shifted(y, -1),
            state: vec![UNKNOWN; slab.edge_count()],
            seen: vec![false; slab.vertices().len()],
            members: Vec::new(),
            forced: Vec::new(),
            forced_probability: 1.0,
            slab: slab.clone(),
        };
        sampler.forced = sampler.forced_edges();
        sampler.forced_probability = sampler
            .forced
            .iter()
            .map(|&(_, s)| match s {
                OPEN => sampler.p,
                CLOSED => 1.0 - sampler.p,
                _ => 0.0,
            })
            .product();
        Ok(sampler)
    }

    /// Edge states implied by `x <-h-> y`; an edge required both open and
    /// closed is reported with state `UNKNOWN` and probability zero.
    fn forced_edges(&self) -> Vec<(usize, u8)> {
        let region = self.slab.region();
        let mut forced: BTreeMap<usize, u8> = BTreeMap::new();
        let mut set = |e: usize, s: u8| {
            let cur = forced.entry(e).or_insert(s);
            if *cur != s {
                *cur = UNKNOWN;
            }
        };
        if self.x == self.y {
            for e in self.slab.perpendicular_edges(self.x) {
                set(e, CLOSED);
            }
            return forced.into_iter().collect();
        }
        let (Some(xe), Some(ye)) = (self.xe, self.ye) else {
            return Vec::new();
        };
        for (a, b) in [(self.x, xe), (ye, self.y)] {
            let e = region.adjacency[a].iter().find(|(w, _)| *w == b).map(|(_, e)| *e).expect("adjacent");
            set(e, OPEN);
        }
        for v in [self.x, xe, ye, self.y] {
            for &(w, e) in &region.adjacency[v] {
                if self.forbidden(w) {
                    set(e, CLOSED);
                }
            }
        }
        forced.into_iter().collect()
    }

    /// Probability of the pre-set edge states.
    pub fn forced_probability(&self) -> f64 {
        self.forced_probability
    }

    fn forbidden(&self, v: usize) -> bool {
        let levels = &self.slab.region().levels;
        let re = self.slab.step_level();
        let (lx, ly) = (levels[self.x], levels[self.y]);
        (levels[v] <= lx + re && v != self.x && Some(v) != self.xe)
            || (levels[v] >= ly - re && v != self.y && Some(v) != self.ye)
    }

    fn attempt<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        for &m in &self.members {
            self.seen[m] = false;
        }
        self.state.iter_mut().for_each(|s| *s = UNKNOWN);
        self.members.clear();
        for &(e, s) in &self.forced {
            self.state[e] = s;
        }
        let region = self.slab.region();
        if self.x == self.y {
            self.members.push(self.x);
            self.seen[self.x] = true;
            return true;
        }
        self.seen[self.x] = true;
        self.members.push(self.x);
        let mut queue = VecDeque::from([self.x]);
        while let Some(v) = queue.pop_front() {
            for &(w, e) in &region.adjacency[v] {
                if self.state[e] == UNKNOWN {
                    self.state[e] = if rng.random::<f64>() < self.p { OPEN } else { CLOSED };
                }
                if self.state[e] == OPEN && !self.seen[w] {
                    self.seen[w] = true;
                    self.members.push(w);
                    if self.forbidden(w) {
                        return false;
                    }
                    queue.push_back(w);
                }
            }
        }
        self.seen[self.y] && self.xe.is_some_and(|v| self.seen[v]) && self.ye.is_some_and(|v| self.seen[v])
    }

    /// Draws until acceptance or until `max_attempts` configurations failed.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, max_attempts: u64) -> Result<ConditionedSample> {
        if self.forced_probability == 0.0 {
            return Err(Error::AttemptBudgetExhausted(max_attempts));
        }
        for attempts in 1..=max_attempts {
            if self.attempt(rng) {
                let open: Vec<bool> = self
                    .state
                    .iter()
                    .map(|&s| match s {
                        UNKNOWN => rng.random::<f64>() < self.p,
                        s => s == OPEN,
                    })
                    .collect();
                let (x, y) = (self.slab.x().to_vec(), self.slab.y().to_vec());
                let cluster = build_view(&self.slab, &open, &self.members, &x, &y);
                let skeleton = find_regeneration_points(&cluster, &self.slab)?;
                let config = BondConfiguration::new(self.slab.clone(), open)?;
                return Ok(ConditionedSample {
                    config,
                    cluster,
                    skeleton,
                    attempts,
                    forced_probability: self.forced_probability,
                });
            }
        }
        Err(Error::AttemptBudgetExhausted(max_attempts))
    }
}

/// One conditioned configuration by rejection; see [`ClusterSampler`].
pub fn sample_conditioned_cluster<R: Rng + ?Sized>(
    slab: &SlabSpec,
    rng: &mut R,
    max_attempts: u64,
) -> Result<ConditionedSample> {
    ClusterSampler::new(slab)?.sample(rng, max_attempts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::{common_cluster, enumerate_slab, is_h_connected, skeleton_pieces_f_connected};
    use crate::prob::{Prob, Rational};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accepted_samples_are_h_connected() {
        let s = SlabSpec::axis(2, Rational::from_ratio(9, 20), 4, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sampler = ClusterSampler::new(&s).unwrap();
        for _ in 0..50 {
            let c = sampler.sample(&mut rng, DEFAULT_ATTEMPT_BUDGET).unwrap();
            assert!(is_h_connected(&c.config, &[0, 0], &[4, 0]).unwrap());
            assert_eq!(c.skeleton.endpoint(), &[4, 0]);
            assert_eq!(Some(c.cluster.clone()), common_cluster(&c.config, &[0, 0], &[4, 0]).unwrap());
            assert!(skeleton_pieces_f_connected(&c.config, &c.skeleton).unwrap());
        }
    }

    #[test]
    fn closed_world_exhausts_budget() {
        let s = SlabSpec::axis(2, Rational::zero(), 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(sample_conditioned_cluster(&s, &mut rng, 1000), Err(Error::AttemptBudgetExhausted(1000))));
    }

    #[test]
    fn acceptance_matches_exact_probability() {
        let s = SlabSpec::axis(2, Rational::from_ratio(9, 20), 2, 1).unwrap();
        let exact = enumerate_slab(&s).unwrap().h(&[0, 0], &[2, 0]).unwrap().to_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sampler = ClusterSampler::new(&s).unwrap();
        let (mut attempts, accepted) = (0u64, 4000u64);
        for _ in 0..accepted {
            attempts += sampler.sample(&mut rng, DEFAULT_ATTEMPT_BUDGET).unwrap().attempts;
        }
        // attempts per acceptance is geometric with mean P[N]/h
        let rate = exact / sampler.forced_probability();
        let mean = attempts as f64 / accepted as f64;
        let sd = ((1.0 - rate) / (rate * rate) / accepted as f64).sqrt();
        assert!((mean - 1.0 / rate).abs() < 4.0 * sd, "{mean} vs {}", 1.0 / rate);
    }
}
