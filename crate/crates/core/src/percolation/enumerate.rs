use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::percolation::SlabSpec;
use crate::prob::{format_rational, Prob, Rational};
use crate::{Error, Result};

/// Largest edge count enumerated exhaustively.
pub const ENUMERATION_EDGE_BUDGET: usize = 24;

const CHUNK: u64 = 1 << 14;

struct Engine {
    n: usize,
    edges: Vec<(usize, usize)>,
    levels: Vec<i64>,
    perp: Vec<u32>,
    plus_e: Vec<Option<usize>>,
    minus_e: Vec<Option<usize>>,
    /// `range[u][v]`: vertices with level in `[level u, level v]`.
    range: Vec<Vec<u64>>,
    near_lo: Vec<u64>,
    near_hi: Vec<u64>,
    window: Vec<u64>,
    re: i64,
    origin: usize,
    target: usize,
}

fn bit(i: usize) -> u64 {
    1u64 << i
}

impl Engine {
    fn new(slab: &SlabSpec) -> Result<Self> {
        let region = slab.region();
        let n = region.vertices.len();
        if region.edges.len() > ENUMERATION_EDGE_BUDGET || n > 64 {
            return Err(Error::EnumerationBudgetExceeded { edges: region.edges.len(), budget: ENUMERATION_EDGE_BUDGET });
        }
        let levels = region.levels.clone();
        let re = slab.step_level();
        let mask = |lo: i64, hi: i64| (0..n).filter(|&v| (lo..=hi).contains(&levels[v])).fold(0u64, |m, v| m | bit(v));
        let mut perp = vec![0u32; n];
        for v in 0..n {
            for e in slab.perpendicular_edges(v) {
                perp[v] |= 1 << e;
            }
        }
        Ok(Engine {
            n,
            edges: region.edges.iter().map(|&(a, b, _)| (a, b)).collect(),
            perp,
            plus_e: (0..n).map(|v| slab.shifted(v, 1)).collect(),
            minus_e: (0..n).map(|v| slab.shifted(v, -1)).collect(),
            range: (0..n).map(|u| (0..n).map(|v| mask(levels[u], levels[v])).collect()).collect(),
            near_lo: (0..n).map(|u| mask(levels[u], levels[u] + re)).collect(),
            near_hi: (0..n).map(|v| mask(levels[v] - re, levels[v])).collect(),
            window: (0..n).map(|z| mask(levels[z] - re, levels[z] + re)).collect(),
            levels,
            re,
            origin: slab.vertex_index(slab.x())?,
            target: slab.vertex_index(slab.y())?,
        })
    }

    fn cluster(&self, adj: &[u64], start: usize, allowed: u64) -> u64 {
        let mut c = bit(start);
        let mut frontier = c;
        while frontier != 0 {
            let mut next = 0;
            let mut f = frontier;
            while f != 0 {
                let w = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[w];
            }
            next &= allowed & !c;
            c |= next;
            frontier = next;
        }
        c
    }

    /// `h`-connection rows for one configuration: bit `v` of `rows[u]`.
    fn h_rows(&self, open: u32, adj: &[u64]) -> Vec<u64> {
        let mut rows = vec![0u64; self.n];
        for u in 0..self.n {
            for v in 0..self.n {
                if self.levels[v] < self.levels[u] {
                    continue;
                }
                let ok = if u == v {
                    open & self.perp[u] == 0
                } else {
                    match (self.plus_e[u], self.minus_e[v]) {
                        (Some(ue), Some(ve)) => {
                            let c = self.cluster(adj, u, self.range[u][v]);
                            c & bit(v) != 0
                                && c & self.near_lo[u] == bit(u) | bit(ue)
                                && c & self.near_hi[v] == bit(v) | bit(ve)
                        }
                        _ => false,
                    }
                };
                if ok {
                    rows[u] |= bit(v);
                }
            }
        }
        rows
    }

    fn regeneration_mask(&self, adj: &[u64]) -> u64 {
        let (o, y) = (self.origin, self.target);
        if o == y {
            return bit(y);
        }
        let c = self.cluster(adj, o, self.range[o][y]);
        let (lo, hi) = (self.levels[o] + self.re, self.levels[y] - self.re);
        let mut out = bit(y);
        let mut rest = c & !bit(y);
        while rest != 0 {
            let z = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if self.levels[z] < lo || self.levels[z] > hi {
                continue;
            }
            if let (Some(a), Some(b)) = (self.minus_e[z], self.plus_e[z]) {
                if (c & self.window[z]).count_ones() == 3 && c & bit(a) != 0 && c & bit(b) != 0 {
                    out |= bit(z);
                }
            }
        }
        out
    }
}

#[derive(Clone)]
struct Counts {
    h: Vec<Vec<u64>>,
    f: Vec<Vec<u64>>,
    patterns: BTreeMap<u64, Vec<u64>>,
}

impl Counts {
    fn new(n: usize, edges: usize) -> Self {
        Counts { h: vec![vec![0; edges + 1]; n * n], f: vec![vec![0; edges + 1]; n * n], patterns: BTreeMap::new() }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.h.iter_mut().zip(&other.h).chain(self.f.iter_mut().zip(&other.f)) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (k, v) in other.patterns {
            let e = self.patterns.entry(k).or_insert_with(|| vec![0; v.len()]);
            for (x, y) in e.iter_mut().zip(&v) {
                *x += y;
            }
        }
        self
    }
}

/// Exact connection probabilities of a small truncated slab, by summing
/// `p^open (1 - p)^closed` over every configuration.
#[derive(Debug, Clone)]
pub struct SlabEnumeration {
    slab: SlabSpec,
    h: Vec<Rational>,
    f: Vec<Rational>,
    patterns: Vec<(Vec<Vec<i64>>, Rational)>,
}

pub fn enumerate_slab(slab: &SlabSpec) -> Result<SlabEnumeration> {
    let engine = Engine::new(slab)?;
    let (n, m) = (engine.n, engine.edges.len());
    let total: u64 = 1 << m;
    let chunks = total.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Counts::new(n, m);
            let mut adj = vec![0u64; n];
            for open in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let open = open as u32;
                adj.iter_mut().for_each(|a| *a = 0);
                for (e, &(a, b)) in engine.edges.iter().enumerate() {
                    if open >> e & 1 == 1 {
                        adj[a] |= bit(b);
                        adj[b] |= bit(a);
                    }
                }
                let k = open.count_ones() as usize;
                let rows = engine.h_rows(open, &adj);
                let mut cols = vec![0u64; n];
                for u in 0..n {
                    let mut r = rows[u];
                    while r != 0 {
                        let v = r.trailing_zeros() as usize;
                        r &= r - 1;
                        cols[v] |= bit(u);
                        acc.h[u * n + v][k] += 1;
                    }
                }
                for u in 0..n {
                    let mut r = rows[u] & !bit(u);
                    while r != 0 {
                        let v = r.trailing_zeros() as usize;
                        r &= r - 1;
                        if rows[u] & cols[v] & !(bit(u) | bit(v)) == 0 {
                            acc.f[u * n + v][k] += 1;
                        }
                    }
                }
                if rows[engine.origin] & bit(engine.target) != 0 {
                    let pat = engine.regeneration_mask(&adj);
                    acc.patterns.entry(pat).or_insert_with(|| vec![0; m + 1])[k] += 1;
                }
            }
            acc
        })
        .reduce(|| Counts::new(n, m), Counts::merge);

    let p = slab.p().clone();
    let q = Rational::one() - p.clone();
    let weights: Vec<Rational> = (0..=m).map(|k| num::pow(p.clone(), k) * num::pow(q.clone(), m - k)).collect();
    let prob = |c: &[u64]| {
        c.iter()
            .zip(&weights)
            .filter(|(c, _)| **c > 0)
            .fold(Rational::zero(), |s, (c, w)| s + w.clone() * Rational::from_i64(*c as i64))
    };
    let vertices = &slab.region().vertices;
    let levels = &slab.region().levels;
    let mut patterns: Vec<(Vec<Vec<i64>>, Rational)> = counts
        .patterns
        .iter()
        .map(|(mask, c)| {
            let mut pts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            pts.sort_by_key(|&v| levels[v]);
            (pts.into_iter().map(|v| vertices[v].clone()).collect(), prob(c))
        })
        .collect();
    patterns.sort();
    Ok(SlabEnumeration {
        slab: slab.clone(),
        h: counts.h.iter().map(|c| prob(c)).collect(),
        f: counts.f.iter().map(|c| prob(c)).collect(),
        patterns,
    })
}

/// `h(0, x)` and `f(0, x)` at one slab vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityRow {
    pub x: Vec<i64>,
    pub h: Rational,
    pub f: Rational,
}

impl SlabEnumeration {
    pub fn slab(&self) -> &SlabSpec {
        &self.slab
    }

    fn pair(&self, u: &[i64], v: &[i64]) -> Result<usize> {
        let n = self.slab.vertices().len();
        Ok(self.slab.vertex_index(u)? * n + self.slab.vertex_index(v)?)
    }

    /// `P[u <-h-> v]` within the truncated slab.
    pub fn h(&self, u: &[i64], v: &[i64]) -> Result<Rational> {
        Ok(self.h[self.pair(u, v)?].clone())
    }

    /// `P[u <-f-> v]` within the truncated slab.
    pub fn f(&self, u: &[i64], v: &[i64]) -> Result<Rational> {
        Ok(self.f[self.pair(u, v)?].clone())
    }

    /// Every regeneration pattern of `C_{x,y}` under `x <-h-> y` with its
    /// probability, the endpoint included as last point.
    pub fn patterns(&self) -> &[(Vec<Vec<i64>>, Rational)] {
        &self.patterns
    }

    pub fn pattern_probability(&self, pattern: &[Vec<i64>]) -> Rational {
        self.patterns.iter().find(|(p, _)| p == pattern).map(|(_, w)| w.clone()).unwrap_or_else(Rational::zero)
    }

    /// Rows for every slab vertex, ordered by level then coordinates.
    pub fn connectivity(&self) -> Vec<ConnectivityRow> {
        let o = self.slab.x();
        let mut xs: Vec<&Vec<i64>> = self.slab.vertices().iter().collect();
        xs.sort_by_key(|v| (self.slab.level(v), (*v).clone()));
        xs.into_iter()
            .map(|x| ConnectivityRow { x: x.clone(), h: self.h(o, x).unwrap(), f: self.f(o, x).unwrap() })
            .collect()
    }

    /// Both sides of the factorization over the pieces of `pattern`.
    pub fn factorization(&self, pattern: &[Vec<i64>]) -> Result<FactorizationCheck> {
        let slab = &self.slab;
        let o = slab.x().to_vec();
        if pattern.last().map(|p| p.as_slice()) != Some(slab.y()) {
            return Err(Error::Degenerate("pattern must end at the slab endpoint".into()));
        }
        let mut prev = o.clone();
        let mut rhs = Rational::one();
        let mut translated = Some(Rational::one());
        for (i, p) in pattern.iter().enumerate() {
            if slab.level(p) <= slab.level(&prev) && !(i == 0 && p == &o) {
                return Err(Error::Degenerate("pattern levels must increase".into()));
            }
            rhs = rhs * self.f(&prev, p)?;
            if i + 1 < pattern.len() {
                rhs = rhs / slab.junction_weight(p)?;
            }
            let shifted: Vec<i64> = o.iter().zip(p).zip(&prev).map(|((a, b), c)| a + b - c).collect();
            translated = match (translated, slab.contains(&shifted)) {
                (Some(t), true) => Some(t * self.f(&o, &shifted)?),
                _ => None,
            };
            prev = p.clone();
        }
        let c0 = self.h(&o, &o)?;
        let translated = translated.map(|t| t / crate::prob::rational_pow(&c0, pattern.len() as i64 - 1));
        Ok(FactorizationCheck { pattern: pattern.to_vec(), lhs: self.pattern_probability(pattern), rhs, translated })
    }

    /// [`SlabEnumeration::factorization`] for every observed pattern.
    pub fn factorizations(&self) -> Vec<FactorizationCheck> {
        self.patterns.iter().map(|(p, _)| self.factorization(p).expect("observed pattern")).collect()
    }

    /// `h(0, x)` against `sum_z f(0, z) h(z, x) / h(z, z)` at every vertex, and
    /// against the translation-invariant form
    /// `sum_z f(0, z) h(0, x - z) / h(0, 0)`.
    pub fn renewal_relation(&self) -> Result<RenewalRelationReport> {
        let slab = &self.slab;
        let o = slab.x().to_vec();
        let c0 = self.h(&o, &o)?;
        let mut rows = Vec::new();
        for x in slab.vertices() {
            let lhs = self.h(&o, x)?;
            let (rhs, translated) = if *x == o {
                (c0.clone(), c0.clone())
            } else {
                let mut rhs = Rational::zero();
                let mut tr = Rational::zero();
                for z in slab.vertices() {
                    let f = self.f(&o, z)?;
                    if f.is_zero() {
                        continue;
                    }
                    rhs = rhs + f.clone() * self.h(z, x)? / slab.junction_weight(z)?;
                    let back: Vec<i64> = o.iter().zip(x).zip(z).map(|((a, b), c)| a + b - c).collect();
                    if slab.contains(&back) {
                        tr = tr + f * self.h(&o, &back)? / c0.clone();
                    }
                }
                (rhs, tr)
            };
            rows.push(RenewalRow { x: x.clone(), lhs, rhs, translated });
        }
        let exact = rows.iter().all(|r| r.lhs == r.rhs);
        let max_truncation_discrepancy =
            rows.iter().map(|r| (r.lhs.clone() - r.translated.clone()).to_f64().abs()).fold(0.0, f64::max);
        Ok(RenewalRelationReport { rows, exact, max_truncation_discrepancy })
    }
}

/// `lhs`: probability of `x <-h-> y` with exactly the given regeneration
/// points. `rhs`: product of the `f`-connections between consecutive points
/// divided by the junction weights `h(z, z)`. `translated`: the same product
/// written with `f(0, x_i)` and `h(0, 0)`, when every piece fits at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationCheck {
    pub pattern: Vec<Vec<i64>>,
    pub lhs: Rational,
    pub rhs: Rational,
    pub translated: Option<Rational>,
}

impl FactorizationCheck {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs && self.translated.as_ref().is_none_or(|t| *t == self.lhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalRow {
    pub x: Vec<i64>,
    pub lhs: Rational,
    pub rhs: Rational,
    pub translated: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalRelationReport {
    pub rows: Vec<RenewalRow>,
    /// Every row satisfies `lhs == rhs`.
    pub exact: bool,
    /// Largest `|lhs - translated|`, the error of assuming translation
    /// invariance inside the truncation.
    pub max_truncation_discrepancy: f64,
}

pub fn enumerate_connectivity(slab: &SlabSpec) -> Result<Vec<ConnectivityRow>> {
    Ok(enumerate_slab(slab)?.connectivity())
}

pub fn verify_renewal_factorization(slab: &SlabSpec, pattern: &[Vec<i64>]) -> Result<FactorizationCheck> {
    enumerate_slab(slab)?.factorization(pattern)
}

pub fn verify_renewal_relation(slab: &SlabSpec) -> Result<RenewalRelationReport> {
    enumerate_slab(slab)?.renewal_relation()
}

/// CSV `x1,...,xd,h,f` with exact `num/den` values.
pub fn write_connectivity_csv<W: Write>(rows: &[ConnectivityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = rows.first().map(|r| r.x.len()).unwrap_or(0);
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.extend(["h".to_string(), "f".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        rec.push(format_rational(&r.h));
        rec.push(format_rational(&r.f));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percolation::{is_f_connected, is_h_connected, BondConfiguration};

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn origin_values() {
        let p = r(9, 20);
        let s = SlabSpec::axis(2, p.clone(), 3, 1).unwrap();
        let e = enumerate_slab(&s).unwrap();
        let q = Rational::one() - p;
        assert_eq!(e.h(&[0, 0], &[0, 0]).unwrap(), q.clone() * q);
        assert!(e.f(&[0, 0], &[0, 0]).unwrap().is_zero());
    }

    #[test]
    fn single_edge_values() {
        let s = SlabSpec::axis(2, r(1, 4), 1, 0).unwrap();
        let e = enumerate_slab(&s).unwrap();
        assert_eq!(e.h(&[0, 0], &[1, 0]).unwrap(), r(1, 4));
        assert_eq!(e.f(&[0, 0], &[1, 0]).unwrap(), r(1, 4));
        // W = 1, one column step: the bond open, the four transverse edges at
        // its ends closed
        let s = SlabSpec::new_unrestricted(r(1, 2), vec![1, 0], vec![0, 0], vec![1, 0], 1).unwrap();
        let e = enumerate_slab(&s).unwrap();
        assert_eq!(e.h(&[0, 0], &[1, 0]).unwrap(), r(1, 32));
        assert_eq!(e.f(&[0, 0], &[1, 0]).unwrap(), r(1, 32));
    }

    #[test]
    fn row_factorization() {
        let p = r(1, 4);
        let s = SlabSpec::axis(2, p.clone(), 2, 0).unwrap();
        let c = verify_renewal_factorization(&s, &[vec![1, 0], vec![2, 0]]).unwrap();
        assert_eq!(c.lhs, p.clone() * p.clone());
        assert!(c.holds());
        let single = verify_renewal_factorization(&s, &[vec![2, 0]]).unwrap();
        assert!(single.lhs.is_zero() && single.holds());
    }

    #[test]
    fn engine_matches_predicates() {
        let s = SlabSpec::axis(2, r(1, 3), 2, 1).unwrap();
        let e = enumerate_slab(&s).unwrap();
        let m = s.edge_count();
        let p = s.p().clone();
        let q = Rational::one() - p.clone();
        let o = vec![0, 0];
        for x in s.vertices() {
            let (mut h, mut f) = (Rational::zero(), Rational::zero());
            for bits in 0u32..(1 << m) {
                let open: Vec<bool> = (0..m).map(|i| bits >> i & 1 == 1).collect();
                let k = bits.count_ones() as usize;
                let w = num::pow(p.clone(), k) * num::pow(q.clone(), m - k);
                let c = BondConfiguration::new(s.clone(), open).unwrap();
                if is_h_connected(&c, &o, x).unwrap() {
                    h = h + w.clone();
                }
                if is_f_connected(&c, &o, x).unwrap() {
                    f = f + w;
                }
            }
            assert_eq!(e.h(&o, x).unwrap(), h, "{x:?}");
            assert_eq!(e.f(&o, x).unwrap(), f, "{x:?}");
        }
    }

    #[test]
    fn factorization_and_relation_small_slabs() {
        for p in [r(1, 4), r(9, 20)] {
            for w in 0..=1 {
                for n in 1..=3 {
                    let s = SlabSpec::axis(2, p.clone(), n, w).unwrap();
                    let e = enumerate_slab(&s).unwrap();
                    let checks = e.factorizations();
                    assert!(!checks.is_empty());
                    for c in &checks {
                        assert!(c.holds(), "p={p} w={w} n={n} {c:?}");
                    }
                    let total = checks.iter().fold(Rational::zero(), |a, c| a + c.lhs.clone());
                    assert_eq!(total, e.h(s.x(), s.y()).unwrap());
                    let rel = e.renewal_relation().unwrap();
                    assert!(rel.exact, "p={p} w={w} n={n}");
                }
            }
        }
    }

    #[test]
    fn csv_and_budget() {
        let s = SlabSpec::axis(2, r(1, 4), 1, 0).unwrap();
        let mut buf = Vec::new();
        write_connectivity_csv(&enumerate_connectivity(&s).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,x2,h,f\n0,0,1,0\n1,0,1/4,1/4\n");
        let big = SlabSpec::axis(2, r(1, 4), 5, 1).unwrap();
        assert!(matches!(enumerate_slab(&big), Err(Error::EnumerationBudgetExceeded { edges: 27, .. })));
    }
}
