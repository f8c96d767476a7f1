use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{quantile, SummaryStats};
use crate::percolation::{
    cluster_deviation, max_regeneration_gap, skeleton_gamma, ClusterSampler, ConditionedSample, SlabSpec,
};
use crate::seeding::{stream_id, stream_rng};
use crate::{Error, Result};

/// Accepted samples per shard; shard `s` uses stream `s` of the seed.
pub const ENSEMBLE_SHARD: usize = 64;

/// `samples` conditioned clusters, drawn in fixed-size shards so the result
/// depends only on the seed.
pub fn sample_ensemble(slab: &SlabSpec, samples: usize, seed: u64, max_attempts: u64) -> Result<Vec<ConditionedSample>> {
    sample_ensemble_shards(slab, 0, samples, seed, max_attempts)
}

/// Like [`sample_ensemble`] but starting at shard `first_shard`, so that
/// disjoint shard ranges can be drawn by separate runs and pooled.
pub fn sample_ensemble_shards(
    slab: &SlabSpec,
    first_shard: u64,
    samples: usize,
    seed: u64,
    max_attempts: u64,
) -> Result<Vec<ConditionedSample>> {
    let shards = samples.div_ceil(ENSEMBLE_SHARD);
    let parts = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, stream_id(4, first_shard + s as u64));
            let mut sampler = ClusterSampler::new(slab)?;
            let count = ENSEMBLE_SHARD.min(samples - s * ENSEMBLE_SHARD);
            (0..count).map(|_| sampler.sample(&mut rng, max_attempts)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Scalar summaries of a conditioned ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub samples: usize,
    pub attempts: u64,
    /// Accepted over drawn, in the sampler's own rejection loop.
    pub raw_acceptance: f64,
    /// Estimate of `P[x <-h-> y]`.
    pub acceptance_rate: f64,
    pub mean_regeneration_points: f64,
    pub mean_max_gap: f64,
    /// Fraction of samples with a gap above `n^{1/3}`.
    pub gap_exceedance: f64,
    pub median_deviation: f64,
    pub mean_transverse_extent: f64,
}

fn pinning(slab: &SlabSpec) -> Result<(usize, Vec<i64>)> {
    slab.pinning_multiple().ok_or_else(|| Error::InvalidSlab("endpoint is not a multiple of the direction".into()))
}

pub fn summarize_ensemble(slab: &SlabSpec, ensemble: &[ConditionedSample]) -> Result<EnsembleSummary> {
    if ensemble.is_empty() {
        return Err(Error::TooFewSamples { have: 0, need: 1 });
    }
    let (n, a) = pinning(slab)?;
    let m = ensemble.len() as f64;
    let attempts: u64 = ensemble.iter().map(|s| s.attempts).sum();
    let gaps: Vec<f64> = ensemble.iter().map(|s| max_regeneration_gap(&s.skeleton)).collect();
    let threshold = (n as f64).cbrt();
    let mut dev = ensemble
        .iter()
        .map(|s| cluster_deviation(&s.cluster, &s.skeleton, n, &a))
        .collect::<Result<Vec<f64>>>()?;
    dev.sort_by(f64::total_cmp);
    let k = slab.e_axis();
    let extent = |s: &ConditionedSample| {
        s.cluster
            .vertices
            .iter()
            .flat_map(|v| v.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, c)| c.abs()))
            .max()
            .unwrap_or(0) as f64
    };
    Ok(EnsembleSummary {
        samples: ensemble.len(),
        attempts,
        raw_acceptance: ensemble.len() as f64 / attempts as f64,
        acceptance_rate: ensemble[0].forced_probability * ensemble.len() as f64 / attempts as f64,
        mean_regeneration_points: ensemble.iter().map(|s| s.skeleton.len() as f64).sum::<f64>() / m,
        mean_max_gap: gaps.iter().sum::<f64>() / m,
        gap_exceedance: gaps.iter().filter(|&&g| g > threshold).count() as f64 / m,
        median_deviation: quantile(&dev, 0.5),
        mean_transverse_extent: ensemble.iter().map(extent).sum::<f64>() / m,
    })
}

/// Grid statistics of the scaled skeletons, plus the norms of every
/// skeleton increment in the increment histogram.
pub fn skeleton_stats(slab: &SlabSpec, ensemble: &[ConditionedSample], grid: Vec<f64>) -> Result<SummaryStats> {
    let (n, a) = pinning(slab)?;
    let mut stats = SummaryStats::new(grid, slab.dim() - 1);
    for s in ensemble {
        stats.add_path(&skeleton_gamma(&s.skeleton, n, &a)?)?;
        for x in s.skeleton.increments() {
            stats.add_increment_norm(x.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt())?;
        }
    }
    Ok(stats)
}

/// One estimate at width `W` and `2W`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub estimate: String,
    pub at_width: f64,
    pub at_double: f64,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WSensitivity {
    pub width: u32,
    pub rows: Vec<SensitivityRow>,
}

/// Reruns the ensemble at twice the transverse width and reports how much
/// each summary moves.
pub fn w_doubling_check(slab: &SlabSpec, samples: usize, seed: u64, max_attempts: u64) -> Result<WSensitivity> {
    let wide = slab.with_width(2 * slab.width().max(1))?;
    let base = summarize_ensemble(slab, &sample_ensemble(slab, samples, seed, max_attempts)?)?;
    let doubled = summarize_ensemble(&wide, &sample_ensemble(&wide, samples, seed, max_attempts)?)?;
    let pairs = [
        ("acceptance_rate", base.acceptance_rate, doubled.acceptance_rate),
        ("mean_regeneration_points", base.mean_regeneration_points, doubled.mean_regeneration_points),
        ("mean_max_gap", base.mean_max_gap, doubled.mean_max_gap),
        ("median_deviation", base.median_deviation, doubled.median_deviation),
        ("mean_transverse_extent", base.mean_transverse_extent, doubled.mean_transverse_extent),
    ];
    let rows = pairs
        .into_iter()
        .map(|(name, a, b)| SensitivityRow { estimate: name.to_string(), at_width: a, at_double: b, change: b - a })
        .collect();
    Ok(WSensitivity { width: slab.width(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Prob, Rational};

    #[test]
    fn ensemble_is_seed_deterministic() {
        let s = SlabSpec::axis(2, Rational::from_ratio(9, 20), 4, 3).unwrap();
        let a = sample_ensemble(&s, 100, 5, 1_000_000).unwrap();
        let b = sample_ensemble(&s, 100, 5, 1_000_000).unwrap();
        assert_eq!(a.len(), 100);
        assert!(a.iter().zip(&b).all(|(x, y)| x.config == y.config && x.attempts == y.attempts));
        let sum = summarize_ensemble(&s, &a).unwrap();
        assert!(sum.acceptance_rate > 0.0 && sum.acceptance_rate < 1.0);
        assert!(sum.mean_regeneration_points >= 1.0);
        let st = skeleton_stats(&s, &a, crate::analysis::default_grid()).unwrap();
        assert_eq!(st.count(), 100);
        assert_eq!(empirical_zero(&st), 0.0);
    }

    fn empirical_zero(st: &SummaryStats) -> f64 {
        crate::analysis::empirical_covariance(st, 1.0, 1.0, 0).unwrap().value
    }

    #[test]
    fn doubling_reports_every_estimate() {
        let s = SlabSpec::axis(2, Rational::from_ratio(2, 5), 3, 1).unwrap();
        let r = w_doubling_check(&s, 64, 1, 1_000_000).unwrap();
        assert_eq!(r.rows.len(), 5);
        assert_eq!(r.width, 1);
    }
}
