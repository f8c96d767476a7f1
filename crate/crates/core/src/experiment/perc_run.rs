use serde_json::json;

use crate::analysis::{independence_diagnostic, Comparison, TestReport};
use crate::experiment::run::{claim_of, guarded, Outputs, StatsContext};
use crate::experiment::ExperimentConfig;
use crate::percolation::{
    sample_ensemble_shards, skeleton_gamma, skeleton_stats, summarize_ensemble, w_doubling_check, ClusterSampler,
    ConditionedSample, EnsembleSummary, SlabSpec,
};
use crate::seeding::{stream_id, stream_rng};
use crate::{Error, Result};

/// Raw acceptance below which a run with `fallback_n` switches length.
pub const FALLBACK_ACCEPTANCE: f64 = 1e-5;
const PILOT_ACCEPTED: u64 = 10;
const PILOT_ATTEMPTS: u64 = 2_000_000;

fn slab_for(cfg: &ExperimentConfig, n: u64) -> Result<SlabSpec> {
    let a = cfg.direction_or_axis();
    let y: Vec<i64> = a.iter().map(|v| v * n as i64).collect();
    SlabSpec::new(cfg.p_exact(), a, vec![0; cfg.d], y, cfg.width)
}

/// Accepted over drawn for a short pilot run of the sampler.
pub fn pilot_acceptance(slab: &SlabSpec, seed: u64, index: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, stream_id(6, index));
    let mut sampler = ClusterSampler::new(slab)?;
    let (mut accepted, mut attempts) = (0u64, 0u64);
    while accepted < PILOT_ACCEPTED && attempts < PILOT_ATTEMPTS {
        match sampler.sample(&mut rng, PILOT_ATTEMPTS - attempts) {
            Ok(s) => {
                accepted += 1;
                attempts += s.attempts;
            }
            Err(Error::AttemptBudgetExhausted(_)) => attempts = PILOT_ATTEMPTS,
            Err(e) => return Err(e),
        }
    }
    Ok(accepted as f64 / attempts as f64)
}

fn write_skeletons(out: &mut Outputs, name: &str, d: usize, ensemble: &[ConditionedSample]) -> Result<()> {
    out.write_with(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["sample".to_string(), "i".into()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for (s, c) in ensemble.iter().enumerate() {
            let origin = std::iter::once(c.skeleton.origin());
            for (i, x) in origin.chain(c.skeleton.points().iter().map(Vec::as_slice)).enumerate() {
                let mut row = vec![s.to_string(), i.to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

/// Number of strict increases along the sequence.
fn increases(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

pub(crate) fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let a = cfg.direction_or_axis();
    let mut summaries: Vec<(u64, EnsembleSummary)> = Vec::new();
    for &requested in &cfg.n {
        let mut n = requested;
        let mut slab = slab_for(cfg, n)?;
        if let Some(fallback) = cfg.fallback_n {
            let raw = pilot_acceptance(&slab, cfg.seed, n)?;
            if raw < FALLBACK_ACCEPTANCE {
                out.notes.push(format!("n = {n}: pilot acceptance {raw:.3e} below {FALLBACK_ACCEPTANCE:e}, using n = {fallback}"));
                n = fallback;
                slab = slab_for(cfg, n)?;
            } else {
                out.notes.push(format!("n = {n}: pilot acceptance {raw:.3e}"));
            }
        }
        let label = format!("n{n}");
        let ensemble = sample_ensemble_shards(&slab, cfg.first_shard, cfg.samples as usize, cfg.seed, cfg.max_attempts)?;
        out.shard_count += (cfg.samples as usize).div_ceil(crate::percolation::ENSEMBLE_SHARD) as u64;
        write_skeletons(out, &format!("skeletons_{label}.csv"), cfg.d, &ensemble)?;
        let summary = summarize_ensemble(&slab, &ensemble)?;

        let mut worst = 0.0f64;
        for s in &ensemble {
            let g = skeleton_gamma(&s.skeleton, n as usize, &a)?;
            for t in [0.0, 1.0] {
                worst = g.eval(t).iter().fold(worst, |m, v| m.max(v.abs()));
            }
        }
        let r = TestReport::new(
            "gamma_endpoints",
            worst,
            0.0,
            Comparison::AtMost,
            ensemble.len() as u64,
            json!({"n": n, "null": "gamma(0) = gamma(1) = 0 in every sample"}),
        );
        out.report(claim_of(&r.test), r, Some(&label))?;

        let sequences: Vec<Vec<Vec<f64>>> = ensemble
            .iter()
            .map(|s| s.skeleton.increments().into_iter().map(|x| x.into_iter().map(|v| v as f64).collect()).collect())
            .collect();
        let mut notes = Vec::new();
        if let Some(mut r) = guarded("renewal_independence", &mut notes, independence_diagnostic(&sequences, cfg.seed)) {
            r.test = "renewal_independence".into();
            out.report(claim_of(&r.test), r, Some(&label))?;
        }
        out.notes.extend(notes);

        let stats = skeleton_stats(&slab, &ensemble, cfg.grid.clone())?;
        out.stats(
            &label,
            &stats,
            StatsContext {
                mode: "skeleton".into(),
                n,
                c_n: Vec::new(),
                lattice_width: Vec::new(),
                tolerance: cfg.tolerance,
            },
        )?;
        if cfg.w_check {
            let check = w_doubling_check(&slab, cfg.samples as usize, cfg.seed, cfg.max_attempts)?;
            out.write_json(&format!("w_sensitivity_{label}.json"), &check)?;
        }
        summaries.push((n, summary));
    }

    out.write_with("summary.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "n",
            "samples",
            "attempts",
            "raw_acceptance",
            "acceptance_rate",
            "mean_regeneration_points",
            "mean_max_gap",
            "gap_exceedance",
            "median_deviation",
            "mean_transverse_extent",
        ])?;
        for (n, s) in &summaries {
            w.write_record([
                n.to_string(),
                s.samples.to_string(),
                s.attempts.to_string(),
                s.raw_acceptance.to_string(),
                s.acceptance_rate.to_string(),
                s.mean_regeneration_points.to_string(),
                s.mean_max_gap.to_string(),
                s.gap_exceedance.to_string(),
                s.median_deviation.to_string(),
                s.mean_transverse_extent.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    if summaries.len() >= 2 {
        let mut sorted = summaries.clone();
        sorted.sort_by_key(|(n, _)| *n);
        let ns: Vec<u64> = sorted.iter().map(|(n, _)| *n).collect();
        let dev: Vec<f64> = sorted.iter().map(|(_, s)| s.median_deviation).collect();
        let gap: Vec<f64> = sorted.iter().map(|(_, s)| s.gap_exceedance).collect();
        let total = sorted.iter().map(|(_, s)| s.samples as u64).sum();
        for (test, values) in [("shrinking_trend", dev), ("gap_trend", gap)] {
            let r = TestReport::new(
                test,
                increases(&values) as f64,
                0.0,
                Comparison::AtMost,
                total,
                json!({"null": "non-increasing in n", "n": ns, "values": values}),
            );
            out.report(claim_of(test), r, None)?;
        }
    }
    Ok(())
}
