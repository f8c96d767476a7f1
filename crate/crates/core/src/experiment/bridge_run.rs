use std::fs;

use rayon::prelude::*;
use serde_json::json;

use crate::analysis::{
    empirical_covariance, exact_covariance_test, merge_stats, Comparison, SummaryStats, TestReport,
};
use crate::bridge::{
    covariance_prediction, estimate_cn, interpolate_scale, pinning_time_distribution, skeleton_scale, BridgePath,
    BridgeTables, FreePinnedSampler, PinningWindow, DEFAULT_TABLE_BUDGET,
};
use crate::experiment::run::{claim_of, Outputs, StatsContext};
use crate::experiment::ExperimentConfig;
use crate::lattice_walk::{named_law, parse_step_law, BasisFrame, ParsedLaw, StepLaw};
use crate::seeding::{stream_id, stream_rng};
use crate::{Error, Result};

/// Bridges per shard; shard `s` draws from stream `(5 << 48) | s`.
pub const BRIDGE_SHARD: u64 = 4096;

/// Exact bridges pinned by their rational law up to this length.
const EXACT_LIMIT: u64 = 64;

/// A named law or a law file.
pub fn load_law(spec: &str) -> Result<ParsedLaw> {
    if let Some(law) = named_law(spec) {
        return Ok(ParsedLaw::Exact(law));
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| Error::Config(format!("law {spec:?} is neither a named law nor a readable file: {e}")))?;
    parse_step_law(&text)
}

struct Shard {
    stats: SummaryStats,
    kept: Vec<(u64, u64, BridgePath)>,
}

/// Draws `cfg.samples` paths in shards; `draw` gets the shard generator and
/// returns `(k, path)` pairs.
fn sharded<F>(cfg: &ExperimentConfig, dim: usize, draw: F, scale: impl Fn(&BridgePath) -> Result<crate::bridge::ScaledPath> + Sync) -> Result<(SummaryStats, Vec<(u64, u64, BridgePath)>, u64)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> Result<Vec<(u64, BridgePath)>> + Sync,
{
    let shards = cfg.samples.div_ceil(BRIDGE_SHARD);
    let parts: Vec<Shard> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, stream_id(5, cfg.first_shard + s));
            let count = BRIDGE_SHARD.min(cfg.samples - s * BRIDGE_SHARD);
            let mut stats = SummaryStats::new(cfg.grid.clone(), dim);
            let mut kept = Vec::new();
            for (i, (k, path)) in draw(&mut rng, count as usize)?.into_iter().enumerate() {
                stats.add_path(&scale(&path)?)?;
                let index = s * BRIDGE_SHARD + i as u64;
                if index < cfg.keep_paths {
                    kept.push((index, k, path));
                }
            }
            Ok(Shard { stats, kept })
        })
        .collect::<Result<_>>()?;
    let mut stats = SummaryStats::new(cfg.grid.clone(), dim);
    let mut kept = Vec::new();
    for part in parts {
        stats = merge_stats(&stats, &part.stats)?;
        kept.extend(part.kept);
    }
    Ok((stats, kept, shards))
}

fn write_paths(out: &mut Outputs, name: &str, kept: &[(u64, u64, BridgePath)], dim: usize) -> Result<()> {
    out.write_with(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec!["sample".to_string(), "k".into(), "index".into(), "t".into()];
        header.extend((1..=dim).map(|j| format!("y{j}")));
        w.write_record(&header)?;
        for (sample, k, path) in kept {
            for (i, x) in path.points().iter().enumerate() {
                let mut row = vec![sample.to_string(), k.to_string(), i.to_string(), (i as f64 / *k as f64).to_string()];
                row.extend(x.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

pub(crate) fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let law = load_law(&cfg.law)?;
    for &n in &cfg.n {
        match &cfg.direction {
            None => origin_bridges(cfg, &law, n, out)?,
            Some(a) => free_pinned(cfg, &law, a, n, out)?,
        }
    }
    Ok(())
}

/// Bridges of length `n` pinned at the origin.
fn origin_bridges(cfg: &ExperimentConfig, law: &ParsedLaw, n: u64, out: &mut Outputs) -> Result<()> {
    let label = format!("n{n}");
    let d = law.dim();
    let flaw = law.to_f64();
    let origin = vec![0; d];
    let tables = BridgeTables::build(&flaw, n as usize, &origin, DEFAULT_TABLE_BUDGET)?;
    let c_n: Vec<f64> = (0..d).map(|j| estimate_cn(&tables, j).map(|c| c.value)).collect::<Result<_>>()?;
    match law {
        ParsedLaw::Exact(exact) if n <= EXACT_LIMIT => {
            let et = BridgeTables::build(exact, n as usize, &origin, DEFAULT_TABLE_BUDGET)?;
            out.write_with(&format!("marginals_{label}.csv"), |buf| et.write_exact_marginals_csv(buf))?;
            if n >= 4 {
                for coord in 0..d {
                    let r = exact_covariance_test(&et, coord)?;
                    out.report(claim_of(&r.test), r, None)?;
                }
            }
        }
        _ => out.write_with(&format!("marginals_{label}.csv"), |buf| {
            tables.write_marginals_csv(buf, |p| p.to_string())
        })?,
    }

    let (stats, kept, shards) = sharded(
        cfg,
        d,
        |rng, count| Ok((0..count).map(|_| (n, tables.sample(rng))).collect()),
        |path| interpolate_scale(path, n as usize),
    )?;
    out.shard_count += shards;
    write_paths(out, &format!("paths_{label}.csv"), &kept, d)?;
    write_covariance_csv(out, &format!("covariance_{label}.csv"), &stats, n, &c_n)?;

    let lattice_width = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let h = flaw.span(&e).ok()?.h;
            (h > 0 && n % 2 == 0).then(|| h as f64 / (n as f64).sqrt())
        })
        .collect();
    out.stats(
        &label,
        &stats,
        StatsContext { mode: "origin".into(), n, c_n, lattice_width, tolerance: cfg.tolerance },
    )
}

fn write_covariance_csv(out: &mut Outputs, name: &str, stats: &SummaryStats, n: u64, c_n: &[f64]) -> Result<()> {
    let interior: Vec<f64> = stats.grid().iter().copied().filter(|t| *t > 0.0 && *t < 1.0).collect();
    out.write_with(name, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["coord", "s", "t", "estimate", "standard_error", "predicted"])?;
        if stats.count() >= 2 {
            for (coord, c) in c_n.iter().enumerate() {
                for (i, &s) in interior.iter().enumerate() {
                    for &t in &interior[i..] {
                        let e = empirical_covariance(stats, s, t, coord)?;
                        let want = covariance_prediction(&s, &t, n as usize, c)?;
                        w.write_record([
                            coord.to_string(),
                            s.to_string(),
                            t.to_string(),
                            e.value.to_string(),
                            e.standard_error.to_string(),
                            want.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    })
}

/// Walks pinned at `n a` after a random number of steps.
fn free_pinned(cfg: &ExperimentConfig, law: &ParsedLaw, a: &[i64], n: u64, out: &mut Outputs) -> Result<()> {
    let label = format!("n{n}");
    let flaw: StepLaw<f64> = law.to_f64();
    let window = PinningWindow::new(&flaw, a, n, cfg.window)?;
    let dist = pinning_time_distribution(&flaw, a, n, &window, None)?;
    out.write_with(&format!("k_law_{label}.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["k", "probability", "in_window"])?;
        for (k, p) in dist.k_law() {
            w.write_record([k.to_string(), p.to_string(), window.contains(k).to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let total = dist.total();
    let r = TestReport::new(
        "pinning_window_mass",
        dist.outside / total,
        cfg.tolerance.unwrap_or(0.01),
        Comparison::AtMost,
        0,
        json!({
            "M": cfg.window,
            "kappa": window.kappa,
            "k_range": [window.k_range.0, window.k_range.1],
            "inside": dist.inside / total,
        }),
    );
    out.report(claim_of(&r.test), r, None)?;

    let sampler = FreePinnedSampler::new(&flaw, a, n)?;
    let frame = BasisFrame::new(a)?;
    let d = flaw.dim();
    let (stats, kept, shards) = sharded(
        cfg,
        d - 1,
        |rng, count| sampler.sample_many(count, rng),
        |path| {
            let points: Vec<(f64, Vec<f64>)> = path.points()[1..].iter().map(|x| frame.split(x)).collect();
            skeleton_scale(&points, n as usize, a)
        },
    )?;
    out.shard_count += shards;
    write_paths(out, &format!("paths_{label}.csv"), &kept, d)?;
    out.stats(
        &label,
        &stats,
        StatsContext { mode: "free-pinned".into(), n, c_n: Vec::new(), lattice_width: Vec::new(), tolerance: cfg.tolerance },
    )
}
