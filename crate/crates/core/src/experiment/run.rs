use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    bridge_covariance_test, covariance_ratio_test, increment_tail_test, marginal_gaussian_test, Comparison,
    SummaryStats, TestReport,
};
use crate::bridge::covariance_prediction;
use crate::experiment::{bridge_run, oracle_run, perc_run, ExperimentConfig, ExperimentKind};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// How the master seed becomes per-shard generators.
pub const SEEDING_SCHEME: &str = "ChaCha8 seeded from the master seed via seed_from_u64, stream (tag << 48) | index; \
tags: 3 xi (index = n << 24 | shard), 4 percolation shards, 5 bridge shards, 6 percolation pilot";

/// Grid pairs of the scale-free covariance check.
pub const RATIO_PAIRS: [(f64, f64); 3] = [(0.25, 0.5), (0.25, 0.75), (0.5, 0.75)];

/// What a stored summary needs to have its reports recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsContext {
    /// `origin` and `free-pinned` bridges, or `skeleton`.
    pub mode: String,
    pub n: u64,
    #[serde(default)]
    pub c_n: Vec<f64>,
    #[serde(default)]
    pub lattice_width: Vec<Option<f64>>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub label: String,
    pub file: String,
    pub context: StatsContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub file: String,
    pub test: String,
    pub claim: String,
    pub pass: bool,
    /// Label of the summary the report was computed from, if any.
    pub stats: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub seeding: String,
    pub config: BTreeMap<String, String>,
    pub merge_key: String,
    pub first_shard: u64,
    pub shard_count: u64,
    pub stats: Vec<StatsEntry>,
    pub reports: Vec<ReportEntry>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
    pub status: String,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub reports: Vec<TestReport>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed()
    }
}

/// Collects files, reports and summaries while a run proceeds.
pub(crate) struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    pub(crate) reports: Vec<(ReportEntry, TestReport)>,
    pub(crate) stats: Vec<StatsEntry>,
    pub(crate) notes: Vec<String>,
    pub(crate) shard_count: u64,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            reports: Vec::new(),
            stats: Vec::new(),
            notes: Vec::new(),
            shard_count: 0,
        })
    }

    pub(crate) fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub(crate) fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Files a report; `label` tags the file name.
    pub(crate) fn report(&mut self, claim: &str, report: TestReport, label: Option<&str>) -> Result<()> {
        self.file_report(claim, report, label, false)
    }

    fn file_report(&mut self, claim: &str, report: TestReport, label: Option<&str>, from_stats: bool) -> Result<()> {
        let suffix = label.map(|s| format!("_{s}")).unwrap_or_default();
        let mut file = format!("report_{}{suffix}.json", report.test);
        let mut k = 2;
        while self.reports.iter().any(|(e, _)| e.file == file) {
            file = format!("report_{}{suffix}_{k}.json", report.test);
            k += 1;
        }
        self.write_json(&file, &report)?;
        let entry = ReportEntry {
            file,
            test: report.test.clone(),
            claim: claim.to_string(),
            pass: report.pass,
            stats: if from_stats { label.map(str::to_string) } else { None },
        };
        self.reports.push((entry, report));
        Ok(())
    }

    /// Stores a summary and files every report recomputable from it.
    pub(crate) fn stats(&mut self, label: &str, stats: &SummaryStats, context: StatsContext) -> Result<()> {
        let file = format!("stats_{label}.json");
        self.write_json(&file, stats)?;
        for (claim, r) in stats_reports(stats, &context, &mut self.notes)? {
            self.file_report(&claim, r, Some(label), true)?;
        }
        self.stats.push(StatsEntry { label: label.to_string(), file, context });
        Ok(())
    }
}

/// Claim under which a test is listed in the consolidated matrix.
pub fn claim_of(test: &str) -> &'static str {
    match test {
        "bridge_covariance" | "covariance_point" | "exact_covariance_identity" | "covariance_ratio"
        | "gamma_endpoints" => "covariance identity",
        "marginal_gaussian" | "local_clt_distance" | "local_clt_monotone" | "pinning_window_mass" => "local CLT",
        "renewal_factorization" | "renewal_relation" | "renewal_independence" => "renewal factorization",
        "shrinking_trend" => "shrinking trend",
        "increment_tail" | "gap_trend" => "tail decay",
        "xi_path_bound" => "correlation length",
        _ => "other",
    }
}

/// Runs a check whose preconditions may fail. Too few samples skips it with a
/// note; any other error becomes a failing report.
pub(crate) fn guarded(name: &str, notes: &mut Vec<String>, r: Result<TestReport>) -> Option<TestReport> {
    match r {
        Ok(r) => Some(r),
        Err(Error::TooFewSamples { have, need }) => {
            notes.push(format!("{name} skipped: {have} samples, needs {need}"));
            None
        }
        Err(e) => Some(TestReport::new(
            name,
            f64::NAN,
            0.0,
            Comparison::AtMost,
            0,
            json!({"error": e.to_string()}),
        )),
    }
}

/// Every report that depends only on a summary and its context.
pub fn stats_reports(
    stats: &SummaryStats,
    ctx: &StatsContext,
    notes: &mut Vec<String>,
) -> Result<Vec<(String, TestReport)>> {
    let mut out = Vec::new();
    let n = ctx.n as usize;
    let mut push = |r: Option<TestReport>| {
        if let Some(r) = r {
            out.push((claim_of(&r.test).to_string(), r));
        }
    };
    match ctx.mode.as_str() {
        "origin" => {
            push(guarded("bridge_covariance", notes, bridge_covariance_test(stats, n)));
            push(guarded("covariance_point", notes, covariance_point(stats, n, &ctx.c_n)));
            for coord in 0..stats.dim() {
                let var = ctx.c_n.get(coord).copied().unwrap_or(f64::NAN) * 0.25;
                let width = ctx.lattice_width.get(coord).copied().flatten();
                push(guarded("marginal_gaussian", notes, marginal_gaussian_test(stats, 0.5, coord, var, width)));
            }
        }
        "free-pinned" => {
            if stats.dim() > 0 {
                push(guarded("bridge_covariance", notes, bridge_covariance_test(stats, n)));
            }
        }
        "skeleton" => {
            let tol = ctx.tolerance.unwrap_or(0.15);
            push(guarded("covariance_ratio", notes, covariance_ratio_test(stats, &RATIO_PAIRS, tol)));
            push(guarded("increment_tail", notes, increment_tail_test(&stats.increment_norms())));
        }
        other => return Err(Error::Config(format!("unknown summary mode {other:?}"))),
    }
    Ok(out)
}

/// `Cov(X(1/4), X(1/2))` against `C_n s (1 - t)` in units of its jackknife
/// standard error, first coordinate.
fn covariance_point(stats: &SummaryStats, n: usize, c_n: &[f64]) -> Result<TestReport> {
    let (s, t) = (0.25, 0.5);
    let c = *c_n.first().ok_or_else(|| Error::Degenerate("no scale for coordinate 0".into()))?;
    let want = covariance_prediction(&s, &t, n, &c)?;
    if stats.count() < 2 {
        return Err(Error::TooFewSamples { have: stats.count(), need: 2 });
    }
    let est = crate::analysis::empirical_covariance(stats, s, t, 0)?;
    let z = (est.value - want).abs() / est.standard_error;
    Ok(TestReport::new(
        "covariance_point",
        if z.is_nan() { f64::INFINITY } else { z },
        3.0,
        Comparison::AtMost,
        stats.count(),
        json!({"s": s, "t": t, "estimate": est.value, "standard_error": est.standard_error, "predicted": want}),
    ))
}

/// Runs one experiment and writes its artifacts under `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let mut out = Outputs::new(&config.out)?;
    out.write("config.txt", config.to_text().as_bytes())?;
    match config.kind {
        ExperimentKind::Bridge => bridge_run::run(config, &mut out)?,
        ExperimentKind::Percolation => perc_run::run(config, &mut out)?,
        ExperimentKind::Clt => oracle_run::run_clt(config, &mut out)?,
        ExperimentKind::Xi => oracle_run::run_xi(config, &mut out)?,
        ExperimentKind::RenewalOracle => oracle_run::run_renewal(config, &mut out)?,
    }
    let pass = out.reports.iter().all(|(e, _)| e.pass);
    let mut files = out.files.clone();
    files.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind.to_string(),
        seed: config.seed,
        seeding: SEEDING_SCHEME.to_string(),
        config: config.pairs(),
        merge_key: config.merge_key(),
        first_shard: config.first_shard,
        shard_count: out.shard_count,
        stats: out.stats.clone(),
        reports: out.reports.iter().map(|(e, _)| e.clone()).collect(),
        files,
        notes: out.notes.clone(),
        status: if pass { "PASS" } else { "FAIL" }.to_string(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(config.out.join(MANIFEST_FILE), text)?;
    Ok(RunOutcome { dir: config.out.clone(), manifest, reports: out.reports.into_iter().map(|(_, r)| r).collect() })
}

/// Errors caused by a config that cannot work, as opposed to a failed computation.
fn is_setup_error(e: &Error) -> bool {
    e.is_config()
        || matches!(
            e,
            Error::DimensionMismatch { .. }
                | Error::DriftViolation
                | Error::NonzeroMean(_)
                | Error::UnreachableEndpoint(_)
                | Error::NoPinningPossible
                | Error::InvalidSlab(_)
                | Error::ZeroVariance
                | Error::NonLatticeProjection
                | Error::VertexOutsideSlab(_)
                | Error::NonPositiveProbability(_)
                | Error::ProbabilitySumMismatch(_)
                | Error::EmptySupport
                | Error::DuplicateSupportVector(_)
        )
}

/// Process exit status: 0 success, 2 config error, 3 budget exhausted,
/// 4 statistical test failure, 1 anything else.
pub fn exit_code<T>(result: &Result<T>, passed: impl Fn(&T) -> bool) -> u8 {
    match result {
        Ok(v) if passed(v) => 0,
        Ok(_) => 4,
        Err(e) if is_setup_error(e) => 2,
        Err(e) if e.is_budget() => 3,
        Err(_) => 1,
    }
}
