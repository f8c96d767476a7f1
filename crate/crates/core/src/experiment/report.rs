use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::analysis::{merge_stats, SummaryStats, TestReport};
use crate::experiment::run::{stats_reports, Manifest, MANIFEST_FILE};
use crate::{Error, Result};

/// One test outcome in the matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixEntry {
    pub run: String,
    pub test: String,
    pub pass: bool,
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimRow {
    pub pass: bool,
    pub entries: Vec<MatrixEntry>,
}

/// Summaries pooled from several shard runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedStats {
    pub runs: Vec<String>,
    pub label: String,
    pub stats: SummaryStats,
    pub reports: Vec<TestReport>,
}

/// Pass/fail matrix keyed by claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Consolidated {
    pub runs: Vec<String>,
    pub claims: BTreeMap<String, ClaimRow>,
    pub merged: Vec<MergedStats>,
    pub notes: Vec<String>,
}

impl Consolidated {
    pub fn passed(&self) -> bool {
        self.claims.values().all(|c| c.pass)
    }

    pub fn status(&self) -> &'static str {
        if self.passed() {
            "PASS"
        } else {
            "FAIL"
        }
    }

    pub fn failing_claims(&self) -> Vec<&str> {
        self.claims.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (claim, row) in &self.claims {
            out.push_str(&format!("{claim}: {}\n", if row.pass { "PASS" } else { "FAIL" }));
            for e in &row.entries {
                let stat = e.statistic.map(|s| format!("{s:.6}")).unwrap_or_else(|| "-".into());
                out.push_str(&format!(
                    "  {:<28} {:<24} {:>14}  {}\n",
                    e.test,
                    e.run,
                    stat,
                    if e.pass { "PASS" } else { "FAIL" }
                ));
            }
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        let failing = self.failing_claims();
        if failing.is_empty() {
            out.push_str(&format!("overall: {} ({} runs)\n", self.status(), self.runs.len()));
        } else {
            out.push_str(&format!("overall: FAIL ({})\n", failing.join(", ")));
        }
        out
    }

    fn add(&mut self, claim: &str, entry: MatrixEntry) {
        let row = self.claims.entry(claim.to_string()).or_insert(ClaimRow { pass: true, entries: Vec::new() });
        row.pass &= entry.pass;
        row.entries.push(entry);
    }
}

struct Run {
    name: String,
    dir: PathBuf,
    manifest: Manifest,
}

fn load_run(dir: &Path) -> Result<Run> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::MissingManifest(dir.display().to_string()));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| ".".into());
    Ok(Run { name, dir: dir.to_path_buf(), manifest })
}

fn load_runs(dir: &Path) -> Result<Vec<Run>> {
    if !dir.is_dir() {
        return Err(Error::MissingManifest(dir.display().to_string()));
    }
    if dir.join(MANIFEST_FILE).is_file() || dir.join("config.txt").is_file() {
        return Ok(vec![load_run(dir)?]);
    }
    let mut subdirs: Vec<PathBuf> =
        fs::read_dir(dir)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    subdirs.iter().map(|d| load_run(d)).collect()
}

fn entry_from_file(run: &Run, test: &str, file: &str, pass: bool) -> Result<MatrixEntry> {
    let v: Value = serde_json::from_str(&fs::read_to_string(run.dir.join(file))?)?;
    Ok(MatrixEntry {
        run: run.name.clone(),
        test: test.to_string(),
        pass,
        statistic: v["statistic"].as_f64(),
        threshold: v["threshold"].as_f64(),
    })
}

/// Shard runs must cover disjoint shard ranges.
fn check_disjoint(group: &[&Run]) -> Result<()> {
    let mut ranges: Vec<(u64, u64, &str)> = group
        .iter()
        .map(|r| (r.manifest.first_shard, r.manifest.first_shard + r.manifest.shard_count, r.name.as_str()))
        .collect();
    ranges.sort();
    for w in ranges.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Config(format!("runs {} and {} draw overlapping shards", w[0].2, w[1].2)));
        }
    }
    Ok(())
}

/// Reads every run manifest under `dir` (or `dir` itself when it holds one)
/// and collects all reports into one matrix. Runs that differ only in their
/// shard range are pooled: their summaries are merged and the summary-based
/// reports recomputed on the pooled data.
pub fn report(dir: &Path) -> Result<Consolidated> {
    let runs = load_runs(dir)?;
    let mut out = Consolidated {
        runs: runs.iter().map(|r| r.name.clone()).collect(),
        claims: BTreeMap::new(),
        merged: Vec::new(),
        notes: Vec::new(),
    };
    let mut groups: BTreeMap<&str, Vec<&Run>> = BTreeMap::new();
    for r in &runs {
        groups.entry(r.manifest.merge_key.as_str()).or_default().push(r);
    }
    for group in groups.values() {
        let pooled = group.len() > 1 && !group[0].manifest.stats.is_empty();
        if pooled {
            check_disjoint(group)?;
        }
        for run in group {
            for e in &run.manifest.reports {
                if pooled && e.stats.is_some() {
                    continue;
                }
                out.add(&e.claim, entry_from_file(run, &e.test, &e.file, e.pass)?);
            }
        }
        if !pooled {
            continue;
        }
        let names: Vec<String> = group.iter().map(|r| r.name.clone()).collect();
        let run_name = names.join("+");
        for entry in &group[0].manifest.stats {
            let mut merged: Option<SummaryStats> = None;
            for run in group {
                let found = run.manifest.stats.iter().find(|s| s.label == entry.label).ok_or_else(|| {
                    Error::Config(format!("run {} has no summary {}", run.name, entry.label))
                })?;
                let s: SummaryStats = serde_json::from_str(&fs::read_to_string(run.dir.join(&found.file))?)?;
                merged = Some(match merged {
                    None => s,
                    Some(m) => merge_stats(&m, &s)?,
                });
            }
            let stats = merged.expect("group is non-empty");
            let mut reports = Vec::new();
            for (claim, r) in stats_reports(&stats, &entry.context, &mut out.notes)? {
                out.add(
                    &claim,
                    MatrixEntry {
                        run: run_name.clone(),
                        test: r.test.clone(),
                        pass: r.pass,
                        statistic: Some(r.statistic),
                        threshold: Some(r.threshold),
                    },
                );
                reports.push(r);
            }
            out.merged.push(MergedStats { runs: names.clone(), label: entry.label.clone(), stats, reports });
        }
    }
    Ok(out)
}
