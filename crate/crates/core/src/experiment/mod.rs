//! Seeded, configurable experiment runs writing CSV samples, JSON reports and
//! a manifest per run, plus the consolidated report over a directory of runs.
//!
//! A run directory holds `config.txt` (the effective `key=value` config),
//! raw CSVs, one `report_*.json` per test and `manifest.json`. Identical
//! config and seed reproduce every file byte for byte.

mod bridge_run;
mod config;
mod oracle_run;
mod perc_run;
mod report;
mod run;

pub use bridge_run::{load_law, BRIDGE_SHARD};
pub use config::{parse_pairs, ExperimentConfig, ExperimentKind, CONFIG_KEYS};
pub use perc_run::{pilot_acceptance, FALLBACK_ACCEPTANCE};
pub use report::{report, ClaimRow, Consolidated, MatrixEntry, MergedStats};
pub use run::{
    claim_of, exit_code, run, stats_reports, Manifest, ReportEntry, RunOutcome, StatsContext, StatsEntry,
    MANIFEST_FILE, RATIO_PAIRS, SEEDING_SCHEME,
};
