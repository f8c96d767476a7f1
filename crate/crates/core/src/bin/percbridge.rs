use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use percbridge::analysis::render_table;
use percbridge::experiment::{exit_code, report, run, ExperimentConfig, ExperimentKind};
use percbridge::Error;

/// Seeded bridge and percolation experiments.
///
/// Exit status: 0 success, 2 config error, 3 budget exhausted, 4 a
/// statistical test failed.
#[derive(Parser)]
#[command(name = "percbridge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-sampler walk bridges with covariance and marginal checks.
    Bridge {
        #[command(flatten)]
        common: Common,
        /// Named law (pm1, lazy, drift, tilted, diag, two-speed) or law file.
        #[arg(long)]
        law: Option<String>,
        /// Length, or a comma list of lengths.
        #[arg(long)]
        n: Option<String>,
        /// Pin at n a after a random number of steps instead of at the origin.
        #[arg(long)]
        a: Option<String>,
        #[arg(long = "M")]
        m: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        first_shard: Option<String>,
        #[arg(long)]
        keep_paths: Option<String>,
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Conditioned percolation clusters and their regeneration skeletons.
    Perc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long = "W")]
        w: Option<String>,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        first_shard: Option<String>,
        /// Length used instead when the pilot acceptance is below 1e-5.
        #[arg(long)]
        fallback_n: Option<String>,
        #[arg(long)]
        max_attempts: Option<String>,
        /// Also rerun at twice the transverse width.
        #[arg(long)]
        w_check: bool,
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Local CLT distances by exact convolution.
    Clt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        tolerance: Option<String>,
    },
    /// Inverse correlation length from full-lattice connection frequencies.
    Xi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        a: Option<String>,
    },
    /// Exact enumeration of a small slab: connectivities and factorization.
    RenewalOracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        len: Option<String>,
        #[arg(long = "W")]
        w: Option<String>,
        #[arg(long)]
        a: Option<String>,
    },
    /// Pass/fail matrix over a directory of runs.
    Report {
        dir: PathBuf,
        /// Also write the matrix as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn collect(pairs: &[(&str, &Option<String>)]) -> Vec<(String, String)> {
    pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
}

fn start(kind: ExperimentKind, common: Common, mut overrides: Vec<(String, String)>) -> ExitCode {
    overrides.extend(collect(&[("seed", &common.seed), ("samples", &common.samples), ("out", &common.out)]));
    let file = match common.config.as_ref().map(fs::read_to_string).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot read config: {e}");
            return ExitCode::from(2);
        }
    };
    let result = ExperimentConfig::resolve(kind, file.as_deref(), &overrides).and_then(|c| run(&c));
    match &result {
        Ok(o) => {
            print!("{}", render_table(&o.reports));
            for n in &o.manifest.notes {
                println!("note: {n}");
            }
            println!("{}: {}", o.manifest.status, o.dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result, |o| o.passed()))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Bridge { common, law, n, a, m, grid, first_shard, keep_paths, tolerance } => start(
            ExperimentKind::Bridge,
            common,
            collect(&[
                ("law", &law),
                ("n", &n),
                ("a", &a),
                ("M", &m),
                ("grid", &grid),
                ("first_shard", &first_shard),
                ("keep_paths", &keep_paths),
                ("tolerance", &tolerance),
            ]),
        ),
        Command::Perc { common, d, p, n, w, a, grid, first_shard, fallback_n, max_attempts, w_check, tolerance } => {
            let mut o = collect(&[
                ("d", &d),
                ("p", &p),
                ("n", &n),
                ("W", &w),
                ("a", &a),
                ("grid", &grid),
                ("first_shard", &first_shard),
                ("fallback_n", &fallback_n),
                ("max_attempts", &max_attempts),
                ("tolerance", &tolerance),
            ]);
            if w_check {
                o.push(("w_check".into(), "true".into()));
            }
            start(ExperimentKind::Percolation, common, o)
        }
        Command::Clt { common, law, n, tolerance } => {
            start(ExperimentKind::Clt, common, collect(&[("law", &law), ("n", &n), ("tolerance", &tolerance)]))
        }
        Command::Xi { common, d, p, n, a } => {
            start(ExperimentKind::Xi, common, collect(&[("d", &d), ("p", &p), ("n", &n), ("a", &a)]))
        }
        Command::RenewalOracle { common, d, p, len, w, a } => start(
            ExperimentKind::RenewalOracle,
            common,
            collect(&[("d", &d), ("p", &p), ("len", &len), ("W", &w), ("a", &a)]),
        ),
        Command::Report { dir, out } => {
            let result = report(&dir).and_then(|c| {
                if let Some(path) = &out {
                    fs::write(path, serde_json::to_string_pretty(&c).map_err(Error::from)? + "\n")?;
                }
                Ok(c)
            });
            match &result {
                Ok(c) => print!("{}", c.render()),
                Err(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&result, |c| c.passed()))
        }
    }
}
