//! Two seeded runs written to disk and collected into a pass/fail matrix,
//! as the `percbridge` binary does with `bridge`, `renewal-oracle` and
//! `report`.

use percbridge::experiment::{report, run, ExperimentConfig, ExperimentKind};

fn main() -> percbridge::Result<()> {
    let root = std::env::temp_dir().join("percbridge-example");
    let _ = std::fs::remove_dir_all(&root);
    let runs = [
        (ExperimentKind::Bridge, vec![("law", "pm1"), ("n", "100"), ("samples", "20000"), ("seed", "7")]),
        (ExperimentKind::RenewalOracle, vec![("len", "3"), ("W", "1"), ("p", "9/20")]),
    ];
    for (kind, pairs) in runs {
        let mut overrides: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        overrides.push(("out".into(), root.join(kind.name()).display().to_string()));
        let config = ExperimentConfig::resolve(kind, None, &overrides)?;
        let outcome = run(&config)?;
        println!("{kind}: {} files in {}", outcome.manifest.files.len(), outcome.dir.display());
    }
    print!("{}", report(&root)?.render());
    Ok(())
}
