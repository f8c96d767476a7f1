use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use percbridge::experiment::{report, run, stats_reports, ExperimentConfig, ExperimentKind, BRIDGE_SHARD};
use percbridge::Error;

fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn config(kind: ExperimentKind, out: &Path, pairs: &[(&str, &str)]) -> ExperimentConfig {
    let mut o = kv(pairs);
    o.push(("out".into(), out.display().to_string()));
    ExperimentConfig::resolve(kind, None, &o).unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_percbridge")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn empty_directory_gives_empty_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let c = report(dir.path()).unwrap();
    assert!(c.claims.is_empty());
    assert!(c.passed());
}

#[test]
fn missing_manifest_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("half-written")).unwrap();
    assert!(matches!(report(dir.path()), Err(Error::MissingManifest(_))));
    assert!(matches!(report(&dir.path().join("nowhere")), Err(Error::MissingManifest(_))));
}

#[test]
fn failing_report_names_its_claim() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(&config(ExperimentKind::RenewalOracle, &dir.path().join("oracle"), &[("len", "2")])).unwrap();
    assert!(ok.passed());
    let bad = run(&config(ExperimentKind::Clt, &dir.path().join("clt"), &[("n", "4,8"), ("tolerance", "0")])).unwrap();
    assert!(!bad.passed());
    assert_eq!(bad.manifest.status, "FAIL");
    let c = report(dir.path()).unwrap();
    assert_eq!(c.status(), "FAIL");
    assert_eq!(c.failing_claims(), vec!["local CLT"]);
    assert!(c.claims["renewal factorization"].pass);
    assert!(c.render().contains("overall: FAIL (local CLT)"));
}

#[test]
fn two_shards_merge_to_the_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let shard = BRIDGE_SHARD.to_string();
    let both = (2 * BRIDGE_SHARD).to_string();
    let base = [("law", "lazy"), ("n", "24"), ("seed", "5")];
    let single = run(&config(
        ExperimentKind::Bridge,
        &dir.path().join("single/run"),
        &[base.as_slice(), &[("samples", both.as_str())]].concat(),
    ))
    .unwrap();
    for (name, first) in [("a", "0"), ("b", "1")] {
        let pairs = [base.as_slice(), &[("samples", shard.as_str()), ("first_shard", first)]].concat();
        run(&config(ExperimentKind::Bridge, &dir.path().join("shards").join(name), &pairs)).unwrap();
    }
    let c = report(&dir.path().join("shards")).unwrap();
    assert_eq!(c.merged.len(), 1);
    let merged = &c.merged[0];
    assert_eq!(merged.runs, vec!["a", "b"]);

    let stats_file = single.dir.join(&single.manifest.stats[0].file);
    let single_stats: percbridge::analysis::SummaryStats =
        serde_json::from_str(&fs::read_to_string(stats_file).unwrap()).unwrap();
    assert_eq!(merged.stats, single_stats);
    let want = stats_reports(&single_stats, &single.manifest.stats[0].context, &mut Vec::new()).unwrap();
    let want: Vec<_> = want.into_iter().map(|(_, r)| r).collect();
    assert_eq!(merged.reports, want);

    // overlapping shard ranges are refused
    let pairs = [base.as_slice(), &[("samples", shard.as_str()), ("first_shard", "1")]].concat();
    run(&config(ExperimentKind::Bridge, &dir.path().join("shards").join("c"), &pairs)).unwrap();
    assert!(matches!(report(&dir.path().join("shards")), Err(Error::Config(_))));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (ExperimentKind::Bridge, vec![("law", "pm1"), ("n", "16"), ("samples", "5000"), ("seed", "3")]),
        (ExperimentKind::Percolation, vec![("p", "0.3"), ("n", "4"), ("W", "2"), ("samples", "300"), ("seed", "3")]),
        (ExperimentKind::Xi, vec![("p", "0.2"), ("n", "1,2,3"), ("samples", "20000"), ("seed", "3")]),
    ];
    for (kind, pairs) in cases {
        let out = dir.path().join(kind.name());
        let cfg = config(kind, &out, &pairs);
        run(&cfg).unwrap();
        let first = read_dir(&out);
        fs::remove_dir_all(&out).unwrap();
        run(&cfg).unwrap();
        assert_eq!(first, read_dir(&out), "{kind}");
    }
}

#[test]
fn renewal_oracle_example_rows_all_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let (code, stdout) =
        cli(&["renewal-oracle", "--d", "2", "--W", "1", "--len", "3", "--p", "9/20", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let mut rdr = csv::Reader::from_path(out.join("factorization_len3.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(&r[1], &r[2]);
        assert_eq!(&r[4], "true");
    }
    let text = fs::read_to_string(out.join("connectivity_len3.csv")).unwrap();
    assert!(text.starts_with("x1,x2,h,f\n"));
    assert!(text.lines().any(|l| l == "0,0,121/400,0"));
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name).display().to_string();
    let o = out("ok");
    assert_eq!(cli(&["renewal-oracle", "--len", "2", "--W", "0", "--out", &o]).0, 0);
    let o = out("cfg");
    assert_eq!(cli(&["perc", "--d", "7", "--out", &o]).0, 2);
    assert_eq!(cli(&["perc", "--p", "0.5", "--out", &o]).0, 2);
    assert_eq!(cli(&["bridge", "--law", "no-such-law", "--out", &o]).0, 2);
    let o = out("budget");
    assert_eq!(
        cli(&["perc", "--p", "0.01", "--n", "6", "--W", "1", "--samples", "2", "--max-attempts", "10", "--out", &o]).0,
        3
    );
    let o = out("runs/stat");
    assert_eq!(cli(&["clt", "--n", "4,8", "--tolerance", "0", "--out", &o]).0, 4);
    assert_eq!(cli(&["report", &out("runs")]).0, 4);
    // a run that died before writing its manifest
    assert_eq!(cli(&["report", &out("budget")]).0, 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    let out = dir.path().join("clt");
    fs::write(&file, format!("kind=clt\nlaw=pm1\nn=8,16\nout={}\n", out.display())).unwrap();
    let (code, _) = cli(&["clt", "--config", file.to_str().unwrap(), "--n", "16,32"]);
    assert_eq!(code, 0);
    let echo = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echo.contains("law=pm1\n") && echo.contains("n=16,32\n"), "{echo}");
    let cfg = ExperimentConfig::from_text(&echo).unwrap();
    assert_eq!(cfg.n, vec![16, 32]);

    fs::write(&file, "kind=clt\nwidth=3\n").unwrap();
    assert_eq!(cli(&["clt", "--config", file.to_str().unwrap()]).0, 2);
}

#[test]
fn bridge_run_writes_paths_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let r = run(&config(
        ExperimentKind::Bridge,
        &out,
        &[("law", "pm1"), ("n", "8"), ("samples", "2000"), ("keep_paths", "3"), ("seed", "1")],
    ))
    .unwrap();
    let tests: Vec<&str> = r.manifest.reports.iter().map(|e| e.test.as_str()).collect();
    assert!(tests.contains(&"exact_covariance_identity"));
    assert!(tests.contains(&"bridge_covariance"));
    let paths = fs::read_to_string(out.join("paths_n8.csv")).unwrap();
    assert!(paths.starts_with("sample,k,index,t,y1\n0,8,0,0,0\n"));
    assert_eq!(paths.lines().count(), 1 + 3 * 9);
    let marg = fs::read_to_string(out.join("marginals_n8.csv")).unwrap();
    assert!(marg.starts_with("i,x1,prob\n0,0,1\n1,-1,1/2\n1,1,1/2\n"));
    for f in &r.manifest.files {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn free_pinned_bridge_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fp");
    let r = run(&config(
        ExperimentKind::Bridge,
        &out,
        &[("law", "two-speed"), ("n", "20"), ("a", "1,0"), ("samples", "3000"), ("seed", "2")],
    ))
    .unwrap();
    let mass = r.reports.iter().find(|r| r.test == "pinning_window_mass").unwrap();
    assert!(mass.pass, "{}", mass.to_json());
    let k_law = fs::read_to_string(out.join("k_law_n20.csv")).unwrap();
    let total: f64 = k_law.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}
