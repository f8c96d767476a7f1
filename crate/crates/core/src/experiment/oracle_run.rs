use serde_json::json;

use crate::analysis::{Comparison, TestReport};
use crate::bridge::local_clt_profile;
use crate::experiment::bridge_run::load_law;
use crate::experiment::run::{claim_of, Outputs};
use crate::experiment::ExperimentConfig;
use crate::lattice_walk::ParsedLaw;
use crate::percolation::{enumerate_slab, estimate_xi, write_connectivity_csv, SlabSpec};
use crate::prob::format_rational;
use crate::Result;

fn join_point(x: &[i64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn run_clt(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let law = load_law(&cfg.law)?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let r = match &law {
            ParsedLaw::Exact(l) => local_clt_profile(l, n as usize)?,
            ParsedLaw::Float(l) => local_clt_profile(l, n as usize)?,
        };
        out.write_with(&format!("clt_profile_n{n}.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["x", "scaled_probability", "normal_density"])?;
            for (x, p, g) in &r.points {
                w.write_record([x.to_string(), p.to_string(), g.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        rows.push((n, r.sup_distance, r.argmax, r.span.h));
    }
    out.write_with("clt.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["n", "sup_distance", "argmax", "span"])?;
        for (n, d, x, h) in &rows {
            w.write_record([n.to_string(), d.to_string(), x.to_string(), h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    rows.sort_by_key(|r| r.0);
    let distances: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let ns: Vec<u64> = rows.iter().map(|r| r.0).collect();
    let not_decreasing = distances.windows(2).filter(|w| w[1] >= w[0]).count();
    let r = TestReport::new(
        "local_clt_monotone",
        not_decreasing as f64,
        0.0,
        Comparison::AtMost,
        0,
        json!({"null": "sup distance strictly decreasing in n", "n": ns, "distance": distances}),
    );
    out.report(claim_of(&r.test), r, None)?;
    let (n_max, d_max) = (ns[ns.len() - 1], distances[distances.len() - 1]);
    let r = TestReport::new(
        "local_clt_distance",
        d_max,
        cfg.tolerance.unwrap_or(0.02),
        Comparison::AtMost,
        0,
        json!({"n": n_max}),
    );
    out.report(claim_of(&r.test), r, None)
}

pub(crate) fn run_xi(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let a = cfg.direction_or_axis();
    let est = estimate_xi(cfg.d, cfg.p.to_f64(), &a, &cfg.n, cfg.samples, cfg.seed)?;
    out.write_with("xi.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["n", "hits", "samples", "p_hat"])?;
        for p in &est.points {
            w.write_record([p.n.to_string(), p.hits.to_string(), p.samples.to_string(), p.p_hat.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.write_json("xi.json", &est)?;
    let excess = est.xi - est.path_bound;
    let z = if est.standard_error > 0.0 {
        excess / est.standard_error
    } else if excess <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let r = TestReport::new(
        "xi_path_bound",
        z,
        2.0,
        Comparison::AtMost,
        cfg.samples * cfg.n.len() as u64,
        json!({
            "null": "xi <= |a|_1 ln(1/p), statistic in standard errors",
            "xi": est.xi,
            "standard_error": est.standard_error,
            "path_bound": est.path_bound,
        }),
    );
    out.report(claim_of(&r.test), r, None)
}

pub(crate) fn run_renewal(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let a = cfg.direction_or_axis();
    for &n in &cfg.n {
        let label = format!("len{n}");
        let y: Vec<i64> = a.iter().map(|v| v * n as i64).collect();
        let slab = SlabSpec::new(cfg.p_exact(), a.clone(), vec![0; cfg.d], y, cfg.width)?;
        let en = enumerate_slab(&slab)?;
        out.write_with(&format!("connectivity_{label}.csv"), |buf| write_connectivity_csv(&en.connectivity(), buf))?;

        let checks = en.factorizations();
        out.write_with(&format!("factorization_{label}.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["pattern", "lhs", "rhs", "translated", "equal"])?;
            for c in &checks {
                let pattern = c.pattern.iter().map(|p| join_point(p)).collect::<Vec<_>>().join(";");
                w.write_record([
                    pattern,
                    format_rational(&c.lhs),
                    format_rational(&c.rhs),
                    c.translated.as_ref().map(format_rational).unwrap_or_default(),
                    (c.lhs == c.rhs).to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let unequal = checks.iter().filter(|c| c.lhs != c.rhs).count();
        let translated_unequal = checks.iter().filter(|c| !c.holds()).count();
        let r = TestReport::new(
            "renewal_factorization",
            unequal as f64,
            0.0,
            Comparison::AtMost,
            0,
            json!({
                "null": "pattern probability equals the product of f-connections over junction weights",
                "patterns": checks.len(),
                "translated_mismatches": translated_unequal,
                "len": n,
                "W": cfg.width,
            }),
        );
        out.report(claim_of(&r.test), r, Some(&label))?;

        let rel = en.renewal_relation()?;
        out.write_with(&format!("renewal_{label}.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            let mut header: Vec<String> = (1..=cfg.d).map(|j| format!("x{j}")).collect();
            header.extend(["lhs".into(), "rhs".into(), "translated".into()]);
            w.write_record(&header)?;
            for row in &rel.rows {
                let mut rec: Vec<String> = row.x.iter().map(|v| v.to_string()).collect();
                rec.extend([format_rational(&row.lhs), format_rational(&row.rhs), format_rational(&row.translated)]);
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        })?;
        let r = TestReport::new(
            "renewal_relation",
            rel.rows.iter().filter(|r| r.lhs != r.rhs).count() as f64,
            0.0,
            Comparison::AtMost,
            0,
            json!({
                "rows": rel.rows.len(),
                "max_truncation_discrepancy": rel.max_truncation_discrepancy,
            }),
        );
        out.report(claim_of(&r.test), r, Some(&label))?;
    }
    Ok(())
}
