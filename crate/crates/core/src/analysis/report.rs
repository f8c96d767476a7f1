use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Which side of the threshold passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

/// Outcome of one statistical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_samples: u64,
    pub details: Value,
    pub comparison: Comparison,
}

impl TestReport {
    /// `pass` is decided here from the statistic and threshold alone; a NaN
    /// statistic never passes.
    pub fn new(
        test: impl Into<String>,
        statistic: f64,
        threshold: f64,
        comparison: Comparison,
        n_samples: u64,
        details: Value,
    ) -> Self {
        let pass = match comparison {
            Comparison::AtMost => statistic <= threshold,
            Comparison::AtLeast => statistic >= threshold,
        };
        TestReport { test: test.into(), statistic, threshold, pass, n_samples, details, comparison }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fixed-width text table, one report per row.
pub fn render_table(reports: &[TestReport]) -> String {
    let width = reports.iter().map(|r| r.test.len()).max().unwrap_or(4).max(4);
    let mut out = format!("{:<width$}  {:>12}  {:>12}  {:>10}  result\n", "test", "statistic", "threshold", "samples");
    for r in reports {
        let cmp = match r.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        out.push_str(&format!(
            "{:<width$}  {:>12.6}  {}{:>10.6}  {:>10}  {}\n",
            r.test,
            r.statistic,
            cmp,
            r.threshold,
            r.n_samples,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}
