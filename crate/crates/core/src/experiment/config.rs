use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::analysis::default_grid;
use crate::prob::{ProbLiteral, Rational};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Bridge,
    Percolation,
    Clt,
    Xi,
    RenewalOracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Bridge,
        ExperimentKind::Percolation,
        ExperimentKind::Clt,
        ExperimentKind::Xi,
        ExperimentKind::RenewalOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bridge => "bridge",
            ExperimentKind::Percolation => "percolation",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Xi => "xi",
            ExperimentKind::RenewalOracle => "renewal-oracle",
        }
    }

    /// Keys that apply to this kind, besides `kind`, `len` and the common
    /// `seed`, `samples` and `out`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Bridge => &["law", "n", "a", "M", "grid", "first_shard", "keep_paths", "tolerance"],
            ExperimentKind::Percolation => &[
                "d",
                "p",
                "n",
                "a",
                "W",
                "grid",
                "first_shard",
                "tolerance",
                "fallback_n",
                "max_attempts",
                "w_check",
            ],
            ExperimentKind::Clt => &["law", "n", "tolerance"],
            ExperimentKind::Xi => &["d", "p", "n", "a"],
            ExperimentKind::RenewalOracle => &["d", "p", "n", "a", "W"],
        }
    }

    fn accepts(self, key: &str) -> bool {
        matches!(key, "kind" | "len" | "seed" | "samples" | "out") || self.keys().contains(&key)
    }

    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            ExperimentKind::Bridge => &[("law", "pm1"), ("n", "400"), ("samples", "100000"), ("M", "3")],
            ExperimentKind::Percolation => {
                &[("d", "2"), ("p", "0.45"), ("n", "12"), ("W", "12"), ("samples", "5000"), ("tolerance", "0.15")]
            }
            ExperimentKind::Clt => &[("law", "lazy"), ("n", "16,64,256"), ("tolerance", "0.02")],
            ExperimentKind::Xi => &[("d", "2"), ("p", "0.2"), ("n", "2,3,4,5,6,7,8"), ("samples", "200000")],
            ExperimentKind::RenewalOracle => &[("d", "2"), ("p", "9/20"), ("n", "3"), ("W", "1")],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bridge" => Ok(ExperimentKind::Bridge),
            "percolation" | "perc" => Ok(ExperimentKind::Percolation),
            "clt" => Ok(ExperimentKind::Clt),
            "xi" => Ok(ExperimentKind::Xi),
            "renewal-oracle" | "renewal" => Ok(ExperimentKind::RenewalOracle),
            other => Err(Error::Config(format!("unknown experiment kind {other:?}"))),
        }
    }
}

/// Every key a config file or override may set.
pub const CONFIG_KEYS: &[&str] = &[
    "kind",
    "law",
    "d",
    "p",
    "n",
    "len",
    "a",
    "samples",
    "seed",
    "W",
    "M",
    "grid",
    "out",
    "first_shard",
    "keep_paths",
    "tolerance",
    "fallback_n",
    "max_attempts",
    "w_check",
];

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Named step law or path to a law file.
    pub law: String,
    pub d: usize,
    pub p: ProbLiteral,
    pub n: Vec<u64>,
    /// Pinning direction; `None` means the walk is pinned at the origin
    /// (bridges) or `a = e_1` (percolation).
    pub direction: Option<Vec<i64>>,
    pub samples: u64,
    pub seed: u64,
    pub width: u32,
    pub window: f64,
    pub grid: Vec<f64>,
    pub out: PathBuf,
    pub first_shard: u64,
    pub keep_paths: u64,
    pub tolerance: Option<f64>,
    pub fallback_n: Option<u64>,
    pub max_attempts: u64,
    pub w_check: bool,
}

/// Splits `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for `kind`, then the file's pairs, then `overrides`; later
    /// values win. `len` is an alias of `n`.
    pub fn resolve(kind: ExperimentKind, file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in kind.defaults() {
            map.insert(k.to_string(), v.to_string());
        }
        let file_pairs = file.map(parse_pairs).transpose()?.unwrap_or_default();
        for (k, v) in file_pairs.iter().chain(overrides) {
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
            if !kind.accepts(k) {
                return Err(Error::Config(format!("key {k:?} does not apply to {kind} runs")));
            }
            if k == "kind" {
                let named: ExperimentKind = v.parse()?;
                if named != kind {
                    return Err(Error::Config(format!("config is for {named}, not {kind}")));
                }
                continue;
            }
            let key = if k == "len" { "n" } else { k.as_str() };
            map.insert(key.to_string(), v.clone());
        }
        Self::from_map(kind, &map)
    }

    /// Reads a config file whose `kind` key names the experiment.
    pub fn from_text(text: &str) -> Result<Self> {
        let kind = parse_pairs(text)?
            .into_iter()
            .find(|(k, _)| k == "kind")
            .ok_or_else(|| Error::Config("missing key \"kind\"".into()))?
            .1
            .parse()?;
        Self::resolve(kind, Some(text), &[])
    }

    fn from_map(kind: ExperimentKind, map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let d = get("d").map(|v| num("d", v)).transpose()?.unwrap_or(1);
        let p = match get("p") {
            Some(v) => ProbLiteral::parse(v).map_err(|e| Error::Config(format!("p: {e}")))?,
            None => ProbLiteral::Float(0.0),
        };
        let cfg = ExperimentConfig {
            kind,
            law: get("law").unwrap_or("pm1").to_string(),
            d,
            p,
            n: list("n", get("n").unwrap_or(""))?,
            direction: get("a").map(|v| list("a", v)).transpose()?,
            samples: get("samples").map(|v| num("samples", v)).transpose()?.unwrap_or(1),
            seed: get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0),
            width: get("W").map(|v| num("W", v)).transpose()?.unwrap_or(0),
            window: get("M").map(|v| num("M", v)).transpose()?.unwrap_or(3.0),
            grid: match get("grid") {
                None | Some("default") => default_grid(),
                Some(v) => list("grid", v)?,
            },
            out: PathBuf::from(get("out").map(str::to_string).unwrap_or_else(|| format!("runs/{kind}"))),
            first_shard: get("first_shard").map(|v| num("first_shard", v)).transpose()?.unwrap_or(0),
            keep_paths: get("keep_paths").map(|v| num("keep_paths", v)).transpose()?.unwrap_or(100),
            tolerance: get("tolerance").map(|v| num("tolerance", v)).transpose()?,
            fallback_n: get("fallback_n").map(|v| num("fallback_n", v)).transpose()?,
            max_attempts: get("max_attempts")
                .map(|v| num("max_attempts", v))
                .transpose()?
                .unwrap_or(crate::percolation::DEFAULT_ATTEMPT_BUDGET),
            w_check: get("w_check").map(|v| num("w_check", v)).transpose()?.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be a non-empty list of positive integers".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        let p = self.p.to_f64();
        if !(0.0..=1.0).contains(&p) {
            return bad(format!("p = {p} is not a probability"));
        }
        if self.grid.len() < 2
            || self.grid[0] != 0.0
            || *self.grid.last().unwrap() != 1.0
            || self.grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("grid must increase strictly from 0 to 1".into());
        }
        if !(self.window > 0.0) {
            return bad("M must be positive".into());
        }
        if self.tolerance.is_some_and(|t| !(t >= 0.0)) {
            return bad("tolerance must be non-negative".into());
        }
        match self.kind {
            ExperimentKind::Percolation | ExperimentKind::Xi | ExperimentKind::RenewalOracle => {
                if !(2..=4).contains(&self.d) {
                    return bad(format!("d = {} outside 2..=4", self.d));
                }
                if self.d == 2 && p >= 0.5 {
                    return bad(format!("p = {p} is not subcritical in d = 2"));
                }
                if let Some(a) = &self.direction {
                    if a.len() != self.d || a.iter().all(|v| *v == 0) {
                        return bad(format!("direction {a:?} is not a non-zero vector in d = {}", self.d));
                    }
                }
            }
            ExperimentKind::Bridge | ExperimentKind::Clt => {}
        }
        if self.kind == ExperimentKind::Xi && p <= 0.0 {
            return bad("xi needs p > 0".into());
        }
        if self.kind == ExperimentKind::RenewalOracle && !matches!(self.p, ProbLiteral::Exact(_)) {
            return bad("renewal-oracle needs p as a fraction num/den".into());
        }
        if self.first_shard != 0 && !matches!(self.kind, ExperimentKind::Bridge | ExperimentKind::Percolation) {
            return bad(format!("{} runs are not sharded", self.kind));
        }
        Ok(())
    }

    /// Exact value of `p`.
    pub fn p_exact(&self) -> Rational {
        self.p.to_rational()
    }

    /// Direction with `e_1` as the default.
    pub fn direction_or_axis(&self) -> Vec<i64> {
        self.direction.clone().unwrap_or_else(|| {
            let mut a = vec![0; self.d];
            a[0] = 1;
            a
        })
    }

    /// All effective settings as sorted `key=value` pairs.
    pub fn pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("kind", self.kind.to_string());
        put("law", self.law.clone());
        put("d", self.d.to_string());
        put(
            "p",
            match &self.p {
                ProbLiteral::Exact(r) => crate::prob::format_rational(r),
                ProbLiteral::Float(f) => f.to_string(),
            },
        );
        put("n", join(&self.n));
        if let Some(a) = &self.direction {
            put("a", join(a));
        }
        put("samples", self.samples.to_string());
        put("seed", self.seed.to_string());
        put("W", self.width.to_string());
        put("M", self.window.to_string());
        put("grid", join(&self.grid));
        put("out", self.out.display().to_string());
        put("first_shard", self.first_shard.to_string());
        put("keep_paths", self.keep_paths.to_string());
        if let Some(t) = self.tolerance {
            put("tolerance", t.to_string());
        }
        if let Some(n) = self.fallback_n {
            put("fallback_n", n.to_string());
        }
        put("max_attempts", self.max_attempts.to_string());
        put("w_check", self.w_check.to_string());
        m.retain(|k, _| self.kind.accepts(k));
        m
    }

    /// The config file that reproduces this run.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Settings that must agree for two runs to be pooled as shards.
    pub fn merge_key(&self) -> String {
        self.pairs()
            .into_iter()
            .filter(|(k, _)| !matches!(k.as_str(), "samples" | "out" | "first_shard" | "keep_paths" | "w_check"))
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}
