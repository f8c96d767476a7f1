//! Plain-text step laws: one atom per line, `dx dy ... : p`, with `p` either
//! `num/den` or a decimal. Blank lines and `#` comments are ignored.

use crate::lattice_walk::StepLaw;
use crate::prob::{format_rational, ProbLiteral, Rational};
use crate::{Error, Result};

/// A parsed law: exact when every probability was written as a rational.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedLaw {
    Exact(StepLaw<Rational>),
    Float(StepLaw<f64>),
}

impl ParsedLaw {
    pub fn to_f64(&self) -> StepLaw<f64> {
        match self {
            ParsedLaw::Exact(l) => l.to_f64(),
            ParsedLaw::Float(l) => l.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParsedLaw::Exact(l) => l.dim(),
            ParsedLaw::Float(l) => l.dim(),
        }
    }
}

pub fn parse_step_law(text: &str) -> Result<ParsedLaw> {
    let mut rows: Vec<(Vec<i64>, ProbLiteral)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (coords, prob) = line
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `coords : p`", lineno + 1)))?;
        let point = coords
            .split_whitespace()
            .map(|c| c.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        rows.push((point, ProbLiteral::parse(prob)?));
    }
    let dim = rows.first().map(|(p, _)| p.len()).ok_or(Error::EmptySupport)?;
    if rows.iter().all(|(_, p)| matches!(p, ProbLiteral::Exact(_))) {
        let atoms = rows.into_iter().map(|(x, p)| (x, p.to_rational())).collect();
        StepLaw::new(dim, atoms).map(ParsedLaw::Exact)
    } else {
        let atoms = rows.into_iter().map(|(x, p)| (x, p.to_f64())).collect();
        StepLaw::new(dim, atoms).map(ParsedLaw::Float)
    }
}

fn join(point: &[i64]) -> String {
    point.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn format_exact_law(law: &StepLaw<Rational>) -> String {
    law.atoms()
        .iter()
        .map(|a| format!("{} : {}\n", join(&a.point), format_rational(&a.prob)))
        .collect()
}

pub fn format_float_law(law: &StepLaw<f64>) -> String {
    law.atoms()
        .iter()
        .map(|a| format!("{} : {}\n", join(&a.point), a.prob))
        .collect()
}

/// Built-in laws, all exact.
///
/// | name        | law |
/// |-------------|-----|
/// | `pm1`       | `+-1` with probability 1/2 each |
/// | `lazy`      | `0` w.p. 1/2, `+-1` w.p. 1/4 each |
/// | `drift`     | `+1` w.p. 2/3, `-1` w.p. 1/3 |
/// | `tilted`    | `{-1, 0, 1}` uniform tilted by base 2: `1/7, 2/7, 4/7` |
/// | `diag`      | `(1, +-1)` w.p. 1/2 each |
/// | `two-speed` | forward 1 or 2 (1/2 each) times transverse lazy `{-1: 1/4, 0: 1/2, 1: 1/4}` |
pub fn named_law(name: &str) -> Option<StepLaw<Rational>> {
    let r = |n: i64, d: i64| Rational::new(n.into(), d.into());
    let law = match name {
        "pm1" => StepLaw::one_dim(vec![(1, r(1, 2)), (-1, r(1, 2))]),
        "lazy" => StepLaw::one_dim(vec![(0, r(1, 2)), (1, r(1, 4)), (-1, r(1, 4))]),
        "drift" => StepLaw::one_dim(vec![(1, r(2, 3)), (-1, r(1, 3))]),
        "tilted" => StepLaw::one_dim(vec![(-1, r(1, 7)), (0, r(2, 7)), (1, r(4, 7))]),
        "diag" => StepLaw::new(2, vec![(vec![1, 1], r(1, 2)), (vec![1, -1], r(1, 2))]),
        "two-speed" => {
            let mut atoms = Vec::new();
            for t in [1, 2] {
                for (y, w) in [(-1, r(1, 8)), (0, r(1, 4)), (1, r(1, 8))] {
                    atoms.push((vec![t, y], w));
                }
            }
            StepLaw::new(2, atoms)
        }
        _ => return None,
    };
    law.ok()
}

pub const NAMED_LAWS: &[&str] = &["pm1", "lazy", "drift", "tilted", "diag", "two-speed"];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_exact_and_float_laws() {
        let exact = parse_step_law("# walk\n1 : 1/2\n-1 : 1/2\n").unwrap();
        assert_eq!(exact, ParsedLaw::Exact(named_law("pm1").unwrap()));
        let float = parse_step_law("0 0 : 0.5\n1 0 : 0.25\n0 1 : 0.25").unwrap();
        assert!(matches!(float, ParsedLaw::Float(ref l) if l.dim() == 2));
        assert!(matches!(parse_step_law("1 : 0.5\n-1 : 0.6"), Err(Error::ProbabilitySumMismatch(_))));
        assert!(parse_step_law("1 0.5").is_err());
    }

    #[test]
    fn named_laws_are_valid() {
        for name in NAMED_LAWS {
            assert!(named_law(name).is_some(), "{name}");
        }
        assert!(named_law("nope").is_none());
    }

    proptest! {
        #[test]
        fn exact_text_round_trip(
            pts in prop::collection::btree_set(prop::collection::vec(-9i64..=9, 2), 1..6),
            w in prop::collection::vec(1i64..20, 6),
        ) {
            let pts: Vec<_> = pts.into_iter().collect();
            let total: i64 = w[..pts.len()].iter().sum();
            let atoms = pts.into_iter().zip(&w).map(|(p, &k)| (p, Rational::new(k.into(), total.into()))).collect();
            let law = StepLaw::new(2, atoms).unwrap();
            let text = format_exact_law(&law);
            prop_assert_eq!(parse_step_law(&text).unwrap(), ParsedLaw::Exact(law));
        }
    }
}
