//! TOML structure files.
//!
//! ```toml
//! states = ["rain", "dry"]
//! signals = ["cloudy", "clear"]
//! prior = ["0.5", "0.5"]
//! # one row per signal, one column per state
//! likelihood = [["0.7", "0.3"], ["0.3", "0.7"]]
//! # optional: replay posteriors, one row per signal
//! # posterior_override = [[...], [...]]
//! # normalize = true
//! ```
//!
//! Probabilities may be decimal strings or bare numbers. Without
//! `normalize = true`, any prior, likelihood column or posterior row that
//! misses the simplex by more than 1e-9 is rejected.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{InfoStructure, StateSpace};

pub const FILE_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Prob {
    Text(String),
    Float(f64),
    Int(i64),
}

type ProbMatrix = Spanned<Vec<Spanned<Vec<Spanned<Prob>>>>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStructure {
    states: Spanned<Vec<String>>,
    signals: Spanned<Vec<String>>,
    prior: Spanned<Vec<Spanned<Prob>>>,
    likelihood: ProbMatrix,
    posterior_override: Option<ProbMatrix>,
    #[serde(default)]
    normalize: bool,
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, span: std::ops::Range<usize>, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: Some(self.line(span.start)),
            message: message.into(),
        })
    }

    fn prob(&self, p: &Spanned<Prob>) -> Result<f64> {
        let x = match p.get_ref() {
            Prob::Text(s) => match s.trim().parse::<f64>() {
                Ok(x) => x,
                Err(_) => return self.err(p.span(), format!("`{s}` is not a number")),
            },
            Prob::Float(x) => *x,
            Prob::Int(i) => *i as f64,
        };
        if !(0.0..=1.0).contains(&x) {
            return self.err(p.span(), format!("probability {x} outside [0, 1]"));
        }
        Ok(x)
    }

    fn row(&self, row: &Spanned<Vec<Spanned<Prob>>>, len: usize, what: &str) -> Result<Vec<f64>> {
        if row.get_ref().len() != len {
            return self.err(
                row.span(),
                format!("{what} has {} entries, expected {len}", row.get_ref().len()),
            );
        }
        row.get_ref().iter().map(|p| self.prob(p)).collect()
    }

    fn matrix(
        &self,
        m: &ProbMatrix,
        rows: usize,
        cols: usize,
        what: &str,
    ) -> Result<DMatrix<f64>> {
        if m.get_ref().len() != rows {
            return self.err(
                m.span(),
                format!("{what} has {} rows, expected {rows}", m.get_ref().len()),
            );
        }
        let mut out = DMatrix::zeros(rows, cols);
        for (r, row) in m.get_ref().iter().enumerate() {
            for (c, x) in self.row(row, cols, &format!("{what} row {}", r + 1))?.into_iter().enumerate() {
                out[(r, c)] = x;
            }
        }
        Ok(out)
    }
}

/// Rescales `v` to sum to one, or rejects it if it misses by more than the
/// file tolerance and `normalize` is off.
fn fix_sum(v: &mut [f64], normalize: bool) -> std::result::Result<(), String> {
    let s: f64 = v.iter().sum();
    if normalize {
        if s <= 0.0 {
            return Err("entries sum to zero".into());
        }
        v.iter_mut().for_each(|x| *x /= s);
    } else if (s - 1.0).abs() > FILE_SUM_TOL {
        return Err(format!("entries sum to {s}, not 1"));
    } else {
        // within the file tolerance; tighten to the structure tolerance
        v.iter_mut().for_each(|x| *x /= s);
    }
    Ok(())
}

pub fn parse_structure(text: &str) -> Result<InfoStructure> {
    let raw: RawStructure = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map(|s| Source { text }.line(s.start)),
        message: e.message().to_string(),
    })?;
    let src = Source { text };
    let states = StateSpace::new(raw.states.get_ref().iter().cloned())
        .or_else(|e| src.err(raw.states.span(), e.to_string()))?;
    let l = states.len();
    let signals = raw.signals.get_ref().clone();
    let k = signals.len();
    if k == 0 {
        return src.err(raw.signals.span(), "no signals");
    }

    let mut prior = src.row(&raw.prior, l, "prior")?;
    if let Err(m) = fix_sum(&mut prior, raw.normalize) {
        return src.err(raw.prior.span(), format!("prior: {m}"));
    }

    let mut likelihood = src.matrix(&raw.likelihood, k, l, "likelihood")?;
    for c in 0..l {
        let mut col: Vec<f64> = likelihood.column(c).iter().copied().collect();
        if let Err(m) = fix_sum(&mut col, raw.normalize) {
            return src.err(
                raw.likelihood.span(),
                format!("likelihood column for state `{}`: {m}", states.labels()[c]),
            );
        }
        for (r, x) in col.into_iter().enumerate() {
            likelihood[(r, c)] = x;
        }
    }

    let structure = InfoStructure::new(states, signals, prior, likelihood)
        .or_else(|e| src.err(raw.states.span(), e.to_string()))?;

    match &raw.posterior_override {
        None => Ok(structure),
        Some(q) => {
            let mut post = src.matrix(q, k, l, "posterior_override")?;
            for r in 0..k {
                let mut row: Vec<f64> = post.row(r).iter().copied().collect();
                if let Err(m) = fix_sum(&mut row, raw.normalize) {
                    return src.err(q.get_ref()[r].span(), format!("posterior_override row {}: {m}", r + 1));
                }
                for (c, x) in row.into_iter().enumerate() {
                    post[(r, c)] = x;
                }
            }
            structure
                .with_posterior_override(post)
                .or_else(|e| src.err(q.span(), e.to_string()))
        }
    }
}

pub fn load_structure(path: &Path) -> Result<InfoStructure> {
    parse_structure(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BINARY: &str = r#"
states = ["w1", "w2"]
signals = ["h", "t"]
prior = ["0.5", "0.5"]
likelihood = [
  ["0.7", "0.3"],
  ["0.3", "0.7"],
]
"#;

    #[test]
    fn parses_binary_symmetric() {
        let s = parse_structure(BINARY).unwrap();
        let b = InfoStructure::binary_symmetric(0.7).unwrap();
        assert!((s.likelihood() - b.likelihood()).amax() < 1e-15);
        assert_eq!(s.prior(), b.prior());
        assert!((s.bayes_posterior("h").unwrap()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn numbers_and_override() {
        let text = r#"
states = ["a", "b"]
signals = ["x", "y"]
prior = [0.5, 0.5]
likelihood = [[1, 0.25], [0, 0.75]]
posterior_override = [[0.8, 0.2], [0.0, 1.0]]
"#;
        let s = parse_structure(text).unwrap();
        assert!(s.posterior_override().is_some());
        assert_eq!(s.posterior_at(0).unwrap().as_slice(), &[0.8, 0.2]);
    }

    #[test]
    fn off_simplex_rejected_with_line() {
        let text = BINARY.replace(r#"["0.3", "0.7"],"#, r#"["0.3", "0.8"],"#);
        match parse_structure(&text) {
            Err(Error::Parse { line: Some(5), message }) => assert!(message.contains("`w2`")),
            other => panic!("unexpected {other:?}"),
        }
        let text = text.replace("prior", "normalize = true\nprior");
        let s = parse_structure(&text).unwrap();
        assert!((s.likelihood()[(1, 1)] - 0.8 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn bad_number_reports_line() {
        let text = BINARY.replace(r#"prior = ["0.5", "0.5"]"#, r#"prior = ["0.5", "half"]"#);
        assert!(matches!(
            parse_structure(&text),
            Err(Error::Parse { line: Some(4), .. })
        ));
    }

    #[test]
    fn wrong_row_length() {
        let text = BINARY.replace(r#"["0.7", "0.3"],"#, r#"["0.7"],"#);
        assert!(matches!(
            parse_structure(&text),
            Err(Error::Parse { line: Some(6), .. })
        ));
    }

    #[test]
    fn syntax_error_has_line() {
        assert!(matches!(
            parse_structure("states = [\"a\"\nsignals = "),
            Err(Error::Parse { line: Some(_), .. })
        ));
    }
}
