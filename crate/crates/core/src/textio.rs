//! Self-describing text documents used for instances, traces and sweep specs.
//!
//! ```text
//! # ppsm-instance v1
//! scalar stress_e 1.0000000000000000e0
//! text variant PPSM
//! vector demand 3
//! 1.0e0 2.0e0 3.0e0
//! matrix gm_eq 2 3
//! ...row 0...
//! ...row 1...
//! end
//! ```
//!
//! Reals are written with 17 significant digits, so a write/read cycle
//! reproduces every `f64` bit for bit. Infinite bounds are written as `inf`.

use crate::lp::Matrix;
use std::fmt::Write as _;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing entry `{0}`")]
    Missing(String),
    #[error("entry `{0}` has the wrong type")]
    WrongType(String),
    #[error("document kind `{found}` where `{expected}` was expected")]
    WrongKind { expected: String, found: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Scalar(f64),
    Text(String),
    Vector(Vec<f64>),
    Matrix(Matrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextDoc {
    pub kind: String,
    entries: Vec<(String, Entry)>,
}

pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn parse_real(tok: &str, line: usize) -> Result<f64, TextError> {
    tok.parse::<f64>().map_err(|_| TextError::Parse {
        line,
        msg: format!("bad real `{tok}`"),
    })
}

impl TextDoc {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(String, Entry)] {
        &self.entries
    }

    pub fn push(&mut self, name: &str, e: Entry) {
        self.entries.push((name.to_string(), e));
    }

    pub fn scalar(&mut self, name: &str, v: f64) {
        self.push(name, Entry::Scalar(v));
    }

    pub fn text(&mut self, name: &str, v: &str) {
        self.push(name, Entry::Text(v.to_string()));
    }

    pub fn vector(&mut self, name: &str, v: &[f64]) {
        self.push(name, Entry::Vector(v.to_vec()));
    }

    pub fn matrix(&mut self, name: &str, m: &Matrix) {
        self.push(name, Entry::Matrix(m.clone()));
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    fn req(&self, name: &str) -> Result<&Entry, TextError> {
        self.get(name).ok_or_else(|| TextError::Missing(name.to_string()))
    }

    pub fn get_scalar(&self, name: &str) -> Result<f64, TextError> {
        match self.req(name)? {
            Entry::Scalar(v) => Ok(*v),
            _ => Err(TextError::WrongType(name.into())),
        }
    }

    pub fn get_usize(&self, name: &str) -> Result<usize, TextError> {
        let v = self.get_scalar(name)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(TextError::WrongType(name.into()));
        }
        Ok(v as usize)
    }

    pub fn get_text(&self, name: &str) -> Result<&str, TextError> {
        match self.req(name)? {
            Entry::Text(v) => Ok(v),
            _ => Err(TextError::WrongType(name.into())),
        }
    }

    pub fn get_vector(&self, name: &str) -> Result<&[f64], TextError> {
        match self.req(name)? {
            Entry::Vector(v) => Ok(v),
            _ => Err(TextError::WrongType(name.into())),
        }
    }

    pub fn get_matrix(&self, name: &str) -> Result<&Matrix, TextError> {
        match self.req(name)? {
            Entry::Matrix(m) => Ok(m),
            _ => Err(TextError::WrongType(name.into())),
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<(), TextError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(TextError::WrongKind {
                expected: kind.into(),
                found: self.kind.clone(),
            })
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} v{}", self.kind, FORMAT_VERSION);
        let join = |v: &[f64]| v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(" ");
        for (name, e) in &self.entries {
            match e {
                Entry::Scalar(v) => {
                    let _ = writeln!(s, "scalar {name} {}", fmt_real(*v));
                }
                Entry::Text(t) => {
                    let _ = writeln!(s, "text {name} {t}");
                }
                Entry::Vector(v) => {
                    let _ = writeln!(s, "vector {name} {}", v.len());
                    let _ = writeln!(s, "{}", join(v));
                }
                Entry::Matrix(m) => {
                    let _ = writeln!(s, "matrix {name} {} {}", m.nrows(), m.ncols());
                    for r in m.rows() {
                        let _ = writeln!(s, "{}", join(r));
                    }
                }
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(src: &str) -> Result<Self, TextError> {
        let mut lines = src.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, msg: &str| TextError::Parse {
            line,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty document"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some("#") {
            return Err(err(1, "missing header"));
        }
        let kind = h.next().ok_or_else(|| err(1, "missing document kind"))?;
        let version = h
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| err(1, "missing version"))?;
        if version != FORMAT_VERSION {
            return Err(TextError::Version(version));
        }
        let mut doc = TextDoc::new(kind);
        let next_values = |lines: &mut dyn Iterator<Item = (usize, &str)>, len: usize| -> Result<Vec<f64>, TextError> {
            let (ln, l) = lines.next().ok_or_else(|| err(0, "unexpected end of document"))?;
            let v = l
                .split_whitespace()
                .map(|t| parse_real(t, ln))
                .collect::<Result<Vec<_>, _>>()?;
            if v.len() != len {
                return Err(err(ln, &format!("expected {len} values, found {}", v.len())));
            }
            Ok(v)
        };
        loop {
            let Some((ln, line)) = lines.next() else {
                return Err(err(0, "missing `end`"));
            };
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                return Ok(doc);
            }
            let mut parts = line.splitn(3, ' ');
            let tag = parts.next().unwrap_or_default();
            let name = parts.next().ok_or_else(|| err(ln, "missing entry name"))?;
            let rest = parts.next().unwrap_or_default();
            match tag {
                "scalar" => doc.scalar(name, parse_real(rest.trim(), ln)?),
                "text" => doc.text(name, rest),
                "vector" => {
                    let len: usize = rest.trim().parse().map_err(|_| err(ln, "bad vector length"))?;
                    let v = if len == 0 {
                        lines.next();
                        Vec::new()
                    } else {
                        next_values(&mut lines, len)?
                    };
                    doc.vector(name, &v);
                }
                "matrix" => {
                    let dims: Vec<usize> = rest
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| err(ln, "bad matrix shape")))
                        .collect::<Result<_, _>>()?;
                    let [rows, cols] = dims[..] else {
                        return Err(err(ln, "bad matrix shape"));
                    };
                    let mut m = Matrix::with_cols(cols);
                    for _ in 0..rows {
                        let r = if cols == 0 {
                            lines.next();
                            Vec::new()
                        } else {
                            next_values(&mut lines, cols)?
                        };
                        m.push_row(&r);
                    }
                    doc.matrix(name, &m);
                }
                _ => return Err(err(ln, &format!("unknown tag `{tag}`"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reals_round_trip_bit_exact(v in prop::collection::vec(any::<f64>().prop_filter("nan", |x| !x.is_nan()), 0..8)) {
            let mut d = TextDoc::new("probe");
            d.vector("v", &v);
            d.scalar("s", v.first().copied().unwrap_or(0.5));
            let back = TextDoc::parse(&d.render()).unwrap();
            let w = back.get_vector("v").unwrap();
            prop_assert_eq!(w.len(), v.len());
            for (a, b) in v.iter().zip(w) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn matrices_and_text() {
        let mut d = TextDoc::new("probe");
        d.matrix("m", &Matrix::from_rows(2, &[vec![1.0, f64::INFINITY], vec![-0.0, 1e-300]]));
        d.matrix("empty", &Matrix::with_cols(3));
        d.text("label", "two words");
        let back = TextDoc::parse(&d.render()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.get_text("label").unwrap(), "two words");
    }

    #[test]
    fn rejects_bad_header_and_version() {
        assert!(TextDoc::parse("hello\nend\n").is_err());
        assert!(matches!(TextDoc::parse("# x v9\nend\n"), Err(TextError::Version(9))));
    }
}
