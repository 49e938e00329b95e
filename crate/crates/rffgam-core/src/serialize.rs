//! Line-oriented text serialization with lossless float round-trips.
//!
//! Model files are self-describing structured text: named scalar fields,
//! vectors, and matrices, grouped under `[section]` headers. Every real is
//! written with 17 significant digits, which round-trips `f64` bitwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::error::{Result, RffGamError};

/// Format a float with 17 significant digits (lossless for f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Incrementally build a model document.
pub struct DocWriter {
    buf: String,
}

impl DocWriter {
    pub fn new(magic: &str, schema_version: u32) -> Self {
        let mut buf = String::new();
        let _ = writeln!(buf, "{magic} v{schema_version}");
        DocWriter { buf }
    }

    pub fn section(&mut self, name: &str) {
        let _ = writeln!(self.buf, "[{name}]");
    }

    pub fn field_str(&mut self, key: &str, value: &str) {
        debug_assert!(!value.contains('\n'));
        let _ = writeln!(self.buf, "{key} = {value}");
    }

    pub fn field_u64(&mut self, key: &str, value: u64) {
        let _ = writeln!(self.buf, "{key} = {value}");
    }

    pub fn field_f64(&mut self, key: &str, value: f64) {
        let _ = writeln!(self.buf, "{key} = {}", fmt_f64(value));
    }

    pub fn vector(&mut self, key: &str, v: &[f64]) {
        let _ = writeln!(self.buf, "{key} len {}", v.len());
        let mut line = String::new();
        for x in v {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&fmt_f64(*x));
        }
        let _ = writeln!(self.buf, "{line}");
    }

    pub fn matrix(&mut self, key: &str, m: &Array2<f64>) {
        let _ = writeln!(self.buf, "{key} rows {} cols {}", m.nrows(), m.ncols());
        for row in m.rows() {
            let mut line = String::new();
            for x in row {
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&fmt_f64(*x));
            }
            let _ = writeln!(self.buf, "{line}");
        }
    }

    /// Complex vector as re/im pairs, one element per line.
    pub fn complex_vector(&mut self, key: &str, v: &Array1<Complex64>) {
        let _ = writeln!(self.buf, "{key} clen {}", v.len());
        for z in v {
            let _ = writeln!(self.buf, "{} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Parsed document: sections of fields, vectors, and matrices.
#[derive(Debug, Default)]
pub struct Section {
    pub fields: BTreeMap<String, String>,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub matrices: BTreeMap<String, Array2<f64>>,
    pub complex_vectors: BTreeMap<String, Array1<Complex64>>,
}

pub struct DocReader {
    pub magic: String,
    pub schema_version: u32,
    sections: BTreeMap<String, Section>,
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| RffGamError::Parse(format!("bad float '{tok}'")))
}

impl DocReader {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        let header = lines
            .next()
            .ok_or_else(|| RffGamError::Parse("empty model document".into()))?;
        let (magic, ver) = header
            .rsplit_once(" v")
            .ok_or_else(|| RffGamError::Parse(format!("bad header '{header}'")))?;
        let schema_version: u32 = ver
            .parse()
            .map_err(|_| RffGamError::Parse(format!("bad schema version '{ver}'")))?;

        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        while let Some(line) = lines.next() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            let sec_name = current
                .clone()
                .ok_or_else(|| RffGamError::Parse(format!("content before any section: '{line}'")))?;
            let sec = sections.get_mut(&sec_name).unwrap();

            if let Some((key, value)) = line.split_once(" = ") {
                sec.fields.insert(key.to_string(), value.to_string());
            } else if let Some((key, dims)) = line.split_once(" rows ") {
                let (r, c) = dims
                    .split_once(" cols ")
                    .ok_or_else(|| RffGamError::Parse(format!("bad matrix header '{line}'")))?;
                let rows: usize = r
                    .parse()
                    .map_err(|_| RffGamError::Parse(format!("bad row count '{r}'")))?;
                let cols: usize = c
                    .parse()
                    .map_err(|_| RffGamError::Parse(format!("bad col count '{c}'")))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let row_line = lines
                        .next()
                        .ok_or_else(|| RffGamError::Parse("truncated matrix block".into()))?;
                    for tok in row_line.split_ascii_whitespace() {
                        data.push(parse_f64(tok)?);
                    }
                }
                if data.len() != rows * cols {
                    return Err(RffGamError::Parse(format!(
                        "matrix '{key}' expected {} values, got {}",
                        rows * cols,
                        data.len()
                    )));
                }
                let m = Array2::from_shape_vec((rows, cols), data)
                    .map_err(|e| RffGamError::Parse(e.to_string()))?;
                sec.matrices.insert(key.to_string(), m);
            } else if let Some((key, len)) = line.split_once(" clen ") {
                let n: usize = len
                    .parse()
                    .map_err(|_| RffGamError::Parse(format!("bad length '{len}'")))?;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = lines
                        .next()
                        .ok_or_else(|| RffGamError::Parse("truncated complex vector".into()))?;
                    let t: Vec<&str> = l.split_ascii_whitespace().collect();
                    if t.len() != 2 {
                        return Err(RffGamError::Parse(format!("bad complex entry '{l}'")));
                    }
                    v.push(Complex64::new(parse_f64(t[0])?, parse_f64(t[1])?));
                }
                sec.complex_vectors
                    .insert(key.to_string(), Array1::from_vec(v));
            } else if let Some((key, len)) = line.split_once(" len ") {
                let n: usize = len
                    .parse()
                    .map_err(|_| RffGamError::Parse(format!("bad length '{len}'")))?;
                let first = lines
                    .next()
                    .ok_or_else(|| RffGamError::Parse("truncated vector block".into()))?;
                let mut v = Vec::with_capacity(n);
                for tok in first.split_ascii_whitespace() {
                    v.push(parse_f64(tok)?);
                }
                if v.len() != n {
                    return Err(RffGamError::Parse(format!(
                        "vector '{key}' expected {n} values, got {}",
                        v.len()
                    )));
                }
                sec.vectors.insert(key.to_string(), v);
            } else {
                return Err(RffGamError::Parse(format!("unparseable line '{line}'")));
            }
        }
        Ok(DocReader {
            magic: magic.to_string(),
            schema_version,
            sections,
        })
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| RffGamError::Parse(format!("missing section [{name}]")))
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// Names of sections matching a prefix, in document (sorted) order.
    pub fn sections_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.sections
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }
}

impl Section {
    pub fn str_field(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| RffGamError::Parse(format!("missing field '{key}'")))
    }

    pub fn u64_field(&self, key: &str) -> Result<u64> {
        self.str_field(key)?
            .parse()
            .map_err(|_| RffGamError::Parse(format!("field '{key}' is not an integer")))
    }

    pub fn f64_field(&self, key: &str) -> Result<f64> {
        parse_f64(self.str_field(key)?)
    }

    pub fn vector(&self, key: &str) -> Result<&Vec<f64>> {
        self.vectors
            .get(key)
            .ok_or_else(|| RffGamError::Parse(format!("missing vector '{key}'")))
    }

    pub fn matrix(&self, key: &str) -> Result<&Array2<f64>> {
        self.matrices
            .get(key)
            .ok_or_else(|| RffGamError::Parse(format!("missing matrix '{key}'")))
    }

    pub fn complex_vector(&self, key: &str) -> Result<&Array1<Complex64>> {
        self.complex_vectors
            .get(key)
            .ok_or_else(|| RffGamError::Parse(format!("missing complex vector '{key}'")))
    }
}
