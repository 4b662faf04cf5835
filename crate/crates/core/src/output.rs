//! Deterministic on-disk artifacts.
//!
//! Floats are written with 12 significant digits so repeated runs produce
//! identical bytes. Artifacts are staged in memory and written only after
//! every computation has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Formats `x` like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rewrites every float in a JSON tree to its 12-significant-digit value.
fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let rounded: f64 = fmt_float(x).parse().unwrap_or(x);
            if let Some(num) = serde_json::Number::from_f64(rounded) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Small CSV builder; fields containing delimiters or quotes are quoted.
#[derive(Debug, Default, Clone)]
pub struct CsvText {
    buf: String,
}

impl CsvText {
    pub fn with_header(cols: &[&str]) -> Self {
        let mut c = Self::default();
        c.row(cols.iter().copied());
        c
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let f = f.as_ref();
            if f.contains([',', '"', '\n', '\r']) {
                let _ = write!(self.buf, "\"{}\"", f.replace('"', "\"\""));
            } else {
                self.buf.push_str(f);
            }
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Files staged for writing under one output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, relative: impl Into<PathBuf>, contents: String) {
        self.files.push((relative.into(), contents));
    }

    pub fn add_json<T: Serialize + ?Sized>(&mut self, relative: impl Into<PathBuf>, value: &T) -> Result<()> {
        let text = to_json(value)?;
        self.add(relative, text);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, relative: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(relative))
            .map(|(_, c)| c.as_str())
    }

    pub fn write_all(&self, root: &Path) -> Result<()> {
        for (rel, contents) in &self.files {
            let path = root.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-5, "1e-05"),
            (0.0001, "0.0001"),
            (1.5e-9, "1.5e-09"),
            (1e100, "1e+100"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_float(x), want, "{x}");
        }
    }

    #[test]
    fn csv_quoting() {
        let mut c = CsvText::with_header(&["a", "b"]);
        c.row(["x,y", "say \"hi\""]);
        assert_eq!(c.into_string(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn json_rounding_and_null() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: f64,
            c: u32,
        }
        let s = to_json(&S { a: 1.0 / 3.0, b: f64::NAN, c: 7 }).unwrap();
        assert!(s.contains("0.333333333333"));
        assert!(s.contains("\"b\": null"));
        assert!(s.contains("\"c\": 7"));
    }
}
