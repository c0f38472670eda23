//! Deterministic text output: 12 significant digits, header rows.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// `x` with 12 significant digits, fixed notation for moderate exponents.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp) as usize, x);
        trim(&s).to_string()
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// JSON number rounded to 12 significant digits.
pub fn json_num(x: f64) -> serde_json::Value {
    num(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn json_opt(x: Option<f64>) -> serde_json::Value {
    x.map_or(serde_json::Value::Null, json_num)
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Csv { buf }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: impl IntoIterator<Item = S>) {
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            let _ = write!(self.buf, "{}", c.as_ref());
        }
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.buf)
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    s.push('\n');
    fs::write(path, s)
}
