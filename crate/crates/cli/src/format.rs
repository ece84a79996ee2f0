use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// Decimal with 12 significant digits, trailing zeros trimmed.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// In-memory CSV table.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.width);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(-123456.789012345), "-123456.789012");
        assert_eq!(num(2.5e-7), "0.00000025");
        assert_eq!(num(1e15), "1000000000000000");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(-1e-30 * 0.0), "0");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["k", "p"]);
        c.row(&["1".into(), num(0.5)]);
        assert_eq!(c.as_str(), "k,p\n1,0.5\n");
    }
}
