//! Artifact writing with fixed float formatting.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// `%.9g`-style formatting: nine significant digits, trailing zeros dropped.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to the value printed by [`fmt_sig9`], for JSON artifacts.
pub fn round_sig9(x: f64) -> f64 {
    fmt_sig9(x).parse().unwrap_or(x)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::data(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes a CSV with `header` and pre-formatted rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::data(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::data(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(path, e))?;
    fs::write(path, bytes).map_err(|e| CliError::data(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.824), "0.824");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_sig9(-2.5e-7), "-2.5e-7");
        assert_eq!(fmt_sig9(1e-4), "0.0001");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(2.0), "2");
    }

    #[test]
    fn rounding_matches_printed_value() {
        assert_eq!(round_sig9(0.1234567891234), 0.123456789);
        assert_eq!(round_sig9(7.0), 7.0);
    }

    #[test]
    fn single_row_csv_has_two_lines() {
        let dir = std::env::temp_dir().join(format!("jeanie-csv-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        write_csv(&path, &["a", "b"], &[vec!["1".into(), "x".into()]]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n1,x\n");
        fs::remove_dir_all(&dir).unwrap();
    }
}
