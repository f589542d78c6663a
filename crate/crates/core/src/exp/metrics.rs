use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::ExperimentReport;
use crate::error::{Error, Result};

/// Nine significant digits, `%g` style: fixed notation for exponents in
/// [-5, 9), scientific otherwise, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s.to_owned()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

pub fn metrics_csv(report: &ExperimentReport) -> String {
    let q = report
        .records
        .iter()
        .find_map(|r| {
            r.observer_ratio
                .as_ref()
                .or(r.round_ratio.as_ref())
                .map(Vec::len)
        })
        .unwrap_or(0);
    let mut out = String::from("round,dropped,T_j,T_G,acc,acc_minority,loss");
    for c in 0..q {
        write!(out, ",ratio_{c}").unwrap();
    }
    out.push('\n');
    for r in &report.records {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            u8::from(r.dropped),
            opt(r.t_j),
            opt(r.t_g),
            format_sig9(r.accuracy),
            format_sig9(r.minority_accuracy),
            opt(r.train_loss)
        )
        .unwrap();
        // Observer estimate after the round.
        for c in 0..q {
            let v = r.observer_ratio.as_ref().map(|ratio| ratio[c]);
            write!(out, ",{}", opt(v)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_metrics(report: &ExperimentReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    write_file(csv_path, &metrics_csv(report))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_file(json_path, &json)
}

pub fn read_report(json_path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.838), "0.838");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(0.000123), "0.000123");
        assert_eq!(format_sig9(0.99999999999), "1");
    }

    #[test]
    fn sig9_round_trips_nine_digits() {
        for &v in &[
            std::f64::consts::PI,
            6.02214076e23,
            -1.602176634e-19,
            0.1 + 0.2,
        ] {
            let back: f64 = format_sig9(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-8, "{v}");
        }
    }
}
