use std::io::{Read, Write};

use super::{CoverageRecord, HarnessError, SweepRow, Trace};
use crate::bootstrap::CiMethod;

pub const TRACE_HEADER: &str = "t,estimate,q_lo,q_hi,se_lo,se_hi,true_value";
pub const COVERAGE_HEADER: &str = "t,method,coverage,mean_width,mean_abs_error,repeats";
pub const SWEEP_HEADER: &str = "param_name,param_value,t,method,coverage,mean_width";
pub const REGRESSION_HEADER: &str = "method,slope,intercept,points,floor";

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRow {
    pub method: CiMethod,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Additive floor used inside the logarithm.
    pub floor: f64,
}

/// Shortest `%.17g`-style rendering: 17 significant digits, trailing zeros
/// removed, scientific notation outside `[1e-5, 1e17)`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if !(-5..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        let esign = if exp < 0 { '-' } else { '+' };
        let body = if frac.is_empty() { digits[..1].to_string() } else { format!("{}.{}", &digits[..1], frac) };
        return format!("{sign}{body}e{esign}{:02}", exp.abs());
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), format!("{}{}", "0".repeat((-exp - 1) as usize), digits))
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &Trace) -> Result<(), HarnessError> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            format_real(r.estimate),
            format_real(r.quantile.lower),
            format_real(r.quantile.upper),
            format_real(r.se.lower),
            format_real(r.se.upper),
            r.true_value.map(format_real).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn write_coverage_csv<W: Write>(mut w: W, records: &[CoverageRecord]) -> Result<(), HarnessError> {
    writeln!(w, "{COVERAGE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t,
            r.method,
            format_real(r.coverage),
            format_real(r.mean_width),
            format_real(r.mean_abs_error),
            r.repeats
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.param_name,
            format_real(r.param_value),
            r.t,
            r.method,
            format_real(r.coverage),
            format_real(r.mean_width)
        )?;
    }
    Ok(())
}

pub fn write_regression_csv<W: Write>(mut w: W, rows: &[RegressionRow]) -> Result<(), HarnessError> {
    writeln!(w, "{REGRESSION_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.method,
            format_real(r.slope),
            format_real(r.intercept),
            r.points,
            format_real(r.floor)
        )?;
    }
    Ok(())
}

/// Reads a table written by [`write_coverage_csv`].
pub fn read_coverage_csv<R: Read>(reader: R) -> Result<Vec<CoverageRecord>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != COVERAGE_HEADER {
        return Err(HarnessError::Config(format!("coverage table header must be {COVERAGE_HEADER:?}")));
    }
    let bad = |what: &str, v: &str| HarnessError::Config(format!("coverage table: cannot parse {what} {v:?}"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what, &rec[i]));
        let method = match &rec[1] {
            "quantile" => CiMethod::Quantile,
            "se" => CiMethod::Se,
            other => return Err(bad("method", other)),
        };
        out.push(CoverageRecord {
            t: rec[0].parse().map_err(|_| bad("t", &rec[0]))?,
            method,
            coverage: num(2, "coverage")?,
            mean_width: num(3, "mean_width")?,
            mean_abs_error: num(4, "mean_abs_error")?,
            repeats: rec[5].parse().map_err(|_| bad("repeats", &rec[5]))?,
        });
    }
    Ok(out)
}
