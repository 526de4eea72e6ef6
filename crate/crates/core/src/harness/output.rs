//! CSV emission and parsing. Reals are written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{CompareRow, RunResult, SummaryRow};
use crate::error::{Error, Result};
use crate::trace::{Phase, RoundRecord, Trace};

pub const TRACE_HEADER: &str = "round,suboptimality,grad_norm_sq,dist_sq,grad_calls,value_calls,phase";
const SUMMARY_HEADER: &str = "label,method,seed,rounds,final_suboptimality,slope,grad_calls,value_calls";
const COMPARE_HEADER: &str = "rank,label,method,median_final_suboptimality,median_slope,grad_calls,value_calls";

/// 12 significant digits; empty for a missing value.
pub fn fmt_real(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.11e}"),
        None => String::new(),
    }
}

fn provenance(digest: &str) -> String {
    format!("# config_sha256={digest}\n")
}

pub fn trace_csv(digest: &str, trace: &Trace) -> String {
    let mut out = provenance(digest);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            fmt_real(r.suboptimality),
            fmt_real(Some(r.grad_norm_sq)),
            fmt_real(r.dist_sq),
            r.grad_oracle_calls,
            r.value_oracle_calls,
            r.phase
        );
    }
    out
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("trace line {line}: bad {what} `{s}`")))
}

fn parse_opt(s: &str, line: usize, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(s, line, what).map(Some)
    }
}

/// Parses a trace CSV; returns the provenance digest (if present) and records.
pub fn parse_trace_csv(text: &str) -> Result<(Option<String>, Vec<RoundRecord>)> {
    let mut digest = None;
    let mut records = Vec::new();
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if let Some(rest) = line.strip_prefix("# config_sha256=") {
            digest = Some(rest.trim().to_string());
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != TRACE_HEADER {
                return Err(Error::Config(format!(
                    "trace line {line_no}: unexpected header `{line}`"
                )));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Config(format!(
                "trace line {line_no}: expected 7 fields, got {}",
                f.len()
            )));
        }
        records.push(RoundRecord {
            round: parse_field(f[0], line_no, "round")?,
            suboptimality: parse_opt(f[1], line_no, "suboptimality")?,
            grad_norm_sq: parse_field(f[2], line_no, "grad_norm_sq")?,
            dist_sq: parse_opt(f[3], line_no, "dist_sq")?,
            grad_oracle_calls: parse_field(f[4], line_no, "grad_calls")?,
            value_oracle_calls: parse_field(f[5], line_no, "value_calls")?,
            phase: Phase::parse(f[6])
                .ok_or_else(|| Error::Config(format!("trace line {line_no}: bad phase `{}`", f[6])))?,
        });
    }
    if !seen_header {
        return Err(Error::Config("trace has no header".into()));
    }
    Ok((digest, records))
}

pub fn summary_csv(digest: &str, rows: &[SummaryRow]) -> String {
    let mut out = provenance(digest);
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.label,
            r.method,
            r.seed,
            r.rounds,
            fmt_real(r.final_suboptimality),
            fmt_real(r.slope),
            r.grad_calls,
            r.value_calls
        );
    }
    out
}

pub fn compare_csv(digest: &str, rows: &[CompareRow]) -> String {
    let mut out = provenance(digest);
    out.push_str(COMPARE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.rank,
            r.label,
            r.method,
            fmt_real(r.median_final),
            fmt_real(r.median_slope),
            r.grad_calls,
            r.value_calls
        );
    }
    out
}

/// Fixed-width ranking table for the terminal.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:>4}  {:<width$}  {:>18}  {:>18}  {:>12}  {:>12}\n",
        "rank", "label", "median_final", "median_slope", "grad_calls", "value_calls"
    );
    let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:>4}  {:<width$}  {:>18}  {:>18}  {:>12}  {:>12}",
            r.rank,
            r.label,
            show(r.median_final),
            show(r.median_slope),
            r.grad_calls,
            r.value_calls
        );
    }
    out
}

/// Writes one trace CSV per result plus `summary.csv` into `dir`.
pub fn write_run_outputs(
    dir: &Path,
    digest: &str,
    results: &[RunResult],
    summary: &[SummaryRow],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for r in results {
        let path = dir.join(format!("{}.csv", r.file_stem()));
        fs::write(&path, trace_csv(digest, &r.output.trace))?;
        written.push(path);
    }
    let path = dir.join("summary.csv");
    fs::write(&path, summary_csv(digest, summary))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_carry_twelve_significant_digits() {
        assert_eq!(fmt_real(Some(1.0 / 3.0)), "3.33333333333e-1");
        assert_eq!(fmt_real(Some(-2.5e-300)), "-2.50000000000e-300");
        assert_eq!(fmt_real(None), "");
    }

    #[test]
    fn malformed_traces_are_rejected() {
        assert!(parse_trace_csv("").is_err());
        assert!(parse_trace_csv("round,value\n").is_err());
        let short = format!("{TRACE_HEADER}\n0,1,2\n");
        assert!(parse_trace_csv(&short).is_err());
        let phase = format!("{TRACE_HEADER}\n0,1,1,1,0,0,warp\n");
        assert!(parse_trace_csv(&phase).is_err());
        let ok = format!("{TRACE_HEADER}\n0,,1e0,,0,0,init\n");
        let (digest, rows) = parse_trace_csv(&ok).unwrap();
        assert!(digest.is_none());
        assert_eq!(rows[0].suboptimality, None);
    }
}
