//! Triplet TSV matrices: one `row_label<TAB>col_label<TAB>value` entry per
//! line. Blank lines and `#` comments are skipped. Duplicate `(row, col)`
//! pairs are summed downstream (count semantics).

use std::fmt::Display;

use crate::error::{Error, Result};
use crate::io::labels::LabelIndex;
use crate::io::trim_line;
use crate::model::Divergence;

/// Parses triplet contents against known row and column labels, checking
/// each raw value against the source's divergence so a bad line is
/// reported with its number.
pub fn parse_str(
    path_ctx: impl Display,
    s: &str,
    rows: &LabelIndex,
    cols: &LabelIndex,
    divergence: Divergence,
) -> Result<Vec<(usize, usize, f64)>> {
    let path = path_ctx.to_string();
    let mut entries = Vec::new();
    for (i, raw) in s.lines().enumerate() {
        let line_no = i + 1;
        let line = trim_line(raw);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (row_label, col_label, value_str) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(r), Some(c), Some(v), None) => (r, c, v),
            _ => {
                return Err(Error::parse(
                    &path,
                    line_no,
                    "expected exactly 3 tab-separated fields: row_label, col_label, value",
                ))
            }
        };
        let row = rows.get(row_label).ok_or_else(|| {
            Error::label(&path, line_no, format!("unknown row label {row_label:?}"))
        })?;
        let col = cols.get(col_label).ok_or_else(|| {
            Error::label(&path, line_no, format!("unknown column label {col_label:?}"))
        })?;
        let value: f64 = value_str.parse().map_err(|_| {
            Error::parse(&path, line_no, format!("cannot parse value {value_str:?}"))
        })?;
        if !value.is_finite() {
            return Err(Error::datatype(&path, line_no, format!("non-finite value {value}")));
        }
        check_value(&path, line_no, value, divergence)?;
        entries.push((row, col, value));
    }
    Ok(entries)
}

pub(crate) fn check_value(
    path: &str,
    line_no: usize,
    value: f64,
    divergence: Divergence,
) -> Result<()> {
    match divergence {
        Divergence::GeneralizedKl if value < 0.0 => Err(Error::datatype(
            path,
            line_no,
            format!("negative value {value} under generalized_kl"),
        )),
        Divergence::Logistic if value != 0.0 && value != 1.0 => Err(Error::datatype(
            path,
            line_no,
            format!("value {value} is not binary under logistic"),
        )),
        _ => Ok(()),
    }
}

/// Sums duplicate `(row, col)` pairs and sorts entries by index.
pub fn sum_duplicates(mut entries: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    entries.sort_by_key(|&(r, c, _)| (r, c));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for (r, c, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

/// Serializes entries (sorted by index) with 17 significant digits.
pub fn render(
    entries: &[(usize, usize, f64)],
    rows: &[String],
    cols: &[String],
) -> String {
    let mut sorted: Vec<_> = entries.to_vec();
    sorted.sort_by_key(|&(r, c, _)| (r, c));
    let mut out = String::new();
    for (r, c, v) in sorted {
        out.push_str(&format!("{}\t{}\t{v:.16e}\n", rows[r], cols[c]));
    }
    out
}
