//! Labeled numeric tables: a header row, then one label plus fixed-width
//! numeric columns per line, all tab-delimited. Model archives and feature
//! tables both use this layout.

use std::fmt::Display;

use crate::error::{Error, Result};
use crate::io::trim_line;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Header fields, including the leading label column.
    pub header: Vec<String>,
    pub row_labels: Vec<String>,
    /// One row per label, each with `header.len() - 1` values.
    pub values: Vec<Vec<f64>>,
}

pub fn parse_str(path_ctx: impl Display, s: &str) -> Result<Table> {
    let path = path_ctx.to_string();
    let mut lines = s.lines().enumerate();
    let (_, header_raw) = lines
        .next()
        .ok_or_else(|| Error::parse(&path, 1, "missing header row"))?;
    let header: Vec<String> = trim_line(header_raw).split('\t').map(String::from).collect();
    if header.len() < 2 {
        return Err(Error::parse(&path, 1, "header needs a label column and at least one value column"));
    }
    let width = header.len() - 1;

    let mut row_labels = Vec::new();
    let mut values = Vec::new();
    for (i, raw) in lines {
        let line = trim_line(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width + 1 {
            return Err(Error::parse(
                &path,
                i + 1,
                format!("expected {} fields, found {}", width + 1, fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(width);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(&path, i + 1, format!("cannot parse value {f:?}")))?;
            row.push(v);
        }
        row_labels.push(fields[0].to_string());
        values.push(row);
    }
    Ok(Table {
        header,
        row_labels,
        values,
    })
}

/// Serializes with 17 significant digits per value, so reading the table
/// back reproduces every f64 bit-exactly.
pub fn render<'a>(
    header: &[String],
    rows: impl Iterator<Item = (&'a str, Vec<f64>)>,
) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for (label, values) in rows {
        out.push_str(label);
        for v in values {
            out.push_str(&format!("\t{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let header = vec!["entity".to_string(), "p1".to_string(), "p2".to_string()];
        let rows = vec![
            ("a", vec![1.0 / 3.0, 2.0 / 7.0]),
            ("b", vec![f64::MIN_POSITIVE, 1e300]),
        ];
        let text = render(&header, rows.iter().map(|(l, v)| (*l, v.clone())));
        let table = parse_str("t", &text).unwrap();
        assert_eq!(table.header, header);
        assert_eq!(table.row_labels, vec!["a", "b"]);
        assert_eq!(table.values[0][0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(table.values[1][1].to_bits(), 1e300f64.to_bits());
    }

    #[test]
    fn rejects_ragged_rows_and_bad_numbers() {
        assert!(parse_str("t", "h\tp1\na\t1\t2\n").is_err());
        assert!(parse_str("t", "h\tp1\na\tx\n").is_err());
        assert!(parse_str("t", "").is_err());
        assert!(parse_str("t", "just_one_column\n").is_err());
    }
}
