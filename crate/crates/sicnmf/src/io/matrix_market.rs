//! MatrixMarket coordinate files: `%%MatrixMarket matrix coordinate
//! {real|integer} general`, `%` comments, a `rows cols nnz` size line,
//! then 1-based `row col value` entries.

use std::fmt::Display;

use crate::error::{Error, Result};
use crate::io::trim_line;

#[derive(Debug, Clone, PartialEq)]
pub struct MmData {
    pub n_rows: usize,
    pub n_cols: usize,
    /// 0-based entries.
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn parse_str(path_ctx: impl Display, s: &str) -> Result<MmData> {
    let path = path_ctx.to_string();
    let mut lines = s.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&path, 1, "missing MatrixMarket header"))?;
    let header = trim_line(header);
    let fields: Vec<String> = header.split_whitespace().map(|f| f.to_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" {
        return Err(Error::parse(&path, 1, "first line must start with %%MatrixMarket"));
    }
    if fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(Error::parse(
            &path,
            1,
            "only `matrix coordinate` MatrixMarket files are supported",
        ));
    }
    if fields[3] != "real" && fields[3] != "integer" {
        return Err(Error::parse(
            &path,
            1,
            format!("unsupported field type {:?} (expected real or integer)", fields[3]),
        ));
    }
    if fields[4] != "general" {
        return Err(Error::parse(
            &path,
            1,
            format!("unsupported symmetry {:?} (expected general)", fields[4]),
        ));
    }

    // size line: first non-comment, non-blank line
    let mut size: Option<(usize, usize, usize, usize)> = None;
    for (i, raw) in lines.by_ref() {
        let line = trim_line(raw);
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(&path, i + 1, "size line must be `rows cols nnz`"));
        }
        let parse_dim = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(&path, i + 1, format!("cannot parse {what} {s:?}")))
        };
        size = Some((
            parse_dim(parts[0], "row count")?,
            parse_dim(parts[1], "column count")?,
            parse_dim(parts[2], "entry count")?,
            i + 1,
        ));
        break;
    }
    let (n_rows, n_cols, nnz, _) = size.ok_or_else(|| {
        Error::parse(&path, s.lines().count().max(1), "missing size line")
    })?;

    let mut entries = Vec::with_capacity(nnz.min(1 << 20));
    for (i, raw) in lines {
        let line = trim_line(raw);
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let line_no = i + 1;
        if entries.len() == nnz {
            return Err(Error::parse(&path, line_no, "more entries than the size line declares"));
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(&path, line_no, "entry line must be `row col value`"));
        }
        let row: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(&path, line_no, format!("cannot parse row {:?}", parts[0])))?;
        let col: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(&path, line_no, format!("cannot parse column {:?}", parts[1])))?;
        let value: f64 = parts[2]
            .parse()
            .map_err(|_| Error::parse(&path, line_no, format!("cannot parse value {:?}", parts[2])))?;
        if row == 0 || row > n_rows || col == 0 || col > n_cols {
            return Err(Error::parse(
                &path,
                line_no,
                format!("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix (indices are 1-based)"),
            ));
        }
        if !value.is_finite() {
            return Err(Error::datatype(&path, line_no, format!("non-finite value {value}")));
        }
        entries.push((row - 1, col - 1, value));
    }
    if entries.len() != nnz {
        return Err(Error::parse(
            &path,
            s.lines().count().max(1),
            format!("size line declares {nnz} entries but {} were found", entries.len()),
        ));
    }

    Ok(MmData {
        n_rows,
        n_cols,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "%%MatrixMarket matrix coordinate real general\n% a comment\n3 2 3\n1 1 2.5\n2 2 1\n3 1 4\n";

    #[test]
    fn parses_coordinate_files() {
        let mm = parse_str("t", SAMPLE).unwrap();
        assert_eq!(mm.n_rows, 3);
        assert_eq!(mm.n_cols, 2);
        assert_eq!(mm.entries, vec![(0, 0, 2.5), (1, 1, 1.0), (2, 0, 4.0)]);
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(parse_str("t", "").is_err());
        assert!(parse_str("t", "%%MatrixMarket matrix array real general\n1 1\n1\n").is_err());
        assert!(parse_str("t", "%%MatrixMarket matrix coordinate complex general\n1 1 0\n").is_err());
        assert!(parse_str("t", "%%MatrixMarket matrix coordinate real symmetric\n1 1 0\n").is_err());
    }

    #[test]
    fn rejects_entry_count_mismatch_and_bounds() {
        let too_few = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n";
        assert!(parse_str("t", too_few).is_err());
        let too_many = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n";
        assert!(parse_str("t", too_many).is_err());
        let zero_based = "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1\n";
        assert!(parse_str("t", zero_based).is_err());
        let out_of_range = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(parse_str("t", out_of_range).is_err());
    }

    #[test]
    fn header_is_case_insensitive() {
        let mm = parse_str(
            "t",
            "%%MatrixMarket MATRIX Coordinate Real General\n1 1 1\n1 1 9\n",
        )
        .unwrap();
        assert_eq!(mm.entries, vec![(0, 0, 9.0)]);
    }
}
