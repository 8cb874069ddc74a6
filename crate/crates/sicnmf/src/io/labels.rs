//! Label files: one label per line, line order defines the index.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_to_string, trim_line};

/// An ordered label list with a reverse lookup map.
#[derive(Debug, Clone)]
pub struct LabelIndex {
    labels: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl LabelIndex {
    /// Builds the index, rejecting duplicates (they would make triplet
    /// references ambiguous).
    pub fn new(labels: Vec<String>) -> std::result::Result<Self, String> {
        let mut lookup = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if lookup.insert(label.clone(), i).is_some() {
                return Err(format!("duplicate label {label:?}"));
            }
        }
        Ok(LabelIndex { labels, lookup })
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<String> {
        self.labels
    }
}

/// Parses label-file contents. Labels must be nonempty and free of tabs
/// and control characters, since they are embedded in tab-delimited files.
pub fn parse_str(path_ctx: impl Display, s: &str) -> Result<LabelIndex> {
    let path = path_ctx.to_string();
    let mut labels = Vec::new();
    for (i, raw) in s.lines().enumerate() {
        let line = trim_line(raw);
        if line.is_empty() {
            return Err(Error::parse(&path, i + 1, "empty label"));
        }
        if line.chars().any(|c| c == '\t' || c.is_control()) {
            return Err(Error::parse(
                &path,
                i + 1,
                "labels may not contain tabs or control characters",
            ));
        }
        labels.push(line.to_string());
    }
    let line_count = labels.len();
    LabelIndex::new(labels).map_err(|msg| Error::parse(&path, line_count, msg))
}

pub fn read(path: &Path) -> Result<LabelIndex> {
    let contents = read_to_string(path)?;
    parse_str(path.display(), &contents)
}

/// Serializes labels one per line, trailing newline included.
pub fn render(labels: &[String]) -> String {
    let mut out = String::new();
    for label in labels {
        out.push_str(label);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ordered_labels() {
        let idx = parse_str("t", "alpha\nbeta\ngamma\n").unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.get("beta"), Some(1));
        assert_eq!(idx.get("delta"), None);
    }

    #[test]
    fn rejects_duplicates_and_empty_lines() {
        assert!(parse_str("t", "a\na\n").is_err());
        assert!(parse_str("t", "a\n\nb\n").is_err());
        assert!(parse_str("t", "a\tb\n").is_err());
    }

    #[test]
    fn handles_crlf() {
        let idx = parse_str("t", "a\r\nb\r\n").unwrap();
        assert_eq!(idx.labels(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn round_trips_through_render() {
        let labels = vec!["x".to_string(), "y".to_string()];
        let idx = parse_str("t", &render(&labels)).unwrap();
        assert_eq!(idx.labels(), labels.as_slice());
    }
}
