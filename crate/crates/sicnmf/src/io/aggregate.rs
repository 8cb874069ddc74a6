//! Co-occurrence aggregation: collapses two patient-by-entity sources into
//! one entity-by-entity count matrix for single-matrix baselines.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Divergence, SourceMatrix};

/// Counts, for every pair of columns `(i, j)`, the patients with at least
/// one positive entry in both `a[:, i]` and `b[:, j]`. Presence, not
/// magnitude: a patient contributes at most 1 to each cell. The result is
/// a count matrix with `a`'s columns as rows and `b`'s columns as columns,
/// usable as a one-source collection.
pub fn aggregate_cooccurrence(a: &SourceMatrix, b: &SourceMatrix) -> Result<SourceMatrix> {
    if a.n_rows != b.n_rows || *a.row_labels != *b.row_labels {
        return Err(Error::Shape(format!(
            "sources {:?} and {:?} do not share a patient row set",
            a.name, b.name
        )));
    }

    let mut active_a: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); a.n_rows];
    for &(r, c, v) in &a.entries {
        if v > 0.0 {
            active_a[r].insert(c);
        }
    }
    let mut active_b: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); b.n_rows];
    for &(r, c, v) in &b.entries {
        if v > 0.0 {
            active_b[r].insert(c);
        }
    }

    let mut counts = vec![0f64; a.n_cols * b.n_cols];
    for p in 0..a.n_rows {
        for &i in &active_a[p] {
            for &j in &active_b[p] {
                counts[i * b.n_cols + j] += 1.0;
            }
        }
    }

    let entries = counts
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| (k / b.n_cols, k % b.n_cols, v))
        .collect();

    Ok(SourceMatrix {
        name: format!("{}_x_{}", a.name, b.name),
        n_rows: a.n_cols,
        n_cols: b.n_cols,
        entries,
        divergence: Divergence::GeneralizedKl,
        col_labels: b.col_labels.clone(),
        row_labels: Arc::new(a.col_labels.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn source(name: &str, n_rows: usize, n_cols: usize, entries: Vec<(usize, usize, f64)>, rows: &Arc<Vec<String>>) -> SourceMatrix {
        SourceMatrix {
            name: name.into(),
            n_rows,
            n_cols,
            entries,
            divergence: Divergence::GeneralizedKl,
            col_labels: (0..n_cols).map(|i| format!("{name}{i}")).collect(),
            row_labels: Arc::clone(rows),
        }
    }

    #[test]
    fn presence_not_product() {
        let rows = Arc::new(vec!["p".to_string()]);
        let a = source("a", 1, 2, vec![(0, 0, 5.0)], &rows);
        let b = source("b", 1, 2, vec![(0, 1, 2.0)], &rows);
        let agg = aggregate_cooccurrence(&a, &b).unwrap();
        assert_eq!(agg.entries, vec![(0, 1, 1.0)]);
        assert_eq!(agg.n_rows, 2);
        assert_eq!(agg.n_cols, 2);
    }

    #[test]
    fn disjoint_supports_give_zero_matrix() {
        let rows = Arc::new(vec!["p1".to_string(), "p2".to_string()]);
        let a = source("a", 2, 2, vec![(0, 0, 1.0)], &rows);
        let b = source("b", 2, 2, vec![(1, 1, 1.0)], &rows);
        let agg = aggregate_cooccurrence(&a, &b).unwrap();
        assert!(agg.entries.is_empty());
    }

    #[test]
    fn full_cooccurrence_reaches_patient_count() {
        let rows = Arc::new((0..4).map(|i| format!("p{i}")).collect::<Vec<_>>());
        let a_entries = (0..4).map(|p| (p, 0, 2.0)).collect();
        let b_entries = (0..4).map(|p| (p, 1, 1.0)).collect();
        let a = source("a", 4, 1, a_entries, &rows);
        let b = source("b", 4, 2, b_entries, &rows);
        let agg = aggregate_cooccurrence(&a, &b).unwrap();
        assert_eq!(agg.entries, vec![(0, 1, 4.0)]);
    }

    #[test]
    fn zero_valued_entries_do_not_count_as_presence() {
        let rows = Arc::new(vec!["p".to_string()]);
        let a = source("a", 1, 1, vec![(0, 0, 0.0)], &rows);
        let b = source("b", 1, 1, vec![(0, 0, 3.0)], &rows);
        let agg = aggregate_cooccurrence(&a, &b).unwrap();
        assert!(agg.entries.is_empty());
    }

    #[test]
    fn row_mismatch_is_rejected() {
        let rows_a = Arc::new(vec!["p1".to_string()]);
        let rows_b = Arc::new(vec!["q1".to_string()]);
        let a = source("a", 1, 1, vec![], &rows_a);
        let b = source("b", 1, 1, vec![], &rows_b);
        assert!(aggregate_cooccurrence(&a, &b).is_err());
    }
}
