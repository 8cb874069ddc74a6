//! Post-processing of fitted factors: human-readable phenotypes, sparsity
//! metrics, projection of new rows onto fixed factors, and feature export.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{
    validate_collection, violations_to_error, Collection, CollectionSchema, FactorModel,
};
use crate::solver::{dense_for, solve_loadings};
use crate::SolverConfig;

/// Default cutoff for counting an entry of a factor column as nonzero:
/// three orders of magnitude below a uniform simplex column over ~1e3
/// entities, so simplex round-off never counts as support.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-4;

/// Entity weights of one latent dimension for one source, sorted by
/// weight descending (ties by entity index).
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeSource {
    pub source: String,
    pub entries: Vec<(String, f64)>,
}

/// One latent dimension across all sources.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    pub sources: Vec<PhenotypeSource>,
}

/// All latent dimensions of a fitted model, optionally truncated to the
/// top-k entities per source.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeSet {
    pub rank: usize,
    pub per_phenotype: Vec<Phenotype>,
    pub truncation_k: Option<usize>,
    pub zero_threshold: f64,
}

/// Nonzero counts of the concatenated factor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityProfile {
    /// Entries above the threshold in the concatenated column, per
    /// latent dimension.
    pub per_phenotype_nnz: Vec<usize>,
    /// Median of `per_phenotype_nnz` (midpoint of the two central values
    /// for even ranks).
    pub median_nnz: f64,
    /// `[source][phenotype]` breakdown.
    pub per_source_nnz: Vec<Vec<usize>>,
    pub zero_threshold: f64,
}

/// Sorts each latent dimension's entities by weight and truncates to the
/// top `k` per source when given. Phenotypes depend only on `H`, so the
/// result is invariant to row permutations of the data.
pub fn extract_phenotypes(
    m: &FactorModel,
    schema: &CollectionSchema,
    k: Option<usize>,
) -> Result<PhenotypeSet> {
    if schema.sources.len() != m.n_sources() {
        return Err(Error::Shape(format!(
            "schema has {} sources but the model has {}",
            schema.sources.len(),
            m.n_sources()
        )));
    }
    for (v, s) in schema.sources.iter().enumerate() {
        if s.col_labels.len() != m.h[v].nrows() {
            return Err(Error::Shape(format!(
                "source {:?} has {} labels but H_{v} has {} rows",
                s.name,
                s.col_labels.len(),
                m.h[v].nrows()
            )));
        }
    }

    let per_phenotype = (0..m.rank)
        .map(|r| Phenotype {
            sources: schema
                .sources
                .iter()
                .enumerate()
                .map(|(v, s)| {
                    let mut entries: Vec<(String, f64)> = s
                        .col_labels
                        .iter()
                        .cloned()
                        .zip(m.h[v].column(r).iter().copied())
                        .collect();
                    // stable sort keeps ties in entity-index order
                    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
                    if let Some(k) = k {
                        entries.truncate(k);
                    }
                    PhenotypeSource {
                        source: s.name.clone(),
                        entries,
                    }
                })
                .collect(),
        })
        .collect();

    Ok(PhenotypeSet {
        rank: m.rank,
        per_phenotype,
        truncation_k: k,
        zero_threshold: DEFAULT_ZERO_THRESHOLD,
    })
}

/// Counts entries strictly above `zero_threshold` per concatenated factor
/// column, with per-source breakdown and the median across dimensions.
pub fn sparsity_profile(m: &FactorModel, zero_threshold: f64) -> SparsityProfile {
    let per_source_nnz: Vec<Vec<usize>> = m
        .h
        .iter()
        .map(|h| {
            (0..m.rank)
                .map(|k| h.column(k).iter().filter(|&&x| x > zero_threshold).count())
                .collect()
        })
        .collect();
    let per_phenotype_nnz: Vec<usize> = (0..m.rank)
        .map(|k| per_source_nnz.iter().map(|s| s[k]).sum())
        .collect();

    let mut sorted = per_phenotype_nnz.clone();
    sorted.sort_unstable();
    let median_nnz = if sorted.is_empty() {
        0.0
    } else if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2] as f64
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) as f64 / 2.0
    };

    SparsityProfile {
        per_phenotype_nnz,
        median_nnz,
        per_source_nnz,
        zero_threshold,
    }
}

/// Projects new rows onto the fixed factors: solves the `W`-only problem
/// with `H`, `b`, and `α` frozen. In sicnmf mode the Frobenius budget is
/// rescaled by `√(n_new/n_train)` so the per-row budget matches training.
/// Returns the non-negative `n_new × R` loadings.
pub fn transform(
    new_rows: &Collection,
    m: &FactorModel,
    schema: &CollectionSchema,
    cfg: &SolverConfig,
) -> Result<Array2<f64>> {
    Ok(transform_detailed(new_rows, m, schema, cfg)?.0)
}

/// [`transform`] plus the achieved objective on the new rows.
pub fn transform_detailed(
    new_rows: &Collection,
    m: &FactorModel,
    schema: &CollectionSchema,
    cfg: &SolverConfig,
) -> Result<(Array2<f64>, f64)> {
    cfg.validate()?;
    schema.check_compatible(new_rows)?;
    let violations = validate_collection(new_rows);
    if !violations.is_empty() {
        return Err(violations_to_error(&violations));
    }
    for (v, src) in new_rows.sources.iter().enumerate() {
        if m.h[v].nrows() != src.n_cols {
            return Err(Error::Shape(format!(
                "source {:?} has {} columns but the model factor has {} rows",
                src.name,
                src.n_cols,
                m.h[v].nrows()
            )));
        }
    }

    let eta = if m.eta.is_finite() {
        let n_train = m.n_patients().max(1) as f64;
        m.eta * (new_rows.n_patients as f64 / n_train).sqrt()
    } else {
        f64::INFINITY
    };

    let data = dense_for(new_rows, cfg.epsilon);
    let (w, f) = solve_loadings(&data, new_rows.n_patients, m, eta, cfg);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("transform objective evaluated to {f}")));
    }
    Ok((w, f))
}

/// Tab-delimited feature table: header `patient<TAB>p1..pR`, one row per
/// patient, values printed with 17 significant digits so a read-back
/// reproduces the loadings exactly.
pub fn export_features(loadings: &Array2<f64>, patient_labels: &[String]) -> Result<String> {
    if loadings.nrows() != patient_labels.len() {
        return Err(Error::Shape(format!(
            "{} loading rows for {} patient labels",
            loadings.nrows(),
            patient_labels.len()
        )));
    }
    let mut out = String::from("patient");
    for k in 0..loadings.ncols() {
        out.push_str(&format!("\tp{}", k + 1));
    }
    out.push('\n');
    for (label, row) in patient_labels.iter().zip(loadings.rows()) {
        out.push_str(label);
        for v in row {
            out.push_str(&format!("\t{v:.16e}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Renders a phenotype set as tab-delimited blocks: a `phenotype` line,
/// then per source a `source` line followed by `label<TAB>weight` rows
/// with 6 significant digits.
pub fn render_phenotypes(set: &PhenotypeSet) -> String {
    let mut out = String::new();
    for (i, phenotype) in set.per_phenotype.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("phenotype\t{}\n", i + 1));
        for src in &phenotype.sources {
            out.push_str(&format!("source\t{}\n", src.source));
            for (label, weight) in &src.entries {
                out.push_str(&format!("{label}\t{weight:.5e}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mode, SourceSchema};
    use ndarray::arr2;

    fn schema_one(labels: &[&str]) -> CollectionSchema {
        CollectionSchema {
            sources: vec![SourceSchema {
                name: "s".into(),
                divergence: crate::model::Divergence::GeneralizedKl,
                col_labels: labels.iter().map(|s| s.to_string()).collect(),
            }],
        }
    }

    fn model_with_h(h: Array2<f64>) -> FactorModel {
        let n = h.nrows();
        FactorModel {
            w: arr2(&[[1.0]]),
            h: vec![h],
            b: vec![ndarray::Array1::zeros(n)],
            alpha: vec![1.0],
            eta: f64::INFINITY,
            rank: 1,
            mode: Mode::Cnmf,
            objective_trace: vec![],
        }
    }

    #[test]
    fn extraction_sorts_and_truncates() {
        let m = model_with_h(arr2(&[[0.3], [0.7], [0.0]]));
        let schema = schema_one(&["e1", "e2", "e3"]);
        let full = extract_phenotypes(&m, &schema, None).unwrap();
        let entries = &full.per_phenotype[0].sources[0].entries;
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0], ("e2".to_string(), 0.7));
        assert_eq!(entries[1], ("e1".to_string(), 0.3));

        let top2 = extract_phenotypes(&m, &schema, Some(2)).unwrap();
        let entries = &top2.per_phenotype[0].sources[0].entries;
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].0, "e2");
        assert_eq!(entries[1].0, "e1");
    }

    #[test]
    fn extraction_breaks_ties_by_entity_index() {
        let m = model_with_h(arr2(&[[0.5], [0.5], [0.0]]));
        let schema = schema_one(&["a", "b", "c"]);
        let set = extract_phenotypes(&m, &schema, Some(2)).unwrap();
        let entries = &set.per_phenotype[0].sources[0].entries;
        assert_eq!(entries[0].0, "a");
        assert_eq!(entries[1].0, "b");
    }

    #[test]
    fn extraction_rejects_label_mismatch() {
        let m = model_with_h(arr2(&[[0.5], [0.5]]));
        let schema = schema_one(&["a", "b", "c"]);
        assert!(extract_phenotypes(&m, &schema, None).is_err());
    }

    #[test]
    fn sparsity_counts_concatenated_columns() {
        // one column (1, 0, 0 | 0.5, 0.5) across two sources
        let m = FactorModel {
            w: arr2(&[[1.0]]),
            h: vec![arr2(&[[1.0], [0.0], [0.0]]), arr2(&[[0.5], [0.5]])],
            b: vec![ndarray::Array1::zeros(3), ndarray::Array1::zeros(2)],
            alpha: vec![1.0, 1.0],
            eta: f64::INFINITY,
            rank: 1,
            mode: Mode::Cnmf,
            objective_trace: vec![],
        };
        let p = sparsity_profile(&m, 1e-4);
        assert_eq!(p.per_phenotype_nnz, vec![3]);
        assert_eq!(p.median_nnz, 3.0);
        assert_eq!(p.per_source_nnz, vec![vec![1], vec![2]]);
    }

    #[test]
    fn sparsity_threshold_zero_counts_everything_positive() {
        let m = model_with_h(arr2(&[[0.3], [0.7], [0.1]]));
        let p = sparsity_profile(&m, 0.0);
        assert_eq!(p.per_phenotype_nnz, vec![3]);
    }

    #[test]
    fn sparsity_median_is_nonincreasing_in_threshold() {
        let m = FactorModel {
            w: arr2(&[[1.0, 1.0]]),
            h: vec![arr2(&[[0.9, 0.05], [0.1, 0.9], [1e-5, 0.05]])],
            b: vec![ndarray::Array1::zeros(3)],
            alpha: vec![1.0],
            eta: f64::INFINITY,
            rank: 2,
            mode: Mode::Cnmf,
            objective_trace: vec![],
        };
        let mut last = f64::INFINITY;
        for thr in [0.0, 1e-5, 1e-4, 0.05, 0.5] {
            let p = sparsity_profile(&m, thr);
            assert!(p.median_nnz <= last);
            last = p.median_nnz;
        }
    }

    #[test]
    fn feature_export_round_trips_and_handles_empty() {
        let loadings = arr2(&[[0.123456789012345678, 1.5], [2.0 / 3.0, 0.0]]);
        let labels = vec!["alice".to_string(), "bob".to_string()];
        let table = export_features(&loadings, &labels).unwrap();
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some("patient\tp1\tp2"));
        let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
        assert_eq!(row[0], "alice");
        assert_eq!(row[1].parse::<f64>().unwrap(), loadings[[0, 0]]);
        let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), 2.0 / 3.0);

        let empty = export_features(&Array2::zeros((0, 2)), &[]).unwrap();
        assert_eq!(empty, "patient\tp1\tp2\n");
    }

    #[test]
    fn phenotype_rendering_is_blocked_and_tabbed() {
        let m = model_with_h(arr2(&[[0.25], [0.75]]));
        let schema = schema_one(&["a", "b"]);
        let set = extract_phenotypes(&m, &schema, None).unwrap();
        let text = render_phenotypes(&set);
        assert!(text.starts_with("phenotype\t1\nsource\ts\n"));
        assert!(text.contains("b\t7.50000e-1\n"));
    }
}
