//! Source manifests: a TOML file naming the patient-label file, the
//! matrix format, and one `[[source]]` block per matrix.
//!
//! ```toml
//! patients = "patients.txt"
//! format = "triplet_tsv"
//!
//! [[source]]
//! name = "diagnosis"
//! matrix = "diagnosis.tsv"
//! divergence = "generalized_kl"
//! columns = "diagnosis.columns.txt"
//! ```
//!
//! Paths are resolved relative to the manifest's directory.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{labels, matrix_market, read_to_string, triplet};
use crate::model::{
    validate_collection, violations_to_error, Collection, Divergence, SourceMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    #[default]
    TripletTsv,
    MatrixMarket,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceDesc {
    pub name: String,
    pub matrix: PathBuf,
    pub divergence: Divergence,
    pub columns: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceManifest {
    pub patients: PathBuf,
    #[serde(default)]
    pub format: MatrixFormat,
    #[serde(rename = "source")]
    pub sources: Vec<SourceDesc>,
}

fn name_is_safe(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

/// Parses and validates manifest contents: at least one source, unique
/// filesystem-safe names, nonempty paths.
pub fn parse_str(path_ctx: impl Display, s: &str) -> Result<SourceManifest> {
    let path = path_ctx.to_string();
    let manifest: SourceManifest =
        toml::from_str(s).map_err(|e| Error::parse(&path, 1, e.to_string()))?;

    if manifest.sources.is_empty() {
        return Err(Error::parse(&path, 1, "manifest declares no sources"));
    }
    if manifest.patients.as_os_str().is_empty() {
        return Err(Error::parse(&path, 1, "patients path is empty"));
    }
    for (i, src) in manifest.sources.iter().enumerate() {
        if !name_is_safe(&src.name) {
            return Err(Error::parse(
                &path,
                1,
                format!(
                    "source name {:?} must be nonempty and use only [A-Za-z0-9._-]",
                    src.name
                ),
            ));
        }
        if src.matrix.as_os_str().is_empty() || src.columns.as_os_str().is_empty() {
            return Err(Error::parse(&path, 1, format!("source {:?} has an empty path", src.name)));
        }
        if manifest.sources[..i].iter().any(|other| other.name == src.name) {
            return Err(Error::parse(&path, 1, format!("duplicate source name {:?}", src.name)));
        }
    }
    Ok(manifest)
}

pub fn read(path: &Path) -> Result<SourceManifest> {
    let contents = read_to_string(path)?;
    parse_str(path.display(), &contents)
}

pub fn render(manifest: &SourceManifest) -> Result<String> {
    toml::to_string_pretty(manifest)
        .map_err(|e| Error::Archive(format!("cannot serialize manifest: {e}")))
}

/// Reads and validates the full collection a manifest describes.
pub fn read_collection(manifest_path: &Path) -> Result<Collection> {
    let manifest = read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    read_collection_from(&manifest, base)
}

/// [`read_collection`] with the manifest already parsed; `base` anchors
/// relative paths.
pub fn read_collection_from(manifest: &SourceManifest, base: &Path) -> Result<Collection> {
    let patient_path = base.join(&manifest.patients);
    let patients = labels::read(&patient_path)?;
    let patient_labels: Arc<Vec<String>> = Arc::new(patients.labels().to_vec());

    let mut sources = Vec::with_capacity(manifest.sources.len());
    for desc in &manifest.sources {
        let col_path = base.join(&desc.columns);
        let cols = labels::read(&col_path)?;
        let matrix_path = base.join(&desc.matrix);
        let contents = read_to_string(&matrix_path)?;

        let raw = match manifest.format {
            MatrixFormat::TripletTsv => triplet::parse_str(
                matrix_path.display(),
                &contents,
                &patients,
                &cols,
                desc.divergence,
            )?,
            MatrixFormat::MatrixMarket => {
                let mm = matrix_market::parse_str(matrix_path.display(), &contents)?;
                if mm.n_rows != patients.len() {
                    return Err(Error::label(
                        matrix_path.display(),
                        1,
                        format!("matrix has {} rows but {} patient labels", mm.n_rows, patients.len()),
                    ));
                }
                if mm.n_cols != cols.len() {
                    return Err(Error::label(
                        matrix_path.display(),
                        1,
                        format!("matrix has {} columns but {} column labels", mm.n_cols, cols.len()),
                    ));
                }
                for &(r, c, v) in &mm.entries {
                    triplet::check_value(&matrix_path.display().to_string(), 0, v, desc.divergence)
                        .map_err(|_| {
                            Error::datatype(
                                matrix_path.display(),
                                0,
                                format!("entry ({}, {}) value {v} invalid under {}", r + 1, c + 1, desc.divergence),
                            )
                        })?;
                }
                mm.entries
            }
        };

        let entries = triplet::sum_duplicates(raw);
        // duplicate summing can push a logistic source out of {0, 1}
        if desc.divergence == Divergence::Logistic {
            if let Some(&(r, c, v)) = entries.iter().find(|&&(_, _, v)| v != 0.0 && v != 1.0) {
                return Err(Error::datatype(
                    matrix_path.display(),
                    0,
                    format!("entry ({r}, {c}) sums to {v}, which is not binary under logistic"),
                ));
            }
        }

        sources.push(SourceMatrix {
            name: desc.name.clone(),
            n_rows: patient_labels.len(),
            n_cols: cols.len(),
            entries,
            divergence: desc.divergence,
            col_labels: cols.into_labels(),
            row_labels: Arc::clone(&patient_labels),
        });
    }

    let collection = Collection {
        n_patients: patient_labels.len(),
        sources,
        patient_labels,
    };
    let violations = validate_collection(&collection);
    if !violations.is_empty() {
        return Err(violations_to_error(&violations));
    }
    Ok(collection)
}
