//! File formats and persistence: source manifests, triplet and
//! MatrixMarket matrices, label files, model archives, and the
//! co-occurrence aggregation for single-matrix baselines.

pub mod aggregate;
pub mod archive;
pub mod dataset;
pub mod labels;
pub mod manifest;
pub mod matrix_market;
pub mod table;
pub mod triplet;

pub use aggregate::aggregate_cooccurrence;
pub use archive::{read_model, write_model, ArchivedModel, ARCHIVE_VERSION};
pub use dataset::write_collection;
pub use manifest::{read_collection, read_collection_from, MatrixFormat, SourceManifest};

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a whole file into a string with path context on failure.
pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes a file atomically: the contents land in a temporary file in the
/// same directory, which is then renamed over the destination.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    atomic_write(path, contents)
}

pub(crate) fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Strips one trailing `\r` so CRLF input parses like LF input.
pub(crate) fn trim_line(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}
