//! Datasets: named `f64` columns of equal length.
//!
//! A dataset on disk is a directory holding one column file per column plus
//! a `manifest.json` naming them. Opening a dataset reads only the manifest;
//! column payloads are streamed later, bulk by bulk, so arbitrarily large
//! datasets can be processed in bounded memory. Purely in-memory datasets
//! offer the same interface for tests and benchmarks.

mod format;
mod generate;
mod reader;

pub use format::{
    open_column, read_column, write_column, ColumnHeader, ColumnWriter, ELEMENT_F64,
    FORMAT_VERSION, MAGIC,
};
pub use generate::{generate_uniform, SplitMix64, Uniform};
pub use reader::BulkReader;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use reader::{ColumnSource, ReaderColumn};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestColumn {
    pub name: String,
    pub file: String,
}

/// `manifest.json`: the dataset's schema and file map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub event_count: u64,
    pub columns: Vec<ManifestColumn>,
}

enum Source {
    Dir { dir: PathBuf, manifest: Manifest },
    Memory { count: u64, columns: Vec<(String, Arc<Vec<f64>>)> },
}

/// An opened dataset. Holds the schema; bulk data is read on demand.
pub struct DatasetHandle {
    source: Source,
    reads: Arc<AtomicU64>,
}

impl std::fmt::Debug for DatasetHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DatasetHandle")
            .field("columns", &self.column_names())
            .field("event_count", &self.event_count())
            .finish()
    }
}

impl DatasetHandle {
    /// Open a dataset directory. Reads and validates the manifest only.
    pub fn open(dir: impl AsRef<Path>) -> Result<DatasetHandle> {
        let dir = dir.as_ref().to_path_buf();
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
            Error::format(format!("cannot read {}: {e}", manifest_path.display()))
        })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(format!("{}: {e}", manifest_path.display())))?;
        validate_manifest(&manifest)?;
        Ok(DatasetHandle {
            source: Source::Dir { dir, manifest },
            reads: Arc::new(AtomicU64::new(0)),
        })
    }

    /// Wrap in-memory columns as a dataset. All columns must share a length.
    pub fn in_memory(columns: Vec<(String, Vec<f64>)>) -> Result<DatasetHandle> {
        if columns.is_empty() {
            return Err(Error::invalid_config("dataset needs at least one column"));
        }
        let count = columns[0].1.len() as u64;
        for (name, data) in &columns {
            validate_column_name(name)?;
            if data.len() as u64 != count {
                return Err(Error::invalid_input(format!(
                    "column '{name}' has {} values, expected {count}",
                    data.len()
                )));
            }
        }
        check_duplicate_names(columns.iter().map(|(n, _)| n.as_str()))?;
        Ok(DatasetHandle {
            source: Source::Memory {
                count,
                columns: columns
                    .into_iter()
                    .map(|(n, d)| (n, Arc::new(d)))
                    .collect(),
            },
            reads: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn event_count(&self) -> u64 {
        match &self.source {
            Source::Dir { manifest, .. } => manifest.event_count,
            Source::Memory { count, .. } => *count,
        }
    }

    pub fn column_names(&self) -> Vec<&str> {
        match &self.source {
            Source::Dir { manifest, .. } => {
                manifest.columns.iter().map(|c| c.name.as_str()).collect()
            }
            Source::Memory { columns, .. } => {
                columns.iter().map(|(n, _)| n.as_str()).collect()
            }
        }
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column_names().iter().any(|n| *n == name)
    }

    /// Bulk read operations performed through this handle so far.
    pub fn read_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    /// A sequential reader over the named columns, `capacity` events per
    /// bulk. Opens and validates the column files; errors on unknown
    /// columns, header mismatches, or wrong file sizes.
    pub fn bulk_reader(&self, columns: &[&str], capacity: usize) -> Result<BulkReader> {
        if capacity == 0 {
            return Err(Error::invalid_config("bulk capacity must be at least 1"));
        }
        if columns.is_empty() {
            return Err(Error::invalid_config("no columns requested"));
        }
        let mut cols = Vec::with_capacity(columns.len());
        for &name in columns {
            let source = match &self.source {
                Source::Dir { dir, manifest } => {
                    let entry = manifest
                        .columns
                        .iter()
                        .find(|c| c.name == name)
                        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
                    let path = dir.join(&entry.file);
                    let (header, file_reader) = open_column(&path)?;
                    if header.name != name {
                        return Err(Error::format(format!(
                            "{}: header says column '{}', manifest says '{name}'",
                            path.display(),
                            header.name
                        )));
                    }
                    if header.event_count != manifest.event_count {
                        return Err(Error::format(format!(
                            "{}: column has {} events, manifest says {}",
                            path.display(),
                            header.event_count,
                            manifest.event_count
                        )));
                    }
                    ColumnSource::File(file_reader)
                }
                Source::Memory { columns, .. } => {
                    let (_, data) = columns
                        .iter()
                        .find(|(n, _)| n == name)
                        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
                    ColumnSource::Memory {
                        data: Arc::clone(data),
                        pos: 0,
                    }
                }
            };
            cols.push(ReaderColumn {
                name: name.to_string(),
                source,
            });
        }
        Ok(BulkReader::new(
            cols,
            self.event_count(),
            capacity,
            Arc::clone(&self.reads),
        ))
    }
}

/// Write columns as a dataset directory (column files plus manifest) and
/// open it. All columns must share a length.
pub fn write_dataset(dir: impl AsRef<Path>, columns: &[(&str, &[f64])]) -> Result<DatasetHandle> {
    let dir = dir.as_ref();
    if columns.is_empty() {
        return Err(Error::invalid_config("dataset needs at least one column"));
    }
    let count = columns[0].1.len();
    for (name, data) in columns {
        validate_column_name(name)?;
        if data.len() != count {
            return Err(Error::invalid_input(format!(
                "column '{name}' has {} values, expected {count}",
                data.len()
            )));
        }
    }
    check_duplicate_names(columns.iter().map(|(n, _)| *n))?;
    std::fs::create_dir_all(dir)?;
    let mut manifest = Manifest {
        event_count: count as u64,
        columns: Vec::new(),
    };
    for (name, data) in columns {
        let file = format!("{name}.col");
        write_column(&dir.join(&file), name, data)?;
        manifest.columns.push(ManifestColumn {
            name: (*name).to_string(),
            file,
        });
    }
    write_manifest(dir, &manifest)?;
    DatasetHandle::open(dir)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serialization");
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

fn validate_manifest(manifest: &Manifest) -> Result<()> {
    if manifest.columns.is_empty() {
        return Err(Error::format("manifest lists no columns"));
    }
    for c in &manifest.columns {
        validate_column_name(&c.name)?;
        if c.file.is_empty()
            || c.file.contains('/')
            || c.file.contains('\\')
            || c.file.contains("..")
        {
            return Err(Error::format(format!(
                "manifest column '{}' has invalid file name '{}'",
                c.name, c.file
            )));
        }
    }
    check_duplicate_names(manifest.columns.iter().map(|c| c.name.as_str()))?;
    Ok(())
}

/// Column names double as file stems; keep them shell- and path-safe.
fn validate_column_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::invalid_config("column name must not be empty"));
    }
    if !name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return Err(Error::invalid_config(format!(
            "column name '{name}' may only use letters, digits, and underscores"
        )));
    }
    Ok(())
}

fn check_duplicate_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::invalid_config(format!("duplicate column '{n}'")));
        }
    }
    Ok(())
}
