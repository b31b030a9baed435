//! Columnar event batches.
//!
//! A [`Bulk`] holds a fixed set of named `f64` columns sharing one length.
//! The pipeline reuses a small number of bulk buffers, refilling them in
//! place; the generation counter increments on every refill so downstream
//! work can detect that a buffer was overwritten underneath it.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Column {
    pub(crate) name: String,
    pub(crate) data: Vec<f64>,
}

/// A batch of events in columnar form.
#[derive(Debug, Clone)]
pub struct Bulk {
    columns: Vec<Column>,
    len: usize,
    capacity: usize,
    generation: u64,
}

impl Bulk {
    /// An empty bulk with the given column layout and capacity.
    pub fn with_capacity(capacity: usize, column_names: &[&str]) -> Bulk {
        let columns = column_names
            .iter()
            .map(|n| Column {
                name: (*n).to_string(),
                data: Vec::with_capacity(capacity),
            })
            .collect();
        Bulk {
            columns,
            len: 0,
            capacity,
            generation: 0,
        }
    }

    /// Build a full bulk directly from column data. All columns must have the
    /// same length. Capacity equals the length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Bulk> {
        let len = columns.first().map(|(_, d)| d.len()).unwrap_or(0);
        for (name, data) in &columns {
            if data.len() != len {
                return Err(Error::invalid_input(format!(
                    "column '{name}' has {} values, expected {len}",
                    data.len()
                )));
            }
        }
        Ok(Bulk {
            columns: columns
                .into_iter()
                .map(|(name, data)| Column { name, data })
                .collect(),
            len,
            capacity: len,
            generation: 0,
        })
    }

    /// Number of events currently held; at most `capacity`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Refill counter. Two observations of the same slot with different
    /// generations mean the data changed in between.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// The first `len` values of a column, or `None` if absent.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| &c.data[..self.len])
    }

    /// Like [`Bulk::column`] but an error naming the missing column.
    pub fn require_column(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    // ------------------------------------------------------------------
    // Refill interface, used by the dataset reader and the pipeline.
    // ------------------------------------------------------------------

    pub(crate) fn columns_mut(&mut self) -> &mut [Column] {
        &mut self.columns
    }

    /// Set the live length after a refill wrote the column data.
    pub(crate) fn set_len(&mut self, len: usize) {
        debug_assert!(len <= self.capacity);
        debug_assert!(self.columns.iter().all(|c| c.data.len() >= len));
        self.len = len;
    }

    pub(crate) fn bump_generation(&mut self) {
        self.generation += 1;
    }

    /// Copy another bulk's payload into this one, column for column. Used by
    /// the staged transfer path. The layouts must match.
    pub(crate) fn copy_from(&mut self, src: &Bulk) -> Result<()> {
        if self.columns.len() != src.columns.len() {
            return Err(Error::invalid_input("bulk layouts differ"));
        }
        for (dst, s) in self.columns.iter_mut().zip(&src.columns) {
            if dst.name != s.name {
                return Err(Error::invalid_input(format!(
                    "bulk layouts differ: '{}' vs '{}'",
                    dst.name, s.name
                )));
            }
            dst.data.clear();
            dst.data.extend_from_slice(&s.data[..src.len]);
        }
        self.len = src.len;
        self.generation = src.generation;
        Ok(())
    }

    /// Payload size in bytes: `len * ncolumns * 8`.
    pub fn payload_bytes(&self) -> u64 {
        (self.len as u64) * (self.columns.len() as u64) * 8
    }
}
