//! Streaming bulk reads.
//!
//! A [`BulkReader`] pulls a fixed set of columns from a dataset into reusable
//! [`Bulk`] buffers, `capacity` events at a time, with one short final bulk
//! if the event count is not a multiple.

use std::fs::File;
use std::io::{BufReader, Read};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::bulk::Bulk;
use crate::error::{Error, Result};

pub(crate) enum ColumnSource {
    File(BufReader<File>),
    Memory { data: Arc<Vec<f64>>, pos: usize },
}

pub(crate) struct ReaderColumn {
    pub(crate) name: String,
    pub(crate) source: ColumnSource,
}

/// Sequential reader over a fixed column set.
pub struct BulkReader {
    columns: Vec<ReaderColumn>,
    remaining: u64,
    capacity: usize,
    reads: Arc<AtomicU64>,
    scratch: Vec<u8>,
}

impl std::fmt::Debug for BulkReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BulkReader")
            .field(
                "columns",
                &self.columns.iter().map(|c| &c.name).collect::<Vec<_>>(),
            )
            .field("remaining", &self.remaining)
            .field("capacity", &self.capacity)
            .finish()
    }
}

impl BulkReader {
    pub(crate) fn new(
        columns: Vec<ReaderColumn>,
        event_count: u64,
        capacity: usize,
        reads: Arc<AtomicU64>,
    ) -> BulkReader {
        BulkReader {
            columns,
            remaining: event_count,
            capacity,
            reads,
            scratch: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Events not yet handed out.
    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    /// An empty bulk with this reader's column layout and capacity.
    pub fn make_bulk(&self) -> Bulk {
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        Bulk::with_capacity(self.capacity, &names)
    }

    /// Refill `bulk` with the next batch.
    ///
    /// Returns `false` at end of stream (the bulk is left untouched). The
    /// bulk must have exactly this reader's column layout.
    pub fn read_into(&mut self, bulk: &mut Bulk) -> Result<bool> {
        if self.remaining == 0 {
            return Ok(false);
        }
        let n = (self.remaining).min(self.capacity as u64) as usize;
        {
            let dst = bulk.columns_mut();
            if dst.len() != self.columns.len() {
                return Err(Error::invalid_input("bulk layout does not match reader"));
            }
            for (dst, src) in dst.iter_mut().zip(self.columns.iter_mut()) {
                if dst.name != src.name {
                    return Err(Error::invalid_input(format!(
                        "bulk layout does not match reader: '{}' vs '{}'",
                        dst.name, src.name
                    )));
                }
                dst.data.clear();
                match &mut src.source {
                    ColumnSource::File(reader) => {
                        self.scratch.resize(n * 8, 0);
                        reader.read_exact(&mut self.scratch).map_err(|e| {
                            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                                Error::format(format!("column '{}' ended early", src.name))
                            } else {
                                Error::Io(e)
                            }
                        })?;
                        dst.data.extend(
                            self.scratch
                                .chunks_exact(8)
                                .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
                        );
                    }
                    ColumnSource::Memory { data, pos } => {
                        dst.data.extend_from_slice(&data[*pos..*pos + n]);
                        *pos += n;
                    }
                }
            }
        }
        bulk.set_len(n);
        self.remaining -= n as u64;
        self.reads.fetch_add(1, Ordering::Relaxed);
        Ok(true)
    }
}
