//! Shared CLI plumbing: exit-code discipline and dataset helpers.
//!
//! Exit codes: 0 success, 1 usage error, 2 dataset/IO error, 3 internal
//! invariant violation.

use std::path::Path;

use bulkhist::data::{write_manifest, ColumnWriter, Manifest, ManifestColumn, Uniform};
use bulkhist::error::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// A command failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

pub fn data_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_DATA,
        message: message.into(),
    }
}

pub fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            // Problems with the data or the files holding it.
            Error::Io(_) | Error::Format(_) | Error::UnknownColumn(_) | Error::InvalidInput(_) => {
                EXIT_DATA
            }
            // Anything else escaping to here is a bug: the CLI validates
            // its flags before building configurations.
            Error::InvalidAxis(_)
            | Error::InvalidConfig(_)
            | Error::Incompatible(_)
            | Error::EmptyStats
            | Error::PhaseActive(_) => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<bulkhist::pipeline::RunFailure> for Failure {
    fn from(f: bulkhist::pipeline::RunFailure) -> Failure {
        f.error.into()
    }
}

/// Parse an event count, allowing `k`/`M`/`G` suffixes (`20M` = 20000000).
pub fn parse_count(text: &str) -> Result<u64, String> {
    let text = text.trim();
    let (digits, multiplier) = match text.chars().last() {
        Some('k') | Some('K') => (&text[..text.len() - 1], 1_000u64),
        Some('m') | Some('M') => (&text[..text.len() - 1], 1_000_000),
        Some('g') | Some('G') => (&text[..text.len() - 1], 1_000_000_000),
        _ => (text, 1),
    };
    let base: u64 = digits
        .parse()
        .map_err(|_| format!("'{text}' is not a count"))?;
    base.checked_mul(multiplier)
        .ok_or_else(|| format!("'{text}' is out of range"))
}

/// Write a single-column uniform dataset, streaming so the event count does
/// not bound memory.
pub fn generate_dataset(
    dir: &Path,
    column: &str,
    events: u64,
    seed: u64,
    lo: f64,
    hi: f64,
) -> CmdResult<()> {
    // Column names become file names; keep them boring.
    if column.is_empty()
        || !column
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
    {
        return Err(usage(format!(
            "column name '{column}' must be non-empty and use only [A-Za-z0-9_]"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| data_error(format!("{}: {e}", dir.display())))?;
    let file = format!("{column}.col");
    let path = dir.join(&file);
    let mut writer = ColumnWriter::create(&path, column, events)?;
    let mut source = Uniform::new(seed, lo, hi)?;
    let mut buf: Vec<f64> = Vec::with_capacity(1 << 20);
    let mut remaining = events;
    while remaining > 0 {
        let n = remaining.min(1 << 20) as usize;
        buf.clear();
        buf.extend((0..n).map(|_| source.next()));
        writer.write_chunk(&buf)?;
        remaining -= n as u64;
    }
    writer.finish()?;
    write_manifest(
        dir,
        &Manifest {
            event_count: events,
            columns: vec![ManifestColumn {
                name: column.to_string(),
                file,
            }],
        },
    )?;
    Ok(())
}

/// Order-insensitive identity of a run's outcome. Built from sums that are
/// exact for unit weights, so any two correct configurations must agree
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checksum {
    pub content_sum_bits: u64,
    pub entries: u64,
    pub sumw_bits: u64,
}

impl Checksum {
    pub fn of(histogram: &bulkhist::HistogramState) -> Checksum {
        Checksum {
            content_sum_bits: histogram.content_sum().to_bits(),
            entries: histogram.stats().n_entries(),
            sumw_bits: histogram.stats().sumw().to_bits(),
        }
    }
}

impl std::fmt::Display for Checksum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sum={} entries={}",
            f64::from_bits(self.content_sum_bits),
            self.entries
        )
    }
}
