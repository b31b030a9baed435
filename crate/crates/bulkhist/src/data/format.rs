//! Flat binary column files.
//!
//! One file holds one named `f64` column. Layout, all little-endian:
//!
//! ```text
//! magic "CBH1" | version u16 | element type u16 | event count u64
//! | name length u16 | name bytes (UTF-8) | payload: count * 8 bytes
//! ```
//!
//! The file length must equal header length + `8 * count` exactly; anything
//! shorter or longer is rejected as corrupt. Payload bytes are raw IEEE 754
//! bit patterns, so a write/read round trip is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CBH1";
pub const FORMAT_VERSION: u16 = 1;
/// Element type code for `f64`; the only type in format version 1.
pub const ELEMENT_F64: u16 = 0;

/// Fixed part of the header, before the column name.
const HEADER_FIXED_LEN: u64 = 4 + 2 + 2 + 8 + 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnHeader {
    pub version: u16,
    pub element_type: u16,
    pub event_count: u64,
    pub name: String,
}

impl ColumnHeader {
    pub fn new(name: &str, event_count: u64) -> Result<ColumnHeader> {
        if name.is_empty() {
            return Err(Error::format("column name must not be empty"));
        }
        if name.len() > u16::MAX as usize {
            return Err(Error::format("column name too long"));
        }
        Ok(ColumnHeader {
            version: FORMAT_VERSION,
            element_type: ELEMENT_F64,
            event_count,
            name: name.to_string(),
        })
    }

    /// Header size on disk.
    pub fn encoded_len(&self) -> u64 {
        HEADER_FIXED_LEN + self.name.len() as u64
    }

    /// Exact file size implied by this header.
    pub fn expected_file_len(&self) -> u64 {
        self.encoded_len() + 8 * self.event_count
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.element_type.to_le_bytes())?;
        w.write_all(&self.event_count.to_le_bytes())?;
        w.write_all(&(self.name.len() as u16).to_le_bytes())?;
        w.write_all(self.name.as_bytes())?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<ColumnHeader> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if magic != MAGIC {
            return Err(Error::format(format!(
                "bad magic {magic:02x?}, not a column file"
            )));
        }
        let version = read_u16(r)?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported format version {version}"
            )));
        }
        let element_type = read_u16(r)?;
        if element_type != ELEMENT_F64 {
            return Err(Error::format(format!(
                "unsupported element type code {element_type}"
            )));
        }
        let event_count = read_u64(r)?;
        let name_len = read_u16(r)? as usize;
        let mut name = vec![0u8; name_len];
        read_exact(r, &mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::format("column name is not valid UTF-8"))?;
        if name.is_empty() {
            return Err(Error::format("column name must not be empty"));
        }
        Ok(ColumnHeader {
            version,
            element_type,
            event_count,
            name,
        })
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("column file truncated")
        } else {
            Error::Io(e)
        }
    })
}

fn read_u16(r: &mut impl Read) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Streaming column writer; the event count is declared up front and
/// enforced at [`ColumnWriter::finish`].
pub struct ColumnWriter {
    out: BufWriter<File>,
    declared: u64,
    written: u64,
}

impl ColumnWriter {
    pub fn create(path: &Path, name: &str, event_count: u64) -> Result<ColumnWriter> {
        let header = ColumnHeader::new(name, event_count)?;
        let mut out = BufWriter::new(File::create(path)?);
        header.write_to(&mut out)?;
        Ok(ColumnWriter {
            out,
            declared: event_count,
            written: 0,
        })
    }

    pub fn write_chunk(&mut self, values: &[f64]) -> Result<()> {
        self.written += values.len() as u64;
        if self.written > self.declared {
            return Err(Error::format(format!(
                "column declared {} events but {} were written",
                self.declared, self.written
            )));
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.declared {
            return Err(Error::format(format!(
                "column declared {} events but {} were written",
                self.declared, self.written
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Write a whole column in one call.
pub fn write_column(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = ColumnWriter::create(path, name, values.len() as u64)?;
    w.write_chunk(values)?;
    w.finish()
}

/// Open a column file, validate the header and the exact file length, and
/// return the header plus a reader positioned at the first payload byte.
pub fn open_column(path: &Path) -> Result<(ColumnHeader, BufReader<File>)> {
    let mut file = File::open(path)?;
    let actual_len = file.metadata()?.len();
    let header = ColumnHeader::read_from(&mut file)
        .map_err(|e| with_path(e, path))?;
    let expected = header.expected_file_len();
    if actual_len != expected {
        return Err(Error::format(format!(
            "{}: file is {actual_len} bytes, header implies exactly {expected}",
            path.display()
        )));
    }
    Ok((header, BufReader::new(file)))
}

/// Read a whole column file into memory.
pub fn read_column(path: &Path) -> Result<(ColumnHeader, Vec<f64>)> {
    let (header, mut reader) = open_column(path)?;
    let n = usize::try_from(header.event_count)
        .map_err(|_| Error::format("column too large for this platform"))?;
    let mut values = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        read_exact(&mut reader, &mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok((header, values))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn round_trip_preserves_bits() {
        let dir = tmp();
        let path = dir.path().join("x.col");
        let values = vec![
            0.0,
            -0.0,
            1.0,
            -1.5,
            f64::MIN_POSITIVE,
            f64::MIN_POSITIVE / 4.0, // subnormal
            f64::MAX,
            1.0e-308,
        ];
        write_column(&path, "x", &values).unwrap();
        let (header, back) = read_column(&path).unwrap();
        assert_eq!(header.name, "x");
        assert_eq!(header.event_count, 8);
        let got: Vec<u64> = back.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let dir = tmp();
        let path = dir.path().join("energy.col");
        let values: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        write_column(&path, "energy", &values).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        // 18 fixed header bytes + 6 name bytes + 8000 payload bytes.
        assert_eq!(len, 18 + 6 + 8000);
    }

    #[test]
    fn empty_column_is_valid() {
        let dir = tmp();
        let path = dir.path().join("x.col");
        write_column(&path, "x", &[]).unwrap();
        let (header, back) = read_column(&path).unwrap();
        assert_eq!(header.event_count, 0);
        assert!(back.is_empty());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("x.col");
        write_column(&path, "x", &[1.0, 2.0, 3.0]).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 5]).unwrap();
        let err = open_column(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");

        // Trailing garbage is just as corrupt as missing bytes.
        let mut long = full.clone();
        long.extend_from_slice(&[0u8; 3]);
        std::fs::write(&path, &long).unwrap();
        assert!(matches!(open_column(&path).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn bad_magic_version_and_type_are_rejected() {
        let dir = tmp();
        let path = dir.path().join("x.col");
        write_column(&path, "x", &[1.0]).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad = good.clone();
        bad[0] = b'Z';
        std::fs::write(&path, &bad).unwrap();
        assert!(open_column(&path)
            .unwrap_err()
            .to_string()
            .contains("magic"));

        let mut bad = good.clone();
        bad[4] = 9; // version
        std::fs::write(&path, &bad).unwrap();
        assert!(open_column(&path)
            .unwrap_err()
            .to_string()
            .contains("version"));

        let mut bad = good.clone();
        bad[6] = 7; // element type
        std::fs::write(&path, &bad).unwrap();
        assert!(open_column(&path)
            .unwrap_err()
            .to_string()
            .contains("element type"));
    }

    #[test]
    fn writer_enforces_declared_count() {
        let dir = tmp();
        let path = dir.path().join("x.col");
        let mut w = ColumnWriter::create(&path, "x", 4).unwrap();
        w.write_chunk(&[1.0, 2.0]).unwrap();
        assert!(w.finish().is_err()); // short

        let mut w = ColumnWriter::create(&path, "x", 1).unwrap();
        assert!(w.write_chunk(&[1.0, 2.0]).is_err()); // long
    }

    proptest! {
        /// Any bit pattern survives the disk round trip unchanged,
        /// NaN payloads included.
        #[test]
        fn round_trip_is_bit_transparent(bits in proptest::collection::vec(any::<u64>(), 0..200)) {
            let dir = tmp();
            let path = dir.path().join("b.col");
            let values: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
            write_column(&path, "b", &values).unwrap();
            let (_, back) = read_column(&path).unwrap();
            let got: Vec<u64> = back.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, bits);
        }
    }
}
