//! FMAT binary tensor format.
//!
//! One record is: magic `FMT1`, little-endian u32 ndim, ndim little-endian
//! u32 dims, then the row-major IEEE-754 binary32 payload, no padding. A
//! file holds one or more back-to-back records (a multi-layer feature
//! stack is a sequence of 3-D records; a matrix or map is a single 2-D
//! record). Reads and writes are byte-exact: payload bit patterns survive
//! a round trip untouched.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const FMAT_MAGIC: [u8; 4] = *b"FMT1";

/// Refuse to allocate payloads past this many elements when reading.
const MAX_ELEMENTS: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct FmatRecord {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl FmatRecord {
    pub fn element_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

pub fn write_records(path: &Path, records: &[FmatRecord]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        debug_assert_eq!(rec.element_count(), rec.data.len());
        w.write_all(&FMAT_MAGIC)
            .and_then(|_| w.write_all(&(rec.dims.len() as u32).to_le_bytes()))
            .map_err(|e| CliError::io(path.display(), e))?;
        for &d in &rec.dims {
            w.write_all(&d.to_le_bytes())
                .map_err(|e| CliError::io(path.display(), e))?;
        }
        for &v in &rec.data {
            w.write_all(&v.to_le_bytes())
                .map_err(|e| CliError::io(path.display(), e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Read every record in the file. Corruption or truncation is reported
/// with the byte offset where parsing stopped.
pub fn read_records(path: &Path) -> CliResult<Vec<FmatRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut r = BufReader::new(file);
    let mut offset: u64 = 0;
    let mut records = Vec::new();

    loop {
        let mut magic = [0u8; 4];
        match read_exact_or_eof(&mut r, &mut magic) {
            ReadOutcome::Eof => break,
            ReadOutcome::Partial(read) => {
                return Err(format_err(path, offset + read as u64, "truncated magic"));
            }
            ReadOutcome::Full => {}
        }
        if magic != FMAT_MAGIC {
            return Err(format_err(path, offset, "bad magic, expected FMT1"));
        }
        offset += 4;

        let ndim = read_u32(&mut r, path, &mut offset, "ndim")?;
        if ndim == 0 || ndim > 8 {
            return Err(format_err(path, offset - 4, &format!("unreasonable ndim {ndim}")));
        }
        let mut dims = Vec::with_capacity(ndim as usize);
        for i in 0..ndim {
            dims.push(read_u32(&mut r, path, &mut offset, &format!("dim {i}"))?);
        }
        let elements = dims.iter().map(|&d| u64::from(d)).product::<u64>();
        if elements > MAX_ELEMENTS {
            return Err(format_err(path, offset, &format!("payload of {elements} elements refused")));
        }

        let mut data = Vec::with_capacity(elements as usize);
        let mut buf = [0u8; 4];
        for i in 0..elements {
            match read_exact_or_eof(&mut r, &mut buf) {
                ReadOutcome::Full => data.push(f32::from_le_bytes(buf)),
                ReadOutcome::Eof | ReadOutcome::Partial(_) => {
                    return Err(format_err(
                        path,
                        offset + i * 4,
                        &format!("truncated payload, expected {elements} elements"),
                    ));
                }
            }
        }
        offset += elements * 4;
        records.push(FmatRecord { dims, data });
    }

    if records.is_empty() {
        return Err(format_err(path, 0, "empty file, no FMAT records"));
    }
    Ok(records)
}

fn format_err(path: &Path, offset: u64, what: &str) -> CliError {
    CliError::Io(format!("{}: {what} at byte {offset}", path.display()))
}

enum ReadOutcome {
    Full,
    Eof,
    Partial(usize),
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> ReadOutcome {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return if filled == 0 {
                    ReadOutcome::Eof
                } else {
                    ReadOutcome::Partial(filled)
                };
            }
            Ok(n) => filled += n,
            Err(_) => return ReadOutcome::Partial(filled),
        }
    }
    ReadOutcome::Full
}

fn read_u32(r: &mut impl Read, path: &Path, offset: &mut u64, what: &str) -> CliResult<u32> {
    let mut buf = [0u8; 4];
    match read_exact_or_eof(r, &mut buf) {
        ReadOutcome::Full => {
            *offset += 4;
            Ok(u32::from_le_bytes(buf))
        }
        ReadOutcome::Eof | ReadOutcome::Partial(_) => {
            Err(format_err(path, *offset, &format!("truncated {what}")))
        }
    }
}

// ── Conversions to core types ───────────────────────────────────────

pub fn matrix_record(m: &sigrep_core::Matrix) -> FmatRecord {
    FmatRecord {
        dims: vec![m.rows() as u32, m.cols() as u32],
        data: m.data().iter().map(|&v| v as f32).collect(),
    }
}

/// Interpret a sequence of 3-D records as a feature stack.
pub fn records_to_stack(path: &Path, records: Vec<FmatRecord>) -> CliResult<sigrep_core::FeatureStack> {
    let mut layers = Vec::with_capacity(records.len());
    for (idx, rec) in records.into_iter().enumerate() {
        if rec.dims.len() != 3 {
            return Err(CliError::Usage(format!(
                "{}: record {idx} has {} dims, feature stacks need 3-D records",
                path.display(),
                rec.dims.len()
            )));
        }
        let (c, h, w) = (rec.dims[0] as usize, rec.dims[1] as usize, rec.dims[2] as usize);
        let data: Vec<f64> = rec.data.iter().map(|&v| f64::from(v)).collect();
        let tensor = sigrep_core::Tensor3::new(c, h, w, data)
            .map_err(|e| CliError::Usage(format!("{}: record {idx}: {e}", path.display())))?;
        layers.push(tensor);
    }
    Ok(sigrep_core::FeatureStack { layers })
}
