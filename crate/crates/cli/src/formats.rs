//! On-disk formats: PSNAP1 binary matrices and CSV run reports.
//!
//! PSNAP1 layout: the 8 magic bytes `PSNAP1\0\0`, then rows and cols as
//! little-endian u64, then rows·cols little-endian f64 in column-major order.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use romkit::DenseMatrix;

pub const MAGIC: &[u8; 8] = b"PSNAP1\0\0";
const HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("not a PSNAP1 file (bad magic bytes)")]
    BadMagic,
    #[error("truncated PSNAP1 data: header says {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("PSNAP1 dimensions {rows}×{cols} overflow")]
    Overflow { rows: u64, cols: u64 },
    #[error("malformed text: {0}")]
    Text(String),
}

pub fn encode_matrix(m: &DenseMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix<f64>, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"));
    let (rows, cols) = (word(8), word(16));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| usize::try_from(c).ok())
        .and_then(|c| c.checked_mul(8))
        .ok_or(FormatError::Overflow { rows, cols })?;
    if bytes.len() != HEADER_LEN + count {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN + count,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseMatrix::from_column_major(rows as usize, cols as usize, data).map_err(|e| FormatError::Text(e.to_string()))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix<f64>) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_matrix(m))?;
    f.flush()
}

pub fn read_matrix(path: &Path) -> io::Result<DenseMatrix<f64>> {
    decode_matrix(&fs::read(path)?)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// One row of a run report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub num_cells: usize,
    pub rom_size: Option<usize>,
    pub method: String,
    pub weighting: String,
    /// Residual rows kept by the weighting.
    pub z: usize,
    pub steps: usize,
    pub gn_iters_total: usize,
    pub wall_ms_total: f64,
    pub ms_per_iteration: f64,
    pub rel_l2: Option<f64>,
    pub rel_linf: Option<f64>,
    pub seed: u64,
}

pub const CSV_HEADER: &str =
    "N,p,method,weighting,z,steps,gn_iters_total,wall_ms_total,ms_per_iteration,rel_l2,rel_linf,seed";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

impl ReportRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.num_cells,
            opt(&self.rom_size),
            self.method,
            self.weighting,
            self.z,
            self.steps,
            self.gn_iters_total,
            self.wall_ms_total,
            self.ms_per_iteration,
            opt(&self.rel_l2),
            opt(&self.rel_linf),
            self.seed
        )
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    s
}

/// Parses a real vector from text: whitespace, commas or newlines separate values.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, FormatError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| FormatError::Text(format!("`{s}` is not a number")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnap_round_trip_is_exact() {
        let m = DenseMatrix::from_fn(3, 2, |i, j| {
            (i as f64 + 0.1) / (j as f64 + 3.0) * if i == 1 { -1e-300 } else { 1.0 }
        });
        let bytes = encode_matrix(&m);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(bytes.len(), 24 + 48);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(decode_matrix(&bytes).unwrap(), m);
        // First entry is column-major (0, 0), second is (1, 0).
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), m[(1, 0)]);
    }

    #[test]
    fn psnap_rejects_corruption() {
        let m = DenseMatrix::<f64>::identity(2);
        let mut bytes = encode_matrix(&m);
        assert!(matches!(
            decode_matrix(&bytes[..30]),
            Err(FormatError::Truncated { .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(decode_matrix(&bytes), Err(FormatError::BadMagic)));
    }

    #[test]
    fn csv_has_fixed_header() {
        let row = ReportRow {
            num_cells: 1024,
            rom_size: Some(32),
            method: "lspg".into(),
            weighting: "identity".into(),
            z: 1024,
            steps: 10,
            gn_iters_total: 12,
            wall_ms_total: 5.0,
            ms_per_iteration: 0.5,
            rel_l2: None,
            rel_linf: None,
            seed: 7,
        };
        let text = report_csv(&[row]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "1024,32,lspg,identity,1024,10,12,5,0.5,,,7");
    }

    #[test]
    fn vector_text() {
        assert_eq!(parse_vector("1, 2\n3.5 ").unwrap(), vec![1.0, 2.0, 3.5]);
        assert!(parse_vector("1 x").is_err());
    }
}
