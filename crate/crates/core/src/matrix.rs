//! Row-major f32 matrix and the IRMB binary container.
//!
//! IRMB layout: magic `IRMB`, u32 version (= 1), u64 row count, u64 column
//! count, then row-major little-endian IEEE-754 32-bit floats.

use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const IRMB_MAGIC: [u8; 4] = *b"IRMB";
pub const IRMB_VERSION: u32 = 1;

/// Dense row-major matrix of 32-bit floats. Storage type for corpus features
/// and exported model weights; training math upcasts to f64.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: format!("{rows}x{cols} = {} values", rows * cols),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from per-row slices; every row must have the same width.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape {
                    expected: format!("row of width {cols}"),
                    got: format!("row {i} of width {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    /// New matrix containing the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Append a {0,1} indicator column. `bits` must have one entry per row.
    pub fn with_indicator_column(&self, bits: &[u8]) -> Result<Matrix> {
        if bits.len() != self.rows {
            return Err(Error::Shape {
                expected: format!("{} indicator bits", self.rows),
                got: format!("{}", bits.len()),
            });
        }
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for (i, &b) in bits.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(if b != 0 { 1.0 } else { 0.0 });
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Stack matrices vertically. All inputs must agree on width.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let rows = parts.iter().map(|m| m.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for m in parts {
            if m.cols != cols {
                return Err(Error::Shape {
                    expected: format!("width {cols}"),
                    got: format!("width {}", m.cols),
                });
            }
            data.extend_from_slice(&m.data);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn write_irmb<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&IRMB_MAGIC)?;
        w.write_all(&IRMB_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_irmb<R: Read>(mut r: R) -> Result<Matrix> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated IRMB header".into()))?;
        if magic != IRMB_MAGIC {
            return Err(Error::Format("bad magic bytes, not an IRMB file".into()));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)
            .map_err(|_| Error::Format("truncated IRMB header".into()))?;
        let version = u32::from_le_bytes(buf4);
        if version != IRMB_VERSION {
            return Err(Error::Format(format!(
                "unsupported IRMB version {version}, expected {IRMB_VERSION}"
            )));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)
            .map_err(|_| Error::Format("truncated IRMB header".into()))?;
        let rows = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)
            .map_err(|_| Error::Format("truncated IRMB header".into()))?;
        let cols = u64::from_le_bytes(buf8) as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("IRMB dimensions overflow".into()))?;
        // cap the upfront reservation so a corrupt header cannot force a
        // giant allocation before the payload read fails
        let mut data = Vec::with_capacity(count.min(1 << 22));
        let mut cell = [0u8; 4];
        for _ in 0..count {
            r.read_exact(&mut cell)
                .map_err(|_| Error::Format("truncated IRMB payload".into()))?;
            data.push(f32::from_le_bytes(cell));
        }
        // A trailing byte means the file does not match its own header.
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after IRMB payload".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_irmb(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Matrix> {
        let file = std::fs::File::open(path)?;
        Self::read_irmb(std::io::BufReader::new(file))
    }
}
