//! Flat float32 matrix files: a 16-byte header `{magic, version, rows, cols}`
//! (little-endian `u32`s after the 4-byte magic) followed by row-major
//! little-endian `f32` values.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Array2;

pub const MAGIC: &[u8; 4] = b"VIMF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum TensorFileError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Malformed(String),
}

pub fn encode(matrix: &Array2<f32>) -> Vec<u8> {
    let (rows, cols) = matrix.dim();
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in matrix.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Parses the header only, returning `(rows, cols)`.
pub fn decode_header(bytes: &[u8]) -> Result<(usize, usize), TensorFileError> {
    if bytes.len() < HEADER_LEN {
        return Err(TensorFileError::Malformed(format!(
            "file is {} bytes, shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(TensorFileError::Malformed("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(TensorFileError::Malformed(format!(
            "unsupported version {version}"
        )));
    }
    Ok((word(8) as usize, word(12) as usize))
}

pub fn decode(bytes: &[u8]) -> Result<Array2<f32>, TensorFileError> {
    let (rows, cols) = decode_header(bytes)?;
    let expected = HEADER_LEN + rows * cols * 4;
    if bytes.len() != expected {
        return Err(TensorFileError::Malformed(format!(
            "header says {rows}x{cols} ({expected} bytes) but file holds {} bytes",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| TensorFileError::Malformed(e.to_string()))
}

pub fn write(path: &Path, matrix: &Array2<f32>) -> Result<(), TensorFileError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(matrix))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Array2<f32>, TensorFileError> {
    decode(&fs::read(path)?)
}
