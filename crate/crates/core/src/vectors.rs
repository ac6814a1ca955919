//! Embedding matrices and the `FTSVEC01` binary format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic  8 bytes  "FTSVEC01"
//! dim    u32
//! rows   u64
//! data   rows * dim f32, row-major
//! keys   rows * (u32 byte length + UTF-8 bytes)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"FTSVEC01";

#[derive(Debug, Error)]
pub enum VectorError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic, expected FTSVEC01")]
    BadMagic,
    #[error("file truncated while reading {0}")]
    TruncatedFile(&'static str),
    #[error("{0} unexpected trailing bytes")]
    TrailingData(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NaNDetected { row: usize, col: usize },
    #[error("key {0} is not valid UTF-8")]
    InvalidKey(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("zero vector at row {0}")]
    ZeroVector(usize),
}

/// Row-major `f32` matrix with one key per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    keys: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, keys: Vec<String>) -> Result<Self, VectorError> {
        if dim == 0 {
            return Err(VectorError::Shape("dim must be positive".into()));
        }
        if data.len() != dim * keys.len() {
            return Err(VectorError::Shape(format!(
                "{} values for {} keys of dim {dim}",
                data.len(),
                keys.len()
            )));
        }
        check_finite(&data, dim)?;
        Ok(Self { dim, data, keys })
    }

    pub fn from_rows(keys: Vec<String>, rows: &[Vec<f32>]) -> Result<Self, VectorError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(VectorError::Shape(format!("row {i} has {} values, expected {dim}", rows[i].len())));
        }
        Self::new(dim, rows.concat(), keys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row `i` widened to `f64`.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&x| f64::from(x)).collect()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        for k in &self.keys {
            w.write_all(&(k.len() as u32).to_le_bytes())?;
            w.write_all(k.as_bytes())?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VectorError> {
        let mut cur = Cursor { buf: bytes, pos: 0 };
        let magic = cur.take(8, "magic")?;
        if magic != MAGIC {
            return Err(VectorError::BadMagic);
        }
        let dim = u32::from_le_bytes(cur.array("dim")?) as usize;
        let rows = u64::from_le_bytes(cur.array("rows")?) as usize;
        if dim == 0 {
            return Err(VectorError::Shape("dim must be positive".into()));
        }
        let n = rows
            .checked_mul(dim)
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= bytes.len()))
            .ok_or(VectorError::TruncatedFile("data"))?;
        let raw = cur.take(n * 4, "data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        check_finite(&data, dim)?;
        let mut keys = Vec::with_capacity(rows);
        for i in 0..rows {
            let len = u32::from_le_bytes(cur.array("key length")?) as usize;
            let k = cur.take(len, "key")?;
            keys.push(String::from_utf8(k.to_vec()).map_err(|_| VectorError::InvalidKey(i))?);
        }
        if cur.pos != bytes.len() {
            return Err(VectorError::TrailingData(bytes.len() - cur.pos));
        }
        Ok(Self { dim, data, keys })
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], VectorError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(VectorError::TruncatedFile(what))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], VectorError> {
        Ok(self.take(N, what)?.try_into().expect("slice has length N"))
    }
}

fn check_finite(data: &[f32], dim: usize) -> Result<(), VectorError> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(VectorError::NaNDetected { row: i / dim, col: i % dim }),
        None => Ok(()),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> VectorError + '_ {
    move |source| VectorError::Io { path: path.display().to_string(), source }
}

/// Writes through a temporary sibling file, then renames into place.
pub fn write_vectors(matrix: &EmbeddingMatrix, path: &Path) -> Result<(), VectorError> {
    check_finite(&matrix.data, matrix.dim)?;
    let tmp = path.with_extension("ftsvec.tmp");
    let file = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    matrix.write_to(std::io::BufWriter::new(file)).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_vectors(path: &Path) -> Result<EmbeddingMatrix, VectorError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`. `None` if either side is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Scales every row to unit Euclidean norm. Norms are computed in `f64`.
pub fn normalize_rows(matrix: &EmbeddingMatrix) -> Result<EmbeddingMatrix, VectorError> {
    let mut data = Vec::with_capacity(matrix.data.len());
    for (i, row) in matrix.iter_rows().enumerate() {
        let n = row.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(VectorError::ZeroVector(i));
        }
        data.extend(row.iter().map(|&x| (f64::from(x) / n) as f32));
    }
    Ok(EmbeddingMatrix { dim: matrix.dim, data, keys: matrix.keys.clone() })
}
