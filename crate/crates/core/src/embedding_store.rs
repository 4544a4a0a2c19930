//! Embedding and label containers plus their on-disk formats.
//!
//! EMB1 (little-endian):
//!
//! ```text
//! "EMB1" | u8 version=1 | u8 dtype=1 (f32) | u16 reserved=0 | u64 n | u64 d | n*d f32
//! ```
//!
//! LAB1 (little-endian):
//!
//! ```text
//! "LAB1" | u8 version=1 | 3 x u8 reserved=0 | u64 n | n u32
//! ```
//!
//! Anything that is not EMB1 by its magic bytes is parsed as headerless CSV,
//! one point per row.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EMB_MAGIC: [u8; 4] = *b"EMB1";
pub const LAB_MAGIC: [u8; 4] = *b"LAB1";
const FORMAT_VERSION: u8 = 1;
const DTYPE_F32: u8 = 1;
const EMB_HEADER_LEN: usize = 4 + 1 + 1 + 2 + 8 + 8;
const LAB_HEADER_LEN: usize = 4 + 1 + 3 + 8;

/// Row-major `n x d` feature matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T: Scalar = f32> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    /// Validating constructor; the only way a matrix comes into existence.
    pub fn new(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyMatrix { n, d });
        }
        let expected = n.checked_mul(d).ok_or(Error::SizeMismatch {
            expected: usize::MAX,
            found: data.len(),
        })?;
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Converts storage precision. Narrowing rounds to nearest; a value that
    /// overflows the target type is reported as non-finite.
    pub fn cast<U: Scalar>(&self) -> Result<EmbeddingMatrix<U>> {
        let data = self.data.iter().map(|v| U::narrow(v.widen())).collect();
        EmbeddingMatrix::new(self.n, self.d, data)
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.d, data)
    }
}

/// Class id per point; every label is `< num_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<u32>,
    num_classes: usize,
}

impl LabelVector {
    /// `num_classes` is inferred as `1 + max label`.
    pub fn new(labels: Vec<u32>) -> Result<Self> {
        let max = labels.iter().copied().max().ok_or(Error::EmptyFile)?;
        Ok(Self {
            labels,
            num_classes: max as usize + 1,
        })
    }

    /// Explicit class count, for datasets where the top classes are absent.
    pub fn with_num_classes(labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyFile);
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// Widens the class count; narrowing below `1 + max label` is rejected.
    pub fn override_num_classes(self, num_classes: usize) -> Result<Self> {
        Self::with_num_classes(self.labels, num_classes)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::IoFailure {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.flush().map_err(io)
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Loads an EMB1 file, or headerless CSV when the magic bytes are absent.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix<f32>> {
    let bytes = read_file(path.as_ref())?;
    if bytes.starts_with(&EMB_MAGIC) {
        decode_emb1(&bytes)
    } else {
        parse_embeddings_csv(&bytes)
    }
}

pub fn save_embeddings(m: &EmbeddingMatrix<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_emb1(m))
}

pub fn encode_emb1(m: &EmbeddingMatrix<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(EMB_HEADER_LEN + 4 * m.data.len());
    out.extend_from_slice(&EMB_MAGIC);
    out.push(FORMAT_VERSION);
    out.push(DTYPE_F32);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(m.n as u64).to_le_bytes());
    out.extend_from_slice(&(m.d as u64).to_le_bytes());
    for v in &m.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingMatrix<f32>> {
    if bytes.len() < EMB_HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "EMB1 header needs {EMB_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes[..4] != EMB_MAGIC {
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {}", bytes[4])));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::MalformedHeader(format!("unsupported dtype {}", bytes[5])));
    }
    if bytes[6..8] != [0, 0] {
        return Err(Error::MalformedHeader("reserved bytes must be zero".into()));
    }
    let n = u64_at(bytes, 8);
    let d = u64_at(bytes, 16);
    let payload = &bytes[EMB_HEADER_LEN..];
    if payload.len() % 4 != 0 {
        return Err(Error::MalformedHeader(format!(
            "payload of {} bytes is not a whole number of f32 values",
            payload.len()
        )));
    }
    let found = payload.len() / 4;
    let expected = usize::try_from(n)
        .ok()
        .zip(usize::try_from(d).ok())
        .and_then(|(n, d)| n.checked_mul(d));
    match expected {
        Some(e) if e == found => {}
        Some(e) => return Err(Error::SizeMismatch { expected: e, found }),
        None => {
            return Err(Error::SizeMismatch {
                expected: usize::MAX,
                found,
            })
        }
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmbeddingMatrix::new(n as usize, d as usize, data)
}

fn parse_embeddings_csv(bytes: &[u8]) -> Result<EmbeddingMatrix<f32>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::MalformedHeader("neither EMB1 nor UTF-8 CSV".into()))?;
    let mut data = Vec::new();
    let mut n = 0usize;
    let mut d = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| Error::MalformedValue {
                line: lineno + 1,
                text: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: n,
                    col: data.len() - before,
                });
            }
            data.push(v);
        }
        let width = data.len() - before;
        if n == 0 {
            d = width;
        } else if width != d {
            return Err(Error::SizeMismatch {
                expected: (n + 1) * d,
                found: before + width,
            });
        }
        n += 1;
    }
    EmbeddingMatrix::new(n, d, data)
}

/// Loads a LAB1 file, or one non-negative integer per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let bytes = read_file(path.as_ref())?;
    if bytes.starts_with(&LAB_MAGIC) {
        decode_lab1(&bytes)
    } else {
        parse_labels_csv(&bytes)
    }
}

pub fn save_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_lab1(labels))
}

pub fn encode_lab1(labels: &LabelVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(LAB_HEADER_LEN + 4 * labels.len());
    out.extend_from_slice(&LAB_MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&[0, 0, 0]);
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    for l in &labels.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_lab1(bytes: &[u8]) -> Result<LabelVector> {
    if bytes.len() < LAB_HEADER_LEN {
        return Err(Error::MalformedHeader(format!(
            "LAB1 header needs {LAB_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if bytes[..4] != LAB_MAGIC {
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::MalformedHeader(format!("unsupported version {}", bytes[4])));
    }
    if bytes[5..8] != [0, 0, 0] {
        return Err(Error::MalformedHeader("reserved bytes must be zero".into()));
    }
    let n = u64_at(bytes, 8);
    let payload = &bytes[LAB_HEADER_LEN..];
    if payload.len() % 4 != 0 {
        return Err(Error::MalformedHeader(format!(
            "payload of {} bytes is not a whole number of u32 values",
            payload.len()
        )));
    }
    let found = payload.len() / 4;
    if n != found as u64 {
        return Err(Error::SizeMismatch {
            expected: usize::try_from(n).unwrap_or(usize::MAX),
            found,
        });
    }
    let labels: Vec<u32> = payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelVector::new(labels)
}

fn parse_labels_csv(bytes: &[u8]) -> Result<LabelVector> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::MalformedLabel {
        line: 0,
        text: "<binary>".into(),
    })?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l: u32 = line.parse().map_err(|_| Error::MalformedLabel {
            line: lineno + 1,
            text: line.to_string(),
        })?;
        labels.push(l);
    }
    LabelVector::new(labels)
}
