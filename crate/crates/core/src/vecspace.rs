//! Dense vector storage and distance kernels.
//!
//! Vectors are kept apart from graph records and addressed by [`PointId`],
//! so a point indexed at several grid layers stores its embedding once.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PointId;

/// Distance used for ranking. Smaller is always more similar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    #[default]
    SquaredEuclidean,
    /// `-<a, b>`.
    InnerProduct,
}

impl DistanceMetric {
    pub(crate) fn as_u8(self) -> u8 {
        match self {
            DistanceMetric::SquaredEuclidean => 0,
            DistanceMetric::InnerProduct => 1,
        }
    }

    pub(crate) fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(DistanceMetric::SquaredEuclidean),
            1 => Some(DistanceMetric::InnerProduct),
            _ => None,
        }
    }

    /// Checked distance between two rows.
    pub fn distance(self, a: &[f32], b: &[f32]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "dimension mismatch: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        Ok(self.eval(a, b))
    }

    /// Checked distance that also bumps `counter`.
    pub fn distance_counted(self, a: &[f32], b: &[f32], counter: &mut u64) -> Result<f64> {
        let d = self.distance(a, b)?;
        *counter += 1;
        Ok(d)
    }

    /// Unchecked kernel. Callers guarantee equal lengths.
    #[inline]
    pub fn eval(self, a: &[f32], b: &[f32]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            DistanceMetric::SquaredEuclidean => squared_l2(a, b),
            DistanceMetric::InnerProduct => -dot(a, b),
        }
    }

    /// Converts an internal distance to the value reported to users.
    pub fn external(self, d: f64) -> f64 {
        match self {
            DistanceMetric::SquaredEuclidean => d.max(0.0).sqrt(),
            DistanceMetric::InnerProduct => d,
        }
    }
}

#[inline]
fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            let d = x[i] as f64 - y[i] as f64;
            acc[i] += d * d;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        let d = *x as f64 - *y as f64;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = [0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] as f64 * y[i] as f64;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        tail += *x as f64 * *y as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// On-disk layout accepted by [`load_vectors`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    /// Repeated `[i32 d][d x f32]` records, little-endian.
    Fvecs,
    /// `[u32 count][u32 dim]` followed by `count * dim` little-endian f32.
    RawF32,
}

impl VectorFormat {
    /// Picks a format from the file extension; anything but `.fvecs` is raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fvecs") => VectorFormat::Fvecs,
            _ => VectorFormat::RawF32,
        }
    }
}

/// Row-major `count x dim` f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStore {
    dim: usize,
    data: Vec<f32>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        Ok(Self {
            dim,
            data: Vec::new(),
        })
    }

    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "{} floats is not a multiple of dim {}",
                data.len(),
                dim
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::invalid("no rows"))?;
        let mut store = Self::new(dim)?;
        for row in rows {
            store.push(row.as_ref())?;
        }
        Ok(store)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, id: PointId) -> &[f32] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn get(&self, id: PointId) -> Option<&[f32]> {
        ((id as usize) < self.len()).then(|| self.row(id))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Appends a row and returns its id.
    pub fn push(&mut self, row: &[f32]) -> Result<PointId> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: expected {}, got {}",
                self.dim,
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite vector entry".into()));
        }
        let id = self.len();
        if id >= PointId::MAX as usize {
            return Err(Error::invalid("vector store is full"));
        }
        self.data.extend_from_slice(row);
        Ok(id as PointId)
    }

    /// Stable content hash used by index files to detect mismatched stores.
    pub fn checksum(&self) -> u64 {
        let mut h = crate::cubeindex::persist::Checksum::new();
        h.update(&(self.dim as u64).to_le_bytes());
        for v in &self.data {
            h.update(&v.to_le_bytes());
        }
        h.finish()
    }
}

/// Reads a vector file.
pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<VectorStore> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut bytes)?;
    match format {
        VectorFormat::Fvecs => parse_fvecs(&bytes),
        VectorFormat::RawF32 => parse_raw(&bytes),
    }
}

fn parse_fvecs(bytes: &[u8]) -> Result<VectorStore> {
    let records = parse_vecs_records(bytes)?;
    let dim = records.0;
    let data = records
        .1
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VectorStore::from_flat(dim, data).map_err(|e| match e {
        Error::InvalidData(m) => Error::Format(m),
        other => other,
    })
}

/// Splits `[i32 d][d x 4 bytes]` records; returns `(d, concatenated payload)`.
fn parse_vecs_records(bytes: &[u8]) -> Result<(usize, Vec<u8>)> {
    if bytes.is_empty() {
        return Err(Error::format("empty vector file"));
    }
    let mut pos = 0usize;
    let mut dim: Option<usize> = None;
    let mut payload = Vec::with_capacity(bytes.len());
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::format(format!("truncated record header at byte {pos}")));
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d <= 0 {
            return Err(Error::format(format!("non-positive dimension {d} at byte {pos}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(format!(
                    "inconsistent record dimension {d}, expected {expected}"
                )));
            }
            _ => {}
        }
        pos += 4;
        let len = d * 4;
        if bytes.len() - pos < len {
            return Err(Error::format(format!("truncated record body at byte {pos}")));
        }
        payload.extend_from_slice(&bytes[pos..pos + len]);
        pos += len;
    }
    Ok((dim.expect("at least one record"), payload))
}

fn parse_raw(bytes: &[u8]) -> Result<VectorStore> {
    if bytes.len() < 8 {
        return Err(Error::format("raw vector file shorter than its header"));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::format("raw vector file declares dim 0"));
    }
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format("raw vector header overflows"))?;
    if bytes.len() - 8 != expected {
        return Err(Error::format(format!(
            "raw vector payload is {} bytes, header implies {}",
            bytes.len() - 8,
            expected
        )));
    }
    let data = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VectorStore::from_flat(dim, data).map_err(|e| match e {
        Error::InvalidData(m) => Error::Format(m),
        other => other,
    })
}

pub fn save_vectors(store: &VectorStore, path: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    match format {
        VectorFormat::Fvecs => {
            for row in store.rows() {
                w.write_all(&(store.dim as i32).to_le_bytes())?;
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        VectorFormat::RawF32 => {
            w.write_all(&(store.len() as u32).to_le_bytes())?;
            w.write_all(&(store.dim as u32).to_le_bytes())?;
            for v in &store.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes fixed-width i32 records in ivecs layout.
pub fn write_ivecs(path: impl AsRef<Path>, rows: &[Vec<i32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut bytes)?;
    let (dim, payload) = parse_vecs_records(&bytes)?;
    Ok(payload
        .chunks_exact(4 * dim)
        .map(|rec| {
            rec.chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect()
        })
        .collect())
}

/// Writes f32 rows in fvecs layout. Rows may hold non-finite padding values.
pub fn write_fvecs_rows(path: impl AsRef<Path>, rows: &[Vec<f32>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads fvecs rows without the finiteness check applied to vector stores.
pub fn read_fvecs_rows(path: impl AsRef<Path>) -> Result<Vec<Vec<f32>>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path.as_ref())?).read_to_end(&mut bytes)?;
    let (dim, payload) = parse_vecs_records(&bytes)?;
    Ok(payload
        .chunks_exact(4 * dim)
        .map(|rec| {
            rec.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect()
        })
        .collect())
}
