//! Metadata normalization and hierarchical grid geometry.
//!
//! All grid math happens in the normalized unit hypercube. Layer `l` splits
//! every axis into `g_l = 2^(l+1)` cells of width `w_l = 1 / g_l`.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::PointId;

/// Axis-aligned box of the raw metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Raw and normalized metadata rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaStore {
    mdim: usize,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    bbox: BoundingBox,
}

impl MetaStore {
    /// Computes the global bounding box of `rows` and normalizes against it.
    pub fn normalize<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("metadata needs at least one row"))?;
        let mdim = first.as_ref().len();
        let mut flat = Vec::with_capacity(rows.len() * mdim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != mdim {
                return Err(Error::InvalidData(format!(
                    "metadata row {i} has {} columns, expected {mdim}",
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(mdim, flat)
    }

    pub fn from_flat(mdim: usize, raw: Vec<f64>) -> Result<Self> {
        if mdim == 0 {
            return Err(Error::invalid("metadata dimension must be positive"));
        }
        if raw.is_empty() || !raw.len().is_multiple_of(mdim) {
            return Err(Error::InvalidData(format!(
                "{} metadata values do not form rows of {mdim}",
                raw.len()
            )));
        }
        if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite metadata in row {}",
                pos / mdim
            )));
        }
        let mut lo = vec![f64::INFINITY; mdim];
        let mut hi = vec![f64::NEG_INFINITY; mdim];
        for row in raw.chunks_exact(mdim) {
            for i in 0..mdim {
                lo[i] = lo[i].min(row[i]);
                hi[i] = hi[i].max(row[i]);
            }
        }
        Self::with_bbox(mdim, raw, BoundingBox { lo, hi })
    }

    /// Normalizes `raw` against a fixed box. Values outside it are clamped.
    pub fn with_bbox(mdim: usize, raw: Vec<f64>, bbox: BoundingBox) -> Result<Self> {
        if bbox.lo.len() != mdim || bbox.hi.len() != mdim {
            return Err(Error::invalid("bounding box dimension mismatch"));
        }
        if !raw.len().is_multiple_of(mdim) {
            return Err(Error::InvalidData("ragged metadata".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite metadata".into()));
        }
        let mut store = Self {
            mdim,
            raw: Vec::with_capacity(raw.len()),
            normalized: Vec::with_capacity(raw.len()),
            bbox,
        };
        for row in raw.chunks_exact(mdim) {
            store.push_unchecked(row);
        }
        Ok(store)
    }

    fn push_unchecked(&mut self, row: &[f64]) {
        self.raw.extend_from_slice(row);
        for (i, v) in row.iter().enumerate() {
            let (lo, hi) = (self.bbox.lo[i], self.bbox.hi[i]);
            let n = if hi > lo {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            };
            self.normalized.push(n);
        }
    }

    /// Appends a raw row normalized against the existing box.
    pub fn push(&mut self, row: &[f64]) -> Result<PointId> {
        if row.len() != self.mdim {
            return Err(Error::invalid(format!(
                "metadata has {} columns, expected {}",
                row.len(),
                self.mdim
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite metadata".into()));
        }
        let id = self.len() as PointId;
        self.push_unchecked(row);
        Ok(id)
    }

    pub fn mdim(&self) -> usize {
        self.mdim
    }

    pub fn len(&self) -> usize {
        self.raw.len() / self.mdim
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn raw(&self, id: PointId) -> &[f64] {
        let s = id as usize * self.mdim;
        &self.raw[s..s + self.mdim]
    }

    #[inline]
    pub fn point(&self, id: PointId) -> &[f64] {
        let s = id as usize * self.mdim;
        &self.normalized[s..s + self.mdim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.normalized.chunks_exact(self.mdim)
    }

    pub fn raw_flat(&self) -> &[f64] {
        &self.raw
    }

    /// Content hash of the raw rows.
    pub fn checksum(&self) -> u64 {
        let mut h = crate::cubeindex::persist::Checksum::new();
        h.update(&(self.mdim as u64).to_le_bytes());
        for v in &self.raw {
            h.update(&v.to_le_bytes());
        }
        h.finish()
    }
}

/// Reads metadata rows from CSV. A non-numeric first row is taken as a header.
pub fn read_metadata_csv(path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut mdim = None;
    let mut flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::format(format!("metadata line {}: {e}", i + 1)));
            }
        };
        match mdim {
            None => mdim = Some(row.len()),
            Some(m) if m != row.len() => {
                return Err(Error::format(format!(
                    "metadata line {} has {} columns, expected {m}",
                    i + 1,
                    row.len()
                )));
            }
            _ => {}
        }
        flat.extend(row);
    }
    let mdim = mdim.ok_or_else(|| Error::format("metadata file has no rows"))?;
    Ok((mdim, flat))
}

pub fn write_metadata_csv(path: impl AsRef<Path>, mdim: usize, flat: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let header: Vec<String> = (0..mdim).map(|i| format!("s{i}")).collect();
    w.write_record(&header)?;
    for row in flat.chunks_exact(mdim) {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawMetaSidecar {
    count: usize,
    mdim: usize,
}

/// Reads little-endian f32 rows with a `<path>.json` sidecar `{count, mdim}`.
pub fn read_metadata_raw(path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
    let path = path.as_ref();
    let sidecar: RawMetaSidecar =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() != sidecar.count * sidecar.mdim * 4 {
        return Err(Error::format(format!(
            "raw metadata is {} bytes, sidecar implies {}",
            bytes.len(),
            sidecar.count * sidecar.mdim * 4
        )));
    }
    let flat = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((sidecar.mdim, flat))
}

pub fn write_metadata_raw(path: impl AsRef<Path>, mdim: usize, flat: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = flat.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    let sidecar = RawMetaSidecar {
        count: flat.len() / mdim,
        mdim,
    };
    std::fs::write(sidecar_path(path), serde_json::to_vec(&sidecar)?)?;
    Ok(())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Reads metadata by extension: `.csv` is CSV, anything else raw f32 with a sidecar.
pub fn read_metadata(path: impl AsRef<Path>) -> Result<(usize, Vec<f64>)> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_metadata_csv(path),
        _ => read_metadata_raw(path),
    }
}

pub fn write_metadata(path: impl AsRef<Path>, mdim: usize, flat: &[f64]) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_metadata_csv(path, mdim, flat),
        _ => write_metadata_raw(path, mdim, flat),
    }
}

/// Shape of the layer hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub layers: usize,
    pub mdim: usize,
    pub min_cube_points: usize,
}

impl GridConfig {
    pub const DEFAULT_LAYERS: usize = 6;
    pub const DEFAULT_MIN_CUBE_POINTS: usize = 50;
    /// Deepest layer whose granularity still fits the cube-id encoding.
    pub const MAX_LAYERS: usize = 20;

    pub fn new(layers: usize, mdim: usize) -> Result<Self> {
        let cfg = Self {
            layers,
            mdim,
            min_cube_points: Self::DEFAULT_MIN_CUBE_POINTS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.layers > Self::MAX_LAYERS {
            return Err(Error::invalid(format!(
                "layer count must be in 1..={}, got {}",
                Self::MAX_LAYERS,
                self.layers
            )));
        }
        if self.mdim == 0 {
            return Err(Error::invalid("metadata dimension must be positive"));
        }
        if (self.layers as u32 * self.mdim as u32) > 63 {
            return Err(Error::invalid("too many layers for this metadata dimension"));
        }
        Ok(())
    }

    #[inline]
    pub fn granularity(&self, layer: usize) -> u32 {
        1u32 << (layer + 1)
    }

    #[inline]
    pub fn width(&self, layer: usize) -> f64 {
        1.0 / self.granularity(layer) as f64
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.layers).map(|l| self.width(l)).collect()
    }

    /// Number of cubes at `layer`.
    pub fn cube_count(&self, layer: usize) -> u64 {
        (self.granularity(layer) as u64).pow(self.mdim as u32)
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.layers {
            return Err(Error::invalid(format!(
                "layer {layer} out of range 0..{}",
                self.layers
            )));
        }
        Ok(())
    }

    /// Cube containing `point` at `layer`.
    pub fn cube_id(&self, point: &[f64], layer: usize) -> Result<CubeId> {
        self.check_layer(layer)?;
        if point.len() != self.mdim {
            return Err(Error::invalid(format!(
                "point has {} dims, grid has {}",
                point.len(),
                self.mdim
            )));
        }
        let g = self.granularity(layer);
        let coords: Vec<u32> = point.iter().map(|&p| cell_index(p, g)).collect();
        Ok(CubeId::from_coords(layer, g, coords))
    }

    /// Linear id of the cube containing `point`, without allocating.
    #[inline]
    pub fn linear_id(&self, point: &[f64], layer: usize) -> u64 {
        let g = self.granularity(layer);
        let mut linear = 0u64;
        for &p in point.iter().rev() {
            linear = linear * g as u64 + cell_index(p, g) as u64;
        }
        linear
    }

    /// Face-adjacent cubes inside the grid.
    pub fn adjacent_cubes(&self, cube: &CubeId) -> Vec<CubeId> {
        let g = self.granularity(cube.layer);
        let mut out = Vec::with_capacity(2 * self.mdim);
        for dir in 0..2 * self.mdim {
            if let Some(c) = cube.neighbor(dir, g) {
                out.push(c);
            }
        }
        out
    }

    /// Layer whose width lies in `(r/2, r]`, clamped to the top and bottom layers.
    pub fn select_layer(&self, r: f64) -> Result<usize> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!(
                "characteristic length must be positive, got {r}"
            )));
        }
        // Widths decrease with depth, so the first layer with w <= r is the
        // one with the largest width not exceeding r.
        let widths = self.widths();
        let layer = widths.partition_point(|&w| w > r);
        Ok(layer.min(self.layers - 1))
    }
}

/// Coordinate of the cell holding `p` on an axis of `g` cells.
#[inline]
pub fn cell_index(p: f64, g: u32) -> u32 {
    let c = (p * g as f64).floor();
    if c <= 0.0 {
        0
    } else {
        (c as u32).min(g - 1)
    }
}

/// A grid cell at one layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub layer: usize,
    pub coords: Vec<u32>,
    pub linear: u64,
}

impl CubeId {
    /// Builds an id from coordinates; dimension 0 varies fastest in `linear`.
    pub fn from_coords(layer: usize, g: u32, coords: Vec<u32>) -> Self {
        let linear = encode(&coords, g);
        Self {
            layer,
            coords,
            linear,
        }
    }

    pub fn from_linear(layer: usize, g: u32, mdim: usize, linear: u64) -> Self {
        Self {
            layer,
            coords: decode(linear, g, mdim),
            linear,
        }
    }

    /// Neighbor across face `dir`: `2*i` steps down axis `i`, `2*i + 1` steps up.
    pub fn neighbor(&self, dir: usize, g: u32) -> Option<CubeId> {
        let axis = dir / 2;
        let c = self.coords[axis];
        let next = if dir.is_multiple_of(2) {
            c.checked_sub(1)?
        } else if c + 1 < g {
            c + 1
        } else {
            return None;
        };
        let mut coords = self.coords.clone();
        coords[axis] = next;
        Some(CubeId::from_coords(self.layer, g, coords))
    }

    /// Center of the cell in normalized space.
    pub fn center(&self, g: u32) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&c| (c as f64 + 0.5) / g as f64)
            .collect()
    }
}

pub fn encode(coords: &[u32], g: u32) -> u64 {
    coords
        .iter()
        .rev()
        .fold(0u64, |acc, &c| acc * g as u64 + c as u64)
}

pub fn decode(mut linear: u64, g: u32, mdim: usize) -> Vec<u32> {
    let mut coords = Vec::with_capacity(mdim);
    for _ in 0..mdim {
        coords.push((linear % g as u64) as u32);
        linear /= g as u64;
    }
    coords
}

/// Face direction from `dir` to the opposite face.
#[inline]
pub fn opposite(dir: usize) -> usize {
    dir ^ 1
}
