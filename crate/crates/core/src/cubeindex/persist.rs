//! Binary index files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CUBG" | version u32
//! metric u8 | mdim u32 | dim u32 | layers u32 | built u32
//! max_degree u32 | ef_construction u32 | cross_degree u32 | ef_cross u32
//! min_cube_points u64 | deleted_ratio_threshold f64
//! points u64 | vector checksum u64 | metadata checksum u64
//! bbox: mdim x (lo f64, hi f64)
//! point states: points x u8
//! per layer: shards u32, directory of (cube u64, nodes u32, entry u32, offset u64),
//!            then fixed-size node records
//! baseline flag u8 [, nodes u32, entry u32, records]
//! payload checksum u64
//! ```
//!
//! A node record is `id u32 | tombstone u8 | meta mdim x f64 | degree u16 |
//! max_degree x u32 | 2*mdim x (count u8 | cross_degree x u32)`, with unused
//! slots set to `u32::MAX`. Vectors and raw metadata are not stored; the
//! loader takes them separately and checks them against the stored checksums.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{CubeGraphIndex, CubeShard, IndexParams, Layer, PointState};
use crate::error::{Error, Result};
use crate::metagrid::{BoundingBox, CubeId, GridConfig, MetaStore};
use crate::proxgraph::{GraphParams, LocalGraph};
use crate::vecspace::{DistanceMetric, VectorStore};

const MAGIC: &[u8; 4] = b"CUBG";
const VERSION: u32 = 1;
const NONE: u32 = u32::MAX;

/// 64-bit content hash (truncated SHA-256).
#[derive(Clone, Default)]
pub struct Checksum(Sha256);

impl Checksum {
    pub fn new() -> Self {
        Self(Sha256::new())
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    pub fn finish(self) -> u64 {
        let digest = self.0.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(b)
    }
}

fn checksum_of(bytes: &[u8]) -> u64 {
    let mut h = Checksum::new();
    h.update(bytes);
    h.finish()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&self) -> usize {
        self.0.len()
    }

    fn edges(&mut self, edges: &[u32], slots: usize) {
        for i in 0..slots {
            self.u32(edges.get(i).copied().unwrap_or(NONE));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::corrupt("index file is truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize32(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
}

fn record_size(mdim: usize, max_degree: usize, cross_degree: usize) -> usize {
    4 + 1 + 8 * mdim + 2 + 4 * max_degree + 2 * mdim * (1 + 4 * cross_degree)
}

fn graph_record_size(max_degree: usize) -> usize {
    4 + 1 + 2 + 4 * max_degree
}

impl CubeGraphIndex {
    /// Serializes the index structure into bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let m = self.grid.mdim;
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(p.metric.as_u8());
        w.u32(m as u32);
        w.u32(self.vectors.dim() as u32);
        w.u32(p.layers as u32);
        w.u32(self.layers.len() as u32);
        w.u32(p.max_degree as u32);
        w.u32(p.ef_construction as u32);
        w.u32(p.cross_degree as u32);
        w.u32(p.ef_cross as u32);
        w.u64(p.min_cube_points as u64);
        w.f64(p.deleted_ratio_threshold);
        w.u64(self.state.len() as u64);
        w.u64(self.vectors.checksum());
        w.u64(self.meta.checksum());
        let bbox = self.meta.bbox();
        for i in 0..m {
            w.f64(bbox.lo[i]);
            w.f64(bbox.hi[i]);
        }
        for s in &self.state {
            w.u8(match s {
                PointState::Live => 0,
                PointState::Tombstoned => 1,
                PointState::Removed => 2,
            });
        }

        let rec = record_size(m, p.max_degree, p.cross_degree);
        for layer in &self.layers {
            w.u32(layer.shards.len() as u32);
            let mut offset = (w.len() + layer.shards.len() * 24) as u64;
            for s in &layer.shards {
                w.u64(s.cube.linear);
                w.u32(s.graph.len() as u32);
                w.u32(s.graph.entry().unwrap_or(NONE));
                w.u64(offset);
                offset += (s.graph.len() * rec) as u64;
            }
            for s in &layer.shards {
                for local in 0..s.graph.len() as u32 {
                    w.u32(s.graph.node_id(local));
                    w.u8(s.graph.is_tombstoned(local) as u8);
                    for &v in s.meta_row(local, m) {
                        w.f64(v);
                    }
                    let nb = s.graph.neighbors(local);
                    w.u16(nb.len() as u16);
                    w.edges(nb, p.max_degree);
                    for dir in 0..2 * m {
                        let ce = s.cross_edges(local, dir, m, p.cross_degree);
                        w.u8(ce.len() as u8);
                        w.edges(ce, p.cross_degree);
                    }
                }
            }
        }

        match &self.baseline {
            None => w.u8(0),
            Some(b) => {
                w.u8(1);
                w.u32(b.len() as u32);
                w.u32(b.entry().unwrap_or(NONE));
                for local in 0..b.len() as u32 {
                    w.u32(b.node_id(local));
                    w.u8(b.is_tombstoned(local) as u8);
                    let nb = b.neighbors(local);
                    w.u16(nb.len() as u16);
                    w.edges(nb, p.max_degree);
                }
            }
        }
        let sum = checksum_of(&w.0);
        w.u64(sum);
        w.0
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, vectors: VectorStore, meta: MetaStore) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, vectors, meta)
    }

    /// Restores an index from bytes plus the vector and metadata stores it was
    /// built over.
    pub fn from_bytes(bytes: &[u8], vectors: VectorStore, meta: MetaStore) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + 8 || &bytes[..4] != MAGIC {
            return Err(Error::corrupt("not an index file"));
        }
        let (payload, trailer) = bytes.split_at(bytes.len() - 8);
        if checksum_of(payload) != u64::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(Error::corrupt("index checksum mismatch"));
        }
        let mut r = Reader { buf: payload, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::corrupt(format!("unsupported index version {version}")));
        }
        let metric = DistanceMetric::from_u8(r.u8()?).ok_or_else(|| Error::corrupt("unknown metric"))?;
        let mdim = r.usize32()?;
        let dim = r.usize32()?;
        let params = IndexParams {
            layers: r.usize32()?,
            max_degree: 0,
            ef_construction: 0,
            cross_degree: 0,
            ef_cross: 0,
            min_cube_points: 0,
            deleted_ratio_threshold: 0.0,
            metric,
        };
        let built = r.usize32()?;
        let params = IndexParams {
            max_degree: r.usize32()?,
            ef_construction: r.usize32()?,
            cross_degree: r.usize32()?,
            ef_cross: r.usize32()?,
            min_cube_points: r.u64()? as usize,
            deleted_ratio_threshold: r.f64()?,
            ..params
        };
        params
            .validate()
            .map_err(|e| Error::corrupt(format!("bad stored parameters: {e}")))?;
        if built == 0 || built > params.layers {
            return Err(Error::corrupt("bad built layer count"));
        }
        let points = r.u64()? as usize;
        let vsum = r.u64()?;
        let msum = r.u64()?;
        if vectors.dim() != dim || vectors.len() != points {
            return Err(Error::InvalidData(format!(
                "index expects {points} vectors of dim {dim}, got {} of dim {}",
                vectors.len(),
                vectors.dim()
            )));
        }
        if meta.mdim() != mdim || meta.len() != points {
            return Err(Error::InvalidData(format!(
                "index expects {points} metadata rows of dim {mdim}, got {} of dim {}",
                meta.len(),
                meta.mdim()
            )));
        }
        if vectors.checksum() != vsum {
            return Err(Error::InvalidData("vectors do not match the index".into()));
        }
        if meta.checksum() != msum {
            return Err(Error::InvalidData("metadata does not match the index".into()));
        }
        let mut lo = Vec::with_capacity(mdim);
        let mut hi = Vec::with_capacity(mdim);
        for _ in 0..mdim {
            lo.push(r.f64()?);
            hi.push(r.f64()?);
        }
        let meta = MetaStore::with_bbox(mdim, meta.raw_flat().to_vec(), BoundingBox { lo, hi })?;

        let mut state = Vec::with_capacity(points);
        for _ in 0..points {
            state.push(match r.u8()? {
                0 => PointState::Live,
                1 => PointState::Tombstoned,
                2 => PointState::Removed,
                _ => return Err(Error::corrupt("bad point state")),
            });
        }
        let tombstoned = state.iter().filter(|s| **s == PointState::Tombstoned).count();
        let grid = GridConfig {
            layers: built,
            mdim,
            min_cube_points: params.min_cube_points,
        };
        grid.validate().map_err(|e| Error::corrupt(e.to_string()))?;
        let gparams = GraphParams {
            max_degree: params.max_degree,
            ef_construction: params.ef_construction,
            metric,
        };
        let (mdeg, mc) = (params.max_degree, params.cross_degree);
        let rec = record_size(mdim, mdeg, mc);

        let mut layers = Vec::with_capacity(built);
        for level in 0..built {
            let g = grid.granularity(level);
            let count = r.usize32()?;
            let mut dir = Vec::with_capacity(count);
            for _ in 0..count {
                dir.push((r.u64()?, r.usize32()?, r.u32()?, r.u64()? as usize));
            }
            let mut shards = Vec::with_capacity(count);
            let mut seen = HashMap::with_capacity(count);
            for &(linear, nodes, entry, offset) in &dir {
                if linear >= grid.cube_count(level) || seen.insert(linear, ()).is_some() {
                    return Err(Error::corrupt("bad cube id in shard directory"));
                }
                if offset != r.pos {
                    return Err(Error::corrupt("shard directory offset mismatch"));
                }
                r.take(nodes.checked_mul(rec).ok_or_else(|| Error::corrupt("shard too large"))?)?;
                r.pos = offset;
                let mut ids = Vec::with_capacity(nodes);
                let mut tomb = Vec::with_capacity(nodes);
                let mut rows = Vec::with_capacity(nodes * mdim);
                let mut edges = Vec::with_capacity(nodes);
                let mut cross = Vec::with_capacity(nodes * 2 * mdim * mc);
                let mut cross_len = Vec::with_capacity(nodes * 2 * mdim);
                for _ in 0..nodes {
                    let id = r.u32()?;
                    if id as usize >= points {
                        return Err(Error::corrupt("node id out of range"));
                    }
                    ids.push(id);
                    tomb.push(r.u8()? != 0);
                    for _ in 0..mdim {
                        rows.push(r.f64()?);
                    }
                    let deg = r.u16()? as usize;
                    if deg > mdeg {
                        return Err(Error::corrupt("degree exceeds bound"));
                    }
                    let mut e = Vec::with_capacity(deg);
                    for i in 0..mdeg {
                        let v = r.u32()?;
                        if i < deg {
                            e.push(v);
                        }
                    }
                    edges.push(e);
                    for _ in 0..2 * mdim {
                        let n = r.u8()? as usize;
                        if n > mc {
                            return Err(Error::corrupt("cross edge count exceeds bound"));
                        }
                        cross_len.push(n as u8);
                        for i in 0..mc {
                            let v = r.u32()?;
                            if i < n && v as usize >= points {
                                return Err(Error::corrupt("cross edge target out of range"));
                            }
                            cross.push(if i < n { v } else { NONE });
                        }
                    }
                }
                let entry = (entry != NONE).then_some(entry);
                let graph = LocalGraph::from_parts(gparams, ids, edges, tomb, entry)?;
                shards.push(CubeShard {
                    cube: CubeId::from_linear(level, g, mdim, linear),
                    graph,
                    meta: rows,
                    cross,
                    cross_len,
                    adjacent: vec![None; 2 * mdim],
                });
            }
            let mut layer = Layer {
                level,
                granularity: g,
                shards,
                cube_to_shard: HashMap::new(),
                locate: Vec::new(),
            };
            layer.reindex(points);
            layers.push(layer);
        }

        let baseline = match r.u8()? {
            0 => None,
            1 => {
                let nodes = r.usize32()?;
                let entry = r.u32()?;
                r.take(nodes.checked_mul(graph_record_size(mdeg)).ok_or_else(|| Error::corrupt("baseline too large"))?)?;
                r.pos -= nodes * graph_record_size(mdeg);
                let mut ids = Vec::with_capacity(nodes);
                let mut tomb = Vec::with_capacity(nodes);
                let mut edges = Vec::with_capacity(nodes);
                for _ in 0..nodes {
                    let id = r.u32()?;
                    if id as usize >= points {
                        return Err(Error::corrupt("node id out of range"));
                    }
                    ids.push(id);
                    tomb.push(r.u8()? != 0);
                    let deg = r.u16()? as usize;
                    if deg > mdeg {
                        return Err(Error::corrupt("degree exceeds bound"));
                    }
                    let mut e = Vec::with_capacity(deg);
                    for i in 0..mdeg {
                        let v = r.u32()?;
                        if i < deg {
                            e.push(v);
                        }
                    }
                    edges.push(e);
                }
                let entry = (entry != NONE).then_some(entry);
                Some(LocalGraph::from_parts(gparams, ids, edges, tomb, entry)?)
            }
            _ => return Err(Error::corrupt("bad baseline flag")),
        };
        if r.pos != payload.len() {
            return Err(Error::corrupt("trailing bytes in index file"));
        }

        let index = Self {
            params,
            grid,
            vectors,
            meta,
            layers,
            state,
            tombstoned,
            baseline,
        };
        index.check_consistency()?;
        Ok(index)
    }

    /// Every indexed point sits in the cube its metadata maps to, once per layer.
    fn check_consistency(&self) -> Result<()> {
        for layer in &self.layers {
            let mut held = 0usize;
            for s in &layer.shards {
                for (local, &id) in s.graph.node_ids().iter().enumerate() {
                    let r = layer.node(id);
                    if r.shard as usize >= layer.shards.len() || layer.shards[r.shard as usize].cube.linear != s.cube.linear {
                        return Err(Error::corrupt(format!("point {id} is stored in two cubes")));
                    }
                    if self.grid.linear_id(self.meta.point(id), layer.level) != s.cube.linear {
                        return Err(Error::corrupt(format!("point {id} is stored in the wrong cube")));
                    }
                    let want = self.state[id as usize];
                    let dead = s.graph.is_tombstoned(local as u32);
                    if want == PointState::Removed || dead != (want == PointState::Tombstoned) {
                        return Err(Error::corrupt(format!("point {id} state disagrees with its node")));
                    }
                    held += 1;
                }
            }
            let expected = self.state.iter().filter(|s| **s != PointState::Removed).count();
            if held != expected {
                return Err(Error::corrupt("layer does not hold every indexed point"));
            }
        }
        Ok(())
    }
}
