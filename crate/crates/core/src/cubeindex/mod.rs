//! The layered cube index.
//!
//! Construction runs in two phases. Phase one assigns every point to one cube
//! per layer and builds a [`LocalGraph`] for each non-empty cube. Phase two
//! links every node to its approximate nearest neighbors in each face-adjacent
//! cube of the same layer. Cross edges are stored apart from intra edges.

pub(crate) mod persist;

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metagrid::{opposite, CubeId, GridConfig, MetaStore};
use crate::proxgraph::{beam_search, Admission, Candidate, GraphParams, LocalGraph, TraversalStats, VisitedSet};
use crate::vecspace::{DistanceMetric, VectorStore};
use crate::PointId;

pub use persist::Checksum;

/// Construction and maintenance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexParams {
    /// Configured layer count; deep layers with too few points per cube are skipped.
    pub layers: usize,
    pub max_degree: usize,
    pub ef_construction: usize,
    /// Cross edges kept per node and adjacent cube.
    pub cross_degree: usize,
    pub ef_cross: usize,
    pub min_cube_points: usize,
    pub deleted_ratio_threshold: f64,
    pub metric: DistanceMetric,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            layers: GridConfig::DEFAULT_LAYERS,
            max_degree: 16,
            ef_construction: 200,
            cross_degree: 6,
            ef_cross: 30,
            min_cube_points: GridConfig::DEFAULT_MIN_CUBE_POINTS,
            deleted_ratio_threshold: 0.3,
            metric: DistanceMetric::SquaredEuclidean,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.layers > GridConfig::MAX_LAYERS {
            return Err(Error::invalid(format!("layers must be in 1..={}", GridConfig::MAX_LAYERS)));
        }
        if self.max_degree == 0 || self.max_degree > u16::MAX as usize {
            return Err(Error::invalid("max_degree must be in 1..=65535"));
        }
        if self.ef_construction == 0 {
            return Err(Error::invalid("ef_construction must be positive"));
        }
        if self.cross_degree == 0 || self.cross_degree > u8::MAX as usize {
            return Err(Error::invalid("cross_degree must be in 1..=255"));
        }
        if self.ef_cross < self.cross_degree {
            return Err(Error::invalid("ef_cross must be at least cross_degree"));
        }
        if !(self.deleted_ratio_threshold > 0.0 && self.deleted_ratio_threshold <= 1.0) {
            return Err(Error::invalid("deleted_ratio_threshold must be in (0, 1]"));
        }
        Ok(())
    }

    fn graph_params(&self) -> GraphParams {
        GraphParams {
            max_degree: self.max_degree,
            ef_construction: self.ef_construction,
            metric: self.metric,
        }
    }
}

/// Lifecycle of a point id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointState {
    Live,
    /// Deleted but still present in the graphs as a routing node.
    Tombstoned,
    /// Deleted and dropped from the graphs by compaction.
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NodeRef {
    pub shard: u32,
    pub local: u32,
}

impl NodeRef {
    pub const NONE: NodeRef = NodeRef {
        shard: u32::MAX,
        local: u32::MAX,
    };

    pub fn is_none(&self) -> bool {
        self.shard == u32::MAX
    }
}

/// One non-empty cube: its graph plus per-node metadata and cross-edge blocks.
///
/// Node `i` owns `meta[i*m .. (i+1)*m]` and, for each of the `2m` face
/// directions, a block of `cross_degree` slots in `cross`. Direction `2a`
/// steps down axis `a`, direction `2a+1` steps up.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeShard {
    pub(crate) cube: CubeId,
    pub(crate) graph: LocalGraph,
    pub(crate) meta: Vec<f64>,
    pub(crate) cross: Vec<PointId>,
    pub(crate) cross_len: Vec<u8>,
    pub(crate) adjacent: Vec<Option<u32>>,
}

impl CubeShard {
    fn new(cube: CubeId, graph: LocalGraph, meta: &MetaStore, cross_degree: usize) -> Self {
        let m = meta.mdim();
        let n = graph.len();
        let mut rows = Vec::with_capacity(n * m);
        for &id in graph.node_ids() {
            rows.extend_from_slice(meta.point(id));
        }
        Self {
            cube,
            graph,
            meta: rows,
            cross: vec![PointId::MAX; n * 2 * m * cross_degree],
            cross_len: vec![0; n * 2 * m],
            adjacent: vec![None; 2 * m],
        }
    }

    pub fn cube(&self) -> &CubeId {
        &self.cube
    }

    pub fn graph(&self) -> &LocalGraph {
        &self.graph
    }

    /// Global id of the shard's entry node.
    pub fn entry_point(&self) -> Option<PointId> {
        self.graph.entry().map(|l| self.graph.node_id(l))
    }

    #[inline]
    pub fn meta_row(&self, local: u32, mdim: usize) -> &[f64] {
        let s = local as usize * mdim;
        &self.meta[s..s + mdim]
    }

    /// Cross targets of `local` toward direction `dir`, nearest first.
    #[inline]
    pub fn cross_edges(&self, local: u32, dir: usize, mdim: usize, cross_degree: usize) -> &[PointId] {
        let block = local as usize * 2 * mdim + dir;
        let s = block * cross_degree;
        &self.cross[s..s + self.cross_len[block] as usize]
    }

    fn set_cross(&mut self, local: u32, dir: usize, mdim: usize, cross_degree: usize, targets: &[PointId]) {
        let block = local as usize * 2 * mdim + dir;
        let s = block * cross_degree;
        let n = targets.len().min(cross_degree);
        self.cross[s..s + n].copy_from_slice(&targets[..n]);
        self.cross[s + n..s + cross_degree].fill(PointId::MAX);
        self.cross_len[block] = n as u8;
    }

    /// Appends storage for a freshly inserted node at local index `local`.
    fn push_node(&mut self, point: &[f64], cross_degree: usize) {
        let m = point.len();
        self.meta.extend_from_slice(point);
        self.cross.extend(std::iter::repeat_n(PointId::MAX, 2 * m * cross_degree));
        self.cross_len.extend(std::iter::repeat_n(0, 2 * m));
    }

    pub fn cross_edge_count(&self) -> usize {
        self.cross_len.iter().map(|&l| l as usize).sum()
    }
}

/// All shards of one grid layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) level: usize,
    pub(crate) granularity: u32,
    pub(crate) shards: Vec<CubeShard>,
    pub(crate) cube_to_shard: HashMap<u64, u32>,
    pub(crate) locate: Vec<NodeRef>,
}

impl Layer {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn granularity(&self) -> u32 {
        self.granularity
    }

    pub fn shards(&self) -> &[CubeShard] {
        &self.shards
    }

    pub fn shard_of_cube(&self, linear: u64) -> Option<u32> {
        self.cube_to_shard.get(&linear).copied()
    }

    #[inline]
    pub(crate) fn node(&self, id: PointId) -> NodeRef {
        self.locate.get(id as usize).copied().unwrap_or(NodeRef::NONE)
    }

    /// Shard index holding `id` at this layer.
    pub fn shard_of_point(&self, id: PointId) -> Option<u32> {
        let r = self.node(id);
        (!r.is_none()).then_some(r.shard)
    }

    fn reindex(&mut self, total_ids: usize) {
        self.cube_to_shard = self
            .shards
            .iter()
            .enumerate()
            .map(|(i, s)| (s.cube.linear, i as u32))
            .collect();
        self.locate = vec![NodeRef::NONE; total_ids];
        for (si, shard) in self.shards.iter().enumerate() {
            for (li, &id) in shard.graph.node_ids().iter().enumerate() {
                self.locate[id as usize] = NodeRef {
                    shard: si as u32,
                    local: li as u32,
                };
            }
        }
        self.relink();
    }

    fn relink(&mut self) {
        let g = self.granularity;
        let links: Vec<Vec<Option<u32>>> = self
            .shards
            .iter()
            .map(|s| {
                (0..2 * s.cube.coords.len())
                    .map(|dir| {
                        s.cube
                            .neighbor(dir, g)
                            .and_then(|c| self.cube_to_shard.get(&c.linear).copied())
                    })
                    .collect()
            })
            .collect();
        for (s, l) in self.shards.iter_mut().zip(links) {
            s.adjacent = l;
        }
    }
}

/// Hierarchical grid of per-cube proximity graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeGraphIndex {
    pub(crate) params: IndexParams,
    pub(crate) grid: GridConfig,
    pub(crate) vectors: VectorStore,
    pub(crate) meta: MetaStore,
    pub(crate) layers: Vec<Layer>,
    pub(crate) state: Vec<PointState>,
    pub(crate) tombstoned: usize,
    pub(crate) baseline: Option<LocalGraph>,
}

/// Number of layers worth building for `n` points.
pub fn built_layer_count(n: usize, mdim: usize, params: &IndexParams) -> usize {
    let grid = GridConfig {
        layers: params.layers,
        mdim,
        min_cube_points: params.min_cube_points,
    };
    let deeper = (1..params.layers)
        .take_while(|&l| n as f64 / grid.cube_count(l) as f64 >= params.min_cube_points as f64)
        .count();
    1 + deeper
}

impl CubeGraphIndex {
    /// Builds the full index: per-cube graphs, then cross-cube edges.
    pub fn build(vectors: VectorStore, meta: MetaStore, params: IndexParams) -> Result<Self> {
        params.validate()?;
        if vectors.len() != meta.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} metadata rows",
                vectors.len(),
                meta.len()
            )));
        }
        if vectors.is_empty() {
            return Err(Error::invalid("cannot build an index over zero points"));
        }
        if vectors.len() >= PointId::MAX as usize {
            return Err(Error::invalid("too many points"));
        }
        let n = vectors.len();
        let mdim = meta.mdim();
        let grid = GridConfig {
            layers: built_layer_count(n, mdim, &params),
            mdim,
            min_cube_points: params.min_cube_points,
        };
        grid.validate()?;

        let mut index = Self {
            params,
            grid,
            vectors,
            meta,
            layers: Vec::with_capacity(grid.layers),
            state: vec![PointState::Live; n],
            tombstoned: 0,
            baseline: None,
        };
        let all: Vec<PointId> = (0..n as PointId).collect();
        for level in 0..grid.layers {
            let layer = index.build_layer(level, &all)?;
            index.layers.push(layer);
        }
        index.add_cross_edges(params.cross_degree, params.ef_cross)?;
        Ok(index)
    }

    fn build_layer(&self, level: usize, ids: &[PointId]) -> Result<Layer> {
        let mut groups: BTreeMap<u64, Vec<PointId>> = BTreeMap::new();
        for &id in ids {
            groups
                .entry(self.grid.linear_id(self.meta.point(id), level))
                .or_default()
                .push(id);
        }
        let g = self.grid.granularity(level);
        let mdim = self.grid.mdim;
        let groups: Vec<(u64, Vec<PointId>)> = groups.into_iter().collect();
        let shards: Result<Vec<CubeShard>> = groups
            .par_iter()
            .map(|(linear, members)| {
                let graph = LocalGraph::build(members, &self.vectors, self.params.graph_params())?;
                let cube = CubeId::from_linear(level, g, mdim, *linear);
                Ok(CubeShard::new(cube, graph, &self.meta, self.params.cross_degree))
            })
            .collect();
        let mut layer = Layer {
            level,
            granularity: g,
            shards: shards?,
            cube_to_shard: HashMap::new(),
            locate: Vec::new(),
        };
        layer.reindex(self.state.len());
        Ok(layer)
    }

    /// Recomputes every cross edge with the given budget.
    pub fn add_cross_edges(&mut self, cross_degree: usize, ef_cross: usize) -> Result<()> {
        if cross_degree == 0 || cross_degree > u8::MAX as usize || ef_cross < cross_degree {
            return Err(Error::invalid("need 1 <= cross_degree <= 255 and ef_cross >= cross_degree"));
        }
        if cross_degree != self.params.cross_degree {
            let m = self.grid.mdim;
            for layer in &mut self.layers {
                for s in &mut layer.shards {
                    s.cross = vec![PointId::MAX; s.graph.len() * 2 * m * cross_degree];
                }
            }
        }
        self.params.cross_degree = cross_degree;
        self.params.ef_cross = ef_cross;
        for l in 0..self.layers.len() {
            let targets: Vec<u32> = (0..self.layers[l].shards.len() as u32).collect();
            self.refresh_cross_edges(l, &targets);
        }
        Ok(())
    }

    /// Recomputes cross edges of every live node in the listed shards.
    fn refresh_cross_edges(&mut self, level: usize, shard_ids: &[u32]) {
        let m = self.grid.mdim;
        let mc = self.params.cross_degree;
        let layer = &self.layers[level];
        let computed: Vec<(u32, Vec<PointId>, Vec<u8>)> = shard_ids
            .par_iter()
            .map(|&si| {
                let shard = &layer.shards[si as usize];
                let n = shard.graph.len();
                let mut cross = vec![PointId::MAX; n * 2 * m * mc];
                let mut lens = vec![0u8; n * 2 * m];
                let mut visited = VisitedSet::default();
                for local in 0..n as u32 {
                    if shard.graph.is_tombstoned(local) {
                        continue;
                    }
                    let q = self.vectors.row(shard.graph.node_id(local));
                    for dir in 0..2 * m {
                        let Some(adj) = shard.adjacent[dir] else { continue };
                        let found = self.nearest_in_shard(&layer.shards[adj as usize], q, &mut visited);
                        let block = local as usize * 2 * m + dir;
                        let take = found.len().min(mc);
                        for (slot, (id, _)) in found.iter().take(take).enumerate() {
                            cross[block * mc + slot] = *id;
                        }
                        lens[block] = take as u8;
                    }
                }
                (si, cross, lens)
            })
            .collect();
        let layer = &mut self.layers[level];
        for (si, cross, lens) in computed {
            let s = &mut layer.shards[si as usize];
            s.cross = cross;
            s.cross_len = lens;
        }
    }

    /// Top `ef_cross` live nodes of `shard` for `query`, searched from its entry.
    fn nearest_in_shard(&self, shard: &CubeShard, query: &[f32], visited: &mut VisitedSet) -> Vec<(PointId, f64)> {
        let Some(entry) = shard.graph.entry() else {
            return Vec::new();
        };
        let metric = self.params.metric;
        let graph = &shard.graph;
        visited.reset(graph.len());
        let found: Vec<Candidate> = beam_search(
            &[entry],
            self.params.ef_cross,
            |n| metric.eval(query, self.vectors.row(graph.node_id(n))),
            |n, out| out.extend_from_slice(graph.neighbors(n)),
            |n| {
                if graph.is_tombstoned(n) {
                    Admission::Route
                } else {
                    Admission::Accept
                }
            },
            visited,
            &mut TraversalStats::default(),
        );
        let mut out: Vec<(PointId, f64)> = found.into_iter().map(|c| (graph.node_id(c.key), c.dist)).collect();
        crate::proxgraph::sort_hits(&mut out);
        out
    }

    /// Builds the single flat graph over all live points used by the
    /// pre-/post-filter baselines.
    pub fn build_baseline(&mut self) -> Result<()> {
        let live: Vec<PointId> = self.live_ids().collect();
        self.baseline = Some(LocalGraph::build(&live, &self.vectors, self.params.graph_params())?);
        Ok(())
    }

    pub fn baseline(&self) -> Option<&LocalGraph> {
        self.baseline.as_ref()
    }

    /// Adds a point. Ids are dense: `id` must equal the current id count.
    pub fn insert(&mut self, id: PointId, vector: &[f32], metadata: &[f64]) -> Result<()> {
        let next = self.state.len();
        if (id as usize) < next {
            return Err(Error::DuplicateId(id));
        }
        if id as usize > next {
            return Err(Error::invalid(format!("ids are assigned densely; next id is {next}")));
        }
        if vector.len() != self.vectors.dim() {
            return Err(Error::invalid(format!(
                "vector has {} dims, index has {}",
                vector.len(),
                self.vectors.dim()
            )));
        }
        if metadata.len() != self.grid.mdim {
            return Err(Error::invalid(format!(
                "metadata has {} dims, index has {}",
                metadata.len(),
                self.grid.mdim
            )));
        }
        if metadata.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite metadata".into()));
        }
        self.vectors.push(vector)?;
        self.meta.push(metadata)?;
        self.state.push(PointState::Live);
        let point = self.meta.point(id).to_vec();
        let (m, mc) = (self.grid.mdim, self.params.cross_degree);

        for level in 0..self.layers.len() {
            let linear = self.grid.linear_id(&point, level);
            let layer = &mut self.layers[level];
            layer.locate.resize(next + 1, NodeRef::NONE);
            let si = match layer.cube_to_shard.get(&linear) {
                Some(&si) => si,
                None => {
                    let cube = CubeId::from_linear(level, layer.granularity, m, linear);
                    let graph = LocalGraph::new(self.params.graph_params());
                    layer.shards.push(CubeShard::new(cube, graph, &self.meta, mc));
                    let si = (layer.shards.len() - 1) as u32;
                    layer.cube_to_shard.insert(linear, si);
                    layer.relink();
                    si
                }
            };
            let shard = &mut layer.shards[si as usize];
            let local = shard.graph.insert_node(id, &self.vectors)?;
            shard.push_node(&point, mc);
            layer.locate[id as usize] = NodeRef { shard: si, local };
            self.link_new_node(level, si, local);
        }
        if let Some(b) = &mut self.baseline {
            b.insert_node(id, &self.vectors)?;
        }
        Ok(())
    }

    /// Cross edges for a fresh node, plus reverse edges into its cube from
    /// adjacent nodes for which it beats their current worst target.
    fn link_new_node(&mut self, level: usize, si: u32, local: u32) {
        let (m, mc) = (self.grid.mdim, self.params.cross_degree);
        let metric = self.params.metric;
        let id = self.layers[level].shards[si as usize].graph.node_id(local);
        let mut visited = VisitedSet::default();
        let mut forward: Vec<(usize, u32, Vec<(PointId, f64)>)> = Vec::new();
        {
            let layer = &self.layers[level];
            let shard = &layer.shards[si as usize];
            let q = self.vectors.row(id);
            for dir in 0..2 * m {
                if let Some(adj) = shard.adjacent[dir] {
                    let found = self.nearest_in_shard(&layer.shards[adj as usize], q, &mut visited);
                    forward.push((dir, adj, found));
                }
            }
        }
        let layer = &mut self.layers[level];
        for (dir, adj, found) in forward {
            let targets: Vec<PointId> = found.iter().take(mc).map(|h| h.0).collect();
            layer.shards[si as usize].set_cross(local, dir, m, mc, &targets);

            let back = opposite(dir);
            for &(t, d_new) in found.iter().take(mc) {
                let tl = layer.locate[t as usize].local;
                let tshard = &mut layer.shards[adj as usize];
                let mut cur: Vec<(PointId, f64)> = tshard
                    .cross_edges(tl, back, m, mc)
                    .iter()
                    .map(|&x| (x, metric.eval(self.vectors.row(t), self.vectors.row(x))))
                    .collect();
                if cur.len() >= mc && cur.last().is_some_and(|w| w.1 <= d_new) {
                    continue;
                }
                cur.push((id, d_new));
                crate::proxgraph::sort_hits(&mut cur);
                cur.truncate(mc);
                let ids: Vec<PointId> = cur.into_iter().map(|h| h.0).collect();
                tshard.set_cross(tl, back, m, mc, &ids);
            }
        }
    }

    /// Appends a point with the next free id.
    pub fn insert_next(&mut self, vector: &[f32], metadata: &[f64]) -> Result<PointId> {
        let id = self.state.len() as PointId;
        self.insert(id, vector, metadata)?;
        Ok(id)
    }

    /// Lazily deletes a point. Returns true when the deletion triggered compaction.
    pub fn delete(&mut self, id: PointId) -> Result<bool> {
        match self.state.get(id as usize) {
            Some(PointState::Live) => {}
            _ => return Err(Error::NotFound(id)),
        }
        for layer in &mut self.layers {
            let r = layer.node(id);
            if !r.is_none() {
                layer.shards[r.shard as usize].graph.mark_deleted(id)?;
            }
        }
        if let Some(b) = &mut self.baseline {
            b.mark_deleted(id)?;
        }
        self.state[id as usize] = PointState::Tombstoned;
        self.tombstoned += 1;
        if self.deleted_ratio() > self.params.deleted_ratio_threshold {
            self.compact()?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Tombstoned share of the nodes currently held by the graphs.
    pub fn deleted_ratio(&self) -> f64 {
        let held = self.live_count() + self.tombstoned;
        if held == 0 {
            0.0
        } else {
            self.tombstoned as f64 / held as f64
        }
    }

    /// Rebuilds every shard holding tombstones from its survivors and refreshes
    /// the cross edges of those shards and their neighbors.
    pub fn compact(&mut self) -> Result<()> {
        if self.tombstoned == 0 {
            return Ok(());
        }
        let total = self.state.len();
        for level in 0..self.layers.len() {
            let old = std::mem::take(&mut self.layers[level].shards);
            let touched: HashSet<u64> = old
                .iter()
                .filter(|s| s.graph.tombstone_count() > 0)
                .map(|s| s.cube.linear)
                .collect();
            let rebuilt: Result<Vec<Option<CubeShard>>> = old
                .into_par_iter()
                .map(|s| {
                    if s.graph.tombstone_count() == 0 {
                        return Ok(Some(s));
                    }
                    let survivors = s.graph.survivors();
                    if survivors.is_empty() {
                        return Ok(None);
                    }
                    let graph = LocalGraph::build(&survivors, &self.vectors, self.params.graph_params())?;
                    Ok(Some(CubeShard::new(s.cube, graph, &self.meta, self.params.cross_degree)))
                })
                .collect();
            let layer = &mut self.layers[level];
            layer.shards = rebuilt?.into_iter().flatten().collect();
            layer.reindex(total);
            let g = layer.granularity;
            let refresh: Vec<u32> = layer
                .shards
                .iter()
                .enumerate()
                .filter(|(_, s)| {
                    touched.contains(&s.cube.linear)
                        || (0..2 * s.cube.coords.len())
                            .filter_map(|d| s.cube.neighbor(d, g))
                            .any(|c| touched.contains(&c.linear))
                })
                .map(|(i, _)| i as u32)
                .collect();
            self.refresh_cross_edges(level, &refresh);
        }
        if let Some(b) = &self.baseline {
            if b.tombstone_count() > 0 {
                let survivors = b.survivors();
                self.baseline = Some(LocalGraph::build(&survivors, &self.vectors, self.params.graph_params())?);
            }
        }
        for s in &mut self.state {
            if *s == PointState::Tombstoned {
                *s = PointState::Removed;
            }
        }
        self.tombstoned = 0;
        Ok(())
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    /// Grid over the built layers.
    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    pub fn vectors(&self) -> &VectorStore {
        &self.vectors
    }

    pub fn meta(&self) -> &MetaStore {
        &self.meta
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, level: usize) -> Option<&Layer> {
        self.layers.get(level)
    }

    pub fn point_state(&self, id: PointId) -> Option<PointState> {
        self.state.get(id as usize).copied()
    }

    #[inline]
    pub fn is_live(&self, id: PointId) -> bool {
        self.state.get(id as usize) == Some(&PointState::Live)
    }

    /// Total ids ever assigned.
    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.state.iter().filter(|s| **s == PointState::Live).count()
    }

    pub fn tombstone_count(&self) -> usize {
        self.tombstoned
    }

    pub fn live_ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == PointState::Live)
            .map(|(i, _)| i as PointId)
    }

    /// Structural report of shard populations and edge budgets.
    pub fn stats(&self) -> IndexStats {
        let m = self.grid.mdim;
        let (mdeg, mc) = (self.params.max_degree, self.params.cross_degree);
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut held = 0usize;
        for layer in &self.layers {
            let pops: Vec<usize> = layer.shards.iter().map(|s| s.graph.len()).collect();
            let nodes: usize = pops.iter().sum();
            held = held.max(nodes);
            let mut histogram: BTreeMap<u64, usize> = BTreeMap::new();
            for &p in &pops {
                *histogram.entry((p as u64).next_power_of_two()).or_default() += 1;
            }
            layers.push(LayerStats {
                level: layer.level,
                granularity: layer.granularity,
                shard_count: layer.shards.len(),
                nodes,
                live_nodes: layer.shards.iter().map(|s| s.graph.live_len()).sum(),
                min_population: pops.iter().copied().min().unwrap_or(0),
                max_population: pops.iter().copied().max().unwrap_or(0),
                mean_population: if pops.is_empty() { 0.0 } else { nodes as f64 / pops.len() as f64 },
                population_histogram: histogram.into_iter().collect(),
                intra_edges: layer.shards.iter().map(|s| s.graph.edge_count()).sum(),
                cross_edges: layer.shards.iter().map(CubeShard::cross_edge_count).sum(),
            });
        }
        let intra: usize = layers.iter().map(|l| l.intra_edges).sum();
        let cross: usize = layers.iter().map(|l| l.cross_edges).sum();
        let record = 4 + 1 + 8 * m + 2 + 4 * mdeg + 2 * m * (1 + 4 * mc);
        let node_bytes: usize = layers.iter().map(|l| l.nodes * record).sum();
        let baseline_edges = self.baseline.as_ref().map_or(0, LocalGraph::edge_count);
        IndexStats {
            points: self.state.len(),
            live: self.live_count(),
            tombstoned: self.tombstoned,
            configured_layers: self.params.layers,
            built_layers: self.layers.len(),
            layers,
            intra_edges: intra,
            cross_edges: cross,
            neighbor_slots: intra + cross,
            slot_bound: held * self.layers.len() * (mdeg + 2 * m * mc),
            baseline_edges,
            bytes_estimate: self.vectors.as_flat().len() * 4 + node_bytes + baseline_edges * 4,
        }
    }

    pub(crate) fn metric(&self) -> DistanceMetric {
        self.params.metric
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub level: usize,
    pub granularity: u32,
    pub shard_count: usize,
    pub nodes: usize,
    pub live_nodes: usize,
    pub min_population: usize,
    pub max_population: usize,
    pub mean_population: f64,
    /// `(power-of-two upper bound, shard count)` buckets.
    pub population_histogram: Vec<(u64, usize)>,
    pub intra_edges: usize,
    pub cross_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub points: usize,
    pub live: usize,
    pub tombstoned: usize,
    pub configured_layers: usize,
    pub built_layers: usize,
    pub layers: Vec<LayerStats>,
    pub intra_edges: usize,
    pub cross_edges: usize,
    pub neighbor_slots: usize,
    /// `N * L * (M + 2m * M_cross)` over the held nodes and built layers.
    pub slot_bound: usize,
    pub baseline_edges: usize,
    pub bytes_estimate: usize,
}
