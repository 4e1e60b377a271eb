//! Flat navigable proximity graphs and the beam search shared by every
//! search path in the crate.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecspace::{DistanceMetric, VectorStore};
use crate::PointId;

/// Beam width and result count of one search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k: usize,
    pub ef: usize,
}

impl SearchParams {
    pub fn new(k: usize, ef: usize) -> Result<Self> {
        let p = Self { k, ef };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.ef < self.k {
            return Err(Error::invalid(format!(
                "ef ({}) must be at least k ({})",
                self.ef, self.k
            )));
        }
        Ok(())
    }
}

/// What a search does with a newly discovered node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    /// Candidate for the result set and for expansion.
    Accept,
    /// Expandable routing hop, never returned.
    Route,
    /// Ignored for now; the node stays unvisited and may be reconsidered.
    Reject,
}

/// A scored node. Orders by distance, then key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dist: f64,
    pub key: u32,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.key.cmp(&other.key))
    }
}

/// Epoch-stamped visited marks; clearing is O(1) amortized.
#[derive(Debug, Clone, Default)]
pub struct VisitedSet {
    stamps: Vec<u32>,
    epoch: u32,
}

impl VisitedSet {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            stamps: vec![0; n],
            epoch: 1,
        }
    }

    /// Forgets all marks and makes room for keys below `n`.
    pub fn reset(&mut self, n: usize) {
        if self.stamps.len() < n {
            self.stamps.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    #[inline]
    pub fn contains(&self, key: u32) -> bool {
        self.stamps.get(key as usize) == Some(&self.epoch)
    }

    /// Marks `key`; returns false if it was already marked.
    #[inline]
    pub fn insert(&mut self, key: u32) -> bool {
        let k = key as usize;
        if k >= self.stamps.len() {
            self.stamps.resize(k + 1, 0);
        }
        if self.stamps[k] == self.epoch {
            false
        } else {
            self.stamps[k] = self.epoch;
            true
        }
    }
}

/// Work done by one traversal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalStats {
    pub distance_computations: u64,
    pub nodes_expanded: u64,
}

/// Best-first beam search over an implicit graph.
///
/// `dist` scores a node against the query, `neighbors` appends the out-edges
/// of a node, and `admit` classifies each newly seen node. Entries are always
/// enqueued; they join the results only when admitted as [`Admission::Accept`].
/// The result set holds at most `ef` nodes and the search stops once the
/// closest queued node is farther than the worst result of a full set.
/// Returns results sorted by `(distance, key)`.
pub fn beam_search<D, N, A>(
    entries: &[u32],
    ef: usize,
    mut dist: D,
    mut neighbors: N,
    mut admit: A,
    visited: &mut VisitedSet,
    stats: &mut TraversalStats,
) -> Vec<Candidate>
where
    D: FnMut(u32) -> f64,
    N: FnMut(u32, &mut Vec<u32>),
    A: FnMut(u32) -> Admission,
{
    let ef = ef.max(1);
    let mut queue: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    let mut results: BinaryHeap<Candidate> = BinaryHeap::with_capacity(ef + 1);

    for &e in entries {
        if !visited.insert(e) {
            continue;
        }
        let admission = admit(e);
        let c = Candidate { dist: dist(e), key: e };
        stats.distance_computations += 1;
        queue.push(Reverse(c));
        if admission == Admission::Accept {
            results.push(c);
            if results.len() > ef {
                results.pop();
            }
        }
    }

    let mut buf = Vec::new();
    while let Some(Reverse(cur)) = queue.pop() {
        if results.len() >= ef && cur.dist > results.peek().map_or(f64::INFINITY, |w| w.dist) {
            break;
        }
        stats.nodes_expanded += 1;
        buf.clear();
        neighbors(cur.key, &mut buf);
        for &n in &buf {
            if visited.contains(n) {
                continue;
            }
            let admission = admit(n);
            if admission == Admission::Reject {
                continue;
            }
            visited.insert(n);
            let d = dist(n);
            stats.distance_computations += 1;
            let full = results.len() >= ef;
            if !full || d < results.peek().map_or(f64::INFINITY, |w| w.dist) {
                let c = Candidate { dist: d, key: n };
                queue.push(Reverse(c));
                if admission == Admission::Accept {
                    results.push(c);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
    }
    results.into_sorted_vec()
}

/// Construction parameters of a local graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphParams {
    pub max_degree: usize,
    pub ef_construction: usize,
    pub metric: DistanceMetric,
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_degree == 0 {
            return Err(Error::invalid("max degree must be positive"));
        }
        if self.ef_construction == 0 {
            return Err(Error::invalid("construction beam width must be positive"));
        }
        Ok(())
    }
}

/// Single-layer navigable graph over a subset of points.
///
/// Nodes are addressed by local index (insertion order); edges hold local
/// indices. Vectors are looked up in a shared [`VectorStore`] by global id.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGraph {
    params: GraphParams,
    node_ids: Vec<PointId>,
    edges: Vec<Vec<u32>>,
    tombstones: Vec<bool>,
    live: usize,
    entry: Option<u32>,
    index_of: HashMap<PointId, u32>,
}

impl LocalGraph {
    pub fn new(params: GraphParams) -> Self {
        Self {
            params,
            node_ids: Vec::new(),
            edges: Vec::new(),
            tombstones: Vec::new(),
            live: 0,
            entry: None,
            index_of: HashMap::new(),
        }
    }

    /// Builds by inserting `points` in order. An empty list gives an empty graph.
    pub fn build(points: &[PointId], vectors: &VectorStore, params: GraphParams) -> Result<Self> {
        params.validate()?;
        let mut g = Self::new(params);
        let mut scratch = VisitedSet::with_capacity(points.len());
        for &id in points {
            if vectors.get(id).is_none() {
                return Err(Error::invalid(format!("point {id} has no vector")));
            }
            g.insert_with(id, vectors, &mut scratch)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn live_len(&self) -> usize {
        self.live
    }

    pub fn entry(&self) -> Option<u32> {
        self.entry
    }

    pub fn node_id(&self, local: u32) -> PointId {
        self.node_ids[local as usize]
    }

    pub fn node_ids(&self) -> &[PointId] {
        &self.node_ids
    }

    pub fn local_of(&self, id: PointId) -> Option<u32> {
        self.index_of.get(&id).copied()
    }

    #[inline]
    pub fn neighbors(&self, local: u32) -> &[u32] {
        &self.edges[local as usize]
    }

    #[inline]
    pub fn is_tombstoned(&self, local: u32) -> bool {
        self.tombstones[local as usize]
    }

    pub fn tombstone_count(&self) -> usize {
        self.len() - self.live
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Inserts one point, connecting it to up to `max_degree` pruned neighbors.
    pub fn insert_node(&mut self, id: PointId, vectors: &VectorStore) -> Result<u32> {
        let mut scratch = VisitedSet::with_capacity(self.len() + 1);
        self.insert_with(id, vectors, &mut scratch)
    }

    pub(crate) fn insert_with(&mut self, id: PointId, vectors: &VectorStore, scratch: &mut VisitedSet) -> Result<u32> {
        if self.index_of.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        let query = vectors
            .get(id)
            .ok_or_else(|| Error::invalid(format!("point {id} has no vector")))?;
        let local = self.node_ids.len() as u32;

        let selected = match self.entry {
            None => Vec::new(),
            Some(entry) => {
                let cands = self.search_local(vectors, query, &[entry], self.params.ef_construction, scratch, &mut TraversalStats::default());
                self.select_neighbors(vectors, &cands, self.params.max_degree)
            }
        };

        self.node_ids.push(id);
        self.tombstones.push(false);
        self.edges.push(selected.clone());
        self.index_of.insert(id, local);
        self.live += 1;
        match self.entry {
            Some(e) if !self.tombstones[e as usize] => {}
            _ => self.entry = Some(local),
        }

        for nb in selected {
            self.edges[nb as usize].push(local);
            if self.edges[nb as usize].len() > self.params.max_degree {
                self.reprune(nb, vectors);
            }
        }
        Ok(local)
    }

    /// Beam search over intra edges; tombstoned nodes route but never return.
    fn search_local(
        &self,
        vectors: &VectorStore,
        query: &[f32],
        entries: &[u32],
        ef: usize,
        scratch: &mut VisitedSet,
        stats: &mut TraversalStats,
    ) -> Vec<Candidate> {
        scratch.reset(self.len());
        let metric = self.params.metric;
        beam_search(
            entries,
            ef,
            |n| metric.eval(query, vectors.row(self.node_ids[n as usize])),
            |n, out| out.extend_from_slice(&self.edges[n as usize]),
            |n| {
                if self.tombstones[n as usize] {
                    Admission::Route
                } else {
                    Admission::Accept
                }
            },
            scratch,
            stats,
        )
    }

    /// Occlusion rule: keep a candidate only if it is closer to the base than
    /// to every neighbor kept so far. `cands` must be sorted ascending.
    fn select_neighbors(&self, vectors: &VectorStore, cands: &[Candidate], m: usize) -> Vec<u32> {
        let metric = self.params.metric;
        let mut kept: Vec<u32> = Vec::with_capacity(m);
        for c in cands {
            if kept.len() >= m {
                break;
            }
            let v = vectors.row(self.node_ids[c.key as usize]);
            let occluded = kept
                .iter()
                .any(|&s| metric.eval(v, vectors.row(self.node_ids[s as usize])) <= c.dist);
            if !occluded {
                kept.push(c.key);
            }
        }
        kept
    }

    fn reprune(&mut self, node: u32, vectors: &VectorStore) {
        let metric = self.params.metric;
        let base = vectors.row(self.node_ids[node as usize]);
        let mut cands: Vec<Candidate> = self.edges[node as usize]
            .iter()
            .map(|&n| Candidate {
                dist: metric.eval(base, vectors.row(self.node_ids[n as usize])),
                key: n,
            })
            .collect();
        cands.sort();
        self.edges[node as usize] = self.select_neighbors(vectors, &cands, self.params.max_degree);
    }

    /// Tombstones a node by global id. The entry moves to another live node.
    pub fn mark_deleted(&mut self, id: PointId) -> Result<()> {
        let local = self.local_of(id).ok_or(Error::NotFound(id))?;
        if self.tombstones[local as usize] {
            return Err(Error::NotFound(id));
        }
        self.tombstones[local as usize] = true;
        self.live -= 1;
        if self.entry == Some(local) && self.live > 0 {
            let n = self.len() as u32;
            self.entry = (1..n)
                .map(|off| (local + off) % n)
                .find(|&i| !self.tombstones[i as usize]);
        }
        Ok(())
    }

    /// Live global ids in insertion order.
    pub fn survivors(&self) -> Vec<PointId> {
        self.node_ids
            .iter()
            .zip(&self.tombstones)
            .filter(|(_, t)| !**t)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Searches from `entries` (local indices) with caller-supplied admission.
    /// Results carry global ids, sorted by `(distance, id)`.
    pub fn beam_search_with<A>(
        &self,
        vectors: &VectorStore,
        query: &[f32],
        entries: &[u32],
        ef: usize,
        mut admit: A,
        stats: &mut TraversalStats,
    ) -> Vec<(PointId, f64)>
    where
        A: FnMut(PointId, bool) -> Admission,
    {
        if self.is_empty() {
            return Vec::new();
        }
        let metric = self.params.metric;
        let mut visited = VisitedSet::with_capacity(self.len());
        let found = beam_search(
            entries,
            ef,
            |n| metric.eval(query, vectors.row(self.node_ids[n as usize])),
            |n, out| out.extend_from_slice(&self.edges[n as usize]),
            |n| admit(self.node_ids[n as usize], self.tombstones[n as usize]),
            &mut visited,
            stats,
        );
        let mut out: Vec<(PointId, f64)> = found
            .into_iter()
            .map(|c| (self.node_ids[c.key as usize], c.dist))
            .collect();
        sort_hits(&mut out);
        out
    }

    /// Plain top-k search from the entry node.
    pub fn search(&self, vectors: &VectorStore, query: &[f32], params: SearchParams) -> Result<Vec<(PointId, f64)>> {
        params.validate()?;
        if query.len() != vectors.dim() {
            return Err(Error::invalid("query dimension mismatch"));
        }
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        let mut out = self.beam_search_with(
            vectors,
            query,
            &[entry],
            params.ef,
            |_, dead| if dead { Admission::Route } else { Admission::Accept },
            &mut TraversalStats::default(),
        );
        out.truncate(params.k);
        Ok(out)
    }

    pub(crate) fn from_parts(
        params: GraphParams,
        node_ids: Vec<PointId>,
        edges: Vec<Vec<u32>>,
        tombstones: Vec<bool>,
        entry: Option<u32>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if edges.len() != n || tombstones.len() != n {
            return Err(Error::corrupt("graph arrays disagree in length"));
        }
        if edges.iter().flatten().any(|&e| e as usize >= n) {
            return Err(Error::corrupt("edge points outside the graph"));
        }
        if edges.iter().any(|e| e.len() > params.max_degree) {
            return Err(Error::corrupt("node exceeds the degree bound"));
        }
        if entry.map_or(n > 0, |e| e as usize >= n) {
            return Err(Error::corrupt("bad entry node"));
        }
        let mut index_of = HashMap::with_capacity(n);
        for (i, &id) in node_ids.iter().enumerate() {
            if index_of.insert(id, i as u32).is_some() {
                return Err(Error::corrupt(format!("point {id} appears twice in one graph")));
            }
        }
        let live = tombstones.iter().filter(|t| !**t).count();
        Ok(Self {
            params,
            node_ids,
            edges,
            tombstones,
            live,
            entry,
            index_of,
        })
    }
}

/// Sorts `(id, distance)` pairs by distance, ties by smaller id.
pub fn sort_hits(hits: &mut [(PointId, f64)]) {
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}
