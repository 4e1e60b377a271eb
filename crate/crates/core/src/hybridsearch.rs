//! Filtered top-k search over a [`CubeGraphIndex`].
//!
//! Two strategies traverse the cube graphs. The predetermined search marks
//! every cube overlapping the filter's bounding box up front and only crosses
//! into marked cubes. The on-the-fly search starts from one cube and marks
//! further cubes as qualifying points are reached. Auto dispatch uses the first
//! for boxes and the second for every other shape. Pre- and post-filter
//! baselines run on a separate monolithic graph.
//!
//! Distances in results are the raw metric values (squared L2 by default).

use std::cell::RefCell;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cubeindex::{CubeGraphIndex, Layer};
use crate::error::{Error, Result};
use crate::filters::{CubeRange, Filter, FilterGeometry};
use crate::proxgraph::{beam_search, Admission, TraversalStats, VisitedSet};
use crate::PointId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Auto,
    Predetermined,
    Fly,
    Prefilter,
    Postfilter,
}

impl Strategy {
    pub const CONCRETE: [Strategy; 4] = [
        Strategy::Predetermined,
        Strategy::Fly,
        Strategy::Prefilter,
        Strategy::Postfilter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Auto => "auto",
            Strategy::Predetermined => "predetermined",
            Strategy::Fly => "fly",
            Strategy::Prefilter => "prefilter",
            Strategy::Postfilter => "postfilter",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Strategy::Auto),
            "predetermined" | "cube" => Ok(Strategy::Predetermined),
            "fly" => Ok(Strategy::Fly),
            "prefilter" => Ok(Strategy::Prefilter),
            "postfilter" => Ok(Strategy::Postfilter),
            other => Err(Error::invalid(format!("unknown strategy '{other}'"))),
        }
    }
}

/// One filtered query.
#[derive(Debug, Clone, Copy)]
pub struct SearchRequest<'a> {
    pub query: &'a [f32],
    pub filter: &'a Filter,
    pub k: usize,
    pub ef: usize,
    pub strategy: Strategy,
    pub layer_override: Option<usize>,
}

impl<'a> SearchRequest<'a> {
    /// Request with `ef = k` and automatic strategy selection.
    pub fn new(query: &'a [f32], filter: &'a Filter, k: usize) -> Self {
        Self {
            query,
            filter,
            k,
            ef: k,
            strategy: Strategy::Auto,
            layer_override: None,
        }
    }

    pub fn ef(mut self, ef: usize) -> Self {
        self.ef = ef;
        self
    }

    pub fn strategy(mut self, s: Strategy) -> Self {
        self.strategy = s;
        self
    }

    pub fn layer(mut self, layer: usize) -> Self {
        self.layer_override = Some(layer);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: PointId,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchCounters {
    pub distance_computations: u64,
    pub nodes_expanded: u64,
    /// Non-empty cubes the traversal was allowed to enter.
    pub cubes_activated: u64,
    pub layer_used: Option<usize>,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
    pub counters: SearchCounters,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<PointId> {
        self.hits.iter().map(|h| h.id).collect()
    }

    fn empty(strategy: Strategy, layer: Option<usize>) -> Self {
        Self {
            hits: Vec::new(),
            counters: SearchCounters {
                layer_used: layer,
                strategy,
                ..Default::default()
            },
        }
    }
}

thread_local! {
    static VISITED: RefCell<VisitedSet> = RefCell::new(VisitedSet::default());
}

fn with_visited<T>(n: usize, f: impl FnOnce(&mut VisitedSet) -> T) -> T {
    VISITED.with_borrow_mut(|v| {
        v.reset(n);
        f(v)
    })
}

fn finish(found: Vec<crate::proxgraph::Candidate>, k: usize) -> Vec<Hit> {
    found
        .into_iter()
        .take(k)
        .map(|c| Hit {
            id: c.key,
            distance: c.dist,
        })
        .collect()
}

impl CubeGraphIndex {
    fn check_request(&self, req: &SearchRequest) -> Result<()> {
        if req.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if req.ef < req.k {
            return Err(Error::invalid(format!("ef ({}) must be at least k ({})", req.ef, req.k)));
        }
        if req.query.len() != self.vectors.dim() {
            return Err(Error::invalid(format!(
                "query has {} dims, index has {}",
                req.query.len(),
                self.vectors.dim()
            )));
        }
        req.filter.validate()?;
        req.filter.check_dims(self.grid.mdim)?;
        if let Some(l) = req.layer_override {
            if l >= self.layers.len() {
                return Err(Error::invalid(format!(
                    "layer {l} is not built; built layers are 0..{}",
                    self.layers.len()
                )));
            }
        }
        Ok(())
    }

    /// Layer a filter is searched at, honoring any override.
    pub fn search_layer(&self, filter: &Filter, layer_override: Option<usize>) -> Result<usize> {
        match layer_override {
            Some(l) if l < self.layers.len() => Ok(l),
            Some(l) => Err(Error::invalid(format!("layer {l} is not built"))),
            None => {
                let g = FilterGeometry::of(filter, self.grid.mdim)?;
                if g.r == 0.0 {
                    // a single point fits every cell; use the finest layer
                    return Ok(self.layers.len() - 1);
                }
                self.grid.select_layer(g.r)
            }
        }
    }

    /// Dispatches on `req.strategy`. `Auto` picks the predetermined search for
    /// boxes and conjunctions of boxes, the on-the-fly search otherwise.
    pub fn search(&self, req: &SearchRequest) -> Result<SearchResult> {
        match req.strategy {
            Strategy::Auto if req.filter.is_box_like() => self.search_predetermined(req),
            Strategy::Auto | Strategy::Fly => self.search_fly(req),
            Strategy::Predetermined => self.search_predetermined(req),
            Strategy::Prefilter => self.pre_filter_baseline(req),
            Strategy::Postfilter => self.post_filter_baseline(req),
        }
    }

    #[inline]
    fn qualifies(&self, filter: &Filter, id: PointId) -> bool {
        filter.evaluate(self.meta.point(id))
    }

    fn intra_and_cross(&self, layer: &Layer, id: PointId, out: &mut Vec<u32>, allow: impl Fn(u32) -> bool) {
        let r = layer.node(id);
        if r.is_none() {
            return;
        }
        let (m, mc) = (self.grid.mdim, self.params.cross_degree);
        let shard = &layer.shards[r.shard as usize];
        out.extend(shard.graph.neighbors(r.local).iter().map(|&l| shard.graph.node_id(l)));
        for dir in 0..2 * m {
            if let Some(adj) = shard.adjacent[dir] {
                if allow(adj) {
                    out.extend_from_slice(shard.cross_edges(r.local, dir, m, mc));
                }
            }
        }
    }

    /// Searches the cubes overlapping the filter's bounding box at the chosen layer.
    pub fn search_predetermined(&self, req: &SearchRequest) -> Result<SearchResult> {
        self.check_request(req)?;
        let strategy = Strategy::Predetermined;
        let geom = match FilterGeometry::of(req.filter, self.grid.mdim) {
            Ok(g) => g,
            Err(Error::EmptyFilter) => return Ok(SearchResult::empty(strategy, None)),
            Err(e) => return Err(e),
        };
        let level = self.search_layer(req.filter, req.layer_override)?;
        let layer = &self.layers[level];
        let range = CubeRange::of_box(&geom.bbox, level, &self.grid);

        let mut marked = vec![false; layer.shards.len()];
        let mut entries = Vec::new();
        let mut activated = 0u64;
        let mut mark = |si: u32| {
            if !marked[si as usize] {
                marked[si as usize] = true;
                activated += 1;
                if let Some(e) = layer.shards[si as usize].entry_point() {
                    entries.push(e);
                }
            }
        };
        if range.count() as usize <= layer.shards.len() {
            range.for_each(|c| {
                if let Some(si) = layer.shard_of_cube(c.linear) {
                    mark(si);
                }
            });
        } else {
            for (si, s) in layer.shards.iter().enumerate() {
                if range.contains(&s.cube.coords) {
                    mark(si as u32);
                }
            }
        }
        if entries.is_empty() {
            return Ok(SearchResult::empty(strategy, Some(level)));
        }

        let metric = self.metric();
        let mut stats = TraversalStats::default();
        let found = with_visited(self.state.len(), |visited| {
            beam_search(
                &entries,
                req.ef,
                |n| metric.eval(req.query, self.vectors.row(n)),
                |n, out| self.intra_and_cross(layer, n, out, |s| marked[s as usize]),
                |n| {
                    if self.is_live(n) && self.qualifies(req.filter, n) {
                        Admission::Accept
                    } else {
                        Admission::Route
                    }
                },
                visited,
                &mut stats,
            )
        });
        Ok(SearchResult {
            hits: finish(found, req.k),
            counters: SearchCounters {
                distance_computations: stats.distance_computations,
                nodes_expanded: stats.nodes_expanded,
                cubes_activated: activated,
                layer_used: Some(level),
                strategy,
            },
        })
    }

    /// Starts in one cube and unlocks neighboring cubes as qualifying points are found.
    pub fn search_fly(&self, req: &SearchRequest) -> Result<SearchResult> {
        self.check_request(req)?;
        let strategy = Strategy::Fly;
        let geom = match FilterGeometry::of(req.filter, self.grid.mdim) {
            Ok(g) => g,
            Err(Error::EmptyFilter) => return Ok(SearchResult::empty(strategy, None)),
            Err(e) => return Err(e),
        };
        let level = self.search_layer(req.filter, req.layer_override)?;
        let layer = &self.layers[level];
        let range = CubeRange::of_box(&geom.bbox, level, &self.grid);
        let centroid = geom.bbox.centroid();

        let start = layer
            .shard_of_cube(self.grid.linear_id(&centroid, level))
            .filter(|&si| layer.shards[si as usize].entry_point().is_some())
            .or_else(|| {
                let g = layer.granularity;
                layer
                    .shards
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| range.contains(&s.cube.coords) && s.entry_point().is_some())
                    .map(|(i, s)| {
                        let c = s.cube.center(g);
                        let d: f64 = c.iter().zip(&centroid).map(|(a, b)| (a - b) * (a - b)).sum();
                        (d, s.cube.linear, i as u32)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|t| t.2)
            });
        let Some(start) = start else {
            return Ok(SearchResult::empty(strategy, Some(level)));
        };
        let entry = layer.shards[start as usize].entry_point().expect("non-empty start cube");

        let in_range: Vec<bool> = layer.shards.iter().map(|s| range.contains(&s.cube.coords)).collect();
        let mut marked = vec![false; layer.shards.len()];
        marked[start as usize] = true;
        let mut activated = 1u64;
        let metric = self.metric();
        let mut stats = TraversalStats::default();
        let found = with_visited(self.state.len(), |visited| {
            beam_search(
                &[entry],
                req.ef,
                |n| metric.eval(req.query, self.vectors.row(n)),
                |n, out| self.intra_and_cross(layer, n, out, |_| true),
                |n| {
                    let r = layer.node(n);
                    if r.is_none() || !in_range[r.shard as usize] {
                        return Admission::Reject;
                    }
                    let s = r.shard as usize;
                    if self.qualifies(req.filter, n) {
                        if !marked[s] {
                            marked[s] = true;
                            activated += 1;
                        }
                        if self.is_live(n) {
                            Admission::Accept
                        } else {
                            Admission::Route
                        }
                    } else if marked[s] {
                        Admission::Route
                    } else {
                        Admission::Reject
                    }
                },
                visited,
                &mut stats,
            )
        });
        Ok(SearchResult {
            hits: finish(found, req.k),
            counters: SearchCounters {
                distance_computations: stats.distance_computations,
                nodes_expanded: stats.nodes_expanded,
                cubes_activated: activated,
                layer_used: Some(level),
                strategy,
            },
        })
    }

    fn require_baseline(&self) -> Result<&crate::proxgraph::LocalGraph> {
        self.baseline
            .as_ref()
            .ok_or_else(|| Error::invalid("no baseline graph; build it with build_baseline"))
    }

    /// Unfiltered beam search on the monolithic graph, then the filter.
    pub fn post_filter_baseline(&self, req: &SearchRequest) -> Result<SearchResult> {
        self.check_request(req)?;
        let g = self.require_baseline()?;
        let Some(entry) = g.entry() else {
            return Ok(SearchResult::empty(Strategy::Postfilter, None));
        };
        let mut stats = TraversalStats::default();
        let found = g.beam_search_with(
            &self.vectors,
            req.query,
            &[entry],
            req.ef,
            |_, dead| if dead { Admission::Route } else { Admission::Accept },
            &mut stats,
        );
        let hits = found
            .into_iter()
            .filter(|&(id, _)| self.is_live(id) && self.qualifies(req.filter, id))
            .take(req.k)
            .map(|(id, distance)| Hit { id, distance })
            .collect();
        Ok(SearchResult {
            hits,
            counters: SearchCounters {
                distance_computations: stats.distance_computations,
                nodes_expanded: stats.nodes_expanded,
                cubes_activated: 0,
                layer_used: None,
                strategy: Strategy::Postfilter,
            },
        })
    }

    /// Beam search on the monolithic graph that never scores or expands
    /// non-qualifying nodes. The entry node is always expanded.
    pub fn pre_filter_baseline(&self, req: &SearchRequest) -> Result<SearchResult> {
        self.check_request(req)?;
        let g = self.require_baseline()?;
        let Some(entry) = g.entry() else {
            return Ok(SearchResult::empty(Strategy::Prefilter, None));
        };
        let entry_id = g.node_ids()[entry as usize];
        let mut stats = TraversalStats::default();
        let found = g.beam_search_with(
            &self.vectors,
            req.query,
            &[entry],
            req.ef,
            |id, dead| {
                if !dead && self.is_live(id) && self.qualifies(req.filter, id) {
                    Admission::Accept
                } else if id == entry_id {
                    // the traversal has to start somewhere
                    Admission::Route
                } else {
                    Admission::Reject
                }
            },
            &mut stats,
        );
        let hits = found
            .into_iter()
            .take(req.k)
            .map(|(id, distance)| Hit { id, distance })
            .collect();
        Ok(SearchResult {
            hits,
            counters: SearchCounters {
                distance_computations: stats.distance_computations,
                nodes_expanded: stats.nodes_expanded,
                cubes_activated: 0,
                layer_used: None,
                strategy: Strategy::Prefilter,
            },
        })
    }
}
