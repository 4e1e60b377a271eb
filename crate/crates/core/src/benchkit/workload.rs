//! Query filter workloads.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{polygon_area, unit_ball_volume, DimRange, Filter};
use crate::metagrid::MetaStore;

/// Retries per filter when a metadata store asks for non-empty filters.
pub const MAX_PLACEMENT_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Circle,
    /// Random polygons with three to five vertices on dimensions 0 and 1.
    Polygon,
    /// A box minus a concentric ball.
    Compose,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Box, Shape::Circle, Shape::Polygon, Shape::Compose];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Box => "box",
            Shape::Circle => "circle",
            Shape::Polygon => "polygon",
            Shape::Compose => "compose",
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "box" => Ok(Shape::Box),
            "circle" | "ball" => Ok(Shape::Circle),
            "polygon" => Ok(Shape::Polygon),
            "compose" => Ok(Shape::Compose),
            other => Err(Error::invalid(format!("unknown shape '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadMeta {
    pub shape: Shape,
    pub ratio: f64,
    pub alpha: f64,
    pub mdim: usize,
    pub seed: u64,
}

/// Query vectors, either rows of a separate query file or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuerySet {
    Ids(Vec<u32>),
    Inline(Vec<Vec<f32>>),
}

impl QuerySet {
    pub fn len(&self) -> usize {
        match self {
            QuerySet::Ids(v) => v.len(),
            QuerySet::Inline(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One filter per query plus the generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub meta: WorkloadMeta,
    pub queries: QuerySet,
    pub filters: Vec<Filter>,
}

impl Workload {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let w: Workload = serde_json::from_slice(&fs::read(path)?)?;
        if w.queries.len() != w.filters.len() {
            return Err(Error::InvalidData(format!(
                "workload has {} queries but {} filters",
                w.queries.len(),
                w.filters.len()
            )));
        }
        for f in &w.filters {
            f.validate()?;
            f.check_dims(w.meta.mdim)?;
        }
        Ok(w)
    }
}

/// Generates `count` filters of normalized volume close to `ratio`.
///
/// Query `i` refers to row `i` of the query vector file. With `meta`, each
/// filter is re-drawn until it admits at least one point.
pub fn gen_workload(
    count: usize,
    shape: Shape,
    ratio: f64,
    mdim: usize,
    alpha: f64,
    seed: u64,
    meta: Option<&MetaStore>,
) -> Result<Workload> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("ratio must be in (0, 1)"));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be finite and at least 1"));
    }
    if mdim == 0 {
        return Err(Error::invalid("metadata dimension must be positive"));
    }
    if shape == Shape::Polygon && mdim < 2 {
        return Err(Error::invalid("polygons need at least two metadata dimensions"));
    }
    if let Some(m) = meta {
        if m.mdim() != mdim {
            return Err(Error::invalid("metadata store dimension does not match"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut filters = Vec::with_capacity(count);
    for _ in 0..count {
        let mut tries = 0;
        loop {
            let f = sample_filter(&mut rng, shape, ratio, mdim, alpha)?;
            let ok = meta.is_none_or(|m| m.points().any(|p| f.evaluate(p)));
            if ok {
                filters.push(f);
                break;
            }
            tries += 1;
            if tries >= MAX_PLACEMENT_RETRIES {
                return Err(Error::Generation(format!(
                    "no non-empty {shape} filter of ratio {ratio} after {tries} attempts"
                )));
            }
        }
    }
    Ok(Workload {
        meta: WorkloadMeta {
            shape,
            ratio,
            alpha,
            mdim,
            seed,
        },
        queries: QuerySet::Ids((0..count as u32).collect()),
        filters,
    })
}

fn jitter(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.8..=1.2)
}

fn place(rng: &mut ChaCha8Rng, side: f64) -> f64 {
    if side >= 1.0 {
        0.0
    } else {
        rng.random_range(0.0..=1.0 - side)
    }
}

fn sample_box(rng: &mut ChaCha8Rng, ratio: f64, mdim: usize, alpha: f64) -> Result<Filter> {
    let sides: Vec<f64> = if alpha > 1.0 {
        let short = (ratio / alpha).powf(1.0 / mdim as f64);
        let long_dim = rng.random_range(0..mdim);
        (0..mdim)
            .map(|d| if d == long_dim { (alpha * short).min(1.0) } else { short })
            .collect()
    } else {
        let s = ratio.powf(1.0 / mdim as f64);
        (0..mdim).map(|_| (s * jitter(rng)).min(1.0)).collect()
    };
    let lo: Vec<f64> = sides.iter().map(|&s| place(rng, s)).collect();
    let hi = lo.iter().zip(&sides).map(|(l, s)| l + s).collect();
    Filter::new_box(lo, hi)
}

fn ball_radius(volume: f64, mdim: usize) -> f64 {
    (volume / unit_ball_volume(mdim)).powf(1.0 / mdim as f64)
}

fn sample_circle(rng: &mut ChaCha8Rng, ratio: f64, mdim: usize) -> Result<Filter> {
    let r = ball_radius(ratio, mdim);
    if r > 0.5 {
        return Err(Error::Generation(format!("a ball of volume {ratio} does not fit the unit cube")));
    }
    let c = (0..mdim).map(|_| rng.random_range(r..=1.0 - r)).collect();
    Filter::new_ball(c, r)
}

fn sample_polygon(rng: &mut ChaCha8Rng, ratio: f64, mdim: usize) -> Result<Filter> {
    let v = rng.random_range(3..=5usize);
    let step = std::f64::consts::TAU / v as f64;
    let mut pts: Vec<[f64; 2]> = (0..v)
        .map(|j| {
            let theta = j as f64 * step + rng.random_range(-0.3..=0.3) * step;
            let rho = jitter(rng);
            [rho * theta.cos(), rho * theta.sin()]
        })
        .collect();
    let area = ratio.powf(2.0 / mdim as f64);
    let scale = (area / polygon_area(&pts).abs()).sqrt();
    for p in &mut pts {
        p[0] *= scale;
        p[1] *= scale;
    }
    for axis in 0..2 {
        let lo = pts.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > 1.0 {
            return Err(Error::Generation(format!("a polygon of ratio {ratio} does not fit")));
        }
        let shift = place(rng, hi - lo) - lo;
        for p in &mut pts {
            p[axis] += shift;
        }
    }
    let side = ratio.powf(1.0 / mdim as f64);
    let ranges = (2..mdim)
        .map(|dim| {
            let lo = place(rng, side);
            DimRange { dim, lo, hi: lo + side }
        })
        .collect();
    Filter::new_polygon([0, 1], pts, ranges)
}

fn sample_compose(rng: &mut ChaCha8Rng, ratio: f64, mdim: usize) -> Result<Filter> {
    let s = (2.0 * ratio).powf(1.0 / mdim as f64);
    if s > 1.0 {
        return Err(Error::Generation(format!("a box of volume {} does not fit", 2.0 * ratio)));
    }
    let lo: Vec<f64> = (0..mdim).map(|_| place(rng, s)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + s).collect();
    let center = lo.iter().map(|l| l + s / 2.0).collect();
    let outer = Filter::new_box(lo, hi)?;
    let hole = Filter::new_ball(center, ball_radius(ratio, mdim))?;
    Ok(Filter::and(vec![outer, Filter::not(hole)]))
}

fn sample_filter(rng: &mut ChaCha8Rng, shape: Shape, ratio: f64, mdim: usize, alpha: f64) -> Result<Filter> {
    match shape {
        Shape::Box => sample_box(rng, ratio, mdim, alpha),
        Shape::Circle => sample_circle(rng, ratio, mdim),
        Shape::Polygon => sample_polygon(rng, ratio, mdim),
        Shape::Compose => sample_compose(rng, ratio, mdim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchkit::synth::{gen_metadata, MetaDistribution};
    use crate::filters::FilterGeometry;

    fn box_sides(f: &Filter) -> Vec<f64> {
        match f {
            Filter::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).collect(),
            _ => panic!("not a box"),
        }
    }

    #[test]
    fn box_sides_jitter_within_twenty_percent() {
        let w = gen_workload(500, Shape::Box, 0.01, 2, 1.0, 1, None).unwrap();
        for f in &w.filters {
            for s in box_sides(f) {
                assert!((0.08 - 1e-12..=0.12 + 1e-12).contains(&s), "{s}");
            }
        }
    }

    #[test]
    fn elongated_boxes_hit_alpha_at_equal_volume() {
        let w = gen_workload(200, Shape::Box, 0.04, 2, 16.0, 2, None).unwrap();
        for f in &w.filters {
            let g = FilterGeometry::of(f, 2).unwrap();
            assert!((g.alpha - 16.0).abs() < 1e-9);
            assert!((g.bbox.volume() - 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_radius_from_area() {
        let w = gen_workload(20, Shape::Circle, 0.0314, 2, 1.0, 3, None).unwrap();
        for f in &w.filters {
            match f {
                Filter::Ball { center, radius } => {
                    assert!((radius - 0.1).abs() < 1e-3);
                    assert!(center.iter().all(|c| c - radius >= 0.0 && c + radius <= 1.0));
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn polygon_area_matches_ratio() {
        for m in [2, 3] {
            let w = gen_workload(100, Shape::Polygon, 0.05, m, 1.0, 4, None).unwrap();
            for f in &w.filters {
                let Filter::Polygon(p) = f else { panic!() };
                assert!((3..=5).contains(&p.vertices.len()));
                let a = polygon_area(&p.vertices).abs();
                let want = 0.05f64.powf(2.0 / m as f64);
                assert!((a - want).abs() < 1e-9 * want.max(1.0));
                assert!(p.vertices.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
                assert_eq!(p.ranges.len(), m - 2);
            }
        }
    }

    #[test]
    fn selectivity_tracks_ratio_on_uniform_data() {
        let n = 50_000;
        let meta = MetaStore::from_flat(2, gen_metadata(n, 2, MetaDistribution::Uniform, 5).unwrap()).unwrap();
        for shape in Shape::ALL {
            for ratio in [0.01, 0.05, 0.1] {
                let w = gen_workload(100, shape, ratio, 2, 1.0, 6, None).unwrap();
                let mean = w
                    .filters
                    .iter()
                    .map(|f| meta.points().filter(|p| f.evaluate(p)).count() as f64 / n as f64)
                    .sum::<f64>()
                    / w.len() as f64;
                // the sample bounding box sits a hair inside the unit square
                assert!(
                    (0.75 * ratio..=1.25 * ratio).contains(&mean),
                    "{shape} {ratio}: {mean}"
                );
            }
        }
    }

    #[test]
    fn non_empty_placement_and_failure() {
        let raw = [0.5, 0.5, 0.0, 0.0, 1.0, 1.0];
        let meta = MetaStore::from_flat(2, raw.to_vec()).unwrap();
        let w = gen_workload(3, Shape::Box, 0.5, 2, 1.0, 7, Some(&meta)).unwrap();
        for f in &w.filters {
            assert!(meta.points().any(|p| f.evaluate(p)));
        }
        let sparse = MetaStore::from_flat(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            gen_workload(1, Shape::Circle, 0.0001, 2, 1.0, 8, Some(&sparse)),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn deterministic_and_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let a = gen_workload(30, Shape::Compose, 0.02, 3, 1.0, 9, None).unwrap();
        let b = gen_workload(30, Shape::Compose, 0.02, 3, 1.0, 9, None).unwrap();
        assert_eq!(a, b);
        let p = dir.path().join("w.json");
        a.save(&p).unwrap();
        assert_eq!(Workload::load(&p).unwrap(), a);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_workload(1, Shape::Box, 0.0, 2, 1.0, 0, None).is_err());
        assert!(gen_workload(1, Shape::Box, 0.1, 2, 0.5, 0, None).is_err());
        assert!(gen_workload(1, Shape::Polygon, 0.1, 1, 1.0, 0, None).is_err());
    }
}
