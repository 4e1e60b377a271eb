//! Metadata filter predicates and their geometry.
//!
//! Filters live in normalized metadata space. Each filter has a conservative
//! axis-aligned bounding box; its longest side is the characteristic length
//! that drives layer selection.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metagrid::{cell_index, CubeId, GridConfig, MetaStore};

/// Closed interval constraint on one metadata dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimRange {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Simple polygon over two metadata dimensions, optionally combined with
/// interval constraints on other dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub dims: [usize; 2],
    pub vertices: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<DimRange>,
}

/// Predicate tree over normalized metadata.
///
/// JSON form: `{"type": "box", "lo": [..], "hi": [..]}`,
/// `{"type": "ball", "center": [..], "radius": r}`,
/// `{"type": "polygon", "dims": [i, j], "vertices": [[x, y], ..], "ranges": [{"dim", "lo", "hi"}]}`,
/// `{"type": "and" | "or", "children": [..]}`, `{"type": "not", "child": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Filter {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polygon(Polygon),
    And { children: Vec<Filter> },
    Or { children: Vec<Filter> },
    Not { child: std::boxed::Box<Filter> },
}

impl Filter {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let f = Filter::Box { lo, hi };
        f.validate()?;
        Ok(f)
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let f = Filter::Ball { center, radius };
        f.validate()?;
        Ok(f)
    }

    /// Builds a polygon filter; clockwise input is reoriented counter-clockwise.
    pub fn new_polygon(dims: [usize; 2], vertices: Vec<[f64; 2]>, ranges: Vec<DimRange>) -> Result<Self> {
        let mut f = Filter::Polygon(Polygon {
            dims,
            vertices,
            ranges,
        });
        f.validate()?;
        f.canonicalize();
        Ok(f)
    }

    pub fn and(children: Vec<Filter>) -> Self {
        Filter::And { children }
    }

    pub fn or(children: Vec<Filter>) -> Self {
        Filter::Or { children }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(child: Filter) -> Self {
        Filter::Not {
            child: std::boxed::Box::new(child),
        }
    }

    /// Parses and validates the JSON wire form.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut f: Filter = serde_json::from_str(s)
            .map_err(|e| Error::InvalidFilter(format!("malformed filter JSON: {e}")))?;
        f.validate()?;
        f.canonicalize();
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("filters always serialize")
    }

    fn canonicalize(&mut self) {
        match self {
            Filter::Polygon(p) => {
                if signed_area(&p.vertices) < 0.0 {
                    p.vertices.reverse();
                }
            }
            Filter::And { children } | Filter::Or { children } => {
                children.iter_mut().for_each(Filter::canonicalize)
            }
            Filter::Not { child } => child.canonicalize(),
            _ => {}
        }
    }

    /// Structural checks that do not depend on the metadata dimension.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFilter(m));
        match self {
            Filter::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box bounds must be non-empty and of equal length".into());
                }
                if lo.iter().chain(hi).any(|v| !v.is_finite()) {
                    return bad("box bounds must be finite".into());
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return bad("box needs lo <= hi on every dimension".into());
                }
            }
            Filter::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return bad("ball center must be non-empty and finite".into());
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
            }
            Filter::Polygon(p) => validate_polygon(p)?,
            Filter::And { children } | Filter::Or { children } => {
                if children.is_empty() {
                    return bad("boolean node needs at least one child".into());
                }
                for c in children {
                    c.validate()?;
                }
            }
            Filter::Not { child } => child.validate()?,
        }
        Ok(())
    }

    /// Checks that every coordinate the filter touches exists in `mdim` dims.
    pub fn check_dims(&self, mdim: usize) -> Result<()> {
        let mismatch = |what: &str, got: usize| {
            Err(Error::InvalidFilter(format!(
                "{what} has {got} dims, metadata has {mdim}"
            )))
        };
        match self {
            Filter::Box { lo, .. } if lo.len() != mdim => mismatch("box", lo.len()),
            Filter::Ball { center, .. } if center.len() != mdim => mismatch("ball", center.len()),
            Filter::Polygon(p) => {
                if p.dims.iter().chain(p.ranges.iter().map(|r| &r.dim)).any(|&d| d >= mdim) {
                    return Err(Error::InvalidFilter(format!(
                        "polygon references a dimension >= {mdim}"
                    )));
                }
                Ok(())
            }
            Filter::And { children } | Filter::Or { children } => {
                children.iter().try_for_each(|c| c.check_dims(mdim))
            }
            Filter::Not { child } => child.check_dims(mdim),
            _ => Ok(()),
        }
    }

    /// Whether `point` satisfies the predicate.
    pub fn evaluate(&self, point: &[f64]) -> bool {
        match self {
            Filter::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(p, (l, h))| *l <= *p && *p <= *h),
            Filter::Ball { center, radius } => {
                let d2: f64 = point
                    .iter()
                    .zip(center)
                    .map(|(p, c)| (p - c) * (p - c))
                    .sum();
                d2 <= radius * radius
            }
            Filter::Polygon(p) => {
                p.ranges
                    .iter()
                    .all(|r| r.lo <= point[r.dim] && point[r.dim] <= r.hi)
                    && point_in_polygon(&p.vertices, point[p.dims[0]], point[p.dims[1]])
            }
            Filter::And { children } => children.iter().all(|c| c.evaluate(point)),
            Filter::Or { children } => children.iter().any(|c| c.evaluate(point)),
            Filter::Not { child } => !child.evaluate(point),
        }
    }

    /// True for boxes and conjunctions of boxes, the shapes whose cube set is exact.
    pub fn is_box_like(&self) -> bool {
        match self {
            Filter::Box { .. } => true,
            Filter::And { children } => children.iter().all(Filter::is_box_like),
            _ => false,
        }
    }
}

fn validate_polygon(p: &Polygon) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidFilter(m.into()));
    if p.dims[0] == p.dims[1] {
        return bad("polygon dims must be two distinct dimensions");
    }
    let v = &p.vertices;
    if v.len() < 3 {
        return bad("polygon needs at least three vertices");
    }
    if v.iter().flatten().any(|c| !c.is_finite()) {
        return bad("polygon vertices must be finite");
    }
    for r in &p.ranges {
        if !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
            return bad("polygon range needs finite lo <= hi");
        }
        if p.dims.contains(&r.dim) {
            return bad("polygon range repeats a polygon dimension");
        }
    }
    let scale = v
        .iter()
        .flatten()
        .fold(0f64, |m, c| m.max(c.abs()))
        .max(1e-300);
    if signed_area(v).abs() <= 1e-12 * scale * scale {
        return bad("polygon is degenerate (zero area)");
    }
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if a == b {
            return bad("polygon has repeated consecutive vertices");
        }
        for j in i + 1..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return bad("polygon is self-intersecting");
            }
        }
    }
    Ok(())
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Area enclosed by a simple polygon.
pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    signed_area(v).abs()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn within_segment_box(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && within_segment_box(a, c, d))
        || (d2 == 0.0 && within_segment_box(b, c, d))
        || (d3 == 0.0 && within_segment_box(c, a, b))
        || (d4 == 0.0 && within_segment_box(d, a, b))
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    cross(a, b, p).abs() <= 1e-12 * len.max(1e-300) && within_segment_box(p, a, b)
}

/// Even-odd ray crossing; points on the boundary count as inside.
pub fn point_in_polygon(v: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = v.len();
    let p = [x, y];
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Axis-aligned box in normalized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn unit(mdim: usize) -> Self {
        Self {
            lo: vec![0.0; mdim],
            hi: vec![1.0; mdim],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn intersect(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        }
    }

    pub fn hull(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn centroid(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (l + h) / 2.0).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.sides().iter().product()
        }
    }
}

fn raw_bbox(filter: &Filter, mdim: usize) -> Aabb {
    match filter {
        Filter::Box { lo, hi } => Aabb {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        Filter::Ball { center, radius } => Aabb {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        },
        Filter::Polygon(p) => {
            let mut b = Aabb::unit(mdim);
            for (axis, &d) in p.dims.iter().enumerate() {
                b.lo[d] = p.vertices.iter().map(|v| v[axis]).fold(f64::INFINITY, f64::min);
                b.hi[d] = p.vertices.iter().map(|v| v[axis]).fold(f64::NEG_INFINITY, f64::max);
            }
            for r in &p.ranges {
                b.lo[r.dim] = b.lo[r.dim].max(r.lo);
                b.hi[r.dim] = b.hi[r.dim].min(r.hi);
            }
            b
        }
        Filter::And { children } => children
            .iter()
            .map(|c| raw_bbox(c, mdim))
            .fold(Aabb::unit(mdim), |acc, b| acc.intersect(&b)),
        Filter::Or { children } => {
            let mut hull: Option<Aabb> = None;
            for b in children.iter().map(|c| raw_bbox(c, mdim)) {
                if b.is_empty() {
                    continue;
                }
                hull = Some(match hull {
                    None => b,
                    Some(h) => h.hull(&b),
                });
            }
            // an all-empty disjunction stays empty
            hull.unwrap_or(Aabb {
                lo: vec![1.0; mdim],
                hi: vec![0.0; mdim],
            })
        }
        // complements never tighten the box
        Filter::Not { .. } => Aabb::unit(mdim),
    }
}

/// Conservative bounding box of the filter's positive region, clipped to the unit cube.
pub fn filter_bbox(filter: &Filter, mdim: usize) -> Result<Aabb> {
    let b = raw_bbox(filter, mdim).intersect(&Aabb::unit(mdim));
    if b.is_empty() {
        Err(Error::EmptyFilter)
    } else {
        Ok(b)
    }
}

/// Bounding box with its side-length summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterGeometry {
    pub bbox: Aabb,
    pub r_max: f64,
    pub r_min: f64,
    /// Characteristic length; equals `r_max`.
    pub r: f64,
    /// `r_max / r_min`; infinite when the box is flat along some dimension.
    pub alpha: f64,
}

impl FilterGeometry {
    pub fn of(filter: &Filter, mdim: usize) -> Result<Self> {
        let bbox = filter_bbox(filter, mdim)?;
        let sides = bbox.sides();
        let r_max = sides.iter().cloned().fold(0.0, f64::max);
        let r_min = sides.iter().cloned().fold(f64::INFINITY, f64::min);
        let alpha = if r_min > 0.0 { r_max / r_min } else { f64::INFINITY };
        Ok(Self {
            bbox,
            r_max,
            r_min,
            r: r_max,
            alpha,
        })
    }
}

/// `(r, alpha)` of a filter.
pub fn characteristic_length(filter: &Filter, mdim: usize) -> Result<(f64, f64)> {
    let g = FilterGeometry::of(filter, mdim)?;
    Ok((g.r, g.alpha))
}

/// Per-dimension cell index ranges covered by a box at one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeRange {
    pub layer: usize,
    pub granularity: u32,
    pub lo: Vec<u32>,
    pub hi: Vec<u32>,
}

impl CubeRange {
    pub fn of_box(bbox: &Aabb, layer: usize, grid: &GridConfig) -> Self {
        let g = grid.granularity(layer);
        Self {
            layer,
            granularity: g,
            lo: bbox.lo.iter().map(|&v| cell_index(v, g)).collect(),
            hi: bbox.hi.iter().map(|&v| cell_index(v, g)).collect(),
        }
    }

    pub fn count(&self) -> u64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as u64)
            .product()
    }

    pub fn contains(&self, coords: &[u32]) -> bool {
        coords
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(c, (l, h))| l <= c && c <= h)
    }

    /// Visits every cube in the range in ascending linear order.
    pub fn for_each(&self, mut f: impl FnMut(CubeId)) {
        let m = self.lo.len();
        let mut cur = self.lo.clone();
        loop {
            f(CubeId::from_coords(self.layer, self.granularity, cur.clone()));
            let mut axis = 0;
            loop {
                if axis == m {
                    return;
                }
                if cur[axis] < self.hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.lo[axis];
                axis += 1;
            }
        }
    }

    pub fn cubes(&self) -> Vec<CubeId> {
        let mut out = Vec::with_capacity(self.count() as usize);
        self.for_each(|c| out.push(c));
        out
    }
}

/// Cubes at `layer` overlapping the filter's bounding box. Empty filters touch none.
pub fn intersecting_cubes(filter: &Filter, layer: usize, grid: &GridConfig) -> Result<Vec<CubeId>> {
    if layer >= grid.layers {
        return Err(Error::invalid(format!("layer {layer} out of range")));
    }
    match filter_bbox(filter, grid.mdim) {
        Ok(b) => Ok(CubeRange::of_box(&b, layer, grid).cubes()),
        Err(Error::EmptyFilter) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

/// Fraction of points inside the cube union that satisfy the filter.
pub fn elastic_factor(filter: &Filter, cubes: &[CubeId], meta: &MetaStore, grid: &GridConfig) -> Result<f64> {
    if cubes.is_empty() {
        return Err(Error::UndefinedElasticFactor);
    }
    let layer = cubes[0].layer;
    if cubes.iter().any(|c| c.layer != layer) {
        return Err(Error::invalid("cubes must come from one layer"));
    }
    let set: HashSet<u64> = cubes.iter().map(|c| c.linear).collect();
    let (mut inside, mut hits) = (0u64, 0u64);
    for p in meta.points() {
        if set.contains(&grid.linear_id(p, layer)) {
            inside += 1;
            if filter.evaluate(p) {
                hits += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::UndefinedElasticFactor);
    }
    Ok(hits as f64 / inside as f64)
}

/// Volume of the unit ball in `m` dimensions.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / m as f64 * unit_ball_volume(m - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(lo: f64, hi: f64) -> Filter {
        Filter::new_box(vec![lo, lo], vec![hi, hi]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let b = unit_box(0.1, 0.3);
        assert!(b.evaluate(&[0.2, 0.2]));
        assert!(!b.evaluate(&[0.4, 0.2]));
        assert!(b.evaluate(&[0.1, 0.3]));

        let ball = Filter::new_ball(vec![0.5, 0.5], 0.1).unwrap();
        assert!(!ball.evaluate(&[0.5, 0.61]));
        assert!(ball.evaluate(&[0.5, 0.59]));

        let compose = Filter::and(vec![
            unit_box(0.0, 0.5),
            Filter::not(Filter::new_ball(vec![0.25, 0.25], 0.1).unwrap()),
        ]);
        assert!(!compose.evaluate(&[0.25, 0.25]));
        assert!(compose.evaluate(&[0.45, 0.45]));
    }

    #[test]
    fn invalid_filters_rejected_at_construction() {
        assert!(Filter::new_box(vec![0.5], vec![0.4]).is_err());
        assert!(Filter::new_ball(vec![0.5], 0.0).is_err());
        let collinear = Filter::new_polygon([0, 1], vec![[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]], vec![]);
        assert!(matches!(collinear, Err(Error::InvalidFilter(_))));
        let bowtie = Filter::new_polygon(
            [0, 1],
            vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
            vec![],
        );
        assert!(matches!(bowtie, Err(Error::InvalidFilter(_))));
        assert!(Filter::from_json(r#"{"type":"ball","center":[0.5],"radius":-1}"#).is_err());
    }

    #[test]
    fn clockwise_polygons_are_reoriented() {
        let f = Filter::new_polygon([0, 1], vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![]).unwrap();
        let Filter::Polygon(p) = &f else { unreachable!() };
        assert!(signed_area(&p.vertices) > 0.0);
    }

    #[test]
    fn polygon_boundary_counts_inside() {
        let sq = vec![[0.2, 0.2], [0.6, 0.2], [0.6, 0.6], [0.2, 0.6]];
        assert!(point_in_polygon(&sq, 0.2, 0.4));
        assert!(point_in_polygon(&sq, 0.6, 0.6));
        assert!(point_in_polygon(&sq, 0.4, 0.4));
        assert!(!point_in_polygon(&sq, 0.61, 0.4));
        // concave: an L shape
        let l = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]];
        assert!(point_in_polygon(&l, 0.25, 0.75));
        assert!(!point_in_polygon(&l, 0.75, 0.75));
    }

    #[test]
    fn polygon_with_extra_range() {
        let f = Filter::new_polygon(
            [0, 1],
            vec![[0.1, 0.1], [0.3, 0.1], [0.2, 0.25]],
            vec![DimRange { dim: 2, lo: 0.4, hi: 0.6 }],
        )
        .unwrap();
        assert!(f.evaluate(&[0.2, 0.15, 0.5]));
        assert!(!f.evaluate(&[0.2, 0.15, 0.7]));
        let b = filter_bbox(&f, 3).unwrap();
        assert_eq!(b.lo, vec![0.1, 0.1, 0.4]);
        assert_eq!(b.hi, vec![0.3, 0.25, 0.6]);
        assert!(f.check_dims(2).is_err());
    }

    #[test]
    fn bbox_examples() {
        let ball = Filter::new_ball(vec![0.5, 0.5], 0.1).unwrap();
        let b = filter_bbox(&ball, 2).unwrap();
        for d in 0..2 {
            assert!((b.lo[d] - 0.4).abs() < 1e-15 && (b.hi[d] - 0.6).abs() < 1e-15);
        }

        let and = Filter::and(vec![
            Filter::new_box(vec![0.0, 0.0], vec![0.4, 1.0]).unwrap(),
            Filter::new_box(vec![0.2, 0.0], vec![1.0, 1.0]).unwrap(),
        ]);
        let b = filter_bbox(&and, 2).unwrap();
        assert_eq!((b.lo, b.hi), (vec![0.2, 0.0], vec![0.4, 1.0]));

        let tri = Filter::new_polygon([0, 1], vec![[0.1, 0.1], [0.3, 0.1], [0.2, 0.25]], vec![]).unwrap();
        let b = filter_bbox(&tri, 2).unwrap();
        assert_eq!((b.lo, b.hi), (vec![0.1, 0.1], vec![0.3, 0.25]));

        let disjoint = Filter::and(vec![unit_box(0.0, 0.1), unit_box(0.5, 0.6)]);
        assert!(matches!(filter_bbox(&disjoint, 2), Err(Error::EmptyFilter)));

        let bare_not = Filter::not(unit_box(0.0, 0.1));
        assert_eq!(filter_bbox(&bare_not, 2).unwrap(), Aabb::unit(2));
        let or = Filter::or(vec![unit_box(0.1, 0.2), unit_box(0.5, 0.6)]);
        let b = filter_bbox(&or, 2).unwrap();
        assert_eq!((b.lo, b.hi), (vec![0.1, 0.1], vec![0.6, 0.6]));
        let or_not = Filter::or(vec![unit_box(0.1, 0.2), Filter::not(unit_box(0.5, 0.6))]);
        assert_eq!(filter_bbox(&or_not, 2).unwrap(), Aabb::unit(2));
    }

    #[test]
    fn characteristic_length_examples() {
        let ball = Filter::new_ball(vec![0.5, 0.5], 0.05).unwrap();
        let (r, alpha) = characteristic_length(&ball, 2).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
        assert!((alpha - 1.0).abs() < 1e-9);

        let rect = Filter::new_box(vec![0.2, 0.5], vec![0.3, 0.51]).unwrap();
        let (r, alpha) = characteristic_length(&rect, 2).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
        assert!((alpha - 10.0).abs() < 1e-6);

        let sq = Filter::new_box(vec![0.1, 0.1], vec![0.3, 0.3]).unwrap();
        let (r, alpha) = characteristic_length(&sq, 2).unwrap();
        assert!((r - 0.2).abs() < 1e-12);
        assert!((alpha - 1.0).abs() < 1e-12);

        let flat = Filter::new_box(vec![0.1, 0.5], vec![0.3, 0.5]).unwrap();
        assert_eq!(characteristic_length(&flat, 2).unwrap().1, f64::INFINITY);
    }

    #[test]
    fn intersecting_cube_examples() {
        let grid = GridConfig::new(6, 2).unwrap();
        let cubes = intersecting_cubes(&unit_box(0.1, 0.3), 2, &grid).unwrap();
        assert_eq!(cubes.len(), 9);
        assert!(cubes.iter().all(|c| c.coords.iter().all(|&x| x <= 2)));

        // diameter 0.2 ball at its selected layer
        let ball = Filter::new_ball(vec![0.43, 0.61], 0.1).unwrap();
        let (r, _) = characteristic_length(&ball, 2).unwrap();
        let l = grid.select_layer(r).unwrap();
        assert!(intersecting_cubes(&ball, l, &grid).unwrap().len() <= 9);

        // 0.1 x 0.01 rectangle; select_layer(0.1) gives w = 0.0625
        let rect = Filter::new_box(vec![0.33, 0.52], vec![0.43, 0.53]).unwrap();
        let l = grid.select_layer(0.1).unwrap();
        assert!(intersecting_cubes(&rect, l, &grid).unwrap().len() <= 6);

        let empty = Filter::and(vec![unit_box(0.0, 0.1), unit_box(0.5, 0.6)]);
        assert!(intersecting_cubes(&empty, 1, &grid).unwrap().is_empty());
    }

    #[test]
    fn elastic_factor_of_whole_space_is_one() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 17) as f64, (i % 23) as f64]).collect();
        let meta = MetaStore::normalize(&rows).unwrap();
        let grid = GridConfig::new(3, 2).unwrap();
        let all = unit_box(0.0, 1.0);
        for l in 0..3 {
            let cubes = intersecting_cubes(&all, l, &grid).unwrap();
            assert_eq!(elastic_factor(&all, &cubes, &meta, &grid).unwrap(), 1.0);
        }
        assert!(matches!(
            elastic_factor(&all, &[], &meta, &grid),
            Err(Error::UndefinedElasticFactor)
        ));
    }

    #[test]
    fn json_roundtrip_of_nested_filter() {
        let f = Filter::and(vec![
            unit_box(0.0, 0.5),
            Filter::not(Filter::new_ball(vec![0.25, 0.25], 0.1).unwrap()),
            Filter::or(vec![Filter::new_polygon([0, 1], vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![]).unwrap()]),
        ]);
        let s = f.to_json();
        assert!(s.contains(r#""type":"and""#));
        assert_eq!(Filter::from_json(&s).unwrap(), f);
    }

    #[test]
    fn unit_ball_volumes() {
        use std::f64::consts::PI;
        assert!((unit_ball_volume(2) - PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-12);
    }

    fn arb_leaf() -> impl Strategy<Value = Filter> {
        prop_oneof![
            (proptest::collection::vec(0f64..1.0, 2), proptest::collection::vec(0f64..0.5, 2)).prop_map(|(c, s)| {
                Filter::new_box(
                    c.iter().zip(&s).map(|(c, s)| c - s / 2.0).collect(),
                    c.iter().zip(&s).map(|(c, s)| c + s / 2.0).collect(),
                )
                .unwrap()
            }),
            (proptest::collection::vec(0f64..1.0, 2), 0.01f64..0.4).prop_map(|(c, r)| Filter::new_ball(c, r).unwrap()),
            (0f64..0.7, 0f64..0.7, 0.05f64..0.3).prop_map(|(x, y, s)| {
                Filter::new_polygon([0, 1], vec![[x, y], [x + s, y], [x + s / 2.0, y + s]], vec![]).unwrap()
            }),
        ]
    }

    fn arb_filter() -> impl Strategy<Value = Filter> {
        arb_leaf().prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 1..3).prop_map(Filter::and),
                proptest::collection::vec(inner.clone(), 1..3).prop_map(Filter::or),
                inner.prop_map(Filter::not),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn bbox_and_cubes_are_conservative(f in arb_filter(), pts in proptest::collection::vec(proptest::collection::vec(0f64..=1.0, 2), 50)) {
            let grid = GridConfig::new(6, 2).unwrap();
            let bbox = filter_bbox(&f, 2);
            for p in &pts {
                if f.evaluate(p) {
                    let b = bbox.as_ref().expect("a satisfied filter is non-empty");
                    prop_assert!(b.contains(p));
                    for l in 0..6 {
                        let range = CubeRange::of_box(b, l, &grid);
                        prop_assert!(range.contains(&grid.cube_id(p, l).unwrap().coords));
                    }
                }
            }
        }

        #[test]
        fn boolean_identities(f in arb_filter(), g in arb_filter(), p in proptest::collection::vec(0f64..=1.0, 2)) {
            prop_assert_eq!(Filter::not(Filter::not(f.clone())).evaluate(&p), f.evaluate(&p));
            let lhs = Filter::not(Filter::and(vec![f.clone(), g.clone()])).evaluate(&p);
            let rhs = Filter::or(vec![Filter::not(f.clone()), Filter::not(g.clone())]).evaluate(&p);
            prop_assert_eq!(lhs, rhs);
            let lhs = Filter::not(Filter::or(vec![f.clone(), g.clone()])).evaluate(&p);
            let rhs = Filter::and(vec![Filter::not(f), Filter::not(g)]).evaluate(&p);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn selected_layer_bounds_cube_count(c in proptest::collection::vec(0.05f64..0.95, 3), s in proptest::collection::vec(0.005f64..0.6, 3), m in 2usize..=3) {
            let grid = GridConfig::new(6, m).unwrap();
            let lo: Vec<f64> = (0..m).map(|i| (c[i] - s[i] / 2.0).max(0.0)).collect();
            let hi: Vec<f64> = (0..m).map(|i| (c[i] + s[i] / 2.0).min(1.0)).collect();
            let f = Filter::new_box(lo, hi).unwrap();
            let (r, _) = characteristic_length(&f, m).unwrap();
            let l = grid.select_layer(r).unwrap();
            prop_assert!(intersecting_cubes(&f, l, &grid).unwrap().len() <= 3usize.pow(m as u32));
        }
    }
}
