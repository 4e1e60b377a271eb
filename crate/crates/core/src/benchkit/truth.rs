//! Exact filtered nearest neighbors by exhaustive scan.

use std::collections::BinaryHeap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::metagrid::MetaStore;
use crate::proxgraph::Candidate;
use crate::vecspace::{read_fvecs_rows, read_ivecs, write_fvecs_rows, write_ivecs, DistanceMetric, VectorStore};
use crate::PointId;

/// Per-query exact top-k `(id, distance)` lists, ordered by `(distance, id)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub k: usize,
    pub neighbors: Vec<Vec<(PointId, f64)>>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn ids(&self, query: usize) -> Vec<PointId> {
        self.neighbors[query].iter().map(|h| h.0).collect()
    }

    /// Writes ids as ivecs and distances as fvecs. Short rows are padded with
    /// id `-1` and distance `+inf` so every record has `k` entries.
    pub fn save(&self, ids_path: impl AsRef<Path>, dist_path: impl AsRef<Path>) -> Result<()> {
        let k = self.k;
        let ids: Vec<Vec<i32>> = self
            .neighbors
            .iter()
            .map(|row| {
                let mut r: Vec<i32> = row.iter().map(|h| h.0 as i32).collect();
                r.resize(k, -1);
                r
            })
            .collect();
        let dists: Vec<Vec<f32>> = self
            .neighbors
            .iter()
            .map(|row| {
                let mut r: Vec<f32> = row.iter().map(|h| h.1 as f32).collect();
                r.resize(k, f32::INFINITY);
                r
            })
            .collect();
        write_ivecs(ids_path, &ids)?;
        write_fvecs_rows(dist_path, &dists)
    }

    pub fn load(ids_path: impl AsRef<Path>, dist_path: impl AsRef<Path>) -> Result<Self> {
        let ids = read_ivecs(ids_path)?;
        let dists = read_fvecs_rows(dist_path)?;
        if ids.len() != dists.len() {
            return Err(Error::InvalidData("id and distance files disagree in length".into()));
        }
        let k = ids.first().map_or(0, Vec::len);
        let mut neighbors = Vec::with_capacity(ids.len());
        for (i, d) in ids.iter().zip(&dists) {
            if i.len() != k || d.len() != k {
                return Err(Error::InvalidData("ground truth rows have mixed lengths".into()));
            }
            neighbors.push(
                i.iter()
                    .zip(d)
                    .take_while(|(id, _)| **id >= 0)
                    .map(|(&id, &dist)| (id as PointId, dist as f64))
                    .collect(),
            );
        }
        Ok(Self { k, neighbors })
    }
}

/// Exact filtered top-k for each `(query, filter)` pair over the points
/// accepted by `live` (all points when `None`).
pub fn ground_truth(
    vectors: &VectorStore,
    meta: &MetaStore,
    live: Option<&[bool]>,
    queries: &[&[f32]],
    filters: &[Filter],
    k: usize,
    metric: DistanceMetric,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if queries.len() != filters.len() {
        return Err(Error::invalid(format!(
            "{} queries but {} filters",
            queries.len(),
            filters.len()
        )));
    }
    if vectors.len() != meta.len() || live.is_some_and(|l| l.len() != vectors.len()) {
        return Err(Error::invalid("vector, metadata and liveness lengths differ"));
    }
    if queries.iter().any(|q| q.len() != vectors.dim()) {
        return Err(Error::invalid("query dimension mismatch"));
    }
    let neighbors = queries
        .par_iter()
        .zip(filters.par_iter())
        .map(|(q, f)| {
            let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
            for id in 0..vectors.len() {
                if live.is_some_and(|l| !l[id]) || !f.evaluate(meta.point(id as PointId)) {
                    continue;
                }
                let c = Candidate {
                    dist: metric.eval(q, vectors.row(id as PointId)),
                    key: id as PointId,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().expect("non-empty heap") {
                    heap.pop();
                    heap.push(c);
                }
            }
            heap.into_sorted_vec().into_iter().map(|c| (c.key, c.dist)).collect()
        })
        .collect();
    Ok(GroundTruth { k, neighbors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(n: usize) -> (VectorStore, MetaStore) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f32> = (0..n * 6).map(|_| rng.random()).collect();
        let m: Vec<f64> = (0..n * 2).map(|_| rng.random()).collect();
        (VectorStore::from_flat(6, v).unwrap(), MetaStore::from_flat(2, m).unwrap())
    }

    /// Second, independently written scan: full sort of qualifying points.
    fn naive(v: &VectorStore, m: &MetaStore, q: &[f32], f: &Filter, k: usize) -> Vec<(PointId, f64)> {
        let mut all = Vec::new();
        for i in 0..v.len() as PointId {
            if f.evaluate(m.point(i)) {
                let d: f64 = q
                    .iter()
                    .zip(v.row(i))
                    .map(|(a, b)| {
                        let x = *a as f64 - *b as f64;
                        x * x
                    })
                    .sum();
                all.push((i, d));
            }
        }
        all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_independent_scan() {
        let (v, m) = fixture(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let qs: Vec<Vec<f32>> = (0..50).map(|_| (0..6).map(|_| rng.random()).collect()).collect();
        let fs: Vec<Filter> = (0..50)
            .map(|i| {
                let c = i as f64 / 50.0;
                Filter::new_ball(vec![c, 1.0 - c], 0.3).unwrap()
            })
            .collect();
        let qr: Vec<&[f32]> = qs.iter().map(|q| q.as_slice()).collect();
        let gt = ground_truth(&v, &m, None, &qr, &fs, 10, DistanceMetric::SquaredEuclidean).unwrap();
        for (i, q) in qs.iter().enumerate() {
            let want = naive(&v, &m, q, &fs[i], 10);
            assert_eq!(gt.ids(i), want.iter().map(|h| h.0).collect::<Vec<_>>());
            for (a, b) in gt.neighbors[i].iter().zip(&want) {
                assert!((a.1 - b.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_and_short_truth() {
        let (v, m) = fixture(100);
        let q = vec![0.5f32; 6];
        let never = Filter::new_box(vec![2.0, 2.0], vec![3.0, 3.0]).unwrap();
        let gt = ground_truth(&v, &m, None, &[&q], &[never], 5, DistanceMetric::SquaredEuclidean).unwrap();
        assert!(gt.neighbors[0].is_empty());

        let all = Filter::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let gt = ground_truth(&v, &m, None, &[&q], &[all], 500, DistanceMetric::SquaredEuclidean).unwrap();
        assert_eq!(gt.neighbors[0].len(), 100);
    }

    #[test]
    fn live_mask_and_order_invariance() {
        let (v, m) = fixture(300);
        let q = vec![0.3f32; 6];
        let f = Filter::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let full = ground_truth(&v, &m, None, &[&q], std::slice::from_ref(&f), 5, DistanceMetric::SquaredEuclidean).unwrap();
        let mut live = vec![true; 300];
        live[full.neighbors[0][0].0 as usize] = false;
        let masked = ground_truth(&v, &m, Some(&live), &[&q], std::slice::from_ref(&f), 5, DistanceMetric::SquaredEuclidean).unwrap();
        assert_eq!(masked.neighbors[0][..4], full.neighbors[0][1..]);

        // reversing point order and mapping ids back gives the same answer
        let rows: Vec<Vec<f32>> = (0..300).rev().map(|i| v.row(i).to_vec()).collect();
        let meta_rows: Vec<Vec<f64>> = (0..300).rev().map(|i| m.raw(i).to_vec()).collect();
        let rv = VectorStore::from_rows(&rows).unwrap();
        let rm = MetaStore::with_bbox(2, meta_rows.concat(), m.bbox().clone()).unwrap();
        let rev = ground_truth(&rv, &rm, None, &[&q], &[f], 5, DistanceMetric::SquaredEuclidean).unwrap();
        let mapped: Vec<PointId> = rev.ids(0).iter().map(|i| 299 - i).collect();
        assert_eq!(mapped, full.ids(0));
    }

    #[test]
    fn file_roundtrip_with_padding() {
        let dir = tempfile::tempdir().unwrap();
        let gt = GroundTruth {
            k: 3,
            neighbors: vec![vec![(4, 0.5), (2, 1.0), (9, 2.0)], vec![(1, 0.25)], vec![]],
        };
        let (a, b) = (dir.path().join("gt.ivecs"), dir.path().join("gt.fvecs"));
        gt.save(&a, &b).unwrap();
        assert_eq!(GroundTruth::load(&a, &b).unwrap(), gt);
        let raw = read_ivecs(&a).unwrap();
        assert_eq!(raw[1], vec![1, -1, -1]);
    }

    #[test]
    fn rejects_misaligned_input() {
        let (v, m) = fixture(10);
        let q = vec![0.0f32; 6];
        assert!(ground_truth(&v, &m, None, &[&q], &[], 1, DistanceMetric::SquaredEuclidean).is_err());
        let f = Filter::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(ground_truth(&v, &m, None, &[&q], &[f], 0, DistanceMetric::SquaredEuclidean).is_err());
    }
}
