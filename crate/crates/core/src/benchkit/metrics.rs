//! Recall, throughput and counter aggregates.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::truth::GroundTruth;
use super::workload::Workload;
use crate::cubeindex::CubeGraphIndex;
use crate::error::{Error, Result};
use crate::hybridsearch::{SearchRequest, SearchResult, Strategy};
use crate::PointId;

/// Fraction of the true neighbors found, over `min(k, |truth|)`. Queries with
/// no qualifying point score 1.
pub fn recall(found: &[PointId], truth: &[PointId], k: usize) -> f64 {
    let denom = k.min(truth.len());
    if denom == 0 {
        return 1.0;
    }
    overlap(found, &truth[..denom], k) as f64 / denom as f64
}

/// Fraction of the true neighbors found, over `k`.
pub fn recall_unclamped(found: &[PointId], truth: &[PointId], k: usize) -> f64 {
    overlap(found, &truth[..k.min(truth.len())], k) as f64 / k as f64
}

fn overlap(found: &[PointId], truth: &[PointId], k: usize) -> usize {
    found.iter().take(k).filter(|id| truth.contains(id)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub queries: usize,
    pub k: usize,
    pub recall: f64,
    pub recall_unclamped: f64,
    pub qps: f64,
    pub distcomps_mean: f64,
    pub distcomps_p50: f64,
    pub distcomps_p95: f64,
    pub distcomps_p99: f64,
    pub cubes_mean: f64,
    pub nodes_expanded_mean: f64,
    pub per_query_recall: Vec<f64>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

/// Aggregates one run of `results` against `truth` at cut-off `k`.
pub fn evaluate_run(results: &[SearchResult], truth: &GroundTruth, k: usize, elapsed: Duration) -> Result<RunMetrics> {
    if results.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} results but {} ground-truth rows",
            results.len(),
            truth.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let n = results.len();
    let mut per_query = Vec::with_capacity(n);
    let mut unclamped = 0.0;
    for (r, t) in results.iter().zip(&truth.neighbors) {
        let found = r.ids();
        let t: Vec<PointId> = t.iter().map(|h| h.0).collect();
        per_query.push(recall(&found, &t, k));
        unclamped += recall_unclamped(&found, &t, k);
    }
    let mut dc: Vec<f64> = results.iter().map(|r| r.counters.distance_computations as f64).collect();
    dc.sort_by(f64::total_cmp);
    let mean = |xs: &mut dyn Iterator<Item = f64>| if n == 0 { 0.0 } else { xs.sum::<f64>() / n as f64 };
    let secs = elapsed.as_secs_f64();
    Ok(RunMetrics {
        queries: n,
        k,
        recall: mean(&mut per_query.iter().copied()),
        recall_unclamped: if n == 0 { 0.0 } else { unclamped / n as f64 },
        qps: if secs > 0.0 { n as f64 / secs } else { f64::INFINITY },
        distcomps_mean: mean(&mut dc.iter().copied()),
        distcomps_p50: percentile(&dc, 0.50),
        distcomps_p95: percentile(&dc, 0.95),
        distcomps_p99: percentile(&dc, 0.99),
        cubes_mean: mean(&mut results.iter().map(|r| r.counters.cubes_activated as f64)),
        nodes_expanded_mean: mean(&mut results.iter().map(|r| r.counters.nodes_expanded as f64)),
        per_query_recall: per_query,
    })
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: Strategy,
    pub shape: String,
    pub ratio: f64,
    pub alpha: f64,
    pub ef: usize,
    pub k: usize,
    pub recall: f64,
    pub recall_unclamped: f64,
    pub qps: f64,
    pub distcomps_mean: f64,
    pub cubes_mean: f64,
}

pub const CSV_HEADER: &str = "strategy,shape,ratio,alpha,ef,k,recall,recall_unclamped,qps,distcomps_mean,cubes_mean";

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every query single-threaded at each `ef`, returning one row per `ef`
/// together with the full metrics.
pub fn run_sweep(
    index: &CubeGraphIndex,
    queries: &[&[f32]],
    workload: &Workload,
    truth: &GroundTruth,
    k: usize,
    efs: &[usize],
    strategy: Strategy,
) -> Result<Vec<(MetricsRow, RunMetrics)>> {
    if queries.len() != workload.len() {
        return Err(Error::invalid("queries and workload differ in length"));
    }
    let mut out = Vec::with_capacity(efs.len());
    for &ef in efs {
        let start = Instant::now();
        let results = queries
            .iter()
            .zip(&workload.filters)
            .map(|(q, f)| {
                index.search(&SearchRequest {
                    query: q,
                    filter: f,
                    k,
                    ef,
                    strategy,
                    layer_override: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let elapsed = start.elapsed();
        let used = results.first().map_or(strategy, |r| r.counters.strategy);
        let m = evaluate_run(&results, truth, k, elapsed)?;
        out.push((
            MetricsRow {
                strategy: used,
                shape: workload.meta.shape.to_string(),
                ratio: workload.meta.ratio,
                alpha: workload.meta.alpha,
                ef,
                k,
                recall: m.recall,
                recall_unclamped: m.recall_unclamped,
                qps: m.qps,
                distcomps_mean: m.distcomps_mean,
                cubes_mean: m.cubes_mean,
            },
            m,
        ));
    }
    Ok(out)
}

/// First sweep point whose mean recall reaches `target`.
pub fn first_at_recall<T>(sweep: &[(MetricsRow, T)], target: f64) -> Option<&(MetricsRow, T)> {
    sweep.iter().find(|(r, _)| r.recall >= target)
}
