use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cubegraph::benchkit::{
    gen_metadata, gen_workload, ground_truth, run_sweep, write_metrics_csv, GaussianMixture, GroundTruth, QuerySet,
    Workload,
};
use cubegraph::metagrid::{read_metadata, write_metadata};
use cubegraph::vecspace::{load_vectors, save_vectors, VectorFormat};
use cubegraph::{CubeGraphIndex, Filter, MetaStore, SearchRequest, Strategy, VectorStore};
use serde::Deserialize;
use serde_json::json;

use crate::args::{BuildArgs, Cli, Command, DeleteArgs, GtArgs, InsertArgs, SearchArgs};
use crate::config::{require, usage, RunConfig};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(&cli)?;
    if let Some(t) = cfg.bench.threads {
        // fails only if a pool already exists, which a fresh process never has
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Build(a) => build(&mut cfg, a),
        Command::Gt(a) => gt(&mut cfg, a),
        Command::Search(a) => search(&cfg, a),
        Command::Bench(a) => {
            cfg.apply_bench(a)?;
            bench(&cfg)
        }
        Command::Insert(a) => insert(&cfg, a),
        Command::Delete(a) => delete(&cfg, a),
        Command::Compact => compact(&cfg),
        Command::Stats => stats(&cfg),
        Command::Gen(a) => {
            cfg.apply_gen(a)?;
            gen(&cfg)
        }
    }
}

fn read_vectors(path: &Path) -> Result<VectorStore> {
    load_vectors(path, VectorFormat::from_path(path)).with_context(|| format!("reading {}", path.display()))
}

fn read_meta(path: &Path) -> Result<MetaStore> {
    let (mdim, flat) = read_metadata(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MetaStore::from_flat(mdim, flat)?)
}

fn open_index(cfg: &RunConfig) -> Result<CubeGraphIndex> {
    let index = require(&cfg.paths.index, "--index")?;
    let vectors = read_vectors(require(&cfg.paths.vectors, "--vectors")?)?;
    let meta = read_meta(require(&cfg.paths.metadata, "--metadata")?)?;
    CubeGraphIndex::load(index, vectors, meta).with_context(|| format!("loading {}", index.display()))
}

/// Writes next to the target and renames, so a failed write leaves the old index intact.
fn save_index(idx: &CubeGraphIndex, path: &Path) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    idx.save(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> Result<()> {
    match &cfg.paths.output {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn emit_json(cfg: &RunConfig, value: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(cfg, s.as_bytes())
}

fn truth_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".ivecs"), with(".fvecs"))
}

/// Query vectors for a workload, resolving row ids against the query file.
fn workload_queries(cfg: &RunConfig, w: &Workload, dim: usize) -> Result<Vec<Vec<f32>>> {
    let rows = match &w.queries {
        QuerySet::Inline(rows) => rows.clone(),
        QuerySet::Ids(ids) => {
            let qs = read_vectors(require(&cfg.paths.queries, "--queries")?)?;
            ids.iter()
                .map(|&id| {
                    qs.get(id).map(<[f32]>::to_vec).ok_or_else(|| {
                        cubegraph::Error::InvalidData(format!("query id {id} is beyond the {} query rows", qs.len())).into()
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    if rows.iter().any(|q| q.len() != dim) {
        return Err(cubegraph::Error::InvalidData(format!("query dimension differs from the base dimension {dim}")).into());
    }
    Ok(rows)
}

fn load_workload(cfg: &RunConfig) -> Result<Workload> {
    let p = require(&cfg.paths.workload, "--workload")?;
    Workload::load(p).with_context(|| format!("reading {}", p.display()))
}

fn build(cfg: &mut RunConfig, a: &BuildArgs) -> Result<()> {
    cfg.apply_index(&a.index)?;
    let out = require(&cfg.paths.index, "--index")?.to_path_buf();
    let vectors = read_vectors(require(&cfg.paths.vectors, "--vectors")?)?;
    let meta = read_meta(require(&cfg.paths.metadata, "--metadata")?)?;
    let start = std::time::Instant::now();
    let mut idx = CubeGraphIndex::build(vectors, meta, cfg.index)?;
    if !a.no_baseline {
        idx.build_baseline()?;
    }
    save_index(&idx, &out)?;
    let s = idx.stats();
    eprintln!(
        "built {} points, {} of {} layers, {} shards at the deepest layer in {:.1}s",
        s.points,
        s.built_layers,
        s.configured_layers,
        s.layers.last().map_or(0, |l| l.shard_count),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn gt(cfg: &mut RunConfig, a: &GtArgs) -> Result<()> {
    let k = a.k.unwrap_or(cfg.bench.k);
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let prefix = require(&cfg.paths.truth, "--truth")?.to_path_buf();
    let w = load_workload(cfg)?;
    let (vectors, meta, live) = match &cfg.paths.index {
        Some(_) => {
            let idx = open_index(cfg)?;
            let live: Vec<bool> = (0..idx.len() as u32).map(|i| idx.is_live(i)).collect();
            (idx.vectors().clone(), idx.meta().clone(), Some(live))
        }
        None => (
            read_vectors(require(&cfg.paths.vectors, "--vectors")?)?,
            read_meta(require(&cfg.paths.metadata, "--metadata")?)?,
            None,
        ),
    };
    let qs = workload_queries(cfg, &w, vectors.dim())?;
    let qr: Vec<&[f32]> = qs.iter().map(Vec::as_slice).collect();
    let metric = cfg.index.metric;
    let truth = ground_truth(&vectors, &meta, live.as_deref(), &qr, &w.filters, k, metric)?;
    let (ids, dists) = truth_paths(&prefix);
    truth.save(&ids, &dists)?;
    eprintln!("wrote ground truth for {} queries to {}", truth.len(), ids.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Request {
    #[serde(default)]
    query: Option<Vec<f32>>,
    #[serde(default)]
    query_id: Option<u32>,
    filter: Filter,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    ef: Option<usize>,
    #[serde(default)]
    strategy: Option<Strategy>,
    #[serde(default)]
    layer: Option<usize>,
}

fn read_request(a: &SearchArgs) -> Result<Request> {
    if let Some(p) = &a.request {
        let text = if p.as_os_str() == "-" {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        } else {
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        };
        return serde_json::from_str(&text).context("parsing request");
    }
    let filter = a
        .filter
        .as_deref()
        .ok_or_else(|| usage("--request or --filter is required"))?;
    Ok(Request {
        query: None,
        query_id: None,
        filter: Filter::from_json(filter).map_err(|e| usage(format!("--filter: {e}")))?,
        k: None,
        ef: None,
        strategy: None,
        layer: None,
    })
}

fn search(cfg: &RunConfig, a: &SearchArgs) -> Result<()> {
    let req = read_request(a)?;
    let k = a.k.or(req.k).unwrap_or(cfg.bench.k);
    let ef = a.ef.or(req.ef).unwrap_or(k);
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    if k > ef {
        return Err(usage(format!("--ef ({ef}) must be at least --k ({k})")));
    }
    let strategy = match &a.strategy {
        Some(s) => s
            .parse::<Strategy>()
            .map_err(|_| usage(format!("--strategy: unknown strategy '{s}'")))?,
        None => req.strategy.unwrap_or_default(),
    };
    let idx = open_index(cfg)?;
    let query = match (req.query, a.query_id.or(req.query_id)) {
        (Some(_), Some(_)) => return Err(usage("give either a query vector or --query-id, not both")),
        (Some(q), None) => q,
        (None, Some(id)) => {
            let source = match &cfg.paths.queries {
                Some(p) => read_vectors(p)?,
                None => idx.vectors().clone(),
            };
            source
                .get(id)
                .map(<[f32]>::to_vec)
                .ok_or_else(|| usage(format!("--query-id {id} is out of range ({} rows)", source.len())))?
        }
        (None, None) => return Err(usage("the request needs a query vector or --query-id")),
    };
    if query.len() != idx.vectors().dim() {
        return Err(usage(format!(
            "query has {} dimensions, the index has {}",
            query.len(),
            idx.vectors().dim()
        )));
    }
    let mut r = SearchRequest::new(&query, &req.filter, k).ef(ef).strategy(strategy);
    if let Some(l) = a.layer.or(req.layer) {
        r = r.layer(l);
    }
    let result = idx.search(&r)?;
    emit_json(cfg, &result)
}

fn bench(cfg: &RunConfig) -> Result<()> {
    let idx = open_index(cfg)?;
    let w = load_workload(cfg)?;
    let k = cfg.bench.k;
    let qs = workload_queries(cfg, &w, idx.vectors().dim())?;
    let qr: Vec<&[f32]> = qs.iter().map(Vec::as_slice).collect();
    let truth = match &cfg.paths.truth {
        Some(prefix) => {
            let (ids, dists) = truth_paths(prefix);
            let t = GroundTruth::load(&ids, &dists).with_context(|| format!("reading {}", ids.display()))?;
            if t.len() != w.len() {
                return Err(cubegraph::Error::InvalidData(format!(
                    "ground truth has {} rows, workload has {} queries",
                    t.len(),
                    w.len()
                ))
                .into());
            }
            if t.k < k {
                return Err(usage(format!("--k {k} exceeds the ground-truth depth {}", t.k)));
            }
            t
        }
        None => {
            let live: Vec<bool> = (0..idx.len() as u32).map(|i| idx.is_live(i)).collect();
            ground_truth(idx.vectors(), idx.meta(), Some(&live), &qr, &w.filters, k, idx.params().metric)?
        }
    };
    let mut rows = Vec::new();
    for s in cfg.strategies()? {
        for (row, _) in run_sweep(&idx, &qr, &w, &truth, k, &cfg.bench.ef, s)? {
            eprintln!(
                "{:<13} ef {:>5}  recall {:.4}  distcomps {:>9.1}  qps {:>9.1}",
                row.strategy.name(),
                row.ef,
                row.recall,
                row.distcomps_mean,
                row.qps
            );
            rows.push(row);
        }
    }
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows)?;
    emit(cfg, &buf)
}

fn insert(cfg: &RunConfig, a: &InsertArgs) -> Result<()> {
    let vpath = require(&cfg.paths.vectors, "--vectors")?;
    let mpath = require(&cfg.paths.metadata, "--metadata")?;
    let ipath = require(&cfg.paths.index, "--index")?;
    let mut idx = open_index(cfg)?;
    let nv = read_vectors(&a.new_vectors)?;
    let (mdim, nm) = read_metadata(&a.new_metadata).with_context(|| format!("reading {}", a.new_metadata.display()))?;
    if nv.dim() != idx.vectors().dim() {
        return Err(usage(format!(
            "--new-vectors has dimension {}, the index has {}",
            nv.dim(),
            idx.vectors().dim()
        )));
    }
    if mdim != idx.meta().mdim() || nm.len() != nv.len() * mdim {
        return Err(usage(format!(
            "--new-metadata must hold {} rows of {} values",
            nv.len(),
            idx.meta().mdim()
        )));
    }
    let first = idx.len();
    for (i, row) in nv.rows().enumerate() {
        idx.insert_next(row, &nm[i * mdim..(i + 1) * mdim])?;
    }
    save_vectors(idx.vectors(), vpath, VectorFormat::from_path(vpath))?;
    write_metadata(mpath, mdim, idx.meta().raw_flat())?;
    save_index(&idx, ipath)?;
    emit_json(cfg, &json!({ "first_id": first, "inserted": nv.len(), "points": idx.len() }))
}

fn delete(cfg: &RunConfig, a: &DeleteArgs) -> Result<()> {
    let ipath = require(&cfg.paths.index, "--index")?;
    let mut ids = a.ids.clone();
    if let Some(p) = &a.ids_file {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            ids.push(line.parse().map_err(|_| {
                cubegraph::Error::InvalidData(format!("{}:{}: '{line}' is not a point id", p.display(), n + 1))
            })?);
        }
    }
    if ids.is_empty() {
        return Err(usage("--ids or --ids-file must name at least one point"));
    }
    let mut idx = open_index(cfg)?;
    let mut compacted = false;
    for &id in &ids {
        compacted |= idx.delete(id)?;
    }
    save_index(&idx, ipath)?;
    emit_json(
        cfg,
        &json!({ "deleted": ids.len(), "compacted": compacted, "live": idx.live_count(), "tombstoned": idx.tombstone_count() }),
    )
}

fn compact(cfg: &RunConfig) -> Result<()> {
    let ipath = require(&cfg.paths.index, "--index")?;
    let mut idx = open_index(cfg)?;
    let tombstoned = idx.tombstone_count();
    idx.compact()?;
    save_index(&idx, ipath)?;
    emit_json(cfg, &json!({ "removed": tombstoned, "live": idx.live_count() }))
}

fn stats(cfg: &RunConfig) -> Result<()> {
    let idx = open_index(cfg)?;
    emit_json(cfg, &idx.stats())
}

fn gen(cfg: &RunConfig) -> Result<()> {
    let g = &cfg.gen;
    let seed = cfg.bench.seed;
    let vpath = require(&cfg.paths.vectors, "--vectors")?;
    let mpath = require(&cfg.paths.metadata, "--metadata")?;
    let mix = GaussianMixture::new(g.dim, g.clusters, g.spread, seed)?;
    let base = mix.sample(g.n, seed.wrapping_add(1));
    save_vectors(&base, vpath, VectorFormat::from_path(vpath))?;
    let meta = gen_metadata(g.n, g.mdim, cfg.distribution()?, seed.wrapping_add(2))?;
    write_metadata(mpath, g.mdim, &meta)?;
    if let Some(q) = &cfg.paths.queries {
        if g.nq == 0 {
            return Err(usage("--nq must be at least 1"));
        }
        let qs = mix.sample(g.nq, seed.wrapping_add(3));
        save_vectors(&qs, q, VectorFormat::from_path(q))?;
    }
    if let Some(wp) = &cfg.paths.workload {
        if cfg.paths.queries.is_none() {
            return Err(usage("--workload needs --queries for its query rows"));
        }
        let store = MetaStore::from_flat(g.mdim, meta)?;
        let w = gen_workload(g.nq, cfg.shape()?, g.ratio, g.mdim, g.alpha, seed.wrapping_add(4), Some(&store))?;
        w.save(wp)?;
    }
    eprintln!("generated {} points of dimension {} with {}-d metadata", g.n, g.dim, g.mdim);
    Ok(())
}
