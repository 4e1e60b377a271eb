use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cubegraph::benchkit::{MetaDistribution, Shape};
use cubegraph::{IndexParams, Strategy};
use serde::Deserialize;

use crate::args::{BenchArgs, Cli, GenArgs, IndexArgs};

/// A bad flag or config value. Maps to exit status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Exit status for a failed command: 1 for validation, 2 for data problems.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match e.chain().find_map(|c| c.downcast_ref::<cubegraph::Error>()) {
        Some(ce) if !ce.is_data_error() => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub vectors: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub workload: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub k: usize,
    pub ef: Vec<usize>,
    pub strategy: String,
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 10,
            ef: vec![10, 16, 32, 64, 128, 256],
            strategy: "all".into(),
            threads: None,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n: usize,
    pub dim: usize,
    pub mdim: usize,
    pub distribution: String,
    pub clusters: usize,
    pub spread: f32,
    pub nq: usize,
    pub shape: String,
    pub ratio: f64,
    pub alpha: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            dim: 32,
            mdim: 2,
            distribution: "uniform".into(),
            clusters: 16,
            spread: 0.3,
            nq: 1000,
            shape: "box".into(),
            ratio: 0.05,
            alpha: 1.0,
        }
    }
}

/// Everything a run needs: config file values with flags applied on top.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub index: IndexParams,
    pub bench: BenchConfig,
    pub gen: GenConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| usage(format!("--config: {e}")))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Reads the config named by `--config` (if any) and applies the global flags.
    pub fn resolve(cli: &Cli) -> anyhow::Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        let p = &cli.paths;
        let over = |slot: &mut Option<PathBuf>, flag: &Option<PathBuf>| {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        };
        over(&mut cfg.paths.vectors, &p.vectors);
        over(&mut cfg.paths.metadata, &p.metadata);
        over(&mut cfg.paths.index, &p.index);
        over(&mut cfg.paths.queries, &p.queries);
        over(&mut cfg.paths.workload, &p.workload);
        over(&mut cfg.paths.truth, &p.truth);
        over(&mut cfg.paths.output, &p.output);
        if let Some(s) = cli.seed {
            cfg.bench.seed = s;
        }
        if cli.threads.is_some() {
            cfg.bench.threads = cli.threads;
        }
        if cfg.bench.threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn apply_index(&mut self, a: &IndexArgs) -> anyhow::Result<()> {
        let p = &mut self.index;
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = a.$f { p.$f = v; })*};
        }
        set!(layers, max_degree, ef_construction, cross_degree, ef_cross, min_cube_points, deleted_ratio_threshold);
        // validation messages start with the field name; report it as the flag
        p.validate().map_err(|e| {
            let msg = match e {
                cubegraph::Error::InvalidArgument(m) => m,
                other => other.to_string(),
            };
            let (field, rest) = msg.split_once(' ').unwrap_or((&msg, ""));
            usage(format!("--{} {rest}", field.replace('_', "-")))
        })
    }

    pub fn apply_bench(&mut self, a: &BenchArgs) -> anyhow::Result<()> {
        if let Some(k) = a.k {
            self.bench.k = k;
        }
        if let Some(ef) = &a.ef {
            self.bench.ef.clone_from(ef);
        }
        if let Some(s) = &a.strategy {
            self.bench.strategy.clone_from(s);
        }
        if self.bench.k == 0 {
            return Err(usage("--k must be at least 1"));
        }
        if self.bench.ef.is_empty() {
            return Err(usage("--ef needs at least one value"));
        }
        if let Some(ef) = self.bench.ef.iter().find(|&&ef| ef < self.bench.k) {
            return Err(usage(format!("--ef value {ef} is below --k {}", self.bench.k)));
        }
        self.strategies()?;
        Ok(())
    }

    /// Strategies named by `bench.strategy`; `all` expands to the four concrete ones.
    pub fn strategies(&self) -> anyhow::Result<Vec<Strategy>> {
        if self.bench.strategy.eq_ignore_ascii_case("all") {
            return Ok(Strategy::CONCRETE.to_vec());
        }
        self.bench
            .strategy
            .parse::<Strategy>()
            .map(|s| vec![s])
            .map_err(|_| usage(format!("--strategy: unknown strategy '{}'", self.bench.strategy)))
    }

    pub fn apply_gen(&mut self, a: &GenArgs) -> anyhow::Result<()> {
        let g = &mut self.gen;
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &a.$f { g.$f = v.clone(); })*};
        }
        set!(n, dim, mdim, distribution, clusters, spread, nq, shape, ratio, alpha);
        if g.n == 0 {
            return Err(usage("--n must be at least 1"));
        }
        if g.dim == 0 {
            return Err(usage("--dim must be at least 1"));
        }
        if !(2..=4).contains(&g.mdim) {
            return Err(usage("--mdim must be 2, 3 or 4"));
        }
        if g.clusters == 0 {
            return Err(usage("--clusters must be at least 1"));
        }
        if !(g.spread > 0.0 && g.spread.is_finite()) {
            return Err(usage("--spread must be positive"));
        }
        if !(g.ratio > 0.0 && g.ratio < 1.0) {
            return Err(usage("--ratio must be in (0, 1)"));
        }
        if !(g.alpha >= 1.0 && g.alpha.is_finite()) {
            return Err(usage("--alpha must be at least 1"));
        }
        self.distribution()?;
        self.shape()?;
        Ok(())
    }

    pub fn distribution(&self) -> anyhow::Result<MetaDistribution> {
        self.gen
            .distribution
            .parse()
            .map_err(|_| usage(format!("--distribution: unknown distribution '{}'", self.gen.distribution)))
    }

    pub fn shape(&self) -> anyhow::Result<Shape> {
        self.gen
            .shape
            .parse()
            .map_err(|_| usage(format!("--shape: unknown shape '{}'", self.gen.shape)))
    }
}

/// Returns the configured path or a validation error naming its flag.
pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| usage(format!("{flag} is required (or set it under [paths] in the config)")))
}
