use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cubegraph", version, about = "Build, query and benchmark CubeGraph filtered ANN indexes")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for build and ground truth.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(flatten)]
    pub paths: PathArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct PathArgs {
    /// Base vectors (.fvecs or raw f32).
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,

    /// Base metadata (.csv or raw f32 with JSON sidecar).
    #[arg(long, global = true)]
    pub metadata: Option<PathBuf>,

    /// Index file.
    #[arg(long, global = true)]
    pub index: Option<PathBuf>,

    /// Query vectors.
    #[arg(long, global = true)]
    pub queries: Option<PathBuf>,

    /// Workload JSON (one filter per query).
    #[arg(long, global = true)]
    pub workload: Option<PathBuf>,

    /// Ground-truth prefix; files are `<prefix>.ivecs` and `<prefix>.fvecs`.
    #[arg(long, global = true)]
    pub truth: Option<PathBuf>,

    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index over base vectors and metadata.
    Build(BuildArgs),
    /// Compute exact filtered ground truth for a workload.
    Gt(GtArgs),
    /// Answer one request and print the JSON response.
    Search(SearchArgs),
    /// Sweep ef for one or all strategies and write metrics CSV.
    Bench(BenchArgs),
    /// Append points to the data files and the index.
    Insert(InsertArgs),
    /// Tombstone points in the index.
    Delete(DeleteArgs),
    /// Rebuild shards holding tombstones.
    Compact,
    /// Print a structural report as JSON.
    Stats,
    /// Generate synthetic vectors, metadata, queries and a workload.
    Gen(GenArgs),
}

#[derive(Debug, Default, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub ef_construction: Option<usize>,
    #[arg(long)]
    pub cross_degree: Option<usize>,
    #[arg(long)]
    pub ef_cross: Option<usize>,
    #[arg(long)]
    pub min_cube_points: Option<usize>,
    #[arg(long)]
    pub deleted_ratio_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub index: IndexArgs,

    /// Skip the monolithic graph used by the prefilter and postfilter strategies.
    #[arg(long)]
    pub no_baseline: bool,
}

#[derive(Debug, Args)]
pub struct GtArgs {
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Request JSON file, `-` for standard input.
    #[arg(long)]
    pub request: Option<PathBuf>,

    /// Filter JSON, used when no request file is given.
    #[arg(long)]
    pub filter: Option<String>,

    /// Row of the query file (or of the base vectors) to search with.
    #[arg(long)]
    pub query_id: Option<u32>,

    #[arg(long)]
    pub k: Option<usize>,

    #[arg(long)]
    pub ef: Option<usize>,

    #[arg(long)]
    pub strategy: Option<String>,

    /// Force a grid layer instead of the selected one.
    #[arg(long)]
    pub layer: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub k: Option<usize>,

    /// Comma-separated ef values.
    #[arg(long, value_delimiter = ',')]
    pub ef: Option<Vec<usize>>,

    /// A strategy name or `all`.
    #[arg(long)]
    pub strategy: Option<String>,
}

#[derive(Debug, Args)]
pub struct InsertArgs {
    /// Vectors to append.
    #[arg(long)]
    pub new_vectors: PathBuf,

    /// Metadata rows to append, one per new vector.
    #[arg(long)]
    pub new_metadata: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeleteArgs {
    /// Comma-separated point ids.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<u32>,

    /// File with one point id per line.
    #[arg(long)]
    pub ids_file: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct GenArgs {
    /// Number of base points.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub mdim: Option<usize>,
    /// Metadata distribution: uniform, normal, clustered, skewed or hollow.
    #[arg(long)]
    pub distribution: Option<String>,
    /// Gaussian mixture components for the vectors.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub spread: Option<f32>,
    /// Number of queries and workload filters.
    #[arg(long)]
    pub nq: Option<usize>,
    /// Filter shape: box, circle, polygon or compose.
    #[arg(long)]
    pub shape: Option<String>,
    /// Target normalized filter volume.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Box aspect ratio.
    #[arg(long)]
    pub alpha: Option<f64>,
}
