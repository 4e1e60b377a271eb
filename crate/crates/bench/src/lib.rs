//! Shared fixtures for the criterion benches.

use cubegraph::benchkit::{gen_metadata, gen_workload, GaussianMixture, MetaDistribution, Shape, Workload};
use cubegraph::{CubeGraphIndex, IndexParams, MetaStore, VectorStore};

pub const SEED: u64 = 7;

pub struct Fixture {
    pub index: CubeGraphIndex,
    pub queries: VectorStore,
}

pub fn vectors(n: usize, dim: usize, seed: u64) -> VectorStore {
    GaussianMixture::new(dim, 16, 0.3, seed)
        .expect("valid mixture")
        .sample(n, seed + 1)
}

pub fn metadata(n: usize, mdim: usize, seed: u64) -> MetaStore {
    let flat = gen_metadata(n, mdim, MetaDistribution::Uniform, seed).expect("valid metadata");
    MetaStore::from_flat(mdim, flat).expect("valid store")
}

/// `n` 32-d points over uniform 2-d metadata, with the baseline graph.
pub fn fixture(n: usize) -> Fixture {
    let mix = GaussianMixture::new(32, 16, 0.3, SEED).expect("valid mixture");
    let base = mix.sample(n, SEED + 1);
    let queries = mix.sample(256, SEED + 2);
    let mut index = CubeGraphIndex::build(base, metadata(n, 2, SEED + 3), IndexParams::default()).expect("build");
    index.build_baseline().expect("baseline");
    Fixture { index, queries }
}

pub fn workload(f: &Fixture, shape: Shape, ratio: f64) -> Workload {
    gen_workload(f.queries.len(), shape, ratio, 2, 1.0, SEED + 4, Some(f.index.meta())).expect("workload")
}
