//! Seeded synthetic vectors and metadata.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecspace::VectorStore;

/// Isotropic Gaussian mixture with centers drawn uniformly from `[-1, 1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    centers: Vec<Vec<f32>>,
    spread: f32,
}

impl GaussianMixture {
    pub fn new(dim: usize, clusters: usize, spread: f32, seed: u64) -> Result<Self> {
        if dim == 0 || clusters == 0 {
            return Err(Error::invalid("mixture needs dim >= 1 and clusters >= 1"));
        }
        if !(spread.is_finite() && spread >= 0.0) {
            return Err(Error::invalid("spread must be finite and non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..clusters)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        Ok(Self { dim, centers, spread })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, n: usize, seed: u64) -> VectorStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0f32, self.spread).expect("validated spread");
        let mut data = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            let c = &self.centers[rng.random_range(0..self.centers.len())];
            data.extend(c.iter().map(|&x| x + noise.sample(&mut rng)));
        }
        VectorStore::from_flat(self.dim, data).expect("finite samples")
    }
}

/// Metadata distributions for robustness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaDistribution {
    Uniform,
    Normal,
    Clustered,
    Skewed,
    Hollow,
}

impl MetaDistribution {
    pub const ALL: [MetaDistribution; 5] = [
        MetaDistribution::Uniform,
        MetaDistribution::Normal,
        MetaDistribution::Clustered,
        MetaDistribution::Skewed,
        MetaDistribution::Hollow,
    ];
}

impl FromStr for MetaDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "normal" => Ok(Self::Normal),
            "clustered" => Ok(Self::Clustered),
            "skewed" => Ok(Self::Skewed),
            "hollow" => Ok(Self::Hollow),
            other => Err(Error::invalid(format!("unknown metadata distribution '{other}'"))),
        }
    }
}

/// Shape parameters of the metadata distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaGenParams {
    pub normal_sd: f64,
    pub clusters: usize,
    pub cluster_sd: f64,
    pub skew_exponent: f64,
    pub hollow_inner: f64,
    pub hollow_outer: f64,
}

impl Default for MetaGenParams {
    fn default() -> Self {
        Self {
            normal_sd: 0.15,
            clusters: 8,
            cluster_sd: 0.05,
            skew_exponent: 3.0,
            hollow_inner: 0.25,
            hollow_outer: 0.5,
        }
    }
}

/// `n` rows of `m`-dimensional metadata in `[0, 1]^m`, row-major.
pub fn gen_metadata(n: usize, m: usize, dist: MetaDistribution, seed: u64) -> Result<Vec<f64>> {
    gen_metadata_with(n, m, dist, seed, &MetaGenParams::default())
}

pub fn gen_metadata_with(n: usize, m: usize, dist: MetaDistribution, seed: u64, p: &MetaGenParams) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    if !(2..=4).contains(&m) {
        return Err(Error::invalid(format!("metadata dimension {m} unsupported; use 2, 3 or 4")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * m);
    match dist {
        MetaDistribution::Uniform => out.extend((0..n * m).map(|_| rng.random::<f64>())),
        MetaDistribution::Normal => {
            let g = Normal::new(0.5, p.normal_sd).map_err(|e| Error::invalid(e.to_string()))?;
            out.extend((0..n * m).map(|_| g.sample(&mut rng).clamp(0.0, 1.0)));
        }
        MetaDistribution::Clustered => {
            if p.clusters == 0 {
                return Err(Error::invalid("clustered metadata needs at least one cluster"));
            }
            let g = Normal::new(0.0, p.cluster_sd).map_err(|e| Error::invalid(e.to_string()))?;
            let centers: Vec<Vec<f64>> = (0..p.clusters)
                .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
                .collect();
            for _ in 0..n {
                let c = &centers[rng.random_range(0..centers.len())];
                out.extend(c.iter().map(|&x| (x + g.sample(&mut rng)).clamp(0.0, 1.0)));
            }
        }
        MetaDistribution::Skewed => {
            out.extend((0..n * m).map(|_| rng.random::<f64>().powf(p.skew_exponent)));
        }
        MetaDistribution::Hollow => {
            if !(0.0 <= p.hollow_inner && p.hollow_inner < p.hollow_outer) {
                return Err(Error::invalid("hollow radii must satisfy 0 <= inner < outer"));
            }
            let mut row = vec![0.0; m];
            let mut produced = 0;
            let mut attempts = 0u64;
            while produced < n {
                attempts += 1;
                if attempts > 1000 * n as u64 + 1_000_000 {
                    return Err(Error::Generation("hollow rejection sampling made no progress".into()));
                }
                row.iter_mut().for_each(|x| *x = rng.random::<f64>());
                let r = row.iter().map(|x| (x - 0.5) * (x - 0.5)).sum::<f64>().sqrt();
                if r >= p.hollow_inner && r <= p.hollow_outer {
                    out.extend_from_slice(&row);
                    produced += 1;
                }
            }
        }
    }
    Ok(out)
}
