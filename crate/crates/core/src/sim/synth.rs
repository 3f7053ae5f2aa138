use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{Schema, Table};

/// Gaussian clusters inside the unit cube plus a uniform background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rows: usize,
    pub dims: usize,
    pub clusters: usize,
    /// Share of rows drawn uniformly instead of from a cluster.
    pub noise: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            rows: 200_000,
            dims: 3,
            clusters: 12,
            noise: 0.1,
            sigma_min: 0.02,
            sigma_max: 0.08,
        }
    }
}

pub fn clustered_table(cfg: &SynthConfig, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = cfg.dims.max(1);
    let k = cfg.clusters.max(1);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(0.1..0.9)).collect()).collect();
    let sigmas: Vec<f64> = (0..k)
        .map(|_| {
            if cfg.sigma_max > cfg.sigma_min {
                rng.random_range(cfg.sigma_min..cfg.sigma_max)
            } else {
                cfg.sigma_min
            }
        })
        .collect();
    // uneven cluster weights
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    let total: f64 = weights.iter().sum();

    let mut data = Vec::with_capacity(cfg.rows * d);
    for _ in 0..cfg.rows {
        if rng.random::<f64>() < cfg.noise {
            data.extend((0..d).map(|_| rng.random::<f64>()));
            continue;
        }
        let mut r = rng.random_range(0.0..total);
        let mut c = k - 1;
        for (i, w) in weights.iter().enumerate() {
            r -= w;
            if r < 0.0 {
                c = i;
                break;
            }
        }
        let normal = Normal::new(0.0, sigmas[c]).expect("positive sigma");
        data.extend(centers[c].iter().map(|&m| (m + normal.sample(&mut rng)).clamp(0.0, 1.0)));
    }
    Table::new(Schema::numeric(d), data).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_range_and_determinism() {
        let cfg = SynthConfig {
            rows: 5000,
            dims: 3,
            ..Default::default()
        };
        let t = clustered_table(&cfg, 4);
        assert_eq!((t.len(), t.dims()), (5000, 3));
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(t, clustered_table(&cfg, 4));
        assert_ne!(t, clustered_table(&cfg, 5));
    }
}
