use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_vertex: usize,
    pub n_uniform: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_vertex: 1000,
            n_uniform: 4000,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Vertex,
    Uniform,
}

impl fmt::Display for SampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleKind::Vertex => "vertex",
            SampleKind::Uniform => "uniform",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub kind: SampleKind,
    pub values: Vec<f64>,
}

/// Vertex samples pick the upper or lower bound at each step with a fair coin;
/// uniform samples draw each step independently inside the band.
pub fn sample_trajectories(env: &EnvelopeSolution, cfg: &SamplerConfig) -> Vec<TrajectorySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_t = env.steps;
    let mut out = Vec::with_capacity(cfg.n_vertex + cfg.n_uniform);
    for _ in 0..cfg.n_vertex {
        let values = (0..n_t)
            .map(|t| if rng.gen_bool(0.5) { env.gcp_up[t] } else { env.gcp_dn[t] })
            .collect();
        out.push(TrajectorySample {
            kind: SampleKind::Vertex,
            values,
        });
    }
    for _ in 0..cfg.n_uniform {
        let values = (0..n_t)
            .map(|t| {
                let (lo, hi) = (env.gcp_dn[t].min(env.gcp_up[t]), env.gcp_up[t]);
                let u: f64 = rng.gen();
                (lo + u * (hi - lo)).clamp(lo, hi)
            })
            .collect();
        out.push(TrajectorySample {
            kind: SampleKind::Uniform,
            values,
        });
    }
    out
}
