//! Seeded random instances.
//!
//! ```
//! use coflow_hpn::generate::{generate, GenParams};
//!
//! let params = GenParams { num_ports: 4, num_cores: 3, num_coflows: 5, seed: 42, ..GenParams::default() };
//! let a = generate(&params).unwrap();
//! assert_eq!(a, generate(&params).unwrap());
//! assert_eq!(a.num_coflows(), 5);
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Pareto};
use serde::Serialize;

use crate::error::Error;
use crate::model::{Coflow, CoflowId, CoflowInstance, Core, CoreId, Flow, Port};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SizeDist {
    Uniform { lo: f64, hi: f64 },
    Pareto { alpha: f64, x_min: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpeedDist {
    /// Integers drawn uniformly from `lo..=hi`.
    Integer {
        lo: u32,
        hi: u32,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenParams {
    pub num_ports: u32,
    pub num_cores: usize,
    pub num_coflows: usize,
    /// Probability that a given `(i, j)` pair carries a flow in a given coflow.
    pub density: f64,
    pub sizes: SizeDist,
    pub speeds: SpeedDist,
    /// Releases are uniform on `[0, release_span]`.
    pub release_span: f64,
    /// Weights are uniform on `[weight_lo, weight_hi]`.
    pub weight_lo: f64,
    pub weight_hi: f64,
    /// Keeps a random subset of this many flows when a coflow draws more.
    pub max_flows_per_coflow: Option<usize>,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            num_ports: 4,
            num_cores: 4,
            num_coflows: 4,
            density: 0.5,
            sizes: SizeDist::Uniform { lo: 1.0, hi: 100.0 },
            speeds: SpeedDist::Integer { lo: 1, hi: 8 },
            release_span: 50.0,
            weight_lo: 1.0,
            weight_hi: 10.0,
            max_flows_per_coflow: None,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: &str| Err(Error::Params(msg.to_string()));
        if self.num_ports == 0 || self.num_cores == 0 || self.num_coflows == 0 {
            return bad("ports, cores and coflows must be positive");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        match self.sizes {
            SizeDist::Uniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                return bad("size range must satisfy 0 < lo <= hi")
            }
            SizeDist::Pareto { alpha, x_min }
                if !(alpha > 0.0 && x_min > 0.0 && alpha.is_finite() && x_min.is_finite()) =>
            {
                return bad("pareto parameters must be positive")
            }
            _ => {}
        }
        match self.speeds {
            SpeedDist::Integer { lo, hi } if !(lo >= 1 && hi >= lo) => {
                return bad("speed range must satisfy 1 <= lo <= hi")
            }
            SpeedDist::Uniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                return bad("speed range must satisfy 0 < lo <= hi")
            }
            _ => {}
        }
        if !(self.release_span >= 0.0 && self.release_span.is_finite()) {
            return bad("release span must be non-negative");
        }
        if !(self.weight_lo > 0.0 && self.weight_hi >= self.weight_lo && self.weight_hi.is_finite()) {
            return bad("weight range must satisfy 0 < lo <= hi");
        }
        if self.max_flows_per_coflow == Some(0) {
            return bad("max flows per coflow must be positive");
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn generate(params: &GenParams) -> Result<CoflowInstance, Error> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let cores = (1..=params.num_cores as u32)
        .map(|id| {
            let speed = match params.speeds {
                SpeedDist::Integer { lo, hi } => rng.random_range(lo..=hi) as f64,
                SpeedDist::Uniform { lo, hi } => uniform(&mut rng, lo, hi),
            };
            Core { id: CoreId(id), speed }
        })
        .collect();
    let pareto = match params.sizes {
        SizeDist::Pareto { alpha, x_min } => Some(Pareto::new(x_min, alpha).expect("validated")),
        SizeDist::Uniform { .. } => None,
    };
    let n = params.num_ports;
    let mut coflows = Vec::with_capacity(params.num_coflows);
    for id in 1..=params.num_coflows as u32 {
        let mut pairs = Vec::new();
        while pairs.is_empty() {
            for i in 1..=n {
                for j in 1..=n {
                    if rng.random::<f64>() < params.density {
                        pairs.push((i, j));
                    }
                }
            }
        }
        if let Some(cap) = params.max_flows_per_coflow {
            if pairs.len() > cap {
                pairs.shuffle(&mut rng);
                pairs.truncate(cap);
                pairs.sort_unstable();
            }
        }
        let flows = pairs
            .into_iter()
            .map(|(i, j)| {
                let size = match (params.sizes, &pareto) {
                    (_, Some(p)) => p.sample(&mut rng),
                    (SizeDist::Uniform { lo, hi }, None) => uniform(&mut rng, lo, hi),
                    (SizeDist::Pareto { .. }, None) => unreachable!(),
                };
                Flow { src: Port(i), dst: Port(j), size }
            })
            .collect();
        let weight = uniform(&mut rng, params.weight_lo, params.weight_hi);
        let release = uniform(&mut rng, 0.0, params.release_span);
        coflows.push(Coflow { id: CoflowId(id), weight, release, flows });
    }
    Ok(CoflowInstance::new(params.num_ports, cores, coflows)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_fills_every_pair() {
        let params = GenParams { num_ports: 3, num_coflows: 2, density: 1.0, ..GenParams::default() };
        let inst = generate(&params).unwrap();
        assert!(inst.coflows().iter().all(|c| c.flows.len() == 9));
    }

    #[test]
    fn flow_cap_is_respected() {
        let params = GenParams { density: 1.0, max_flows_per_coflow: Some(2), ..GenParams::default() };
        let inst = generate(&params).unwrap();
        assert!(inst.coflows().iter().all(|c| c.flows.len() == 2));
    }

    #[test]
    fn seeds_differ() {
        let a = generate(&GenParams { seed: 1, ..GenParams::default() }).unwrap();
        let b = generate(&GenParams { seed: 2, ..GenParams::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn bad_params_are_rejected() {
        assert!(generate(&GenParams { density: 0.0, ..GenParams::default() }).is_err());
        assert!(generate(&GenParams { weight_lo: 0.0, ..GenParams::default() }).is_err());
    }
}
