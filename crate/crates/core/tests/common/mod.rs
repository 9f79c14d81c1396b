#![allow(dead_code)]

use coflow_hpn::generate::{generate, GenParams};
use coflow_hpn::model::{Coflow, CoflowId, CoflowInstance, Core, CoreId, Flow, Port};
use proptest::prelude::*;

/// `(weight, release, flows)` for one coflow; flows are `(src, dst, size)`.
pub type Spec<'a> = (f64, f64, &'a [(u32, u32, f64)]);

/// Builds an instance with cores and coflows numbered from 1.
pub fn instance(num_ports: u32, speeds: &[f64], coflows: &[Spec]) -> CoflowInstance {
    let cores = speeds.iter().enumerate().map(|(k, &speed)| Core { id: CoreId(k as u32 + 1), speed }).collect();
    let coflows = coflows
        .iter()
        .enumerate()
        .map(|(f, &(weight, release, flows))| Coflow {
            id: CoflowId(f as u32 + 1),
            weight,
            release,
            flows: flows.iter().map(|&(i, j, size)| Flow { src: Port(i), dst: Port(j), size }).collect(),
        })
        .collect();
    CoflowInstance::new(num_ports, cores, coflows).unwrap()
}

/// Two unit-weight coflows, each one 4-unit flow on port pair (1, 1), over cores
/// of speed 1 and 2.
pub fn two_fours() -> CoflowInstance {
    instance(1, &[1.0, 2.0], &[(1.0, 0.0, &[(1, 1, 4.0)]), (1.0, 0.0, &[(1, 1, 4.0)])])
}

/// Random generator settings with at most the given dimensions.
pub fn small_params(max_ports: u32, max_cores: usize, max_coflows: usize) -> impl Strategy<Value = GenParams> {
    (1..=max_ports, 1..=max_cores, 1..=max_coflows, 0.2f64..=1.0, 1usize..=3, any::<u64>()).prop_map(
        |(num_ports, num_cores, num_coflows, density, cap, seed)| GenParams {
            num_ports,
            num_cores,
            num_coflows,
            density,
            max_flows_per_coflow: Some(cap),
            seed,
            ..GenParams::default()
        },
    )
}

pub fn small_instance(max_ports: u32, max_cores: usize, max_coflows: usize) -> impl Strategy<Value = CoflowInstance> {
    small_params(max_ports, max_cores, max_coflows).prop_map(|p| generate(&p).unwrap())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
