//! Core preprocessing and speed groups.
//!
//! Cores no faster than `s_max / m` are dropped and their fractional assignment is
//! moved to the fastest core. The survivors are rescaled by `m / s_max`, which puts
//! every normalized speed in `(1, m]`, and bucketed into `K` groups where group `k`
//! holds normalized speeds in `[gamma^(k-1), gamma^k)`. The top group also takes
//! its upper end.
//!
//! ```
//! use coflow_hpn::grouping::compute_gamma_k;
//!
//! assert_eq!(compute_gamma_k(16), (2.0, 4));
//! assert_eq!(compute_gamma_k(4), (2.0, 2));
//! assert_eq!(compute_gamma_k(2), (2.0, 1));
//! ```

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{CoflowInstance, Core, CoreId};
use crate::relaxations::{FractionalAssignment, XKey};

/// Slack used when comparing a suffix mass against one half.
pub const HALF_TOL: f64 = 1e-9;

/// `gamma = max(2, log2 m / log2 log2 m)` and `K = max(1, ceil(log_gamma m))`.
pub fn compute_gamma_k(m: usize) -> (f64, u32) {
    assert!(m >= 1, "need at least one core");
    let mf = m as f64;
    let gamma = if m <= 2 { 2.0 } else { (mf.log2() / mf.log2().log2()).max(2.0) };
    // Smallest k with gamma^k >= m; the relative slack absorbs rounding in gamma.
    let mut k = 1u32;
    while gamma.powi(k as i32) < mf * (1.0 - 1e-12) {
        k += 1;
    }
    (gamma, k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedGrouping {
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: u32,
    /// `groups[k - 1]` is `M_k`, in core id order.
    pub groups: Vec<Vec<CoreId>>,
    /// `group_speed[k - 1]` is `s(M_k)`, summed over normalized speeds.
    pub group_speed: Vec<f64>,
    /// `m / s_max`.
    pub kept_core_scale: f64,
    pub discarded: Vec<CoreId>,
    pub fastest: CoreId,
    pub normalized_speed: BTreeMap<CoreId, f64>,
}

impl SpeedGrouping {
    /// Groups `cores`, which must be non-empty with distinct ids.
    pub fn from_cores(cores: &[Core]) -> Self {
        assert!(!cores.is_empty(), "need at least one core");
        let m = cores.len();
        let (gamma, k) = compute_gamma_k(m);
        let s_max = cores.iter().map(|c| c.speed).fold(0.0, f64::max);
        let fastest = cores.iter().filter(|c| c.speed == s_max).map(|c| c.id).min().expect("non-empty");
        let threshold = s_max / m as f64;
        let scale = m as f64 / s_max;

        let mut sorted: Vec<Core> = cores.to_vec();
        sorted.sort_by_key(|c| c.id);
        let mut groups = vec![Vec::new(); k as usize];
        let mut group_speed = vec![0.0; k as usize];
        let mut discarded = Vec::new();
        let mut normalized_speed = BTreeMap::new();
        for core in sorted {
            if core.id != fastest && core.speed <= threshold {
                discarded.push(core.id);
                continue;
            }
            let v = core.speed * scale;
            let g = group_index(v, gamma, k);
            groups[g as usize - 1].push(core.id);
            group_speed[g as usize - 1] += v;
            normalized_speed.insert(core.id, v);
        }
        SpeedGrouping { gamma, k, groups, group_speed, kept_core_scale: scale, discarded, fastest, normalized_speed }
    }

    /// One-based group of a kept core.
    pub fn group_of(&self, core: CoreId) -> Option<u32> {
        let v = *self.normalized_speed.get(&core)?;
        Some(group_index(v, self.gamma, self.k))
    }

    pub fn is_kept(&self, core: CoreId) -> bool {
        self.normalized_speed.contains_key(&core)
    }

    /// Members of `M_k` (one-based).
    pub fn group(&self, k: u32) -> &[CoreId] {
        &self.groups[k as usize - 1]
    }

    /// `x_{M_k}` for every group, from per-core fractions. Mass on a discarded core
    /// counts towards the fastest core's group.
    pub fn group_marginals(&self, core_mass: &BTreeMap<CoreId, f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.k as usize];
        for (&core, &v) in core_mass {
            let g = self.group_of(core).unwrap_or_else(|| self.group_of(self.fastest).expect("fastest is kept"));
            out[g as usize - 1] += v;
        }
        out
    }
}

/// Group of a normalized speed `v`: the `k` with `v` in `[gamma^(k-1), gamma^k)`,
/// capped at `K`.
fn group_index(v: f64, gamma: f64, k_max: u32) -> u32 {
    let mut k = 1;
    while k < k_max && v >= gamma.powi(k as i32) {
        k += 1;
    }
    k
}

/// Drops slow cores, moves their mass to the fastest core and groups the rest.
pub fn preprocess_cores(
    instance: &CoflowInstance,
    fractional: &FractionalAssignment,
) -> (SpeedGrouping, FractionalAssignment) {
    let grouping = SpeedGrouping::from_cores(instance.cores());
    let mut x: BTreeMap<XKey, f64> = BTreeMap::new();
    for (&key, &v) in &fractional.x {
        let key = if grouping.is_kept(key.core) { key } else { XKey { core: grouping.fastest, ..key } };
        *x.entry(key).or_insert(0.0) += v;
    }
    let remassed = FractionalAssignment { x, ..fractional.clone() };
    (grouping, remassed)
}

/// `(l, r)`: `l` is the largest group index whose suffix `M_l..M_K` holds at least
/// half of the mass, `r` the group in `[l, K]` with the largest total speed (ties to
/// the smaller index). Both are one-based.
pub fn select_group(marginals: &[f64], grouping: &SpeedGrouping) -> (u32, u32) {
    assert_eq!(marginals.len(), grouping.k as usize);
    let mut suffix = 0.0;
    let mut ell = 1;
    for k in (1..=grouping.k).rev() {
        suffix += marginals[k as usize - 1];
        if suffix >= 0.5 - HALF_TOL {
            ell = k;
            break;
        }
    }
    let mut r = ell;
    for k in ell..=grouping.k {
        if grouping.group_speed[k as usize - 1] > grouping.group_speed[r as usize - 1] {
            r = k;
        }
    }
    (ell, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cores(speeds: &[f64]) -> Vec<Core> {
        speeds.iter().enumerate().map(|(i, &s)| Core { id: CoreId(i as u32 + 1), speed: s }).collect()
    }

    #[test]
    fn gamma_and_k_small_cases() {
        assert_eq!(compute_gamma_k(1), (2.0, 1));
        let (g, k) = compute_gamma_k(3);
        let raw = 3f64.log2() / 3f64.log2().log2();
        assert!((g - raw).abs() < 1e-12 && (g - 2.385_379_763_6).abs() < 1e-9);
        assert_eq!(k, 2);
    }

    #[test]
    fn nine_four_one() {
        let g = SpeedGrouping::from_cores(&cores(&[9.0, 4.0, 1.0]));
        assert_eq!(g.discarded, vec![CoreId(3)]);
        assert_eq!(g.fastest, CoreId(1));
        assert_eq!(g.k, 2);
        assert_eq!(g.groups, vec![vec![CoreId(2)], vec![CoreId(1)]]);
        assert!((g.normalized_speed[&CoreId(1)] - 3.0).abs() < 1e-12);
        assert!((g.normalized_speed[&CoreId(2)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_speeds_share_the_top_group() {
        let g = SpeedGrouping::from_cores(&cores(&[5.0; 4]));
        assert!(g.discarded.is_empty());
        assert_eq!(g.groups[0], Vec::<CoreId>::new());
        assert_eq!(g.groups[1].len(), 4);
    }

    #[test]
    fn boundary_speed_is_discarded_but_fastest_never() {
        let g = SpeedGrouping::from_cores(&cores(&[2.0, 1.0]));
        assert_eq!(g.discarded, vec![CoreId(2)]);
        let g = SpeedGrouping::from_cores(&cores(&[3.0, 3.0]));
        assert!(g.discarded.is_empty());
        assert_eq!(g.fastest, CoreId(1));
    }

    #[test]
    fn select_group_examples() {
        let mut g = SpeedGrouping::from_cores(&cores(&[9.0, 4.0, 1.0]));
        assert_eq!(select_group(&[0.4, 0.6], &g), (2, 2));
        g.group_speed = vec![1.0, 10.0];
        assert_eq!(select_group(&[0.6, 0.4], &g), (1, 2));
        let one = SpeedGrouping::from_cores(&cores(&[1.0]));
        assert_eq!(select_group(&[1.0], &one), (1, 1));
    }
}
