//! Exhaustive search over the simulator's schedule class for tiny instances.
//!
//! A schedule in that class is a core for every item plus a priority list per
//! core, run through the event loop without intervals. For the makespan the cores
//! are independent, so the search keeps, per core and subset of items, the best
//! makespan over all orders of that subset, then combines subsets. Makespans are
//! taken with every release set to zero, matching the makespan relaxations. The
//! weighted completion time is searched the same way with releases, keeping
//! vectors of per-coflow finishing times instead of a single number.

use std::collections::BTreeMap;

use super::{run_segment, SimFlow};
use crate::error::EngineError;
use crate::model::{CoflowInstance, Mode, Objective};
use crate::relaxations::{items, Item};

pub const ORACLE_MAX_FLOWS: usize = 8;
pub const ORACLE_MAX_CORES: usize = 4;
pub const ORACLE_MAX_COFLOWS: usize = 4;

fn item_flows(instance: &CoflowInstance, item: Item) -> Vec<SimFlow> {
    let coflow = instance.coflow(item.coflow()).expect("item of this instance");
    coflow
        .flow_keys()
        .zip(&coflow.flows)
        .filter(|(key, _)| matches!(item, Item::Coflow(_)) || Item::Flow(*key) == item)
        .map(|(key, fl)| SimFlow { key, size: fl.size, release: coflow.release })
        .collect()
}

/// Simulates `order` (item positions) on one core; returns completions per flow.
fn run_order(order: &[usize], flows: &[Vec<SimFlow>], speed: f64, num_ports: usize) -> (Vec<SimFlow>, Vec<f64>, f64) {
    let list: Vec<SimFlow> = order.iter().flat_map(|&i| flows[i].iter().copied()).collect();
    let (completion, end) = run_segment(&list, speed, 0.0, num_ports, None);
    (list, completion, end)
}

fn permutations(items: &[usize], visit: &mut impl FnMut(&[usize])) {
    fn rec(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            visit(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            rec(v, k + 1, visit);
            v.swap(k, i);
        }
    }
    let mut v = items.to_vec();
    rec(&mut v, 0, visit);
}

/// Best objective over every assignment and priority list. Rejects instances
/// above the size guard.
pub fn brute_force_optimum(instance: &CoflowInstance, mode: Mode, objective: Objective) -> Result<f64, EngineError> {
    let (flows, cores, coflows) = (instance.num_flows(), instance.num_cores(), instance.num_coflows());
    if flows > ORACLE_MAX_FLOWS || cores > ORACLE_MAX_CORES || coflows > ORACLE_MAX_COFLOWS {
        return Err(EngineError::OracleTooLarge {
            flows,
            cores,
            coflows,
            max_flows: ORACLE_MAX_FLOWS,
            max_cores: ORACLE_MAX_CORES,
            max_coflows: ORACLE_MAX_COFLOWS,
        });
    }
    match objective {
        Objective::Makespan => Ok(makespan(&instance.without_releases(), mode)),
        Objective::Twct => Ok(twct(instance, mode)),
    }
}

fn makespan(instance: &CoflowInstance, mode: Mode) -> f64 {
    let items = items(instance, mode);
    let flows: Vec<Vec<SimFlow>> = items.iter().map(|&i| item_flows(instance, i)).collect();
    let n = items.len();
    let num_ports = instance.num_ports() as usize;
    // best[k][mask]: least makespan of core k running the items in `mask`.
    let best: Vec<Vec<f64>> = instance
        .cores()
        .iter()
        .map(|core| {
            (0..1usize << n)
                .map(|mask| {
                    let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                    let mut value = if members.is_empty() { 0.0 } else { f64::INFINITY };
                    permutations(&members, &mut |order| {
                        value = value.min(run_order(order, &flows, core.speed, num_ports).2);
                    });
                    value
                })
                .collect()
        })
        .collect();
    let m = instance.num_cores();
    let mut optimum = f64::INFINITY;
    let mut choice = vec![0usize; n];
    loop {
        let mut masks = vec![0usize; m];
        for (i, &k) in choice.iter().enumerate() {
            masks[k] |= 1 << i;
        }
        let value = masks.iter().enumerate().map(|(k, &mask)| best[k][mask]).fold(0.0, f64::max);
        optimum = optimum.min(value);
        // Odometer over core choices.
        let mut i = 0;
        while i < n && choice[i] == m - 1 {
            choice[i] = 0;
            i += 1;
        }
        if i == n {
            return optimum;
        }
        choice[i] += 1;
    }
}

/// Adds `v` to a set of pairwise non-dominated vectors unless some member is at
/// least as good everywhere.
fn insert_pareto(front: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if front.iter().any(|u| u.iter().zip(&v).all(|(a, b)| a <= b)) {
        return;
    }
    front.retain(|u| !u.iter().zip(&v).all(|(a, b)| b <= a));
    front.push(v);
}

/// The weighted completion time only depends on each coflow's last finish, so
/// per core and item subset it is enough to keep the Pareto-minimal vectors of
/// per-coflow finishing times over all orders. Cores are then merged one at a
/// time by taking elementwise maxima over disjoint subsets.
fn twct(instance: &CoflowInstance, mode: Mode) -> f64 {
    let items = items(instance, mode);
    let flows: Vec<Vec<SimFlow>> = items.iter().map(|&i| item_flows(instance, i)).collect();
    let n = items.len();
    let full = (1usize << n) - 1;
    let num_ports = instance.num_ports() as usize;
    let coflows = instance.num_coflows();
    let slot: BTreeMap<_, usize> = instance.coflows().iter().enumerate().map(|(p, c)| (c.id, p)).collect();

    // Cores of equal speed behave identically.
    let mut by_speed: Vec<(f64, Vec<Vec<Vec<f64>>>)> = Vec::new();
    let mut fronts = Vec::with_capacity(instance.num_cores());
    for core in instance.cores() {
        let known = by_speed.iter().position(|(s, _)| *s == core.speed);
        let pos = known.unwrap_or_else(|| {
            let per_mask = (0..=full)
                .map(|mask| {
                    let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                    let mut front = Vec::new();
                    permutations(&members, &mut |order| {
                        let (list, completion, _) = run_order(order, &flows, core.speed, num_ports);
                        let mut v = vec![0.0; coflows];
                        for (fl, c) in list.iter().zip(completion) {
                            let e = &mut v[slot[&fl.key.coflow]];
                            *e = f64::max(*e, c);
                        }
                        insert_pareto(&mut front, v);
                    });
                    front
                })
                .collect();
            by_speed.push((core.speed, per_mask));
            by_speed.len() - 1
        });
        fronts.push(pos);
    }

    // merged[mask]: Pareto front of the cores seen so far running exactly `mask`.
    let mut merged: Vec<Vec<Vec<f64>>> = vec![Vec::new(); full + 1];
    merged[0].push(vec![0.0; coflows]);
    for &pos in &fronts {
        let core_front = &by_speed[pos].1;
        let mut next: Vec<Vec<Vec<f64>>> = vec![Vec::new(); full + 1];
        for mask in 0..=full {
            if merged[mask].is_empty() {
                continue;
            }
            let rest = full & !mask;
            let mut sub = rest;
            loop {
                for u in &merged[mask] {
                    for v in &core_front[sub] {
                        let joined = u.iter().zip(v).map(|(a, b)| a.max(*b)).collect();
                        insert_pareto(&mut next[mask | sub], joined);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        merged = next;
    }
    let weights: Vec<f64> = instance.coflows().iter().map(|c| c.weight).collect();
    merged[full].iter().map(|v| v.iter().zip(&weights).map(|(c, w)| c * w).sum::<f64>()).fold(f64::INFINITY, f64::min)
}
