//! Speed-group list scheduling.
//!
//! Items are visited in priority order. Each one is restricted to the group `r`
//! chosen by [`select_group`] from its fractional mass and then placed on the core
//! of that group that minimizes a port-load score:
//!
//! * coflows: `max over port pairs (i, j) the coflow touches of
//!   (load_I(i, h) + load_O(j, h) + L_if + L_jf) / s_h`;
//! * flows: `(load_I(i, h) + load_O(j, h)) / s_h`.
//!
//! Loads are kept in data units and divided by the core's true speed; normalized
//! speeds only decide group membership. Ties go to the smaller core id.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grouping::{select_group, SpeedGrouping};
use crate::model::{port_loads, CoflowInstance, CoreId, Mode, PortLoads};
use crate::relaxations::Item;

/// Where an item runs, in which interval (completion-time pipelines only) and
/// with which dispatch rank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Placement {
    pub item: Item,
    pub core: CoreId,
    pub interval: Option<u32>,
}

/// Core choice for every item. `placements` is in global priority order: the
/// position of an item is its rank.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assignment {
    pub mode: Mode,
    pub placements: Vec<Placement>,
}

impl Assignment {
    /// Items of every core that received work, in priority order.
    pub fn per_core(&self) -> BTreeMap<CoreId, Vec<Item>> {
        let mut out: BTreeMap<CoreId, Vec<Item>> = BTreeMap::new();
        for p in &self.placements {
            out.entry(p.core).or_default().push(p.item);
        }
        out
    }

    pub fn rank(&self, item: Item) -> Option<usize> {
        self.placements.iter().position(|p| p.item == item)
    }

    pub fn core_of(&self, item: Item) -> Option<CoreId> {
        self.placements.iter().find(|p| p.item == item).map(|p| p.core)
    }
}

/// Accumulated data per (port, core), in data units.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreLoadTable {
    cores: Vec<CoreId>,
    input: Vec<Vec<f64>>,
    output: Vec<Vec<f64>>,
}

impl CoreLoadTable {
    pub fn new(instance: &CoflowInstance) -> Self {
        let n = instance.num_ports() as usize;
        let m = instance.num_cores();
        CoreLoadTable {
            cores: instance.cores().iter().map(|c| c.id).collect(),
            input: vec![vec![0.0; n]; m],
            output: vec![vec![0.0; n]; m],
        }
    }

    fn slot(&self, core: CoreId) -> usize {
        self.cores.binary_search(&core).expect("core of this instance")
    }

    /// `load_I(i, h)` for one-based port `i`.
    pub fn input(&self, port: u32, core: CoreId) -> f64 {
        self.input[self.slot(core)][port as usize - 1]
    }

    /// `load_O(j, h)` for one-based port `j`.
    pub fn output(&self, port: u32, core: CoreId) -> f64 {
        self.output[self.slot(core)][port as usize - 1]
    }
}

/// Candidate cores of an item: group `r` of its mass.
fn candidates<'g>(grouping: &'g SpeedGrouping, marginals: &BTreeMap<CoreId, f64>) -> &'g [CoreId] {
    let (_, r) = select_group(&grouping.group_marginals(marginals), grouping);
    grouping.group(r)
}

fn speed(instance: &CoflowInstance, core: CoreId) -> f64 {
    instance.core(core).expect("core of this instance").speed
}

/// Coflow list scheduling. `order` lists every coflow item to place, highest
/// priority first; `marginals` gives each item's per-core fractions.
pub fn coflow_list_schedule(
    instance: &CoflowInstance,
    grouping: &SpeedGrouping,
    marginals: &BTreeMap<Item, BTreeMap<CoreId, f64>>,
    order: &[Item],
) -> (Vec<(Item, CoreId)>, CoreLoadTable) {
    let loads: PortLoads = port_loads(instance);
    let mut table = CoreLoadTable::new(instance);
    let mut out = Vec::with_capacity(order.len());
    for &item in order {
        let Item::Coflow(f) = item else { panic!("coflow scheduling got {item}") };
        let pos = instance.coflow_index(f).expect("coflow of this instance");
        let (l_in, l_out) = (&loads.input[pos], &loads.output[pos]);
        let mut best: Option<(f64, CoreId)> = None;
        for &h in candidates(grouping, &marginals[&item]) {
            let slot = table.slot(h);
            let a: Vec<f64> = table.input[slot].iter().zip(l_in).map(|(x, y)| x + y).collect();
            let b: Vec<f64> = table.output[slot].iter().zip(l_out).map(|(x, y)| x + y).collect();
            let max_over = |v: &[f64], used: Option<&[f64]>| {
                v.iter()
                    .enumerate()
                    .filter(|&(p, _)| used.map_or(true, |u| u[p] > 0.0))
                    .map(|(_, &x)| x)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            // A pair counts when the coflow uses its input or its output port.
            let pair_max =
                (max_over(&a, Some(l_in)) + max_over(&b, None)).max(max_over(&a, None) + max_over(&b, Some(l_out)));
            let score = pair_max / speed(instance, h);
            if best.map_or(true, |(s, _)| score < s) {
                best = Some((score, h));
            }
        }
        let (_, h) = best.expect("selected group is non-empty");
        let slot = table.slot(h);
        for p in 0..l_in.len() {
            table.input[slot][p] += l_in[p];
            table.output[slot][p] += l_out[p];
        }
        out.push((item, h));
    }
    (out, table)
}

/// Flow list scheduling; same contract as [`coflow_list_schedule`] for flow items.
pub fn flow_list_schedule(
    instance: &CoflowInstance,
    grouping: &SpeedGrouping,
    marginals: &BTreeMap<Item, BTreeMap<CoreId, f64>>,
    order: &[Item],
) -> (Vec<(Item, CoreId)>, CoreLoadTable) {
    let mut table = CoreLoadTable::new(instance);
    let mut out = Vec::with_capacity(order.len());
    for &item in order {
        let Item::Flow(key) = item else { panic!("flow scheduling got {item}") };
        let d = instance.flow_size(key).expect("flow of this instance");
        let (i, j) = (key.src.index(), key.dst.index());
        let mut best: Option<(f64, CoreId)> = None;
        for &h in candidates(grouping, &marginals[&item]) {
            let slot = table.slot(h);
            let score = (table.input[slot][i] + table.output[slot][j]) / speed(instance, h);
            if best.map_or(true, |(s, _)| score < s) {
                best = Some((score, h));
            }
        }
        let (_, h) = best.expect("selected group is non-empty");
        let slot = table.slot(h);
        table.input[slot][i] += d;
        table.output[slot][j] += d;
        out.push((item, h));
    }
    (out, table)
}

/// Items sorted by non-decreasing LP completion time, ties by item id.
pub fn priority_order(completion: &BTreeMap<Item, f64>, items: impl IntoIterator<Item = Item>) -> Vec<Item> {
    let mut v: Vec<Item> = items.into_iter().collect();
    v.sort_by(|a, b| completion[a].total_cmp(&completion[b]).then(a.cmp(b)));
    v
}

/// Runs the list scheduler matching `mode`.
pub fn list_schedule(
    mode: Mode,
    instance: &CoflowInstance,
    grouping: &SpeedGrouping,
    marginals: &BTreeMap<Item, BTreeMap<CoreId, f64>>,
    order: &[Item],
) -> Vec<(Item, CoreId)> {
    match mode {
        Mode::Indivisible => coflow_list_schedule(instance, grouping, marginals, order).0,
        Mode::Divisible => flow_list_schedule(instance, grouping, marginals, order).0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coflow, CoflowId, Core, Flow, Port};

    fn instance(speeds: &[f64], coflows: &[&[(u32, u32, f64)]]) -> CoflowInstance {
        let cores = speeds.iter().enumerate().map(|(k, &s)| Core { id: CoreId(k as u32 + 1), speed: s }).collect();
        let coflows = coflows
            .iter()
            .enumerate()
            .map(|(f, flows)| Coflow {
                id: CoflowId(f as u32 + 1),
                weight: 1.0,
                release: 0.0,
                flows: flows.iter().map(|&(i, j, d)| Flow { src: Port(i), dst: Port(j), size: d }).collect(),
            })
            .collect();
        CoflowInstance::new(2, cores, coflows).unwrap()
    }

    fn uniform(items: &[Item], core: CoreId) -> BTreeMap<Item, BTreeMap<CoreId, f64>> {
        items.iter().map(|&i| (i, BTreeMap::from([(core, 1.0)]))).collect()
    }

    #[test]
    fn identical_coflows_spread_over_equal_cores() {
        let inst = instance(&[1.0, 1.0], &[&[(1, 1, 4.0)], &[(1, 1, 4.0)]]);
        let grouping = SpeedGrouping::from_cores(inst.cores());
        let items = [Item::Coflow(CoflowId(1)), Item::Coflow(CoflowId(2))];
        let (placed, table) = coflow_list_schedule(&inst, &grouping, &uniform(&items, CoreId(1)), &items);
        assert_eq!(placed, vec![(items[0], CoreId(1)), (items[1], CoreId(2))]);
        assert_eq!(table.input(1, CoreId(1)), 4.0);
        assert_eq!(table.output(1, CoreId(2)), 4.0);
    }

    #[test]
    fn flows_of_one_coflow_may_split() {
        let inst = instance(&[1.0, 1.0], &[&[(1, 1, 4.0), (2, 2, 4.0)], &[(1, 1, 4.0)]]);
        let grouping = SpeedGrouping::from_cores(inst.cores());
        let items: Vec<Item> = inst.flows().map(|(k, _)| Item::Flow(k)).collect();
        let (placed, _) = flow_list_schedule(&inst, &grouping, &uniform(&items, CoreId(1)), &items);
        // (1,1,1) to core 1, (2,2,1) scores 0 on core 1, (1,1,2) avoids core 1.
        assert_eq!(placed.iter().map(|p| p.1 .0).collect::<Vec<_>>(), vec![1, 1, 2]);
    }
}
