//! Weighted completion time: interval classes and the two end-to-end pipelines.
//!
//! An item's class `q` is the first interval by which it has half of its LP mass
//! and its LP completion time `C̄`. Items of class `l` are placed by the list
//! scheduler with load tables that start empty for every class, using the
//! renormalized early mass `x̃[k] = sum_{l <= q} x[k, l] / alpha` with `alpha` the
//! early mass itself. Each core then runs its classes in increasing order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Error;
use crate::grouping::{preprocess_cores, HALF_TOL};
use crate::model::{CoflowInstance, CoreId, Mode, Problem};
use crate::pipeline::{finish_run, RunOutput};
use crate::relaxations::{
    build_divisible_twct_lp, build_indivisible_twct_lp, compute_horizon, time_normalization, FractionalAssignment,
    Horizon, Item, Relaxation,
};
use crate::schedulers::{list_schedule, priority_order, Assignment, Placement};

/// Relative slack when testing `C̄ <= 2^l`.
const FIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalPlan {
    pub horizon: Horizon,
    pub q: BTreeMap<Item, u32>,
    /// Items of each non-empty class.
    pub classes: BTreeMap<u32, Vec<Item>>,
    pub alpha: BTreeMap<Item, f64>,
    pub x_tilde: BTreeMap<Item, BTreeMap<CoreId, f64>>,
}

/// Classifies every item of an interval-indexed solution.
pub fn assign_intervals(fractional: &FractionalAssignment, horizon: Horizon) -> Result<IntervalPlan, Error> {
    let mut plan = IntervalPlan {
        horizon,
        q: BTreeMap::new(),
        classes: BTreeMap::new(),
        alpha: BTreeMap::new(),
        x_tilde: BTreeMap::new(),
    };
    for (&item, &c_bar) in &fractional.completion {
        let mut by_level = vec![0.0; horizon.levels() as usize + 1];
        for (key, v) in fractional.entries(item) {
            by_level[key.level as usize] += v;
        }
        let mut cumulative = 0.0;
        let mut q = None;
        for l in 1..=horizon.levels() {
            cumulative += by_level[l as usize];
            let fits = c_bar <= horizon.tau(l) * (1.0 + FIT_TOL);
            if cumulative >= 0.5 - HALF_TOL && fits {
                q = Some(l);
                break;
            }
        }
        let q = q.ok_or_else(|| Error::Interval(format!("{item}: no interval holds half its mass and C = {c_bar}")))?;
        let mut x_tilde: BTreeMap<CoreId, f64> = BTreeMap::new();
        for (key, v) in fractional.entries(item).filter(|(k, _)| k.level <= q) {
            *x_tilde.entry(key.core).or_insert(0.0) += v;
        }
        let alpha: f64 = x_tilde.values().sum();
        x_tilde.values_mut().for_each(|v| *v /= alpha);
        plan.q.insert(item, q);
        plan.classes.entry(q).or_default().push(item);
        plan.alpha.insert(item, alpha);
        plan.x_tilde.insert(item, x_tilde);
    }
    Ok(plan)
}

/// Checks `2^q <= 4 C̄` for every item, the guarantee behind the class choice.
pub fn check_classification(plan: &IntervalPlan, fractional: &FractionalAssignment) -> Result<(), Error> {
    for (&item, &q) in &plan.q {
        let c_bar = fractional.completion[&item];
        if plan.horizon.tau(q) > 4.0 * c_bar * (1.0 + 1e-6) + 1e-6 {
            return Err(Error::Interval(format!("{item}: 2^{q} exceeds 4 C = {}", 4.0 * c_bar)));
        }
    }
    Ok(())
}

/// Scales `instance` so every positive port transfer takes at least one time unit
/// and builds the matching interval-indexed relaxation. Returns the scale factor.
pub fn prepare(instance: &CoflowInstance, mode: Mode) -> Result<(CoflowInstance, f64, Relaxation), Error> {
    let scale = time_normalization(instance);
    let scaled = if scale == 1.0 { instance.clone() } else { instance.scale_time(scale) };
    let horizon = compute_horizon(&scaled);
    let relaxation = match mode {
        Mode::Indivisible => build_indivisible_twct_lp(&scaled, horizon),
        Mode::Divisible => build_divisible_twct_lp(&scaled, horizon),
    };
    Ok((scaled, scale, relaxation))
}

fn run(instance: &CoflowInstance, mode: Mode) -> Result<RunOutput, Error> {
    let (scaled, scale, relaxation) = prepare(instance, mode)?;
    let horizon = relaxation.horizon.expect("interval-indexed");
    let fractional = relaxation.solve()?;
    let (grouping, remassed) = preprocess_cores(&scaled, &fractional);
    let plan = assign_intervals(&remassed, horizon)?;
    check_classification(&plan, &remassed)?;

    let mut placements = Vec::new();
    for (&l, members) in &plan.classes {
        let order = priority_order(&remassed.completion, members.iter().copied());
        for (item, core) in list_schedule(mode, &scaled, &grouping, &plan.x_tilde, &order) {
            placements.push(Placement { item, core, interval: Some(l) });
        }
    }
    let assignment = Assignment { mode, placements };
    let problem = Problem { mode, objective: crate::model::Objective::Twct };
    finish_run(instance, &scaled, scale, problem, &relaxation, remassed, grouping, Some(plan), assignment)
}

/// Coflow-granularity pipeline.
pub fn run_indivisible_twct(instance: &CoflowInstance) -> Result<RunOutput, Error> {
    run(instance, Mode::Indivisible)
}

/// Flow-granularity pipeline.
pub fn run_divisible_twct(instance: &CoflowInstance) -> Result<RunOutput, Error> {
    run(instance, Mode::Divisible)
}
