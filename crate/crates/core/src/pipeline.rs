//! End-to-end runs: relaxation, rounding, simulation and the proven bounds.
//!
//! ```
//! use coflow_hpn::model::{parse_instance, Problem};
//! use coflow_hpn::pipeline::run;
//!
//! let instance = parse_instance(r#"{"format": "coflow-hpn/1", "num_ports": 1,
//!     "cores": [{"id": 1, "speed": 1.0}, {"id": 2, "speed": 2.0}],
//!     "coflows": [
//!         {"id": 1, "weight": 1.0, "release": 0.0, "flows": [{"src": 1, "dst": 1, "size": 4.0}]},
//!         {"id": 2, "weight": 1.0, "release": 0.0, "flows": [{"src": 1, "dst": 1, "size": 4.0}]}]}"#).unwrap();
//! let out = run(&instance, Problem::INDIV_MAKESPAN).unwrap();
//! assert!((out.lp_objective - 8.0 / 3.0).abs() < 1e-6);
//! assert_eq!(out.schedule.makespan, 4.0);
//! assert!(out.within_bound());
//! ```

use std::collections::BTreeMap;

use crate::engine::{compute_metrics, simulate, Metrics, ScheduleResult};
use crate::error::Error;
use crate::grouping::{compute_gamma_k, preprocess_cores, SpeedGrouping};
use crate::model::{CoflowInstance, CoreId, Mode, Objective, Problem};
use crate::relaxations::{
    build_divisible_makespan_lp, build_indivisible_makespan_lp, FractionalAssignment, Item, Relaxation,
};
use crate::schedulers::{list_schedule, priority_order, Assignment, Placement};
use crate::twct::{self, IntervalPlan};

/// Relative slack allowed when comparing an objective against `bound * LP`.
pub const BOUND_TOL: f64 = 1e-6;

/// The proven approximation factor for `problem` on `m` cores:
/// `8 m gamma K`, `8K + 4 gamma`, `64 m gamma K` or `64K + 32 gamma`.
pub fn bound_constant(problem: Problem, m: usize) -> f64 {
    let (gamma, k) = compute_gamma_k(m);
    let (mf, kf) = (m as f64, k as f64);
    match (problem.mode, problem.objective) {
        (Mode::Indivisible, Objective::Makespan) => 8.0 * mf * gamma * kf,
        (Mode::Divisible, Objective::Makespan) => 8.0 * kf + 4.0 * gamma,
        (Mode::Indivisible, Objective::Twct) => 64.0 * mf * gamma * kf,
        (Mode::Divisible, Objective::Twct) => 64.0 * kf + 32.0 * gamma,
    }
}

/// Everything a run produced. Times in `schedule` and `lp_objective` are in the
/// instance's units; `fractional` is in the units the relaxation was solved in,
/// which differ by `time_scale`.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub problem: Problem,
    pub lp_objective: f64,
    pub lp_variables: usize,
    pub lp_constraints: usize,
    pub time_scale: f64,
    pub grouping: SpeedGrouping,
    pub fractional: FractionalAssignment,
    pub intervals: Option<IntervalPlan>,
    pub assignment: Assignment,
    pub schedule: ScheduleResult,
    pub metrics: Metrics,
}

impl RunOutput {
    /// Simulated makespan or weighted completion time, matching the problem.
    pub fn algorithm_objective(&self) -> f64 {
        match self.problem.objective {
            Objective::Makespan => self.schedule.makespan,
            Objective::Twct => self.schedule.twct,
        }
    }

    pub fn bound(&self) -> f64 {
        bound_constant(self.problem, self.grouping.normalized_speed.len() + self.grouping.discarded.len())
    }

    pub fn ratio(&self) -> f64 {
        self.algorithm_objective() / self.lp_objective
    }

    pub fn within_bound(&self) -> bool {
        self.algorithm_objective() <= self.bound() * self.lp_objective * (1.0 + BOUND_TOL)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_run(
    instance: &CoflowInstance,
    solved: &CoflowInstance,
    time_scale: f64,
    problem: Problem,
    relaxation: &Relaxation,
    fractional: FractionalAssignment,
    grouping: SpeedGrouping,
    intervals: Option<IntervalPlan>,
    assignment: Assignment,
) -> Result<RunOutput, Error> {
    let mut schedule = simulate(solved, &assignment)?;
    if time_scale != 1.0 {
        schedule = schedule.scale_time(1.0 / time_scale, solved);
    }
    let reported = if problem.objective == Objective::Makespan { solved } else { instance };
    let metrics = compute_metrics(&schedule, reported)?;
    Ok(RunOutput {
        problem,
        lp_objective: fractional.objective / time_scale,
        lp_variables: relaxation.lp.num_variables(),
        lp_constraints: relaxation.lp.num_constraints(),
        time_scale,
        grouping,
        fractional,
        intervals,
        assignment,
        schedule,
        metrics,
    })
}

fn run_makespan(instance: &CoflowInstance, mode: Mode) -> Result<RunOutput, Error> {
    let base = instance.without_releases();
    let relaxation = match mode {
        Mode::Indivisible => build_indivisible_makespan_lp(&base),
        Mode::Divisible => build_divisible_makespan_lp(&base),
    };
    let fractional = relaxation.solve()?;
    let (grouping, remassed) = preprocess_cores(&base, &fractional);
    let marginals: BTreeMap<Item, BTreeMap<CoreId, f64>> =
        relaxation.items().iter().map(|&item| (item, remassed.core_marginals(item))).collect();
    let order = priority_order(&remassed.completion, relaxation.items().iter().copied());
    let placements = list_schedule(mode, &base, &grouping, &marginals, &order)
        .into_iter()
        .map(|(item, core)| Placement { item, core, interval: None })
        .collect();
    let assignment = Assignment { mode, placements };
    let problem = Problem { mode, objective: Objective::Makespan };
    finish_run(instance, &base, 1.0, problem, &relaxation, remassed, grouping, None, assignment)
}

/// Coflow-granularity makespan pipeline. Release times are ignored.
pub fn run_indivisible_makespan(instance: &CoflowInstance) -> Result<RunOutput, Error> {
    run_makespan(instance, Mode::Indivisible)
}

/// Flow-granularity makespan pipeline. Release times are ignored.
pub fn run_divisible_makespan(instance: &CoflowInstance) -> Result<RunOutput, Error> {
    run_makespan(instance, Mode::Divisible)
}

pub fn run(instance: &CoflowInstance, problem: Problem) -> Result<RunOutput, Error> {
    match (problem.mode, problem.objective) {
        (mode, Objective::Makespan) => run_makespan(instance, mode),
        (Mode::Indivisible, Objective::Twct) => twct::run_indivisible_twct(instance),
        (Mode::Divisible, Objective::Twct) => twct::run_divisible_twct(instance),
    }
}

/// The relaxation `run` would solve for `problem`, for export to other solvers.
/// Completion-time relaxations are built over the time-normalized instance.
pub fn relaxation_for(instance: &CoflowInstance, problem: Problem) -> Result<Relaxation, Error> {
    match problem.objective {
        Objective::Makespan => {
            let base = instance.without_releases();
            Ok(match problem.mode {
                Mode::Indivisible => build_indivisible_makespan_lp(&base),
                Mode::Divisible => build_divisible_makespan_lp(&base),
            })
        }
        Objective::Twct => Ok(twct::prepare(instance, problem.mode)?.2),
    }
}
