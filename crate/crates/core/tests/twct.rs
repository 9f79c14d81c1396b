mod common;

use std::collections::BTreeMap;

use coflow_hpn::grouping::preprocess_cores;
use coflow_hpn::model::{CoflowId, CoreId, FlowKey, Mode, Problem};
use coflow_hpn::pipeline::run;
use coflow_hpn::relaxations::{FractionalAssignment, Horizon, Item, XKey};
use coflow_hpn::schedulers::{list_schedule, priority_order};
use coflow_hpn::twct::{assign_intervals, check_classification, prepare, run_divisible_twct, run_indivisible_twct};
use proptest::prelude::*;

fn fractional(mass: &[(u32, f64)], c_bar: f64) -> FractionalAssignment {
    let item = Item::Coflow(CoflowId(1));
    FractionalAssignment {
        mode: Mode::Indivisible,
        horizon: Some(Horizon::new(4)),
        x: mass.iter().map(|&(level, v)| (XKey { item, level, core: CoreId(1) }, v)).collect(),
        completion: BTreeMap::from([(item, c_bar)]),
        coflow_completion: BTreeMap::from([(CoflowId(1), c_bar)]),
        makespan: None,
        objective: c_bar,
    }
}

#[test]
fn class_needs_half_the_mass_and_the_completion() {
    let item = Item::Coflow(CoflowId(1));
    let plan = assign_intervals(&fractional(&[(1, 1.0)], 5.0), Horizon::new(4)).unwrap();
    assert_eq!(plan.q[&item], 3);
    let plan = assign_intervals(&fractional(&[(1, 0.3), (2, 0.7)], 2.0), Horizon::new(4)).unwrap();
    assert_eq!(plan.q[&item], 2);
    assert_eq!(plan.alpha[&item], 1.0);
    let plan = assign_intervals(&fractional(&[(1, 1.0)], 2.0), Horizon::new(4)).unwrap();
    assert_eq!(plan.q[&item], 1);
    assert_eq!(plan.x_tilde[&item], BTreeMap::from([(CoreId(1), 1.0)]));
}

#[test]
fn lone_coflow_runs_undisturbed() {
    let inst = common::instance(1, &[1.0], &[(1.0, 0.0, &[(1, 1, 2.0)])]);
    let out = run_indivisible_twct(&inst).unwrap();
    assert_eq!(out.schedule.coflow_completion[&CoflowId(1)], 2.0);
    assert_eq!(out.schedule.twct, 2.0);

    let late = common::instance(1, &[1.0], &[(3.5, 3.0, &[(1, 1, 2.0)])]);
    for out in [run_indivisible_twct(&late).unwrap(), run_divisible_twct(&late).unwrap()] {
        assert_eq!(out.schedule.coflow_completion[&CoflowId(1)], 5.0);
        assert_eq!(out.schedule.twct, 3.5 * 5.0);
    }
}

#[test]
fn two_equal_coflows_stay_within_the_bound() {
    let inst = common::instance(1, &[2.0, 3.0], &[(1.0, 0.0, &[(1, 1, 4.0)]), (1.0, 0.0, &[(1, 1, 4.0)])]);
    let out = run_indivisible_twct(&inst).unwrap();
    assert!(out.grouping.discarded.is_empty());
    assert!(out.within_bound());
    assert!(out.schedule.twct >= out.lp_objective);
}

#[test]
fn disjoint_flows_of_one_coflow_overlap() {
    let inst = common::instance(2, &[1.0], &[(1.0, 0.0, &[(1, 1, 3.0), (2, 2, 5.0)])]);
    let out = run_divisible_twct(&inst).unwrap();
    assert_eq!(out.schedule.flow_completion[&FlowKey::new(1, 1, 1)], 3.0);
    assert_eq!(out.schedule.coflow_completion[&CoflowId(1)], 5.0);
}

#[test]
fn single_flow_coflows_give_matching_pipelines() {
    let inst = common::instance(
        2,
        &[1.0, 2.0],
        &[(2.0, 0.0, &[(1, 2, 3.0)]), (1.0, 1.0, &[(1, 1, 5.0)]), (3.0, 0.5, &[(2, 2, 2.0)])],
    );
    let a = run_indivisible_twct(&inst).unwrap();
    let b = run_divisible_twct(&inst).unwrap();
    assert!(common::close(a.lp_objective, b.lp_objective, 1e-6));
    assert_eq!(a.schedule.flow_completion, b.schedule.flow_completion);
}

#[test]
fn sub_unit_transfers_are_rescaled_and_reported_in_original_units() {
    let inst = common::instance(1, &[4.0], &[(1.0, 0.0, &[(1, 1, 0.5)])]);
    let (_, scale, _) = prepare(&inst, Mode::Indivisible).unwrap();
    assert_eq!(scale, 8.0);
    let out = run_indivisible_twct(&inst).unwrap();
    assert_eq!(out.time_scale, 8.0);
    assert_eq!(out.schedule.twct, 0.125);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn interval_plans_are_sound(inst in common::small_instance(4, 5, 4)) {
        for problem in [Problem::INDIV_TWCT, Problem::DIV_TWCT] {
            let out = run(&inst, problem).unwrap();
            let plan = out.intervals.as_ref().unwrap();
            prop_assert!(check_classification(plan, &out.fractional).is_ok());
            let mut members = 0;
            for (&l, class) in &plan.classes {
                members += class.len();
                for item in class {
                    prop_assert_eq!(plan.q[item], l);
                }
            }
            prop_assert_eq!(members, out.fractional.completion.len());
            for (item, &q) in &plan.q {
                prop_assert!(plan.horizon.tau(q) <= 4.0 * out.fractional.completion[item] * (1.0 + 1e-9));
                prop_assert!(plan.alpha[item] >= 0.5 - 1e-9);
                let mass: f64 = plan.x_tilde[item].values().sum();
                prop_assert!((mass - 1.0).abs() < 1e-6);
                prop_assert!(plan.x_tilde[item].values().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn each_class_is_placed_on_its_own(inst in common::small_instance(4, 5, 4)) {
        for problem in [Problem::INDIV_TWCT, Problem::DIV_TWCT] {
            let out = run(&inst, problem).unwrap();
            let plan = out.intervals.as_ref().unwrap();
            let (scaled, _, _) = prepare(&inst, problem.mode).unwrap();
            let (grouping, _) = preprocess_cores(&scaled, &out.fractional);
            for (&l, class) in &plan.classes {
                let order = priority_order(&out.fractional.completion, class.iter().copied());
                let alone = list_schedule(problem.mode, &scaled, &grouping, &plan.x_tilde, &order);
                let within: Vec<_> = out
                    .assignment
                    .placements
                    .iter()
                    .filter(|p| p.interval == Some(l))
                    .map(|p| (p.item, p.core))
                    .collect();
                prop_assert_eq!(alone, within);
            }
        }
    }
}
