mod common;

use coflow_hpn::error::DecodeError;
use coflow_hpn::lp::{solve_lp, FEAS_TOL};
use coflow_hpn::model::{port_loads, CoflowId, CoreId, FlowKey, Mode, Problem};
use coflow_hpn::relaxations::{
    build_divisible_makespan_lp, build_divisible_twct_lp, build_indivisible_makespan_lp, build_indivisible_twct_lp,
    build_relaxation, compute_horizon, decode_solution, items, Horizon, Item,
};
use common::{close, instance, two_fours};
use proptest::prelude::*;

const EPS: f64 = 1e-6;

fn single(size: f64, release: f64) -> coflow_hpn::model::CoflowInstance {
    instance(1, &[1.0], &[(1.0, release, &[(1, 1, size)])])
}

#[test]
fn horizon_examples() {
    assert_eq!(compute_horizon(&single(5.0, 0.0)).levels(), 3);
    assert_eq!(compute_horizon(&single(8.0, 0.0)).levels(), 3);
    // Release 6 plus a bottleneck port carrying 10 units at speed 1.
    let inst = instance(2, &[1.0, 3.0], &[(1.0, 0.0, &[(1, 1, 4.0), (2, 2, 1.0)]), (1.0, 6.0, &[(1, 2, 6.0)])]);
    assert_eq!(compute_horizon(&inst).levels(), 4);
    assert_eq!(Horizon::new(3).boundaries(), vec![1.0, 2.0, 4.0, 8.0]);
}

#[test]
fn indivisible_makespan_balances_two_cores() {
    let frac = build_indivisible_makespan_lp(&two_fours()).solve().unwrap();
    assert!((frac.objective - 8.0 / 3.0).abs() < EPS);
    assert!((frac.makespan.unwrap() - 8.0 / 3.0).abs() < EPS);
}

#[test]
fn single_core_makespan_is_load_over_speed() {
    let inst = instance(2, &[2.5], &[(1.0, 0.0, &[(1, 1, 3.0), (1, 2, 4.0), (2, 2, 1.0)])]);
    let frac = build_indivisible_makespan_lp(&inst).solve().unwrap();
    assert!((frac.objective - 7.0 / 2.5).abs() < EPS);
    let only = Item::Coflow(CoflowId(1));
    assert!((frac.x.values().sum::<f64>() - 1.0).abs() < EPS);
    assert!((frac.completion[&only] - frac.objective).abs() < EPS);
}

#[test]
fn indivisible_twct_single_flow() {
    let inst = single(2.0, 0.0);
    let frac = build_indivisible_twct_lp(&inst, compute_horizon(&inst)).solve().unwrap();
    assert!((frac.objective - 2.0).abs() < EPS);
    let released = single(2.0, 3.0);
    let frac = build_indivisible_twct_lp(&released, compute_horizon(&released)).solve().unwrap();
    assert!((frac.objective - 5.0).abs() < EPS);
}

#[test]
fn two_unit_coflows_share_one_port() {
    let inst = instance(1, &[1.0], &[(1.0, 0.0, &[(1, 1, 1.0)]), (1.0, 0.0, &[(1, 1, 1.0)])]);
    let frac = build_indivisible_twct_lp(&inst, compute_horizon(&inst)).solve().unwrap();
    assert!(frac.objective >= 2.0 - EPS && frac.objective <= 3.0 + EPS, "{}", frac.objective);
}

#[test]
fn divisible_makespan_balances_two_cores() {
    let frac = build_divisible_makespan_lp(&two_fours()).solve().unwrap();
    assert!((frac.objective - 8.0 / 3.0).abs() < EPS);
    for c in 1..=2 {
        let item = Item::Flow(FlowKey::new(1, 1, c));
        assert!((frac.item_mass(item) - 1.0).abs() < EPS);
        assert!((frac.core_marginals(item)[&CoreId(2)] - 2.0 / 3.0).abs() < EPS);
    }
}

#[test]
fn divisible_single_flow_beats_the_fastest_core() {
    let speeds = [1.0, 3.0, 5.0];
    let inst = instance(1, &speeds, &[(1.0, 0.0, &[(1, 1, 10.0)])]);
    let frac = build_divisible_makespan_lp(&inst).solve().unwrap();
    assert!(frac.objective <= 10.0 / 5.0 + EPS);
    assert!(frac.objective >= 10.0 / 9.0 - EPS);
}

#[test]
fn disjoint_ports_on_one_core_do_not_contend() {
    let inst = instance(2, &[2.0], &[(1.0, 0.0, &[(1, 1, 6.0)]), (1.0, 0.0, &[(2, 2, 4.0)])]);
    let frac = build_divisible_makespan_lp(&inst).solve().unwrap();
    assert!((frac.objective - 3.0).abs() < EPS);
}

#[test]
fn divisible_twct_matches_indivisible_for_single_flow_coflows() {
    let inst =
        instance(2, &[1.0, 2.0], &[(2.0, 0.0, &[(1, 2, 3.0)]), (1.0, 1.0, &[(1, 1, 5.0)]), (3.0, 0.5, &[(2, 2, 2.0)])]);
    let h = compute_horizon(&inst);
    let a = build_indivisible_twct_lp(&inst, h).solve().unwrap();
    let b = build_divisible_twct_lp(&inst, h).solve().unwrap();
    assert!(close(a.objective, b.objective, EPS), "{} vs {}", a.objective, b.objective);
}

#[test]
fn coflow_completion_covers_both_flows() {
    let inst = instance(2, &[1.0], &[(1.0, 0.0, &[(1, 1, 3.0), (2, 2, 5.0)])]);
    let frac = build_divisible_twct_lp(&inst, compute_horizon(&inst)).solve().unwrap();
    let c_f = frac.coflow_completion[&CoflowId(1)];
    let flows = [FlowKey::new(1, 1, 1), FlowKey::new(2, 2, 1)].map(|k| frac.completion[&Item::Flow(k)]);
    assert!(c_f >= flows[0].max(flows[1]) - EPS);
    assert!((c_f - 5.0).abs() < EPS);
    assert!((frac.objective - 5.0).abs() < EPS);
}

#[test]
fn doubling_weights_doubles_the_objective() {
    let a = instance(2, &[1.0, 2.0], &[(1.0, 0.0, &[(1, 2, 3.0)]), (2.0, 1.0, &[(1, 1, 5.0), (2, 2, 1.0)])]);
    let b = instance(2, &[1.0, 2.0], &[(2.0, 0.0, &[(1, 2, 3.0)]), (4.0, 1.0, &[(1, 1, 5.0), (2, 2, 1.0)])]);
    let h = compute_horizon(&a);
    for build in [build_indivisible_twct_lp, build_divisible_twct_lp] {
        let (x, y) = (build(&a, h).solve().unwrap(), build(&b, h).solve().unwrap());
        assert!(close(2.0 * x.objective, y.objective, EPS));
    }
}

#[test]
fn short_assignment_mass_is_rejected_on_decode() {
    let rel = build_indivisible_makespan_lp(&two_fours());
    let mut sol = solve_lp(&rel.lp).unwrap();
    assert!(decode_solution(&rel, &sol).is_ok());
    for (v, name) in sol.values.iter_mut().zip(rel.lp.variable_names()) {
        if name.starts_with("x_") {
            *v *= 0.9;
        }
    }
    assert!(matches!(decode_solution(&rel, &sol), Err(DecodeError::AssignmentSum { .. })));
}

#[test]
fn divisible_twct_variable_count() {
    let inst = instance(3, &[1.0, 2.0, 4.0], &[(1.0, 0.0, &[(1, 1, 3.0), (2, 3, 1.0)]), (1.0, 2.0, &[(3, 1, 5.0)])]);
    let h = compute_horizon(&inst);
    let rel = build_divisible_twct_lp(&inst, h);
    let (m, flows, l, n) = (3, 3, h.levels() as usize, 2);
    assert_eq!(rel.lp.num_variables(), m * flows * l + flows + n);
}

fn max_speed(inst: &coflow_hpn::model::CoflowInstance) -> f64 {
    inst.cores().iter().map(|c| c.speed).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn divisible_makespan_relaxes_indivisible(inst in common::small_instance(4, 4, 4)) {
        let ind = build_indivisible_makespan_lp(&inst).solve().unwrap();
        let div = build_divisible_makespan_lp(&inst).solve().unwrap();
        prop_assert!(div.objective <= ind.objective * (1.0 + EPS) + EPS);
    }

    #[test]
    fn makespan_lp_respects_aggregate_capacity(inst in common::small_instance(4, 4, 4)) {
        let total_speed: f64 = inst.cores().iter().map(|c| c.speed).sum();
        let loads = port_loads(&inst);
        let mut worst: f64 = 0.0;
        for p in 0..inst.num_ports() as usize {
            worst = worst.max(loads.input.iter().map(|row| row[p]).sum::<f64>());
        }
        let frac = build_indivisible_makespan_lp(&inst).solve().unwrap();
        prop_assert!(frac.objective >= worst / total_speed * (1.0 - EPS));
    }

    #[test]
    fn completion_lps_bound_release_plus_transfer(inst in common::small_instance(3, 3, 3)) {
        let h = compute_horizon(&inst);
        let s = max_speed(&inst);
        let loads = port_loads(&inst);
        for problem in [Problem::INDIV_TWCT, Problem::DIV_TWCT] {
            let rel = build_relaxation(&inst, problem);
            let sol = solve_lp(&rel.lp).unwrap();
            prop_assert!(rel.lp.max_violation(&sol.values) <= FEAS_TOL);
            let frac = decode_solution(&rel, &sol).unwrap();
            let mut bound = 0.0;
            for (f, c) in inst.coflows().iter().enumerate() {
                let transfer = match problem.mode {
                    Mode::Indivisible => loads.input[f].iter().chain(&loads.output[f]).copied().fold(0.0, f64::max),
                    Mode::Divisible => c.flows.iter().map(|fl| fl.size).fold(0.0, f64::max),
                };
                bound += c.weight * (c.release + transfer / s);
            }
            prop_assert!(frac.objective >= bound * (1.0 - EPS), "{} < {}", frac.objective, bound);
            prop_assert_eq!(rel.horizon, Some(h));
        }
    }

    #[test]
    fn every_item_carries_unit_mass(inst in common::small_instance(3, 3, 3)) {
        for problem in Problem::ALL {
            let frac = build_relaxation(&inst, problem).solve().unwrap();
            for item in items(&inst, problem.mode) {
                prop_assert!((frac.item_mass(item) - 1.0).abs() < 1e-5);
            }
            prop_assert!(frac.x.values().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
