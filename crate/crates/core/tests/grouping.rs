mod common;

use std::collections::BTreeMap;

use coflow_hpn::grouping::{compute_gamma_k, preprocess_cores, select_group, SpeedGrouping};
use coflow_hpn::model::{Core, CoreId};
use coflow_hpn::relaxations::build_indivisible_makespan_lp;
use proptest::prelude::*;

fn cores(speeds: &[f64]) -> Vec<Core> {
    speeds.iter().enumerate().map(|(k, &speed)| Core { id: CoreId(k as u32 + 1), speed }).collect()
}

#[test]
fn gamma_and_k_at_four_and_sixteen() {
    assert_eq!(compute_gamma_k(4), (2.0, 2));
    assert_eq!(compute_gamma_k(16), (2.0, 4));
    assert_eq!(compute_gamma_k(2), (2.0, 1));
}

#[test]
fn select_group_examples() {
    let g = SpeedGrouping::from_cores(&cores(&[1.0, 4.0]));
    assert_eq!(g.k, 1);
    assert_eq!(select_group(&[1.0], &g), (1, 1));

    // Speeds 3 and 9 on m = 4 cores normalize to 4/3 and 4: groups 1 and 2.
    let mut g = SpeedGrouping::from_cores(&cores(&[3.0, 9.0, 9.0, 9.0]));
    assert_eq!(g.k, 2);
    assert_eq!(select_group(&[0.4, 0.6], &g), (2, 2));
    g.group_speed = vec![1.0, 10.0];
    assert_eq!(select_group(&[0.6, 0.4], &g), (1, 2));
}

#[test]
fn discarded_mass_moves_to_the_fastest_core() {
    let inst = common::instance(1, &[9.0, 4.0, 1.0], &[(1.0, 0.0, &[(1, 1, 4.0)])]);
    let mut frac = build_indivisible_makespan_lp(&inst).solve().unwrap();
    let keys: Vec<_> = frac.x.keys().copied().collect();
    frac.x.clear();
    let item = keys[0].item;
    for (core, v) in [(1, 0.25), (2, 0.25), (3, 0.5)] {
        frac.x.insert(coflow_hpn::relaxations::XKey { item, level: 0, core: CoreId(core) }, v);
    }
    let (g, moved) = preprocess_cores(&inst, &frac);
    assert_eq!(g.discarded, vec![CoreId(3)]);
    let marg = moved.core_marginals(item);
    assert_eq!(marg.get(&CoreId(1)), Some(&0.75));
    assert_eq!(marg.get(&CoreId(3)), None);
    assert_eq!(moved.item_mass(item), 1.0);
}

fn speed_vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.01f64..100.0, (1u32..=8).prop_map(f64::from)], 1..=40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn discarded_speed_is_at_most_the_fastest(speeds in speed_vector()) {
        let g = SpeedGrouping::from_cores(&cores(&speeds));
        let s_max = speeds.iter().copied().fold(0.0, f64::max);
        let dropped: f64 = g.discarded.iter().map(|c| speeds[c.0 as usize - 1]).sum();
        prop_assert!(dropped <= s_max * (1.0 + 1e-12));
        prop_assert!(g.is_kept(g.fastest));
    }

    #[test]
    fn groups_partition_kept_cores_by_bracket(speeds in speed_vector()) {
        let g = SpeedGrouping::from_cores(&cores(&speeds));
        let m = speeds.len() as f64;
        let mut seen = BTreeMap::new();
        for k in 1..=g.k {
            for &c in g.group(k) {
                prop_assert!(seen.insert(c, k).is_none());
                let v = g.normalized_speed[&c];
                // With a single core the fastest normalizes to exactly 1.
                prop_assert!((v > 1.0 || speeds.len() == 1) && v <= m * (1.0 + 1e-12));
                prop_assert!(v >= g.gamma.powi(k as i32 - 1) * (1.0 - 1e-12));
                prop_assert!(k == g.k || v < g.gamma.powi(k as i32));
            }
            let total: f64 = g.group(k).iter().map(|c| g.normalized_speed[c]).sum();
            prop_assert!((total - g.group_speed[k as usize - 1]).abs() <= 1e-9 * total.max(1.0));
        }
        prop_assert_eq!(seen.len() + g.discarded.len(), speeds.len());
    }

    #[test]
    fn select_group_suffix_holds_half(
        speeds in speed_vector(),
        raw in prop::collection::vec(0.0f64..1.0, 1..12),
    ) {
        let g = SpeedGrouping::from_cores(&cores(&speeds));
        let mut marg: Vec<f64> = (0..g.k as usize).map(|k| raw.get(k).copied().unwrap_or(0.0)).collect();
        let total: f64 = marg.iter().sum();
        if total == 0.0 {
            marg[0] = 1.0;
        } else {
            marg.iter_mut().for_each(|v| *v /= total);
        }
        let (ell, r) = select_group(&marg, &g);
        let suffix = |from: u32| marg[from as usize - 1..].iter().sum::<f64>();
        prop_assert!(suffix(ell) >= 0.5 - 1e-9);
        prop_assert!(ell == g.k || suffix(ell + 1) < 0.5 - 1e-9);
        prop_assert!(r >= ell);
        for k in ell..=g.k {
            prop_assert!(g.group_speed[k as usize - 1] <= g.group_speed[r as usize - 1]);
        }
    }

    #[test]
    fn remassing_conserves_every_item(inst in common::small_instance(3, 6, 3)) {
        let frac = build_indivisible_makespan_lp(&inst).solve().unwrap();
        let (g, moved) = preprocess_cores(&inst, &frac);
        for item in frac.items() {
            prop_assert!((moved.item_mass(item) - frac.item_mass(item)).abs() < 1e-12);
            prop_assert!(moved.core_marginals(item).keys().all(|&c| g.is_kept(c)));
        }
    }
}
