use proptest::prelude::*;

use super::*;

/// `min E` with `8 x_slow <= E`, `4 x_fast <= E`, `x_slow + x_fast = 1`.
fn balance_lp() -> (LinearProgram, VarId, VarId, VarId) {
    let mut lp = LinearProgram::new();
    let slow = lp.add_variable("x_slow");
    let fast = lp.add_variable("x_fast");
    let e = lp.add_variable("E");
    lp.set_objective(e, 1.0);
    lp.add_constraint("assign", [(slow, 1.0), (fast, 1.0)], Relation::Eq, 1.0);
    lp.add_constraint("cap_slow", [(slow, 8.0), (e, -1.0)], Relation::Le, 0.0);
    lp.add_constraint("cap_fast", [(fast, 4.0), (e, -1.0)], Relation::Le, 0.0);
    (lp, slow, fast, e)
}

#[test]
fn balanced_two_core_lp() {
    let (lp, slow, fast, e) = balance_lp();
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective_value - 8.0 / 3.0).abs() < 1e-9);
    assert!((sol.value(e) - 8.0 / 3.0).abs() < 1e-9);
    assert!((sol.value(fast) - 2.0 / 3.0).abs() < 1e-9);
    assert!((sol.value(slow) - 1.0 / 3.0).abs() < 1e-9);
}

/// `n` unit jobs spread over `m` unit cores with every job also bounded by `E`:
/// the slack basis is fully degenerate and the optimum is `n / m`.
#[test]
fn degenerate_load_balance() {
    let (n, m) = (60, 7);
    let mut lp = LinearProgram::new();
    let e = lp.add_variable("E");
    lp.set_objective(e, 1.0);
    let x: Vec<Vec<VarId>> = (0..n).map(|j| (0..m).map(|k| lp.add_variable(format!("x_{j}_{k}"))).collect()).collect();
    for (j, row) in x.iter().enumerate() {
        lp.add_constraint(format!("assign_{j}"), row.iter().map(|&v| (v, 1.0)), Relation::Eq, 1.0);
        lp.add_constraint(format!("job_{j}"), row.iter().map(|&v| (v, 1.0)).chain([(e, -1.0)]), Relation::Le, 0.0);
    }
    for k in 0..m {
        lp.add_constraint(format!("cap_{k}"), x.iter().map(|row| (row[k], 1.0)).chain([(e, -1.0)]), Relation::Le, 0.0);
    }
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective_value - n as f64 / m as f64).abs() < 1e-9);
    assert!(lp.max_violation(&sol.values) <= FEAS_TOL);
}

#[test]
fn lone_nonnegative_variable() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x");
    lp.set_objective(x, 1.0);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert_eq!(sol.objective_value, 0.0);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x");
    lp.set_objective(x, 1.0);
    lp.add_constraint("lo", [(x, 1.0)], Relation::Ge, 1.0);
    lp.add_constraint("hi", [(x, 1.0)], Relation::Le, 0.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn descending_ray_is_unbounded() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x");
    let y = lp.add_variable("y");
    lp.set_objective(x, -1.0);
    lp.add_constraint("r", [(x, 1.0), (y, -1.0)], Relation::Le, 2.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn pivot_budget_is_enforced() {
    let (lp, ..) = balance_lp();
    let err = solve_lp_with(&lp, &SolveOptions { max_pivots: 1, refactor_interval: 64 }).unwrap_err();
    assert!(matches!(err, LpError::IterationLimit(1)));
}

#[test]
fn malformed_programs_are_rejected() {
    assert!(matches!(solve_lp(&LinearProgram::new()), Err(LpError::Malformed(_))));
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x");
    lp.add_constraint("bad", [(x, 1.0)], Relation::Le, f64::INFINITY);
    assert!(matches!(solve_lp(&lp), Err(LpError::Malformed(_))));
}

#[test]
fn repeated_terms_are_merged() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable("x");
    let y = lp.add_variable("y");
    lp.add_constraint("r", [(y, 1.0), (x, 2.0), (x, -2.0), (y, 1.0)], Relation::Le, 1.0);
    assert_eq!(lp.constraints()[0].terms, vec![(y, 2.0)]);
}

#[test]
fn export_has_one_line_per_row() {
    let (lp, ..) = balance_lp();
    let text = export_lp(&lp);
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("obj:")).count(), 1);
    for name in ["assign:", "cap_slow:", "cap_fast:"] {
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(name)).count(), 1, "{text}");
    }
    assert!(text.contains("Subject To") && text.contains("Bounds") && text.ends_with("End\n"));
}

#[test]
fn export_round_trips() {
    let (lp, ..) = balance_lp();
    let back = parse_lp(&export_lp(&lp)).unwrap();
    assert_same_program(&lp, &back);
    assert_eq!(solve_lp(&back).unwrap().objective_value, solve_lp(&lp).unwrap().objective_value);
}

#[test]
fn long_rows_wrap_and_still_parse() {
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..20).map(|i| lp.add_variable(format!("v{i}"))).collect();
    lp.add_constraint("wide", vars.iter().map(|&v| (v, 0.1 * (v.0 as f64 + 1.0))), Relation::Ge, 3.0);
    let text = export_lp(&lp);
    assert!(text.lines().all(|l| l.len() < 120));
    assert_same_program(&lp, &parse_lp(&text).unwrap());
}

#[test]
fn parser_reports_line_numbers() {
    let err = parse_lp("Minimize\n obj: x\nSubject To\n c1: x <= \nEnd\n").unwrap_err();
    assert!(matches!(err, LpError::Parse { .. }), "{err}");
    let err = parse_lp("Maximize\n obj: x\nEnd\n").unwrap_err();
    assert!(matches!(err, LpError::Parse { line: 1, .. }), "{err}");
}

#[test]
fn parser_accepts_hand_written_text() {
    let text = "\\ comment\nMinimize\n obj: 2x + 3 y\nSubject To\n c1: x + y >= 1\n -x\n + 2 y <= 4\nBounds\n 0 <= x\n y <= 5\nEnd\n";
    let lp = parse_lp(text).unwrap();
    assert_eq!(lp.num_variables(), 2);
    assert_eq!(lp.num_constraints(), 3);
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.objective_value - 2.0).abs() < 1e-9);
}

/// Compares rows by name and columns by variable name.
fn assert_same_program(a: &LinearProgram, b: &LinearProgram) {
    assert_eq!(a.num_variables(), b.num_variables());
    assert_eq!(a.num_constraints(), b.num_constraints());
    let name_of = |lp: &LinearProgram, v: VarId| lp.variable_names()[v.0].clone();
    for (j, name) in a.variable_names().iter().enumerate() {
        let k = b.variable(name).expect("variable survives");
        assert_eq!(a.objective()[j], b.objective()[k.0]);
    }
    for row in a.constraints() {
        let other = b.constraints().iter().find(|r| r.name == row.name).expect("row survives");
        assert_eq!(row.relation, other.relation);
        assert_eq!(row.rhs, other.rhs);
        let mut ta: Vec<(String, f64)> = row.terms.iter().map(|&(v, c)| (name_of(a, v), c)).collect();
        let mut tb: Vec<(String, f64)> = other.terms.iter().map(|&(v, c)| (name_of(b, v), c)).collect();
        ta.sort_by(|x, y| x.0.cmp(&y.0));
        tb.sort_by(|x, y| x.0.cmp(&y.0));
        assert_eq!(ta, tb);
    }
}

/// Exhaustive vertex search: every choice of `n` tight constraints among the rows
/// and the non-negativity bounds. Returns `None` for an infeasible program.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_variables();
    let mut hyperplanes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(v, c) in &row.terms {
            a[v.0] = c;
        }
        hyperplanes.push((a, row.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        hyperplanes.push((a, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    loop {
        if let Some(x) = solve_dense(&choice.iter().map(|&h| hyperplanes[h].clone()).collect::<Vec<_>>()) {
            if lp.max_violation(&x) <= 1e-9 {
                let z = lp.objective_value(&x);
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
        // Next combination in lexicographic order.
        let total = hyperplanes.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < total - n + i {
                choice[i] += 1;
                for k in i + 1..n {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_dense(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=4).prop_flat_map(|n| {
        let row = (prop::collection::vec(-5i32..=5, n), 0u8..3, -10i32..=10);
        (prop::collection::vec(-5i32..=5, n), prop::collection::vec(row, 1..=4)).prop_map(move |(obj, rows)| {
            let mut lp = LinearProgram::new();
            let vars: Vec<VarId> = (0..n).map(|j| lp.add_variable(format!("x{j}"))).collect();
            for (j, c) in obj.iter().enumerate() {
                lp.set_objective(vars[j], *c as f64);
            }
            for (r, (coefs, rel, rhs)) in rows.into_iter().enumerate() {
                let relation = [Relation::Le, Relation::Ge, Relation::Eq][rel as usize];
                let terms = coefs.iter().enumerate().map(|(j, &c)| (vars[j], c as f64));
                lp.add_constraint(format!("r{r}"), terms, relation, rhs as f64);
            }
            // Keeps the feasible region bounded so the oracle is complete.
            lp.add_constraint("box", vars.iter().map(|&v| (v, 1.0)), Relation::Le, 20.0);
            lp
        })
    })
}

proptest! {
    #[test]
    fn simplex_matches_vertex_enumeration(lp in small_lp()) {
        let sol = solve_lp(&lp).unwrap();
        match vertex_oracle(&lp) {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(z) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective_value - z).abs() <= OPT_TOL * (1.0 + z.abs()),
                    "simplex {} vs oracle {}", sol.objective_value, z);
                prop_assert!(lp.max_violation(&sol.values) <= FEAS_TOL);
            }
        }
    }

    #[test]
    fn solving_is_deterministic(lp in small_lp()) {
        // Debug output compares NaN objectives of non-optimal solutions too.
        prop_assert_eq!(format!("{:?}", solve_lp(&lp).unwrap()), format!("{:?}", solve_lp(&lp).unwrap()));
    }

    #[test]
    fn export_round_trip_preserves_program(lp in small_lp()) {
        let back = parse_lp(&export_lp(&lp)).unwrap();
        assert_same_program(&lp, &back);
    }
}
