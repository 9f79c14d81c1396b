//! Two-phase primal revised simplex.
//!
//! Every row gets a unit column: a slack for inequalities and an artificial where
//! the slack basis would be infeasible (always, for equalities). Phase one drives
//! the artificials to zero; in phase two they may stay basic but are held at zero
//! by the ratio test. The basis inverse is kept as a sparse LU plus a product-form
//! eta file.
//!
//! Both phases run on a copy whose inequalities are loosened by a tiny
//! row-dependent amount, which breaks the ties that make the slack basis stall.
//! The exact right-hand side is then restored and any basic variable pushed out
//! of bounds is repaired by dual simplex pivots.
//!
//! Pricing uses Devex weights over incrementally updated reduced costs, with
//! Harris' two-pass ratio test. After a long run of degenerate pivots both switch
//! to Bland's rule until the objective moves again.

use super::lu::{LuFactors, Singular};
use super::{LinearProgram, LpSolution, LpStatus, Relation, SolveOptions, FEAS_TOL};
use crate::error::LpError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const ETA_DROP: f64 = 1e-14;
/// Devex weights restart from one once any grows past this.
const DEVEX_RESET: f64 = 1e6;
/// Relative loosening of inequality rows while the perturbed program is solved.
const PERTURBATION: f64 = 1e-6;
const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    rows: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    kind: Vec<Kind>,
    unit_cols: Vec<Vec<usize>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    x: Vec<f64>,
    lu: LuFactors,
    etas: Vec<Eta>,
    work: Vec<f64>,
    options: &'a SolveOptions,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
    /// Row-wise copy of every column, for pivot rows.
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    /// Reduced costs, updated by pivot rows and recomputed on refactorization.
    d: Vec<f64>,
    /// Devex reference weights.
    weight: Vec<f64>,
    acc: Vec<f64>,
    touched: Vec<usize>,
}

/// Deterministic spread in `[1, 2)` so that perturbed rows do not tie.
fn spread(i: usize) -> f64 {
    let mut z = (i as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    1.0 + (z >> 11) as f64 / (1u64 << 53) as f64
}

fn status_only(status: LpStatus, pivots: usize) -> LpSolution {
    LpSolution { status, objective_value: f64::NAN, values: Vec::new(), pivots }
}

pub(super) fn solve(lp: &LinearProgram, options: &SolveOptions) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(lp, options);

    // Loosen every inequality a little so the starting slack basis is not
    // degenerate. Infeasibility of the loosened program implies infeasibility of
    // the original; a final cleanup restores the exact right-hand side.
    let original_b = s.b.clone();
    for (i, row) in lp.constraints().iter().enumerate() {
        let delta = PERTURBATION * spread(i) * (1.0 + s.b[i].abs());
        match row.relation {
            Relation::Le => s.b[i] += delta,
            Relation::Ge => s.b[i] -= delta,
            Relation::Eq => {}
        }
    }
    s.refactor()?;

    let phase1_cost: Vec<f64> = s.kind.iter().map(|&k| if k == Kind::Artificial { 1.0 } else { 0.0 }).collect();
    let needs_phase1 = (0..s.rows).any(|p| s.kind[s.basis[p]] == Kind::Artificial && s.x[p] > 0.0);
    if needs_phase1 {
        if let PhaseEnd::Unbounded = s.run_phase(&phase1_cost, false)? {
            return Err(LpError::Numerical("phase one reported an unbounded ray".into()));
        }
        s.refactor()?;
        let b_scale = 1.0 + s.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if s.artificial_mass() > 1e-7 * b_scale {
            return Ok(status_only(LpStatus::Infeasible, s.pivots));
        }
    }

    let mut phase2_cost = vec![0.0; s.kind.len()];
    phase2_cost[..lp.num_variables()].copy_from_slice(lp.objective());
    if let PhaseEnd::Unbounded = s.run_phase(&phase2_cost, true)? {
        return Ok(status_only(LpStatus::Unbounded, s.pivots));
    }

    s.b = original_b;
    let mut settled = false;
    for _ in 0..4 {
        s.refactor()?;
        if !s.dual_cleanup(&phase2_cost)? {
            return Ok(status_only(LpStatus::Infeasible, s.pivots));
        }
        if let PhaseEnd::Unbounded = s.run_phase(&phase2_cost, true)? {
            return Ok(status_only(LpStatus::Unbounded, s.pivots));
        }
        s.refactor()?;
        s.reset_reduced(&phase2_cost);
        if s.price().is_none() && s.worst_infeasibility().is_none() {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(LpError::Numerical("pricing did not settle after refactorization".into()));
    }

    let mut values = vec![0.0; lp.num_variables()];
    for (p, &j) in s.basis.iter().enumerate() {
        if j < values.len() {
            values[j] = s.x[p];
        }
    }
    for v in &mut values {
        if *v < 0.0 && *v > -FEAS_TOL {
            *v = 0.0;
        }
    }
    let violation = lp.max_violation(&values);
    if violation > FEAS_TOL {
        return Err(LpError::Numerical(format!("optimal basis violates a row by {violation:e}")));
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective_value: lp.objective_value(&values), values, pivots: s.pivots })
}

impl<'a> Simplex<'a> {
    fn new(lp: &LinearProgram, options: &'a SolveOptions) -> Self {
        let rows = lp.num_constraints();
        let n = lp.num_variables();

        // Power-of-two row scaling keeps the arithmetic exact while bringing every
        // row's largest coefficient near 1.
        let scale: Vec<f64> = lp
            .constraints()
            .iter()
            .map(|row| {
                let big = row.terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
                if big > 0.0 {
                    (-big.log2().round()).exp2()
                } else {
                    1.0
                }
            })
            .collect();

        let mut counts = vec![0usize; n];
        for row in lp.constraints() {
            for &(v, _) in &row.terms {
                counts[v.0] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + 2 * rows + 1);
        col_start.push(0);
        for c in &counts {
            col_start.push(col_start.last().unwrap() + c);
        }
        let nnz = *col_start.last().unwrap();
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start[..n].to_vec();
        for (i, row) in lp.constraints().iter().enumerate() {
            for &(v, c) in &row.terms {
                col_row[fill[v.0]] = i;
                col_val[fill[v.0]] = c * scale[i];
                fill[v.0] += 1;
            }
        }

        let mut kind = vec![Kind::Structural; n];
        let mut unit_cols = vec![Vec::new(); rows];
        let mut basis = Vec::with_capacity(rows);
        let mut b = Vec::with_capacity(rows);
        for (i, row) in lp.constraints().iter().enumerate() {
            let rhs = row.rhs * scale[i];
            b.push(rhs);
            let mut add_unit = |k: Kind, sign: f64| {
                kind.push(k);
                col_row.push(i);
                col_val.push(sign);
                col_start.push(col_row.len());
                unit_cols[i].push(kind.len() - 1);
                kind.len() - 1
            };
            let slack_sign = match row.relation {
                Relation::Le => Some(1.0),
                Relation::Ge => Some(-1.0),
                Relation::Eq => None,
            };
            let mut basic = None;
            if let Some(sign) = slack_sign {
                let j = add_unit(Kind::Slack, sign);
                if rhs * sign >= 0.0 {
                    basic = Some(j);
                }
            }
            let basic = match basic {
                Some(j) => j,
                None => add_unit(Kind::Artificial, if rhs >= 0.0 { 1.0 } else { -1.0 }),
            };
            basis.push(basic);
        }
        let total = kind.len();
        let mut row_start = vec![0usize; rows + 1];
        for &i in &col_row {
            row_start[i + 1] += 1;
        }
        for i in 0..rows {
            row_start[i + 1] += row_start[i];
        }
        let mut row_col = vec![0usize; col_row.len()];
        let mut row_val = vec![0.0; col_row.len()];
        let mut fill = row_start[..rows].to_vec();
        for j in 0..total {
            for k in col_start[j]..col_start[j + 1] {
                let i = col_row[k];
                row_col[fill[i]] = j;
                row_val[fill[i]] = col_val[k];
                fill[i] += 1;
            }
        }
        let mut pos_of = vec![NONE; kind.len()];
        for (p, &j) in basis.iter().enumerate() {
            pos_of[j] = p;
        }

        Simplex {
            rows,
            col_start,
            col_row,
            col_val,
            kind,
            unit_cols,
            b,
            basis,
            pos_of,
            x: vec![0.0; rows],
            lu: LuFactors::default(),
            etas: Vec::new(),
            work: Vec::with_capacity(rows),
            options,
            pivots: 0,
            degenerate_run: 0,
            bland: false,
            row_start,
            row_col,
            row_val,
            d: vec![0.0; total],
            weight: vec![1.0; total],
            acc: vec![0.0; total],
            touched: Vec::new(),
        }
    }

    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, z) = (self.col_start[j], self.col_start[j + 1]);
        (&self.col_row[a..z], &self.col_val[a..z])
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self
                .basis
                .iter()
                .map(|&j| {
                    let (r, v) = self.column(j);
                    r.iter().copied().zip(v.iter().copied()).collect()
                })
                .collect();
            match LuFactors::factorize(self.rows, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    break;
                }
                Err(singular) => self.repair(singular)?,
            }
        }
        self.etas.clear();
        let mut x = self.b.clone();
        self.lu.solve(&mut x, &mut self.work);
        self.x = x;
        Ok(())
    }

    /// Swaps dependent basis columns for unit columns of the uncovered rows.
    fn repair(&mut self, singular: Singular) -> Result<(), LpError> {
        for (&p, &row) in singular.columns.iter().zip(&singular.rows) {
            let Some(&unit) = self.unit_cols[row].iter().find(|&&j| self.pos_of[j] == NONE) else {
                return Err(LpError::Numerical(format!("singular basis, row {row} has no free unit column")));
            };
            self.pos_of[self.basis[p]] = NONE;
            self.basis[p] = unit;
            self.pos_of[unit] = p;
        }
        Ok(())
    }

    fn artificial_mass(&self) -> f64 {
        (0..self.rows).filter(|&p| self.kind[self.basis[p]] == Kind::Artificial).map(|p| self.x[p].max(0.0)).sum()
    }

    fn ftran(&mut self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.rows];
        let (r, val) = self.column(j);
        for (&i, &a) in r.iter().zip(val) {
            v[i] = a;
        }
        self.lu.solve(&mut v, &mut self.work);
        for eta in &self.etas {
            let vr = v[eta.pos] / eta.pivot;
            v[eta.pos] = vr;
            if vr != 0.0 {
                for &(i, a) in &eta.others {
                    v[i] -= a * vr;
                }
            }
        }
        v
    }

    /// Simplex multipliers `y` with `B^T y = c_B`.
    fn duals(&mut self, cost: &[f64]) -> Vec<f64> {
        let c: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.btran(c)
    }

    /// Solves `B^T y = c` for `c` indexed by basis position.
    fn btran(&mut self, mut c: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut acc = c[eta.pos];
            for &(i, a) in &eta.others {
                acc -= a * c[i];
            }
            c[eta.pos] = acc / eta.pivot;
        }
        self.lu.solve_transpose(&mut c, &mut self.work);
        c
    }

    /// Recomputes every reduced cost from fresh simplex multipliers.
    fn reset_reduced(&mut self, cost: &[f64]) {
        let y = self.duals(cost);
        for j in 0..self.kind.len() {
            self.d[j] = if self.pos_of[j] != NONE {
                0.0
            } else {
                let (r, v) = self.column(j);
                r.iter().zip(v).fold(cost[j], |d, (&i, &a)| d - y[i] * a)
            };
        }
    }

    /// Entering column with negative reduced cost, or `None` at optimality:
    /// the largest `d^2 / w` under Devex weights `w`, or the first candidate in
    /// Bland mode.
    fn price(&self) -> Option<usize> {
        let eligible = |j: usize| self.pos_of[j] == NONE && self.kind[j] != Kind::Artificial;
        if self.bland {
            return (0..self.kind.len()).find(|&j| eligible(j) && self.d[j] < -DUAL_TOL);
        }
        let mut best = None;
        let mut best_score = 0.0;
        for j in (0..self.kind.len()).filter(|&j| eligible(j)) {
            let d = self.d[j];
            if d < -DUAL_TOL && d * d > best_score * self.weight[j] {
                best_score = d * d / self.weight[j];
                best = Some(j);
            }
        }
        best
    }

    /// Row `r` of `B^-1 A` over all columns, accumulated sparsely into `acc`.
    fn pivot_row(&mut self, r: usize) {
        let mut unit = vec![0.0; self.rows];
        unit[r] = 1.0;
        let rho = self.btran(unit);
        for (i, &w) in rho.iter().enumerate() {
            if w.abs() <= ETA_DROP {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                let j = self.row_col[k];
                if self.acc[j] == 0.0 {
                    self.touched.push(j);
                }
                self.acc[j] += w * self.row_val[k];
                if self.acc[j] == 0.0 {
                    // Keep it listed; an exact zero is harmless.
                    self.acc[j] = f64::MIN_POSITIVE;
                }
            }
        }
    }

    /// Updates reduced costs for entering `q` at position `r` (before the swap).
    fn update_reduced(&mut self, r: usize, q: usize, pivot: f64) {
        self.pivot_row(r);
        let step = self.d[q] / pivot;
        let leaving = self.basis[r];
        let wq = self.weight[q];
        for idx in 0..self.touched.len() {
            let j = self.touched[idx];
            if self.pos_of[j] == NONE || j == leaving {
                self.d[j] -= step * self.acc[j];
                let ratio = self.acc[j] / pivot;
                self.weight[j] = self.weight[j].max(ratio * ratio * wq);
            }
            self.acc[j] = 0.0;
        }
        self.touched.clear();
        self.d[q] = 0.0;
        self.weight[leaving] = (wq / (pivot * pivot)).max(1.0);
        if self.weight[leaving] > DEVEX_RESET || self.weight.iter().any(|&w| w > DEVEX_RESET) {
            self.weight.iter_mut().for_each(|w| *w = 1.0);
        }
    }

    /// Leaving position and step length, or `None` when the ray is unbounded.
    ///
    /// Harris' test: the first pass finds the largest step that keeps every basic
    /// variable within `PRIMAL_TOL` of its bound, the second takes the largest pivot
    /// among rows that block no later than that.
    fn ratio_test(&self, alpha: &[f64], phase2: bool) -> Option<(usize, f64)> {
        let held_at_zero = |p: usize| phase2 && self.kind[self.basis[p]] == Kind::Artificial;
        let blocking = |p: usize| alpha[p] > PIVOT_TOL || (held_at_zero(p) && alpha[p] < -PIVOT_TOL);
        // Distance to the bound along the ray, never negative.
        let room = |p: usize| if alpha[p] > 0.0 { self.x[p].max(0.0) } else { (-self.x[p]).max(0.0) };

        let mut theta_max = f64::INFINITY;
        for p in (0..self.rows).filter(|&p| blocking(p)) {
            theta_max = theta_max.min((room(p) + PRIMAL_TOL) / alpha[p].abs());
        }
        if theta_max == f64::INFINITY {
            return None;
        }

        let mut chosen: Option<(usize, f64)> = None;
        for p in (0..self.rows).filter(|&p| blocking(p)) {
            let step = room(p) / alpha[p].abs();
            if step > theta_max {
                continue;
            }
            chosen = match chosen {
                None => Some((p, step)),
                Some((c, cs)) => {
                    let better = if self.bland {
                        step < cs - 1e-12 || (step <= cs + 1e-12 && self.basis[p] < self.basis[c])
                    } else {
                        alpha[p].abs() > alpha[c].abs()
                    };
                    if better {
                        Some((p, step))
                    } else {
                        Some((c, cs))
                    }
                }
            };
        }
        debug_assert!(chosen.is_some());
        chosen
    }

    fn run_phase(&mut self, cost: &[f64], phase2: bool) -> Result<PhaseEnd, LpError> {
        let total_cols = self.kind.len();
        self.reset_reduced(cost);
        loop {
            let Some(q) = self.price() else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.ftran(q);
            let Some((r, theta)) = self.ratio_test(&alpha, phase2) else {
                return Ok(PhaseEnd::Unbounded);
            };
            self.update_reduced(r, q, alpha[r]);
            self.pivot(q, r, &alpha, theta);
            if self.pivots >= self.options.max_pivots {
                return Err(LpError::IterationLimit(self.options.max_pivots));
            }
            if theta <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > 10 * (self.rows + total_cols) {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }
            if self.etas.len() >= self.options.refactor_interval {
                self.refactor()?;
                self.reset_reduced(cost);
            }
        }
    }

    /// Moves `theta` along the ray of entering column `q` and swaps it into position `r`.
    fn pivot(&mut self, q: usize, r: usize, alpha: &[f64], theta: f64) {
        if theta != 0.0 {
            for (x, a) in self.x.iter_mut().zip(alpha) {
                *x -= theta * a;
            }
        }
        self.x[r] = theta;
        let leaving = self.basis[r];
        self.pos_of[leaving] = NONE;
        self.basis[r] = q;
        self.pos_of[q] = r;
        self.etas.push(Eta {
            pos: r,
            pivot: alpha[r],
            others: alpha
                .iter()
                .enumerate()
                .filter(|&(i, a)| i != r && a.abs() > ETA_DROP)
                .map(|(i, &a)| (i, a))
                .collect(),
        });
        self.pivots += 1;
    }

    /// Basis position furthest outside its bound: negative values, and artificials
    /// away from zero.
    fn worst_infeasibility(&self) -> Option<usize> {
        let mut worst = None;
        let mut amount = PRIMAL_TOL;
        for p in 0..self.rows {
            let gap = if self.kind[self.basis[p]] == Kind::Artificial { self.x[p].abs() } else { -self.x[p] };
            if gap > amount {
                amount = gap;
                worst = Some(p);
            }
        }
        worst
    }

    /// Dual simplex pivots from a dual feasible basis until it is primal feasible.
    /// Returns `false` when some row proves the program infeasible.
    fn dual_cleanup(&mut self, cost: &[f64]) -> Result<bool, LpError> {
        while let Some(p) = self.worst_infeasibility() {
            // Values below zero must rise; an artificial above zero must fall.
            let rise = self.x[p] < 0.0;
            let y = self.duals(cost);
            let mut unit = vec![0.0; self.rows];
            unit[p] = 1.0;
            let rho = self.btran(unit);
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..self.kind.len() {
                if self.pos_of[j] != NONE || self.kind[j] == Kind::Artificial {
                    continue;
                }
                let (r, v) = self.column(j);
                let (mut a, mut d) = (0.0, cost[j]);
                for (&i, &c) in r.iter().zip(v) {
                    a += rho[i] * c;
                    d -= y[i] * c;
                }
                let a = if rise { -a } else { a };
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = d.max(0.0) / a;
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && a > ba),
                };
                if better {
                    best = Some((j, ratio, a));
                }
            }
            let Some((q, _, _)) = best else {
                return Ok(false);
            };
            let alpha = self.ftran(q);
            let theta = self.x[p] / alpha[p];
            self.pivot(q, p, &alpha, theta);
            if self.pivots >= self.options.max_pivots {
                return Err(LpError::IterationLimit(self.options.max_pivots));
            }
            if self.etas.len() >= self.options.refactor_interval {
                self.refactor()?;
            }
        }
        Ok(true)
    }
}
