//! The four linear relaxations and their decoding.
//!
//! | builder | granularity | objective | variables |
//! |---|---|---|---|
//! | [`build_indivisible_makespan_lp`] | coflow | `E` | `x[k,f]`, `C[f]`, `E` |
//! | [`build_indivisible_twct_lp`] | coflow | `sum w_f C_f` | `x[k,f,l]`, `C[f]` |
//! | [`build_divisible_makespan_lp`] | flow | `E` | `x[k,i,j,f]`, `C[i,j,f]`, `E` |
//! | [`build_divisible_twct_lp`] | flow | `sum w_f C_f` | `x[k,i,j,f,l]`, `C[i,j,f]`, `C[f]` |
//!
//! The completion-time relaxations index assignments by time interval `l` of a
//! [`Horizon`]: interval `l` covers `(2^(l-1), 2^l]`. Builders return a
//! [`Relaxation`], which keeps the variable layout needed by [`decode_solution`].

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{DecodeError, Error, LpError};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation, VarId};
use crate::model::{port_loads, CoflowId, CoflowInstance, CoreId, FlowKey, Mode, Objective, Problem};

/// Largest LP the builders hand to the internal solver.
pub const MAX_LP_VARIABLES: usize = 200_000;

/// Tolerance on the assignment sums of a decoded solution.
pub const DECODE_TOL: f64 = 1e-5;

/// A schedulable unit: a whole coflow (indivisible mode) or a single flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Item {
    Coflow(CoflowId),
    Flow(FlowKey),
}

impl Item {
    pub fn coflow(self) -> CoflowId {
        match self {
            Item::Coflow(f) => f,
            Item::Flow(key) => key.coflow,
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Coflow(id) => write!(f, "coflow {id}"),
            Item::Flow(key) => write!(f, "flow {key}"),
        }
    }
}

/// The items of `instance` at the granularity of `mode`, in id order.
pub fn items(instance: &CoflowInstance, mode: Mode) -> Vec<Item> {
    match mode {
        Mode::Indivisible => instance.coflows().iter().map(|c| Item::Coflow(c.id)).collect(),
        Mode::Divisible => instance.flows().map(|(key, _)| Item::Flow(key)).collect(),
    }
}

/// Interval boundaries `tau_0 = 1 < tau_1 = 2 < ... < tau_L = 2^L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Horizon {
    levels: u32,
}

impl Horizon {
    pub fn new(levels: u32) -> Self {
        assert!((1..=60).contains(&levels), "horizon must have between 1 and 60 intervals");
        Horizon { levels }
    }

    /// `L`, the number of intervals.
    pub fn levels(self) -> u32 {
        self.levels
    }

    pub fn tau(self, l: u32) -> f64 {
        assert!(l <= self.levels);
        (l as f64).exp2()
    }

    pub fn boundaries(self) -> Vec<f64> {
        (0..=self.levels).map(|l| self.tau(l)).collect()
    }
}

/// `L = ceil(log2(max_f r_f + max port total / s_min))`, at least 1.
pub fn compute_horizon(instance: &CoflowInstance) -> Horizon {
    let span = instance.max_release() + port_loads(instance).max_port_total() / instance.min_speed();
    let mut l = span.log2().ceil().max(1.0) as u32;
    // log2 may be off by an ulp near powers of two.
    while (l as f64).exp2() < span {
        l += 1;
    }
    while l > 1 && ((l - 1) as f64).exp2() >= span {
        l -= 1;
    }
    Horizon::new(l)
}

/// Smallest power of two `c >= 1` such that scaling every size and release by `c`
/// makes every positive per-port transfer time at least one time unit.
pub fn time_normalization(instance: &CoflowInstance) -> f64 {
    let t = instance.min_port_transfer_time();
    let mut c = 1.0;
    while t * c < 1.0 {
        c *= 2.0;
    }
    c
}

/// Key of an assignment fraction. `level` is 0 for the makespan relaxations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct XKey {
    pub item: Item,
    pub level: u32,
    pub core: CoreId,
}

/// An LP together with the meaning of its variables.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub problem: Problem,
    pub horizon: Option<Horizon>,
    pub lp: LinearProgram,
    x: Vec<(XKey, VarId)>,
    item_completion: Vec<(Item, VarId)>,
    coflow_completion: Vec<(CoflowId, VarId)>,
    makespan: Option<VarId>,
    items: Vec<Item>,
}

impl Relaxation {
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    /// Solves with the internal simplex. Programs above [`MAX_LP_VARIABLES`] are
    /// refused; export those instead.
    pub fn solve(&self) -> Result<FractionalAssignment, Error> {
        too_large(self.lp.num_variables())?;
        let solution = solve_lp(&self.lp)?;
        if solution.status != LpStatus::Optimal {
            return Err(Error::LpStatus(solution.status));
        }
        Ok(decode_solution(self, &solution)?)
    }
}

/// Typed view of an optimal relaxation solution.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    pub mode: Mode,
    pub horizon: Option<Horizon>,
    /// Positive fractions only, clamped to `[0, 1]`.
    pub x: BTreeMap<XKey, f64>,
    /// `C_f` per coflow item or `C_ijf` per flow item.
    pub completion: BTreeMap<Item, f64>,
    /// `C_f` per coflow. For the divisible makespan relaxation, which has no coflow
    /// variable, this is the largest `C_ijf` of the coflow.
    pub coflow_completion: BTreeMap<CoflowId, f64>,
    pub makespan: Option<f64>,
    pub objective: f64,
}

impl FractionalAssignment {
    pub fn horizon_indexed(&self) -> bool {
        self.horizon.is_some()
    }

    pub fn items(&self) -> impl Iterator<Item = Item> + '_ {
        self.completion.keys().copied()
    }

    /// Fractions of `item`, ordered by level and then core.
    pub fn entries(&self, item: Item) -> impl Iterator<Item = (XKey, f64)> + '_ {
        let lo = XKey { item, level: 0, core: CoreId(0) };
        let hi = XKey { item, level: u32::MAX, core: CoreId(u32::MAX) };
        self.x.range(lo..=hi).map(|(k, v)| (*k, *v))
    }

    /// `sum_l x[k, item, l]` for every core holding part of `item`.
    pub fn core_marginals(&self, item: Item) -> BTreeMap<CoreId, f64> {
        let mut out = BTreeMap::new();
        for (key, v) in self.entries(item) {
            *out.entry(key.core).or_insert(0.0) += v;
        }
        out
    }

    pub fn item_mass(&self, item: Item) -> f64 {
        self.entries(item).map(|(_, v)| v).sum()
    }
}

fn too_large(variables: usize) -> Result<(), LpError> {
    if variables > MAX_LP_VARIABLES {
        return Err(LpError::TooLarge { variables, cap: MAX_LP_VARIABLES });
    }
    Ok(())
}

struct Builder {
    lp: LinearProgram,
    x: Vec<(XKey, VarId)>,
}

impl Builder {
    fn x(&mut self, item: Item, core: CoreId, level: u32) -> VarId {
        let name = match (item, level) {
            (Item::Coflow(f), 0) => format!("x_k{core}_f{f}"),
            (Item::Coflow(f), l) => format!("x_k{core}_f{f}_l{l}"),
            (Item::Flow(k), 0) => format!("x_k{core}_i{}_j{}_f{}", k.src, k.dst, k.coflow),
            (Item::Flow(k), l) => format!("x_k{core}_i{}_j{}_f{}_l{l}", k.src, k.dst, k.coflow),
        };
        let v = self.lp.add_variable(name);
        self.x.push((XKey { item, level, core }, v));
        v
    }
}

fn item_tag(item: Item) -> String {
    match item {
        Item::Coflow(f) => format!("f{f}"),
        Item::Flow(k) => format!("i{}_j{}_f{}", k.src, k.dst, k.coflow),
    }
}

/// Per item, its load on each input port and each output port (zero-based ports).
struct ItemLoads {
    input: Vec<Vec<(usize, f64)>>,
    output: Vec<Vec<(usize, f64)>>,
}

fn item_loads(instance: &CoflowInstance, items: &[Item]) -> ItemLoads {
    let loads = port_loads(instance);
    let mut input = Vec::with_capacity(items.len());
    let mut output = Vec::with_capacity(items.len());
    for &item in items {
        match item {
            Item::Coflow(f) => {
                let pos = instance.coflow_index(f).expect("item of this instance");
                let nz = |row: &[f64]| row.iter().enumerate().filter(|e| *e.1 > 0.0).map(|(p, &l)| (p, l)).collect();
                input.push(nz(&loads.input[pos]));
                output.push(nz(&loads.output[pos]));
            }
            Item::Flow(key) => {
                let d = instance.flow_size(key).expect("item of this instance");
                input.push(vec![(key.src.index(), d)]);
                output.push(vec![(key.dst.index(), d)]);
            }
        }
    }
    ItemLoads { input, output }
}

/// Rows `sum_k (load / s_k) x[k, item, *] - C_item <= -release`, one per loaded port.
/// An item's (port, load) pairs on the input and output side.
type PortLoads<'a> = (&'a [(usize, f64)], &'a [(usize, f64)]);

fn transfer_rows(
    b: &mut Builder,
    instance: &CoflowInstance,
    item: Item,
    vars: &[(CoreId, u32, VarId)],
    completion: VarId,
    loads: PortLoads<'_>,
    release: f64,
) {
    for (side, list) in [("in", loads.0), ("out", loads.1)] {
        for &(p, load) in list {
            let mut terms: Vec<(VarId, f64)> =
                vars.iter().map(|&(core, _, v)| (v, load / instance.core(core).expect("core").speed)).collect();
            terms.push((completion, -1.0));
            b.lp.add_constraint(format!("{side}_{}_p{}", item_tag(item), p + 1), terms, Relation::Le, -release);
        }
    }
}

/// Per-(port, core) capacity rows. With a horizon, rows are prefix sums up to each
/// level and bounded by `tau_l`; otherwise they are bounded by `E`.
fn capacity_rows(
    b: &mut Builder,
    instance: &CoflowInstance,
    item_vars: &[Vec<(CoreId, u32, VarId)>],
    loads: &ItemLoads,
    bound: Result<Horizon, VarId>,
) {
    let n_ports = instance.num_ports() as usize;
    for (side, per_item) in [("capin", &loads.input), ("capout", &loads.output)] {
        for core in instance.cores() {
            // (level, var, coefficient) per port.
            let mut by_port: Vec<Vec<(u32, VarId, f64)>> = vec![Vec::new(); n_ports];
            for (it, vars) in item_vars.iter().enumerate() {
                for &(p, load) in &per_item[it] {
                    for &(c, level, v) in vars {
                        if c == core.id {
                            by_port[p].push((level, v, load / core.speed));
                        }
                    }
                }
            }
            for (p, entries) in by_port.iter().enumerate() {
                if entries.is_empty() {
                    continue;
                }
                match bound {
                    Err(e) => {
                        let mut terms: Vec<(VarId, f64)> = entries.iter().map(|&(_, v, c)| (v, c)).collect();
                        terms.push((e, -1.0));
                        b.lp.add_constraint(format!("{side}_p{}_k{}", p + 1, core.id), terms, Relation::Le, 0.0);
                    }
                    Ok(h) => {
                        // Each item's levels sum to at most one, so a row whose full
                        // port load fits by tau_l can never bind, nor can later ones.
                        let full: f64 = entries.iter().filter(|e| e.0 == 1).map(|e| e.2).sum();
                        for l in 1..=h.levels() {
                            if full <= h.tau(l) {
                                break;
                            }
                            let terms = entries.iter().filter(|e| e.0 <= l).map(|&(_, v, c)| (v, c));
                            b.lp.add_constraint(
                                format!("{side}_p{}_k{}_l{l}", p + 1, core.id),
                                terms,
                                Relation::Le,
                                h.tau(l),
                            );
                        }
                    }
                }
            }
        }
    }
}

fn build(instance: &CoflowInstance, problem: Problem, horizon: Option<Horizon>) -> Relaxation {
    let items = items(instance, problem.mode);
    let m = instance.num_cores();
    let levels: Vec<u32> = match horizon {
        Some(h) => (1..=h.levels()).collect(),
        None => vec![0],
    };
    let x_count = m * items.len() * levels.len();
    let mut b = Builder { lp: LinearProgram::new(), x: Vec::with_capacity(x_count) };
    let mut item_vars: Vec<Vec<(CoreId, u32, VarId)>> = Vec::with_capacity(items.len());
    for &item in &items {
        let mut vars = Vec::with_capacity(m * levels.len());
        for core in instance.cores() {
            for &l in &levels {
                vars.push((core.id, l, b.x(item, core.id, l)));
            }
        }
        item_vars.push(vars);
    }
    let item_completion: Vec<(Item, VarId)> = items
        .iter()
        .map(|&item| {
            let name = match item {
                Item::Coflow(f) => format!("C_f{f}"),
                Item::Flow(k) => format!("C_i{}_j{}_f{}", k.src, k.dst, k.coflow),
            };
            (item, b.lp.add_variable(name))
        })
        .collect();
    let coflow_completion: Vec<(CoflowId, VarId)> = match (problem.mode, problem.objective) {
        (Mode::Indivisible, _) => item_completion.iter().map(|&(item, v)| (item.coflow(), v)).collect(),
        (Mode::Divisible, Objective::Twct) => {
            instance.coflows().iter().map(|c| (c.id, b.lp.add_variable(format!("C_f{}", c.id)))).collect()
        }
        (Mode::Divisible, Objective::Makespan) => Vec::new(),
    };
    let makespan = match problem.objective {
        Objective::Makespan => Some(b.lp.add_variable("E")),
        Objective::Twct => None,
    };

    match makespan {
        Some(e) => b.lp.set_objective(e, 1.0),
        None => {
            for (c, &(_, v)) in instance.coflows().iter().zip(&coflow_completion) {
                b.lp.set_objective(v, c.weight);
            }
        }
    }

    let loads = item_loads(instance, &items);
    for (it, &item) in items.iter().enumerate() {
        let tag = item_tag(item);
        b.lp.add_constraint(
            format!("assign_{tag}"),
            item_vars[it].iter().map(|&(_, _, v)| (v, 1.0)),
            Relation::Eq,
            1.0,
        );
        let release = match problem.objective {
            Objective::Makespan => 0.0,
            Objective::Twct => instance.coflow(item.coflow()).expect("coflow").release,
        };
        let completion = item_completion[it].1;
        let vars = item_vars[it].clone();
        transfer_rows(&mut b, instance, item, &vars, completion, (&loads.input[it], &loads.output[it]), release);
        match (makespan, horizon) {
            (Some(e), _) => {
                b.lp.add_constraint(format!("mk_{tag}"), [(completion, 1.0), (e, -1.0)], Relation::Le, 0.0);
            }
            (None, Some(h)) => {
                let mut terms: Vec<(VarId, f64)> = vars.iter().map(|&(_, l, v)| (v, h.tau(l - 1))).collect();
                terms.push((completion, -1.0));
                b.lp.add_constraint(format!("lb_{tag}"), terms, Relation::Le, 0.0);
            }
            (None, None) => unreachable!("completion-time relaxations carry a horizon"),
        }
    }
    if problem == Problem::DIV_TWCT {
        let coflow_var: BTreeMap<CoflowId, VarId> = coflow_completion.iter().copied().collect();
        for &(item, v) in &item_completion {
            b.lp.add_constraint(
                format!("link_{}", item_tag(item)),
                [(v, 1.0), (coflow_var[&item.coflow()], -1.0)],
                Relation::Le,
                0.0,
            );
        }
    }
    capacity_rows(&mut b, instance, &item_vars, &loads, horizon.ok_or_else(|| makespan.expect("makespan var")));

    Relaxation { problem, horizon, lp: b.lp, x: b.x, item_completion, coflow_completion, makespan, items }
}

/// Coflow-granularity makespan relaxation. Release times are ignored.
pub fn build_indivisible_makespan_lp(instance: &CoflowInstance) -> Relaxation {
    build(instance, Problem::INDIV_MAKESPAN, None)
}

/// Coflow-granularity completion-time relaxation over `horizon`.
pub fn build_indivisible_twct_lp(instance: &CoflowInstance, horizon: Horizon) -> Relaxation {
    build(instance, Problem::INDIV_TWCT, Some(horizon))
}

/// Flow-granularity makespan relaxation. Release times are ignored.
pub fn build_divisible_makespan_lp(instance: &CoflowInstance) -> Relaxation {
    build(instance, Problem::DIV_MAKESPAN, None)
}

/// Flow-granularity completion-time relaxation over `horizon`.
pub fn build_divisible_twct_lp(instance: &CoflowInstance, horizon: Horizon) -> Relaxation {
    build(instance, Problem::DIV_TWCT, Some(horizon))
}

/// Builds the relaxation for `problem`, computing the horizon when one is needed.
pub fn build_relaxation(instance: &CoflowInstance, problem: Problem) -> Relaxation {
    match problem.objective {
        Objective::Makespan => build(instance, problem, None),
        Objective::Twct => build(instance, problem, Some(compute_horizon(instance))),
    }
}

pub fn decode_solution(relaxation: &Relaxation, solution: &LpSolution) -> Result<FractionalAssignment, DecodeError> {
    if solution.status != LpStatus::Optimal {
        return Err(DecodeError::NotOptimal(solution.status));
    }
    let expected = relaxation.lp.num_variables();
    if solution.values.len() != expected {
        return Err(DecodeError::Shape { got: solution.values.len(), expected });
    }
    let value = |v: VarId| solution.values[v.0];

    let mut x = BTreeMap::new();
    let mut sums: BTreeMap<Item, f64> = relaxation.items.iter().map(|&i| (i, 0.0)).collect();
    for &(key, v) in &relaxation.x {
        let frac = value(v).clamp(0.0, 1.0);
        *sums.get_mut(&key.item).expect("item") += frac;
        if frac > 0.0 {
            x.insert(key, frac);
        }
    }
    for (item, sum) in sums {
        if (sum - 1.0).abs() > DECODE_TOL {
            return Err(DecodeError::AssignmentSum { item: item.to_string(), sum });
        }
    }

    let completion: BTreeMap<Item, f64> =
        relaxation.item_completion.iter().map(|&(item, v)| (item, value(v).max(0.0))).collect();
    let coflow_completion = if relaxation.coflow_completion.is_empty() {
        let mut out: BTreeMap<CoflowId, f64> = BTreeMap::new();
        for (&item, &c) in &completion {
            let e = out.entry(item.coflow()).or_insert(0.0);
            *e = e.max(c);
        }
        out
    } else {
        relaxation.coflow_completion.iter().map(|&(f, v)| (f, value(v).max(0.0))).collect()
    };

    Ok(FractionalAssignment {
        mode: relaxation.problem.mode,
        horizon: relaxation.horizon,
        x,
        completion,
        coflow_completion,
        makespan: relaxation.makespan.map(|e| value(e).max(0.0)),
        objective: solution.objective_value,
    })
}
