//! Discrete-event execution of an [`Assignment`].
//!
//! Cores run independently. On each core the assigned flows are split by interval
//! and the intervals run back to back: interval `l + 1` starts once every flow of
//! interval `l` on that core has finished, or at its first release if that is
//! later. Within an interval, at every release or completion the core walks its
//! released, unfinished flows in priority order and grants a flow its link when
//! both its input port and its output port are free. Granted flows move data at the
//! core's full speed until the next event. A flow that loses its ports to a
//! higher-priority one at an event is preempted and resumes later.
//!
//! ```
//! use coflow_hpn::engine::simulate;
//! use coflow_hpn::model::{parse_instance, CoreId, FlowKey, Mode};
//! use coflow_hpn::relaxations::Item;
//! use coflow_hpn::schedulers::{Assignment, Placement};
//!
//! let instance = parse_instance(r#"{"format": "coflow-hpn/1", "num_ports": 2,
//!     "cores": [{"id": 1, "speed": 2.0}],
//!     "coflows": [{"id": 1, "weight": 1.0, "release": 0.0,
//!                  "flows": [{"src": 1, "dst": 1, "size": 4.0}, {"src": 1, "dst": 2, "size": 2.0}]}]}"#).unwrap();
//! let place = |src, dst| Placement { item: Item::Flow(FlowKey::new(src, dst, 1)), core: CoreId(1), interval: None };
//! let assignment = Assignment { mode: Mode::Divisible, placements: vec![place(1, 1), place(1, 2)] };
//! let result = simulate(&instance, &assignment).unwrap();
//! assert_eq!(result.flow_completion[&FlowKey::new(1, 1, 1)], 2.0);
//! assert_eq!(result.flow_completion[&FlowKey::new(1, 2, 1)], 3.0);
//! assert_eq!(result.makespan, 3.0);
//! ```

mod metrics;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::EngineError;
use crate::model::{CoflowId, CoflowInstance, CoreId, FlowKey, Mode};
use crate::relaxations::Item;
use crate::schedulers::Assignment;

pub use metrics::{compute_metrics, CoflowRow, Metrics};
pub use oracle::{brute_force_optimum, ORACLE_MAX_COFLOWS, ORACLE_MAX_CORES, ORACLE_MAX_FLOWS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Release,
    Finish,
    Preempt,
    Start,
}

/// One line of the execution trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub t: f64,
    pub core: CoreId,
    pub flow: FlowKey,
    pub event: EventKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub flow_completion: BTreeMap<FlowKey, f64>,
    pub coflow_completion: BTreeMap<CoflowId, f64>,
    pub makespan: f64,
    pub twct: f64,
    pub flow_core: BTreeMap<FlowKey, CoreId>,
    pub trace: Vec<TraceEvent>,
}

impl ScheduleResult {
    /// Multiplies every time by `factor`.
    pub fn scale_time(&self, factor: f64, instance: &CoflowInstance) -> ScheduleResult {
        let flow_completion = self.flow_completion.iter().map(|(&k, &c)| (k, c * factor)).collect();
        let trace = self.trace.iter().map(|e| TraceEvent { t: e.t * factor, ..*e }).collect();
        summarize(instance, flow_completion, self.flow_core.clone(), trace)
    }

    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }
}

fn summarize(
    instance: &CoflowInstance,
    flow_completion: BTreeMap<FlowKey, f64>,
    flow_core: BTreeMap<FlowKey, CoreId>,
    trace: Vec<TraceEvent>,
) -> ScheduleResult {
    let mut coflow_completion: BTreeMap<CoflowId, f64> = BTreeMap::new();
    for (key, &c) in &flow_completion {
        let e = coflow_completion.entry(key.coflow).or_insert(0.0);
        *e = e.max(c);
    }
    let makespan = coflow_completion.values().copied().fold(0.0, f64::max);
    let twct = instance.coflows().iter().map(|c| c.weight * coflow_completion.get(&c.id).copied().unwrap_or(0.0)).sum();
    ScheduleResult { flow_completion, coflow_completion, makespan, twct, flow_core, trace }
}

/// A flow as seen by one core's event loop.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SimFlow {
    pub key: FlowKey,
    pub size: f64,
    pub release: f64,
}

/// Runs one interval of one core. `flows` is in priority order. Returns each
/// flow's completion time (aligned with `flows`) and the interval's end. Events
/// are appended to `trace` as `(time, kind, flow position)` when given.
pub(crate) fn run_segment(
    flows: &[SimFlow],
    speed: f64,
    start: f64,
    num_ports: usize,
    mut trace: Option<&mut Vec<(f64, EventKind, usize)>>,
) -> (Vec<f64>, f64) {
    let n = flows.len();
    let mut completion = vec![f64::NAN; n];
    if n == 0 {
        return (completion, start);
    }
    let mut remaining: Vec<f64> = flows.iter().map(|f| f.size).collect();
    let mut done = vec![false; n];
    let mut running = vec![false; n];
    let mut left = n;
    let mut t = flows.iter().map(|f| f.release).fold(f64::INFINITY, f64::min).max(start);
    let mut in_busy = vec![false; num_ports];
    let mut out_busy = vec![false; num_ports];
    let mut granted = vec![false; n];

    while left > 0 {
        in_busy.iter_mut().for_each(|b| *b = false);
        out_busy.iter_mut().for_each(|b| *b = false);
        for idx in 0..n {
            granted[idx] = false;
            if done[idx] || flows[idx].release > t {
                continue;
            }
            let (i, j) = (flows[idx].key.src.index(), flows[idx].key.dst.index());
            if !in_busy[i] && !out_busy[j] {
                in_busy[i] = true;
                out_busy[j] = true;
                granted[idx] = true;
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            for idx in 0..n {
                if running[idx] && !granted[idx] {
                    tr.push((t, EventKind::Preempt, idx));
                }
            }
            for idx in 0..n {
                if granted[idx] && !running[idx] {
                    tr.push((t, EventKind::Start, idx));
                }
            }
        }
        running.copy_from_slice(&granted);

        let next_release = (0..n)
            .filter(|&idx| !done[idx] && flows[idx].release > t)
            .map(|idx| flows[idx].release)
            .fold(f64::INFINITY, f64::min);
        let next_finish =
            (0..n).filter(|&idx| granted[idx]).map(|idx| t + remaining[idx] / speed).fold(f64::INFINITY, f64::min);
        let t_next = next_release.min(next_finish);
        debug_assert!(t_next.is_finite(), "an unfinished flow is always released later or running");

        for idx in 0..n {
            if !granted[idx] {
                continue;
            }
            let finish = t + remaining[idx] / speed;
            remaining[idx] -= speed * (t_next - t);
            if finish <= t_next || remaining[idx] <= 1e-12 * flows[idx].size {
                remaining[idx] = 0.0;
                done[idx] = true;
                running[idx] = false;
                completion[idx] = t_next;
                left -= 1;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push((t_next, EventKind::Finish, idx));
                }
            }
        }
        t = t_next;
    }
    (completion, t)
}

/// Executes `assignment` on the cores of `instance`.
pub fn simulate(instance: &CoflowInstance, assignment: &Assignment) -> Result<ScheduleResult, EngineError> {
    // (interval, rank, flow) per core.
    let mut per_core: BTreeMap<CoreId, Vec<(u32, usize, SimFlow)>> = BTreeMap::new();
    let mut seen_items = BTreeSet::new();
    let mut seen_flows = BTreeSet::new();
    let mut flow_core = BTreeMap::new();
    for (rank, p) in assignment.placements.iter().enumerate() {
        if instance.core(p.core).is_none() {
            return Err(EngineError::Mismatch(format!("{} placed on unknown core {}", p.item, p.core)));
        }
        if !seen_items.insert(p.item) {
            return Err(EngineError::Mismatch(format!("{} placed twice", p.item)));
        }
        let keys: Vec<FlowKey> = match (assignment.mode, p.item) {
            (Mode::Indivisible, Item::Coflow(f)) => {
                let c = instance.coflow(f).ok_or_else(|| EngineError::Mismatch(format!("unknown coflow {f}")))?;
                c.flow_keys().collect()
            }
            (Mode::Divisible, Item::Flow(key)) => vec![key],
            (mode, item) => return Err(EngineError::Mismatch(format!("{item} in a {mode:?} assignment"))),
        };
        for key in keys {
            let size = instance.flow_size(key).ok_or_else(|| EngineError::Mismatch(format!("unknown flow {key}")))?;
            if !seen_flows.insert(key) {
                return Err(EngineError::Mismatch(format!("flow {key} placed twice")));
            }
            let release = instance.coflow(key.coflow).expect("flow's coflow").release;
            flow_core.insert(key, p.core);
            per_core.entry(p.core).or_default().push((p.interval.unwrap_or(0), rank, SimFlow { key, size, release }));
        }
    }
    if seen_flows.len() != instance.num_flows() {
        let missing = instance.flows().map(|(k, _)| k).find(|k| !seen_flows.contains(k)).expect("some flow missing");
        return Err(EngineError::Mismatch(format!("flow {missing} is not assigned")));
    }

    let num_ports = instance.num_ports() as usize;
    let mut flow_completion = BTreeMap::new();
    // (time, core, kind, seq, flow)
    let mut events: Vec<(f64, CoreId, EventKind, usize, FlowKey)> = Vec::new();
    for (key, _) in instance.flows() {
        let release = instance.coflow(key.coflow).expect("coflow").release;
        events.push((release, flow_core[&key], EventKind::Release, events.len(), key));
    }
    for (&core, list) in &mut per_core {
        // Stable sort keeps a coflow's flows in (src, dst) order within its rank.
        list.sort_by_key(|e| (e.0, e.1));
        let speed = instance.core(core).expect("core").speed;
        let mut t = 0.0;
        let mut start = 0;
        while start < list.len() {
            let interval = list[start].0;
            let end = start + list[start..].iter().take_while(|e| e.0 == interval).count();
            let flows: Vec<SimFlow> = list[start..end].iter().map(|e| e.2).collect();
            let mut seg_trace = Vec::new();
            let (completion, seg_end) = run_segment(&flows, speed, t, num_ports, Some(&mut seg_trace));
            for (idx, c) in completion.into_iter().enumerate() {
                flow_completion.insert(flows[idx].key, c);
            }
            for (time, kind, idx) in seg_trace {
                events.push((time, core, kind, events.len(), flows[idx].key));
            }
            t = seg_end;
            start = end;
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let trace = events.into_iter().map(|(t, core, event, _, flow)| TraceEvent { t, core, flow, event }).collect();
    Ok(summarize(instance, flow_completion, flow_core, trace))
}
