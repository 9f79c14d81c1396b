use serde::Serialize;

use super::{EventKind, ScheduleResult};
use crate::error::EngineError;
use crate::model::{CoflowId, CoflowInstance};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoflowRow {
    pub coflow: CoflowId,
    pub weight: f64,
    pub release: f64,
    pub completion: f64,
    pub weighted_completion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub makespan: f64,
    pub twct: f64,
    pub coflows: Vec<CoflowRow>,
}

fn inconsistent(msg: String) -> Result<Metrics, EngineError> {
    Err(EngineError::Inconsistent(msg))
}

/// Recomputes the objectives from the per-flow completions and checks them, and
/// the trace, against the values stored in `result`.
pub fn compute_metrics(result: &ScheduleResult, instance: &CoflowInstance) -> Result<Metrics, EngineError> {
    let mut coflows = Vec::with_capacity(instance.num_coflows());
    for c in instance.coflows() {
        let mut completion: f64 = 0.0;
        for key in c.flow_keys() {
            match result.flow_completion.get(&key) {
                Some(&t) => completion = completion.max(t),
                None => return inconsistent(format!("flow {key} has no completion time")),
            }
        }
        if result.coflow_completion.get(&c.id) != Some(&completion) {
            return inconsistent(format!(
                "coflow {} completes at {completion} by its flows but {:?} is stored",
                c.id,
                result.coflow_completion.get(&c.id)
            ));
        }
        coflows.push(CoflowRow {
            coflow: c.id,
            weight: c.weight,
            release: c.release,
            completion,
            weighted_completion: c.weight * completion,
        });
    }
    if result.flow_completion.len() != instance.num_flows() {
        return inconsistent(format!(
            "{} flow completions for {} flows",
            result.flow_completion.len(),
            instance.num_flows()
        ));
    }
    let twct: f64 = coflows.iter().map(|r| r.weighted_completion).sum();
    let makespan = coflows.iter().map(|r| r.completion).fold(0.0, f64::max);
    if twct != result.twct {
        return inconsistent(format!("stored twct {} but completions give {twct}", result.twct));
    }
    if makespan != result.makespan {
        return inconsistent(format!("stored makespan {} but completions give {makespan}", result.makespan));
    }
    for (key, &t) in &result.flow_completion {
        let finished = result.trace.iter().any(|e| e.event == EventKind::Finish && e.flow == *key && e.t == t);
        if !finished {
            return inconsistent(format!("no finish event for flow {key} at {t}"));
        }
    }
    Ok(Metrics { makespan, twct, coflows })
}
