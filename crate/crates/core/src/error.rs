use thiserror::Error;

use crate::lp::LpStatus;
use crate::model::{CoflowId, CoreId, FlowKey, Port};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance needs at least one port")]
    NoPorts,
    #[error("instance needs at least one core")]
    NoCores,
    #[error("instance needs at least one coflow")]
    NoCoflows,
    #[error("duplicate core id {0}")]
    DuplicateCore(CoreId),
    #[error("duplicate coflow id {0}")]
    DuplicateCoflow(CoflowId),
    #[error("core {core}: speed must be positive and finite, got {speed}")]
    BadSpeed { core: CoreId, speed: f64 },
    #[error("coflow {coflow}: weight must be positive and finite, got {weight}")]
    BadWeight { coflow: CoflowId, weight: f64 },
    #[error("coflow {coflow}: release must be non-negative and finite, got {release}")]
    BadRelease { coflow: CoflowId, release: f64 },
    #[error("coflow {0} has no flows")]
    EmptyCoflow(CoflowId),
    #[error("flow {0} listed twice")]
    DuplicateFlow(FlowKey),
    #[error("flow {flow}: port {port} outside 1..={num_ports}")]
    PortOutOfRange { flow: FlowKey, port: Port, num_ports: u32 },
    #[error("zero-size flow {0}")]
    ZeroSizeFlow(FlowKey),
    #[error("flow {flow}: size must be positive and finite, got {size}")]
    BadFlowSize { flow: FlowKey, size: f64 },
    #[error("unsupported format tag {0:?} (expected \"coflow-hpn/1\")")]
    Format(String),
    #[error("malformed instance: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("pivot budget of {0} exhausted")]
    IterationLimit(usize),
    #[error(
        "LP has {variables} variables, above the internal solver cap of {cap}; export it and use an external solver"
    )]
    TooLarge { variables: usize, cap: usize },
    #[error("malformed LP: {0}")]
    Malformed(String),
    #[error("LP text line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("solver lost numerical accuracy: {0}")]
    Numerical(String),
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("cannot decode a solution with status {0:?}")]
    NotOptimal(LpStatus),
    #[error("assignment mass of {item} sums to {sum}, expected 1")]
    AssignmentSum { item: String, sum: f64 },
    #[error("solution has {got} values for an LP with {expected} variables")]
    Shape { got: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("assignment does not match instance: {0}")]
    Mismatch(String),
    #[error("oracle limited to {max_flows} flows, {max_cores} cores, {max_coflows} coflows; got {flows}, {cores}, {coflows}")]
    OracleTooLarge {
        flows: usize,
        cores: usize,
        coflows: usize,
        max_flows: usize,
        max_cores: usize,
        max_coflows: usize,
    },
    #[error("schedule result is inconsistent: {0}")]
    Inconsistent(String),
}

/// Errors surfaced by the end-to-end pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP relaxation is {0:?}")]
    LpStatus(LpStatus),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("interval classification failed for {0}")]
    Interval(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}
