//! Instances: network cores, coflows, and their per-port load aggregates.
//!
//! A heterogeneous parallel network is `m` non-blocking `N x N` switches ("cores")
//! running side by side. Every core has one link per server, so each core owns its
//! own copy of the `N` input ports and `N` output ports. Core `k` moves data at
//! `speed` units per time unit on each of its links.
//!
//! A coflow is a sparse demand matrix: flow `(i, j)` carries `size` units from input
//! port `i` to output port `j`. Ports are numbered from 1.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Schema tag required in every instance file.
pub const FORMAT_TAG: &str = "coflow-hpn/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoreId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoflowId(pub u32);

/// A 1-based port index, used for both input and output ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Port(pub u32);

impl Port {
    /// Zero-based position, for indexing dense per-port tables.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for CoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for CoflowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies flow `(i, j, f)`. Ordered by coflow first, then source, then destination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub coflow: CoflowId,
    pub src: Port,
    pub dst: Port,
}

impl FlowKey {
    pub fn new(src: u32, dst: u32, coflow: u32) -> Self {
        FlowKey { coflow: CoflowId(coflow), src: Port(src), dst: Port(dst) }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.src, self.dst, self.coflow)
    }
}

// Serialized as the `[i, j, f]` triple used by the trace format.
impl Serialize for FlowKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.src.0, self.dst.0, self.coflow.0].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlowKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [src, dst, coflow] = <[u32; 3]>::deserialize(deserializer)?;
        Ok(FlowKey::new(src, dst, coflow))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Core {
    pub id: CoreId,
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flow {
    pub src: Port,
    pub dst: Port,
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coflow {
    pub id: CoflowId,
    pub weight: f64,
    pub release: f64,
    /// Positive entries of the demand matrix, sorted by `(src, dst)`.
    pub flows: Vec<Flow>,
}

impl Coflow {
    pub fn total_size(&self) -> f64 {
        self.flows.iter().map(|fl| fl.size).sum()
    }

    pub fn flow_keys(&self) -> impl Iterator<Item = FlowKey> + '_ {
        self.flows.iter().map(move |fl| FlowKey { coflow: self.id, src: fl.src, dst: fl.dst })
    }
}

/// A validated scheduling instance. Cores are sorted by id, coflows by id, and the
/// flows of every coflow by `(src, dst)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoflowInstance {
    num_ports: u32,
    cores: Vec<Core>,
    coflows: Vec<Coflow>,
}

impl CoflowInstance {
    pub fn new(num_ports: u32, mut cores: Vec<Core>, mut coflows: Vec<Coflow>) -> Result<Self, ModelError> {
        if num_ports == 0 {
            return Err(ModelError::NoPorts);
        }
        if cores.is_empty() {
            return Err(ModelError::NoCores);
        }
        if coflows.is_empty() {
            return Err(ModelError::NoCoflows);
        }
        cores.sort_by_key(|c| c.id);
        for pair in cores.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateCore(pair[0].id));
            }
        }
        for core in &cores {
            if !(core.speed.is_finite() && core.speed > 0.0) {
                return Err(ModelError::BadSpeed { core: core.id, speed: core.speed });
            }
        }
        coflows.sort_by_key(|c| c.id);
        for pair in coflows.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateCoflow(pair[0].id));
            }
        }
        for coflow in &mut coflows {
            let id = coflow.id;
            if !(coflow.weight.is_finite() && coflow.weight > 0.0) {
                return Err(ModelError::BadWeight { coflow: id, weight: coflow.weight });
            }
            if !(coflow.release.is_finite() && coflow.release >= 0.0) {
                return Err(ModelError::BadRelease { coflow: id, release: coflow.release });
            }
            if coflow.flows.is_empty() {
                return Err(ModelError::EmptyCoflow(id));
            }
            coflow.flows.sort_by_key(|fl| (fl.src, fl.dst));
            for pair in coflow.flows.windows(2) {
                if (pair[0].src, pair[0].dst) == (pair[1].src, pair[1].dst) {
                    return Err(ModelError::DuplicateFlow(FlowKey { coflow: id, src: pair[0].src, dst: pair[0].dst }));
                }
            }
            for fl in &coflow.flows {
                let key = FlowKey { coflow: id, src: fl.src, dst: fl.dst };
                for port in [fl.src, fl.dst] {
                    if port.0 == 0 || port.0 > num_ports {
                        return Err(ModelError::PortOutOfRange { flow: key, port, num_ports });
                    }
                }
                if fl.size == 0.0 {
                    return Err(ModelError::ZeroSizeFlow(key));
                }
                if !(fl.size.is_finite() && fl.size > 0.0) {
                    return Err(ModelError::BadFlowSize { flow: key, size: fl.size });
                }
            }
        }
        Ok(CoflowInstance { num_ports, cores, coflows })
    }

    pub fn num_ports(&self) -> u32 {
        self.num_ports
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn coflows(&self) -> &[Coflow] {
        &self.coflows
    }

    pub fn num_cores(&self) -> usize {
        self.cores.len()
    }

    pub fn num_coflows(&self) -> usize {
        self.coflows.len()
    }

    pub fn num_flows(&self) -> usize {
        self.coflows.iter().map(|c| c.flows.len()).sum()
    }

    pub fn core_index(&self, id: CoreId) -> Option<usize> {
        self.cores.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn coflow_index(&self, id: CoflowId) -> Option<usize> {
        self.coflows.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn core(&self, id: CoreId) -> Option<&Core> {
        self.core_index(id).map(|k| &self.cores[k])
    }

    pub fn coflow(&self, id: CoflowId) -> Option<&Coflow> {
        self.coflow_index(id).map(|f| &self.coflows[f])
    }

    pub fn flow_size(&self, key: FlowKey) -> Option<f64> {
        let coflow = self.coflow(key.coflow)?;
        coflow
            .flows
            .binary_search_by_key(&(key.src, key.dst), |fl| (fl.src, fl.dst))
            .ok()
            .map(|pos| coflow.flows[pos].size)
    }

    /// Every flow in canonical `FlowKey` order, with its size.
    pub fn flows(&self) -> impl Iterator<Item = (FlowKey, f64)> + '_ {
        self.coflows
            .iter()
            .flat_map(|c| c.flows.iter().map(move |fl| (FlowKey { coflow: c.id, src: fl.src, dst: fl.dst }, fl.size)))
    }

    pub fn min_speed(&self) -> f64 {
        self.cores.iter().map(|c| c.speed).fold(f64::INFINITY, f64::min)
    }

    pub fn max_speed(&self) -> f64 {
        self.cores.iter().map(|c| c.speed).fold(0.0, f64::max)
    }

    pub fn max_release(&self) -> f64 {
        self.coflows.iter().map(|c| c.release).fold(0.0, f64::max)
    }

    /// Same instance with every release time set to zero.
    pub fn without_releases(&self) -> CoflowInstance {
        let mut out = self.clone();
        for c in &mut out.coflows {
            c.release = 0.0;
        }
        out
    }

    /// Multiplies every flow size and release time by `factor`. Completion times of
    /// any schedule scale by the same factor.
    pub fn scale_time(&self, factor: f64) -> CoflowInstance {
        let mut out = self.clone();
        for c in &mut out.coflows {
            c.release *= factor;
            for fl in &mut c.flows {
                fl.size *= factor;
            }
        }
        out
    }

    /// Smallest positive per-port transfer time `L / s` over all ports, coflows and
    /// cores. Instances meant for the interval-indexed relaxations assume this is at
    /// least 1.
    pub fn min_port_transfer_time(&self) -> f64 {
        let loads = port_loads(self);
        let min_load = loads
            .input
            .iter()
            .chain(loads.output.iter())
            .flatten()
            .copied()
            .filter(|&l| l > 0.0)
            .fold(f64::INFINITY, f64::min);
        min_load / self.max_speed()
    }

    /// True when some positive port load would move in less than one time unit.
    pub fn violates_unit_transfer(&self) -> bool {
        self.min_port_transfer_time() < 1.0
    }
}

/// Whether a coflow must stay on one core (`Indivisible`) or may spread its flows
/// over several cores (`Divisible`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Indivisible,
    Divisible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Makespan,
    Twct,
}

/// One of the four problem variants, spelled `indiv-makespan`, `div-makespan`,
/// `indiv-twct` or `div-twct`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Problem {
    pub mode: Mode,
    pub objective: Objective,
}

impl Problem {
    pub const INDIV_MAKESPAN: Problem = Problem { mode: Mode::Indivisible, objective: Objective::Makespan };
    pub const DIV_MAKESPAN: Problem = Problem { mode: Mode::Divisible, objective: Objective::Makespan };
    pub const INDIV_TWCT: Problem = Problem { mode: Mode::Indivisible, objective: Objective::Twct };
    pub const DIV_TWCT: Problem = Problem { mode: Mode::Divisible, objective: Objective::Twct };

    pub const ALL: [Problem; 4] =
        [Problem::INDIV_MAKESPAN, Problem::DIV_MAKESPAN, Problem::INDIV_TWCT, Problem::DIV_TWCT];

    pub fn name(self) -> &'static str {
        match (self.mode, self.objective) {
            (Mode::Indivisible, Objective::Makespan) => "indiv-makespan",
            (Mode::Divisible, Objective::Makespan) => "div-makespan",
            (Mode::Indivisible, Objective::Twct) => "indiv-twct",
            (Mode::Divisible, Objective::Twct) => "div-twct",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Problem::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            format!("unknown algorithm {s:?}; expected one of indiv-makespan, div-makespan, indiv-twct, div-twct")
        })
    }
}

impl Serialize for Problem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

/// Per-port totals of a coflow's demand: `L_if` over input ports and `L_jf` over
/// output ports.
///
/// Stored densely, indexed by coflow position (instance order) and zero-based port.
#[derive(Clone, Debug, PartialEq)]
pub struct PortLoads {
    pub input: Vec<Vec<f64>>,
    pub output: Vec<Vec<f64>>,
}

impl PortLoads {
    /// `L_if` for the coflow at position `coflow` in the instance.
    pub fn input_load(&self, coflow: usize, port: Port) -> f64 {
        self.input[coflow][port.index()]
    }

    /// `L_jf` for the coflow at position `coflow` in the instance.
    pub fn output_load(&self, coflow: usize, port: Port) -> f64 {
        self.output[coflow][port.index()]
    }

    /// `max_i sum_f L_if` and `max_j sum_f L_jf`, combined by `max`.
    pub fn max_port_total(&self) -> f64 {
        let n_ports = self.input.first().map_or(0, Vec::len);
        let mut best: f64 = 0.0;
        for p in 0..n_ports {
            let in_total: f64 = self.input.iter().map(|row| row[p]).sum();
            let out_total: f64 = self.output.iter().map(|row| row[p]).sum();
            best = best.max(in_total).max(out_total);
        }
        best
    }
}

pub fn port_loads(instance: &CoflowInstance) -> PortLoads {
    let n_ports = instance.num_ports as usize;
    let mut input = vec![vec![0.0; n_ports]; instance.coflows.len()];
    let mut output = vec![vec![0.0; n_ports]; instance.coflows.len()];
    for (f, coflow) in instance.coflows.iter().enumerate() {
        for fl in &coflow.flows {
            input[f][fl.src.index()] += fl.size;
            output[f][fl.dst.index()] += fl.size;
        }
    }
    PortLoads { input, output }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format: String,
    num_ports: u32,
    cores: Vec<CoreRecord>,
    coflows: Vec<CoflowRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoreRecord {
    id: u32,
    speed: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoflowRecord {
    id: u32,
    weight: f64,
    release: f64,
    flows: Vec<FlowRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRecord {
    src: u32,
    dst: u32,
    size: f64,
}

pub fn parse_instance(text: &str) -> Result<CoflowInstance, ModelError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.format != FORMAT_TAG {
        return Err(ModelError::Format(file.format));
    }
    let cores = file.cores.into_iter().map(|c| Core { id: CoreId(c.id), speed: c.speed }).collect();
    let coflows = file
        .coflows
        .into_iter()
        .map(|c| Coflow {
            id: CoflowId(c.id),
            weight: c.weight,
            release: c.release,
            flows: c.flows.into_iter().map(|fl| Flow { src: Port(fl.src), dst: Port(fl.dst), size: fl.size }).collect(),
        })
        .collect();
    CoflowInstance::new(file.num_ports, cores, coflows)
}

/// Canonical pretty-printed JSON with a trailing newline.
pub fn instance_to_json(instance: &CoflowInstance) -> String {
    let file = InstanceFile {
        format: FORMAT_TAG.to_string(),
        num_ports: instance.num_ports,
        cores: instance.cores.iter().map(|c| CoreRecord { id: c.id.0, speed: c.speed }).collect(),
        coflows: instance
            .coflows
            .iter()
            .map(|c| CoflowRecord {
                id: c.id.0,
                weight: c.weight,
                release: c.release,
                flows: c.flows.iter().map(|fl| FlowRecord { src: fl.src.0, dst: fl.dst.0, size: fl.size }).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("instance serializes");
    text.push('\n');
    text
}

pub fn load_instance<R: Read>(mut reader: R) -> Result<CoflowInstance, ModelError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_instance(&text)
}

pub fn save_instance<W: Write>(instance: &CoflowInstance, mut writer: W) -> Result<(), ModelError> {
    writer.write_all(instance_to_json(instance).as_bytes())?;
    Ok(())
}
