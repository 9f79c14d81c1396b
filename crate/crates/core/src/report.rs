//! Machine-readable outputs: run reports, benchmark sweeps and the analytic
//! ratio curve. Everything here is deterministic except the `runtime_ms` bench
//! column.
//!
//! ```
//! use coflow_hpn::report::{ratio_curve, ratio_curve_csv};
//!
//! let rows = ratio_curve(4, 16).unwrap();
//! assert_eq!((rows[0].gamma, rows[0].k, rows[0].c_4k_2g), (2.0, 2, 12.0));
//! assert_eq!((rows[12].gamma, rows[12].k, rows[12].c_4k_2g), (2.0, 4, 20.0));
//! assert!(ratio_curve_csv(&rows).starts_with('#'));
//! ```

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::engine::{brute_force_optimum, Metrics, ORACLE_MAX_COFLOWS, ORACLE_MAX_CORES, ORACLE_MAX_FLOWS};
use crate::error::{Error, LpError};
use crate::generate::{generate, GenParams};
use crate::grouping::compute_gamma_k;
use crate::model::{CoflowInstance, Mode, Objective, Problem};
use crate::pipeline::{bound_constant, run, RunOutput, BOUND_TOL};
use crate::relaxations::{compute_horizon, time_normalization};

/// Environment variable capping the bench worker count.
pub const THREADS_ENV: &str = "COFLOW_HPN_THREADS";

/// Bench guards on grid points.
pub const BENCH_MAX_PORTS: u32 = 8;
pub const BENCH_MAX_CORES: usize = 10;
pub const BENCH_MAX_COFLOWS: usize = 10;
/// Largest horizon the flow-granularity completion-time relaxation is built for.
pub const BENCH_MAX_LEVELS: u32 = 14;

fn csv_text<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.serialize(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// The JSON document `run` writes: objectives, the bound check, the assignment
/// and per-coflow completions. `oracle` is the brute-force optimum when known.
pub fn run_report(instance: &CoflowInstance, out: &RunOutput, oracle: Option<f64>) -> Value {
    let m = instance.num_cores();
    let (gamma, k) = compute_gamma_k(m);
    let constants: serde_json::Map<String, Value> =
        Problem::ALL.iter().map(|&p| (p.name().to_string(), json!(bound_constant(p, m)))).collect();
    let assignment: Vec<Value> = out
        .assignment
        .placements
        .iter()
        .map(|p| json!({"item": p.item, "core": p.core, "interval": p.interval}))
        .collect();
    let flows: Vec<Value> = out
        .schedule
        .flow_completion
        .iter()
        .map(|(key, &c)| json!({"flow": key, "core": out.schedule.flow_core[key], "completion": c}))
        .collect();
    let mut report = json!({
        "algorithm": out.problem,
        "num_ports": instance.num_ports(),
        "num_cores": m,
        "num_coflows": instance.num_coflows(),
        "num_flows": instance.num_flows(),
        "gamma": gamma,
        "K": k,
        "lp": {
            "objective": out.lp_objective,
            "variables": out.lp_variables,
            "constraints": out.lp_constraints,
            "time_scale": out.time_scale,
        },
        "algorithm_objective": out.algorithm_objective(),
        "makespan": out.schedule.makespan,
        "twct": out.schedule.twct,
        "ratio": out.ratio(),
        "bound_constant": out.bound(),
        "bound_constants": constants,
        "within_bound": out.within_bound(),
        "assignment": assignment,
        "flows": flows,
        "coflows": out.metrics.coflows,
    });
    if let Some(opt) = oracle {
        let tol = BOUND_TOL * opt.abs().max(1.0);
        report["oracle"] = json!({
            "optimum": opt,
            "sandwich_holds": out.lp_objective <= opt + tol && opt <= out.algorithm_objective() + tol,
        });
    }
    report
}

/// Per-coflow completions as CSV.
pub fn coflow_csv(metrics: &Metrics) -> String {
    csv_text(&metrics.coflows, &["coflow", "weight", "release", "completion", "weighted_completion"])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridPoint {
    pub num_ports: u32,
    pub num_cores: usize,
    pub num_coflows: usize,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub grid: Vec<GridPoint>,
    pub trials: usize,
    pub problems: Vec<Problem>,
    /// Template for everything except the grid dimensions and the seed.
    pub params: GenParams,
    /// Trial `t` of grid point `p` uses seed `base_seed + p * 1_000_000 + t`.
    pub base_seed: u64,
    /// Also compute the brute-force optimum where the instance is small enough.
    pub oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BenchStatus {
    Ok,
    Failed,
    Skipped,
}

/// One (grid point, trial, algorithm) outcome. Objectives are empty unless the
/// pipeline ran.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance_id: String,
    pub seed: u64,
    pub algorithm: Problem,
    #[serde(rename = "n")]
    pub num_coflows: usize,
    #[serde(rename = "m")]
    pub num_cores: usize,
    #[serde(rename = "N")]
    pub num_ports: u32,
    pub num_flows: usize,
    pub lp_objective: Option<f64>,
    pub algorithm_objective: Option<f64>,
    pub bound_constant: f64,
    pub ratio: Option<f64>,
    pub oracle: Option<f64>,
    pub status: BenchStatus,
    pub reason: String,
    pub runtime_ms: f64,
}

pub const BENCH_HEADER: [&str; 15] = [
    "instance_id",
    "seed",
    "algorithm",
    "n",
    "m",
    "N",
    "num_flows",
    "lp_objective",
    "algorithm_objective",
    "bound_constant",
    "ratio",
    "oracle",
    "status",
    "reason",
    "runtime_ms",
];

/// Rows as CSV, one per line, under a fixed header.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    csv_text(rows, &BENCH_HEADER)
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), Error> {
        for g in &self.grid {
            if g.num_ports > BENCH_MAX_PORTS || g.num_cores > BENCH_MAX_CORES || g.num_coflows > BENCH_MAX_COFLOWS {
                return Err(Error::Params(format!(
                    "grid point N={} m={} n={} exceeds the bench guard N<={BENCH_MAX_PORTS} m<={BENCH_MAX_CORES} n<={BENCH_MAX_COFLOWS}",
                    g.num_ports, g.num_cores, g.num_coflows
                )));
            }
            let params = GenParams {
                num_ports: g.num_ports,
                num_cores: g.num_cores,
                num_coflows: g.num_coflows,
                ..self.params.clone()
            };
            params.validate()?;
        }
        Ok(())
    }
}

fn bench_one(instance: &CoflowInstance, problem: Problem, oracle: bool, id: &str, seed: u64) -> BenchRow {
    let started = Instant::now();
    let mut row = BenchRow {
        instance_id: id.to_string(),
        seed,
        algorithm: problem,
        num_coflows: instance.num_coflows(),
        num_cores: instance.num_cores(),
        num_ports: instance.num_ports(),
        num_flows: instance.num_flows(),
        lp_objective: None,
        algorithm_objective: None,
        bound_constant: bound_constant(problem, instance.num_cores()),
        ratio: None,
        oracle: None,
        status: BenchStatus::Ok,
        reason: String::new(),
        runtime_ms: 0.0,
    };
    let repro = format!("repro: seed={seed} N={} m={} n={}", row.num_ports, row.num_cores, row.num_coflows);
    let levels_guarded = problem.mode == Mode::Divisible && problem.objective == Objective::Twct;
    let levels =
        if levels_guarded { compute_horizon(&instance.scale_time(time_normalization(instance))).levels() } else { 0 };
    if levels > BENCH_MAX_LEVELS {
        row.status = BenchStatus::Skipped;
        row.reason = format!("horizon has {levels} levels, above {BENCH_MAX_LEVELS}");
    } else {
        match run(instance, problem) {
            Ok(out) => {
                let (lp, alg, ratio) = (out.lp_objective, out.algorithm_objective(), out.ratio());
                row.lp_objective = Some(lp);
                row.algorithm_objective = Some(alg);
                row.ratio = Some(ratio);
                let mut problems = Vec::new();
                if ratio < 1.0 - BOUND_TOL {
                    problems.push(format!("ratio {ratio} below 1"));
                }
                if !out.within_bound() {
                    problems.push(format!("ratio {ratio} above bound {}", row.bound_constant));
                }
                if oracle && fits_oracle(instance) {
                    match brute_force_optimum(instance, problem.mode, problem.objective) {
                        Ok(opt) => {
                            row.oracle = Some(opt);
                            let tol = BOUND_TOL * opt.abs().max(1.0);
                            if lp > opt + tol || opt > alg + tol {
                                problems.push(format!("oracle {opt} outside [{lp}, {alg}]"));
                            }
                        }
                        Err(e) => problems.push(e.to_string()),
                    }
                }
                if !problems.is_empty() {
                    row.status = BenchStatus::Failed;
                    row.reason = format!("{}; {repro}", problems.join("; "));
                }
            }
            Err(Error::Lp(e @ LpError::TooLarge { .. })) => {
                row.status = BenchStatus::Skipped;
                row.reason = e.to_string();
            }
            Err(e) => {
                row.status = BenchStatus::Failed;
                row.reason = format!("{e}; {repro}");
            }
        }
    }
    row.runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    row
}

fn fits_oracle(instance: &CoflowInstance) -> bool {
    instance.num_flows() <= ORACLE_MAX_FLOWS
        && instance.num_cores() <= ORACLE_MAX_CORES
        && instance.num_coflows() <= ORACLE_MAX_COFLOWS
}

/// Runs every (grid point, trial, algorithm) and returns rows in that order.
/// Grid points are evaluated in parallel; `COFLOW_HPN_THREADS` caps the workers.
pub fn bench(config: &BenchConfig) -> Result<Vec<BenchRow>, Error> {
    config.validate()?;
    let jobs: Vec<(usize, GridPoint, usize)> =
        config.grid.iter().enumerate().flat_map(|(p, &g)| (0..config.trials).map(move |t| (p, g, t))).collect();
    let work = |&(p, g, t): &(usize, GridPoint, usize)| -> Result<Vec<BenchRow>, Error> {
        let seed = config.base_seed.wrapping_add((p as u64).wrapping_mul(1_000_000)).wrapping_add(t as u64);
        let params = GenParams {
            num_ports: g.num_ports,
            num_cores: g.num_cores,
            num_coflows: g.num_coflows,
            seed,
            ..config.params.clone()
        };
        let instance = generate(&params)?;
        let id = format!("N{}m{}n{}-s{seed}", g.num_ports, g.num_cores, g.num_coflows);
        Ok(config.problems.iter().map(|&problem| bench_one(&instance, problem, config.oracle, &id, seed)).collect())
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Params(format!("thread pool: {e}")))?;
    let chunks: Vec<Result<Vec<BenchRow>, Error>> = pool.install(|| jobs.par_iter().map(work).collect());
    let mut rows = Vec::with_capacity(jobs.len() * config.problems.len());
    for chunk in chunks {
        rows.extend(chunk?);
    }
    Ok(rows)
}

/// Header comment of the ratio-curve outputs.
pub const RATIO_CURVE_NOTE: &str = "analytic approximation factors per core count; the comparison curve for the earlier single-coflow O(m) algorithm is omitted: its constant is unpublished, so the crossover point cannot be reproduced";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub m: usize,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "4K+2gamma")]
    pub c_4k_2g: f64,
    #[serde(rename = "8K+4gamma")]
    pub c_8k_4g: f64,
    #[serde(rename = "8m*gamma*K")]
    pub c_8mgk: f64,
    #[serde(rename = "64m*gamma*K")]
    pub c_64mgk: f64,
    #[serde(rename = "64K+32gamma")]
    pub c_64k_32g: f64,
}

/// One row per core count in `m_min..=m_max`. Requires `4 <= m_min <= m_max`.
pub fn ratio_curve(m_min: usize, m_max: usize) -> Result<Vec<RatioRow>, Error> {
    if m_min < 4 || m_min > m_max {
        return Err(Error::Params(format!("need 4 <= m_min <= m_max, got {m_min} and {m_max}")));
    }
    Ok((m_min..=m_max)
        .map(|m| {
            let (gamma, k) = compute_gamma_k(m);
            let (mf, kf) = (m as f64, k as f64);
            RatioRow {
                m,
                gamma,
                k,
                c_4k_2g: 4.0 * kf + 2.0 * gamma,
                c_8k_4g: 8.0 * kf + 4.0 * gamma,
                c_8mgk: 8.0 * mf * gamma * kf,
                c_64mgk: 64.0 * mf * gamma * kf,
                c_64k_32g: 64.0 * kf + 32.0 * gamma,
            }
        })
        .collect())
}

pub fn ratio_curve_csv(rows: &[RatioRow]) -> String {
    let header = ["m", "gamma", "K", "4K+2gamma", "8K+4gamma", "8m*gamma*K", "64m*gamma*K", "64K+32gamma"];
    format!("# {RATIO_CURVE_NOTE}\n{}", csv_text(rows, &header))
}

pub fn ratio_curve_json(rows: &[RatioRow]) -> Value {
    json!({"note": RATIO_CURVE_NOTE, "rows": rows})
}
