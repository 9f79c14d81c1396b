use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coflow_hpn::engine::brute_force_optimum;
use coflow_hpn::generate::{generate, GenParams, SizeDist, SpeedDist};
use coflow_hpn::lp::export_lp;
use coflow_hpn::model::{instance_to_json, parse_instance, Problem};
use coflow_hpn::pipeline::{relaxation_for, run};
use coflow_hpn::report::{
    bench, bench_csv, coflow_csv, ratio_curve, ratio_curve_csv, ratio_curve_json, run_report, BenchConfig, BenchStatus,
    GridPoint,
};

/// Exit status when a theorem bound check fails.
const EXIT_BOUND: u8 = 2;
const EXIT_INPUT: u8 = 1;

#[derive(Parser)]
#[command(name = "coflow-hpn", version, about = "Coflow scheduling on heterogeneous parallel network cores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance.
    Generate(GenerateArgs),
    /// Solve the relaxation, round it and simulate the schedule.
    Run(RunArgs),
    /// Sweep a grid of generated instances and check every bound.
    Bench(BenchArgs),
    /// Tabulate the approximation factors against the core count.
    RatioCurve(RatioArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenOptions {
    /// Flow probability per (input, output) pair and coflow, in (0, 1].
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// `uniform:LO:HI` or `pareto:ALPHA:XMIN`.
    #[arg(long, default_value = "uniform:1:100", value_parser = parse_sizes)]
    sizes: SizeDist,
    /// `int:LO:HI` for integer speeds or `uniform:LO:HI` for real ones.
    #[arg(long, default_value = "int:1:8", value_parser = parse_speeds)]
    speeds: SpeedDist,
    /// Releases are drawn from [0, SPAN].
    #[arg(long, default_value_t = 50.0)]
    release_span: f64,
    /// Weights as `LO:HI`.
    #[arg(long, default_value = "1:10", value_parser = parse_span)]
    weights: (f64, f64),
    /// Keep at most this many flows per coflow.
    #[arg(long)]
    max_flows: Option<usize>,
}

impl GenOptions {
    fn params(&self, num_ports: u32, num_cores: usize, num_coflows: usize, seed: u64) -> GenParams {
        GenParams {
            num_ports,
            num_cores,
            num_coflows,
            density: self.density,
            sizes: self.sizes,
            speeds: self.speeds,
            release_span: self.release_span,
            weight_lo: self.weights.0,
            weight_hi: self.weights.1,
            max_flows_per_coflow: self.max_flows,
            seed,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of ports N.
    #[arg(long, default_value_t = 4)]
    ports: u32,
    /// Number of cores m.
    #[arg(long, default_value_t = 4)]
    cores: usize,
    /// Number of coflows n.
    #[arg(long, default_value_t = 4)]
    coflows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    gen: GenOptions,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    /// Instance file in the `coflow-hpn/1` JSON format.
    instance: PathBuf,
    #[arg(long, value_parser = parse_problem)]
    algorithm: Problem,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `json` for the full report, `csv` for per-coflow completions.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also compute the brute-force optimum (tiny instances only).
    #[arg(long)]
    oracle: bool,
    /// Write the relaxation in LP format to this path.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Write the event trace as JSON lines to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid points as comma-separated `N:m:n` triples; may be empty.
    #[arg(long, value_parser = parse_grid)]
    grid: Grid,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// An algorithm name or `all`.
    #[arg(long, default_value = "all", value_parser = parse_algorithms)]
    algorithm: Algorithms,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute the brute-force optimum where the instance is small enough.
    #[arg(long)]
    oracle: bool,
    #[command(flatten)]
    gen: GenOptions,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct RatioArgs {
    #[arg(long, default_value_t = 4)]
    m_min: usize,
    #[arg(long, default_value_t = 1000)]
    m_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone)]
struct Grid(Vec<GridPoint>);

#[derive(Clone)]
struct Algorithms(Vec<Problem>);

fn parse_problem(s: &str) -> Result<Problem, String> {
    s.parse()
}

fn parse_algorithms(s: &str) -> Result<Algorithms, String> {
    if s == "all" {
        return Ok(Algorithms(Problem::ALL.to_vec()));
    }
    s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>().map(Algorithms)
}

fn numbers<const K: usize>(s: &str, sep: char) -> Result<[f64; K], String> {
    let parts: Vec<&str> = s.split(sep).collect();
    if parts.len() != K {
        return Err(format!("expected {K} values separated by '{sep}' in {s:?}"));
    }
    let mut out = [0.0; K];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("not a number: {p:?}"))?;
    }
    Ok(out)
}

fn parse_span(s: &str) -> Result<(f64, f64), String> {
    let [lo, hi] = numbers::<2>(s, ':')?;
    Ok((lo, hi))
}

fn parse_sizes(s: &str) -> Result<SizeDist, String> {
    let (kind, rest) = s.split_once(':').ok_or("expected uniform:LO:HI or pareto:ALPHA:XMIN")?;
    let [a, b] = numbers::<2>(rest, ':')?;
    match kind {
        "uniform" => Ok(SizeDist::Uniform { lo: a, hi: b }),
        "pareto" => Ok(SizeDist::Pareto { alpha: a, x_min: b }),
        _ => Err(format!("unknown size distribution {kind:?}")),
    }
}

fn parse_speeds(s: &str) -> Result<SpeedDist, String> {
    let (kind, rest) = s.split_once(':').ok_or("expected int:LO:HI or uniform:LO:HI")?;
    let [a, b] = numbers::<2>(rest, ':')?;
    match kind {
        "int" => {
            if a.fract() != 0.0 || b.fract() != 0.0 || a < 0.0 || b < 0.0 {
                return Err("integer speeds need whole bounds".into());
            }
            Ok(SpeedDist::Integer { lo: a as u32, hi: b as u32 })
        }
        "uniform" => Ok(SpeedDist::Uniform { lo: a, hi: b }),
        _ => Err(format!("unknown speed distribution {kind:?}")),
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let parts: Vec<&str> = p.split(':').collect();
            let [n_ports, cores, coflows] = parts[..] else {
                return Err(format!("grid point {p:?} is not N:m:n"));
            };
            let bad = |v: &str| format!("not a positive integer: {v:?}");
            Ok(GridPoint {
                num_ports: n_ports.parse().map_err(|_| bad(n_ports))?,
                num_cores: cores.parse().map_err(|_| bad(cores))?,
                num_coflows: coflows.parse().map_err(|_| bad(coflows))?,
            })
        })
        .collect::<Result<_, _>>()
        .map(Grid)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    if args.format != Format::Json {
        bail!("instances are written as JSON only");
    }
    let instance = generate(&args.gen.params(args.ports, args.cores, args.coflows, args.seed))?;
    emit(args.out.as_deref(), &instance_to_json(&instance))?;
    Ok(0)
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.instance).with_context(|| format!("reading {}", args.instance.display()))?;
    let instance = parse_instance(&text).with_context(|| format!("parsing {}", args.instance.display()))?;
    if let Some(path) = &args.export_lp {
        let relaxation = relaxation_for(&instance, args.algorithm)?;
        fs::write(path, export_lp(&relaxation.lp)).with_context(|| format!("writing {}", path.display()))?;
    }
    let out = run(&instance, args.algorithm)?;
    let oracle = if args.oracle {
        Some(brute_force_optimum(&instance, args.algorithm.mode, args.algorithm.objective)?)
    } else {
        None
    };
    if let Some(path) = &args.trace {
        fs::write(path, out.schedule.trace_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = run_report(&instance, &out, oracle);
    let text = match args.format {
        Format::Json => pretty(&report)?,
        Format::Csv => coflow_csv(&out.metrics),
    };
    emit(args.out.as_deref(), &text)?;
    let sandwich = report["oracle"]["sandwich_holds"].as_bool().unwrap_or(true);
    if !out.within_bound() || !sandwich {
        eprintln!(
            "bound violated: {} objective {} against LP {} (bound constant {})",
            args.algorithm,
            out.algorithm_objective(),
            out.lp_objective,
            out.bound()
        );
        return Ok(EXIT_BOUND);
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let config = BenchConfig {
        grid: args.grid.0.clone(),
        trials: args.trials,
        problems: args.algorithm.0.clone(),
        params: args.gen.params(1, 1, 1, args.seed),
        base_seed: args.seed,
        oracle: args.oracle,
    };
    let rows = bench(&config)?;
    let text = match args.format {
        Format::Csv => bench_csv(&rows),
        Format::Json => pretty(&serde_json::to_value(&rows)?)?,
    };
    emit(args.out.as_deref(), &text)?;
    let failed: Vec<_> = rows.iter().filter(|r| r.status == BenchStatus::Failed).collect();
    for row in &failed {
        eprintln!("FAILED {} {}: {}", row.instance_id, row.algorithm, row.reason);
    }
    Ok(if failed.is_empty() { 0 } else { EXIT_BOUND })
}

fn cmd_ratio_curve(args: &RatioArgs) -> Result<u8> {
    let rows = ratio_curve(args.m_min, args.m_max)?;
    let text = match args.format {
        Format::Csv => ratio_curve_csv(&rows),
        Format::Json => pretty(&ratio_curve_json(&rows))?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

fn main() -> ExitCode {
    // Usage errors share the input-error code; clap's own default of 2 would
    // read as a bound violation.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::RatioCurve(a) => cmd_ratio_curve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // Causes that repeat their parent's text add nothing.
            let mut message = e.to_string();
            for cause in e.chain().skip(1) {
                let text = cause.to_string();
                if !message.contains(&text) {
                    message = format!("{message}: {text}");
                }
            }
            eprintln!("error: {message}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
