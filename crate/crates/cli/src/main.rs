//! `noc-timing`: analyse, compare and simulate wormhole NoC configurations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use noc_timing::analyzer::{analyze_all, schedulability_check, AnalysisOptions, AnalysisReport, Method};
use noc_timing::error::AnalysisError;
use noc_timing::gbata::construct_ib_graph;
use noc_timing::generate::{generate, GenerateError, GeneratorSpec, Paradigm};
use noc_timing::interference::Subpath;
use noc_timing::netcalc::{int, Rational};
use noc_timing::platform::{validate, Config, ConfigError, FlowId, NodeParams, Violation};
use noc_timing::report::{bound_rows, comparison_rows, instrumentation_rows, read_bounds, write_rows, ReportError};
use noc_timing::wormsim::{simulate_run, tightness_sweep_with, write_trace, SimError, TrafficSchedule};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration:\n  {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
    #[error("flow {flow}: {source}")]
    Analysis {
        flow: FlowId,
        #[source]
        source: AnalysisError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("schedule: {0}")]
    Schedule(serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let unstable = |v: &Violation| matches!(v, Violation::OverUtilization { .. });
        match self {
            CliError::Invalid(v) if v.iter().all(unstable) => 2,
            CliError::Analysis {
                source: AnalysisError::Unstable(_),
                ..
            } => 2,
            CliError::Sim(SimError::SafetyViolation { .. }) => 3,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "noc-timing", version, about = "Worst-case delay bounds for wormhole NoCs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Bata,
    Gbata,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Bata => vec![Method::Bata],
            MethodArg::Gbata => vec![Method::Gbata],
            MethodArg::Both => vec![Method::Bata, Method::Gbata],
        }
    }
}

#[derive(Args)]
struct Common {
    /// Configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Charge the largest same-priority packet at every node in T_lp.
    #[arg(long)]
    strict_tlp: bool,
    /// Worker threads for the per-flow analyses.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Delay bounds of every flow.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "gbata")]
        method: MethodArg,
        /// Bounds CSV; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Instrumentation CSV.
        #[arg(long)]
        instrumentation: Option<PathBuf>,
    },
    /// Both methods side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-offset simulations checked against bounds.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Bounds CSV from `analyze`; G-BATA bounds are computed if omitted.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Schedule file; overrides --seed and --runs.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        runs: u64,
        /// Per-flow tightness CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Event trace of run 0 as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Indirect blocking graph of one flow in DOT.
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        foi: FlowId,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random configuration.
    Generate {
        #[arg(long, default_value = "uniform")]
        paradigm: Paradigm,
        #[arg(long, default_value_t = 8)]
        flows: usize,
        #[arg(long, default_value_t = 8)]
        width: u32,
        #[arg(long, default_value_t = 8)]
        height: u32,
        #[arg(long, default_value_t = 1)]
        vcs: u32,
        /// Buffer size per VC in flits.
        #[arg(long, default_value_t = 2)]
        buffer: u64,
        /// Packet length range `MIN:MAX` in flits.
        #[arg(long, default_value = "2:8", value_parser = parse_range)]
        len: (u64, u64),
        #[arg(long, default_value = "100:400", value_parser = parse_range)]
        period: (u64, u64),
        #[arg(long, default_value = "1:1", value_parser = parse_range)]
        burst: (u64, u64),
        #[arg(long, default_value = "0:0", value_parser = parse_range)]
        jitter: (u64, u64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => parse(s).map(|v| (v, v)),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf)?;
    Ok(buf)
}

fn load(path: &Path) -> Result<Config, CliError> {
    let config = Config::from_json(&read(path)?)?;
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(CliError::Invalid(violations))
    }
}

fn run_analysis(config: &Config, method: Method, common: &Common) -> Result<AnalysisReport, CliError> {
    let options = AnalysisOptions {
        method,
        strict_tlp: common.strict_tlp,
    };
    let mut report = analyze_all(config, options, common.jobs);
    if !report.errors.is_empty() {
        let (flow, source) = report.errors.remove(0);
        return Err(CliError::Analysis { flow, source });
    }
    Ok(report)
}

fn summarize(report: &AnalysisReport, config: &Config) {
    let totals = report.totals();
    let schedulable = schedulability_check(report, config).iter().filter(|(_, ok)| *ok).count();
    eprintln!(
        "{}: {}/{} flows schedulable, mean I_DB {:.2}, mean I_IB {:.2}, n_e2e {}, n_iter {}, {:.3}s",
        report.method,
        schedulable,
        report.flows.len(),
        report.mean_db_index(),
        report.mean_ib_index(),
        totals.n_e2e,
        totals.n_iter,
        totals.dt_total.as_secs_f64()
    );
}

fn analyze(common: &Common, method: MethodArg, out: Option<&Path>, instrumentation: Option<&Path>) -> Result<(), CliError> {
    let config = load(&common.config)?;
    let mut bounds = Vec::new();
    let mut counters = Vec::new();
    for m in method.methods() {
        let report = run_analysis(&config, m, common)?;
        summarize(&report, &config);
        bounds.extend(bound_rows(&report, &config));
        counters.extend(instrumentation_rows(&report));
    }
    emit(out, &csv_bytes(&bounds)?)?;
    if let Some(path) = instrumentation {
        emit(Some(path), &csv_bytes(&counters)?)?;
    }
    Ok(())
}

fn compare(common: &Common, out: Option<&Path>) -> Result<(), CliError> {
    let config = load(&common.config)?;
    let bata = run_analysis(&config, Method::Bata, common)?;
    let gbata = run_analysis(&config, Method::Gbata, common)?;
    summarize(&bata, &config);
    summarize(&gbata, &config);
    emit(out, &csv_bytes(&comparison_rows(&bata, &gbata, &config))?)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    common: &Common,
    bounds: Option<&Path>,
    schedule: Option<&Path>,
    seed: u64,
    runs: u64,
    out: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    let config = load(&common.config)?;
    let schedule = match schedule {
        Some(p) => TrafficSchedule::from_json(&read(p)?).map_err(CliError::Schedule)?,
        None => TrafficSchedule::new(seed, runs),
    };
    let limits: BTreeMap<FlowId, Rational> = match bounds {
        Some(p) => {
            let rows = read_bounds(read(p)?.as_bytes())?;
            let mut limits = BTreeMap::new();
            for row in rows.iter().filter(|r| r.method == Method::Gbata.name()).chain(rows.iter()) {
                let value = Rational::from_float(row.delay)
                    .ok_or_else(|| CliError::Usage(format!("flow {}: bound {} is not finite", row.flow_id, row.delay)))?;
                limits.entry(row.flow_id).or_insert(value);
            }
            limits
        }
        None => noc_timing::wormsim::report_bounds(&run_analysis(&config, Method::Gbata, common)?),
    };
    if let Some(path) = trace {
        let mut events = Vec::new();
        simulate_run(&config, &schedule, 0, Some(&mut events))?;
        let mut buf = Vec::new();
        write_trace(&events, &mut buf).map_err(ReportError::from)?;
        emit(Some(path), &buf)?;
    }
    let sweep = tightness_sweep_with(&config, &limits, &schedule)?;

    #[derive(serde::Serialize)]
    struct Row {
        flow_id: FlowId,
        max_delay: u64,
        bound: f64,
        tau: f64,
    }
    let rows: Vec<Row> = sweep
        .flows
        .iter()
        .map(|f| Row {
            flow_id: f.flow,
            max_delay: f.max_delay,
            bound: f.bound,
            tau: f.tau,
        })
        .collect();
    if let Some(path) = out {
        emit(Some(path), &csv_bytes(&rows)?)?;
    }
    println!(
        "{} runs, no bound exceeded; mean tau {:.3}, max tau {:.3}",
        sweep.runs,
        sweep.mean_tau(),
        sweep.max_tau()
    );
    Ok(())
}

fn graph(config: &Path, foi: FlowId, out: Option<&Path>) -> Result<(), CliError> {
    let config = load(config)?;
    let f = config.flow(foi).ok_or(CliError::Analysis {
        flow: foi,
        source: AnalysisError::UnknownFlow(foi),
    })?;
    let (graph, _) = construct_ib_graph(Subpath::whole(f), &config);
    emit(out, graph.to_dot().as_bytes())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            common,
            method,
            out,
            instrumentation,
        } => analyze(&common, method, out.as_deref(), instrumentation.as_deref()),
        Command::Compare { common, out } => compare(&common, out.as_deref()),
        Command::Simulate {
            common,
            bounds,
            schedule,
            seed,
            runs,
            out,
            trace,
        } => simulate(
            &common,
            bounds.as_deref(),
            schedule.as_deref(),
            seed,
            runs,
            out.as_deref(),
            trace.as_deref(),
        ),
        Command::Graph { config, foi, out } => graph(&config, foi, out.as_deref()),
        Command::Generate {
            paradigm,
            flows,
            width,
            height,
            vcs,
            buffer,
            len,
            period,
            burst,
            jitter,
            seed,
            out,
        } => {
            let spec = GeneratorSpec {
                paradigm,
                flows,
                width,
                height,
                node: NodeParams::new(int(1), int(1), buffer),
                vc_count: vcs,
                len,
                period,
                burst,
                jitter,
                seed,
                ..GeneratorSpec::default()
            };
            let config = generate(&spec)?;
            let mut text = config.to_json();
            text.push('\n');
            emit(out.as_deref(), text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
