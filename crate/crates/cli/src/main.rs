//! `qgs`: feature models to CNF, Grover circuits and quantum-style samples.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qgs_core::circuit::{total_depth, CircuitError};
use qgs_core::cnf::{count_models_with_budget, emit_dimacs, parse_dimacs, Cnf, CnfError, DEFAULT_COUNT_BUDGET};
use qgs_core::model::{parse_feature_model, to_cnf, ModelError, VariableMap};
use qgs_core::oracle::{self, build_grover_rounds, count_rounds, Iterations, OracleError};
use qgs_core::sampler::{self, Backend, SampleOptions, SamplerError};
use qgs_core::sim::{SimError, DEFAULT_GATE_CAP};

const EXIT_FAILURE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_NO_SOLUTIONS: u8 = 5;
const EXIT_CAPACITY: u8 = 6;

#[derive(Parser)]
#[command(name = "qgs", version, about = "Grover-based uniform sampling of feature-model configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a feature model to DIMACS CNF.
    ToCnf {
        model: PathBuf,
        /// DIMACS output file (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write `<index> <feature>` lines here instead of stderr.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Print the exact number of models.
    Count {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
        budget: u64,
    },
    /// Build the Grover circuit for a formula.
    Circuit {
        input: PathBuf,
        /// `auto` or a round count.
        #[arg(short = 'k', long, default_value = "auto")]
        iterations: Iterations,
        #[arg(long, value_enum, default_value_t = CircuitFormat::Json)]
        format: CircuitFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print width, gate count and depths to stderr.
        #[arg(long)]
        metrics: bool,
        #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
        budget: u64,
    },
    /// Simulate Grover search and measure.
    Sample {
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BackendArg::Fast)]
        backend: BackendArg,
        #[arg(short = 'k', long, default_value = "auto")]
        iterations: Iterations,
        /// Drop measurements that violate the formula.
        #[arg(long)]
        reject: bool,
        /// List accepted configurations without repeats.
        #[arg(long)]
        distinct: bool,
        #[arg(long, value_enum, default_value_t = ReportFormat::Human)]
        format: ReportFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
        budget: u64,
    },
    /// Resource table for one or more models (`.fm` or DIMACS).
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Human)]
        format: TableFormat,
        #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
        budget: u64,
    },
    /// Chi-square test of accepted samples against the uniform distribution.
    Uniformity {
        input: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BackendArg::Fast)]
        backend: BackendArg,
        #[arg(long, value_enum, default_value_t = ReportFormat::Human)]
        format: ReportFormat,
        #[arg(long, default_value_t = DEFAULT_COUNT_BUDGET)]
        budget: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitFormat {
    Json,
    Qasm3,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Human,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Human,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Fast,
    Gate,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Fast => Backend::Fast,
            BackendArg::Gate => Backend::Gate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CnfError>() {
            return cnf_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return match e {
                ModelError::Parse { .. } | ModelError::Invalid(_) => EXIT_PARSE,
                ModelError::ConstraintTooLarge { .. } => EXIT_BLOWUP,
                ModelError::Cnf(c) => cnf_code(c),
            };
        }
        if let Some(e) = cause.downcast_ref::<OracleError>() {
            return oracle_code(e);
        }
        if cause.downcast_ref::<SimError>().is_some() {
            return EXIT_CAPACITY;
        }
        if let Some(e) = cause.downcast_ref::<SamplerError>() {
            return match e {
                SamplerError::Cnf(c) => cnf_code(c),
                SamplerError::Oracle(o) => oracle_code(o),
                SamplerError::Sim(_) => EXIT_CAPACITY,
                SamplerError::DegenerateTest(0) => EXIT_NO_SOLUTIONS,
                _ => EXIT_FAILURE,
            };
        }
        if cause.downcast_ref::<CircuitError>().is_some() {
            return EXIT_FAILURE;
        }
    }
    EXIT_FAILURE
}

fn cnf_code(e: &CnfError) -> u8 {
    match e {
        CnfError::Timeout { .. } => EXIT_TIMEOUT,
        CnfError::TooManyVariables { .. } => EXIT_CAPACITY,
        _ => EXIT_PARSE,
    }
}

fn oracle_code(e: &OracleError) -> u8 {
    match e {
        OracleError::NoSolutions => EXIT_NO_SOLUTIONS,
        OracleError::TooManyIterations(_) => EXIT_CAPACITY,
        _ => EXIT_FAILURE,
    }
}

fn gate_cap() -> Result<usize> {
    match std::env::var("QGS_GATE_CAP") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("QGS_GATE_CAP must be a qubit count, got `{v}`")),
        Err(_) => Ok(DEFAULT_GATE_CAP),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn is_feature_model(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "fm")
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Reads a `.fm` feature model or a DIMACS file.
fn load_cnf(path: &Path) -> Result<Cnf> {
    let text = read(path)?;
    let cnf = if is_feature_model(path) {
        let fm = parse_feature_model(&text).with_context(|| path.display().to_string())?;
        to_cnf(&fm).with_context(|| path.display().to_string())?.0
    } else {
        parse_dimacs(&text).with_context(|| path.display().to_string())?
    };
    Ok(cnf)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::ToCnf { model, output, map } => {
            let fm = parse_feature_model(&read(&model)?)?;
            let (cnf, vars) = to_cnf(&fm)?;
            emit(output.as_deref(), &emit_dimacs(&cnf))?;
            report_mapping(&cnf, &vars, map.as_deref())
        }
        Command::Count { input, budget } => {
            let cnf = load_cnf(&input)?;
            println!("{}", count_models_with_budget(&cnf, budget)?);
            Ok(())
        }
        Command::Circuit {
            input,
            iterations,
            format,
            output,
            metrics,
            budget,
        } => {
            let cnf = load_cnf(&input)?;
            let k = match iterations {
                Iterations::Fixed(k) => k,
                Iterations::Auto => {
                    let models = count_models_with_budget(&cnf, budget)?;
                    let plan = oracle::plan(cnf.num_vars(), &models)?;
                    plan.k_best_usize()
                        .ok_or(OracleError::TooManyIterations(plan.k_best))?
                }
            };
            let circuit = build_grover_rounds(&cnf, k)?;
            let text = match format {
                CircuitFormat::Json => circuit.to_json() + "\n",
                CircuitFormat::Qasm3 => circuit.to_qasm3(),
            };
            emit(output.as_deref(), &text)?;
            if metrics {
                let depth_k1 = build_grover_rounds(&cnf, 1)?.depth();
                let total = total_depth(depth_k1 as u64, k as u64)?;
                eprintln!(
                    "width={} gates={} k={} rounds={} depth={} depth_k1={} total_depth={}",
                    circuit.width(),
                    circuit.gate_count(),
                    k,
                    count_rounds(&circuit),
                    circuit.depth(),
                    depth_k1,
                    total
                );
            }
            Ok(())
        }
        Command::Sample {
            input,
            shots,
            seed,
            backend,
            iterations,
            reject,
            distinct,
            format,
            output,
            budget,
        } => {
            let cnf = load_cnf(&input)?;
            let opts = SampleOptions {
                shots,
                seed,
                backend: backend.into(),
                iterations,
                reject,
                distinct,
                gate_cap: gate_cap()?,
                count_budget: budget,
            };
            let mut report = sampler::sample(&cnf, &opts)?;
            report.model = model_name(&input);
            let text = match format {
                ReportFormat::Human => report.to_human(),
                ReportFormat::Json => report.to_json() + "\n",
            };
            emit(output.as_deref(), &text)
        }
        Command::Analyze {
            inputs,
            format,
            budget,
        } => {
            let loaded = inputs
                .iter()
                .map(|p| Ok((model_name(p), load_cnf(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let rows = sampler::analyze(&loaded, budget);
            let text = match format {
                TableFormat::Human => sampler::rows_to_human(&rows),
                TableFormat::Json => sampler::rows_to_json(&rows) + "\n",
                TableFormat::Csv => sampler::rows_to_csv(&rows),
            };
            emit(None, &text)
        }
        Command::Uniformity {
            input,
            shots,
            seed,
            backend,
            format,
            budget,
        } => {
            let cnf = load_cnf(&input)?;
            let opts = SampleOptions {
                shots,
                seed,
                backend: backend.into(),
                reject: true,
                gate_cap: gate_cap()?,
                count_budget: budget,
                ..SampleOptions::default()
            };
            let report = sampler::sample(&cnf, &opts)?;
            let result = report.uniformity()?;
            match format {
                ReportFormat::Human => println!("{result}"),
                ReportFormat::Json => println!(
                    "{}",
                    serde_json::json!({
                        "chi2": result.chi2,
                        "dof": result.dof,
                        "p_value": result.p_value,
                        "shots_used": result.shots_used,
                        "underpowered": result.underpowered,
                    })
                ),
            }
            Ok(())
        }
    }
}

fn report_mapping(cnf: &Cnf, vars: &VariableMap, map: Option<&Path>) -> Result<()> {
    match map {
        Some(p) => fs::write(p, vars.to_map_file()).with_context(|| format!("cannot write {}", p.display()))?,
        None => {
            eprintln!("variables: {}  clauses: {}", cnf.num_vars(), cnf.num_clauses());
            eprint!("{}", vars.to_map_file());
        }
    }
    Ok(())
}
