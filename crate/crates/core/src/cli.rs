//! The `p4gen` command line.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 wall-clock limit reached
//! before a valid program was found.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codegen::{emit, CodegenError};
use crate::engine::{evolve_with, EngineError, GpParams, ProgressEvent, Synthesis};
use crate::evaluator::{fitness, generate_trace, EvalError, PacketReport};
use crate::fixtures;
use crate::genome::{format_genotype, parse_genotype, GenomeError, UnitSelection};
use crate::registry::{RegisterFile, RegistryError};
use crate::rule_lang::{parse_rules, RuleError, RuleSet};
use crate::stats::summarize;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Rules {
        path: PathBuf,
        #[source]
        source: RuleError,
    },
    #[error("{path}: {source}")]
    Genome {
        path: PathBuf,
        #[source]
        source: GenomeError,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "p4gen",
    version,
    about = "Evolve P4-style programs from behavioral rules"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve a program for a rule file and emit it.
    Synth(SynthArgs),
    /// Score a genotype file against a rule file's trace.
    Eval(EvalArgs),
    /// Render a genotype file as P4 source.
    Emit(EmitArgs),
    /// Time repeated syntheses of the built-in network functions.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Units {
    All,
    Toplevel,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Rng seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds before giving up.
    #[arg(long)]
    pub wall_clock_limit: Option<f64>,
    /// Override a search parameter, e.g. `--param P_c=0.5`. Repeatable.
    #[arg(long = "param", value_name = "KEY=VAL")]
    pub params: Vec<String>,
    /// Crossover unit pool.
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ParamArgs {
    pub fn build(&self) -> Result<GpParams, CliError> {
        let mut p = GpParams::default();
        for a in &self.params {
            p.apply(a).map_err(CliError::Usage)?;
        }
        if let Some(s) = self.seed {
            p.seed = s;
        }
        if let Some(w) = self.wall_clock_limit {
            p.wall_clock_limit = w;
        }
        if let Some(u) = self.units {
            p.unit_selection = match u {
                Units::All => UnitSelection::All,
                Units::Toplevel => UnitSelection::TopLevel,
            };
        }
        p.validate().map_err(CliError::Usage)?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub rules: PathBuf,
    /// Output P4 file. Siblings `.body.p4`, `.genotype` and `.stats.json`
    /// are written next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Write the final evolution trace as JSON.
    #[arg(long, value_name = "PATH")]
    pub dump_trace: Option<PathBuf>,
    /// Write the register file as JSON.
    #[arg(long, value_name = "PATH")]
    pub dump_registers: Option<PathBuf>,
    /// Stream progress events as JSON lines on stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub rules: PathBuf,
    pub program: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_name = "PATH")]
    pub dump_trace: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub dump_registers: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    pub rules: PathBuf,
    pub program: PathBuf,
    /// Output P4 file; the body goes to the `.body.p4` sibling. Prints to
    /// stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Function suite.
    #[arg(long, default_value = "table1")]
    pub suite: String,
    /// Restrict to these functions. Repeatable.
    #[arg(long = "fn", value_name = "NAME")]
    pub functions: Vec<String>,
    /// Runs per function and parameter group.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Sweep one parameter, e.g. `--sweep P_c=0,0.5,1`.
    #[arg(long, value_name = "KEY=V1,V2,...")]
    pub sweep: Option<String>,
    /// CSV output; stdout when absent. The summary goes to the
    /// `.summary.csv` sibling (or stderr).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

pub fn main() -> ExitCode {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Eval(a) => cmd_eval(&a).map(|()| ExitCode::SUCCESS),
        Command::Emit(a) => cmd_emit(&a).map(|()| ExitCode::SUCCESS),
        Command::Bench(a) => cmd_bench(&a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_rules(path: &Path) -> Result<RuleSet, CliError> {
    parse_rules(&read(path)?).map_err(|source| CliError::Rules {
        path: path.to_owned(),
        source,
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Usage(e.to_string())),
    }
}

/// `out.p4` → `out` + `suffix`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.with_extension("");
    let mut s = stem.into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Serialize)]
struct StatsFile<'a> {
    rules: String,
    params: &'a GpParams,
    #[serde(flatten)]
    synthesis: &'a Synthesis,
}

pub fn cmd_synth(a: &SynthArgs) -> Result<ExitCode, CliError> {
    let rules = load_rules(&a.rules)?;
    let params = a.params.build()?;
    let rf = RegisterFile::new(&rules)?;
    if let Some(path) = &a.dump_registers {
        write(path, serde_json::to_string_pretty(&rf)?)?;
    }
    let out = a.output.clone().unwrap_or_else(|| {
        let stem = a.rules.file_stem().unwrap_or_default();
        PathBuf::from(stem).with_extension("p4")
    });

    let progress = a.progress;
    let result = with_pool(a.params.jobs, || {
        evolve_with(&rules, &params, |ev: &ProgressEvent| {
            if progress {
                if let Ok(line) = serde_json::to_string(ev) {
                    eprintln!("{line}");
                }
            }
        })
    })?;
    let (synthesis, code) = match result {
        Ok(s) => (s, ExitCode::SUCCESS),
        Err(EngineError::TimeBudgetExceeded(s)) => (*s, ExitCode::from(2)),
        Err(e) => return Err(e.into()),
    };

    if let Some(path) = &a.dump_trace {
        write(path, synthesis.trace.to_json())?;
    }
    let stats = StatsFile {
        rules: a.rules.display().to_string(),
        params: &params,
        synthesis: &synthesis,
    };
    write(
        &sibling(&out, ".stats.json"),
        serde_json::to_string_pretty(&stats)? + "\n",
    )?;
    write(
        &sibling(&out, ".genotype"),
        format_genotype(&synthesis.program, &rf),
    )?;
    if synthesis.solved {
        let emitted = emit(&synthesis.program, &rf)?;
        write(&out, &emitted.full_source)?;
        write(&sibling(&out, ".body.p4"), &emitted.body)?;
        eprintln!(
            "solved in {:.2}s ({} generations, {} restarts); wrote {}",
            synthesis.stats.wall_clock.as_secs_f64(),
            synthesis.stats.total_generations(),
            synthesis.stats.restarts,
            out.display()
        );
    } else {
        let best = synthesis
            .best_fitness
            .map(|f| f.to_string())
            .unwrap_or_else(|| "none".into());
        eprintln!(
            "wall-clock limit reached after {:.2}s; best fitness {best}",
            synthesis.stats.wall_clock.as_secs_f64()
        );
    }
    Ok(code)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let rules = load_rules(&a.rules)?;
    let params = a.params.build()?;
    let rf = RegisterFile::new(&rules)?;
    let program = parse_genotype(&read(&a.program)?, &rf).map_err(|source| CliError::Genome {
        path: a.program.clone(),
        source,
    })?;
    let trace = generate_trace(
        &rules,
        &rf,
        params.trace_multiplier,
        &mut ChaCha8Rng::seed_from_u64(params.seed),
    )?;
    if let Some(path) = &a.dump_trace {
        write(path, trace.to_json())?;
    }
    if let Some(path) = &a.dump_registers {
        write(path, serde_json::to_string_pretty(&rf)?)?;
    }
    let reports = PacketReport::for_trace(&program, &trace, &rf)?;
    let mut out = io::stdout().lock();
    let io_err = |source| CliError::Io {
        path: "<stdout>".into(),
        source,
    };
    for (r, pkt) in reports.iter().zip(&trace.packets) {
        let inputs: Vec<String> = pkt.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            out,
            "packet {} [{}] {}: {}/{}",
            r.index,
            r.source,
            inputs.join(" "),
            r.satisfied(),
            r.conditions.len()
        )
        .map_err(io_err)?;
        for (cond, (_, ok)) in pkt.output_conditions.iter().zip(&r.conditions) {
            let expected: Vec<String> = cond.expected.iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "    {} = {} ({} {}) {}",
                cond.attribute,
                r.outputs[&cond.attribute],
                cond.op.keyword(),
                expected.join(", "),
                if *ok { "ok" } else { "FAIL" }
            )
            .map_err(io_err)?;
        }
    }
    let f = fitness(&program, &trace, &rf)?;
    writeln!(out, "fitness: {f}").map_err(io_err)?;
    Ok(())
}

pub fn cmd_emit(a: &EmitArgs) -> Result<(), CliError> {
    let rules = load_rules(&a.rules)?;
    let rf = RegisterFile::new(&rules)?;
    let program = parse_genotype(&read(&a.program)?, &rf).map_err(|source| CliError::Genome {
        path: a.program.clone(),
        source,
    })?;
    let emitted = emit(&program, &rf)?;
    match &a.output {
        Some(out) => {
            write(out, &emitted.full_source)?;
            write(&sibling(out, ".body.p4"), &emitted.body)?;
        }
        None => print!("{}", emitted.full_source),
    }
    Ok(())
}

/// One bench CSV row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub function: String,
    pub seed: u64,
    pub seconds: f64,
    pub generations: usize,
    pub restarts: usize,
    pub solved: bool,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    function: String,
    runs: usize,
    solved: usize,
    min: f64,
    lower_hinge: f64,
    median: f64,
    upper_hinge: f64,
    max: f64,
    whisker_low: f64,
    whisker_high: f64,
    mean: f64,
}

fn parse_sweep(sweep: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, values) = sweep
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected KEY=V1,V2,..., got `{sweep}`")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::Usage(format!("sweep `{sweep}` lists no values")));
    }
    Ok((key.trim().to_string(), values))
}

/// Runs one synthesis and turns the outcome into a row. Failures other than
/// a timeout are reported and recorded as unsolved.
fn bench_run(label: &str, rules: &RuleSet, params: &GpParams) -> BenchRow {
    let start = std::time::Instant::now();
    let (solved, generations, restarts) = match crate::engine::evolve(rules, params) {
        Ok(s) => (true, s.stats.total_generations(), s.stats.restarts),
        Err(EngineError::TimeBudgetExceeded(s)) => {
            (false, s.stats.total_generations(), s.stats.restarts)
        }
        Err(e) => {
            eprintln!("{label} seed {}: {e}", params.seed);
            (false, 0, 0)
        }
    };
    BenchRow {
        function: label.to_string(),
        seed: params.seed,
        seconds: start.elapsed().as_secs_f64(),
        generations,
        restarts,
        solved,
    }
}

pub fn bench_rows(a: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    if a.suite != "table1" {
        return Err(CliError::Usage(format!("unknown suite `{}`", a.suite)));
    }
    let base = a.params.build()?;
    let mut functions = Vec::new();
    if a.functions.is_empty() {
        functions.extend(fixtures::TABLE1.iter().map(|(n, r)| (n.to_string(), *r)));
    } else {
        for name in &a.functions {
            let rules = fixtures::by_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown function `{name}`")))?;
            functions.push((name.clone(), rules));
        }
    }
    let parsed: Vec<(String, RuleSet)> = functions
        .into_iter()
        .map(|(n, text)| {
            parse_rules(text)
                .map(|rs| (n.clone(), rs))
                .map_err(|source| CliError::Rules {
                    path: n.into(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let groups: Vec<(Option<String>, GpParams)> = match &a.sweep {
        None => vec![(None, base.clone())],
        Some(sweep) => {
            let (key, values) = parse_sweep(sweep)?;
            values
                .into_iter()
                .map(|v| {
                    let mut p = base.clone();
                    p.set(&key, &v).map_err(CliError::Usage)?;
                    p.validate().map_err(CliError::Usage)?;
                    Ok((Some(format!("{key}={v}")), p))
                })
                .collect::<Result<_, CliError>>()?
        }
    };

    let mut tasks = Vec::new();
    for (tag, params) in &groups {
        for (name, rules) in &parsed {
            let label = match tag {
                Some(t) => format!("{name}[{t}]"),
                None => name.clone(),
            };
            for rep in 0..a.reps {
                let mut p = params.clone();
                p.seed = base.seed.wrapping_add(rep as u64);
                tasks.push((label.clone(), rules, p));
            }
        }
    }
    with_pool(a.params.jobs, || {
        tasks
            .par_iter()
            .map(|(label, rules, p)| bench_run(label, rules, p))
            .collect()
    })
}

pub fn summary_rows(rows: &[BenchRow]) -> Vec<(String, usize, usize, crate::stats::Summary)> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.function.as_str()) {
            labels.push(&r.function);
        }
    }
    labels
        .into_iter()
        .filter_map(|label| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| r.function == label).collect();
            let secs: Vec<f64> = group.iter().map(|r| r.seconds).collect();
            let solved = group.iter().filter(|r| r.solved).count();
            summarize(&secs).map(|s| (label.to_string(), group.len(), solved, s))
        })
        .collect()
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let rows = bench_rows(a)?;
    let summary: Vec<SummaryRow> = summary_rows(&rows)
        .into_iter()
        .map(|(function, runs, solved, s)| SummaryRow {
            function,
            runs,
            solved,
            min: s.min,
            lower_hinge: s.lower_hinge,
            median: s.median,
            upper_hinge: s.upper_hinge,
            max: s.max,
            whisker_low: s.whisker_low,
            whisker_high: s.whisker_high,
            mean: s.mean,
        })
        .collect();

    fn write_csv<W: io::Write, T: Serialize>(w: W, items: &[T]) -> Result<(), CliError> {
        let mut csv = csv::Writer::from_writer(w);
        for it in items {
            csv.serialize(it)?;
        }
        csv.flush().map_err(|source| CliError::Io {
            path: "<csv>".into(),
            source,
        })
    }

    match &a.output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            write_csv(file, &rows)?;
            let spath = sibling(path, ".summary.csv");
            let sfile = fs::File::create(&spath).map_err(|source| CliError::Io {
                path: spath.clone(),
                source,
            })?;
            write_csv(sfile, &summary)?;
        }
        None => {
            write_csv(io::stdout().lock(), &rows)?;
            write_csv(io::stderr().lock(), &summary)?;
        }
    }
    Ok(())
}
