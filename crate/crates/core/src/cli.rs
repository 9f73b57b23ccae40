//! Batch front end: run configs, one-shot diagonalization and enumeration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::code::layout::CfgParams;
use crate::code::{parse_sequence, Address, ParseError};
use crate::diag::{diagonalize, MemoryTrace, Mode};
use crate::env::{arithmetic_env, guarded_env_from, nested_env, parameter_env, EnvError, Environment, NestedScript};
use crate::evolution::{ConfigError, Detection, Evolution, EvolutionConfig, GenerationReport};
use crate::lang::{eval, Enumeration, EvalBudget, Generator, Grammar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "selfedit", version, about = "Evolve self-editing codes and query the program enumeration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the trace path in the config.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Find the simplest program extrapolating a sequence of codes.
    Diag {
        /// Comma-separated codes, e.g. "1,2,3".
        #[arg(long)]
        seq: String,
        #[arg(long, default_value_t = 5000)]
        max_candidates: u64,
        /// Evaluation step budget per candidate run.
        #[arg(long, default_value_t = 1000)]
        steps: u64,
    },
    /// List the first programs of the enumeration.
    Enum {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write trace: {0}")]
    Write(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("nested environment needs exactly one of `subexperiments` or `count`")]
    NestedShape,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot parse sequence: {0}")]
    Sequence(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvSpec {
    Arithmetic {
        start: i64,
        step: i64,
        length: usize,
    },
    Nested {
        #[serde(default)]
        subexperiments: Option<Vec<(i64, i64)>>,
        /// Canonical script with this many sub-experiments.
        #[serde(default)]
        count: Option<usize>,
        terms: usize,
    },
    Guarded {
        #[serde(default)]
        start: i64,
        period: usize,
        action_step: i64,
        length: usize,
    },
    Parameter {
        schedule: Vec<i64>,
    },
}

impl EnvSpec {
    pub fn build(&self) -> Result<Environment, CliError> {
        Ok(match self {
            EnvSpec::Arithmetic { start, step, length } => arithmetic_env(*start, *step, *length)?,
            EnvSpec::Nested { subexperiments, count, terms } => {
                let script = match (subexperiments, count) {
                    (Some(s), None) => NestedScript { subexperiments: s.clone(), terms: *terms },
                    (None, Some(k)) => NestedScript::canonical(*k, *terms),
                    _ => return Err(CliError::NestedShape),
                };
                nested_env(&script)?
            }
            EnvSpec::Guarded { start, period, action_step, length } => {
                guarded_env_from(*start, *period, *action_step, *length)?
            }
            EnvSpec::Parameter { schedule } => parameter_env(schedule.clone())?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    Quiet,
    #[default]
    Summary,
    /// Summary plus every report line on standard output.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfgSpec {
    pub n: i64,
    pub p_num: i64,
    pub p_den: i64,
    pub k_max: i64,
    pub s_budget: i64,
}

impl Default for CfgSpec {
    fn default() -> Self {
        let c = CfgParams::default();
        CfgSpec { n: c.n, p_num: c.p_num, p_den: c.p_den, k_max: c.k_max, s_budget: c.s_budget }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSpec {
    pub k_a: u64,
    pub k_b: u64,
    pub s_min: usize,
    pub many: usize,
    pub rank_max: usize,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        let d = Detection::default();
        DetectionSpec { k_a: d.k_a, k_b: d.k_b, s_min: d.s_min, many: d.many, rank_max: d.rank_max }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrammarSpec {
    pub int_bound: i64,
    pub max_addr_entry: usize,
    pub tokens: usize,
    pub max_size: usize,
}

impl Default for GrammarSpec {
    fn default() -> Self {
        let g = Grammar::default();
        GrammarSpec { int_bound: g.int_bound, max_addr_entry: g.max_addr_entry, tokens: g.tokens, max_size: g.max_size }
    }
}

/// The JSON run config. Every field except `environment` has a default.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvSpec,
    #[serde(default = "defaults::population")]
    pub population: usize,
    #[serde(default = "defaults::descendants")]
    pub descendants: usize,
    #[serde(default = "defaults::warmup")]
    pub warmup: usize,
    #[serde(default = "defaults::memory")]
    pub memory: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default)]
    pub cfg: CfgSpec,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub grammar: GrammarSpec,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub verbosity: Verbosity,
}

mod defaults {
    use crate::evolution::EvolutionConfig;

    pub fn population() -> usize {
        EvolutionConfig::default().population
    }
    pub fn descendants() -> usize {
        EvolutionConfig::default().descendants
    }
    pub fn warmup() -> usize {
        EvolutionConfig::default().warmup
    }
    pub fn memory() -> usize {
        EvolutionConfig::default().memory
    }
    pub fn steps() -> usize {
        EvolutionConfig::default().steps
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn evolution(&self) -> EvolutionConfig {
        let (c, d, g) = (&self.cfg, &self.detection, &self.grammar);
        EvolutionConfig {
            population: self.population,
            descendants: self.descendants,
            warmup: self.warmup,
            memory: self.memory,
            seed: self.seed,
            cfg: CfgParams { n: c.n, p_num: c.p_num, p_den: c.p_den, k_max: c.k_max, s_budget: c.s_budget },
            steps: self.steps,
            detection: Detection { k_a: d.k_a, k_b: d.k_b, s_min: d.s_min, many: d.many, rank_max: d.rank_max },
            grammar: Grammar {
                int_bound: g.int_bound,
                max_addr_entry: g.max_addr_entry,
                tokens: g.tokens,
                max_size: g.max_size,
            },
        }
    }
}

/// Everything `run` needs, validated.
struct Prepared {
    engine: Evolution,
    env: Environment,
    trace: Option<PathBuf>,
    verbosity: Verbosity,
}

fn prepare(path: &Path, seed: Option<u64>, trace: Option<&Path>) -> Result<Prepared, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let env = config.environment.build()?;
    let evo = config.evolution();
    if evo.steps > env.length {
        return Err(ConfigError::Steps { steps: evo.steps, length: env.length }.into());
    }
    let engine = Evolution::new(evo)?;
    Ok(Prepared { engine, env, trace: trace.map(Path::to_owned).or(config.trace), verbosity: config.verbosity })
}

fn write_summary(out: &mut dyn Write, reports: &[GenerationReport]) -> std::io::Result<()> {
    let extinct = reports.last().is_some_and(|r| r.extinct);
    let survived = reports.iter().filter(|r| !r.extinct).count();
    writeln!(out, "generations survived: {survived} of {}", reports.len())?;
    if extinct {
        writeln!(out, "extinct at generation {}", reports.len() - 1)?;
    }
    let last = reports.last().map_or(0.0, |r| r.correct_fraction);
    writeln!(out, "final correct_frac: {last:.6}")?;
    let mut seen: Vec<(String, String, u64, String)> = Vec::new();
    for r in reports.iter().flat_map(|r| &r.recursors) {
        let key = (r.addr.to_string(), r.prog.to_string(), r.index, r.mode.to_string());
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    writeln!(out, "recursors found: {}", seen.len())?;
    for (addr, prog, index, mode) in seen {
        writeln!(out, "  {addr} {prog} index {index} {mode}")?;
    }
    Ok(())
}

fn execute(p: Prepared, out: &mut dyn Write) -> Result<bool, CliError> {
    let mut sink = match &p.trace {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let mut reports = Vec::new();
    let mut failure: Option<std::io::Error> = None;
    p.engine.run_with(&p.env, |_, r| {
        let line = r.to_json_line();
        if failure.is_none() {
            if let Some(w) = sink.as_mut() {
                if let Err(e) = writeln!(w, "{line}") {
                    failure = Some(e);
                }
            }
            if p.verbosity == Verbosity::Full {
                if let Err(e) = writeln!(out, "{line}") {
                    failure = Some(e);
                }
            }
        }
        reports.push(r.clone());
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    if let Some(mut w) = sink {
        w.flush()?;
    }
    if p.verbosity != Verbosity::Quiet {
        write_summary(out, &reports)?;
    }
    Ok(reports.last().is_some_and(|r| r.extinct))
}

/// Exit 0 on completion, 1 on extinction, 2 on any config or I/O error.
pub fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    trace: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let result = prepare(config, seed, trace).and_then(|p| execute(p, out));
    match result {
        Ok(false) => EXIT_OK,
        Ok(true) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Prints the simplest fitting program, its index and the next three terms.
/// Exit 1 when nothing fits within `max_candidates`, 2 on a parse error.
pub fn cmd_diag(seq: &str, max_candidates: u64, steps: u64, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let codes = match parse_sequence(seq) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {}", CliError::from(e));
            return EXIT_USAGE;
        }
    };
    let budget = EvalBudget::with_steps(steps);
    let gen = Generator::new(Enumeration::new(Grammar::default()));
    let trace = MemoryTrace::new(codes);
    let Some(found) = diagonalize(&trace, &Address::root(), &gen, max_candidates, budget, Mode::Projected) else {
        let _ = writeln!(err, "no program within {max_candidates} candidates fits");
        return EXIT_FAILED;
    };
    let mut next = Vec::new();
    let mut cur = trace.last().cloned();
    while next.len() < 3 {
        match cur.as_ref().map(|c| eval(&found.program, c, budget)) {
            Some(Ok(v)) => {
                next.push(v.to_string());
                cur = Some(v);
            }
            _ => break,
        }
    }
    let _ = writeln!(out, "{}", found.program);
    let _ = writeln!(out, "index: {}", found.found_at_index);
    let _ = writeln!(out, "next: {}", next.join(","));
    EXIT_OK
}

/// Prints `i: PROGRAM` for the first `count` yields; stops early at exhaustion.
pub fn cmd_enum(count: u64, out: &mut dyn Write) -> i32 {
    let gen = Generator::new(Enumeration::new(Grammar::default()));
    for (i, p) in gen.take(count.try_into().unwrap_or(usize::MAX)).enumerate() {
        let _ = writeln!(out, "{i}: {p}");
    }
    EXIT_OK
}

pub fn dispatch(cli: Cli) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    match cli.command {
        Command::Run { config, seed, trace } => cmd_run(&config, seed, trace.as_deref(), &mut out, &mut err),
        Command::Diag { seq, max_candidates, steps } => cmd_diag(&seq, max_candidates, steps, &mut out, &mut err),
        Command::Enum { count } => cmd_enum(count, &mut out),
    }
}
