use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nilflow::checker::{check_composed, CheckReport, Verdict, Witness};
use nilflow::corpus::{
    corpus_run, verdict_word, CorpusOptions, CorpusReport, JobConfig, OutputFormat,
};
use nilflow::derive::derive;
use nilflow::export::export_checker_input;
use nilflow::frontend::{parse_expression, pretty};
use nilflow::interp::{run, Outcome, DEFAULT_FUEL};
use nilflow::selfcomp::{compose, ComposedPds, Mode};
use nilflow::{Domain, Error, Program};

const EXIT_INSECURE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;
const EXIT_BUDGET: u8 = 69;

#[derive(Parser)]
#[command(
    name = "nilflow",
    version,
    about = "Noninterference checker for .nil programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate, then print the canonical program.
    Parse { file: PathBuf },
    /// Run the reference interpreter.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = nilflow::value::DEFAULT_BITS)]
        bits: u32,
        /// Initial value of a global, as `name=value`. Repeatable.
        #[arg(long = "input", value_parser = parse_binding)]
        inputs: Vec<(String, u64)>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Print the symbolic pushdown system of a program.
    Derive {
        file: PathBuf,
        #[arg(long, default_value_t = nilflow::value::DEFAULT_BITS)]
        bits: u32,
        /// Compare against a stored dump instead of printing.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Print the self-composed system.
    Compose {
        #[command(flatten)]
        job: JobArgs,
        /// Print rule and conjunct counts instead of the dump.
        #[arg(long)]
        stats: bool,
    },
    /// Decide termination-insensitive noninterference.
    Check {
        #[command(flatten)]
        job: JobArgs,
        /// Print the counterexample run of an insecure program.
        #[arg(long)]
        witness: bool,
        #[arg(long)]
        stats: bool,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Write the composed system in the external model checker format.
    Export {
        #[command(flatten)]
        job: JobArgs,
    },
    /// Check every program of a directory against its sidecar.
    Corpus {
        dir: PathBuf,
        /// Check at this width instead of each sidecar's.
        #[arg(long)]
        bits: Option<u32>,
        /// Skip the brute-force cross-check.
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        stats: bool,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
}

#[derive(Args)]
struct JobArgs {
    file: PathBuf,
    #[arg(long, default_value_t = nilflow::value::DEFAULT_BITS)]
    bits: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Compact)]
    mode: ModeArg,
    /// Extra condition on the initial pair; `x` is the first run, `xt`
    /// the second. Repeatable.
    #[arg(long)]
    assume: Vec<String>,
    /// Observe these globals instead of the low ones. Comma separated.
    #[arg(long, value_delimiter = ',')]
    observe: Option<Vec<String>>,
    /// Observe the high globals (integrity).
    #[arg(long)]
    integrity: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ordinary,
    Compact,
    Contracted,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Ordinary => Mode::Ordinary,
            ModeArg::Compact => Mode::Compact,
            ModeArg::Contracted => Mode::Contracted,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> OutputFormat {
        match f {
            Format::Human => OutputFormat::Human,
            Format::Machine => OutputFormat::Machine,
        }
    }
}

fn parse_binding(s: &str) -> Result<(String, u64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value = value
        .trim()
        .parse()
        .map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

/// Failure of a subcommand, with the exit code it maps to.
enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

macro_rules! impl_from_stage {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Pipeline(e.into())
            }
        }
    )*};
}

impl_from_stage!(
    nilflow::FrontendError,
    nilflow::DomainError,
    nilflow::pds::PdsError,
    nilflow::ComposeError,
    nilflow::CheckError,
    nilflow::interp::InterpError
);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_budget() {
                EXIT_BUDGET
            } else {
                EXIT_INPUT
            })
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Parse { file } => {
            let program = JobConfig::new(&file).load()?;
            print!("{}", pretty::program(&program));
            Ok(0)
        }
        Command::Run {
            file,
            bits,
            inputs,
            fuel,
        } => {
            let program = JobConfig::new(&file).load()?;
            let inputs: BTreeMap<String, u64> = inputs.into_iter().collect();
            let result = run(&program, Domain::new(bits)?, &inputs, fuel)?;
            match result.outcome {
                Outcome::Final(store) => {
                    for (name, value) in store.globals() {
                        println!("{name} = {value}");
                    }
                    Ok(0)
                }
                Outcome::Diverged => {
                    println!("diverged after {} steps", result.steps_used);
                    Ok(EXIT_DIVERGED)
                }
            }
        }
        Command::Derive { file, bits, golden } => {
            let program = JobConfig::new(&file).load()?;
            let dump = derive(&program, bits)?.dump();
            match golden {
                None => {
                    print!("{dump}");
                    Ok(0)
                }
                Some(path) => compare_golden(&path, &dump),
            }
        }
        Command::Compose { job, stats } => {
            let (_, job, composed) = composed(job)?;
            if stats {
                let s = composed.pds.stats();
                println!(
                    "mode {}: {} rules, {} conjuncts",
                    job.mode, s.rules, s.conjuncts
                );
            } else {
                print!("{}", composed.pds.dump());
            }
            Ok(0)
        }
        Command::Check {
            job,
            witness,
            stats,
            format,
        } => {
            let (_, job, composed) = composed(job)?;
            let report = check_composed(&composed, &job.assume)?;
            match format {
                Format::Human => print_check(&composed, &report, witness, stats),
                Format::Machine => print_record(&CheckRecord::new(&job, &report, witness, stats)),
            }
            Ok(if report.verdict.is_secure() {
                0
            } else {
                EXIT_INSECURE
            })
        }
        Command::Export { job } => {
            let (_, _, composed) = composed(job)?;
            print!("{}", export_checker_input(&composed));
            Ok(0)
        }
        Command::Corpus {
            dir,
            bits,
            no_oracle,
            stats,
            format,
        } => {
            let report = corpus_run(
                &dir,
                CorpusOptions {
                    bits,
                    oracle: !no_oracle,
                },
            )?;
            match format {
                Format::Human => print_corpus(&report, stats),
                Format::Machine => {
                    for e in &report.entries {
                        print_record(e);
                    }
                }
            }
            Ok(if report.mismatches() == 0 { 0 } else { 1 })
        }
    }
}

fn composed(args: JobArgs) -> Result<(Program, JobConfig, ComposedPds), Failure> {
    let assume = args
        .assume
        .iter()
        .map(|a| parse_expression(a))
        .collect::<Result<Vec<_>, _>>()?;
    let job = JobConfig {
        bits: args.bits,
        mode: args.mode.into(),
        integrity: args.integrity,
        observe: args.observe,
        assume,
        ..JobConfig::new(&args.file)
    };
    if job.integrity && job.observe.is_some() {
        return Err(Failure::Usage(
            "--integrity and --observe are exclusive".into(),
        ));
    }
    let program = job.load()?;
    let spec = job.spec(&program)?;
    let max = program.max_constant();
    if !Domain::new(job.bits)?.contains(max) {
        return Err(nilflow::DomainError::ConstantTooLarge {
            constant: max,
            bits: job.bits,
        }
        .into());
    }
    let pds = derive(&program, job.bits)?;
    let composed = compose(&pds, job.mode, &spec.observed)?;
    Ok((program, job, composed))
}

fn compare_golden(path: &Path, dump: &str) -> Result<u8, Failure> {
    let expected = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if expected == dump {
        println!("golden match: {}", path.display());
        return Ok(0);
    }
    println!("golden mismatch: {}", path.display());
    let (want, got): (Vec<&str>, Vec<&str>) = (expected.lines().collect(), dump.lines().collect());
    for i in 0..want.len().max(got.len()) {
        let (w, g) = (want.get(i), got.get(i));
        if w != g {
            println!(
                "line {}:\n  expected: {}\n  actual:   {}",
                i + 1,
                w.unwrap_or(&"<none>"),
                g.unwrap_or(&"<none>")
            );
        }
    }
    Ok(1)
}

fn print_check(composed: &ComposedPds, report: &CheckReport, witness: bool, stats: bool) {
    match &report.verdict {
        Verdict::Secure => println!("SECURE"),
        Verdict::Insecure(w) => {
            println!("INSECURE");
            println!("  unequal at the end: {}", w.unequal.join(", "));
            if !w.differing_inputs.is_empty() {
                println!("  inputs that differ: {}", w.differing_inputs.join(", "));
            }
            if let Some(edge) = &w.flow_edge {
                println!(
                    "  flow into {} at {}:{} `{}`",
                    edge.variable, edge.span.line, edge.span.col, edge.origin
                );
            }
            if witness {
                print_witness(composed, w);
            }
        }
    }
    if stats {
        let s = &report.stats;
        println!(
            "mode {}, N={}: {} rules, {} conjuncts, {} initial configurations, {} automaton states, {} transitions, {} ground steps, {:.3}s",
            s.mode,
            s.bits,
            s.rules,
            s.conjuncts,
            s.initial_configs,
            s.automaton_states,
            s.automaton_transitions,
            s.rules_fired,
            s.elapsed.as_secs_f64()
        );
    }
}

/// One row per step: the control point reached, the source of the rule,
/// and every variable of both copies.
fn print_witness(composed: &ComposedPds, w: &Witness) {
    let names = &composed.original_globals;
    let idx = |n: &str| w.globals.iter().position(|g| g == n).unwrap();
    let pairs = |values: &[u64]| {
        names
            .iter()
            .map(|n| {
                format!(
                    "{n}={} {n}t={}",
                    values[idx(n)],
                    values[idx(&format!("{n}t"))]
                )
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!(
        "  {:>4}  {:<14} {:<8} {:<28} globals after",
        "step", "rule", "at", "origin"
    );
    println!(
        "  {:>4}  {:<14} {:<8} {:<28} {}",
        0,
        "",
        "",
        "(initial)",
        pairs(&w.initial)
    );
    for (i, s) in w.steps.iter().enumerate() {
        println!(
            "  {:>4}  {:<14} {:<8} {:<28} {}",
            i + 1,
            format!("{} -> {}", s.lhs, s.rhs),
            format!("{}:{}", s.line, s.col),
            s.origin,
            pairs(&s.globals)
        );
    }
}

#[derive(Serialize)]
struct CheckRecord<'a> {
    file: String,
    mode: Mode,
    bits: u32,
    verdict: &'static str,
    unequal: Vec<String>,
    flow_edge: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<&'a Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<&'a nilflow::checker::CheckStats>,
}

impl<'a> CheckRecord<'a> {
    fn new(job: &JobConfig, report: &'a CheckReport, witness: bool, stats: bool) -> Self {
        let w = report.verdict.witness();
        CheckRecord {
            file: job.source.display().to_string(),
            mode: job.mode,
            bits: job.bits,
            verdict: verdict_word(report.verdict.is_secure()),
            unequal: w.map(|w| w.unequal.clone()).unwrap_or_default(),
            flow_edge: w
                .and_then(|w| w.flow_edge.as_ref())
                .map(|e| e.origin.clone()),
            witness: w.filter(|_| witness),
            stats: stats.then_some(&report.stats),
        }
    }
}

fn print_record(record: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string(record).expect("records serialize")
    );
}

fn print_corpus(report: &CorpusReport, stats: bool) {
    for e in &report.entries {
        let expected = e
            .expected
            .map(|x| verdict_word(x.is_secure()))
            .unwrap_or("?");
        let status = if e.mismatches.is_empty() {
            "ok"
        } else {
            "MISMATCH"
        };
        println!("{:<20} expected {:<8} {status}", e.name, expected);
        for m in &e.mismatches {
            println!("    {m}");
        }
        if stats {
            for r in &e.runs {
                println!(
                    "    {:<10} N={} {:<8} {:>4} rules {:>5} conjuncts",
                    r.mode.to_string(),
                    r.bits,
                    r.secure.map(verdict_word).unwrap_or("error"),
                    r.rules,
                    r.conjuncts
                );
            }
        }
    }
    println!(
        "{} programs, {} mismatches",
        report.entries.len(),
        report.mismatches()
    );
}
