//! Job configuration and batch runs over a directory of programs with
//! expected-verdict sidecars.
//!
//! Each `name.nil` in a corpus directory has a `name.expect.toml`:
//!
//! ```toml
//! expected = "insecure"      # or "secure"
//! bits = [1, 2]              # widths to check at (default [2])
//! modes = ["compact"]        # default: all three
//! observe = ["l"]            # default: the low globals
//! integrity = false          # observe the high globals instead
//! assume = ["l == 0"]        # extra conditions on the initial pair
//! terminating = true         # every run halts; enables the oracle
//! provenance = "oracle"      # where the expectation comes from
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::checker::{check_ti, Verdict};
use crate::error::Error;
use crate::frontend::ast::{Expr, Program};
use crate::frontend::{parse_expression, parse_program};
use crate::interp::{brute_force_pair_oracle, DEFAULT_FUEL};
use crate::security::SecuritySpec;
use crate::selfcomp::Mode;
use crate::value::Domain;

/// Widest setting at which the corpus run consults the brute-force oracle.
pub const ORACLE_MAX_BITS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Human,
    Machine,
}

/// Settings of a single pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub source: PathBuf,
    pub bits: u32,
    pub mode: Mode,
    pub integrity: bool,
    /// Overrides the label-derived observed set.
    pub observe: Option<Vec<String>>,
    pub fuel: u64,
    pub assume: Vec<Expr>,
    pub format: OutputFormat,
    pub golden: Option<PathBuf>,
}

impl JobConfig {
    pub fn new(source: impl Into<PathBuf>) -> Self {
        JobConfig {
            source: source.into(),
            bits: crate::value::DEFAULT_BITS,
            mode: Mode::Compact,
            integrity: false,
            observe: None,
            fuel: DEFAULT_FUEL,
            assume: Vec::new(),
            format: OutputFormat::Human,
            golden: None,
        }
    }

    pub fn load(&self) -> Result<Program, Error> {
        let text = std::fs::read_to_string(&self.source).map_err(|source| Error::Io {
            path: self.source.clone(),
            source,
        })?;
        Ok(parse_program(&text)?)
    }

    pub fn spec(&self, program: &Program) -> Result<SecuritySpec, Error> {
        let mut spec = if self.integrity {
            SecuritySpec::integrity(program)
        } else {
            SecuritySpec::confidentiality(program)
        };
        if let Some(o) = &self.observe {
            spec = spec.with_observed(o.clone());
        }
        spec = spec.with_assumptions(self.assume.clone());
        spec.validate(program)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expected {
    Secure,
    Insecure,
}

impl Expected {
    pub fn is_secure(self) -> bool {
        self == Expected::Secure
    }
}

fn default_bits() -> Vec<u32> {
    vec![crate::value::DEFAULT_BITS]
}

fn all_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

fn yes() -> bool {
    true
}

/// Contents of an `.expect.toml` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub expected: Expected,
    #[serde(default = "default_bits")]
    pub bits: Vec<u32>,
    #[serde(default = "all_modes")]
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub observe: Option<Vec<String>>,
    #[serde(default)]
    pub integrity: bool,
    #[serde(default)]
    pub assume: Vec<String>,
    #[serde(default = "yes")]
    pub terminating: bool,
    pub provenance: String,
}

impl Sidecar {
    pub fn parse(text: &str, path: &Path) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Sidecar {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn job(&self, source: &Path, bits: u32, mode: Mode) -> Result<JobConfig, Error> {
        let assume = self
            .assume
            .iter()
            .map(|a| parse_expression(a))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(JobConfig {
            bits,
            mode,
            integrity: self.integrity,
            observe: self.observe.clone(),
            assume,
            ..JobConfig::new(source)
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub mode: Mode,
    pub bits: u32,
    /// `Some(true)` for SECURE; `None` when the run failed.
    pub secure: Option<bool>,
    pub error: Option<String>,
    pub rules: usize,
    pub conjuncts: usize,
    /// Wall-clock time; left out of serialized records so they stay
    /// reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRecord {
    pub bits: u32,
    pub secure: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusEntry {
    pub name: String,
    pub expected: Option<Expected>,
    pub runs: Vec<RunRecord>,
    pub oracle: Vec<OracleRecord>,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub entries: Vec<CorpusEntry>,
}

impl CorpusReport {
    pub fn mismatches(&self) -> usize {
        self.entries.iter().map(|e| e.mismatches.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusOptions {
    /// Check at this width instead of the sidecar's.
    pub bits: Option<u32>,
    /// Cross-check terminating programs against the brute-force oracle.
    pub oracle: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            bits: None,
            oracle: true,
        }
    }
}

/// Corpus members of a directory, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "nil") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn sidecar_path(source: &Path) -> PathBuf {
    source.with_extension("expect.toml")
}

/// Checks every program in `dir` against its sidecar. Files run in
/// parallel; the report keeps file-name order.
pub fn corpus_run(dir: &Path, options: CorpusOptions) -> Result<CorpusReport, Error> {
    let files = corpus_files(dir)?;
    let entries = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| s.spawn(move || run_entry(f, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("corpus job panicked"))
            .collect()
    });
    Ok(CorpusReport { entries })
}

fn run_entry(source: &Path, options: CorpusOptions) -> CorpusEntry {
    let name = source
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    let mut entry = CorpusEntry {
        name,
        expected: None,
        runs: Vec::new(),
        oracle: Vec::new(),
        mismatches: Vec::new(),
    };
    if let Err(e) = fill_entry(source, options, &mut entry) {
        entry.mismatches.push(e.to_string());
    }
    entry
}

fn fill_entry(source: &Path, options: CorpusOptions, entry: &mut CorpusEntry) -> Result<(), Error> {
    let side_path = sidecar_path(source);
    let text = std::fs::read_to_string(&side_path).map_err(|source| Error::Io {
        path: side_path.clone(),
        source,
    })?;
    let side = Sidecar::parse(&text, &side_path)?;
    entry.expected = Some(side.expected);
    let widths = match options.bits {
        Some(b) => vec![b],
        None => side.bits.clone(),
    };
    let program = JobConfig::new(source).load()?;

    for &bits in &widths {
        for &mode in &side.modes {
            let job = side.job(source, bits, mode)?;
            let spec = job.spec(&program)?;
            let record = match check_ti(&program, &spec, mode, bits) {
                Ok(r) => RunRecord {
                    mode,
                    bits,
                    secure: Some(matches!(r.verdict, Verdict::Secure)),
                    error: None,
                    rules: r.stats.rules,
                    conjuncts: r.stats.conjuncts,
                    elapsed: r.stats.elapsed,
                },
                Err(e) => RunRecord {
                    mode,
                    bits,
                    secure: None,
                    error: Some(e.to_string()),
                    rules: 0,
                    conjuncts: 0,
                    elapsed: Duration::ZERO,
                },
            };
            match (record.secure, &record.error) {
                (Some(s), _) if s != side.expected.is_secure() => entry.mismatches.push(format!(
                    "{mode} at N={bits}: expected {:?}, got {}",
                    side.expected,
                    verdict_word(s)
                )),
                (None, Some(e)) => entry.mismatches.push(format!("{mode} at N={bits}: {e}")),
                _ => {}
            }
            entry.runs.push(record);
        }

        if options.oracle && side.terminating && bits <= ORACLE_MAX_BITS {
            let spec = side.job(source, bits, Mode::Compact)?.spec(&program)?;
            let record =
                match brute_force_pair_oracle(&program, &spec, Domain::new(bits)?, DEFAULT_FUEL) {
                    Ok(r) => OracleRecord {
                        bits,
                        secure: Some(r.verdict.is_secure()),
                        error: None,
                    },
                    Err(e) => OracleRecord {
                        bits,
                        secure: None,
                        error: Some(e.to_string()),
                    },
                };
            if let Some(o) = record.secure {
                for run in entry.runs.iter().filter(|r| r.bits == bits) {
                    if let Some(s) = run.secure {
                        if s != o {
                            entry.mismatches.push(format!(
                                "{} at N={bits}: checker says {}, oracle says {}",
                                run.mode,
                                verdict_word(s),
                                verdict_word(o)
                            ));
                        }
                    }
                }
            }
            entry.oracle.push(record);
        }
    }
    Ok(())
}

pub fn verdict_word(secure: bool) -> &'static str {
    if secure {
        "SECURE"
    } else {
        "INSECURE"
    }
}
