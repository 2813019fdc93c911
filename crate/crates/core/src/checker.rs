//! Safety checking of composed systems by post* saturation.
//!
//! The reachable configurations of a pushdown system from a regular set
//! form a regular set; [`PostStar`] computes an automaton for them. The
//! composed system is insecure iff some reachable configuration sits at
//! the second copy's exit with an observed pair unequal.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::derive::derive;
use crate::frontend::ast::{Program, Span};
use crate::interp::DEFAULT_FUEL;
use crate::pds::{
    pds_exec, CompiledPds, Configuration, GroundRhs, GroundRule, Halted, PdsError, Successors,
    Symbol,
};
use crate::security::{copy_name, SecuritySpec, SpecError};
use crate::selfcomp::{compose, ComposeError, ComposedPds, Mode};
use crate::value::{Domain, DomainError};

/// Largest initial set, in bits of joint input, the checker enumerates.
pub const MAX_INITIAL_BITS: u32 = 32;
const SEED_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum State {
    Loc(u64),
    /// Entry state for a callee frame pushed at this global valuation.
    Mid(u64, Symbol),
    Accept,
}

/// An automaton transition `(from, label, to)`; `None` labels are ε.
pub type Trans = (u32, Option<Symbol>, u32);

#[derive(Debug, Clone, Copy)]
enum Prov {
    Initial,
    /// Created while processing the given transition.
    From(Trans),
}

/// Saturation state of the post* automaton.
#[derive(Debug, Default)]
pub struct PostStar {
    states: Vec<State>,
    ids: HashMap<State, u32>,
    rel: HashMap<Trans, Prov>,
    /// Labelled transitions leaving each callee entry state.
    mid_out: HashMap<u32, Vec<(Symbol, u32)>>,
    /// Sources of ε-transitions into each callee entry state.
    eps_into: HashMap<u32, Vec<u32>>,
    work: VecDeque<(Trans, Prov)>,
    /// Ground rule instances applied so far.
    pub fired: u64,
}

impl PostStar {
    pub fn new() -> Self {
        Self::default()
    }

    fn state(&mut self, s: State) -> u32 {
        if let Some(&id) = self.ids.get(&s) {
            return id;
        }
        let id = self.states.len() as u32;
        self.states.push(s.clone());
        self.ids.insert(s, id);
        id
    }

    /// Adds the one-symbol configuration `<g, top>` to the start set.
    pub fn add_initial(&mut self, g: u64, top: Symbol) {
        let p = self.state(State::Loc(g));
        let acc = self.state(State::Accept);
        self.work.push_back(((p, Some(top), acc), Prov::Initial));
    }

    pub fn transitions(&self) -> usize {
        self.rel.len()
    }

    pub fn states(&self) -> usize {
        self.states.len()
    }

    /// Runs to saturation. Stops early and returns the offending transition
    /// when `bad(g, top)` holds for a newly reachable top configuration.
    pub fn saturate(
        &mut self,
        sys: &impl Successors,
        mut bad: impl FnMut(u64, Symbol) -> bool,
    ) -> Option<Trans> {
        let mut buf = Vec::new();
        while let Some((t, prov)) = self.work.pop_front() {
            if self.rel.contains_key(&t) {
                continue;
            }
            self.rel.insert(t, prov);
            let (p, label, q) = t;
            match label {
                Some(top) => {
                    let State::Loc(g) = self.states[p as usize] else {
                        unreachable!("labelled work items leave control states")
                    };
                    if bad(g, top) {
                        return Some(t);
                    }
                    buf.clear();
                    sys.successors(g, top, &mut buf);
                    for r in &buf {
                        self.fired += 1;
                        let p2 = self.state(State::Loc(r.to));
                        match r.rhs {
                            GroundRhs::Pop => self.work.push_back(((p2, None, q), Prov::From(t))),
                            GroundRhs::Step(a) => {
                                self.work.push_back(((p2, Some(a), q), Prov::From(t)))
                            }
                            GroundRhs::Push(a, b) => {
                                let m = self.state(State::Mid(r.to, a));
                                self.work.push_back(((p2, Some(a), m), Prov::From(t)));
                                let link = (m, Some(b), q);
                                if let Entry::Vacant(e) = self.rel.entry(link) {
                                    e.insert(Prov::From(t));
                                    self.mid_out.entry(m).or_default().push((b, q));
                                    for &src in self.eps_into.get(&m).into_iter().flatten() {
                                        self.work.push_back(((src, Some(b), q), Prov::From(t)));
                                    }
                                }
                            }
                        }
                    }
                }
                None => {
                    self.eps_into.entry(q).or_default().push(p);
                    for &(b, q2) in self.mid_out.get(&q).into_iter().flatten() {
                        let pusher = match self.rel[&(q, Some(b), q2)] {
                            Prov::From(parent) => parent,
                            Prov::Initial => unreachable!("callee links are never initial"),
                        };
                        self.work.push_back(((p, Some(b), q2), Prov::From(pusher)));
                    }
                }
            }
        }
        None
    }

    /// Initial configuration `(g, top)` from which the configuration
    /// represented by `t` is reached. Callee summaries are followed back
    /// to their call site, which is sound for deterministic systems.
    pub fn root(&self, mut t: Trans) -> (u64, Symbol) {
        loop {
            match self.rel[&t] {
                Prov::Initial => {
                    let State::Loc(g) = self.states[t.0 as usize] else {
                        unreachable!()
                    };
                    return (g, t.1.expect("initial transitions are labelled"));
                }
                Prov::From(parent) => t = parent,
            }
        }
    }

    /// Does the automaton accept `c`?
    pub fn accepts(&self, c: &Configuration) -> bool {
        let Some(&start) = self.ids.get(&State::Loc(c.globals)) else {
            return false;
        };
        let Some(&acc) = self.ids.get(&State::Accept) else {
            return false;
        };
        let mut current: BTreeSet<u32> = BTreeSet::from([start]);
        // ε-moves only leave control states, so they can only be taken first.
        for (src, label, dst) in self.rel.keys() {
            if *src == start && label.is_none() {
                current.insert(*dst);
            }
        }
        for sym in &c.stack {
            current = self
                .rel
                .keys()
                .filter(|(s, l, _)| current.contains(s) && *l == Some(*sym))
                .map(|t| t.2)
                .collect();
        }
        current.contains(&acc)
    }

    /// Every accepted configuration with at most `max_stack` symbols.
    pub fn configurations(&self, max_stack: usize) -> BTreeSet<(u64, Vec<Symbol>)> {
        let mut out_edges: HashMap<u32, Vec<(Option<Symbol>, u32)>> = HashMap::new();
        for &(s, l, d) in self.rel.keys() {
            out_edges.entry(s).or_default().push((l, d));
        }
        let mut found = BTreeSet::new();
        let Some(&acc) = self.ids.get(&State::Accept) else {
            return found;
        };
        for (id, s) in self.states.iter().enumerate() {
            let State::Loc(g) = s else { continue };
            let mut stack = vec![(id as u32, Vec::new())];
            while let Some((state, word)) = stack.pop() {
                if state == acc {
                    found.insert((*g, word.clone()));
                }
                for &(l, d) in out_edges.get(&state).into_iter().flatten() {
                    let mut w = word.clone();
                    if let Some(sym) = l {
                        if w.len() == max_stack {
                            continue;
                        }
                        w.push(sym);
                    }
                    stack.push((d, w));
                }
            }
        }
        found
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Pds(#[from] PdsError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("initial set needs {needed} bits of input, limit is {limit}")]
    InitialSetTooLarge { needed: u32, limit: u32 },
    #[error("witness failed to replay: {0}")]
    WitnessReplay(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessStep {
    pub rule: usize,
    pub lhs: String,
    pub rhs: String,
    pub origin: String,
    pub line: u32,
    pub col: u32,
    /// Composed globals after the step.
    pub globals: Vec<u64>,
    /// Second copy's half of the run.
    pub second_copy: bool,
}

/// The assignment judged responsible for an unequal observed variable.
#[derive(Debug, Clone, Serialize)]
pub struct FlowEdge {
    pub variable: String,
    pub origin: String,
    pub span: Span,
    pub second_copy: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub globals: Vec<String>,
    pub initial: Vec<u64>,
    pub steps: Vec<WitnessStep>,
    pub final_globals: Vec<u64>,
    /// Non-observed inputs the two runs disagree on.
    pub differing_inputs: Vec<String>,
    /// Observed variables that end unequal.
    pub unequal: Vec<String>,
    pub flow_edge: Option<FlowEdge>,
    #[serde(skip)]
    pub initial_config: Configuration,
    #[serde(skip)]
    pub trace: Vec<GroundRule>,
}

#[derive(Debug, Clone, Serialize)]
pub enum Verdict {
    Secure,
    Insecure(Box<Witness>),
}

impl Verdict {
    pub fn is_secure(&self) -> bool {
        matches!(self, Verdict::Secure)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Secure => None,
            Verdict::Insecure(w) => Some(w),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckStats {
    pub mode: Mode,
    pub bits: u32,
    pub rules: usize,
    pub conjuncts: usize,
    pub initial_configs: u64,
    pub automaton_states: usize,
    pub automaton_transitions: usize,
    pub rules_fired: u64,
    /// Wall-clock time; left out of serialized records so they stay
    /// reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub stats: CheckStats,
}

/// Initial configurations of a composed system: observed globals equal
/// across the copies, everything else free, assumptions satisfied, main's
/// frame zeroed. Enumerated lazily with shared values outermost and the
/// second copy's free values innermost.
pub fn build_initial_set<'a>(
    composed: &'a ComposedPds,
    compiled: &'a CompiledPds,
    assume: &'a [crate::Expr],
) -> Result<impl Iterator<Item = Configuration> + 'a, CheckError> {
    let orig = &composed.original_globals;
    let n = composed.pds.bits;
    let observed = |g: &String| composed.observed.iter().any(|(o, _)| o == g);
    let shared: Vec<usize> = (0..orig.len()).filter(|&i| observed(&orig[i])).collect();
    let free: Vec<usize> = (0..orig.len()).filter(|&i| !observed(&orig[i])).collect();
    let slots = shared.len() + 2 * free.len();
    let needed = n * slots as u32;
    if needed > MAX_INITIAL_BITS {
        return Err(CheckError::InitialSetTooLarge {
            needed,
            limit: MAX_INITIAL_BITS,
        });
    }
    let top = compiled
        .symbol(composed.pds.start, 0)
        .ok_or(PdsError::UnknownPoint(composed.pds.start))?;
    let domain = compiled.domain;
    let width = orig.len();
    let globals = &composed.pds.globals;
    Ok((0..1u64 << needed).filter_map(move |code| {
        let mut values = vec![0u64; 2 * width];
        let mut k = slots as u32;
        let mut next = || {
            k -= 1;
            (code >> (n * k)) & domain.mask()
        };
        for &i in &shared {
            let v = next();
            values[i] = v;
            values[width + i] = v;
        }
        for &i in &free {
            values[i] = next();
        }
        for &i in &free {
            values[width + i] = next();
        }
        for e in assume {
            let v = domain
                .eval(e, &mut |name| {
                    globals
                        .iter()
                        .position(|g| g == name)
                        .map(|i| values[i])
                        .ok_or(())
                })
                .ok()?;
            if v == 0 {
                return None;
            }
        }
        Some(Configuration {
            globals: compiled.pack(&values),
            stack: vec![top],
        })
    }))
}

/// Checks termination-insensitive noninterference of `program` at `bits`
/// bits per variable.
pub fn check_ti(
    program: &Program,
    spec: &SecuritySpec,
    mode: Mode,
    bits: u32,
) -> Result<CheckReport, CheckError> {
    spec.validate(program)?;
    let domain = Domain::new(bits)?;
    let max = program.max_constant();
    if !domain.contains(max) {
        return Err(DomainError::ConstantTooLarge {
            constant: max,
            bits,
        }
        .into());
    }
    let pds = derive(program, bits)?;
    let composed = compose(&pds, mode, &spec.observed)?;
    check_composed(&composed, &spec.assume)
}

pub fn check_composed(
    composed: &ComposedPds,
    assume: &[crate::Expr],
) -> Result<CheckReport, CheckError> {
    let started = Instant::now();
    let compiled = CompiledPds::new(&composed.pds)?;
    let sink = compiled
        .point_id(composed.pds.final_point)
        .ok_or(PdsError::UnknownPoint(composed.pds.final_point))?;
    let pairs: Vec<(usize, usize)> = composed
        .observed
        .iter()
        .map(|(a, b)| {
            (
                composed.global_index(a).unwrap(),
                composed.global_index(b).unwrap(),
            )
        })
        .collect();
    let unequal = |g: u64| {
        let v = compiled.unpack(g, composed.pds.globals.len());
        pairs.iter().any(|&(a, b)| v[a] != v[b])
    };

    let mut post = PostStar::new();
    let mut initial = build_initial_set(composed, &compiled, assume)?;
    let mut seeded = 0u64;
    let hit = loop {
        let mut batch = 0;
        for c in initial.by_ref().take(SEED_BATCH) {
            post.add_initial(c.globals, c.stack[0]);
            batch += 1;
        }
        seeded += batch as u64;
        let hit = post.saturate(&compiled, |g, top| top.point == sink && unequal(g));
        if hit.is_some() || batch < SEED_BATCH {
            break hit;
        }
    };

    let verdict = match hit {
        None => Verdict::Secure,
        Some(t) => {
            let (g, top) = post.root(t);
            Verdict::Insecure(Box::new(replay_witness(composed, &compiled, g, top)?))
        }
    };
    let size = composed.pds.stats();
    Ok(CheckReport {
        verdict,
        stats: CheckStats {
            mode: composed.mode,
            bits: composed.pds.bits,
            rules: size.rules,
            conjuncts: size.conjuncts,
            initial_configs: seeded,
            automaton_states: post.states(),
            automaton_transitions: post.transitions(),
            rules_fired: post.fired,
            elapsed: started.elapsed(),
        },
    })
}

fn replay_witness(
    composed: &ComposedPds,
    compiled: &CompiledPds,
    g: u64,
    top: Symbol,
) -> Result<Witness, CheckError> {
    let initial_config = Configuration {
        globals: g,
        stack: vec![top],
    };
    let out = pds_exec(compiled, initial_config.clone(), DEFAULT_FUEL)?;
    let width = composed.pds.globals.len();
    let end = compiled.unpack(out.config.globals, width);
    let at_sink = out.halted == Halted::Sink
        && out.config.stack.first().map(|s| compiled.point(*s)) == Some(composed.pds.final_point);
    if !at_sink {
        return Err(CheckError::WitnessReplay(format!(
            "run halted ({:?}) away from the observation point",
            out.halted
        )));
    }

    let orig = &composed.original_globals;
    let idx = |name: &str| composed.global_index(name).unwrap();
    let unequal: Vec<String> = composed
        .observed
        .iter()
        .filter(|(a, b)| end[idx(a)] != end[idx(b)])
        .map(|(a, _)| a.clone())
        .collect();
    if unequal.is_empty() {
        return Err(CheckError::WitnessReplay(
            "observed variables agree at the end".into(),
        ));
    }
    let start = compiled.unpack(g, width);
    let differing_inputs = orig
        .iter()
        .filter(|x| start[idx(x)] != start[idx(&copy_name(x))])
        .cloned()
        .collect();

    let mut steps = Vec::with_capacity(out.trace.len());
    let mut second = false;
    for r in &out.trace {
        let sr = &composed.pds.rules[r.rule];
        let rhs = match r.rhs {
            GroundRhs::Pop => "eps".to_string(),
            GroundRhs::Step(a) => compiled.point(a).to_string(),
            GroundRhs::Push(a, b) => format!("{} {}", compiled.point(a), compiled.point(b)),
        };
        steps.push(WitnessStep {
            rule: r.rule,
            lhs: sr.lhs.to_string(),
            rhs,
            origin: sr.origin.text.clone(),
            line: sr.origin.span.line,
            col: sr.origin.span.col,
            globals: compiled.unpack(r.to, width),
            second_copy: second,
        });
        if sr.lhs == composed.seam {
            second = true;
        }
    }
    let flow_edge = flow_edge(composed, &steps, &unequal);
    Ok(Witness {
        globals: composed.pds.globals.clone(),
        initial: start,
        steps,
        final_globals: end,
        differing_inputs,
        unequal,
        flow_edge,
        initial_config,
        trace: out.trace,
    })
}

/// The last write to an unequal observed variable in the second copy's
/// half of the run, or failing that in the first copy's.
fn flow_edge(
    composed: &ComposedPds,
    steps: &[WitnessStep],
    unequal: &[String],
) -> Option<FlowEdge> {
    let writes = |step: &WitnessStep, name: &str| {
        composed.pds.rules[step.rule]
            .explicit
            .iter()
            .any(|c| match c {
                crate::pds::Constraint::Assign { target, .. } => {
                    target.name == name && target.prime == crate::pds::Prime::Single
                }
                _ => false,
            })
    };
    for second_copy in [true, false] {
        for step in steps.iter().rev().filter(|s| s.second_copy == second_copy) {
            if composed.pds.rules[step.rule].lhs == composed.seam {
                continue;
            }
            for x in unequal {
                // During the first half every global holds the first copy's value.
                let name = if second_copy {
                    composed.final_names(x).1
                } else {
                    x.clone()
                };
                if writes(step, &name) {
                    let rule = &composed.pds.rules[step.rule];
                    return Some(FlowEdge {
                        variable: x.clone(),
                        origin: rule.origin.text.clone(),
                        span: rule.origin.span,
                        second_copy,
                    });
                }
            }
        }
    }
    None
}

/// Checks that a witness starts with observed pairs equal, replays under
/// deterministic execution, and ends at the observation point with some
/// pair unequal.
pub fn validate_witness(composed: &ComposedPds, w: &Witness) -> Result<(), String> {
    let compiled = CompiledPds::new(&composed.pds).map_err(|e| e.to_string())?;
    let idx = |name: &str| composed.global_index(name).unwrap();
    let start = compiled.unpack(w.initial_config.globals, composed.pds.globals.len());
    if composed
        .observed
        .iter()
        .any(|(a, b)| start[idx(a)] != start[idx(b)])
    {
        return Err("observed pairs differ initially".into());
    }
    let out =
        pds_exec(&compiled, w.initial_config.clone(), DEFAULT_FUEL).map_err(|e| e.to_string())?;
    if out.trace != w.trace {
        return Err("replay takes a different path".into());
    }
    let mut c = w.initial_config.clone();
    for r in &w.trace {
        c = r.apply(&c).ok_or("trace step does not apply")?;
    }
    if c != out.config {
        return Err("trace does not end at the replayed configuration".into());
    }
    if c.stack.first().map(|s| compiled.point(*s)) != Some(composed.pds.final_point) {
        return Err("witness does not end at the observation point".into());
    }
    let end = compiled.unpack(c.globals, composed.pds.globals.len());
    if composed
        .observed
        .iter()
        .all(|(a, b)| end[idx(a)] == end[idx(b)])
    {
        return Err("observed pairs agree at the end".into());
    }
    Ok(())
}
