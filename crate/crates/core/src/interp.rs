//! Reference big-step interpreter and the brute-force pair oracle.
//!
//! Globals live in the heap, parameters and `letvar` bindings on the
//! stack. Variables are resolved through an environment from names to
//! locations; out-parameters resolve to the caller's global location.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde::Serialize;

use crate::frontend::ast::{Expr, Program, Stmt, StmtKind, ENTRY};
use crate::security::{resolve_paired, SecuritySpec};
use crate::value::{Domain, DomainError};

pub type Loc = u32;

pub const DEFAULT_FUEL: u64 = 1_000_000;
pub const MAX_CALL_DEPTH: usize = 128;
/// Largest pair enumeration the oracle accepts.
pub const MAX_ORACLE_PAIRS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocMeta {
    pub procedure: String,
    pub var: String,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Store {
    pub heap: BTreeMap<Loc, u64>,
    pub stack: BTreeMap<Loc, u64>,
    pub loc_meta: BTreeMap<Loc, LocMeta>,
    pub next_loc: Loc,
    pub global_locs: IndexMap<String, Loc>,
}

impl Store {
    pub fn global(&self, name: &str) -> Option<u64> {
        self.global_locs.get(name).map(|l| self.heap[l])
    }

    /// Final global valuation in declaration order.
    pub fn globals(&self) -> Vec<(String, u64)> {
        self.global_locs
            .iter()
            .map(|(n, l)| (n.clone(), self.heap[l]))
            .collect()
    }

    fn alloc_stack(&mut self, meta: LocMeta, value: u64) -> Loc {
        let loc = self.next_loc;
        self.next_loc += 1;
        self.stack.insert(loc, value);
        self.loc_meta.insert(loc, meta);
        loc
    }

    fn free_stack(&mut self, loc: Loc) {
        self.stack.remove(&loc);
        self.loc_meta.remove(&loc);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Final(Store),
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps_used: u64,
}

impl RunResult {
    pub fn final_store(&self) -> Option<&Store> {
        match &self.outcome {
            Outcome::Final(s) => Some(s),
            Outcome::Diverged => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("location {0} is not allocated")]
    UnboundLocation(Loc),
    #[error("`{0}` is not a declared global")]
    UnknownGlobal(String),
    #[error("procedure `{0}` is not defined")]
    UnknownProcedure(String),
    #[error("write to `{var}` escapes the frame of `{procedure}`")]
    ScopeViolation { procedure: String, var: String },
    #[error("call depth exceeded {MAX_CALL_DEPTH}")]
    CallDepthExceeded,
    #[error("pair enumeration needs 2^{bits} pairs, above the limit of 2^24")]
    EnumerationTooLarge { bits: u32 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

enum Halt {
    OutOfFuel,
    Error(InterpError),
}

impl From<InterpError> for Halt {
    fn from(e: InterpError) -> Self {
        Halt::Error(e)
    }
}

type Env = HashMap<String, Loc>;

struct Machine<'p> {
    program: &'p Program,
    domain: Domain,
    store: Store,
    fuel: u64,
    steps: u64,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.steps >= self.fuel {
            return Err(Halt::OutOfFuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn read(&self, loc: Loc) -> Result<u64, InterpError> {
        self.store
            .heap
            .get(&loc)
            .or_else(|| self.store.stack.get(&loc))
            .copied()
            .ok_or(InterpError::UnboundLocation(loc))
    }

    fn eval(&self, env: &Env, e: &Expr) -> Result<u64, InterpError> {
        self.domain.eval(e, &mut |name| {
            let loc = env
                .get(name)
                .ok_or_else(|| InterpError::UnboundVariable(name.to_string()))?;
            self.read(*loc)
        })
    }

    fn write(
        &mut self,
        env: &Env,
        proc: &str,
        depth: usize,
        var: &str,
        v: u64,
    ) -> Result<(), InterpError> {
        let loc = *env
            .get(var)
            .ok_or_else(|| InterpError::UnboundVariable(var.to_string()))?;
        if let Some(slot) = self.store.heap.get_mut(&loc) {
            *slot = v;
            return Ok(());
        }
        let meta = self
            .store
            .loc_meta
            .get(&loc)
            .ok_or(InterpError::UnboundLocation(loc))?;
        if meta.procedure != proc || meta.depth != depth {
            return Err(InterpError::ScopeViolation {
                procedure: proc.to_string(),
                var: var.to_string(),
            });
        }
        self.store.stack.insert(loc, v);
        Ok(())
    }

    fn exec(&mut self, env: &mut Env, proc: &str, depth: usize, s: &Stmt) -> Result<(), Halt> {
        self.tick()?;
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { target, value } => {
                let v = self.eval(env, value)?;
                self.write(env, proc, depth, target, v)?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                if self.eval(env, cond)? != 0 {
                    self.exec(env, proc, depth, then_branch)?;
                } else {
                    self.exec(env, proc, depth, else_branch)?;
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(env, cond)? != 0 {
                    self.exec(env, proc, depth, body)?;
                    self.tick()?;
                }
            }
            StmtKind::Seq(items) => {
                for item in items {
                    self.exec(env, proc, depth, item)?;
                }
            }
            StmtKind::LetVar { name, init, body } => {
                let v = self.eval(env, init)?;
                let loc = self.store.alloc_stack(
                    LocMeta {
                        procedure: proc.to_string(),
                        var: name.clone(),
                        depth,
                    },
                    v,
                );
                let shadowed = env.insert(name.clone(), loc);
                let r = self.exec(env, proc, depth, body);
                match shadowed {
                    Some(old) => env.insert(name.clone(), old),
                    None => env.remove(name),
                };
                self.store.free_stack(loc);
                r?;
            }
            StmtKind::Call { callee, arg, out } => {
                if depth + 1 >= MAX_CALL_DEPTH {
                    return Err(InterpError::CallDepthExceeded.into());
                }
                let decl = self
                    .program
                    .procedure(callee)
                    .ok_or_else(|| InterpError::UnknownProcedure(callee.clone()))?;
                let (x1, x2) = match (&decl.in_param, &decl.out_param) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(InterpError::UnknownProcedure(callee.clone()).into()),
                };
                let v = self.eval(env, arg)?;
                let target = *env
                    .get(out)
                    .ok_or_else(|| InterpError::UnboundVariable(out.clone()))?;
                let loc = self.store.alloc_stack(
                    LocMeta {
                        procedure: callee.clone(),
                        var: x1.clone(),
                        depth: depth + 1,
                    },
                    v,
                );
                let mut callee_env: Env = self
                    .store
                    .global_locs
                    .iter()
                    .map(|(n, l)| (n.clone(), *l))
                    .collect();
                callee_env.insert(x1.clone(), loc);
                callee_env.insert(x2.clone(), target);
                let r = self.exec(&mut callee_env, callee, depth + 1, &decl.body);
                self.store.free_stack(loc);
                r?;
            }
        }
        Ok(())
    }
}

/// Initial store with every global set from `inputs` (missing ones are 0).
pub fn initial_store(
    program: &Program,
    domain: Domain,
    inputs: &BTreeMap<String, u64>,
) -> Result<Store, InterpError> {
    for (name, v) in inputs {
        if !program.is_global(name) {
            return Err(InterpError::UnknownGlobal(name.clone()));
        }
        if !domain.contains(*v) {
            return Err(DomainError::ConstantTooLarge {
                constant: *v,
                bits: domain.bits(),
            }
            .into());
        }
    }
    let mut store = Store::default();
    for g in &program.globals {
        let loc = store.next_loc;
        store.next_loc += 1;
        store
            .heap
            .insert(loc, inputs.get(&g.name).copied().unwrap_or(0));
        store.global_locs.insert(g.name.clone(), loc);
    }
    Ok(store)
}

/// Runs `main` from the given global inputs.
pub fn run(
    program: &Program,
    domain: Domain,
    inputs: &BTreeMap<String, u64>,
    fuel: u64,
) -> Result<RunResult, InterpError> {
    let max = program.max_constant();
    if !domain.contains(max) {
        return Err(DomainError::ConstantTooLarge {
            constant: max,
            bits: domain.bits(),
        }
        .into());
    }
    let store = initial_store(program, domain, inputs)?;
    exec(program, domain, store, fuel)
}

/// Executes `main` on an explicit store.
pub fn exec(
    program: &Program,
    domain: Domain,
    store: Store,
    fuel: u64,
) -> Result<RunResult, InterpError> {
    let main = program
        .main()
        .ok_or_else(|| InterpError::UnknownProcedure(ENTRY.to_string()))?;
    let mut env: Env = store
        .global_locs
        .iter()
        .map(|(n, l)| (n.clone(), *l))
        .collect();
    let mut m = Machine {
        program,
        domain,
        store,
        fuel,
        steps: 0,
    };
    match m.exec(&mut env, ENTRY, 0, &main.body) {
        Ok(()) => Ok(RunResult {
            outcome: Outcome::Final(m.store),
            steps_used: m.steps,
        }),
        Err(Halt::OutOfFuel) => Ok(RunResult {
            outcome: Outcome::Diverged,
            steps_used: m.steps,
        }),
        Err(Halt::Error(e)) => Err(e),
    }
}

pub type Valuation = BTreeMap<String, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum OracleVerdict {
    Secure,
    Insecure { first: Valuation, second: Valuation },
}

impl OracleVerdict {
    pub fn is_secure(&self) -> bool {
        matches!(self, OracleVerdict::Secure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub verdict: OracleVerdict,
    pub pairs_checked: u64,
    pub pairs_skipped: u64,
}

/// Decides termination-insensitive noninterference by running every pair
/// of initial stores that agree on the observed globals (and satisfy the
/// assumptions). Pairs where either run diverges are skipped.
pub fn brute_force_pair_oracle(
    program: &Program,
    spec: &SecuritySpec,
    domain: Domain,
    fuel: u64,
) -> Result<OracleReport, InterpError> {
    let globals = program.global_names();
    let shared: Vec<usize> = (0..globals.len())
        .filter(|&i| spec.observes(&globals[i]))
        .collect();
    let free: Vec<usize> = (0..globals.len())
        .filter(|&i| !spec.observes(&globals[i]))
        .collect();
    let slots = shared.len() + 2 * free.len();
    let bits = domain.bits() * slots as u32;
    if bits >= 64 || 1u64 << bits > MAX_ORACLE_PAIRS {
        return Err(InterpError::EnumerationTooLarge { bits });
    }

    let mut cache: HashMap<Vec<u64>, Option<Vec<u64>>> = HashMap::new();
    let mut single = |input: &[u64]| -> Result<Option<Vec<u64>>, InterpError> {
        if let Some(hit) = cache.get(input) {
            return Ok(hit.clone());
        }
        let inputs: Valuation = globals.iter().cloned().zip(input.iter().copied()).collect();
        let r = run(program, domain, &inputs, fuel)?;
        let out = r
            .final_store()
            .map(|s| s.globals().into_iter().map(|(_, v)| v).collect());
        cache.insert(input.to_vec(), out.clone());
        Ok(out)
    };

    let total = 1u64 << bits;
    let (mut checked, mut skipped) = (0, 0);
    let mask = domain.mask();
    let n = domain.bits();
    for code in 0..total {
        let mut a = vec![0u64; globals.len()];
        let mut b = vec![0u64; globals.len()];
        // Mixed radix: shared lows outermost, second copy's highs innermost.
        let mut k = slots as u32;
        let mut next = || {
            k -= 1;
            (code >> (n * k)) & mask
        };
        for &i in &shared {
            let v = next();
            a[i] = v;
            b[i] = v;
        }
        for &i in &free {
            a[i] = next();
        }
        for &i in &free {
            b[i] = next();
        }
        if !assumptions_hold(program, spec, domain, &a, &b)? {
            continue;
        }
        let (Some(fa), Some(fb)) = (single(&a)?, single(&b)?) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        if shared.iter().any(|&i| fa[i] != fb[i]) {
            let val = |v: &[u64]| globals.iter().cloned().zip(v.iter().copied()).collect();
            return Ok(OracleReport {
                verdict: OracleVerdict::Insecure {
                    first: val(&a),
                    second: val(&b),
                },
                pairs_checked: checked,
                pairs_skipped: skipped,
            });
        }
    }
    Ok(OracleReport {
        verdict: OracleVerdict::Secure,
        pairs_checked: checked,
        pairs_skipped: skipped,
    })
}

fn assumptions_hold(
    program: &Program,
    spec: &SecuritySpec,
    domain: Domain,
    a: &[u64],
    b: &[u64],
) -> Result<bool, InterpError> {
    for e in &spec.assume {
        let v = domain.eval(e, &mut |name| {
            let (g, copy) = resolve_paired(program, name)
                .ok_or_else(|| InterpError::UnknownGlobal(name.to_string()))?;
            let idx = program.globals.iter().position(|d| d.name == g).unwrap();
            Ok::<_, InterpError>(if copy == 0 { a[idx] } else { b[idx] })
        })?;
        if v == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}
