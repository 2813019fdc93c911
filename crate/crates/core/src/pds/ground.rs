//! Grounding symbolic rules over N-bit valuations.
//!
//! Valuations are packed into a `u64`, N bits per slot, slot 0 lowest.
//! [`CompiledPds`] grounds on demand from a configuration's top; [`flatten`]
//! enumerates every instance up front.

use std::collections::HashMap;

use super::{Constraint, ControlPoint, PdsError, Prime, Rhs, SymbolicPds};
use crate::frontend::ast::{BinOp, Expr};
use crate::value::Domain;

pub const DEFAULT_STATE_BUDGET: u32 = 24;
const BUDGET_ENV: &str = "NILFLOW_STATE_BUDGET";

/// Joint-state bit budget for [`flatten`], overridable through the
/// environment.
pub fn state_budget() -> u32 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_STATE_BUDGET)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    /// Index into the owning system's point table.
    pub point: u32,
    pub locals: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub globals: u64,
    /// Top of stack first.
    pub stack: Vec<Symbol>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroundRhs {
    Pop,
    Step(Symbol),
    Push(Symbol, Symbol),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundRule {
    /// Index of the symbolic rule this instantiates.
    pub rule: usize,
    pub from: u64,
    pub lhs: Symbol,
    pub to: u64,
    pub rhs: GroundRhs,
}

impl GroundRule {
    /// Applies the rule to a configuration whose top matches.
    pub fn apply(&self, c: &Configuration) -> Option<Configuration> {
        if c.globals != self.from || c.stack.first() != Some(&self.lhs) {
            return None;
        }
        let mut stack = Vec::with_capacity(c.stack.len() + 1);
        match self.rhs {
            GroundRhs::Pop => {}
            GroundRhs::Step(a) => stack.push(a),
            GroundRhs::Push(a, b) => {
                stack.push(a);
                stack.push(b);
            }
        }
        stack.extend_from_slice(&c.stack[1..]);
        Some(Configuration {
            globals: self.to,
            stack,
        })
    }
}

pub trait Successors {
    /// Appends every ground rule applicable at global valuation `g` with
    /// `top` on top of the stack.
    fn successors(&self, g: u64, top: Symbol, out: &mut Vec<GroundRule>);
}

#[derive(Debug, Clone)]
enum CExpr {
    Const(u64),
    Global(usize),
    Local(usize),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone)]
enum CRhs {
    Pop,
    Step(u32),
    Push(u32, u32),
}

#[derive(Debug, Clone)]
struct CompiledRule {
    lhs: u32,
    rhs: CRhs,
    guards: Vec<CExpr>,
    globals: Vec<Option<CExpr>>,
    top: Vec<Option<CExpr>>,
    bottom: Vec<Option<CExpr>>,
}

/// A symbolic system prepared for on-demand grounding.
#[derive(Debug, Clone)]
pub struct CompiledPds {
    pub domain: Domain,
    pub points: Vec<ControlPoint>,
    point_index: HashMap<ControlPoint, u32>,
    widths: Vec<usize>,
    n_globals: usize,
    rules: Vec<CompiledRule>,
    by_point: Vec<Vec<usize>>,
    /// Post-state variables no constraint determines; they range freely.
    pub lints: Vec<String>,
}

impl CompiledPds {
    pub fn new(pds: &SymbolicPds) -> Result<Self, PdsError> {
        let domain = Domain::new(pds.bits).map_err(|_| PdsError::StateBudgetExceeded {
            needed: pds.bits,
            budget: crate::value::MAX_BITS,
        })?;
        let check = |slots: usize| {
            let needed = pds.bits * slots as u32;
            if needed > 64 {
                Err(PdsError::StateBudgetExceeded { needed, budget: 64 })
            } else {
                Ok(())
            }
        };
        check(pds.globals.len())?;
        let points: Vec<ControlPoint> = pds.points.keys().copied().collect();
        let point_index: HashMap<ControlPoint, u32> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let mut widths = Vec::with_capacity(points.len());
        for p in &points {
            let w = pds.layout(*p)?.len();
            check(w)?;
            widths.push(w);
        }
        let idx = |p: ControlPoint| {
            point_index
                .get(&p)
                .copied()
                .ok_or(PdsError::UnknownPoint(p))
        };

        let mut rules = Vec::with_capacity(pds.rules.len());
        let mut by_point = vec![Vec::new(); points.len()];
        let mut lints = Vec::new();
        for (ri, r) in pds.rules.iter().enumerate() {
            let lhs_layout = pds.layout(r.lhs)?;
            let resolve = |name: &str| -> Result<CExpr, PdsError> {
                if let Some(i) = pds.globals.iter().position(|g| g == name) {
                    Ok(CExpr::Global(i))
                } else if let Some(i) = lhs_layout.iter().position(|y| y == name) {
                    Ok(CExpr::Local(i))
                } else {
                    Err(PdsError::UnknownVariable {
                        point: r.lhs,
                        var: name.to_string(),
                    })
                }
            };
            let (rhs, top_layout, bottom_layout): (CRhs, &[String], &[String]) = match r.rhs {
                Rhs::Pop => (CRhs::Pop, &[], &[]),
                Rhs::Step(a) => (CRhs::Step(idx(a)?), pds.layout(a)?, &[]),
                Rhs::Push(a, b) => (CRhs::Push(idx(a)?, idx(b)?), pds.layout(a)?, pds.layout(b)?),
            };
            let mut cr = CompiledRule {
                lhs: idx(r.lhs)?,
                rhs,
                guards: Vec::new(),
                globals: vec![None; pds.globals.len()],
                top: vec![None; top_layout.len()],
                bottom: vec![None; bottom_layout.len()],
            };
            for c in &r.constraints {
                match c {
                    Constraint::Guard(e) => cr.guards.push(compile_expr(e, &resolve)?),
                    Constraint::Assign { target, value } => {
                        let value = compile_expr(value, &resolve)?;
                        let slot = match target.prime {
                            Prime::Single => {
                                if let Some(i) = pds.globals.iter().position(|g| *g == target.name)
                                {
                                    &mut cr.globals[i]
                                } else if let Some(i) =
                                    top_layout.iter().position(|y| *y == target.name)
                                {
                                    &mut cr.top[i]
                                } else {
                                    return Err(PdsError::UnknownVariable {
                                        point: r.lhs,
                                        var: target.to_string(),
                                    });
                                }
                            }
                            Prime::Double => {
                                match bottom_layout.iter().position(|y| *y == target.name) {
                                    Some(i) => &mut cr.bottom[i],
                                    None => {
                                        return Err(PdsError::UnknownVariable {
                                            point: r.lhs,
                                            var: target.to_string(),
                                        })
                                    }
                                }
                            }
                        };
                        if slot.is_some() {
                            return Err(PdsError::ConflictingConstraint {
                                point: r.lhs,
                                var: target.to_string(),
                            });
                        }
                        *slot = Some(value);
                    }
                }
            }
            let free = |slots: &[Option<CExpr>], names: &[String], marks: &str| {
                slots
                    .iter()
                    .zip(names)
                    .filter(|(s, _)| s.is_none())
                    .map(|(_, n)| format!("rule {ri} at {}: {n}{marks} is unconstrained", r.lhs))
                    .collect::<Vec<_>>()
            };
            lints.extend(free(&cr.globals, &pds.globals, "'"));
            lints.extend(free(&cr.top, top_layout, "'"));
            lints.extend(free(&cr.bottom, bottom_layout, "''"));
            by_point[cr.lhs as usize].push(ri);
            rules.push(cr);
        }
        Ok(CompiledPds {
            domain,
            points,
            point_index,
            widths,
            n_globals: pds.globals.len(),
            rules,
            by_point,
            lints,
        })
    }

    pub fn point_id(&self, p: ControlPoint) -> Option<u32> {
        self.point_index.get(&p).copied()
    }

    pub fn symbol(&self, p: ControlPoint, locals: u64) -> Option<Symbol> {
        self.point_id(p).map(|point| Symbol { point, locals })
    }

    pub fn point(&self, s: Symbol) -> ControlPoint {
        self.points[s.point as usize]
    }

    pub fn width(&self, point: u32) -> usize {
        self.widths[point as usize]
    }

    pub fn n_globals(&self) -> usize {
        self.n_globals
    }

    pub fn pack(&self, values: &[u64]) -> u64 {
        let n = self.domain.bits();
        values.iter().enumerate().fold(0, |acc, (i, v)| {
            acc | ((v & self.domain.mask()) << (n * i as u32))
        })
    }

    pub fn unpack(&self, packed: u64, slots: usize) -> Vec<u64> {
        (0..slots).map(|i| self.slot(packed, i)).collect()
    }

    fn slot(&self, packed: u64, i: usize) -> u64 {
        (packed >> (self.domain.bits() * i as u32)) & self.domain.mask()
    }

    fn eval(&self, e: &CExpr, g: u64, l: u64) -> u64 {
        match e {
            CExpr::Const(c) => c & self.domain.mask(),
            CExpr::Global(i) => self.slot(g, *i),
            CExpr::Local(i) => self.slot(l, *i),
            CExpr::Not(a) => self.domain.not(self.eval(a, g, l)),
            CExpr::Bin(op, a, b) => self
                .domain
                .apply(*op, self.eval(a, g, l), self.eval(b, g, l)),
        }
    }

    /// Evaluates one post-state vector; `None` slots enumerate freely.
    fn post_values(&self, slots: &[Option<CExpr>], g: u64, l: u64) -> Vec<u64> {
        let n = self.domain.bits();
        let mut fixed = 0u64;
        let mut free = Vec::new();
        for (i, s) in slots.iter().enumerate() {
            match s {
                Some(e) => fixed |= self.eval(e, g, l) << (n * i as u32),
                None => free.push(i),
            }
        }
        let combos = 1u64 << (n * free.len() as u32);
        (0..combos)
            .map(|c| {
                free.iter().enumerate().fold(fixed, |acc, (k, &i)| {
                    acc | (((c >> (n * k as u32)) & self.domain.mask()) << (n * i as u32))
                })
            })
            .collect()
    }
}

fn compile_expr(
    e: &Expr,
    resolve: &impl Fn(&str) -> Result<CExpr, PdsError>,
) -> Result<CExpr, PdsError> {
    Ok(match e {
        Expr::Const(c) => CExpr::Const(*c),
        Expr::Var(v) => resolve(v)?,
        Expr::Not(a) => CExpr::Not(Box::new(compile_expr(a, resolve)?)),
        Expr::Binary(op, a, b) => CExpr::Bin(
            *op,
            Box::new(compile_expr(a, resolve)?),
            Box::new(compile_expr(b, resolve)?),
        ),
    })
}

impl Successors for CompiledPds {
    fn successors(&self, g: u64, top: Symbol, out: &mut Vec<GroundRule>) {
        let Some(candidates) = self.by_point.get(top.point as usize) else {
            return;
        };
        for &ri in candidates {
            let r = &self.rules[ri];
            if r.guards.iter().any(|e| self.eval(e, g, top.locals) == 0) {
                continue;
            }
            let l = top.locals;
            for to in self.post_values(&r.globals, g, l) {
                let mut emit = |rhs| {
                    out.push(GroundRule {
                        rule: ri,
                        from: g,
                        lhs: top,
                        to,
                        rhs,
                    })
                };
                match r.rhs {
                    CRhs::Pop => emit(GroundRhs::Pop),
                    CRhs::Step(a) => {
                        for la in self.post_values(&r.top, g, l) {
                            emit(GroundRhs::Step(Symbol {
                                point: a,
                                locals: la,
                            }));
                        }
                    }
                    CRhs::Push(a, b) => {
                        let bottoms = self.post_values(&r.bottom, g, l);
                        for la in self.post_values(&r.top, g, l) {
                            for &lb in &bottoms {
                                emit(GroundRhs::Push(
                                    Symbol {
                                        point: a,
                                        locals: la,
                                    },
                                    Symbol {
                                        point: b,
                                        locals: lb,
                                    },
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// A fully enumerated pushdown system.
#[derive(Debug, Clone, Default)]
pub struct ExplicitPds {
    pub rules: Vec<GroundRule>,
    index: HashMap<(u64, Symbol), Vec<usize>>,
}

impl ExplicitPds {
    pub fn from_rules(rules: Vec<GroundRule>) -> Self {
        let mut index: HashMap<(u64, Symbol), Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            index.entry((r.from, r.lhs)).or_default().push(i);
        }
        ExplicitPds { rules, index }
    }

    /// Number of ground instances of each symbolic rule.
    pub fn fan_out(&self, symbolic_rules: usize) -> Vec<usize> {
        let mut counts = vec![0; symbolic_rules];
        for r in &self.rules {
            counts[r.rule] += 1;
        }
        counts
    }
}

impl Successors for ExplicitPds {
    fn successors(&self, g: u64, top: Symbol, out: &mut Vec<GroundRule>) {
        if let Some(ids) = self.index.get(&(g, top)) {
            out.extend(ids.iter().map(|&i| self.rules[i]));
        }
    }
}

/// Grounds every rule over every global and lhs-frame valuation.
pub fn flatten(pds: &SymbolicPds, budget: u32) -> Result<(CompiledPds, ExplicitPds), PdsError> {
    let max_width = pds.frames.values().map(Vec::len).max().unwrap_or(0);
    let needed = pds.bits * (pds.globals.len() + max_width) as u32;
    if needed > budget {
        return Err(PdsError::StateBudgetExceeded { needed, budget });
    }
    let compiled = CompiledPds::new(pds)?;
    let n = pds.bits;
    let mut rules = Vec::new();
    for point in 0..compiled.points.len() as u32 {
        if compiled.by_point[point as usize].is_empty() {
            continue;
        }
        let locals = 1u64 << (n * compiled.width(point) as u32);
        for g in 0..1u64 << (n * compiled.n_globals as u32) {
            for l in 0..locals {
                compiled.successors(g, Symbol { point, locals: l }, &mut rules);
            }
        }
    }
    Ok((compiled, ExplicitPds::from_rules(rules)))
}
