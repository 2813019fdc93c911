//! Translation of a validated program into a symbolic pushdown system.
//!
//! Each procedure's locals (its in-parameter and every `letvar`) become
//! slots of one flat frame. Statements are translated between an entry
//! and an exit control point; control points are handed out in pre-order
//! so that numbering is stable. Out-parameters are replaced by the global
//! passed at the call site before the callee body is translated, and each
//! (callee, global) pair is translated once, which also covers recursion.

use std::collections::{BTreeMap, HashMap, HashSet};

use indexmap::{IndexMap, IndexSet};

use crate::frontend::ast::{Expr, Program, Span, Stmt, StmtKind, ENTRY};
use crate::frontend::pretty;
use crate::pds::{
    Constraint, ControlPoint, FrameKey, Origin, PdsError, PostVar, Rhs, SymbolicPds, SymbolicRule,
};

/// The set of (procedure, local) pairs reachable from `main`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnifiedLocals {
    pub theta: IndexSet<(String, String)>,
}

impl UnifiedLocals {
    /// Locals of one procedure, in-parameter first, then binders in
    /// pre-order.
    pub fn eta(&self, procedure: &str) -> Vec<String> {
        self.theta
            .iter()
            .filter(|(p, _)| p == procedure)
            .map(|(_, x)| x.clone())
            .collect()
    }

    pub fn procedures(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (p, _) in &self.theta {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        out
    }
}

type Subst = HashMap<String, String>;

fn subst_name(subst: &Subst, name: &str) -> String {
    subst.get(name).cloned().unwrap_or_else(|| name.to_string())
}

fn subst_expr(subst: &Subst, e: &Expr) -> Expr {
    e.rename(&|v| subst.get(v).cloned())
}

pub fn unify_locals(program: &Program) -> UnifiedLocals {
    let mut theta = IndexSet::new();
    let mut visited = HashSet::new();
    if let Some(main) = program.main() {
        unify(
            program,
            &main.body,
            ENTRY,
            &Subst::new(),
            &mut theta,
            &mut visited,
        );
    }
    UnifiedLocals { theta }
}

fn unify(
    program: &Program,
    s: &Stmt,
    p: &str,
    subst: &Subst,
    theta: &mut IndexSet<(String, String)>,
    visited: &mut HashSet<(String, String)>,
) {
    match &s.kind {
        StmtKind::Skip => {}
        StmtKind::Assign { target, .. } => {
            let x = subst_name(subst, target);
            if !program.is_global(&x) {
                theta.insert((p.to_string(), x));
            }
        }
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => {
            unify(program, then_branch, p, subst, theta, visited);
            unify(program, else_branch, p, subst, theta, visited);
        }
        StmtKind::While { body, .. } => unify(program, body, p, subst, theta, visited),
        StmtKind::Seq(items) => items
            .iter()
            .for_each(|i| unify(program, i, p, subst, theta, visited)),
        StmtKind::LetVar { name, body, .. } => {
            theta.insert((p.to_string(), name.clone()));
            unify(program, body, p, subst, theta, visited);
        }
        StmtKind::Call { callee, out, .. } => {
            let Some(decl) = program.procedure(callee) else {
                return;
            };
            let (Some(x1), Some(x2)) = (&decl.in_param, &decl.out_param) else {
                return;
            };
            theta.insert((callee.clone(), x1.clone()));
            let global = subst_name(subst, out);
            if visited.insert((callee.clone(), global.clone())) {
                let inner = Subst::from([(x2.clone(), global)]);
                unify(program, &decl.body, callee, &inner, theta, visited);
            }
        }
    }
}

/// Variables a statement may write. Calls may write any global.
#[derive(Default)]
struct Mods {
    vars: HashSet<String>,
    any_global: bool,
}

fn modified(s: &Stmt, subst: &Subst) -> Mods {
    let mut m = Mods::default();
    s.walk(&mut |s| match &s.kind {
        StmtKind::Assign { target, .. } => {
            m.vars.insert(subst_name(subst, target));
        }
        StmtKind::LetVar { name, .. } => {
            m.vars.insert(name.clone());
        }
        StmtKind::Call { .. } => m.any_global = true,
        _ => {}
    });
    m
}

struct Deriver<'p> {
    program: &'p Program,
    next_id: u32,
    points: BTreeMap<ControlPoint, FrameKey>,
    rules: Vec<SymbolicRule>,
    memo: HashMap<(String, String), (ControlPoint, ControlPoint)>,
    return_stores: IndexSet<String>,
}

impl Deriver<'_> {
    fn fresh(&mut self, procedure: &str) -> ControlPoint {
        self.next_id += 1;
        let p = ControlPoint::new(self.next_id);
        self.points.insert(p, FrameKey::new(procedure));
        p
    }

    /// Drops inherited guards that `mods` may falsify.
    fn prune(&self, r: &[Expr], mods: &Mods) -> Vec<Expr> {
        r.iter()
            .filter(|g| {
                let vars = g.vars();
                !vars.iter().any(|v| {
                    mods.vars.contains(v) || (mods.any_global && self.program.is_global(v))
                })
            })
            .cloned()
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        lhs: ControlPoint,
        rhs: Rhs,
        guards: &[Expr],
        assigns: Vec<Constraint>,
        p: &str,
        span: Span,
        text: String,
    ) {
        let mut explicit: Vec<Constraint> = guards.iter().cloned().map(Constraint::Guard).collect();
        explicit.extend(assigns);
        self.rules.push(SymbolicRule {
            lhs,
            rhs,
            constraints: Vec::new(),
            explicit,
            fresh_top: false,
            owner: FrameKey::new(p),
            origin: Origin::new(span, text),
        });
    }

    fn phi(
        &mut self,
        s: &Stmt,
        ni: ControlPoint,
        nj: ControlPoint,
        p: &str,
        r: &[Expr],
        subst: &Subst,
    ) {
        let span = s.span;
        match &s.kind {
            StmtKind::Skip => self.emit(ni, Rhs::Step(nj), r, vec![], p, span, "skip".into()),
            StmtKind::Assign { target, value } => {
                let x = subst_name(subst, target);
                let e = subst_expr(subst, value);
                let text = format!("{x} := {}", pretty::expr(&e));
                let assign = Constraint::assign(PostVar::single(x), e);
                self.emit(ni, Rhs::Step(nj), r, vec![assign], p, span, text);
            }
            StmtKind::Seq(items) => {
                let mut cur = ni;
                let mut guards = r.to_vec();
                for (k, item) in items.iter().enumerate() {
                    let next = if k + 1 == items.len() {
                        nj
                    } else {
                        self.fresh(p)
                    };
                    self.phi(item, cur, next, p, &guards, subst);
                    guards = self.prune(&guards, &modified(item, subst));
                    cur = next;
                }
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let e = subst_expr(subst, cond);
                let nk = self.fresh(p);
                let nl = self.fresh(p);
                let mut pos = r.to_vec();
                pos.push(e.clone());
                let mut neg = r.to_vec();
                neg.push(e.clone().negate());
                let shown = pretty::expr(&e);
                self.emit(
                    ni,
                    Rhs::Step(nk),
                    &pos,
                    vec![],
                    p,
                    span,
                    format!("if ({shown}) then"),
                );
                self.emit(
                    ni,
                    Rhs::Step(nl),
                    &neg,
                    vec![],
                    p,
                    span,
                    format!("if ({shown}) else"),
                );
                self.phi(then_branch, nk, nj, p, &pos, subst);
                self.phi(else_branch, nl, nj, p, &neg, subst);
            }
            StmtKind::While { cond, body } => {
                let e = subst_expr(subst, cond);
                let base = self.prune(r, &modified(body, subst));
                let nq = self.fresh(p);
                let mut pos = base.clone();
                pos.push(e.clone());
                let mut neg = base;
                neg.push(e.clone().negate());
                let shown = pretty::expr(&e);
                self.emit(
                    ni,
                    Rhs::Step(nj),
                    &neg,
                    vec![],
                    p,
                    span,
                    format!("while ({shown}) exit"),
                );
                self.emit(
                    ni,
                    Rhs::Step(nq),
                    &pos,
                    vec![],
                    p,
                    span,
                    format!("while ({shown}) enter"),
                );
                self.phi(body, nq, ni, p, &pos, subst);
            }
            StmtKind::LetVar { name, init, body } => {
                let e = subst_expr(subst, init);
                let nk = self.fresh(p);
                let text = format!("letvar {name} := {}", pretty::expr(&e));
                let bind = Constraint::assign(PostVar::single(name.clone()), e);
                self.emit(ni, Rhs::Step(nk), r, vec![bind], p, span, text);
                self.phi(body, nk, nj, p, r, subst);
            }
            StmtKind::Call { callee, arg, out } => {
                let decl = self
                    .program
                    .procedure(callee)
                    .expect("validated call target");
                let (x1, x2) = (
                    decl.in_param.clone().expect("validated parameters"),
                    decl.out_param.clone().expect("validated parameters"),
                );
                let global = subst_name(subst, out);
                let e = subst_expr(subst, arg);
                self.return_stores.insert(global.clone());
                let key = (callee.clone(), global.clone());
                let (entry, exit, fresh) = match self.memo.get(&key) {
                    Some(&(k, q)) => (k, q, false),
                    None => {
                        let k = self.fresh(callee);
                        let q = self.fresh(callee);
                        self.memo.insert(key, (k, q));
                        (k, q, true)
                    }
                };
                let text = format!("{callee}({}, {global})", pretty::expr(&e));
                let bind = Constraint::assign(PostVar::single(x1), e);
                self.emit(ni, Rhs::Push(entry, nj), r, vec![bind], p, span, text);
                if fresh {
                    let inner = Subst::from([(x2, global)]);
                    self.phi(&decl.body, entry, exit, callee, &[], &inner);
                    self.emit(
                        exit,
                        Rhs::Pop,
                        &[],
                        vec![],
                        callee,
                        decl.span,
                        format!("return from {callee}"),
                    );
                }
            }
        }
    }
}

/// Derived rules before frame closure.
#[derive(Debug, Clone)]
pub struct Derived {
    pub rules: Vec<SymbolicRule>,
    pub points: BTreeMap<ControlPoint, FrameKey>,
    pub start: ControlPoint,
    pub final_point: ControlPoint,
    pub return_stores: Vec<String>,
}

pub fn derive_rules(program: &Program) -> Derived {
    let main = program.main().expect("validated program has main");
    let mut d = Deriver {
        program,
        next_id: 0,
        points: BTreeMap::new(),
        rules: Vec::new(),
        memo: HashMap::new(),
        return_stores: IndexSet::new(),
    };
    let start = d.fresh(ENTRY);
    let fin = d.fresh(ENTRY);
    d.phi(&main.body, start, fin, ENTRY, &[], &Subst::new());
    d.emit(
        fin,
        Rhs::Pop,
        &[],
        vec![],
        ENTRY,
        main.span,
        "end of main".into(),
    );
    Derived {
        rules: d.rules,
        points: d.points,
        start,
        final_point: fin,
        return_stores: d.return_stores.into_iter().collect(),
    }
}

/// Attaches variable layouts and closes every rule under frame conditions.
pub fn to_symbolic(
    derived: Derived,
    locals: &UnifiedLocals,
    globals: Vec<String>,
    bits: u32,
) -> Result<SymbolicPds, PdsError> {
    let mut frames = IndexMap::new();
    for key in derived.points.values() {
        if !frames.contains_key(key) {
            frames.insert(key.clone(), locals.eta(&key.procedure));
        }
    }
    frames.sort_by(|a, _, b, _| (a.procedure != ENTRY, a).cmp(&(b.procedure != ENTRY, b)));
    let mut pds = SymbolicPds {
        bits,
        globals,
        frames,
        points: derived.points,
        rules: derived.rules,
        start: derived.start,
        final_point: derived.final_point,
        return_stores: derived.return_stores,
    };
    pds.close()?;
    Ok(pds)
}

/// Derives the symbolic pushdown system of a validated program.
pub fn derive(program: &Program, bits: u32) -> Result<SymbolicPds, PdsError> {
    let locals = unify_locals(program);
    to_symbolic(derive_rules(program), &locals, program.global_names(), bits)
}
