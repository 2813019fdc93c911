//! Scope checking, alpha-renaming and call-graph construction.
//!
//! Every binder of a procedure (its parameters and each `letvar`) that
//! collides with a global or with an earlier binder of the same procedure
//! is renamed to `name#k`, the smallest `k` not already in use. After
//! validation all binder names within a procedure are distinct, which
//! lets later passes treat locals as flat per-procedure slots.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::{Expr, ProcDecl, Program, Span, Stmt, StmtKind, ENTRY};
use super::FrontendError;

pub type CallGraph = BTreeMap<String, BTreeSet<String>>;

pub fn validate(program: Program) -> Result<Program, FrontendError> {
    let mut seen = HashSet::new();
    for g in &program.globals {
        if !seen.insert(g.name.as_str()) {
            return Err(FrontendError::DuplicateGlobal {
                name: g.name.clone(),
                span: g.span,
            });
        }
    }
    let mut seen = HashSet::new();
    for p in &program.procedures {
        if !seen.insert(p.name.as_str()) {
            return Err(FrontendError::DuplicateProcedure {
                name: p.name.clone(),
                span: p.span,
            });
        }
        let has_params = p.in_param.is_some() && p.out_param.is_some();
        if p.name == ENTRY && (p.in_param.is_some() || p.out_param.is_some()) {
            return Err(FrontendError::MainHasParameters { span: p.span });
        }
        if p.name != ENTRY && !has_params {
            return Err(FrontendError::MissingParameters {
                name: p.name.clone(),
                span: p.span,
            });
        }
    }
    if program.main().is_none() {
        return Err(FrontendError::MissingMain);
    }

    let globals: HashSet<String> = program.global_names().into_iter().collect();
    let procedures = program
        .procedures
        .iter()
        .map(|p| rename_procedure(p, &globals))
        .collect::<Result<Vec<_>, _>>()?;
    let program = Program {
        globals: program.globals,
        procedures,
    };

    for p in &program.procedures {
        check_calls(&program, p, &p.body)?;
    }
    Ok(program)
}

/// Direct callees of every procedure.
pub fn call_graph(program: &Program) -> CallGraph {
    program
        .procedures
        .iter()
        .map(|p| {
            let mut callees = BTreeSet::new();
            p.body.walk(&mut |s| {
                if let StmtKind::Call { callee, .. } = &s.kind {
                    callees.insert(callee.clone());
                }
            });
            (p.name.clone(), callees)
        })
        .collect()
}

fn check_calls(program: &Program, proc: &ProcDecl, stmt: &Stmt) -> Result<(), FrontendError> {
    let mut result = Ok(());
    stmt.walk(&mut |s| {
        if result.is_err() {
            return;
        }
        if let StmtKind::Call { callee, out, .. } = &s.kind {
            result = if callee == ENTRY {
                if proc.name == ENTRY {
                    Err(FrontendError::MainRecursive { span: s.span })
                } else {
                    Err(FrontendError::CallsMain {
                        caller: proc.name.clone(),
                        span: s.span,
                    })
                }
            } else if program.procedure(callee).is_none() {
                Err(FrontendError::UnknownProcedure {
                    name: callee.clone(),
                    span: s.span,
                })
            } else if !program.is_global(out) && proc.out_param.as_deref() != Some(out) {
                Err(FrontendError::OutParamNotGlobal {
                    name: out.clone(),
                    procedure: proc.name.clone(),
                    span: s.span,
                })
            } else {
                Ok(())
            };
        }
    });
    result
}

struct Renamer<'g> {
    globals: &'g HashSet<String>,
    procedure: String,
    /// Every identifier that appears anywhere in the procedure, plus
    /// names handed out so far.
    used: HashSet<String>,
    /// Binder names already introduced in this procedure.
    bound: HashSet<String>,
    /// Innermost-last scope: (source name, renamed name).
    scope: Vec<(String, String)>,
}

impl Renamer<'_> {
    fn bind(&mut self, name: &str) -> String {
        let fresh = if self.globals.contains(name) || self.bound.contains(name) {
            let base = name.split('#').next().unwrap_or(name);
            (1..)
                .map(|k| format!("{base}#{k}"))
                .find(|c| !self.used.contains(c) && !self.globals.contains(c))
                .expect("unbounded counter")
        } else {
            name.to_string()
        };
        self.used.insert(fresh.clone());
        self.bound.insert(fresh.clone());
        self.scope.push((name.to_string(), fresh.clone()));
        fresh
    }

    fn resolve(&self, name: &str, span: Span) -> Result<String, FrontendError> {
        if let Some((_, renamed)) = self.scope.iter().rev().find(|(src, _)| src == name) {
            Ok(renamed.clone())
        } else if self.globals.contains(name) {
            Ok(name.to_string())
        } else {
            Err(FrontendError::UndeclaredVariable {
                name: name.to_string(),
                procedure: self.procedure.clone(),
                span,
            })
        }
    }

    fn expr(&self, e: &Expr, span: Span) -> Result<Expr, FrontendError> {
        Ok(match e {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => Expr::Var(self.resolve(v, span)?),
            Expr::Not(inner) => self.expr(inner, span)?.negate(),
            Expr::Binary(op, a, b) => Expr::bin(*op, self.expr(a, span)?, self.expr(b, span)?),
        })
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Stmt, FrontendError> {
        let span = s.span;
        let kind = match &s.kind {
            StmtKind::Skip => StmtKind::Skip,
            StmtKind::Assign { target, value } => StmtKind::Assign {
                target: self.resolve(target, span)?,
                value: self.expr(value, span)?,
            },
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => StmtKind::If {
                cond: self.expr(cond, span)?,
                then_branch: Box::new(self.stmt(then_branch)?),
                else_branch: Box::new(self.stmt(else_branch)?),
            },
            StmtKind::While { cond, body } => StmtKind::While {
                cond: self.expr(cond, span)?,
                body: Box::new(self.stmt(body)?),
            },
            StmtKind::Seq(items) => StmtKind::Seq(
                items
                    .iter()
                    .map(|i| self.stmt(i))
                    .collect::<Result<_, _>>()?,
            ),
            StmtKind::LetVar { name, init, body } => {
                let init = self.expr(init, span)?;
                let fresh = self.bind(name);
                let body = self.stmt(body)?;
                self.scope.pop();
                StmtKind::LetVar {
                    name: fresh,
                    init,
                    body: Box::new(body),
                }
            }
            StmtKind::Call { callee, arg, out } => StmtKind::Call {
                callee: callee.clone(),
                arg: self.expr(arg, span)?,
                out: self.resolve(out, span)?,
            },
        };
        Ok(Stmt::new(kind, span))
    }
}

fn rename_procedure(p: &ProcDecl, globals: &HashSet<String>) -> Result<ProcDecl, FrontendError> {
    let mut used: HashSet<String> = HashSet::new();
    used.extend(p.in_param.iter().cloned());
    used.extend(p.out_param.iter().cloned());
    p.body.walk(&mut |s| match &s.kind {
        StmtKind::Assign { target, value } => {
            used.insert(target.clone());
            used.extend(value.vars());
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => used.extend(cond.vars()),
        StmtKind::LetVar { name, init, .. } => {
            used.insert(name.clone());
            used.extend(init.vars());
        }
        StmtKind::Call { arg, out, .. } => {
            used.extend(arg.vars());
            used.insert(out.clone());
        }
        StmtKind::Skip | StmtKind::Seq(_) => {}
    });
    let mut r = Renamer {
        globals,
        procedure: p.name.clone(),
        used,
        bound: HashSet::new(),
        scope: Vec::new(),
    };
    let in_param = p.in_param.as_deref().map(|x| r.bind(x));
    let out_param = p.out_param.as_deref().map(|x| r.bind(x));
    let body = r.stmt(&p.body)?;
    Ok(ProcDecl {
        name: p.name.clone(),
        in_param,
        out_param,
        body,
        span: p.span,
    })
}
