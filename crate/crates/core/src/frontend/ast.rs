use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Source position (1-based line and column).
///
/// Spans never take part in equality, so two ASTs that differ only in
/// where they were parsed from compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}
impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Low,
    High,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Low => "low",
            Label::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul => 5,
        }
    }

    pub const ALL: [BinOp; 11] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::And,
        BinOp::Or,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expr {
    Const(u64),
    Var(String),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(self) -> Self {
        Expr::Not(Box::new(self))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Not(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn max_constant(&self) -> u64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(_) => 0,
            Expr::Not(e) => e.max_constant(),
            Expr::Binary(_, a, b) => a.max_constant().max(b.max_constant()),
        }
    }

    /// Renames variables through `f`; names for which `f` returns `None`
    /// are kept.
    pub fn rename(&self, f: &impl Fn(&str) -> Option<String>) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => Expr::Var(f(v).unwrap_or_else(|| v.clone())),
            Expr::Not(e) => Expr::Not(Box::new(e.rename(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.rename(f)), Box::new(b.rename(f)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StmtKind {
    Skip,
    Assign {
        target: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    /// Always holds at least two statements, none of which is itself a `Seq`.
    Seq(Vec<Stmt>),
    LetVar {
        name: String,
        init: Expr,
        body: Box<Stmt>,
    },
    Call {
        callee: String,
        arg: Expr,
        out: String,
    },
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }

    pub fn skip(span: Span) -> Self {
        Stmt::new(StmtKind::Skip, span)
    }

    /// Builds a block from a statement list, canonicalizing the empty and
    /// singleton cases and flattening nested sequences.
    pub fn block(stmts: Vec<Stmt>, span: Span) -> Self {
        let mut flat = Vec::with_capacity(stmts.len());
        for s in stmts {
            match s.kind {
                StmtKind::Seq(inner) => flat.extend(inner),
                _ => flat.push(s),
            }
        }
        match flat.len() {
            0 => Stmt::skip(span),
            1 => flat.pop().unwrap(),
            _ => Stmt::new(StmtKind::Seq(flat), span),
        }
    }

    pub fn max_constant(&self) -> u64 {
        match &self.kind {
            StmtKind::Skip => 0,
            StmtKind::Assign { value, .. } => value.max_constant(),
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => cond
                .max_constant()
                .max(then_branch.max_constant())
                .max(else_branch.max_constant()),
            StmtKind::While { cond, body } => cond.max_constant().max(body.max_constant()),
            StmtKind::Seq(items) => items.iter().map(Stmt::max_constant).max().unwrap_or(0),
            StmtKind::LetVar { init, body, .. } => init.max_constant().max(body.max_constant()),
            StmtKind::Call { arg, .. } => arg.max_constant(),
        }
    }

    /// Visits every statement in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                else_branch.walk(f);
            }
            StmtKind::While { body, .. } | StmtKind::LetVar { body, .. } => body.walk(f),
            StmtKind::Seq(items) => items.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    pub label: Label,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcDecl {
    pub name: String,
    /// `None` only for `main`, which takes no parameters.
    pub in_param: Option<String>,
    pub out_param: Option<String>,
    pub body: Stmt,
    pub span: Span,
}

pub const ENTRY: &str = "main";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub procedures: Vec<ProcDecl>,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&ProcDecl> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn main(&self) -> Option<&ProcDecl> {
        self.procedure(ENTRY)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.global(name).is_some()
    }

    pub fn global_names(&self) -> Vec<String> {
        self.globals.iter().map(|g| g.name.clone()).collect()
    }

    pub fn with_label(&self, label: Label) -> Vec<String> {
        self.globals
            .iter()
            .filter(|g| g.label == label)
            .map(|g| g.name.clone())
            .collect()
    }

    pub fn max_constant(&self) -> u64 {
        self.procedures
            .iter()
            .map(|p| p.body.max_constant())
            .max()
            .unwrap_or(0)
    }
}
