//! Concrete-syntax printer. Output re-parses to an equal AST.

use std::fmt::Write;

use super::ast::{Expr, Label, Program, Stmt, StmtKind};

pub fn expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Const(c) => write!(out, "{c}").unwrap(),
        Expr::Var(v) => out.push_str(v),
        Expr::Not(inner) => {
            out.push('!');
            write_expr(out, inner, u8::MAX);
        }
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(out, a, prec);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, b, prec + 1);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn program(p: &Program) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < p.globals.len() {
        let label = p.globals[i].label;
        let mut names = Vec::new();
        while i < p.globals.len() && p.globals[i].label == label {
            names.push(p.globals[i].name.as_str());
            i += 1;
        }
        let kw = match label {
            Label::Low => "low",
            Label::High => "high",
        };
        writeln!(out, "{kw} {};", names.join(", ")).unwrap();
    }
    for proc in &p.procedures {
        if !out.is_empty() {
            out.push('\n');
        }
        match (&proc.in_param, &proc.out_param) {
            (Some(a), Some(b)) => writeln!(out, "proc {}(in {a}, out {b}) {{", proc.name),
            _ => writeln!(out, "proc {}() {{", proc.name),
        }
        .unwrap();
        write_body(&mut out, &proc.body, 1);
        out.push_str("}\n");
    }
    out
}

pub fn stmt(s: &Stmt) -> String {
    let mut out = String::new();
    write_body(&mut out, s, 0);
    out
}

fn write_body(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Seq(items) => items.iter().for_each(|i| write_stmt(out, i, depth)),
        _ => write_stmt(out, s, depth),
    }
}

fn write_block(out: &mut String, s: &Stmt, depth: usize) {
    out.push_str("{\n");
    write_body(out, s, depth + 1);
    out.push_str(&"  ".repeat(depth));
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    out.push_str(&"  ".repeat(depth));
    match &s.kind {
        StmtKind::Skip => out.push_str("skip;"),
        StmtKind::Assign { target, value } => write!(out, "{target} := {};", expr(value)).unwrap(),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            write!(out, "if ({}) ", expr(cond)).unwrap();
            write_block(out, then_branch, depth);
            if else_branch.kind != StmtKind::Skip {
                out.push_str(" else ");
                write_block(out, else_branch, depth);
            }
        }
        StmtKind::While { cond, body } => {
            write!(out, "while ({}) ", expr(cond)).unwrap();
            write_block(out, body, depth);
        }
        StmtKind::LetVar { name, init, body } => {
            write!(out, "letvar {name} := {} in ", expr(init)).unwrap();
            write_block(out, body, depth);
        }
        StmtKind::Call {
            callee,
            arg,
            out: dst,
        } => write!(out, "{callee}({}, {dst});", expr(arg)).unwrap(),
        StmtKind::Seq(_) => {
            write_block(out, s, depth);
        }
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::ast::{BinOp, GlobalDecl, ProcDecl, Span};
    use super::super::{parse_program, parse_unchecked};
    use super::*;

    fn ident() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("a".to_string()),
            Just("b".to_string()),
            Just("low1".to_string()),
            Just("x#2".to_string()),
            "[a-z][a-z0-9_]{0,3}",
        ]
        .prop_filter("keyword", |s| {
            !matches!(
                s.as_str(),
                "skip"
                    | "if"
                    | "else"
                    | "while"
                    | "letvar"
                    | "in"
                    | "out"
                    | "proc"
                    | "low"
                    | "high"
                    | "true"
                    | "false"
            )
        })
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u64..20).prop_map(Expr::Const),
            ident().prop_map(Expr::Var)
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Expr::negate),
                (
                    proptest::sample::select(BinOp::ALL.to_vec()),
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
            ]
        })
    }

    fn arb_stmt() -> impl Strategy<Value = Stmt> {
        let sp = Span::default();
        let leaf = prop_oneof![
            Just(Stmt::skip(sp)),
            (ident(), arb_expr())
                .prop_map(move |(target, value)| Stmt::new(StmtKind::Assign { target, value }, sp)),
            (ident(), arb_expr(), ident()).prop_map(move |(callee, arg, out)| Stmt::new(
                StmtKind::Call { callee, arg, out },
                sp
            )),
        ];
        leaf.prop_recursive(4, 32, 3, move |inner| {
            prop_oneof![
                (arb_expr(), inner.clone(), inner.clone()).prop_map(move |(cond, t, e)| Stmt::new(
                    StmtKind::If {
                        cond,
                        then_branch: Box::new(t),
                        else_branch: Box::new(e)
                    },
                    sp
                )),
                (arb_expr(), inner.clone()).prop_map(move |(cond, body)| Stmt::new(
                    StmtKind::While {
                        cond,
                        body: Box::new(body)
                    },
                    sp
                )),
                (ident(), arb_expr(), inner.clone()).prop_map(move |(name, init, body)| Stmt::new(
                    StmtKind::LetVar {
                        name,
                        init,
                        body: Box::new(body)
                    },
                    sp
                )),
                proptest::collection::vec(inner, 2..4).prop_map(move |v| Stmt::block(v, sp)),
            ]
        })
    }

    fn arb_program() -> impl Strategy<Value = Program> {
        (
            proptest::collection::vec((ident(), any::<bool>()), 0..4),
            proptest::collection::vec((ident(), ident(), ident(), arb_stmt()), 0..3),
            arb_stmt(),
        )
            .prop_map(|(globals, procs, main)| {
                let sp = Span::default();
                let mut procedures: Vec<ProcDecl> = procs
                    .into_iter()
                    .map(|(name, a, b, body)| ProcDecl {
                        name,
                        in_param: Some(a),
                        out_param: Some(b),
                        body,
                        span: sp,
                    })
                    .collect();
                procedures.push(ProcDecl {
                    name: "main".into(),
                    in_param: None,
                    out_param: None,
                    body: main,
                    span: sp,
                });
                Program {
                    globals: globals
                        .into_iter()
                        .map(|(name, low)| GlobalDecl {
                            name,
                            label: if low { Label::Low } else { Label::High },
                            span: sp,
                        })
                        .collect(),
                    procedures,
                }
            })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(p in arb_program()) {
            let text = program(&p);
            let back = parse_unchecked(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, p);
        }

        #[test]
        fn expression_round_trip(e in arb_expr()) {
            let text = expr(&e);
            prop_assert_eq!(super::super::parse_expression(&text).unwrap(), e);
        }
    }

    const CORPUS: &[&str] = &[
        "proc main() { }",
        "low l; proc main() { l := 0; }",
        "low l; high h; proc main() { l := h * 0; }",
        "low l; high h; proc main() { l := h; }",
        "low l, x; high h, y; proc main() { if (l) { y := h; } else { skip; } if (!l) { x := y; } }",
        "low l; high h; proc func(in a, out b) { letvar c := 0 in { while (a > 0) { c++; a--; } b := c; } } proc main() { func(h, l); }",
        "low l; proc main() { while (l < 3) { l := l + 1; } }",
        "low l; high h; proc main() { if (h > 1) { l := 1; } else { l := 0; } }",
        "low l; proc main() { letvar x := 1 in { letvar y := x + 1 in { l := x * y; } } }",
        "low l; proc main() { letvar x := 1 in { letvar x := x + 1 in { l := x; } } }",
        "low l; high h; proc f(in a, out b) { b := a; } proc main() { f(h, l); }",
        "low l; high h; proc f(in a, out b) { if (a > 0) { f(a - 1, b); } else { b := 0; } } proc main() { f(h, l); }",
        "low l; high h; proc f(in a, out b) { b := a + 1; } proc g(in a, out b) { f(a, b); f(a * 2, b); } proc main() { g(1, l); }",
        "low l; proc main() { l := (1 + 2) * 3; }",
        "low l; proc main() { l := 1 - (2 - 3); }",
        "low l; proc main() { l := !(l == 1) && l != 2 || l >= 3; }",
        "low l; proc main() { l := true; l := false; }",
        "low l; proc main() { skip; skip; skip; }",
        "low l; high h; proc main() { while (h > 0) { skip; } l := 1; }",
        "low l1, l2; high b1, b2; proc main() { if (b1) { l1 := 1; } if (b2) { l2 := 1; } }",
        "low l; proc main() { if (l) { if (l > 1) { l := 0; } } else { l := 3; } }",
        "low l; proc main() { while (l > 0) { while (l > 1) { l--; } l--; } }",
        "low l; proc main() { letvar i := 0 in { while (i < 2) { i++; l := l + i; } } }",
        "low l; high h; proc f(in a, out b) { letvar t := a in { b := t; } } proc main() { letvar u := 2 in { f(u, l); } }",
        "low l; high h; proc f(in a, out b) { skip; } proc main() { f(h, l); f(l, h); }",
        "low l; proc main() { l := 1 < 2 < 3; }",
        "low l; proc main() { l := !!l; }",
        "low l; # header comment\nproc main() { l := 2; # trailing\n }",
        "low a; high b; low c; proc main() { a := b + c; }",
        "low l; high h; proc p(in x, out y) { if (x) { y := 1; } else { y := 0; } } proc main() { if (h) { p(1, l); } else { p(0, l); } }",
        "low l; proc main() { if (l <= 1) { l := l * l; } else { skip; } }",
    ];

    #[test]
    fn corpus_round_trip() {
        assert!(CORPUS.len() >= 30);
        for src in CORPUS {
            let p = parse_unchecked(src).unwrap();
            let text = program(&p);
            assert_eq!(
                parse_unchecked(&text).unwrap(),
                p,
                "source {src:?}\nprinted:\n{text}"
            );
            let v = parse_program(src).unwrap();
            assert_eq!(parse_program(&program(&v)).unwrap(), v);
        }
    }

    #[test]
    fn validate_is_idempotent_on_corpus() {
        for src in CORPUS {
            let once = parse_program(src).unwrap();
            let twice = super::super::validate::validate(once.clone()).unwrap();
            assert_eq!(once, twice, "source {src:?}");
        }
    }
}
