//! Text export of composed systems for an external symbolic model checker.
//!
//! ```text
//! file     := comment* "bits" N ";" globals? module* property
//! globals  := "global int" decl ("," decl)* ";"
//! decl     := name "(" N ")"
//! module   := "module" frame "{" locals? rule* "}"
//! locals   := "local int" decl ("," decl)* ";"
//! rule     := "q <" point ">" "-->" "q <" point* ">" "(" conj ")" ";"
//! conj     := "true" | atom ("&" atom)*
//! atom     := expr | var ("'" | "''") "=" expr
//! property := "property" "\"" ltl "\"" ";"
//! ```
//!
//! One module per frame kind; a second-copy frame `f` is named `f_t`.
//! The original exit of `main` is written `n_final`, its copy `n_finalt`.

use std::fmt::Write;

use crate::frontend::pretty;
use crate::pds::{Constraint, ControlPoint, Rhs};
use crate::selfcomp::ComposedPds;

pub fn export_checker_input(c: &ComposedPds) -> String {
    let pds = &c.pds;
    let bits = pds.bits;
    let point = |p: ControlPoint| {
        if p.id == c.seam.id {
            format!("n_final{}", if p.tagged { "t" } else { "" })
        } else {
            p.to_string()
        }
    };
    let decls = |names: &[String]| {
        names
            .iter()
            .map(|n| format!("{n}({bits})"))
            .collect::<Vec<_>>()
            .join(", ")
    };

    let mut out = String::new();
    writeln!(out, "# {} self-composition", c.mode).unwrap();
    writeln!(out, "bits {bits};").unwrap();
    if !pds.globals.is_empty() {
        writeln!(out, "global int {};", decls(&pds.globals)).unwrap();
    }
    for (key, locals) in &pds.frames {
        let name = if key.tagged {
            format!("{}_t", key.procedure)
        } else {
            key.procedure.clone()
        };
        writeln!(out, "\nmodule {name} {{").unwrap();
        if !locals.is_empty() {
            writeln!(out, "  local int {};", decls(locals)).unwrap();
        }
        for r in pds
            .rules
            .iter()
            .filter(|r| pds.points.get(&r.lhs) == Some(key))
        {
            let rhs = match r.rhs {
                Rhs::Pop => String::new(),
                Rhs::Step(a) => point(a),
                Rhs::Push(a, b) => format!("{} {}", point(a), point(b)),
            };
            let conj: Vec<String> = r
                .constraints
                .iter()
                .map(|k| match k {
                    Constraint::Guard(e) => pretty::expr(e),
                    Constraint::Assign { target, value } => {
                        format!("{target} = {}", pretty::expr(value))
                    }
                })
                .collect();
            let conj = if conj.is_empty() {
                "true".to_string()
            } else {
                conj.join(" & ")
            };
            writeln!(out, "  q <{}> --> q <{rhs}> ({conj});", point(r.lhs)).unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    writeln!(out, "\nproperty \"{}\";", property(c)).unwrap();
    out
}

/// `(low-eq) -> [](n_finalt -> (low-eq))` over the original names.
pub fn property(c: &ComposedPds) -> String {
    let eq = if c.observed.is_empty() {
        "true".to_string()
    } else {
        c.observed
            .iter()
            .map(|(a, b)| format!("{a} == {b}"))
            .collect::<Vec<_>>()
            .join(" && ")
    };
    format!("({eq}) -> [](n_finalt -> ({eq}))")
}
