//! Symbolic pushdown systems.
//!
//! Global variables form the control location and each stack symbol
//! pairs a control point with a valuation of its procedure's frame.
//! A rule `<n_i> -> <w>` carries a constraint set relating the pre-state
//! (unprimed names) to the post-state: `g'` for globals, `y'` for the top
//! frame after the step and `y''` for the bottom frame of a push.

mod exec;
mod ground;

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Expr, Span};
use crate::frontend::pretty;

pub use exec::{pds_exec, ExecOutcome, Halted};
pub use ground::{
    flatten, state_budget, CompiledPds, Configuration, ExplicitPds, GroundRhs, GroundRule,
    Successors, Symbol, DEFAULT_STATE_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ControlPoint {
    pub id: u32,
    /// Set on points belonging to the second copy of a composed system.
    pub tagged: bool,
}

impl ControlPoint {
    pub fn new(id: u32) -> Self {
        ControlPoint { id, tagged: false }
    }

    pub fn tag(self) -> Self {
        ControlPoint {
            id: self.id,
            tagged: true,
        }
    }
}

impl fmt::Display for ControlPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}{}", self.id, if self.tagged { "t" } else { "" })
    }
}

/// Identifies a frame layout: a procedure, possibly in the second copy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameKey {
    pub procedure: String,
    pub tagged: bool,
}

impl FrameKey {
    pub fn new(procedure: impl Into<String>) -> Self {
        FrameKey {
            procedure: procedure.into(),
            tagged: false,
        }
    }

    pub fn tag(&self) -> Self {
        FrameKey {
            procedure: self.procedure.clone(),
            tagged: true,
        }
    }
}

impl fmt::Display for FrameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            self.procedure,
            if self.tagged { ".t" } else { "" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Prime {
    /// Globals and the top frame after the step.
    Single,
    /// The bottom frame of a push.
    Double,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PostVar {
    pub name: String,
    pub prime: Prime,
}

impl PostVar {
    pub fn single(name: impl Into<String>) -> Self {
        PostVar {
            name: name.into(),
            prime: Prime::Single,
        }
    }

    pub fn double(name: impl Into<String>) -> Self {
        PostVar {
            name: name.into(),
            prime: Prime::Double,
        }
    }
}

impl fmt::Display for PostVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let marks = match self.prime {
            Prime::Single => "'",
            Prime::Double => "''",
        };
        write!(f, "{}{marks}", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// A branch precondition over the pre-state.
    Guard(Expr),
    /// `target = value`, with `value` over the pre-state.
    Assign { target: PostVar, value: Expr },
}

impl Constraint {
    pub fn assign(target: PostVar, value: Expr) -> Self {
        Constraint::Assign { target, value }
    }

    pub fn is_guard(&self) -> bool {
        matches!(self, Constraint::Guard(_))
    }

    pub fn rename(&self, f: &impl Fn(&str) -> Option<String>) -> Constraint {
        match self {
            Constraint::Guard(e) => Constraint::Guard(e.rename(f)),
            Constraint::Assign { target, value } => Constraint::Assign {
                target: PostVar {
                    name: f(&target.name).unwrap_or_else(|| target.name.clone()),
                    prime: target.prime,
                },
                value: value.rename(f),
            },
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Guard(e) => f.write_str(&pretty::expr(e)),
            Constraint::Assign { target, value } => write!(f, "{target} = {}", pretty::expr(value)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rhs {
    Pop,
    Step(ControlPoint),
    /// New top symbol, then the continuation below it.
    Push(ControlPoint, ControlPoint),
}

impl Rhs {
    pub fn len(&self) -> usize {
        match self {
            Rhs::Pop => 0,
            Rhs::Step(_) => 1,
            Rhs::Push(..) => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Rhs::Pop)
    }

    pub fn points(&self) -> Vec<ControlPoint> {
        match *self {
            Rhs::Pop => vec![],
            Rhs::Step(a) => vec![a],
            Rhs::Push(a, b) => vec![a, b],
        }
    }

    pub fn map(&self, f: impl Fn(ControlPoint) -> ControlPoint) -> Rhs {
        match *self {
            Rhs::Pop => Rhs::Pop,
            Rhs::Step(a) => Rhs::Step(f(a)),
            Rhs::Push(a, b) => Rhs::Push(f(a), f(b)),
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Pop => f.write_str("eps"),
            Rhs::Step(a) => write!(f, "{a}"),
            Rhs::Push(a, b) => write!(f, "{a} {b}"),
        }
    }
}

/// Where a rule came from, for witnesses and stable ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub span: Span,
    pub text: String,
}

impl Origin {
    pub fn new(span: Span, text: impl Into<String>) -> Self {
        Origin {
            span,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicRule {
    pub lhs: ControlPoint,
    pub rhs: Rhs,
    /// The full constraint set after frame closure.
    pub constraints: Vec<Constraint>,
    /// Guards and assignments as derived, before frame closure.
    pub explicit: Vec<Constraint>,
    /// Top-frame slots not assigned explicitly start at 0 instead of
    /// carrying over from the pre-state.
    pub fresh_top: bool,
    pub owner: FrameKey,
    pub origin: Origin,
}

impl SymbolicRule {
    pub fn guards(&self) -> impl Iterator<Item = &Expr> {
        self.constraints.iter().filter_map(|c| match c {
            Constraint::Guard(e) => Some(e),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PdsError {
    #[error("rule at {point}: `{var}` receives two different values")]
    ConflictingConstraint { point: ControlPoint, var: String },
    #[error("rule at {point}: `{var}` is not visible")]
    UnknownVariable { point: ControlPoint, var: String },
    #[error("control point {0} has no frame")]
    UnknownPoint(ControlPoint),
    #[error("joint state needs {needed} bits, budget is {budget}")]
    StateBudgetExceeded { needed: u32, budget: u32 },
    #[error("two rules apply at {0}")]
    NondeterministicStep(String),
    #[error("no terminal configuration within {0} steps")]
    Diverged(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicPds {
    pub bits: u32,
    pub globals: Vec<String>,
    /// Local layout of every frame kind.
    pub frames: IndexMap<FrameKey, Vec<String>>,
    /// Frame kind of every control point.
    pub points: BTreeMap<ControlPoint, FrameKey>,
    pub rules: Vec<SymbolicRule>,
    pub start: ControlPoint,
    pub final_point: ControlPoint,
    /// Globals substituted for out-parameters at some call site.
    pub return_stores: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizeStats {
    pub rules: usize,
    pub conjuncts: usize,
}

impl SymbolicPds {
    pub fn layout(&self, point: ControlPoint) -> Result<&[String], PdsError> {
        let key = self
            .points
            .get(&point)
            .ok_or(PdsError::UnknownPoint(point))?;
        Ok(&self.frames[key])
    }

    pub fn stats(&self) -> SizeStats {
        SizeStats {
            rules: self.rules.len(),
            conjuncts: self.rules.iter().map(|r| r.constraints.len()).sum(),
        }
    }

    /// Recomputes every rule's closed constraint set from its explicit
    /// constraints, then sorts rules into dump order.
    pub fn close(&mut self) -> Result<(), PdsError> {
        let closed = self
            .rules
            .iter()
            .map(|r| close_rule(self, r))
            .collect::<Result<Vec<_>, _>>()?;
        for (r, c) in self.rules.iter_mut().zip(closed) {
            r.constraints = c;
        }
        self.sort_rules();
        Ok(())
    }

    /// Orders rules by lhs (first-copy points before second-copy ones),
    /// then source position; ties keep derivation order.
    pub fn sort_rules(&mut self) {
        self.rules.sort_by_key(|r| {
            (
                r.lhs.tagged,
                r.lhs.id,
                r.origin.span.line,
                r.origin.span.col,
            )
        });
    }

    /// Textual dump: a header describing variables, then one rule per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(out, "bits {}", self.bits).unwrap();
        writeln!(out, "globals {}", self.globals.join(" ")).unwrap();
        for (key, vars) in &self.frames {
            write!(out, "frame {key}:").unwrap();
            for v in vars {
                write!(out, " {v}").unwrap();
            }
            writeln!(out).unwrap();
        }
        writeln!(out, "start {}", self.start).unwrap();
        writeln!(out, "final {}", self.final_point).unwrap();
        for r in &self.rules {
            writeln!(out, "{}", rule_line(r)).unwrap();
        }
        out
    }
}

pub fn rule_line(r: &SymbolicRule) -> String {
    let mut line = format!("{} -> {} |", r.lhs, r.rhs);
    for c in &r.constraints {
        write!(line, " {c};").unwrap();
    }
    line
}

/// Indices of rules whose right-hand side has more than two symbols.
/// Takes plain point sequences so that rule sets from outside the
/// derivation can be audited too.
pub fn check_normal_form<'a>(
    rules: impl IntoIterator<Item = (ControlPoint, &'a [ControlPoint])>,
) -> Vec<usize> {
    rules
        .into_iter()
        .enumerate()
        .filter(|(_, (_, rhs))| rhs.len() > 2)
        .map(|(i, _)| i)
        .collect()
}

impl SymbolicPds {
    pub fn normal_form_violations(&self) -> Vec<usize> {
        let rhs: Vec<(ControlPoint, Vec<ControlPoint>)> =
            self.rules.iter().map(|r| (r.lhs, r.rhs.points())).collect();
        check_normal_form(rhs.iter().map(|(l, r)| (*l, r.as_slice())))
    }
}

/// Adds frame conditions to a rule's explicit constraints.
///
/// Globals not assigned keep their value. For the top frame of a step,
/// a slot keeps its value when the source frame has it (unless the rule
/// starts a fresh frame) and is zeroed otherwise. A pushed callee frame
/// is fresh; the continuation frame below it is copied from the source.
pub fn close_rule(pds: &SymbolicPds, rule: &SymbolicRule) -> Result<Vec<Constraint>, PdsError> {
    let point = rule.lhs;
    let lhs_layout = pds.layout(rule.lhs)?;
    let mut guards = Vec::new();
    let mut assigned: BTreeMap<&PostVar, &Expr> = BTreeMap::new();
    for c in &rule.explicit {
        match c {
            Constraint::Guard(e) => guards.push(Constraint::Guard(e.clone())),
            Constraint::Assign { target, value } => {
                if let Some(prev) = assigned.insert(target, value) {
                    if prev != value {
                        return Err(PdsError::ConflictingConstraint {
                            point,
                            var: target.to_string(),
                        });
                    }
                }
            }
        }
    }

    let mut out = guards;
    let mut used = 0;
    let mut emit = |target: PostVar, default: Option<Expr>, out: &mut Vec<Constraint>| {
        let value = match assigned.get(&target) {
            Some(v) => {
                used += 1;
                Some((*v).clone())
            }
            None => default,
        };
        if let Some(value) = value {
            out.push(Constraint::Assign { target, value });
        }
    };

    for g in &pds.globals {
        emit(PostVar::single(g), Some(Expr::var(g)), &mut out);
    }
    let carry = |y: &String| {
        if lhs_layout.contains(y) {
            Expr::var(y)
        } else {
            Expr::Const(0)
        }
    };
    match rule.rhs {
        Rhs::Pop => {}
        Rhs::Step(top) => {
            for y in pds.layout(top)? {
                let default = if rule.fresh_top {
                    Expr::Const(0)
                } else {
                    carry(y)
                };
                emit(PostVar::single(y), Some(default), &mut out);
            }
        }
        Rhs::Push(top, bottom) => {
            for y in pds.layout(top)? {
                emit(PostVar::single(y), Some(Expr::Const(0)), &mut out);
            }
            for y in pds.layout(bottom)? {
                emit(PostVar::double(y), Some(carry(y)), &mut out);
            }
        }
    }
    if used != assigned.len() {
        let visible: Vec<PostVar> = out
            .iter()
            .filter_map(|c| match c {
                Constraint::Assign { target, .. } => Some(target.clone()),
                _ => None,
            })
            .collect();
        let stray = assigned.keys().find(|t| !visible.contains(t)).unwrap();
        return Err(PdsError::UnknownVariable {
            point,
            var: stray.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn rule(lhs: u32, rhs: Rhs, explicit: Vec<Constraint>) -> SymbolicRule {
        SymbolicRule {
            lhs: ControlPoint::new(lhs),
            rhs,
            constraints: explicit.clone(),
            explicit,
            fresh_top: false,
            owner: FrameKey::new("main"),
            origin: Origin::new(Span::default(), ""),
        }
    }

    pub fn one_frame(
        globals: &[&str],
        locals: &[&str],
        rules: Vec<SymbolicRule>,
        bits: u32,
    ) -> SymbolicPds {
        let mut points = BTreeMap::new();
        for r in &rules {
            points.insert(r.lhs, FrameKey::new("main"));
            for p in r.rhs.points() {
                points.insert(p, FrameKey::new("main"));
            }
        }
        SymbolicPds {
            bits,
            globals: globals.iter().map(|s| s.to_string()).collect(),
            frames: IndexMap::from([(
                FrameKey::new("main"),
                locals.iter().map(|s| s.to_string()).collect(),
            )]),
            points,
            start: ControlPoint::new(1),
            final_point: ControlPoint::new(2),
            rules,
            return_stores: vec![],
        }
    }

    #[test]
    fn closure_of_a_skip_rule() {
        let mut p = one_frame(&["h", "l"], &[], vec![rule(2, Rhs::Pop, vec![])], 1);
        p.close().unwrap();
        assert_eq!(rule_line(&p.rules[0]), "n2 -> eps | h' = h; l' = l;");
    }

    #[test]
    fn closure_of_a_variable_free_rule() {
        let mut p = one_frame(
            &["g"],
            &[],
            vec![rule(1, Rhs::Step(ControlPoint::new(2)), vec![])],
            1,
        );
        p.close().unwrap();
        assert_eq!(rule_line(&p.rules[0]), "n1 -> n2 | g' = g;");
    }

    #[test]
    fn conflicting_assignments_are_rejected() {
        let mut p = one_frame(
            &["g"],
            &[],
            vec![rule(
                1,
                Rhs::Step(ControlPoint::new(2)),
                vec![
                    Constraint::assign(PostVar::single("g"), Expr::Const(0)),
                    Constraint::assign(PostVar::single("g"), Expr::Const(1)),
                ],
            )],
            1,
        );
        assert!(matches!(
            p.close(),
            Err(PdsError::ConflictingConstraint { .. })
        ));
    }

    #[test]
    fn stray_assignment_is_rejected() {
        let mut p = one_frame(
            &["g"],
            &[],
            vec![rule(
                1,
                Rhs::Pop,
                vec![Constraint::assign(PostVar::single("zz"), Expr::Const(0))],
            )],
            1,
        );
        assert!(matches!(p.close(), Err(PdsError::UnknownVariable { .. })));
    }

    #[test]
    fn normal_form_audit() {
        assert!(check_normal_form(std::iter::empty()).is_empty());
        let p = one_frame(
            &[],
            &[],
            vec![rule(
                1,
                Rhs::Push(ControlPoint::new(2), ControlPoint::new(3)),
                vec![],
            )],
            1,
        );
        assert!(p.normal_form_violations().is_empty());
        let n = ControlPoint::new;
        let long = [n(2), n(3), n(4)];
        let short = [n(2)];
        let rules = vec![(n(1), &short[..]), (n(5), &long[..])];
        assert_eq!(check_normal_form(rules), vec![1]);
    }
}
