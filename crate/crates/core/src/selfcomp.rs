//! Self-composition of a symbolic pushdown system.
//!
//! The composed system runs the original program, then a renamed copy
//! of it, and parks in a sink at the copy's exit. Three variants differ
//! in how much of the program is duplicated:
//!
//! - ordinary: every frame holds both copies' locals;
//! - compact: each copy's frames hold only that copy's locals;
//! - contracted: only rules reachable in `main` are copied; callees are
//!   shared between the copies.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Expr, ENTRY};
use crate::pds::{
    Constraint, ControlPoint, FrameKey, PdsError, PostVar, Prime, Rhs, SymbolicPds, SymbolicRule,
};
use crate::security::copy_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ordinary,
    Compact,
    Contracted,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Ordinary, Mode::Compact, Mode::Contracted];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ordinary => "ordinary",
            Mode::Compact => "compact",
            Mode::Contracted => "contracted",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ordinary" => Ok(Mode::Ordinary),
            "compact" => Ok(Mode::Compact),
            "contracted" => Ok(Mode::Contracted),
            other => Err(format!(
                "unknown mode `{other}` (expected ordinary, compact or contracted)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ComposeError {
    #[error("renaming `{0}` for the second copy clashes with an existing variable")]
    NameCollision(String),
    #[error("no return from main is reachable from the start point")]
    NoFinalTransition,
    #[error("observed variable `{0}` is not global; only ordinary composition can track it")]
    LowLocalUnderCompact(String),
    #[error("observed variable `{0}` is not a global")]
    NotAGlobal(String),
    #[error("procedure `{procedure}` uses global `{var}`, which is not one of its out-arguments; contracted composition cannot share it")]
    GlobalUsedInCallee { procedure: String, var: String },
    #[error(transparent)]
    Pds(#[from] PdsError),
}

/// A composed system plus the bookkeeping needed to read results back.
#[derive(Debug, Clone)]
pub struct ComposedPds {
    pub pds: SymbolicPds,
    pub mode: Mode,
    /// Globals of the original system, in packing order.
    pub original_globals: Vec<String>,
    /// The rule leaving the first copy's exit for the second copy's entry.
    pub seam: ControlPoint,
    /// The second copy's exit, where the system idles forever.
    pub sink: ControlPoint,
    /// Name in the second copy of every renamed variable.
    pub renaming: BTreeMap<String, String>,
    /// Globals shared by both copies in contracted mode.
    pub rt: Vec<String>,
    /// `(x, xt)` pairs that must agree at the start and at the sink.
    pub observed: Vec<(String, String)>,
}

impl ComposedPds {
    /// Slot index of a composed global.
    pub fn global_index(&self, name: &str) -> Option<usize> {
        self.pds.globals.iter().position(|g| g == name)
    }

    /// Names holding each copy's value of original global `g` at the
    /// sink. In contracted mode the seam swaps shared globals, so the
    /// first copy's result sits in the stash.
    pub fn final_names(&self, g: &str) -> (String, String) {
        if self.rt.iter().any(|r| r == g) {
            (copy_name(g), g.to_string())
        } else {
            (g.to_string(), copy_name(g))
        }
    }
}

/// Index of the rule returning from `main`, found by a breadth-first walk
/// over `main`'s own control points.
pub fn last_transition_finding(pds: &SymbolicPds) -> Result<usize, ComposeError> {
    let mut found = None;
    walk_main(pds, |i, r| {
        if r.rhs == Rhs::Pop && found.is_none() {
            found = Some(i);
        }
        found.is_some()
    });
    found.ok_or(ComposeError::NoFinalTransition)
}

/// Indices of every rule whose lhs is a control point of `main` reachable
/// from the start without entering a callee.
pub fn main_trans(pds: &SymbolicPds) -> Vec<usize> {
    let mut out = Vec::new();
    walk_main(pds, |i, _| {
        out.push(i);
        false
    });
    out
}

/// FIFO walk from the start point. A push continues at its return point;
/// `visit` returning true stops the walk.
fn walk_main(pds: &SymbolicPds, mut visit: impl FnMut(usize, &SymbolicRule) -> bool) {
    let mut queue = VecDeque::from([pds.start]);
    let mut visited = HashSet::new();
    while let Some(cur) = queue.pop_front() {
        if !visited.insert(cur) {
            continue;
        }
        for (i, r) in pds.rules.iter().enumerate().filter(|(_, r)| r.lhs == cur) {
            if visit(i, r) {
                return;
            }
            match r.rhs {
                Rhs::Step(next) | Rhs::Push(_, next) if !visited.contains(&next) => {
                    queue.push_back(next)
                }
                _ => {}
            }
        }
    }
}

pub fn compose(
    pds: &SymbolicPds,
    mode: Mode,
    observed: &[String],
) -> Result<ComposedPds, ComposeError> {
    for o in observed {
        if !pds.globals.contains(o) {
            return Err(match mode {
                Mode::Ordinary => ComposeError::NotAGlobal(o.clone()),
                _ => ComposeError::LowLocalUnderCompact(o.clone()),
            });
        }
    }
    let last = last_transition_finding(pds)?;
    let rt = match mode {
        Mode::Contracted => pds.return_stores.clone(),
        _ => Vec::new(),
    };

    let globals: BTreeSet<&String> = pds.globals.iter().collect();
    let locals: BTreeSet<&String> = pds.frames.values().flatten().collect();
    let mut renaming = BTreeMap::new();
    for g in &pds.globals {
        renaming.insert(g.clone(), copy_name(g));
    }
    if mode != Mode::Contracted {
        for y in &locals {
            renaming.insert((*y).clone(), copy_name(y));
        }
    }
    for new in renaming.values() {
        if globals.contains(new) || locals.contains(new) {
            return Err(ComposeError::NameCollision(new.clone()));
        }
    }

    // Renaming applied to the second copy's constraints. Shared globals
    // keep their names in contracted mode; the seam swaps them with their
    // stash copies.
    let rename = |name: &str| -> Option<String> {
        if rt.iter().any(|r| r == name) {
            return None;
        }
        renaming.get(name).cloned()
    };

    let mut out = SymbolicPds {
        bits: pds.bits,
        globals: pds
            .globals
            .iter()
            .cloned()
            .chain(pds.globals.iter().map(|g| copy_name(g)))
            .collect(),
        frames: Default::default(),
        points: pds.points.clone(),
        rules: Vec::new(),
        start: pds.start,
        final_point: pds.final_point.tag(),
        return_stores: pds.return_stores.clone(),
    };

    match mode {
        Mode::Ordinary => {
            for (key, vars) in &pds.frames {
                let both: Vec<String> = vars
                    .iter()
                    .cloned()
                    .chain(vars.iter().map(|v| copy_name(v)))
                    .collect();
                out.frames.insert(key.clone(), both);
            }
            for key in pds.frames.keys() {
                out.frames.insert(key.tag(), out.frames[key].clone());
            }
        }
        Mode::Compact => {
            out.frames = pds.frames.clone();
            for (key, vars) in &pds.frames {
                out.frames
                    .insert(key.tag(), vars.iter().map(|v| copy_name(v)).collect());
            }
        }
        Mode::Contracted => {
            out.frames = pds.frames.clone();
            let main = FrameKey::new(ENTRY);
            out.frames.insert(
                main.tag(),
                pds.frames.get(&main).cloned().unwrap_or_default(),
            );
        }
    }
    for (p, key) in &pds.points {
        if mode != Mode::Contracted || key.procedure == ENTRY {
            out.points.insert(p.tag(), key.tag());
        }
    }

    let copied: Vec<usize> = match mode {
        Mode::Contracted => {
            check_callees(pds, &rt)?;
            main_trans(pds)
        }
        _ => (0..pds.rules.len()).collect(),
    };

    for (i, r) in pds.rules.iter().enumerate() {
        if i != last {
            out.rules.push(r.clone());
        }
    }
    let t = &pds.rules[last];
    let mut seam_explicit = t.explicit.clone();
    for g in &rt {
        seam_explicit.push(Constraint::assign(
            PostVar::single(g),
            Expr::var(copy_name(g)),
        ));
        seam_explicit.push(Constraint::assign(
            PostVar::single(copy_name(g)),
            Expr::var(g),
        ));
    }
    out.rules.push(SymbolicRule {
        lhs: t.lhs,
        rhs: Rhs::Step(pds.start.tag()),
        constraints: Vec::new(),
        explicit: seam_explicit,
        fresh_top: mode != Mode::Ordinary,
        owner: t.owner.clone(),
        origin: t.origin.clone(),
    });

    for &i in &copied {
        let r = &pds.rules[i];
        let explicit = r.explicit.iter().map(|c| c.rename(&rename)).collect();
        let (rhs, fresh_top) = if i == last {
            (Rhs::Step(t.lhs.tag()), false)
        } else {
            let rhs = match (mode, r.rhs) {
                (Mode::Contracted, Rhs::Push(top, bottom)) => Rhs::Push(top, bottom.tag()),
                (_, rhs) => rhs.map(ControlPoint::tag),
            };
            (rhs, r.fresh_top)
        };
        out.rules.push(SymbolicRule {
            lhs: r.lhs.tag(),
            rhs,
            constraints: Vec::new(),
            explicit,
            fresh_top,
            owner: r.owner.tag(),
            origin: r.origin.clone(),
        });
    }

    out.close()?;
    let mut seen = HashSet::new();
    out.rules
        .retain(|r| seen.insert((r.lhs, r.rhs, r.constraints.clone())));

    Ok(ComposedPds {
        pds: out,
        mode,
        original_globals: pds.globals.clone(),
        seam: t.lhs,
        sink: t.lhs.tag(),
        renaming,
        rt,
        observed: observed.iter().map(|o| (o.clone(), copy_name(o))).collect(),
    })
}

/// Callees run on the shared state in contracted mode, so they may touch
/// no global except the out-arguments they were derived for.
fn check_callees(pds: &SymbolicPds, rt: &[String]) -> Result<(), ComposeError> {
    for r in pds.rules.iter().filter(|r| r.owner.procedure != ENTRY) {
        for c in &r.explicit {
            let mut names = BTreeSet::new();
            match c {
                Constraint::Guard(e) => names.extend(e.vars()),
                Constraint::Assign { target, value } => {
                    if target.prime == Prime::Single {
                        names.insert(target.name.clone());
                    }
                    names.extend(value.vars());
                }
            }
            if let Some(var) = names
                .into_iter()
                .find(|n| pds.globals.contains(n) && !rt.contains(n))
            {
                return Err(ComposeError::GlobalUsedInCallee {
                    procedure: r.owner.procedure.clone(),
                    var,
                });
            }
        }
    }
    Ok(())
}
