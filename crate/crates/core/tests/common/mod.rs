#![allow(dead_code)]

pub mod random_pds;

use std::path::PathBuf;

use nilflow::corpus::{corpus_files, sidecar_path, Sidecar};
use nilflow::derive::derive;
use nilflow::interp::{run, Valuation};
use nilflow::pds::{pds_exec, CompiledPds, Configuration, Halted};
use nilflow::{parse_program, Domain, Program};
use proptest::prelude::*;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../golden")
}

pub struct Member {
    pub name: String,
    pub program: Program,
    pub sidecar: Sidecar,
}

pub fn corpus() -> Vec<Member> {
    corpus_files(&corpus_dir())
        .unwrap()
        .into_iter()
        .map(|path| {
            let text = std::fs::read_to_string(&path).unwrap();
            let side = sidecar_path(&path);
            let sidecar = Sidecar::parse(&std::fs::read_to_string(&side).unwrap(), &side).unwrap();
            Member {
                name: path.file_stem().unwrap().to_string_lossy().into_owned(),
                program: parse_program(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display())),
                sidecar,
            }
        })
        .collect()
}

pub fn member(name: &str) -> Member {
    corpus().into_iter().find(|m| m.name == name).unwrap()
}

/// Every assignment of N-bit values to the program's globals.
pub fn valuations(program: &Program, bits: u32) -> Vec<Valuation> {
    let names = program.global_names();
    let n = names.len() as u32;
    let mask = (1u64 << bits) - 1;
    (0..1u64 << (bits * n))
        .map(|code| {
            names
                .iter()
                .enumerate()
                .map(|(i, g)| (g.clone(), (code >> (bits * i as u32)) & mask))
                .collect()
        })
        .collect()
}

/// Final globals of the interpreter, `None` on divergence.
pub fn interpret(program: &Program, bits: u32, inputs: &Valuation, fuel: u64) -> Option<Vec<u64>> {
    let r = run(program, Domain::new(bits).unwrap(), inputs, fuel).unwrap();
    r.final_store()
        .map(|s| s.globals().into_iter().map(|(_, v)| v).collect())
}

/// Final globals of executing the derived pushdown system, `None` when
/// it does not empty its stack within `fuel` steps.
pub fn execute(compiled: &CompiledPds, start: Configuration, fuel: u64) -> Option<Vec<u64>> {
    match pds_exec(compiled, start, fuel) {
        Ok(out) if out.halted == Halted::Empty => {
            Some(compiled.unpack(out.config.globals, compiled.n_globals()))
        }
        Ok(out) => panic!("execution halted with {:?} at {:?}", out.halted, out.config),
        Err(nilflow::pds::PdsError::Diverged(_)) => None,
        Err(e) => panic!("{e}"),
    }
}

pub fn pds_final(program: &Program, bits: u32, inputs: &Valuation, fuel: u64) -> Option<Vec<u64>> {
    let pds = derive(program, bits).unwrap();
    let compiled = CompiledPds::new(&pds).unwrap();
    let values: Vec<u64> = pds.globals.iter().map(|g| inputs[g]).collect();
    let start = Configuration {
        globals: compiled.pack(&values),
        stack: vec![compiled.symbol(pds.start, 0).unwrap()],
    };
    execute(&compiled, start, fuel)
}

// Random programs over `low l, m; high h;` with one callee. Loops are
// bounded by a counter the body cannot touch, and the callee never
// recurses, so every program terminates. The callee only touches its own
// parameters and locals.

fn expr(vars: Vec<String>, depth: u32) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        (0u64..2).prop_map(|c| c.to_string()),
        proptest::sample::select(vars),
    ];
    leaf.prop_recursive(depth, 8, 2, |inner| {
        (
            inner.clone(),
            proptest::sample::select(vec!["+", "-", "*", "<", ">", "==", "!=", "&&", "||"]),
            inner,
        )
            .prop_map(|(a, op, b)| format!("({a} {op} {b})"))
    })
    .boxed()
}

fn stmt(
    read: Vec<String>,
    write: Vec<String>,
    depth: u32,
    fresh: u32,
    in_main: bool,
) -> BoxedStrategy<String> {
    let assign = (
        proptest::sample::select(write.clone()),
        expr(read.clone(), 2),
    )
        .prop_map(|(x, e)| format!("{x} := {e};"));
    let call = (
        expr(read.clone(), 1),
        proptest::sample::select(vec!["l", "m", "h"]),
    )
        .prop_map(|(e, g)| format!("f({e}, {g});"));
    let mut options: Vec<BoxedStrategy<String>> = vec![
        Just("skip;".to_string()).boxed(),
        assign.clone().boxed(),
        assign.boxed(),
    ];
    if in_main {
        options.push(call.boxed());
    }
    if depth == 0 {
        return proptest::strategy::Union::new(options).boxed();
    }
    let var = format!("v{fresh}");
    let mut inner_read = read.clone();
    inner_read.push(var.clone());
    let mut inner_write = write.clone();
    inner_write.push(var.clone());
    let body = |r: Vec<String>, w: Vec<String>| {
        proptest::collection::vec(stmt(r, w, depth - 1, fresh + 1, in_main), 1..3)
            .prop_map(|v| v.join(" "))
    };
    let cond = expr(read.clone(), 1);
    options.push(
        (
            cond,
            body(read.clone(), write.clone()),
            body(read.clone(), write.clone()),
        )
            .prop_map(|(c, a, b)| format!("if ({c}) {{ {a} }} else {{ {b} }}"))
            .boxed(),
    );
    options.push(
        (expr(read.clone(), 1), body(inner_read.clone(), inner_write))
            .prop_map(move |(e, s)| format!("letvar {var} := {e} in {{ {s} }}"))
            .boxed(),
    );
    let counter = format!("i{fresh}");
    let init = expr(read.clone(), 1);
    let mut loop_read = read;
    loop_read.push(counter.clone());
    options.push(
        (init, body(loop_read, write))
            .prop_map(move |(e, s)| {
                format!("letvar {counter} := {e} in {{ while ({counter} > 0) {{ {counter} := {counter} - 1; {s} }} }}")
            })
            .boxed(),
    );
    proptest::strategy::Union::new(options).boxed()
}

pub fn program() -> impl Strategy<Value = String> {
    let globals: Vec<String> = ["l", "m", "h"].iter().map(|s| s.to_string()).collect();
    let params: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    let callee = proptest::collection::vec(stmt(params.clone(), params, 1, 0, false), 1..3);
    let main = proptest::collection::vec(stmt(globals.clone(), globals, 2, 10, true), 1..4);
    (callee, main).prop_map(|(f, m)| {
        format!(
            "low l, m; high h;\nproc f(in a, out b) {{ {} }}\nproc main() {{ {} }}\n",
            f.join(" "),
            m.join(" ")
        )
    })
}
