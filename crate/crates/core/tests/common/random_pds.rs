//! Random layered pushdown systems and an explicit breadth-first search
//! over their configurations.

use std::collections::{BTreeSet, VecDeque};

use nilflow::pds::{Configuration, ExplicitPds, GroundRhs, GroundRule, Successors, Symbol};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const POINTS: u32 = 7;
pub const MAX_STACK: usize = 6;
pub const MAX_STEPS: usize = 10_000;

/// Rules only replace the top point by larger points, so every run
/// terminates; pushes start from the three lowest points only, which
/// keeps stacks short.
pub fn random_system(rng: &mut ChaCha8Rng) -> ExplicitPds {
    let sym = |rng: &mut ChaCha8Rng, above: u32| Symbol {
        point: rng.gen_range(above + 1..POINTS),
        locals: rng.gen_range(0..2),
    };
    let mut rules = Vec::new();
    for point in 0..POINTS - 1 {
        for locals in 0..2 {
            for from in 0..2 {
                for _ in 0..rng.gen_range(1..4) {
                    let rhs = match rng.gen_range(0..3) {
                        0 => GroundRhs::Pop,
                        1 => GroundRhs::Step(sym(rng, point)),
                        _ if point < 3 => GroundRhs::Push(sym(rng, point), sym(rng, point)),
                        _ => GroundRhs::Step(sym(rng, point)),
                    };
                    rules.push(GroundRule {
                        rule: rules.len(),
                        from,
                        lhs: Symbol { point, locals },
                        to: rng.gen_range(0..2),
                        rhs,
                    });
                }
            }
        }
    }
    ExplicitPds::from_rules(rules)
}

pub fn bfs(sys: &ExplicitPds, initial: &[Configuration]) -> BTreeSet<(u64, Vec<Symbol>)> {
    let mut seen: BTreeSet<(u64, Vec<Symbol>)> = BTreeSet::new();
    let mut queue: VecDeque<Configuration> = initial.iter().cloned().collect();
    let mut buf = Vec::new();
    let mut steps = 0;
    while let Some(c) = queue.pop_front() {
        if !seen.insert((c.globals, c.stack.clone())) {
            continue;
        }
        assert!(
            c.stack.len() <= MAX_STACK,
            "stack grew to {}",
            c.stack.len()
        );
        let Some(&top) = c.stack.first() else {
            continue;
        };
        buf.clear();
        sys.successors(c.globals, top, &mut buf);
        for r in &buf {
            steps += 1;
            queue.push_back(r.apply(&c).unwrap());
        }
    }
    assert!(steps <= MAX_STEPS);
    seen
}
