//! Test-only oracles: an exhaustive program enumerator over a small universe,
//! an independent abstract executor, and an independent ranking.

#![allow(dead_code)]

use plans::dsl::{token_seq, Cond, Program, Stmt, Token};
use plans::semantics::{satisfies, IoSpec};
use plans::synth::SynthBounds;
use plans::world::{Action, Perception, PerceptionVector};
use rand::Rng;

/// Actions available in the small universe.
pub const ACTIONS: [Action; 2] = [Action::Move, Action::TurnLeft];
/// Perceptions conditions may test in the small universe.
pub const PERCEPTIONS: [Perception; 2] = [Perception::FrontIsClear, Perception::MarkersPresent];
/// Longest body in the small universe.
pub const BLOCK: usize = 2;
/// Longest demonstration (actions including `end`).
pub const T_MAX: usize = 5;

pub fn small_bounds() -> SynthBounds {
    SynthBounds {
        max_n: 1,
        max_block_len: BLOCK,
        perceptions: PERCEPTIONS.to_vec(),
        ..SynthBounds::default()
    }
}

pub fn literals() -> Vec<Cond> {
    PERCEPTIONS
        .iter()
        .flat_map(|&p| [Cond::pos(p), Cond::neg(p)])
        .collect()
}

/// Every non-empty action list over `actions` up to length `max`.
pub fn bodies(actions: &[Action], max: usize) -> Vec<Vec<Action>> {
    let mut out: Vec<Vec<Action>> = Vec::new();
    let mut layer: Vec<Vec<Action>> = vec![Vec::new()];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|b| {
                actions.iter().map(move |&a| {
                    let mut b = b.clone();
                    b.push(a);
                    b
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Statements that always emit, with the number of actions they emit.
fn emitting(actions: &[Action], max_emit: usize) -> Vec<(Stmt, usize)> {
    let mut out: Vec<(Stmt, usize)> = actions.iter().map(|&a| (Stmt::Action(a), 1)).collect();
    for body in bodies(actions, BLOCK) {
        for count in 2..=max_emit as u32 {
            let emits = count as usize * body.len();
            if emits <= max_emit {
                out.push((Stmt::Repeat { count, body: body.clone() }, emits));
            }
        }
    }
    out
}

/// Every sequence of emitting statements that emits at most `budget` actions.
fn straight(actions: &[Action], budget: usize) -> Vec<Vec<Stmt>> {
    let items = emitting(actions, budget);
    let mut out = vec![Vec::new()];
    let mut frontier = vec![(Vec::new(), 0usize)];
    while let Some((seq, used)) = frontier.pop() {
        for (stmt, e) in &items {
            if used + e <= budget {
                let mut next: Vec<Stmt> = seq.clone();
                next.push(stmt.clone());
                out.push(next.clone());
                frontier.push((next, used + e));
            }
        }
    }
    out
}

fn branching(actions: &[Action]) -> Vec<Stmt> {
    let bs = bodies(actions, BLOCK);
    let mut out = Vec::new();
    for cond in literals() {
        for b in &bs {
            out.push(Stmt::While { cond, body: b.clone() });
            out.push(Stmt::If { cond, then_branch: b.clone(), else_branch: None });
            for e in &bs {
                out.push(Stmt::If { cond, then_branch: b.clone(), else_branch: Some(e.clone()) });
            }
        }
    }
    out
}

/// All programs of the small universe with exactly `n` (0 or 1) branching
/// statements that can satisfy a demonstration of at most `T_MAX` steps.
pub fn enumerate(n: usize) -> Vec<Program> {
    assert!(n <= 1);
    let seqs = straight(&ACTIONS, T_MAX - 1);
    if n == 0 {
        return seqs.into_iter().map(|s| Program::new(s).unwrap()).collect();
    }
    let branches = branching(&ACTIONS);
    let mut out = Vec::new();
    for seq in &seqs {
        for at in 0..=seq.len() {
            for b in &branches {
                let mut body = seq.clone();
                body.insert(at, b.clone());
                out.push(Program::new(body).unwrap());
            }
        }
    }
    out
}

/// Straight-line programs over every body action emitting at most `budget` actions.
pub fn enumerate_straight_full(budget: usize) -> Vec<Program> {
    straight(&Action::BODY, budget)
        .into_iter()
        .map(|s| Program::new(s).unwrap())
        .collect()
}

/// Runs `program` over a perception matrix, independent of the crate's
/// interpreters. Returns the emitted actions including `end`, or `None` when
/// the run reads past the matrix or emits more than `limit` actions.
pub fn emit(program: &Program, rows: &[PerceptionVector], limit: usize) -> Option<Vec<Action>> {
    let mut out: Vec<Action> = Vec::new();
    let row = |out: &Vec<Action>| rows.get(out.len()).copied();
    let push = |out: &mut Vec<Action>, a: Action| {
        out.push(a);
        out.len() <= limit
    };
    for stmt in program.stmts() {
        match stmt {
            Stmt::Action(a) => {
                if !push(&mut out, *a) {
                    return None;
                }
            }
            Stmt::Repeat { count, body } => {
                for _ in 0..*count {
                    for &a in body {
                        if !push(&mut out, a) {
                            return None;
                        }
                    }
                }
            }
            Stmt::While { cond, body } => {
                while cond.eval(&row(&out)?) {
                    for &a in body {
                        if !push(&mut out, a) {
                            return None;
                        }
                    }
                }
            }
            Stmt::If { cond, then_branch, else_branch } => {
                let branch = if cond.eval(&row(&out)?) { Some(then_branch) } else { else_branch.as_ref() };
                for &a in branch.into_iter().flatten() {
                    if !push(&mut out, a) {
                        return None;
                    }
                }
            }
        }
    }
    if !push(&mut out, Action::End) {
        return None;
    }
    Some(out)
}

pub fn random_row(rng: &mut impl Rng) -> PerceptionVector {
    std::array::from_fn(|_| rng.random_bool(0.5))
}

/// A spec produced by running `program` on random perceptions, if the run fits.
pub fn spec_from(program: &Program, rng: &mut impl Rng) -> Option<IoSpec> {
    let rows: Vec<PerceptionVector> = (0..T_MAX).map(|_| random_row(rng)).collect();
    let actions = emit(program, &rows, T_MAX)?;
    Some(IoSpec { perceptions: rows[..actions.len()].to_vec(), actions })
}

/// A spec with random actions over the small universe and random perceptions.
pub fn random_spec(rng: &mut impl Rng) -> IoSpec {
    let t = rng.random_range(1..=T_MAX);
    let mut actions: Vec<Action> = (0..t - 1).map(|_| ACTIONS[rng.random_range(0..ACTIONS.len())]).collect();
    actions.push(Action::End);
    IoSpec { perceptions: (0..t).map(|_| random_row(rng)).collect(), actions }
}

/// For each branching statement: whether some spec took its first branch
/// (then, or the loop body) and whether some spec took the second (else).
fn branch_use(program: &Program, specs: &[IoSpec]) -> Vec<(bool, bool)> {
    let mut used = vec![(false, false); program.stmts().len()];
    for spec in specs {
        let mut cursor = 0;
        for (i, stmt) in program.stmts().iter().enumerate() {
            match stmt {
                Stmt::Action(_) => cursor += 1,
                Stmt::Repeat { count, body } => cursor += *count as usize * body.len(),
                Stmt::While { cond, body } => {
                    while cond.eval(&spec.perceptions[cursor]) {
                        used[i].0 = true;
                        cursor += body.len();
                    }
                }
                Stmt::If { cond, then_branch, else_branch } => {
                    if cond.eval(&spec.perceptions[cursor]) {
                        used[i].0 = true;
                        cursor += then_branch.len();
                    } else {
                        used[i].1 = true;
                        cursor += else_branch.as_ref().map_or(0, Vec::len);
                    }
                }
            }
        }
    }
    used
}

/// True when every `if`/`else` has both branches taken by some spec.
pub fn no_dead_else(program: &Program, specs: &[IoSpec]) -> bool {
    program
        .stmts()
        .iter()
        .zip(branch_use(program, specs))
        .all(|(s, (t, e))| !matches!(s, Stmt::If { else_branch: Some(_), .. }) || (t && e))
}

/// Preference key: branching kinds, unrolled action tokens outside `while`
/// bodies, then the token sequence. Smaller is better.
pub fn rank(program: &Program) -> (Vec<u8>, usize, Vec<Token>) {
    let mut kinds = Vec::new();
    let mut outside = 0;
    for stmt in program.stmts() {
        match stmt {
            Stmt::Action(_) => outside += 1,
            Stmt::Repeat { count, body } => outside += *count as usize * body.len(),
            Stmt::While { .. } => kinds.push(0),
            Stmt::If { then_branch, else_branch: Some(e), .. } => {
                kinds.push(1);
                outside += then_branch.len() + e.len();
            }
            Stmt::If { then_branch, else_branch: None, .. } => {
                kinds.push(2);
                outside += then_branch.len();
            }
        }
    }
    (kinds, outside, token_seq(program))
}

/// Brute-force answer: the best program in `universe` satisfying all specs.
pub fn best<'a>(universe: &'a [Program], specs: &[IoSpec]) -> Option<&'a Program> {
    universe
        .iter()
        .filter(|p| specs.iter().all(|s| satisfies(p, s)))
        .filter(|p| no_dead_else(p, specs))
        .min_by_key(|p| rank(p))
}

pub fn any_satisfies(universe: &[Program], specs: &[IoSpec]) -> bool {
    universe.iter().any(|p| specs.iter().all(|s| satisfies(p, s)))
}
