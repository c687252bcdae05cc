//! Bounded search for a program with an exact number of branching statements.
//!
//! Programs are built left to right while every specification is replayed
//! alongside, so the state of a partial program is just the vector of replay
//! cursors plus the number of branching statements still to place. The best
//! completion of a state does not depend on how the state was reached, which
//! makes the search a memoized dynamic program over cursor vectors.
//!
//! Straight-line actions are never enumerated: an action can only be placed
//! when every specification expects it next. Loop and branch bodies are read
//! off the first specification that enters them. A body no specification
//! enters is unconstrained and is filled with the smallest action.
//!
//! Candidates are ranked by
//! 1. the kinds of the branching statements in program order, `while` before
//!    `if`/`else` before a bare `if`;
//! 2. the number of action tokens outside `while` bodies, with `repeat`
//!    counted unrolled;
//! 3. the token sequence, lexicographically.
//!
//! `repeat` is not part of the search. Replacing a `repeat` by its unrolling
//! keeps cost, kinds and rank 2 and yields a smaller token sequence, since
//! actions order before the `repeat` keyword; the optimum never contains one.
//!
//! An `if`/`else` is only built when some specification takes each branch.
//! One with a dead branch behaves like a bare `if` (on the negated literal
//! when only the else branch is taken) of the same cost on every
//! specification, and its dead branch could only be filled arbitrarily.

use std::collections::HashMap;
use std::rc::Rc;

use crate::dsl::token::push_stmt;
use crate::dsl::{Cond, Program, Stmt, Token};
use crate::semantics::IoSpec;
use crate::world::Action;

use super::{SynthBounds, SynthError};

/// Branching statement kinds in preference order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    While,
    IfElse,
    If,
}

/// Best completion from some search state.
#[derive(Debug, Clone)]
struct Suffix {
    stmts: Vec<Stmt>,
    kinds: Vec<Kind>,
    outside: usize,
    tokens: Vec<Token>,
}

impl Suffix {
    fn end() -> Self {
        Suffix { stmts: Vec::new(), kinds: Vec::new(), outside: 0, tokens: vec![Token::End] }
    }

    fn prepend(stmt: Stmt, rest: &Suffix) -> Self {
        let mut tokens = Vec::with_capacity(rest.tokens.len() + 4);
        push_stmt(&mut tokens, &stmt);
        tokens.extend_from_slice(&rest.tokens);
        let mut kinds = Vec::with_capacity(rest.kinds.len() + 1);
        let outside = match &stmt {
            Stmt::Action(_) => 1,
            Stmt::While { .. } => {
                kinds.push(Kind::While);
                0
            }
            Stmt::If { then_branch, else_branch: Some(e), .. } => {
                kinds.push(Kind::IfElse);
                then_branch.len() + e.len()
            }
            Stmt::If { then_branch, else_branch: None, .. } => {
                kinds.push(Kind::If);
                then_branch.len()
            }
            Stmt::Repeat { .. } => unreachable!("repeat is never searched"),
        };
        kinds.extend_from_slice(&rest.kinds);
        let mut stmts = Vec::with_capacity(rest.stmts.len() + 1);
        stmts.push(stmt);
        stmts.extend_from_slice(&rest.stmts);
        Suffix { stmts, kinds, outside: outside + rest.outside, tokens }
    }

    fn better_than(&self, other: &Suffix) -> bool {
        (&self.kinds, self.outside, &self.tokens) < (&other.kinds, other.outside, &other.tokens)
    }
}

type Cursors = Box<[u16]>;

struct Search<'a> {
    specs: &'a [IoSpec],
    conds: Vec<Cond>,
    max_block: usize,
    budget: u64,
    nodes: u64,
    memo: HashMap<(Cursors, usize), Option<Rc<Suffix>>>,
}

/// Result of running one candidate body over every entering specification.
struct Branch {
    body: Vec<Action>,
    /// Cursor after the body for each specification that takes the branch.
    next: Vec<u16>,
}

impl<'a> Search<'a> {
    fn tick(&mut self) -> Result<(), SynthError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(SynthError::BoundsExceeded { nodes: self.nodes });
        }
        Ok(())
    }

    fn len(&self, spec: usize) -> usize {
        self.specs[spec].actions.len()
    }

    fn target(&self, spec: usize, cursor: u16) -> Option<Action> {
        self.specs[spec].actions.get(cursor as usize).copied()
    }

    /// Condition value for every spec, or `None` if some cursor has no perception row.
    fn read(&self, cond: &Cond, cursors: &[u16]) -> Option<Vec<bool>> {
        cursors
            .iter()
            .zip(self.specs)
            .map(|(&c, s)| s.perceptions.get(c as usize).map(|row| cond.eval(row)))
            .collect()
    }

    /// Longest body (up to `max_block`) that spec `spec` would emit from `cursor`.
    fn body_from(&self, spec: usize, cursor: u16) -> Vec<Action> {
        self.specs[spec].actions[cursor as usize..]
            .iter()
            .take(self.max_block)
            .take_while(|&&a| a != Action::End)
            .copied()
            .collect()
    }

    fn matches_block(&self, spec: usize, cursor: u16, body: &[Action]) -> bool {
        let start = cursor as usize;
        self.specs[spec]
            .actions
            .get(start..start + body.len())
            .is_some_and(|slice| slice == body)
    }

    /// Candidate bodies for a branch taken by `takers`: prefixes of the first
    /// taker's upcoming actions that every other taker agrees with, or the
    /// smallest action when nobody takes the branch.
    fn branches(&mut self, takers: &[usize], cursors: &[u16]) -> Result<Vec<Branch>, SynthError> {
        let Some(&first) = takers.first() else {
            return Ok(vec![Branch { body: vec![Action::BODY[0]], next: Vec::new() }]);
        };
        let longest = self.body_from(first, cursors[first]);
        let mut out = Vec::new();
        for len in 1..=longest.len() {
            self.tick()?;
            let body = &longest[..len];
            if takers.iter().all(|&s| self.matches_block(s, cursors[s], body)) {
                let next = takers.iter().map(|&s| cursors[s] + len as u16).collect();
                out.push(Branch { body: body.to_vec(), next });
            }
        }
        Ok(out)
    }

    fn run_while(&self, cond: &Cond, body: &[Action], spec: usize, cursor: u16) -> Option<u16> {
        let s = &self.specs[spec];
        let t = s.actions.len();
        let mut c = cursor as usize;
        let mut iterations = 0;
        while cond.eval(s.perceptions.get(c)?) {
            iterations += 1;
            if iterations > t {
                return None;
            }
            if s.actions.get(c..c + body.len())? != body {
                return None;
            }
            c += body.len();
        }
        Some(c as u16)
    }

    fn consider(&mut self, best: &mut Option<Suffix>, stmt: Stmt, next: &[u16], remaining: usize) -> Result<(), SynthError> {
        if let Some(rest) = self.best(next, remaining)? {
            let cand = Suffix::prepend(stmt, &rest);
            if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                *best = Some(cand);
            }
        }
        Ok(())
    }

    fn try_while(&mut self, cond: Cond, cursors: &[u16], remaining: usize, best: &mut Option<Suffix>) -> Result<(), SynthError> {
        let Some(values) = self.read(&cond, cursors) else {
            return Ok(());
        };
        let bodies = match values.iter().position(|&v| v) {
            Some(first) => {
                let longest = self.body_from(first, cursors[first]);
                (1..=longest.len()).map(|l| longest[..l].to_vec()).collect()
            }
            None => vec![vec![Action::BODY[0]]],
        };
        for body in bodies {
            self.tick()?;
            let next: Option<Vec<u16>> = (0..self.specs.len())
                .map(|s| self.run_while(&cond, &body, s, cursors[s]))
                .collect();
            if let Some(next) = next {
                self.consider(best, Stmt::While { cond, body }, &next, remaining - 1)?;
            }
        }
        Ok(())
    }

    fn try_if(&mut self, cond: Cond, cursors: &[u16], remaining: usize, best: &mut Option<Suffix>) -> Result<(), SynthError> {
        let Some(values) = self.read(&cond, cursors) else {
            return Ok(());
        };
        let (takers, others): (Vec<usize>, Vec<usize>) = (0..self.specs.len()).partition(|&s| values[s]);
        let thens = self.branches(&takers, cursors)?;
        let elses = if takers.is_empty() || others.is_empty() {
            Vec::new()
        } else {
            self.branches(&others, cursors)?
        };
        for then in &thens {
            let mut next = cursors.to_vec();
            for (&s, &c) in takers.iter().zip(&then.next) {
                next[s] = c;
            }
            self.tick()?;
            let stmt = Stmt::If { cond, then_branch: then.body.clone(), else_branch: None };
            self.consider(best, stmt, &next, remaining - 1)?;
            for els in &elses {
                self.tick()?;
                for (&s, &c) in others.iter().zip(&els.next) {
                    next[s] = c;
                }
                let stmt = Stmt::If {
                    cond,
                    then_branch: then.body.clone(),
                    else_branch: Some(els.body.clone()),
                };
                self.consider(best, stmt, &next, remaining - 1)?;
            }
        }
        Ok(())
    }

    fn best(&mut self, cursors: &[u16], remaining: usize) -> Result<Option<Rc<Suffix>>, SynthError> {
        let key = (Cursors::from(cursors), remaining);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let mut best: Option<Suffix> = None;

        let all_at_end = (0..self.specs.len())
            .all(|s| self.target(s, cursors[s]) == Some(Action::End) && cursors[s] as usize + 1 == self.len(s));
        if remaining == 0 && all_at_end {
            best = Some(Suffix::end());
        }

        let first = self.target(0, cursors[0]);
        if let Some(a) = first.filter(|&a| a != Action::End) {
            if (1..self.specs.len()).all(|s| self.target(s, cursors[s]) == Some(a)) {
                self.tick()?;
                let next: Vec<u16> = cursors.iter().map(|c| c + 1).collect();
                self.consider(&mut best, Stmt::Action(a), &next, remaining)?;
            }
        }

        if remaining > 0 {
            for cond in self.conds.clone() {
                self.try_while(cond, cursors, remaining, &mut best)?;
                self.try_if(cond, cursors, remaining, &mut best)?;
            }
        }

        let best = best.map(Rc::new);
        self.memo.insert(key, best.clone());
        Ok(best)
    }
}

pub(crate) fn search(specs: &[IoSpec], n: usize, bounds: &SynthBounds) -> Result<Option<Program>, SynthError> {
    if specs.is_empty() {
        return Err(SynthError::NoSpecs);
    }
    if specs.iter().any(|s| s.actions.len() >= u16::MAX as usize) {
        return Err(SynthError::SpecTooLong);
    }
    let mut search = Search {
        specs,
        conds: Cond::all().filter(|c| bounds.perceptions.contains(&c.perception)).collect(),
        max_block: bounds.max_block_len,
        budget: bounds.node_budget,
        nodes: 0,
        memo: HashMap::new(),
    };
    let start = vec![0u16; specs.len()];
    let found = search.best(&start, n)?;
    Ok(found.map(|s| Program::new(s.stmts.clone()).expect("search emits well-formed programs")))
}
