//! The policy language: a flat sequence of actions and single-level control
//! flow, terminated by an implicit `end`.
//!
//! Control-flow bodies hold actions only, so nesting is ruled out by the type
//! of the AST itself. Sequences are flat vectors, which keeps the "no `Seq`
//! directly inside a `Seq`" invariant for free.

mod parse;
mod pretty;
pub(crate) mod token;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::world::{Action, Perception, PerceptionVector};

pub use parse::{parse, ParseError};
pub use token::{token_seq, Token};

/// Smallest allowed repeat count.
pub const REPEAT_MIN: u32 = 2;
/// Default largest allowed repeat count.
pub const REPEAT_MAX: u32 = 10;

/// A perception literal: a primitive, possibly negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cond {
    pub perception: Perception,
    pub negated: bool,
}

impl Cond {
    pub fn new(perception: Perception, negated: bool) -> Self {
        Cond { perception, negated }
    }

    pub fn pos(perception: Perception) -> Self {
        Cond::new(perception, false)
    }

    pub fn neg(perception: Perception) -> Self {
        Cond::new(perception, true)
    }

    /// All ten literals, positive ones first.
    pub fn all() -> impl Iterator<Item = Cond> {
        [false, true]
            .into_iter()
            .flat_map(|negated| Perception::ALL.into_iter().map(move |p| Cond::new(p, negated)))
    }

    pub fn eval(&self, perceptions: &PerceptionVector) -> bool {
        perceptions[self.perception.index()] != self.negated
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not {}", self.perception)
        } else {
            write!(f, "{}", self.perception)
        }
    }
}

/// A top-level statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Action(Action),
    While {
        cond: Cond,
        body: Vec<Action>,
    },
    Repeat {
        count: u32,
        body: Vec<Action>,
    },
    If {
        cond: Cond,
        then_branch: Vec<Action>,
        else_branch: Option<Vec<Action>>,
    },
}

impl Stmt {
    /// True for the constructs counted by [`Program::cost`].
    pub fn is_branching(&self) -> bool {
        matches!(self, Stmt::While { .. } | Stmt::If { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("control flow may not be nested")]
    Nested,
    #[error("repeat count {0} outside [{REPEAT_MIN}, {max}]", max = REPEAT_MAX)]
    RepeatCount(u32),
    #[error("control-flow body is empty")]
    EmptyBody,
    #[error("`end` may only terminate the program")]
    EndInBody,
}

/// A policy program. The trailing `end` is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    body: Vec<Stmt>,
}

impl Program {
    pub fn new(body: Vec<Stmt>) -> Result<Self, StructureError> {
        let p = Program { body };
        p.validate()?;
        Ok(p)
    }

    /// The program `end`.
    pub fn empty() -> Self {
        Program::default()
    }

    /// Straight-line program from a list of actions.
    pub fn straight(actions: &[Action]) -> Result<Self, StructureError> {
        Program::new(actions.iter().map(|&a| Stmt::Action(a)).collect())
    }

    pub fn stmts(&self) -> &[Stmt] {
        &self.body
    }

    pub fn into_stmts(self) -> Vec<Stmt> {
        self.body
    }

    fn validate(&self) -> Result<(), StructureError> {
        fn block(actions: &[Action]) -> Result<(), StructureError> {
            if actions.is_empty() {
                return Err(StructureError::EmptyBody);
            }
            if actions.contains(&Action::End) {
                return Err(StructureError::EndInBody);
            }
            Ok(())
        }
        for stmt in &self.body {
            match stmt {
                Stmt::Action(Action::End) => return Err(StructureError::EndInBody),
                Stmt::Action(_) => {}
                Stmt::While { body, .. } => block(body)?,
                Stmt::Repeat { count, body } => {
                    if !(REPEAT_MIN..=REPEAT_MAX).contains(count) {
                        return Err(StructureError::RepeatCount(*count));
                    }
                    block(body)?
                }
                Stmt::If { then_branch, else_branch, .. } => {
                    block(then_branch)?;
                    if let Some(e) = else_branch {
                        block(e)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of branching statements (`while` and `if`).
    pub fn cost(&self) -> usize {
        self.body.iter().filter(|s| s.is_branching()).count()
    }

    /// Unrolls every `repeat`. No other rewriting takes place.
    pub fn canonicalize(&self) -> Program {
        let mut body = Vec::with_capacity(self.body.len());
        for stmt in &self.body {
            match stmt {
                Stmt::Repeat { count, body: inner } => {
                    for _ in 0..*count {
                        body.extend(inner.iter().map(|&a| Stmt::Action(a)));
                    }
                }
                other => body.push(other.clone()),
            }
        }
        Program { body }
    }

    /// Number of action tokens in the program text.
    pub fn action_tokens(&self) -> usize {
        self.body
            .iter()
            .map(|s| match s {
                Stmt::Action(_) => 1,
                Stmt::While { body, .. } | Stmt::Repeat { body, .. } => body.len(),
                Stmt::If { then_branch, else_branch, .. } => {
                    then_branch.len() + else_branch.as_ref().map_or(0, Vec::len)
                }
            })
            .sum()
    }

    pub fn tokens(&self) -> Vec<Token> {
        token_seq(self)
    }
}

/// Programs travel as their canonical text.
impl Serialize for Program {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;
    use Perception::*;

    fn wh(p: Perception, body: &[Action]) -> Stmt {
        Stmt::While { cond: Cond::pos(p), body: body.to_vec() }
    }

    #[test]
    fn cost_counts_branching_only() {
        let seq = Program::straight(&[Move, Move]).unwrap();
        assert_eq!(seq.cost(), 0);
        let w = Program::new(vec![wh(FrontIsClear, &[Move])]).unwrap();
        assert_eq!(w.cost(), 1);
        let two = Program::new(vec![
            Stmt::If {
                cond: Cond::pos(FrontIsClear),
                then_branch: vec![Move],
                else_branch: Some(vec![TurnLeft]),
            },
            wh(LeftIsClear, &[Move]),
        ])
        .unwrap();
        assert_eq!(two.cost(), 2);
        let rep = Program::new(vec![Stmt::Repeat { count: 3, body: vec![Move] }]).unwrap();
        assert_eq!(rep.cost(), 0);
    }

    #[test]
    fn canonicalize_unrolls_repeat() {
        let rep = Program::new(vec![Stmt::Repeat { count: 3, body: vec![Move] }]).unwrap();
        assert_eq!(rep.canonicalize(), Program::straight(&[Move, Move, Move]).unwrap());
    }

    #[test]
    fn canonicalize_keeps_if_else() {
        let p = Program::new(vec![Stmt::If {
            cond: Cond::pos(FrontIsClear),
            then_branch: vec![Move],
            else_branch: Some(vec![TurnLeft]),
        }])
        .unwrap();
        assert_eq!(p.canonicalize(), p);
        let s = Program::straight(&[Move]).unwrap();
        assert_eq!(s.canonicalize(), s);
    }

    #[test]
    fn structure_errors() {
        assert_eq!(
            Program::new(vec![Stmt::Repeat { count: 1, body: vec![Move] }]),
            Err(StructureError::RepeatCount(1))
        );
        assert_eq!(
            Program::new(vec![Stmt::Repeat { count: 11, body: vec![Move] }]),
            Err(StructureError::RepeatCount(11))
        );
        assert_eq!(Program::new(vec![wh(FrontIsClear, &[])]), Err(StructureError::EmptyBody));
        assert_eq!(Program::straight(&[Move, End]), Err(StructureError::EndInBody));
    }

    #[test]
    fn cond_eval() {
        let v = [true, false, true, false, true];
        assert!(Cond::pos(FrontIsClear).eval(&v));
        assert!(Cond::neg(LeftIsClear).eval(&v));
        assert!(!Cond::neg(NoMarkersPresent).eval(&v));
        assert_eq!(Cond::all().count(), 10);
    }
}
