use std::fmt;

use crate::world::{Action, Perception};

use super::{Cond, Program, Stmt};

/// Program tokens. Punctuation that carries no structure (`(`, `)`, `:`,
/// `;`) is dropped; braces delimit multi-action bodies.
///
/// The derived order is the one used for lexicographic tie-breaking in the
/// synthesizer: actions sort before every keyword and before `{`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Action(Action),
    Perception(Perception),
    Not,
    While,
    Repeat,
    If,
    Else,
    Int(u32),
    Open,
    Close,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Action(a) => write!(f, "{a}"),
            Token::Perception(p) => write!(f, "{p}"),
            Token::Not => f.write_str("not"),
            Token::While => f.write_str("while"),
            Token::Repeat => f.write_str("repeat"),
            Token::If => f.write_str("if"),
            Token::Else => f.write_str("else"),
            Token::Int(n) => write!(f, "{n}"),
            Token::Open => f.write_str("{"),
            Token::Close => f.write_str("}"),
            Token::End => f.write_str("end"),
        }
    }
}

pub(crate) fn push_cond(out: &mut Vec<Token>, cond: &Cond) {
    if cond.negated {
        out.push(Token::Not);
    }
    out.push(Token::Perception(cond.perception));
}

pub(crate) fn push_block(out: &mut Vec<Token>, body: &[Action]) {
    if let [a] = body {
        out.push(Token::Action(*a));
    } else {
        out.push(Token::Open);
        out.extend(body.iter().map(|&a| Token::Action(a)));
        out.push(Token::Close);
    }
}

pub(crate) fn push_stmt(out: &mut Vec<Token>, stmt: &Stmt) {
    match stmt {
        Stmt::Action(a) => out.push(Token::Action(*a)),
        Stmt::While { cond, body } => {
            out.push(Token::While);
            push_cond(out, cond);
            push_block(out, body);
        }
        Stmt::Repeat { count, body } => {
            out.push(Token::Repeat);
            out.push(Token::Int(*count));
            push_block(out, body);
        }
        Stmt::If { cond, then_branch, else_branch } => {
            out.push(Token::If);
            push_cond(out, cond);
            push_block(out, then_branch);
            if let Some(e) = else_branch {
                out.push(Token::Else);
                push_block(out, e);
            }
        }
    }
}

/// Deterministic linearization of a program, always ending with `end`.
pub fn token_seq(program: &Program) -> Vec<Token> {
    let mut out = Vec::new();
    for stmt in program.stmts() {
        push_stmt(&mut out, stmt);
    }
    out.push(Token::End);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    #[test]
    fn repeat_tokens() {
        let p = Program::new(vec![Stmt::Repeat { count: 3, body: vec![Move] }]).unwrap();
        assert_eq!(
            token_seq(&p),
            vec![Token::Repeat, Token::Int(3), Token::Action(Move), Token::End]
        );
    }

    #[test]
    fn straight_tokens() {
        let p = Program::straight(&[Move, Move, Move]).unwrap();
        assert_eq!(
            token_seq(&p),
            vec![
                Token::Action(Move),
                Token::Action(Move),
                Token::Action(Move),
                Token::End
            ]
        );
    }

    #[test]
    fn braces_disambiguate_bodies() {
        let inside = Program::new(vec![Stmt::Repeat { count: 2, body: vec![Move, Move] }]).unwrap();
        let after = Program::new(vec![
            Stmt::Repeat { count: 2, body: vec![Move] },
            Stmt::Action(Move),
        ])
        .unwrap();
        assert_ne!(token_seq(&inside), token_seq(&after));
    }

    #[test]
    fn actions_sort_first() {
        for a in Action::BODY {
            assert!(Token::Action(a) < Token::Open);
            assert!(Token::Action(a) < Token::Repeat);
            assert!(Token::Action(a) < Token::While);
        }
        assert!(Token::Perception(Perception::NoMarkersPresent) < Token::Not);
    }
}
