//! Recursive-descent parser for the program text format.
//!
//! ```text
//! program := (stmt ';')* 'end'
//! stmt    := action
//!          | 'while' '(' cond ')' ':' block
//!          | 'repeat' '(' INT ')' ':' block
//!          | 'if' '(' cond ')' ':' block ('else' ':' block)?
//! block   := action | '{' action (';' action)* '}'
//! cond    := 'not'* perception ('(' ')')?
//! ```

use thiserror::Error;

use crate::world::{Action, Perception};

use super::{Cond, Program, Stmt, StructureError, REPEAT_MAX, REPEAT_MIN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("structure error at byte {pos}: {err}")]
    Structure { pos: usize, err: StructureError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme {
    Word(String),
    Int(u32),
    Punct(char),
    Eof,
}

impl std::fmt::Display for Lexeme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lexeme::Word(w) => write!(f, "`{w}`"),
            Lexeme::Int(n) => write!(f, "`{n}`"),
            Lexeme::Punct(c) => write!(f, "`{c}`"),
            Lexeme::Eof => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Lexeme)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Lexeme::Word(text[start..i].to_string())));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i].parse().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: "integer literal too large".into(),
            })?;
            out.push((start, Lexeme::Int(n)));
        } else if "():;{}".contains(c) {
            out.push((i, Lexeme::Punct(c)));
            i += 1;
        } else {
            return Err(ParseError::Syntax {
                pos: i,
                msg: format!("unexpected character `{}`", text[i..].chars().next().unwrap_or(c)),
            });
        }
    }
    out.push((text.len(), Lexeme::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Lexeme)>,
    at: usize,
}

fn is_control(word: &str) -> bool {
    matches!(word, "while" | "repeat" | "if")
}

impl Parser {
    fn peek(&self) -> &Lexeme {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Lexeme {
        let l = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        l
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Lexeme::Punct(c) {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected `{c}`, found {}", self.peek()))
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut body = Vec::new();
        loop {
            if *self.peek() == Lexeme::Word("end".into()) {
                self.bump();
                break;
            }
            body.push(self.stmt()?);
            self.expect(';')?;
        }
        if *self.peek() != Lexeme::Eof {
            return self.syntax(format!("trailing input after `end`: {}", self.peek()));
        }
        Ok(Program { body })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let pos = self.pos();
        let word = match self.peek() {
            Lexeme::Word(w) => w.clone(),
            other => return self.syntax(format!("expected a statement, found {other}")),
        };
        match word.as_str() {
            "while" => {
                self.bump();
                let cond = self.paren_cond()?;
                self.expect(':')?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            "repeat" => {
                self.bump();
                self.expect('(')?;
                let count = match self.bump() {
                    Lexeme::Int(n) => n,
                    other => {
                        return Err(ParseError::Syntax {
                            pos: self.toks[self.at - 1].0,
                            msg: format!("expected a repeat count, found {other}"),
                        })
                    }
                };
                if !(REPEAT_MIN..=REPEAT_MAX).contains(&count) {
                    return Err(ParseError::Structure { pos, err: StructureError::RepeatCount(count) });
                }
                self.expect(')')?;
                self.expect(':')?;
                let body = self.block()?;
                Ok(Stmt::Repeat { count, body })
            }
            "if" => {
                self.bump();
                let cond = self.paren_cond()?;
                self.expect(':')?;
                let then_branch = self.block()?;
                let else_branch = if *self.peek() == Lexeme::Word("else".into()) {
                    self.bump();
                    self.expect(':')?;
                    Some(self.block()?)
                } else {
                    None
                };
                Ok(Stmt::If { cond, then_branch, else_branch })
            }
            _ => Ok(Stmt::Action(self.action()?)),
        }
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Lexeme::Word(w) if is_control(&w) => {
                Err(ParseError::Structure { pos, err: StructureError::Nested })
            }
            Lexeme::Word(w) if w == "end" => {
                Err(ParseError::Structure { pos, err: StructureError::EndInBody })
            }
            Lexeme::Word(w) => match w.parse::<Action>() {
                Ok(a) => {
                    self.bump();
                    Ok(a)
                }
                Err(e) => self.syntax(e.to_string()),
            },
            other => self.syntax(format!("expected an action, found {other}")),
        }
    }

    fn block(&mut self) -> Result<Vec<Action>, ParseError> {
        if *self.peek() != Lexeme::Punct('{') {
            return Ok(vec![self.action()?]);
        }
        self.bump();
        let mut body = vec![self.action()?];
        while *self.peek() == Lexeme::Punct(';') {
            self.bump();
            body.push(self.action()?);
        }
        self.expect('}')?;
        Ok(body)
    }

    fn paren_cond(&mut self) -> Result<Cond, ParseError> {
        self.expect('(')?;
        let mut negated = false;
        while *self.peek() == Lexeme::Word("not".into()) {
            self.bump();
            negated = !negated;
        }
        let perception = match self.peek().clone() {
            Lexeme::Word(w) => match w.parse::<Perception>() {
                Ok(p) => {
                    self.bump();
                    p
                }
                Err(e) => return self.syntax(e),
            },
            other => return self.syntax(format!("expected a perception, found {other}")),
        };
        // Tolerate `frontIsClear()` call syntax.
        if *self.peek() == Lexeme::Punct('(') && self.toks[self.at + 1].1 == Lexeme::Punct(')') {
            self.bump();
            self.bump();
        }
        self.expect(')')?;
        Ok(Cond { perception, negated })
    }
}

/// Parses program text.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let program = Parser { toks, at: 0 }.program()?;
    program
        .validate()
        .map_err(|err| ParseError::Structure { pos: 0, err })?;
    Ok(program)
}
