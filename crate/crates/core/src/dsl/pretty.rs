use std::fmt;

use crate::world::Action;

use super::{Program, Stmt};

struct Block<'a>(&'a [Action]);

impl fmt::Display for Block<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            [a] => write!(f, "{a}"),
            many => {
                f.write_str("{ ")?;
                for (i, a) in many.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(" }")
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Action(a) => write!(f, "{a}"),
            Stmt::While { cond, body } => write!(f, "while({cond}): {}", Block(body)),
            Stmt::Repeat { count, body } => write!(f, "repeat({count}): {}", Block(body)),
            Stmt::If { cond, then_branch, else_branch } => {
                write!(f, "if({cond}): {}", Block(then_branch))?;
                if let Some(e) = else_branch {
                    write!(f, " else: {}", Block(e))?;
                }
                Ok(())
            }
        }
    }
}

/// Canonical program text, e.g. `repeat(3): move ; end`.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for stmt in self.stmts() {
            write!(f, "{stmt} ; ")?;
        }
        f.write_str("end")
    }
}
