//! Program semantics.
//!
//! Two independent interpreters: [`run_concrete`] executes a program against
//! a [`WorldState`] and records a [`Demonstration`]; [`replay_abstract`]
//! checks a program against a perception matrix and an action sequence
//! without any world at all. The synthesizer only ever uses the latter.
//!
//! Condition timing: a condition evaluated while the next action to emit is
//! the `i`-th reads perception row `i`, the perceptions of the state the agent
//! is in before that action.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Cond, Program, Stmt};
use crate::world::{Action, InvalidAction, PerceptionVector, WorldState};

/// Default step budget for concrete runs (including the final `end`).
pub const DEFAULT_T_MAX: usize = 20;

/// One recorded episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub states: Vec<WorldState>,
    pub actions: Vec<Action>,
    pub perceptions: Vec<PerceptionVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemoError {
    #[error("demonstration is empty")]
    Empty,
    #[error("sequence lengths differ: {states} states, {actions} actions, {perceptions} perception rows")]
    Lengths { states: usize, actions: usize, perceptions: usize },
    #[error("last action is not `end`")]
    NoEnd,
    #[error("`end` at step {0} before the last step")]
    EarlyEnd(usize),
    #[error("step {0} does not follow from the transition function")]
    Transition(usize),
    #[error("perception row {0} does not match its state")]
    Perception(usize),
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn initial(&self) -> &WorldState {
        &self.states[0]
    }

    /// Checks the structural invariants tying states, actions and perceptions together.
    pub fn validate(&self) -> Result<(), DemoError> {
        let t = self.actions.len();
        if t == 0 {
            return Err(DemoError::Empty);
        }
        if self.states.len() != t || self.perceptions.len() != t {
            return Err(DemoError::Lengths {
                states: self.states.len(),
                actions: t,
                perceptions: self.perceptions.len(),
            });
        }
        if self.actions[t - 1] != Action::End {
            return Err(DemoError::NoEnd);
        }
        if let Some(i) = self.actions[..t - 1].iter().position(|&a| a == Action::End) {
            return Err(DemoError::EarlyEnd(i));
        }
        for i in 0..t - 1 {
            if self.states[i].apply(self.actions[i]).as_ref() != Ok(&self.states[i + 1]) {
                return Err(DemoError::Transition(i));
            }
        }
        for (i, (s, p)) in self.states.iter().zip(&self.perceptions).enumerate() {
            if s.perceive() != *p {
                return Err(DemoError::Perception(i));
            }
        }
        Ok(())
    }

    /// The I/O specification carried by this demonstration.
    pub fn spec(&self) -> IoSpec {
        IoSpec {
            perceptions: self.perceptions.clone(),
            actions: self.actions.clone(),
        }
    }
}

/// A perception matrix paired with the action sequence a program must emit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IoSpec {
    pub perceptions: Vec<PerceptionVector>,
    pub actions: Vec<Action>,
}

impl IoSpec {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("invalid action {action} at step {step}: {source}")]
    InvalidAction {
        step: usize,
        action: Action,
        source: InvalidAction,
    },
    #[error("run exceeds the budget of {0} steps")]
    Budget(usize),
}

struct Concrete {
    state: WorldState,
    demo: Demonstration,
    t_max: usize,
}

impl Concrete {
    fn record(&mut self, action: Action) -> Result<(), RunError> {
        let step = self.demo.actions.len();
        if step + 1 > self.t_max {
            return Err(RunError::Budget(self.t_max));
        }
        self.demo.states.push(self.state.clone());
        self.demo.perceptions.push(self.state.perceive());
        self.demo.actions.push(action);
        if action != Action::End {
            self.state = self
                .state
                .apply(action)
                .map_err(|source| RunError::InvalidAction { step, action, source })?;
        }
        Ok(())
    }

    fn holds(&self, cond: &Cond) -> bool {
        cond.eval(&self.state.perceive())
    }

    fn block(&mut self, body: &[Action]) -> Result<(), RunError> {
        body.iter().try_for_each(|&a| self.record(a))
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), RunError> {
        match stmt {
            Stmt::Action(a) => self.record(*a),
            Stmt::While { cond, body } => {
                while self.holds(cond) {
                    self.block(body)?;
                }
                Ok(())
            }
            Stmt::Repeat { count, body } => (0..*count).try_for_each(|_| self.block(body)),
            Stmt::If { cond, then_branch, else_branch } => {
                if self.holds(cond) {
                    self.block(then_branch)
                } else if let Some(e) = else_branch {
                    self.block(e)
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Executes `program` from `initial`, recording at most `t_max` steps.
///
/// Every loop body holds at least one action, so the step budget also bounds
/// non-terminating loops.
pub fn run_concrete(program: &Program, initial: &WorldState, t_max: usize) -> Result<Demonstration, RunError> {
    let mut run = Concrete {
        state: initial.clone(),
        demo: Demonstration {
            states: Vec::new(),
            actions: Vec::new(),
            perceptions: Vec::new(),
        },
        t_max,
    };
    for stmt in program.stmts() {
        run.stmt(stmt)?;
    }
    run.record(Action::End)?;
    Ok(run.demo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayStatus {
    Match,
    Mismatch,
    Overrun,
    LoopBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    pub status: ReplayStatus,
    /// Actions emitted up to and including the first disagreement.
    pub emitted: Vec<Action>,
}

struct Abstract<'a> {
    perceptions: &'a [PerceptionVector],
    target: &'a [Action],
    cursor: usize,
    emitted: Vec<Action>,
}

impl Abstract<'_> {
    fn emit(&mut self, action: Action) -> Result<(), ReplayStatus> {
        let expected = *self.target.get(self.cursor).ok_or(ReplayStatus::Overrun)?;
        self.emitted.push(action);
        if expected != action {
            return Err(ReplayStatus::Mismatch);
        }
        self.cursor += 1;
        Ok(())
    }

    fn holds(&self, cond: &Cond) -> Result<bool, ReplayStatus> {
        let row = self.perceptions.get(self.cursor).ok_or(ReplayStatus::Overrun)?;
        Ok(cond.eval(row))
    }

    fn block(&mut self, body: &[Action]) -> Result<(), ReplayStatus> {
        body.iter().try_for_each(|&a| self.emit(a))
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), ReplayStatus> {
        match stmt {
            Stmt::Action(a) => self.emit(*a),
            Stmt::While { cond, body } => {
                let mut iterations = 0;
                while self.holds(cond)? {
                    iterations += 1;
                    if iterations > self.target.len() {
                        return Err(ReplayStatus::LoopBound);
                    }
                    self.block(body)?;
                }
                Ok(())
            }
            Stmt::Repeat { count, body } => (0..*count).try_for_each(|_| self.block(body)),
            Stmt::If { cond, then_branch, else_branch } => {
                if self.holds(cond)? {
                    self.block(then_branch)
                } else if let Some(e) = else_branch {
                    self.block(e)
                } else {
                    Ok(())
                }
            }
        }
    }

    fn run(&mut self, program: &Program) -> Result<(), ReplayStatus> {
        for stmt in program.stmts() {
            self.stmt(stmt)?;
        }
        self.emit(Action::End)?;
        if self.cursor != self.target.len() {
            return Err(ReplayStatus::Mismatch);
        }
        Ok(())
    }
}

/// Replays `program` against a perception matrix and a target action sequence.
pub fn replay_abstract(program: &Program, perceptions: &[PerceptionVector], target: &[Action]) -> ReplayOutcome {
    let mut replay = Abstract {
        perceptions,
        target,
        cursor: 0,
        emitted: Vec::with_capacity(target.len()),
    };
    let status = match replay.run(program) {
        Ok(()) => ReplayStatus::Match,
        Err(status) => status,
    };
    ReplayOutcome { status, emitted: replay.emitted }
}

/// True iff `program` reproduces `spec` exactly.
pub fn satisfies(program: &Program, spec: &IoSpec) -> bool {
    replay_abstract(program, &spec.perceptions, &spec.actions).status == ReplayStatus::Match
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::world::Heading;
    use Action::*;

    fn corridor(len: usize) -> WorldState {
        WorldState::open(len, 1, (0, 0), Heading::East).unwrap()
    }

    #[test]
    fn while_walks_corridor() {
        let p = parse("while(frontIsClear): move ; end").unwrap();
        let demo = run_concrete(&p, &corridor(4), DEFAULT_T_MAX).unwrap();
        assert_eq!(demo.actions, vec![Move, Move, Move, End]);
        assert_eq!(demo.len(), 4);
        demo.validate().unwrap();
        let front: Vec<bool> = demo.perceptions.iter().map(|r| r[0]).collect();
        assert_eq!(front, vec![true, true, true, false]);
        let out = replay_abstract(&p, &demo.perceptions, &demo.actions);
        assert_eq!(out.status, ReplayStatus::Match);
        assert_eq!(out.emitted, demo.actions);
    }

    #[test]
    fn single_move() {
        let p = parse("move ; end").unwrap();
        let demo = run_concrete(&p, &corridor(3), DEFAULT_T_MAX).unwrap();
        assert_eq!(demo.actions, vec![Move, End]);
    }

    #[test]
    fn spinning_loop_hits_budget() {
        let p = parse("while(frontIsClear): turnLeft ; end").unwrap();
        let open = WorldState::open(8, 8, (3, 3), Heading::East).unwrap();
        assert_eq!(run_concrete(&p, &open, DEFAULT_T_MAX), Err(RunError::Budget(DEFAULT_T_MAX)));
    }

    #[test]
    fn invalid_action_reported() {
        let p = parse("move ; end").unwrap();
        let err = run_concrete(&p, &corridor(1), DEFAULT_T_MAX).unwrap_err();
        assert!(matches!(err, RunError::InvalidAction { step: 0, action: Move, .. }));
    }

    #[test]
    fn exact_budget_is_allowed() {
        let p = parse("move ; end").unwrap();
        assert!(run_concrete(&p, &corridor(3), 2).is_ok());
        assert_eq!(run_concrete(&p, &corridor(3), 1), Err(RunError::Budget(1)));
    }

    #[test]
    fn replay_mismatch_and_overrun() {
        let rows = vec![[true; 5]; 2];
        let two = parse("move ; move ; end").unwrap();
        let out = replay_abstract(&two, &rows, &[Move, End]);
        assert_eq!(out.status, ReplayStatus::Mismatch);
        assert_eq!(out.emitted, vec![Move, Move]);
        let three = parse("move ; move ; move ; end").unwrap();
        assert_eq!(replay_abstract(&three, &rows, &[Move, Move]).status, ReplayStatus::Overrun);
    }

    #[test]
    fn replay_too_short_program() {
        let rows = vec![[true; 5]; 3];
        let p = parse("move ; end").unwrap();
        assert_eq!(replay_abstract(&p, &rows, &[Move, Move, End]).status, ReplayStatus::Mismatch);
        // A stray `end` in the middle of a noisy target cannot be matched.
        assert_eq!(replay_abstract(&p, &rows, &[Move, End, End]).status, ReplayStatus::Mismatch);
    }

    #[test]
    fn replay_condition_overrun() {
        // Condition read past the last perception row.
        let p = parse("move ; while(frontIsClear): move ; end").unwrap();
        assert_eq!(replay_abstract(&p, &[[true; 5]], &[Move]).status, ReplayStatus::Overrun);
    }

    #[test]
    fn satisfies_wrapper() {
        let p = parse("while(frontIsClear): move ; end").unwrap();
        let demo = run_concrete(&p, &corridor(3), DEFAULT_T_MAX).unwrap();
        let mut spec = demo.spec();
        assert!(satisfies(&p, &spec));
        spec.actions[1] = TurnLeft;
        assert!(!satisfies(&p, &spec));
        let empty = IoSpec { perceptions: vec![[false; 5]], actions: vec![End] };
        assert!(satisfies(&Program::empty(), &empty));
    }

    #[test]
    fn demo_validation() {
        let p = parse("move ; move ; end").unwrap();
        let demo = run_concrete(&p, &corridor(4), DEFAULT_T_MAX).unwrap();
        demo.validate().unwrap();
        let mut bad = demo.clone();
        bad.actions[1] = TurnLeft;
        assert_eq!(bad.validate(), Err(DemoError::Transition(1)));
        let mut bad = demo.clone();
        bad.perceptions[0][3] = true;
        assert_eq!(bad.validate(), Err(DemoError::Perception(0)));
        let mut bad = demo.clone();
        bad.actions[2] = Move;
        assert_eq!(bad.validate(), Err(DemoError::NoEnd));
        let mut bad = demo;
        bad.actions[0] = End;
        assert_eq!(bad.validate(), Err(DemoError::EarlyEnd(0)));
    }

    #[test]
    fn demo_json_shape() {
        let p = parse("move ; end").unwrap();
        let demo = run_concrete(&p, &corridor(2), DEFAULT_T_MAX).unwrap();
        let v = serde_json::to_value(&demo).unwrap();
        assert_eq!(v["actions"], serde_json::json!(["move", "end"]));
        assert_eq!(v["perceptions"][0], serde_json::json!([true, false, false, false, true]));
        assert_eq!(v["states"].as_array().unwrap().len(), 2);
        let back: Demonstration = serde_json::from_value(v).unwrap();
        assert_eq!(back, demo);
    }
}
