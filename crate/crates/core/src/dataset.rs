//! Task generation: random ground-truth programs, random initial states and
//! the demonstrations they induce.
//!
//! Every task owns a generator stream seeded with `base_seed + index`, so a
//! corpus is the same whether it is produced serially or in parallel.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Cond, Program, Stmt, REPEAT_MIN};
use crate::semantics::{run_concrete, Demonstration, DemoError, DEFAULT_T_MAX};
use crate::world::{Action, Heading, WorldState, GRID_SIDE};

/// Generator stream used throughout the crate.
pub type TaskRng = ChaCha8Rng;

pub fn task_rng(seed: u64) -> TaskRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub grid: usize,
    /// Observed demonstrations per task.
    pub observed: usize,
    /// Held-out demonstrations per task.
    pub unseen: usize,
    pub t_max: usize,
    pub wall_density: f64,
    pub marker_density: f64,
    /// Largest marker count placed in a cell by the initial-state sampler.
    pub max_initial_markers: u8,
    /// Relative weight of each cost level; index = number of branching statements.
    pub cost_weights: Vec<f64>,
    pub max_action_tokens: usize,
    /// Continuation probability of geometric block lengths.
    pub block_continue: f64,
    /// Longest body of a sampled control-flow statement.
    pub max_body_len: usize,
    /// Probability that a `repeat` is added to a sampled program.
    pub repeat_prob: f64,
    pub max_repeat_count: u32,
    /// Require every branching statement to go both ways across the observed demos.
    pub diversity: bool,
    /// Program draws before giving up on a task.
    pub max_attempts: usize,
    /// Initial states tried per program draw.
    pub states_per_program: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            grid: GRID_SIDE,
            observed: 10,
            unseen: 5,
            t_max: DEFAULT_T_MAX,
            wall_density: 0.1,
            marker_density: 0.15,
            max_initial_markers: 3,
            cost_weights: vec![1.0, 1.0, 1.0],
            max_action_tokens: 8,
            block_continue: 0.5,
            max_body_len: 3,
            repeat_prob: 0.1,
            max_repeat_count: 4,
            diversity: true,
            max_attempts: 10_000,
            states_per_program: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("no valid task found after {0} attempts")]
    GenerationExhausted(usize),
    #[error("invalid generator configuration: {0}")]
    Config(String),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if self.grid == 0 {
            return bad("grid must be positive");
        }
        if self.observed == 0 {
            return bad("need at least one observed demonstration");
        }
        if self.cost_weights.is_empty() || self.cost_weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return bad("cost weights must be non-negative");
        }
        if self.cost_weights.iter().sum::<f64>() <= 0.0 {
            return bad("cost weights sum to zero");
        }
        if !(0.0..1.0).contains(&self.block_continue) {
            return bad("block_continue must be in [0, 1)");
        }
        if self.max_action_tokens == 0 || self.max_body_len == 0 {
            return bad("block bounds must be positive");
        }
        if !(0.0..=1.0).contains(&self.wall_density) || !(0.0..=1.0).contains(&self.marker_density) {
            return bad("densities must be in [0, 1]");
        }
        if self.max_repeat_count < REPEAT_MIN {
            return bad("max_repeat_count below the minimum repeat count");
        }
        Ok(())
    }

    pub fn max_cost(&self) -> usize {
        self.cost_weights.len() - 1
    }
}

/// One supervised instance: a ground truth and its demonstrations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub seed: u64,
    pub program: Program,
    pub observed: Vec<Demonstration>,
    pub unseen: Vec<Demonstration>,
}

impl Task {
    pub fn validate(&self) -> Result<(), DemoError> {
        self.observed.iter().chain(&self.unseen).try_for_each(Demonstration::validate)
    }
}

/// `1 + Geometric(continue)` capped at `max`.
fn geometric(rng: &mut impl Rng, p_continue: f64, min: usize, max: usize) -> usize {
    let mut n = min;
    while n < max && rng.random_bool(p_continue) {
        n += 1;
    }
    n
}

fn random_actions(rng: &mut impl Rng, len: usize) -> Vec<Action> {
    (0..len)
        .map(|_| Action::BODY[rng.random_range(0..Action::BODY.len())])
        .collect()
}

fn random_cond(rng: &mut impl Rng) -> Cond {
    let all: Vec<Cond> = Cond::all().collect();
    all[rng.random_range(0..all.len())]
}

/// Draws a program with exactly `cost` branching statements.
pub fn sample_program_with_cost(config: &GenConfig, cost: usize, rng: &mut impl Rng) -> Program {
    loop {
        let mut body = Vec::new();
        if cost == 0 {
            let len = geometric(rng, config.block_continue, 1, config.max_action_tokens);
            body.extend(random_actions(rng, len).into_iter().map(Stmt::Action));
        } else {
            let block = |rng: &mut _| {
                let len = geometric(rng, config.block_continue, 0, config.max_action_tokens);
                random_actions(rng, len).into_iter().map(Stmt::Action)
            };
            body.extend(block(rng));
            for _ in 0..cost {
                let body_len = |rng: &mut _| geometric(rng, config.block_continue, 1, config.max_body_len);
                let cond = random_cond(rng);
                let stmt = match rng.random_range(0..3) {
                    0 => {
                        let len = body_len(rng);
                        Stmt::While { cond, body: random_actions(rng, len) }
                    }
                    1 => {
                        let then_len = body_len(rng);
                        let else_len = body_len(rng);
                        Stmt::If {
                            cond,
                            then_branch: random_actions(rng, then_len),
                            else_branch: Some(random_actions(rng, else_len)),
                        }
                    }
                    _ => {
                        let len = body_len(rng);
                        Stmt::If { cond, then_branch: random_actions(rng, len), else_branch: None }
                    }
                };
                body.push(stmt);
                body.extend(block(rng));
            }
        }
        if rng.random_bool(config.repeat_prob) {
            let count = rng.random_range(REPEAT_MIN..=config.max_repeat_count);
            let len = rng.random_range(1..=2);
            let at = rng.random_range(0..=body.len());
            body.insert(at, Stmt::Repeat { count, body: random_actions(rng, len) });
        }
        let program = Program::new(body).expect("sampler emits well-formed programs");
        if program.action_tokens() <= config.max_action_tokens && program.action_tokens() > 0 {
            return program;
        }
    }
}

/// Draws a cost level from the configured weights, then a program of that cost.
pub fn sample_program(config: &GenConfig, rng: &mut impl Rng) -> Program {
    let cost = draw_cost(config, rng);
    sample_program_with_cost(config, cost, rng)
}

fn draw_cost(config: &GenConfig, rng: &mut impl Rng) -> usize {
    WeightedIndex::new(&config.cost_weights)
        .expect("validated weights")
        .sample(rng)
}

/// Uniform random world: interior walls and markers at the configured
/// densities, agent on a uniformly chosen free cell with a uniform heading.
pub fn random_state(config: &GenConfig, rng: &mut impl Rng) -> WorldState {
    let side = config.grid;
    loop {
        let walls: Vec<bool> = (0..side * side).map(|_| rng.random_bool(config.wall_density)).collect();
        let free: Vec<usize> = (0..side * side).filter(|&i| !walls[i]).collect();
        let markers: Vec<u8> = walls
            .iter()
            .map(|&w| {
                if !w && rng.random_bool(config.marker_density) {
                    rng.random_range(1..=config.max_initial_markers.max(1))
                } else {
                    0
                }
            })
            .collect();
        if free.is_empty() {
            continue;
        }
        let cell = free[rng.random_range(0..free.len())];
        let heading = Heading::ALL[rng.random_range(0..4)];
        return WorldState::new(side, side, walls, markers, (cell / side, cell % side), heading)
            .expect("sampled state satisfies invariants");
    }
}

/// Per branching statement (in program order): whether its condition held
/// and whether it failed on entry. A loop counts as taken when its first
/// check succeeds.
pub fn branch_coverage(program: &Program, demo: &Demonstration) -> Vec<(bool, bool)> {
    let mut cover = Vec::new();
    let mut cursor = 0;
    for stmt in program.stmts() {
        match stmt {
            Stmt::Action(_) => cursor += 1,
            Stmt::Repeat { count, body } => cursor += *count as usize * body.len(),
            Stmt::While { cond, body } => {
                let entered = cond.eval(&demo.perceptions[cursor]);
                cover.push((entered, !entered));
                while cursor < demo.len() && cond.eval(&demo.perceptions[cursor]) {
                    cursor += body.len();
                }
            }
            Stmt::If { cond, then_branch, else_branch } => {
                if cond.eval(&demo.perceptions[cursor]) {
                    cover.push((true, false));
                    cursor += then_branch.len();
                } else {
                    cover.push((false, true));
                    cursor += else_branch.as_ref().map_or(0, Vec::len);
                }
            }
        }
    }
    cover
}

fn diverse(program: &Program, demos: &[Demonstration]) -> bool {
    let mut total = vec![(false, false); program.cost()];
    for demo in demos {
        for (acc, (t, f)) in total.iter_mut().zip(branch_coverage(program, demo)) {
            acc.0 |= t;
            acc.1 |= f;
        }
    }
    total.iter().all(|&(t, f)| t && f)
}

/// Rejection-samples a task: program, distinct initial states, valid runs,
/// and (optionally) branch diversity across the observed demonstrations.
pub fn generate_task(config: &GenConfig, seed: u64) -> Result<Task, GenError> {
    config.validate()?;
    let mut rng = task_rng(seed);
    let cost = draw_cost(config, &mut rng);
    let need = config.observed + config.unseen;
    for _ in 0..config.max_attempts {
        let program = sample_program_with_cost(config, cost, &mut rng);
        let mut seen = HashSet::new();
        let mut demos = Vec::with_capacity(need);
        for _ in 0..config.states_per_program {
            if demos.len() == need {
                break;
            }
            let state = random_state(config, &mut rng);
            if !seen.insert(state.clone()) {
                continue;
            }
            if let Ok(demo) = run_concrete(&program, &state, config.t_max) {
                demos.push(demo);
            }
        }
        if demos.len() < need {
            continue;
        }
        let unseen = demos.split_off(config.observed);
        if config.diversity && !diverse(&program, &demos) {
            continue;
        }
        return Ok(Task { seed, program, observed: demos, unseen });
    }
    Err(GenError::GenerationExhausted(config.max_attempts))
}

/// Generates `n` tasks with seeds `base_seed..base_seed + n`.
pub fn generate_corpus(config: &GenConfig, n: usize, base_seed: u64) -> Result<Vec<Task>, GenError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_task(config, base_seed + i))
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    use anyhow::Context;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("{}:{}", path.display(), i + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn cost_zero_draw_is_straight_line() {
        let cfg = GenConfig { repeat_prob: 0.0, ..GenConfig::default() };
        let mut rng = task_rng(1);
        for _ in 0..200 {
            let p = sample_program_with_cost(&cfg, 0, &mut rng);
            assert_eq!(p.cost(), 0);
            assert!((1..=8).contains(&p.stmts().len()));
            assert!(p.stmts().iter().all(|s| matches!(s, Stmt::Action(_))));
        }
    }

    #[test]
    fn sampled_cost_is_bounded() {
        let cfg = GenConfig::default();
        let mut rng = task_rng(2);
        for _ in 0..10_000 {
            let p = sample_program(&cfg, &mut rng);
            assert!(p.cost() <= 2);
            assert!(p.action_tokens() <= cfg.max_action_tokens);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let cfg = GenConfig::default();
        let a: Vec<_> = (0..20).map(|_| 0).scan(task_rng(9), |r, _| Some(sample_program(&cfg, r))).collect();
        let b: Vec<_> = (0..20).map(|_| 0).scan(task_rng(9), |r, _| Some(sample_program(&cfg, r))).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn generated_task_is_valid() {
        let cfg = GenConfig::default();
        for seed in 0..20 {
            let task = generate_task(&cfg, seed).unwrap();
            assert_eq!(task.observed.len(), 10);
            assert_eq!(task.unseen.len(), 5);
            task.validate().unwrap();
            for demo in task.observed.iter().chain(&task.unseen) {
                assert_eq!(run_concrete(&task.program, demo.initial(), cfg.t_max).unwrap(), *demo);
            }
            let initial: HashSet<_> = task.observed.iter().chain(&task.unseen).map(|d| d.initial().clone()).collect();
            assert_eq!(initial.len(), 15);
            assert!(diverse(&task.program, &task.observed));
        }
    }

    #[test]
    fn coverage_of_while() {
        let p = parse("while(frontIsClear): move ; end").unwrap();
        let corridor = WorldState::open(3, 1, (0, 0), Heading::East).unwrap();
        let demo = run_concrete(&p, &corridor, 20).unwrap();
        assert_eq!(branch_coverage(&p, &demo), vec![(true, false)]);
        let blocked = WorldState::open(3, 1, (0, 2), Heading::East).unwrap();
        let demo = run_concrete(&p, &blocked, 20).unwrap();
        assert_eq!(branch_coverage(&p, &demo), vec![(false, true)]);
    }

    #[test]
    fn exhausted_budget() {
        // A 1x1 grid has only 16 distinct states, fewer than the 25 demos asked for.
        let cfg = GenConfig {
            grid: 1,
            observed: 20,
            max_attempts: 5,
            states_per_program: 50,
            ..GenConfig::default()
        };
        assert_eq!(generate_task(&cfg, 0), Err(GenError::GenerationExhausted(5)));
    }

    #[test]
    fn corpus_is_order_independent() {
        let cfg = GenConfig::default();
        let par = generate_corpus(&cfg, 8, 100).unwrap();
        let serial: Vec<_> = (100..108).map(|s| generate_task(&cfg, s).unwrap()).collect();
        assert_eq!(par, serial);
    }
}
