//! Synthesis from confidence-scored specifications.
//!
//! [`synthesize_min_cost`] raises the number of allowed branching statements
//! until the bounded search succeeds. The two filtering strategies wrap it:
//! [`synthesize_static`] drops every specification whose confidence levels
//! fall below fixed thresholds, [`synthesize_dynamic`] only applies the action
//! threshold and then retries on shrinking sets of the specifications with the
//! highest perception confidence.

mod search;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Program, REPEAT_MAX};
use crate::noise::NoisySpec;
use crate::semantics::{satisfies, IoSpec};
use crate::world::Perception;

/// Default action confidence threshold.
pub const DEFAULT_EPS_ACTION: f64 = 0.98;
/// Default perception confidence threshold.
pub const DEFAULT_EPS_PERCEPTION: f64 = 0.9;
/// Default fractions of specifications kept by dynamic filtering.
pub const DEFAULT_PROP_SCHEDULE: [f64; 11] = [1.0, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];

/// Minimum token confidences of one specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceLevels {
    pub action_conf: f64,
    pub per_conf: f64,
}

/// Minimum action token confidence, and minimum perception token confidence
/// taken across both timesteps and primitives.
pub fn confidence_levels(spec: &NoisySpec) -> ConfidenceLevels {
    let action_conf = spec.actions.iter().map(|t| t.confidence).fold(1.0, f64::min);
    let per_conf = spec
        .perceptions
        .iter()
        .flatten()
        .map(|t| t.confidence)
        .fold(1.0, f64::min);
    ConfidenceLevels { action_conf, per_conf }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub eps_action: f64,
    pub eps_perception: f64,
    pub prop_schedule: Vec<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            eps_action: DEFAULT_EPS_ACTION,
            eps_perception: DEFAULT_EPS_PERCEPTION,
            prop_schedule: DEFAULT_PROP_SCHEDULE.to_vec(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, eps) in [("eps_action", self.eps_action), ("eps_perception", self.eps_perception)] {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad(format!("{name} = {eps} is outside (0, 1]"));
            }
        }
        match self.prop_schedule.first() {
            Some(1.0) => {}
            _ => return bad("schedule must start at 1".into()),
        }
        if self.prop_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("schedule must be strictly decreasing".into());
        }
        if self.prop_schedule.iter().any(|&p| p <= 0.0) {
            return bad("schedule entries must be positive".into());
        }
        Ok(())
    }
}

/// Limits of the program space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthBounds {
    /// Largest number of branching statements tried.
    pub max_n: usize,
    /// Largest repeat count in the program space. Synthesized programs never
    /// contain `repeat` (see the search module); the bound matters to oracles
    /// that enumerate the space.
    pub r_max: u32,
    /// Longest body of a control-flow statement.
    pub max_block_len: usize,
    /// Partial candidates a single bounded search may expand.
    pub node_budget: u64,
    /// Perception primitives conditions may test.
    pub perceptions: Vec<Perception>,
}

impl Default for SynthBounds {
    fn default() -> Self {
        SynthBounds {
            max_n: 2,
            r_max: REPEAT_MAX,
            max_block_len: 8,
            node_budget: 100_000_000,
            perceptions: Perception::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("search budget exhausted after {nodes} partial candidates")]
    BoundsExceeded { nodes: u64 },
    #[error("no specifications to synthesize from")]
    NoSpecs,
    #[error("specification too long for the search")]
    SpecTooLong,
    #[error("invalid synthesis configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    None,
    Static,
    Dynamic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::None, Mode::Static, Mode::Dynamic];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Static => "static",
            Mode::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected none, static or dynamic)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Found {
        program: Program,
        n_used: usize,
        /// Input positions of the specifications the program was fitted to.
        specs_used: Vec<usize>,
    },
    Unsat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub outcome: Outcome,
    pub solver_calls: usize,
    pub wall_time: Duration,
    /// Duration of the slowest bounded search.
    pub longest_call: Duration,
}

impl SynthesisResult {
    fn unsat() -> Self {
        SynthesisResult {
            outcome: Outcome::Unsat,
            solver_calls: 0,
            wall_time: Duration::ZERO,
            longest_call: Duration::ZERO,
        }
    }

    pub fn program(&self) -> Option<&Program> {
        match &self.outcome {
            Outcome::Found { program, .. } => Some(program),
            Outcome::Unsat => None,
        }
    }
}

/// Searches for a program with exactly `n` branching statements satisfying
/// every spec. `Ok(None)` means no such program exists within `bounds`.
pub fn synthesize_at_bound(specs: &[IoSpec], n: usize, bounds: &SynthBounds) -> Result<Option<Program>, SynthError> {
    let found = search::search(specs, n, bounds)?;
    if let Some(p) = &found {
        debug_assert_eq!(p.cost(), n);
        debug_assert!(specs.iter().all(|s| satisfies(p, s)), "unsound result {p}");
    }
    Ok(found)
}

/// Tries `n = 0, 1, ..., max_n` and returns the first program found.
pub fn synthesize_min_cost(specs: &[IoSpec], bounds: &SynthBounds) -> Result<SynthesisResult, SynthError> {
    synthesize_subset(specs, &(0..specs.len()).collect::<Vec<_>>(), bounds)
}

/// Minimal-cost synthesis restricted to `specs[subset]`.
fn synthesize_subset(specs: &[IoSpec], subset: &[usize], bounds: &SynthBounds) -> Result<SynthesisResult, SynthError> {
    if subset.is_empty() {
        return Ok(SynthesisResult::unsat());
    }
    let chosen: Vec<IoSpec> = subset.iter().map(|&i| specs[i].clone()).collect();
    let start = Instant::now();
    let mut result = SynthesisResult::unsat();
    for n in 0..=bounds.max_n {
        let call = Instant::now();
        let found = synthesize_at_bound(&chosen, n, bounds)?;
        result.solver_calls += 1;
        result.longest_call = result.longest_call.max(call.elapsed());
        if let Some(program) = found {
            let mut specs_used = subset.to_vec();
            specs_used.sort_unstable();
            result.outcome = Outcome::Found { program, n_used: n, specs_used };
            break;
        }
    }
    result.wall_time = start.elapsed();
    Ok(result)
}

fn indices_passing(specs: &[NoisySpec], keep: impl Fn(&ConfidenceLevels) -> bool) -> Vec<usize> {
    specs
        .iter()
        .enumerate()
        .filter(|(_, s)| keep(&confidence_levels(s)))
        .map(|(i, _)| i)
        .collect()
}

/// Keeps the specs whose action and perception confidence levels both reach
/// their thresholds, in input order.
pub fn static_filter(specs: &[NoisySpec], config: &FilterConfig) -> Vec<NoisySpec> {
    static_filter_indices(specs, config)
        .into_iter()
        .map(|i| specs[i].clone())
        .collect()
}

fn static_filter_indices(specs: &[NoisySpec], config: &FilterConfig) -> Vec<usize> {
    indices_passing(specs, |c| c.action_conf >= config.eps_action && c.per_conf >= config.eps_perception)
}

fn values(specs: &[NoisySpec]) -> Vec<IoSpec> {
    specs.iter().map(NoisySpec::values).collect()
}

/// Static filtering followed by minimal-cost synthesis.
pub fn synthesize_static(specs: &[NoisySpec], config: &FilterConfig, bounds: &SynthBounds) -> Result<SynthesisResult, SynthError> {
    let kept = static_filter_indices(specs, config);
    synthesize_subset(&values(specs), &kept, bounds)
}

/// `ceil(prop * k)`, clamped to `1..=k`. A small tolerance absorbs products
/// such as `0.7 * 10 = 7.000000000000001`.
pub fn subset_size(prop: f64, k: usize) -> usize {
    let u = (prop * k as f64 - 1e-9).ceil();
    (u.max(1.0) as usize).min(k)
}

/// The nested subsets tried by dynamic filtering, largest first. Schedule
/// entries that yield an already tried size are skipped.
pub fn dynamic_subsets(specs: &[NoisySpec], config: &FilterConfig) -> Vec<Vec<usize>> {
    let mut ranked = indices_passing(specs, |c| c.action_conf >= config.eps_action);
    let per: Vec<f64> = specs.iter().map(|s| confidence_levels(s).per_conf).collect();
    ranked.sort_by(|&a, &b| per[b].total_cmp(&per[a]).then(a.cmp(&b)));
    let k = ranked.len();
    if k == 0 {
        return Vec::new();
    }
    let mut sizes: Vec<usize> = config.prop_schedule.iter().map(|&p| subset_size(p, k)).collect();
    sizes.dedup();
    sizes.into_iter().map(|u| ranked[..u].to_vec()).collect()
}

/// Dynamic filtering: drop low action confidence, then shrink the set of
/// specs with the highest perception confidence until synthesis succeeds.
pub fn synthesize_dynamic(specs: &[NoisySpec], config: &FilterConfig, bounds: &SynthBounds) -> Result<SynthesisResult, SynthError> {
    let all = values(specs);
    let start = Instant::now();
    let mut total = SynthesisResult::unsat();
    for subset in dynamic_subsets(specs, config) {
        let r = synthesize_subset(&all, &subset, bounds)?;
        total.solver_calls += r.solver_calls;
        total.longest_call = total.longest_call.max(r.longest_call);
        if matches!(r.outcome, Outcome::Found { .. }) {
            total.outcome = r.outcome;
            break;
        }
    }
    total.wall_time = start.elapsed();
    Ok(total)
}

/// Same result as [`synthesize_dynamic`], but every (subset, bound) search
/// runs concurrently. The accepted call is the earliest in subset-major,
/// bound-minor order, so the outcome and call count match the serial run.
pub fn synthesize_dynamic_parallel(
    specs: &[NoisySpec],
    config: &FilterConfig,
    bounds: &SynthBounds,
) -> Result<SynthesisResult, SynthError> {
    let all = values(specs);
    let start = Instant::now();
    let subsets = dynamic_subsets(specs, config);
    let grid: Vec<(usize, usize)> = (0..subsets.len())
        .flat_map(|i| (0..=bounds.max_n).map(move |n| (i, n)))
        .collect();
    let cells: Vec<(Result<Option<Program>, SynthError>, Duration)> = grid
        .par_iter()
        .map(|&(i, n)| {
            let chosen: Vec<IoSpec> = subsets[i].iter().map(|&j| all[j].clone()).collect();
            let t = Instant::now();
            let r = synthesize_at_bound(&chosen, n, bounds);
            (r, t.elapsed())
        })
        .collect();
    let mut total = SynthesisResult::unsat();
    for (&(i, n), (cell, took)) in grid.iter().zip(cells) {
        total.solver_calls += 1;
        total.longest_call = total.longest_call.max(took);
        if let Some(program) = cell? {
            let mut specs_used = subsets[i].clone();
            specs_used.sort_unstable();
            total.outcome = Outcome::Found { program, n_used: n, specs_used };
            break;
        }
    }
    total.wall_time = start.elapsed();
    Ok(total)
}

/// Runs the synthesis pipeline selected by `mode`.
pub fn synthesize(specs: &[NoisySpec], mode: Mode, config: &FilterConfig, bounds: &SynthBounds) -> Result<SynthesisResult, SynthError> {
    match mode {
        Mode::None => synthesize_min_cost(&values(specs), bounds),
        Mode::Static => synthesize_static(specs, config, bounds),
        Mode::Dynamic => synthesize_dynamic(specs, config, bounds),
    }
}

#[cfg(test)]
mod tests;
