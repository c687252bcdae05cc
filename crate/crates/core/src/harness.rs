//! Scoring synthesized programs and running whole experiments.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::dsl::{token_seq, Program};
use crate::noise::{corrupt_task, NoiseConfig, NoisySpec};
use crate::semantics::run_concrete;
use crate::synth::{synthesize, FilterConfig, Mode, Outcome, SynthBounds, SynthError};

/// True iff `predicted` emits the same actions as the ground truth from every
/// unseen initial state. A run error of the predicted program is a mismatch.
pub fn execution_accuracy(predicted: Option<&Program>, task: &Task, t_max: usize) -> bool {
    let Some(p) = predicted else {
        return false;
    };
    task.unseen.iter().all(|demo| {
        run_concrete(p, demo.initial(), t_max).is_ok_and(|run| run.actions == demo.actions)
    })
}

/// Token-level equality after unrolling `repeat`.
pub fn program_accuracy(predicted: Option<&Program>, truth: &Program) -> bool {
    predicted.is_some_and(|p| token_seq(&p.canonicalize()) == token_seq(&truth.canonicalize()))
}

/// Exact token-level equality.
pub fn sequence_accuracy(predicted: Option<&Program>, truth: &Program) -> bool {
    predicted.is_some_and(|p| token_seq(p) == token_seq(truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Found,
    Unsat,
    BoundsExceeded,
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeClass::Found => "found",
            OutcomeClass::Unsat => "unsat",
            OutcomeClass::BoundsExceeded => "bounds_exceeded",
        })
    }
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub task_seed: u64,
    pub mode: Mode,
    pub outcome: OutcomeClass,
    pub program: Option<Program>,
    pub n_used: Option<usize>,
    pub specs_used: Vec<usize>,
    pub solver_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longest_call_ms: Option<f64>,
}

/// Synthesizes one task. Exhausting the search budget is an outcome, any
/// other synthesis error is a hard error. Timing fields are left out unless
/// `timing` is set, which keeps result files reproducible byte for byte.
pub fn synth_record(
    task_seed: u64,
    specs: &[NoisySpec],
    mode: Mode,
    filter: &FilterConfig,
    bounds: &SynthBounds,
    timing: bool,
) -> Result<SynthRecord, SynthError> {
    let mut rec = SynthRecord {
        task_seed,
        mode,
        outcome: OutcomeClass::Unsat,
        program: None,
        n_used: None,
        specs_used: Vec::new(),
        solver_calls: 0,
        wall_time_ms: None,
        longest_call_ms: None,
    };
    match synthesize(specs, mode, filter, bounds) {
        Ok(r) => {
            rec.solver_calls = r.solver_calls;
            if timing {
                rec.wall_time_ms = Some(r.wall_time.as_secs_f64() * 1e3);
                rec.longest_call_ms = Some(r.longest_call.as_secs_f64() * 1e3);
            }
            if let Outcome::Found { program, n_used, specs_used } = r.outcome {
                rec.outcome = OutcomeClass::Found;
                rec.program = Some(program);
                rec.n_used = Some(n_used);
                rec.specs_used = specs_used;
            }
        }
        Err(SynthError::BoundsExceeded { .. }) => rec.outcome = OutcomeClass::BoundsExceeded,
        Err(e) => return Err(e),
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVerdict {
    pub task_seed: u64,
    pub execution: bool,
    pub program: bool,
    pub sequence: bool,
    pub outcome_class: OutcomeClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longest_call_ms: Option<f64>,
}

pub fn score(task: &Task, record: &SynthRecord, t_max: usize) -> TaskVerdict {
    let predicted = record.program.as_ref();
    TaskVerdict {
        task_seed: task.seed,
        execution: execution_accuracy(predicted, task, t_max),
        program: program_accuracy(predicted, &task.program),
        sequence: sequence_accuracy(predicted, &task.program),
        outcome_class: record.outcome,
        wall_time_ms: record.wall_time_ms,
        longest_call_ms: record.longest_call_ms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_wall_time_ms: f64,
    pub mean_longest_call_ms: f64,
    pub max_longest_call_ms: f64,
}

impl Timing {
    fn of(verdicts: &[TaskVerdict]) -> Option<Timing> {
        let wall: Vec<f64> = verdicts.iter().map(|v| v.wall_time_ms).collect::<Option<_>>()?;
        let longest: Vec<f64> = verdicts.iter().map(|v| v.longest_call_ms).collect::<Option<_>>()?;
        if wall.is_empty() {
            return None;
        }
        Some(Timing {
            mean_wall_time_ms: mean(&wall),
            mean_longest_call_ms: mean(&longest),
            max_longest_call_ms: longest.iter().copied().fold(0.0, f64::max),
        })
    }
}

/// Aggregate scores of one results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Option<Mode>,
    pub n_tasks: usize,
    /// Percentages.
    pub execution_acc: f64,
    pub program_acc: f64,
    pub sequence_acc: f64,
    pub found: usize,
    pub unsat: usize,
    pub bounds_exceeded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn percent(verdicts: &[TaskVerdict], hit: impl Fn(&TaskVerdict) -> bool) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    100.0 * verdicts.iter().filter(|v| hit(v)).count() as f64 / verdicts.len() as f64
}

impl EvalReport {
    pub fn from_verdicts(mode: Option<Mode>, verdicts: &[TaskVerdict]) -> Self {
        let count = |c: OutcomeClass| verdicts.iter().filter(|v| v.outcome_class == c).count();
        EvalReport {
            mode,
            n_tasks: verdicts.len(),
            execution_acc: percent(verdicts, |v| v.execution),
            program_acc: percent(verdicts, |v| v.program),
            sequence_acc: percent(verdicts, |v| v.sequence),
            found: count(OutcomeClass::Found),
            unsat: count(OutcomeClass::Unsat),
            bounds_exceeded: count(OutcomeClass::BoundsExceeded),
            timing: Timing::of(verdicts),
        }
    }
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl Stat {
    pub fn of(xs: Vec<f64>) -> Stat {
        let m = mean(&xs);
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean: m, std, per_seed: xs }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1} ± {:.1}", self.mean, self.std)
    }
}

/// Multi-seed aggregate for one filtering mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub n_tasks: usize,
    pub seeds: Vec<u64>,
    pub execution_acc: Stat,
    pub program_acc: Stat,
    pub sequence_acc: Stat,
    pub bounds_exceeded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub report: RunReport,
    /// Per seed, in seed order.
    pub per_seed: Vec<EvalReport>,
    pub verdicts: Vec<Vec<TaskVerdict>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub noise: NoiseConfig,
    pub mode: Mode,
    pub filter: FilterConfig,
    pub bounds: SynthBounds,
    pub t_max: usize,
    /// Noise seeds; one corruption of the corpus per seed.
    pub seeds: Vec<u64>,
    pub timing: bool,
}

/// Corrupts, synthesizes and scores each task under each noise seed. Tasks
/// are processed in parallel on the current rayon pool; results are
/// collected in task order, so the pool size does not affect the outcome.
pub fn run_experiment(tasks: &[Task], config: &ExperimentConfig) -> Result<ExperimentRun, SynthError> {
    let mut per_seed = Vec::new();
    let mut verdicts = Vec::new();
    for &seed in &config.seeds {
        let vs: Vec<TaskVerdict> = tasks
            .par_iter()
            .map(|task| {
                let noisy = corrupt_task(task, &config.noise, seed);
                let rec = synth_record(task.seed, &noisy.specs, config.mode, &config.filter, &config.bounds, config.timing)?;
                Ok(score(task, &rec, config.t_max))
            })
            .collect::<Result<_, SynthError>>()?;
        per_seed.push(EvalReport::from_verdicts(Some(config.mode), &vs));
        verdicts.push(vs);
    }
    let stat = |f: fn(&EvalReport) -> f64| Stat::of(per_seed.iter().map(f).collect());
    let all: Vec<TaskVerdict> = verdicts.iter().flatten().cloned().collect();
    let report = RunReport {
        mode: config.mode,
        n_tasks: tasks.len(),
        seeds: config.seeds.clone(),
        execution_acc: stat(|r| r.execution_acc),
        program_acc: stat(|r| r.program_acc),
        sequence_acc: stat(|r| r.sequence_acc),
        bounds_exceeded: per_seed.iter().map(|r| r.bounds_exceeded).sum(),
        timing: Timing::of(&all),
    };
    Ok(ExperimentRun { report, per_seed, verdicts })
}

/// One row of the accuracy-versus-demonstrations sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub k: usize,
    pub execution_acc: f64,
    pub program_acc: f64,
    pub sequence_acc: f64,
}

/// Accuracies when only the first `k` specs of each task are available, for
/// `k = 1..=max_k`.
pub fn k_sweep(
    tasks: &[Task],
    specs: &[Vec<NoisySpec>],
    mode: Mode,
    filter: &FilterConfig,
    bounds: &SynthBounds,
    t_max: usize,
) -> Result<Vec<SweepRow>, SynthError> {
    let max_k = specs.iter().map(Vec::len).max().unwrap_or(0);
    (1..=max_k)
        .map(|k| {
            let vs: Vec<TaskVerdict> = tasks
                .par_iter()
                .zip(specs)
                .map(|(task, s)| {
                    let rec = synth_record(task.seed, &s[..k.min(s.len())], mode, filter, bounds, false)?;
                    Ok(score(task, &rec, t_max))
                })
                .collect::<Result<_, SynthError>>()?;
            let r = EvalReport::from_verdicts(Some(mode), &vs);
            Ok(SweepRow {
                mode,
                k,
                execution_acc: r.execution_acc,
                program_acc: r.program_acc,
                sequence_acc: r.sequence_acc,
            })
        })
        .collect()
}
