use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use plans::dataset::{generate_corpus, read_jsonl, write_jsonl, GenConfig, Task};
use plans::harness::{
    k_sweep, run_experiment, score, synth_record, EvalReport, ExperimentConfig, RunReport, SynthRecord, TaskVerdict,
};
use plans::noise::{corrupt_task, BetaParams, NoiseConfig, NoisySpec, NoisyTask};
use plans::synth::{FilterConfig, Mode, SynthBounds, DEFAULT_EPS_ACTION, DEFAULT_EPS_PERCEPTION};

#[derive(Parser)]
#[command(name = "plans", version, about = "Karel program synthesis from noisy demonstrations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus of tasks as JSON Lines.
    Generate(GenerateArgs),
    /// Corrupt the observed demonstrations of a corpus.
    Corrupt(CorruptArgs),
    /// Synthesize one program per noisy task.
    Synth(SynthArgs),
    /// Score synthesis results against their ground truth.
    Eval(EvalArgs),
    /// Run the full pipeline for every filtering mode and summarize timings.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    tasks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator settings as JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NoiseArgs {
    /// Probability that an action token is mispredicted.
    #[arg(long, default_value_t = 0.0)]
    action_err: f64,
    /// Probability that a perception token is mispredicted.
    #[arg(long, default_value_t = 0.0)]
    per_err: f64,
    /// Fraction of mispredicted tokens that get a high confidence.
    #[arg(long)]
    leak: Option<f64>,
    /// Beta parameters `ALPHA,BETA` of correct-token confidences.
    #[arg(long, value_parser = parse_beta)]
    conf_correct: Option<BetaParams>,
    /// Beta parameters `ALPHA,BETA` of mispredicted-token confidences.
    #[arg(long, value_parser = parse_beta)]
    conf_wrong: Option<BetaParams>,
}

fn parse_beta(s: &str) -> Result<BetaParams, String> {
    let (a, b) = s.split_once(',').ok_or("expected ALPHA,BETA")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok(BetaParams::new(num(a)?, num(b)?))
}

impl NoiseArgs {
    fn config(&self) -> Result<NoiseConfig> {
        let mut noise = NoiseConfig::with_rates(self.action_err, self.per_err);
        if let Some(leak) = self.leak {
            noise.calibration_leak = leak;
        }
        if let Some(b) = self.conf_correct {
            noise.conf_correct = b;
        }
        if let Some(b) = self.conf_wrong {
            noise.conf_wrong = b;
        }
        noise.validate()?;
        Ok(noise)
    }
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthOptions {
    /// Action confidence threshold.
    #[arg(long = "eps-a", default_value_t = DEFAULT_EPS_ACTION)]
    eps_a: f64,
    /// Perception confidence threshold.
    #[arg(long = "eps-p", default_value_t = DEFAULT_EPS_PERCEPTION)]
    eps_p: f64,
    /// Comma-separated fractions of specifications kept by dynamic filtering
    /// [default: [1, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]]
    #[arg(long, value_delimiter = ',')]
    prop_schedule: Option<Vec<f64>>,
    /// Largest number of if/while statements.
    #[arg(long, default_value_t = 2)]
    max_n: usize,
    /// Partial candidates one bounded search may expand.
    #[arg(long, default_value_t = 100_000_000)]
    node_budget: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Leave timings out so that outputs are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl SynthOptions {
    fn filter(&self) -> Result<FilterConfig> {
        let mut filter = FilterConfig { eps_action: self.eps_a, eps_perception: self.eps_p, ..FilterConfig::default() };
        if let Some(s) = &self.prop_schedule {
            filter.prop_schedule = s.clone();
        }
        filter.validate()?;
        Ok(filter)
    }

    fn bounds(&self) -> SynthBounds {
        SynthBounds { max_n: self.max_n, node_budget: self.node_budget, ..SynthBounds::default() }
    }

    fn install_pool(&self) {
        // Fails only if a global pool already exists; the existing one is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(self.parallel).build_global();
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Noisy corpus produced by `plans corrupt`.
    #[arg(long)]
    specs: PathBuf,
    #[arg(long, default_value = "dynamic")]
    mode: Mode,
    #[command(flatten)]
    opts: SynthOptions,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-task verdicts [default: <out> with extension .verdicts.jsonl]
    #[arg(long)]
    verdicts: Option<PathBuf>,
    /// Also write accuracy versus number of demonstrations as CSV.
    #[arg(long)]
    k_sweep: Option<PathBuf>,
    /// Noisy corpus for the sweep; exact specs from the tasks when absent.
    #[arg(long)]
    specs: Option<PathBuf>,
    #[command(flatten)]
    opts: SynthOptions,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    tasks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent noise seeds per mode.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    opts: SynthOptions,
    /// Write the per-mode reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let config: GenConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => GenConfig::default(),
    };
    let tasks = generate_corpus(&config, args.tasks, args.seed)?;
    write_jsonl(&args.out, &tasks)?;
    Ok(ExitCode::SUCCESS)
}

fn corrupt(args: CorruptArgs) -> Result<ExitCode> {
    let noise = args.noise.config()?;
    let tasks: Vec<Task> = read_jsonl(&args.input)?;
    let noisy: Vec<NoisyTask> = tasks.iter().map(|t| corrupt_task(t, &noise, args.seed)).collect();
    write_jsonl(&args.out, &noisy)?;
    Ok(ExitCode::SUCCESS)
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    use rayon::prelude::*;
    args.opts.install_pool();
    let filter = args.opts.filter()?;
    let bounds = args.opts.bounds();
    let noisy: Vec<NoisyTask> = read_jsonl(&args.specs)?;
    let outcomes: Vec<_> = noisy
        .par_iter()
        .map(|t| {
            let t = t.clone().reindex();
            synth_record(t.task_seed, &t.specs, args.mode, &filter, &bounds, !args.opts.no_timing)
                .map_err(|e| (t.task_seed, e))
        })
        .collect();
    let mut records = Vec::new();
    let mut failed = false;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err((seed, e)) => {
                eprintln!("task {seed}: {e}");
                failed = true;
            }
        }
    }
    write_jsonl(&args.out, &records)?;
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let tasks: Vec<Task> = read_jsonl(&args.tasks)?;
    let results: Vec<SynthRecord> = read_jsonl(&args.results)?;
    let t_max = GenConfig::default().t_max;
    let mut verdicts: Vec<TaskVerdict> = Vec::new();
    let mut failed = false;
    for task in &tasks {
        match results.iter().find(|r| r.task_seed == task.seed) {
            Some(rec) => verdicts.push(score(task, rec, t_max)),
            None => {
                eprintln!("task {}: no result", task.seed);
                failed = true;
            }
        }
    }
    let mode = results.first().map(|r| r.mode);
    let verdict_path = args.verdicts.clone().unwrap_or_else(|| args.out.with_extension("verdicts.jsonl"));
    write_jsonl(&verdict_path, &verdicts)?;
    write_json(&args.out, &EvalReport::from_verdicts(mode, &verdicts))?;

    if let Some(csv_path) = &args.k_sweep {
        args.opts.install_pool();
        let specs: Vec<Vec<NoisySpec>> = match &args.specs {
            Some(path) => {
                let noisy: Vec<NoisyTask> = read_jsonl(path)?;
                if noisy.iter().map(|n| n.task_seed).ne(tasks.iter().map(|t| t.seed)) {
                    bail!("{} does not match the tasks file", path.display());
                }
                noisy.into_iter().map(|n| n.reindex().specs).collect()
            }
            None => tasks
                .iter()
                .map(|t| t.observed.iter().map(|d| NoisySpec::exact(d, 1.0)).collect())
                .collect(),
        };
        let filter = args.opts.filter()?;
        let bounds = args.opts.bounds();
        let mut w = csv::Writer::from_path(csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
        for m in Mode::ALL {
            for row in k_sweep(&tasks, &specs, m, &filter, &bounds, t_max)? {
                w.serialize(row)?;
            }
        }
        w.flush()?;
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    args.opts.install_pool();
    let noise = args.noise.config()?;
    let gen = GenConfig::default();
    let tasks = generate_corpus(&gen, args.tasks, args.seed)?;

    let start = Instant::now();
    for seed in 0..args.seeds {
        for t in &tasks {
            corrupt_task(t, &noise, seed);
        }
    }
    let corrupt_ms = start.elapsed().as_secs_f64() * 1e3 / (args.tasks.max(1) as u64 * args.seeds.max(1)) as f64;

    let mut reports: Vec<RunReport> = Vec::new();
    println!(
        "{:<8} {:>16} {:>16} {:>16} {:>14} {:>14} {:>18}",
        "mode", "execution", "program", "sequence", "corrupt (ms)", "synth (ms)", "longest call (ms)"
    );
    for mode in Mode::ALL {
        let cfg = ExperimentConfig {
            noise: noise.clone(),
            mode,
            filter: args.opts.filter()?,
            bounds: args.opts.bounds(),
            t_max: gen.t_max,
            seeds: (0..args.seeds).collect(),
            timing: !args.opts.no_timing,
        };
        let report = run_experiment(&tasks, &cfg)?.report;
        let (wall, longest) = report
            .timing
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |t| (t.mean_wall_time_ms, t.mean_longest_call_ms));
        println!(
            "{:<8} {:>16} {:>16} {:>16} {:>14.3} {:>14.2} {:>18.2}",
            mode.name(),
            report.execution_acc.to_string(),
            report.program_acc.to_string(),
            report.sequence_acc.to_string(),
            corrupt_ms,
            wall,
            longest
        );
        reports.push(report);
    }
    if let Some(out) = &args.out {
        write_json(out, &reports)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Corrupt(a) => corrupt(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
