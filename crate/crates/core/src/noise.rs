//! Simulated perception front-end.
//!
//! Stands in for a sequence model that predicts action and perception tokens
//! from raw frames: every ground-truth token may be flipped, and every token
//! carries the probability the model would assign to its predicted class.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{task_rng, Task};
use crate::semantics::{Demonstration, IoSpec};
use crate::world::{Action, NUM_PERCEPTIONS};

/// Parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        BetaParams { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    fn distribution(&self) -> Beta<f64> {
        Beta::new(self.alpha, self.beta).expect("validated Beta parameters")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub action_error_rate: f64,
    pub perception_error_rate: f64,
    /// Confidence distribution of correctly predicted tokens.
    pub conf_correct: BetaParams,
    /// Confidence distribution of mispredicted tokens.
    pub conf_wrong: BetaParams,
    /// Fraction of mispredicted tokens whose confidence is drawn from
    /// `conf_correct` instead (confidently wrong predictions).
    pub calibration_leak: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            action_error_rate: 0.0,
            perception_error_rate: 0.0,
            conf_correct: BetaParams::new(500.0, 1.0),
            conf_wrong: BetaParams::new(5.0, 3.0),
            calibration_leak: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid noise configuration: {0}")]
pub struct NoiseConfigError(String);

impl NoiseConfig {
    pub fn with_rates(action_error_rate: f64, perception_error_rate: f64) -> Self {
        NoiseConfig { action_error_rate, perception_error_rate, ..NoiseConfig::default() }
    }

    pub fn validate(&self) -> Result<(), NoiseConfigError> {
        for (name, rate) in [
            ("action_error_rate", self.action_error_rate),
            ("perception_error_rate", self.perception_error_rate),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(NoiseConfigError(format!("{name} = {rate} is outside [0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.calibration_leak) {
            return Err(NoiseConfigError(format!("calibration_leak = {} is outside [0, 1]", self.calibration_leak)));
        }
        for b in [self.conf_correct, self.conf_wrong] {
            if !(b.alpha > 0.0 && b.beta > 0.0 && b.alpha.is_finite() && b.beta.is_finite()) {
                return Err(NoiseConfigError(format!("Beta({}, {}) needs positive parameters", b.alpha, b.beta)));
            }
        }
        Ok(())
    }
}

/// A predicted token value and the confidence attached to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenPrediction<T> {
    #[serde(rename = "v")]
    pub value: T,
    #[serde(rename = "c")]
    pub confidence: f64,
}

/// The front-end's prediction for one demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisySpec {
    pub actions: Vec<TokenPrediction<Action>>,
    pub perceptions: Vec<[TokenPrediction<bool>; NUM_PERCEPTIONS]>,
    /// Position of the source demonstration within its task.
    #[serde(skip)]
    pub source_demo_index: usize,
}

impl NoisySpec {
    /// Predicted values with confidences dropped.
    pub fn values(&self) -> IoSpec {
        IoSpec {
            actions: self.actions.iter().map(|t| t.value).collect(),
            perceptions: self
                .perceptions
                .iter()
                .map(|row| row.map(|t| t.value))
                .collect(),
        }
    }

    /// A spec that reproduces `demo` with every confidence equal to `confidence`.
    pub fn exact(demo: &Demonstration, confidence: f64) -> NoisySpec {
        NoisySpec {
            actions: demo.actions.iter().map(|&value| TokenPrediction { value, confidence }).collect(),
            perceptions: demo
                .perceptions
                .iter()
                .map(|row| row.map(|value| TokenPrediction { value, confidence }))
                .collect(),
            source_demo_index: 0,
        }
    }
}

/// The corrupted observed demonstrations of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyTask {
    pub task_seed: u64,
    pub specs: Vec<NoisySpec>,
}

impl NoisyTask {
    /// Restores `source_demo_index`, which is implicit in the file format.
    pub fn reindex(mut self) -> Self {
        for (i, s) in self.specs.iter_mut().enumerate() {
            s.source_demo_index = i;
        }
        self
    }
}

struct Sampler {
    correct: Beta<f64>,
    wrong: Beta<f64>,
    leak: f64,
}

impl Sampler {
    fn confidence(&self, flipped: bool, rng: &mut impl Rng) -> f64 {
        let dist = if flipped && !rng.random_bool(self.leak) { &self.wrong } else { &self.correct };
        dist.sample(rng).max(f64::MIN_POSITIVE)
    }
}

/// Corrupts every token of `demo` independently.
pub fn corrupt(demo: &Demonstration, noise: &NoiseConfig, rng: &mut impl Rng) -> NoisySpec {
    let sampler = Sampler {
        correct: noise.conf_correct.distribution(),
        wrong: noise.conf_wrong.distribution(),
        leak: noise.calibration_leak,
    };
    let actions = demo
        .actions
        .iter()
        .map(|&truth| {
            let flipped = rng.random_bool(noise.action_error_rate);
            let value = if flipped {
                let others: Vec<Action> = Action::ALL.into_iter().filter(|&a| a != truth).collect();
                others[rng.random_range(0..others.len())]
            } else {
                truth
            };
            TokenPrediction { value, confidence: sampler.confidence(flipped, rng) }
        })
        .collect();
    let perceptions = demo
        .perceptions
        .iter()
        .map(|row| {
            row.map(|truth| {
                let flipped = rng.random_bool(noise.perception_error_rate);
                TokenPrediction { value: truth != flipped, confidence: sampler.confidence(flipped, rng) }
            })
        })
        .collect();
    NoisySpec { actions, perceptions, source_demo_index: 0 }
}

/// Seed of the noise stream for one task under a given noise seed.
pub fn noise_stream_seed(noise_seed: u64, task_seed: u64) -> u64 {
    noise_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) ^ task_seed
}

/// Corrupts the observed demonstrations of `task`.
pub fn corrupt_task(task: &Task, noise: &NoiseConfig, noise_seed: u64) -> NoisyTask {
    let mut rng = task_rng(noise_stream_seed(noise_seed, task.seed));
    let specs = task
        .observed
        .iter()
        .enumerate()
        .map(|(i, demo)| NoisySpec { source_demo_index: i, ..corrupt(demo, noise, &mut rng) })
        .collect();
    NoisyTask { task_seed: task.seed, specs }
}
