//! Q-learning on footstep outcomes: replay buffer, TD targets against a
//! slowly tracking target network, and the training loop that grows a
//! value function from stepping experience.
//!
//! Behavior policy: during warmup (by default until the replay buffer is
//! full), steps come mostly from the capture-point baseline (with a random
//! minority for coverage); afterwards, epsilon-greedy on the online network
//! — optionally with a persistent baseline share (`baseline_floor`) so the
//! buffer keeps seeing competent walking while the greedy policy is still
//! poor — with one gradient update and one Polyak target blend per
//! environment step. Baseline-sourced steps dither the forward step target
//! by half a grid cell before snapping: deterministic snapping pins any
//! sub-cell commanded drift to one cell (at low commanded speeds, the
//! standing cell), so without the dither the buffer would never contain
//! on-command walking to learn from. Costs are positive and episodes are
//! short, so Q estimates stay small and no gradient clipping is needed — a
//! non-finite loss aborts training instead of limping on.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    write_net_input, ActionGrid, EnvConfig, EnvError, EnvObservation, Mode, SteppingEnv,
    TransitionRecord,
};
use crate::pendulum::{PendulumError, PendulumParams};
use crate::planner::{greedy_action, lipm_baseline_displacement, PlannerError};
use crate::qnet::{
    adam_step, mse_loss_and_gradients, soft_update, AdamConfig, AdamState, MlpParams, MlpSpec,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("loss became non-finite at episode {episode}, step {step}")]
    NonFiniteLoss { episode: usize, step: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
}

/// Fixed-capacity FIFO of environment transitions. Index 0 is the oldest.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: VecDeque<TransitionRecord>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay buffer needs capacity");
        ReplayBuffer {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, record: TransitionRecord) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, index: usize) -> &TransitionRecord {
        &self.entries[index]
    }
}

/// Minibatch index selection: the newest `ceil(recency_fraction * batch)`
/// transitions in chronological order, then uniform draws with replacement
/// for the remainder. The recency slice keeps fresh experience in every
/// update; the uniform part decorrelates.
pub fn sample_minibatch(
    len: usize,
    batch_size: usize,
    recency_fraction: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    assert!(len > 0);
    let newest = ((batch_size as f64 * recency_fraction).ceil() as usize)
        .min(batch_size)
        .min(len);
    let mut indices = Vec::with_capacity(batch_size);
    indices.extend(len - newest..len);
    while indices.len() < batch_size {
        indices.push(rng.random_range(0..len));
    }
    indices
}

/// One-step TD targets: `cost` for terminal transitions, otherwise
/// `cost + discount * min_a Q_target(next, a)` over the recorded candidate
/// steps. Truncated episodes bootstrap — hitting the step limit says
/// nothing about the value of the state left behind.
///
/// All candidate evaluations across the batch run as a single forward
/// pass.
pub fn td_targets(
    target_net: &MlpParams,
    records: &[&TransitionRecord],
    discount: f64,
) -> Result<Array1<f64>, PlannerError> {
    let mode = Mode::from_net_input_dim(target_net.input_dim())
        .ok_or(PlannerError::UnknownInputWidth(target_net.input_dim()))?;
    let dim = mode.net_input_dim();
    let rows: usize = records
        .iter()
        .filter(|r| !r.terminal)
        .map(|r| r.next_candidates.len())
        .sum();
    let mut batch = Array2::zeros((rows, dim));
    let mut row = 0;
    for rec in records.iter().filter(|r| !r.terminal) {
        for d in &rec.next_candidates {
            write_net_input(
                batch.row_mut(row).as_slice_mut().unwrap(),
                &rec.next_observation,
                d,
                mode,
            );
            row += 1;
        }
    }
    let scores = if rows > 0 {
        target_net.forward_batch(&batch)
    } else {
        Array1::zeros(0)
    };
    let mut out = Array1::zeros(records.len());
    row = 0;
    for (i, rec) in records.iter().enumerate() {
        out[i] = rec.cost;
        if !rec.terminal && !rec.next_candidates.is_empty() {
            let n = rec.next_candidates.len();
            let best = scores
                .slice(ndarray::s![row..row + n])
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            out[i] += discount * best;
            row += n;
        }
    }
    Ok(out)
}

/// Everything a training run needs, serializable so each run directory can
/// record exactly what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvConfig,
    /// Hidden layer widths of the Q-network.
    pub hidden: Vec<usize>,
    pub episodes: usize,
    pub discount: f64,
    pub adam: AdamConfig,
    /// When set, the Adam step size anneals geometrically from
    /// `adam.learning_rate` to this value over the run — a large early rate
    /// erodes grossly wrong value estimates quickly, a small late rate
    /// resolves the sub-unit cost differences that decide nearby actions.
    #[serde(default)]
    pub learning_rate_final: Option<f64>,
    /// Polyak blend factor for the target network, applied every update.
    pub tau: f64,
    /// Exploration rate once warmup ends.
    pub epsilon: f64,
    /// When set, the exploration rate anneals linearly from `epsilon` to
    /// this value over the run — broad coverage early, sharp exploitation
    /// data late.
    #[serde(default)]
    pub epsilon_final: Option<f64>,
    pub batch_size: usize,
    pub recency_fraction: f64,
    pub buffer_capacity: usize,
    /// Fraction of warmup steps taken by the capture-point baseline; the
    /// rest are uniform random.
    pub baseline_fraction: f64,
    /// Fraction of post-warmup exploitation steps still taken by the
    /// capture-point baseline. Keeps coherent walking experience flowing
    /// into replay even while the greedy policy is poor — without it, hard
    /// settings can collapse to a value function that predicts an imminent
    /// fall everywhere and never see the data that would correct it.
    #[serde(default)]
    pub baseline_floor: f64,
    /// Environment steps collected before updates (and the post-warmup
    /// behavior mix) begin; 0 means "a full buffer". Letting updates start
    /// before the buffer has filled decouples the experience horizon from
    /// the warmup length.
    #[serde(default)]
    pub warmup_steps: usize,
    /// Evaluate the greedy policy every this many episodes (0 = never).
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: EnvConfig::default(),
            hidden: MlpSpec::compact(0).hidden,
            episodes: 2000,
            discount: 0.95,
            adam: AdamConfig::default(),
            learning_rate_final: None,
            tau: 0.001,
            epsilon: 0.2,
            epsilon_final: None,
            batch_size: 64,
            recency_fraction: 0.2,
            buffer_capacity: 8000,
            baseline_fraction: 0.8,
            baseline_floor: 0.0,
            warmup_steps: 0,
            eval_interval: 100,
            eval_episodes: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn one_d() -> Self {
        TrainConfig {
            env: EnvConfig::one_d(),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.env.validate()?;
        if self.episodes == 0 {
            return Err(TrainError::InvalidConfig("episodes must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(TrainError::InvalidConfig(
                "buffer_capacity must be at least batch_size",
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(TrainError::InvalidConfig("discount must be in [0, 1)"));
        }
        for (value, name) in [
            (self.epsilon, "epsilon must be in [0, 1]"),
            (self.recency_fraction, "recency_fraction must be in [0, 1]"),
            (self.baseline_fraction, "baseline_fraction must be in [0, 1]"),
            (self.baseline_floor, "baseline_floor must be in [0, 1]"),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(TrainError::InvalidConfig(name));
            }
        }
        if let Some(ef) = self.epsilon_final {
            if !(0.0..=1.0).contains(&ef) {
                return Err(TrainError::InvalidConfig("epsilon_final must be in [0, 1]"));
            }
        }
        if let Some(lrf) = self.learning_rate_final {
            if !(lrf > 0.0 && lrf.is_finite()) {
                return Err(TrainError::InvalidConfig(
                    "learning_rate_final must be positive and finite",
                ));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(TrainError::InvalidConfig("tau must be in (0, 1]"));
        }
        if self.eval_interval > 0 && self.eval_episodes == 0 {
            return Err(TrainError::InvalidConfig(
                "eval_episodes must be positive when eval_interval is set",
            ));
        }
        Ok(())
    }

    pub fn net_spec(&self) -> MlpSpec {
        MlpSpec {
            input_dim: self.env.mode.net_input_dim(),
            hidden: self.hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub total_cost: f64,
    /// Mean TD loss over this episode's updates; absent during warmup.
    pub mean_loss: Option<f64>,
    /// Greedy-policy evaluation cost, on evaluation episodes only.
    pub eval_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_cost: f64,
    pub mean_steps: f64,
    /// Fraction of evaluation episodes that ended in a fall.
    pub fall_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub episode: usize,
    #[serde(flatten)]
    pub summary: EvalSummary,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub online: MlpParams,
    pub target: MlpParams,
    pub episodes: Vec<EpisodeStats>,
    pub evals: Vec<EvalPoint>,
}

/// Per-episode view handed to the [`train_with`] callback.
pub struct TrainProgress<'a> {
    pub episode: usize,
    pub total_episodes: usize,
    pub online: &'a MlpParams,
    pub stats: &'a EpisodeStats,
    pub eval: Option<&'a EvalSummary>,
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Half the forward grid pitch, or zero when the grid has no pitch.
fn forward_half_cell(grid: &ActionGrid) -> f64 {
    match grid.forward.as_slice() {
        [first, second, ..] => 0.5 * (second - first),
        _ => 0.0,
    }
}

/// Capture-point step with the forward target dithered across one grid
/// cell before snapping. Deterministic snapping sends every sub-cell step
/// target to the same cell, so at commanded speeds whose per-step drift is
/// below half a cell the snapped baseline walks in place forever — and a
/// replay buffer seeded from it never contains on-command walking.
/// Jittering the target uniformly by half a cell each way realizes the
/// commanded drift on average while each individual step stays within one
/// cell of the capture step.
fn dithered_baseline_action(
    obs: &EnvObservation,
    grid: &ActionGrid,
    half_cell: f64,
    params: &PendulumParams,
    rng: &mut ChaCha8Rng,
) -> Result<usize, PendulumError> {
    let want = lipm_baseline_displacement(obs, params)?;
    let target = if half_cell > 0.0 {
        want.x + rng.random_range(-half_cell..=half_cell)
    } else {
        want.x
    };
    Ok(grid.nearest(target, want.y, obs.stance))
}

pub fn train(config: &TrainConfig) -> Result<TrainResult, TrainError> {
    train_with(config, |_| {})
}

/// Runs training, invoking `on_episode` after every episode — the CLI uses
/// this for progress lines and interval checkpoints. Fully deterministic
/// for a given config.
pub fn train_with(
    config: &TrainConfig,
    mut on_episode: impl FnMut(&TrainProgress<'_>),
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let spec = config.net_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x6c6561_726e));
    let mut online = MlpParams::init(&spec, &mut rng);
    let mut target = online.clone();
    let mut adam = AdamState::new(&online);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut env = SteppingEnv::new(config.env, mix_seed(config.seed, 0x656e76))?;
    let params = config.env.params;

    let warmup = if config.warmup_steps == 0 {
        config.buffer_capacity
    } else {
        config.warmup_steps.max(config.batch_size)
    };
    let mut env_steps = 0usize;
    let half_cell = forward_half_cell(env.grid());

    let mut episodes = Vec::with_capacity(config.episodes);
    let mut evals = Vec::new();
    for episode in 0..config.episodes {
        let anneal = if config.episodes > 1 {
            episode as f64 / (config.episodes - 1) as f64
        } else {
            0.0
        };
        let epsilon_now = match config.epsilon_final {
            Some(ef) => config.epsilon + (ef - config.epsilon) * anneal,
            None => config.epsilon,
        };
        let adam_now = match config.learning_rate_final {
            Some(lrf) => AdamConfig {
                learning_rate: config.adam.learning_rate
                    * (lrf / config.adam.learning_rate).powf(anneal),
                ..config.adam
            },
            None => config.adam,
        };
        env.reset();
        let mut total_cost = 0.0;
        let mut steps = 0usize;
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        while !env.is_done() {
            let obs = env.observation();
            let action = if env_steps < warmup {
                if rng.random_bool(config.baseline_fraction) {
                    dithered_baseline_action(&obs, env.grid(), half_cell, &params, &mut rng)?
                } else {
                    rng.random_range(0..env.grid().len())
                }
            } else if rng.random_bool(epsilon_now) {
                rng.random_range(0..env.grid().len())
            } else if config.baseline_floor > 0.0 && rng.random_bool(config.baseline_floor) {
                dithered_baseline_action(&obs, env.grid(), half_cell, &params, &mut rng)?
            } else {
                let candidates = env.candidate_displacements();
                greedy_action(&online, &obs, &candidates)?.index
            };
            let record = env.step(action)?;
            total_cost += record.cost;
            steps += 1;
            env_steps += 1;
            buffer.push(record);
            if env_steps >= warmup {
                let loss = update_once(
                    &mut online,
                    &mut target,
                    &mut adam,
                    &buffer,
                    config,
                    &adam_now,
                    &mut rng,
                )?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss { episode, step: steps });
                }
                loss_sum += loss;
                updates += 1;
            }
        }
        let eval = if config.eval_interval > 0 && (episode + 1) % config.eval_interval == 0 {
            let summary = evaluate(
                &online,
                &config.env,
                config.eval_episodes,
                mix_seed(config.seed, episode as u64),
            )?;
            evals.push(EvalPoint { episode, summary });
            Some(summary)
        } else {
            None
        };
        episodes.push(EpisodeStats {
            episode,
            steps,
            total_cost,
            mean_loss: (updates > 0).then(|| loss_sum / updates as f64),
            eval_cost: eval.map(|e| e.mean_cost),
        });
        on_episode(&TrainProgress {
            episode,
            total_episodes: config.episodes,
            online: &online,
            stats: episodes.last().unwrap(),
            eval: eval.as_ref().map(|_| &evals.last().unwrap().summary),
        });
    }
    Ok(TrainResult {
        online,
        target,
        episodes,
        evals,
    })
}

fn update_once(
    online: &mut MlpParams,
    target: &mut MlpParams,
    adam: &mut AdamState,
    buffer: &ReplayBuffer,
    config: &TrainConfig,
    adam_config: &AdamConfig,
    rng: &mut impl Rng,
) -> Result<f64, TrainError> {
    let indices = sample_minibatch(
        buffer.len(),
        config.batch_size,
        config.recency_fraction,
        rng,
    );
    let records: Vec<&TransitionRecord> = indices.iter().map(|&i| buffer.get(i)).collect();
    let targets = td_targets(target, &records, config.discount)?;
    let mode = config.env.mode;
    let mut inputs = Array2::zeros((records.len(), mode.net_input_dim()));
    for (mut row, rec) in inputs.rows_mut().into_iter().zip(&records) {
        write_net_input(
            row.as_slice_mut().unwrap(),
            &rec.observation,
            &rec.displacement,
            mode,
        );
    }
    let (loss, grads) = mse_loss_and_gradients(online, &inputs, &targets);
    adam_step(online, &grads, adam, adam_config);
    soft_update(target, online, config.tau);
    Ok(loss)
}

/// Greedy-policy rollouts on freshly seeded episodes.
pub fn evaluate(
    net: &MlpParams,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary, TrainError> {
    let mut env = SteppingEnv::new(*env_config, seed)?;
    let mut total_cost = 0.0;
    let mut total_steps = 0usize;
    let mut falls = 0usize;
    for _ in 0..episodes {
        env.reset();
        while !env.is_done() {
            let obs = env.observation();
            let candidates = env.candidate_displacements();
            let action = greedy_action(net, &obs, &candidates)?.index;
            let record = env.step(action)?;
            total_cost += record.cost;
            total_steps += 1;
            if record.terminal {
                falls += 1;
            }
        }
    }
    let n = episodes.max(1) as f64;
    Ok(EvalSummary {
        mean_cost: total_cost / n,
        mean_steps: total_steps as f64 / n,
        fall_fraction: falls as f64 / n,
    })
}

/// Renders per-episode statistics as CSV. Floats print in Rust's
/// shortest-roundtrip form, so the log is byte-stable for a given run.
pub fn training_log_csv(episodes: &[EpisodeStats]) -> String {
    let mut out = String::from("episode,steps,total_cost,mean_loss,eval_cost\n");
    for s in episodes {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.episode,
            s.steps,
            s.total_cost,
            s.mean_loss.map(|v| v.to_string()).unwrap_or_default(),
            s.eval_cost.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    out
}
