//! Capture-region analysis and policy evaluation.
//!
//! The questions answered here are per-action: given one walker state,
//! which footstep choices still lead to a stop (the verified capture
//! region), how does the value network score each of them (the Q
//! heatmap), and how well does the learned region agree with the
//! closed-form recoverable set of the linear model? On top of the
//! per-action sweeps sit three episode-level evaluations: push recovery,
//! velocity tracking, and stepping-stone survival.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    ActionGrid, EnvConfig, EnvError, EnvObservation, GridTerrain, Mode, SteppingEnv, Terrain,
};
use crate::pendulum::{
    analytic_capture_bound, icp_scalar, lipm_omega, steady_gait_start, PendulumError,
    PendulumParams, StanceFoot,
};
use crate::planner::{
    best_admissible_action, greedy_action, lipm_baseline_action, lipm_baseline_displacement,
    score_actions, PlannerError,
};
use crate::qnet::MlpParams;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("operation requires a planar value network, checkpoint expects {input_dim} inputs")]
    NotPlanar { input_dim: usize },
    #[error("no admissible action at step {step}")]
    NoFoothold { step: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
}

/// How capture rollouts are run and judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Steps the policy gets to arrest the motion.
    pub horizon: usize,
    /// CoM speed below which the final state counts as stopped.
    pub speed_threshold: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec {
            horizon: 10,
            speed_threshold: 0.1,
        }
    }
}

/// The stepping policy an evaluation rolls out.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Greedy on a value network.
    Greedy(&'a MlpParams),
    /// The closed-form capture-point stepper.
    Baseline,
}

impl Policy<'_> {
    fn action(
        &self,
        obs: &EnvObservation,
        candidates: &[Vector3<f64>],
        grid: &ActionGrid,
        params: &PendulumParams,
    ) -> Result<usize, CaptureError> {
        match self {
            Policy::Greedy(net) => Ok(greedy_action(net, obs, candidates)?.index),
            Policy::Baseline => Ok(lipm_baseline_action(obs, grid, params)?),
        }
    }

    /// Like [`Policy::action`] but restricted to masked-in candidates:
    /// the greedy policy takes the best admissible value, the baseline
    /// the admissible landing closest to its preferred displacement.
    fn masked_action(
        &self,
        obs: &EnvObservation,
        candidates: &[Vector3<f64>],
        mask: &[bool],
        params: &PendulumParams,
        step: usize,
    ) -> Result<usize, CaptureError> {
        match self {
            Policy::Greedy(net) => match best_admissible_action(net, obs, candidates, mask) {
                Ok(ranked) => Ok(ranked.index),
                Err(PlannerError::NoAdmissibleAction) => Err(CaptureError::NoFoothold { step }),
                Err(e) => Err(e.into()),
            },
            Policy::Baseline => {
                let want = lipm_baseline_displacement(obs, params)?;
                candidates
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask[*i])
                    .min_by(|(_, a), (_, b)| {
                        let da = (a.x - want.x).powi(2) + (a.y - want.y).powi(2);
                        let db = (b.x - want.x).powi(2) + (b.y - want.y).powi(2);
                        da.total_cmp(&db)
                    })
                    .map(|(i, _)| i)
                    .ok_or(CaptureError::NoFoothold { step })
            }
        }
    }
}

/// What happened when one forced first step was rolled out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    /// The episode ended in a fall (leg limit or missed foothold).
    pub fell: bool,
    /// CoM speed when the episode ended; meaningless after a fall.
    pub final_speed: f64,
    /// Steps actually taken.
    pub steps: usize,
}

impl ActionOutcome {
    /// Stopped below the threshold without falling.
    pub fn capturable(&self, speed_threshold: f64) -> bool {
        !self.fell && self.final_speed < speed_threshold
    }
}

/// One action's row in a Q heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapEntry {
    pub index: usize,
    /// Displacement fed to the network; `z` is the terrain offset.
    pub displacement: Vector3<f64>,
    pub q_value: f64,
    pub admissible: bool,
    /// Rollout-verified capturability, when a verification pass ran.
    pub verified: Option<bool>,
}

/// Q values of every grid action at one state, landing height offset
/// uniformly — the "step onto a raised/lowered plate" scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionHeatmap {
    pub observation: EnvObservation,
    pub terrain_offset: f64,
    pub entries: Vec<HeatmapEntry>,
    /// Network evaluations spent — always exactly one per action.
    pub evaluations: usize,
}

impl ActionHeatmap {
    /// Attaches rollout-verified flags, one per entry.
    pub fn set_verified(&mut self, flags: &[bool]) {
        assert_eq!(
            flags.len(),
            self.entries.len(),
            "one verified flag per heatmap entry"
        );
        for (entry, &flag) in self.entries.iter_mut().zip(flags) {
            entry.verified = Some(flag);
        }
    }
}

/// Scores every action of the grid at `obs`, with all landings shifted
/// vertically by `terrain_offset`. One batched forward pass; entries come
/// back in grid-index order.
pub fn q_heatmap(
    net: &MlpParams,
    obs: &EnvObservation,
    grid: &ActionGrid,
    terrain_offset: f64,
) -> Result<ActionHeatmap, PlannerError> {
    let candidates: Vec<Vector3<f64>> = (0..grid.len())
        .map(|i| {
            let (dx, dy) = grid.planar(i, obs.stance);
            Vector3::new(dx, dy, terrain_offset)
        })
        .collect();
    let scores = score_actions(net, obs, &candidates)?;
    let entries = candidates
        .iter()
        .enumerate()
        .map(|(i, d)| HeatmapEntry {
            index: i,
            displacement: *d,
            q_value: scores[i],
            admissible: true,
            verified: None,
        })
        .collect();
    Ok(ActionHeatmap {
        observation: *obs,
        terrain_offset,
        entries,
        evaluations: grid.len(),
    })
}

/// Ground for the heatmap scenarios: a plate at `offset` height
/// everywhere except the cell under the current stance foot, which stays
/// at zero so the walker genuinely steps *onto* the plate. Flat ground
/// resumes beyond ±5 m.
pub fn offset_plate(offset: f64) -> Terrain {
    let n = 201usize;
    let cell = 0.05;
    let origin = -(n as f64) * cell / 2.0;
    let mut heights = vec![offset; n * n];
    let center = (n / 2) * n + n / 2;
    heights[center] = 0.0;
    Terrain::Grid(GridTerrain {
        origin_x: origin,
        origin_y: origin,
        cell_size: cell,
        nx: n,
        ny: n,
        heights,
        admissible: vec![true; n * n],
    })
}

/// Forces each grid action as the first step from `obs`, then lets the
/// policy finish the episode with zero desired velocity on the given
/// terrain. Returns one outcome per action, in grid-index order.
/// Deterministic: episode randomness never enters.
pub fn verified_outcomes(
    policy: Policy<'_>,
    env_config: &EnvConfig,
    terrain: &Terrain,
    obs: &EnvObservation,
    spec: &RegionSpec,
) -> Result<Vec<ActionOutcome>, CaptureError> {
    let mut config = *env_config;
    config.step_limit = spec.horizon;
    let mut env = SteppingEnv::new(config, 0)?;
    env.set_terrain(terrain.clone());
    let mut start = *obs;
    start.desired_velocity = Vector2::zeros();
    let params = config.params;
    (0..env.grid().len())
        .map(|action| {
            env.reset_to(&start);
            rollout(&mut env, policy, &params, Some(action))
        })
        .collect()
}

/// [`verified_outcomes`] reduced to the capturable verdict per action.
pub fn verified_capture_region(
    policy: Policy<'_>,
    env_config: &EnvConfig,
    terrain: &Terrain,
    obs: &EnvObservation,
    spec: &RegionSpec,
) -> Result<Vec<bool>, CaptureError> {
    Ok(verified_outcomes(policy, env_config, terrain, obs, spec)?
        .iter()
        .map(|o| o.capturable(spec.speed_threshold))
        .collect())
}

/// Runs the environment to completion under the policy, with an optional
/// forced first action.
fn rollout(
    env: &mut SteppingEnv,
    policy: Policy<'_>,
    params: &PendulumParams,
    mut forced: Option<usize>,
) -> Result<ActionOutcome, CaptureError> {
    let mut steps = 0;
    loop {
        let obs = env.observation();
        let candidates = env.candidate_displacements();
        let action = match forced.take() {
            Some(index) => index,
            None => policy.action(&obs, &candidates, env.grid(), params)?,
        };
        let record = env.step(action)?;
        steps += 1;
        if record.terminal {
            return Ok(ActionOutcome {
                fell: true,
                final_speed: record.next_observation.com_velocity.norm(),
                steps,
            });
        }
        if env.is_done() {
            return Ok(ActionOutcome {
                fell: false,
                final_speed: record.next_observation.com_velocity.norm(),
                steps,
            });
        }
    }
}

/// Agreement between the network's capture region and the closed-form
/// recoverable set of the planar linear model, accumulated over a sample
/// of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticAgreement {
    /// Closed-form recoverable capture-point radius.
    pub analytic_bound: f64,
    /// Slack added to the radius when classifying actions.
    pub margin: f64,
    pub states: usize,
    /// Rollout-verified capturable (state, action) pairs.
    pub verified_actions: usize,
    /// …of which the landing lies within `bound + margin` of the
    /// end-of-step capture point.
    pub verified_inside: usize,
    /// Spearman correlation between Q and the landing's distance to the
    /// end-of-step capture point, over all (state, action) pairs. Positive
    /// when the network orders actions the way the linear model does.
    pub rank_correlation: f64,
}

impl AnalyticAgreement {
    /// Fraction of verified-capturable actions inside the analytic region.
    pub fn inside_fraction(&self) -> f64 {
        if self.verified_actions == 0 {
            return 0.0;
        }
        self.verified_inside as f64 / self.verified_actions as f64
    }
}

/// For each sampled state: verifies per-action capturability by rollout
/// (greedy continuation on flat ground) and classifies each action
/// against the analytic region — a landing is *inside* when it is within
/// `bound + margin` of where the capture point will be at the end of the
/// step. Planar networks only.
pub fn compare_with_analytic(
    net: &MlpParams,
    env_config: &EnvConfig,
    states: &[EnvObservation],
    margin: f64,
    spec: &RegionSpec,
) -> Result<AnalyticAgreement, CaptureError> {
    if net.input_dim() != Mode::OneD.net_input_dim() {
        return Err(CaptureError::NotPlanar {
            input_dim: net.input_dim(),
        });
    }
    let params = env_config.params;
    let omega = lipm_omega(&params)?;
    let growth = (omega * params.step_duration).exp();
    let grid = ActionGrid::for_mode(Mode::OneD);
    let max_step = grid
        .forward
        .iter()
        .fold(0.0f64, |acc, &dx| acc.max(dx.abs()));
    let bound = analytic_capture_bound(max_step, &params)?;
    let mut agreement = AnalyticAgreement {
        analytic_bound: bound,
        margin,
        states: states.len(),
        verified_actions: 0,
        verified_inside: 0,
        rank_correlation: 0.0,
    };
    let mut q_all = Vec::with_capacity(states.len() * grid.len());
    let mut dist_all = Vec::with_capacity(states.len() * grid.len());
    for obs in states {
        let heatmap = q_heatmap(net, obs, &grid, 0.0)?;
        let verified =
            verified_capture_region(Policy::Greedy(net), env_config, &Terrain::Flat, obs, spec)?;
        let dcm_end = icp_scalar(obs.planar_x(), &params)? * growth;
        for entry in &heatmap.entries {
            let distance = (entry.displacement.x - dcm_end).abs();
            q_all.push(entry.q_value);
            dist_all.push(distance);
            if verified[entry.index] {
                agreement.verified_actions += 1;
                if distance <= bound + margin {
                    agreement.verified_inside += 1;
                }
            }
        }
    }
    agreement.rank_correlation = spearman(&q_all, &dist_all);
    Ok(agreement)
}

/// Spearman rank correlation; ties get averaged ranks. Zero when either
/// side has no rank variance.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rank correlation needs paired samples");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && values[order[end]] == values[order[k]] {
            end += 1;
        }
        let rank = (k + end - 1) as f64 / 2.0; // average of tied positions
        for &idx in &order[k..end] {
            ranks[idx] = rank;
        }
        k = end;
    }
    ranks
}

/// Push-recovery rate: episodes start from the steady-gait pose with the
/// CoM velocity replaced by a random draw of magnitude at most
/// `speed_range` (uniform over that disk; over the interval in planar
/// mode), desired velocity zero. Recovered means no fall within the
/// spec's horizon and a final CoM speed below the spec's threshold.
/// Returns the recovering fraction.
pub fn recovery_rate(
    policy: Policy<'_>,
    env_config: &EnvConfig,
    pushes: usize,
    speed_range: f64,
    spec: &RegionSpec,
    seed: u64,
) -> Result<f64, CaptureError> {
    use rand::{Rng, SeedableRng};
    let mut config = *env_config;
    config.step_limit = spec.horizon;
    let mut env = SteppingEnv::new(config, 0)?;
    let params = config.params;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut survived = 0usize;
    for _ in 0..pushes {
        let stance = if rng.random_bool(0.5) {
            StanceFoot::Right
        } else {
            StanceFoot::Left
        };
        let start = steady_gait_start(&params, stance)?;
        let velocity = match config.mode {
            Mode::OneD if speed_range > 0.0 => {
                Vector2::new(rng.random_range(-speed_range..=speed_range), 0.0)
            }
            Mode::ThreeD if speed_range > 0.0 => {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = speed_range * rng.random_range(0.0..=1.0f64).sqrt();
                Vector2::new(radius * angle.cos(), radius * angle.sin())
            }
            _ => Vector2::zeros(),
        };
        let obs = EnvObservation {
            com_offset: start.com_offset,
            com_velocity: velocity,
            stance,
            desired_velocity: Vector2::zeros(),
        };
        env.reset_to(&obs);
        let outcome = rollout(&mut env, policy, &params, None)?;
        if outcome.capturable(spec.speed_threshold) {
            survived += 1;
        }
    }
    Ok(survived as f64 / pushes.max(1) as f64)
}

/// Velocity-tracking evaluation over seeded episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub desired_velocity: f64,
    pub episodes: usize,
    pub falls: usize,
    /// Per episode: mean |forward CoM velocity − desired| over the steps
    /// actually taken, end-of-step values.
    pub mean_errors: Vec<f64>,
}

impl TrackingReport {
    /// Mean of the per-episode errors.
    pub fn mean_error(&self) -> f64 {
        if self.mean_errors.is_empty() {
            return 0.0;
        }
        self.mean_errors.iter().sum::<f64>() / self.mean_errors.len() as f64
    }

    /// Fraction of episodes that neither fell nor exceeded `tolerance`
    /// mean velocity error.
    pub fn within_fraction(&self, tolerance: f64) -> f64 {
        if self.episodes == 0 {
            return 0.0;
        }
        // Fallen episodes are recorded with an infinite error.
        let ok = self
            .mean_errors
            .iter()
            .filter(|&&e| e <= tolerance)
            .count();
        ok as f64 / self.episodes as f64
    }
}

/// Runs `episodes` seeded episodes from the steady gait with the desired
/// forward velocity fixed at `v_des` (lateral zero), for the configured
/// step limit, and reports per-episode mean velocity errors. A fall
/// records an infinite error.
pub fn track_velocity(
    policy: Policy<'_>,
    env_config: &EnvConfig,
    v_des: f64,
    episodes: usize,
    seed: u64,
) -> Result<TrackingReport, CaptureError> {
    use rand::{Rng, SeedableRng};
    let mut env = SteppingEnv::new(*env_config, 0)?;
    let params = env_config.params;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = TrackingReport {
        desired_velocity: v_des,
        episodes,
        falls: 0,
        mean_errors: Vec::with_capacity(episodes),
    };
    for _ in 0..episodes {
        let stance = if rng.random_bool(0.5) {
            StanceFoot::Right
        } else {
            StanceFoot::Left
        };
        let start = steady_gait_start(&params, stance)?;
        let obs = EnvObservation {
            com_offset: start.com_offset,
            com_velocity: Vector2::new(start.com_velocity.x, start.com_velocity.y),
            stance,
            desired_velocity: Vector2::new(v_des, 0.0),
        };
        env.reset_to(&obs);
        let mut error_sum = 0.0;
        let mut steps = 0usize;
        let fell = loop {
            let obs = env.observation();
            let candidates = env.candidate_displacements();
            let action = policy.action(&obs, &candidates, env.grid(), &params)?;
            let record = env.step(action)?;
            error_sum += (record.next_observation.com_velocity.x - v_des).abs();
            steps += 1;
            if record.terminal {
                break true;
            }
            if env.is_done() {
                break false;
            }
        };
        if fell {
            report.falls += 1;
            report.mean_errors.push(f64::INFINITY);
        } else {
            report.mean_errors.push(error_sum / steps.max(1) as f64);
        }
    }
    Ok(report)
}

/// Fraction of seeded episodes (environment resets: random terrain,
/// state, and desired velocity per the config) that run to the step limit
/// without falling, planning only over admissible footholds — landing
/// cells present in the terrain with a height change within the config's
/// accepted range. An episode with no admissible foothold counts as a
/// fall.
pub fn survival_rate(
    policy: Policy<'_>,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<f64, CaptureError> {
    let mut env = SteppingEnv::new(*env_config, seed)?;
    let params = env_config.params;
    let window = env_config.terrain_height_range;
    let mut survived = 0usize;
    for _ in 0..episodes {
        env.reset();
        let ok = loop {
            let obs = env.observation();
            let candidates = env.candidate_displacements();
            let mask = env.admissibility_mask(window);
            let action =
                match policy.masked_action(&obs, &candidates, &mask, &params, env.steps_taken()) {
                    Ok(a) => a,
                    Err(CaptureError::NoFoothold { .. }) => break false,
                    Err(e) => return Err(e),
                };
            let record = env.step(action)?;
            if record.terminal {
                break false;
            }
            if env.is_done() {
                break true;
            }
        };
        if ok {
            survived += 1;
        }
    }
    Ok(survived as f64 / episodes.max(1) as f64)
}

/// One CSV line per action: planar displacement, landing height change,
/// Q value, admissibility, and the verified flag (blank when no
/// verification ran).
pub fn heatmap_csv(heatmap: &ActionHeatmap) -> String {
    let mut out = String::from("ax,ay,az,q,admissible,verified\n");
    for entry in &heatmap.entries {
        let verified = match entry.verified {
            None => String::new(),
            Some(flag) => u8::from(flag).to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            entry.displacement.x,
            entry.displacement.y,
            entry.displacement.z,
            entry.q_value,
            u8::from(entry.admissible),
            verified,
        ));
    }
    out
}
