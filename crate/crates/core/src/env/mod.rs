//! The footstep MDP: states, the discrete action grid, step transitions,
//! costs, and the episodic environment the learner interacts with.
//!
//! One environment step covers one full walker step: the CoM swings over
//! the stance foot for the fixed step duration while the swing foot
//! relocates by the chosen displacement, then the feet exchange roles.
//! Everything is expressed in the stance-foot frame, which is what makes a
//! learned value function translation-invariant over terrain.

mod terrain;

pub use terrain::{GridTerrain, ProceduralTerrain, Terrain, TerrainFileError, TerrainKind};

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pendulum::{
    ipm_integrate, lipm_propagate, LipmState, PendulumError, PendulumParams, PendulumState,
    StanceFoot,
};
use crate::trajopt::{solve_z_trajectory, TrajOptError, ZQpProblem};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action index {index} out of range for a grid of {len}")]
    ActionOutOfRange { index: usize, len: usize },
    #[error("episode already finished; reset the environment")]
    EpisodeOver,
    #[error("invalid environment config: {0}")]
    InvalidConfig(&'static str),
    #[error("state became non-finite")]
    NonFiniteState,
    #[error(transparent)]
    TrajOpt(#[from] TrajOptError),
    #[error(transparent)]
    Pendulum(#[from] PendulumError),
}

/// Planar (x-only) or full 3D stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneD,
    ThreeD,
}

impl Mode {
    /// Length of the Q-network input: observation plus action displacement.
    pub fn net_input_dim(self) -> usize {
        match self {
            Mode::OneD => 3,   // offset_x, vel_x, action_x
            Mode::ThreeD => 11, // 8-dim observation + 3-dim displacement
        }
    }

    pub fn from_net_input_dim(dim: usize) -> Option<Mode> {
        match dim {
            3 => Some(Mode::OneD),
            11 => Some(Mode::ThreeD),
            _ => None,
        }
    }
}

/// The discrete menu of footstep displacements.
///
/// Forward displacements are symmetric around zero. Lateral entries are
/// non-negative magnitudes measured away from the stance side: the
/// executed lateral displacement is `stance.sign() * lateral[i]`, so the
/// swing foot always lands on its own side and the same action index means
/// the mirrored motion for the mirrored stance. The lateral spacing is
/// geometric — resolution matters most near the stance foot, where lateral
/// capture distances are, while the far edge only needs to exist.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub mode: Mode,
    pub forward: Vec<f64>,
    /// Empty in planar mode.
    pub lateral: Vec<f64>,
}

impl ActionGrid {
    pub fn for_mode(mode: Mode) -> ActionGrid {
        let forward: Vec<f64> = (0..11).map(|k| -0.4 + 0.08 * k as f64).collect();
        let lateral = match mode {
            Mode::OneD => Vec::new(),
            Mode::ThreeD => {
                let (min, max) = (0.02, 0.43);
                let ratio = (max / min) as f64;
                let mut lat = vec![0.0];
                for k in 0..8 {
                    lat.push(min * ratio.powf(k as f64 / 7.0));
                }
                lat
            }
        };
        ActionGrid {
            mode,
            forward,
            lateral,
        }
    }

    pub fn len(&self) -> usize {
        if self.lateral.is_empty() {
            self.forward.len()
        } else {
            self.forward.len() * self.lateral.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Horizontal displacement `(dx, dy)` executed by `index` under the
    /// given stance. Indices enumerate forward-major, lateral-minor.
    pub fn planar(&self, index: usize, stance: StanceFoot) -> (f64, f64) {
        if self.lateral.is_empty() {
            (self.forward[index], 0.0)
        } else {
            let f = index / self.lateral.len();
            let l = index % self.lateral.len();
            (self.forward[f], stance.sign() * self.lateral[l])
        }
    }

    /// Index of the grid entry closest to the requested planar
    /// displacement (lateral matched by magnitude on the stance side).
    pub fn nearest(&self, dx: f64, dy: f64, stance: StanceFoot) -> usize {
        let f = nearest_index(&self.forward, dx);
        if self.lateral.is_empty() {
            f
        } else {
            let l = nearest_index(&self.lateral, stance.sign() * dy);
            f * self.lateral.len() + l
        }
    }
}

fn nearest_index(values: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in values.iter().enumerate() {
        let d = (v - target).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// What the policy sees: the stance-frame CoM state, stance side, and the
/// commanded walking velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvObservation {
    /// CoM position relative to the stance foot.
    pub com_offset: Vector3<f64>,
    /// Horizontal CoM velocity.
    pub com_velocity: Vector2<f64>,
    pub stance: StanceFoot,
    pub desired_velocity: Vector2<f64>,
}

impl EnvObservation {
    /// Flat encoding: `[ox, oy, oz, vx, vy, stance_sign, vdx, vdy]`.
    pub fn to_vector(&self) -> [f64; 8] {
        [
            self.com_offset.x,
            self.com_offset.y,
            self.com_offset.z,
            self.com_velocity.x,
            self.com_velocity.y,
            self.stance.sign(),
            self.desired_velocity.x,
            self.desired_velocity.y,
        ]
    }

    pub fn from_vector(v: &[f64; 8]) -> Option<EnvObservation> {
        Some(EnvObservation {
            com_offset: Vector3::new(v[0], v[1], v[2]),
            com_velocity: Vector2::new(v[3], v[4]),
            stance: StanceFoot::from_sign(v[5])?,
            desired_velocity: Vector2::new(v[6], v[7]),
        })
    }

    pub fn mirror_y(&self) -> EnvObservation {
        EnvObservation {
            com_offset: Vector3::new(self.com_offset.x, -self.com_offset.y, self.com_offset.z),
            com_velocity: Vector2::new(self.com_velocity.x, -self.com_velocity.y),
            stance: self.stance.other(),
            desired_velocity: Vector2::new(self.desired_velocity.x, -self.desired_velocity.y),
        }
    }

    /// The x-axis view used by the planar model and the LIPM baseline.
    pub fn planar_x(&self) -> LipmState {
        LipmState {
            offset: self.com_offset.x,
            velocity: self.com_velocity.x,
        }
    }

    pub fn state(&self) -> PendulumState {
        PendulumState {
            com_offset: self.com_offset,
            com_velocity: Vector3::new(self.com_velocity.x, self.com_velocity.y, 0.0),
            stance: self.stance,
        }
    }
}

/// Q-network input for one (observation, action) pair.
pub fn net_input(obs: &EnvObservation, displacement: &Vector3<f64>, mode: Mode) -> Vec<f64> {
    let mut out = vec![0.0; mode.net_input_dim()];
    write_net_input(&mut out, obs, displacement, mode);
    out
}

/// Writes the Q-network input into a caller-provided slice (the batched
/// paths assemble whole gemm inputs this way without reallocating).
pub fn write_net_input(out: &mut [f64], obs: &EnvObservation, displacement: &Vector3<f64>, mode: Mode) {
    match mode {
        Mode::OneD => {
            out[0] = obs.com_offset.x;
            out[1] = obs.com_velocity.x;
            out[2] = displacement.x;
        }
        Mode::ThreeD => {
            out[..8].copy_from_slice(&obs.to_vector());
            out[8] = displacement.x;
            out[9] = displacement.y;
            out[10] = displacement.z;
        }
    }
}

/// Per-step cost weights. Defaults: hip tracking 0.5, velocity tracking
/// 3.0, step magnitude 1.5, violation penalty 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub hip_tracking: f64,
    pub velocity_tracking: f64,
    pub step_magnitude: f64,
    pub violation: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            hip_tracking: 0.5,
            velocity_tracking: 3.0,
            step_magnitude: 1.5,
            violation: 100.0,
        }
    }
}

/// Cost of one completed step.
///
/// `hip_offset` is the horizontal offset of the new stance hip from the
/// new stance foot; penalizing it pulls the foot under the hip rather
/// than under the CoM. All terms are L1 — the learned values stay finite
/// and comparable across very different state magnitudes.
pub fn step_cost(
    next_obs: &EnvObservation,
    hip_offset: Vector2<f64>,
    displacement: Vector3<f64>,
    violated: bool,
    weights: &CostWeights,
) -> f64 {
    let vel_err = next_obs.com_velocity - next_obs.desired_velocity;
    weights.hip_tracking * (hip_offset.x.abs() + hip_offset.y.abs())
        + weights.velocity_tracking * (vel_err.x.abs() + vel_err.y.abs())
        + weights.step_magnitude
            * (displacement.x.abs() + displacement.y.abs() + displacement.z.abs())
        + if violated { weights.violation } else { 0.0 }
}

/// Horizontal offset of the stance-side hip from the stance foot.
pub fn hip_offset(com_offset: Vector3<f64>, stance: StanceFoot, params: &PendulumParams) -> Vector2<f64> {
    Vector2::new(
        com_offset.x,
        com_offset.y - stance.sign() * params.hip_half_width,
    )
}

/// True when the stance-hip-to-foot distance exceeds the leg length — the
/// configuration is unreachable and the step counts as a fall.
pub fn kinematic_violation(
    com_offset: Vector3<f64>,
    stance: StanceFoot,
    params: &PendulumParams,
) -> bool {
    let hip = hip_offset(com_offset, stance, params);
    let d2 = hip.x * hip.x + hip.y * hip.y + com_offset.z * com_offset.z;
    d2 > params.max_leg_length * params.max_leg_length
}

/// One environment transition, stored in the replay buffer.
///
/// `next_candidates` carries the displacement of every grid action from
/// the successor state with terrain already resolved, so bootstrapped
/// targets can be computed later without re-querying the terrain the
/// episode ran on. Empty exactly when `terminal`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub observation: EnvObservation,
    pub action_index: usize,
    pub displacement: Vector3<f64>,
    pub cost: f64,
    pub next_observation: EnvObservation,
    pub next_candidates: Vec<Vector3<f64>>,
    /// The walker fell; the episode ends and the value does not bootstrap.
    pub terminal: bool,
    /// The episode hit its step limit; the value still bootstraps.
    pub truncated: bool,
}

/// Environment configuration. `Default` gives the full 3D walker on flat
/// ground; [`EnvConfig::one_d`] the planar model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: Mode,
    pub params: PendulumParams,
    pub cost_weights: CostWeights,
    /// Integration intervals of the vertical-trajectory QP.
    pub zqp_knots: usize,
    /// Substeps per QP interval when integrating the pendulum; 200 puts
    /// the integrator at dt = 5e-5 where the flat-ground step matches the
    /// LIPM closed form to well under 1e-4 m.
    pub integration_refinement: usize,
    /// Steps per episode before truncation.
    pub step_limit: usize,
    pub terrain: TerrainKind,
    /// Admissible-cell fraction for stepping-stone terrain.
    pub stone_density: f64,
    pub terrain_cell: f64,
    /// Cell heights are uniform in `[-terrain_height_range, +range]`; the
    /// same value bounds the height change a planned step may accept.
    pub terrain_height_range: f64,
    /// Initial CoM speed is uniform per axis in `[-range, +range]`.
    pub init_speed_range: f64,
    pub init_desired_speed_range: f64,
    /// Initial CoM offset is proposed uniform per axis in `[-range, +range]`
    /// and rejection-sampled to kinematic validity. Tightening it
    /// concentrates episodes on states a walker actually visits; at the
    /// default the proposal box covers the whole reachable disc.
    #[serde(default = "default_init_offset_range")]
    pub init_offset_range: f64,
}

fn default_init_offset_range() -> f64 {
    0.3
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            mode: Mode::ThreeD,
            params: PendulumParams::default(),
            cost_weights: CostWeights::default(),
            zqp_knots: 20,
            integration_refinement: 200,
            step_limit: 10,
            terrain: TerrainKind::Flat,
            stone_density: 0.6,
            terrain_cell: 0.1,
            terrain_height_range: 0.07,
            init_speed_range: 1.0,
            init_desired_speed_range: 0.7,
            init_offset_range: default_init_offset_range(),
        }
    }
}

impl EnvConfig {
    /// Planar walker: point hip, x-axis only, flat ground, zero desired
    /// velocity — the setting for studying pure capture behavior.
    pub fn one_d() -> Self {
        Self {
            mode: Mode::OneD,
            params: PendulumParams::default().point_hip(),
            init_desired_speed_range: 0.0,
            ..Self::default()
        }
    }

    pub fn three_d(terrain: TerrainKind) -> Self {
        Self {
            terrain,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.params
            .validate()
            .map_err(|_| EnvError::InvalidConfig("pendulum parameters"))?;
        if self.mode == Mode::OneD && self.terrain != TerrainKind::Flat {
            return Err(EnvError::InvalidConfig("planar mode requires flat terrain"));
        }
        if self.zqp_knots < 2 {
            return Err(EnvError::InvalidConfig("zqp_knots must be at least 2"));
        }
        if self.integration_refinement == 0 {
            return Err(EnvError::InvalidConfig("integration_refinement must be positive"));
        }
        if self.step_limit == 0 {
            return Err(EnvError::InvalidConfig("step_limit must be positive"));
        }
        if !(self.stone_density > 0.0 && self.stone_density <= 1.0) {
            return Err(EnvError::InvalidConfig("stone_density must be in (0, 1]"));
        }
        if !(self.terrain_cell > 0.0) {
            return Err(EnvError::InvalidConfig("terrain_cell must be positive"));
        }
        if !(self.terrain_height_range >= 0.0) {
            return Err(EnvError::InvalidConfig("terrain_height_range must be non-negative"));
        }
        if !(self.init_speed_range >= 0.0 && self.init_desired_speed_range >= 0.0) {
            return Err(EnvError::InvalidConfig("speed ranges must be non-negative"));
        }
        if !(self.init_offset_range >= 0.0) {
            return Err(EnvError::InvalidConfig("init_offset_range must be non-negative"));
        }
        Ok(())
    }
}

/// The episodic stepping environment.
///
/// Owns its RNG; with a fixed seed, resets and transitions are
/// bit-reproducible. All randomness happens in [`SteppingEnv::reset`] —
/// transitions themselves are deterministic.
#[derive(Debug, Clone)]
pub struct SteppingEnv {
    config: EnvConfig,
    grid: ActionGrid,
    rng: ChaCha8Rng,
    terrain: Terrain,
    state: PendulumState,
    foot_world: Vector3<f64>,
    desired_velocity: Vector2<f64>,
    steps_taken: usize,
    done: bool,
}

impl SteppingEnv {
    pub fn new(config: EnvConfig, seed: u64) -> Result<SteppingEnv, EnvError> {
        let grid = ActionGrid::for_mode(config.mode);
        Self::with_grid(config, grid, seed)
    }

    /// Environment over a custom action grid (analysis code probes
    /// off-menu displacements this way; learning always uses the default
    /// grid for the mode).
    pub fn with_grid(config: EnvConfig, grid: ActionGrid, seed: u64) -> Result<SteppingEnv, EnvError> {
        config.validate()?;
        let mut env = SteppingEnv {
            config,
            grid,
            rng: ChaCha8Rng::seed_from_u64(seed),
            terrain: Terrain::Flat,
            state: PendulumState {
                com_offset: Vector3::new(0.0, 0.0, config.params.nominal_height),
                com_velocity: Vector3::zeros(),
                stance: StanceFoot::Right,
            },
            foot_world: Vector3::zeros(),
            desired_velocity: Vector2::zeros(),
            steps_taken: 0,
            done: false,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    /// Replaces the terrain (analysis over fixed or file-loaded ground).
    /// The walker is re-anchored with its stance foot on the new terrain.
    pub fn set_terrain(&mut self, terrain: Terrain) {
        self.terrain = terrain;
        self.foot_world = Vector3::new(0.0, 0.0, self.terrain.height(0.0, 0.0));
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn foot_world(&self) -> Vector3<f64> {
        self.foot_world
    }

    /// Samples a fresh episode: new terrain (procedural kinds draw a new
    /// seed), both stances equally likely, CoM offset rejected until
    /// kinematically valid, per-axis uniform initial and desired
    /// velocities. Draw order is fixed and documented by the
    /// implementation: terrain seed, stance, offset (rejection loop),
    /// velocity, desired velocity.
    pub fn reset(&mut self) -> EnvObservation {
        let tseed = self.rng.random::<u64>();
        self.terrain = match self.config.terrain {
            TerrainKind::Flat => Terrain::Flat,
            TerrainKind::RandomHeight => Terrain::Procedural(ProceduralTerrain {
                seed: tseed,
                cell_size: self.config.terrain_cell,
                height_range: self.config.terrain_height_range,
                stone_density: 1.0,
            }),
            TerrainKind::SteppingStones => Terrain::Procedural(ProceduralTerrain {
                seed: tseed,
                cell_size: self.config.terrain_cell,
                height_range: self.config.terrain_height_range,
                stone_density: self.config.stone_density,
            }),
        };
        let params = &self.config.params;
        let stance = if self.rng.random_bool(0.5) {
            StanceFoot::Right
        } else {
            StanceFoot::Left
        };
        let r = self.config.init_offset_range;
        let draw_offset = |rng: &mut ChaCha8Rng| {
            if r > 0.0 {
                rng.random_range(-r..r)
            } else {
                0.0
            }
        };
        let offset = loop {
            let x = draw_offset(&mut self.rng);
            let y = match self.config.mode {
                Mode::OneD => 0.0,
                Mode::ThreeD => draw_offset(&mut self.rng),
            };
            let candidate = Vector3::new(x, y, params.nominal_height);
            if !kinematic_violation(candidate, stance, params) {
                break candidate;
            }
        };
        let s = self.config.init_speed_range;
        let vx = if s > 0.0 { self.rng.random_range(-s..s) } else { 0.0 };
        let vy = match self.config.mode {
            Mode::OneD => 0.0,
            Mode::ThreeD => {
                if s > 0.0 {
                    self.rng.random_range(-s..s)
                } else {
                    0.0
                }
            }
        };
        let d = self.config.init_desired_speed_range;
        self.desired_velocity = match self.config.mode {
            Mode::OneD => Vector2::zeros(),
            Mode::ThreeD => {
                if d > 0.0 {
                    Vector2::new(self.rng.random_range(-d..d), self.rng.random_range(-d..d))
                } else {
                    Vector2::zeros()
                }
            }
        };
        self.state = PendulumState {
            com_offset: offset,
            com_velocity: Vector3::new(vx, vy, 0.0),
            stance,
        };
        self.foot_world = Vector3::new(0.0, 0.0, self.terrain.height(0.0, 0.0));
        self.steps_taken = 0;
        self.done = false;
        self.observation()
    }

    /// Starts an episode from an exact observation, keeping the current
    /// terrain. The stance foot is re-anchored at the world origin.
    pub fn reset_to(&mut self, obs: &EnvObservation) -> EnvObservation {
        self.state = obs.state();
        self.desired_velocity = obs.desired_velocity;
        self.foot_world = Vector3::new(0.0, 0.0, self.terrain.height(0.0, 0.0));
        self.steps_taken = 0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> EnvObservation {
        EnvObservation {
            com_offset: self.state.com_offset,
            com_velocity: Vector2::new(self.state.com_velocity.x, self.state.com_velocity.y),
            stance: self.state.stance,
            desired_velocity: self.desired_velocity,
        }
    }

    /// Displacement of every grid action from the current state, terrain
    /// resolved: `(dx, dy)` from the grid, `dz` the ground height change.
    pub fn candidate_displacements(&self) -> Vec<Vector3<f64>> {
        (0..self.grid.len())
            .map(|i| self.displacement_for(i))
            .collect()
    }

    fn displacement_for(&self, index: usize) -> Vector3<f64> {
        let (dx, dy) = self.grid.planar(index, self.state.stance);
        let nx = self.foot_world.x + dx;
        let ny = self.foot_world.y + dy;
        let dz = self.terrain.height(nx, ny) - self.foot_world.z;
        Vector3::new(dx, dy, dz)
    }

    /// Which grid actions may be planned right now: the landing cell must
    /// be admissible and the height change within `window`.
    pub fn admissibility_mask(&self, window: f64) -> Vec<bool> {
        (0..self.grid.len())
            .map(|i| {
                let (dx, dy) = self.grid.planar(i, self.state.stance);
                let nx = self.foot_world.x + dx;
                let ny = self.foot_world.y + dy;
                let dz = self.terrain.height(nx, ny) - self.foot_world.z;
                self.terrain.admissible(nx, ny) && dz.abs() <= window + 1e-12
            })
            .collect()
    }

    /// Executes one step by grid index.
    pub fn step(&mut self, action_index: usize) -> Result<TransitionRecord, EnvError> {
        if action_index >= self.grid.len() {
            return Err(EnvError::ActionOutOfRange {
                index: action_index,
                len: self.grid.len(),
            });
        }
        let displacement = self.displacement_for(action_index);
        self.step_displacement(action_index, displacement)
    }

    fn step_displacement(
        &mut self,
        action_index: usize,
        displacement: Vector3<f64>,
    ) -> Result<TransitionRecord, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let params = self.config.params;
        let observation = self.observation();

        // Swing the CoM over the current stance foot for the step duration.
        let end_state = match self.config.mode {
            Mode::OneD => {
                let planar = lipm_propagate(observation.planar_x(), params.step_duration, &params)?;
                PendulumState {
                    com_offset: Vector3::new(planar.offset, 0.0, params.nominal_height),
                    com_velocity: Vector3::new(planar.velocity, 0.0, 0.0),
                    stance: self.state.stance,
                }
            }
            Mode::ThreeD => {
                let problem = ZQpProblem::for_step(
                    &params,
                    self.state.com_offset.z,
                    displacement.z + params.nominal_height,
                    self.config.zqp_knots,
                );
                let profile =
                    solve_z_trajectory(&problem)?.refine(self.config.integration_refinement);
                ipm_integrate(&self.state, &profile, &params)?
            }
        };

        // Exchange feet: the new stance foot sits at the displacement, so
        // the frame translates and the stance side flips. Velocity is
        // continuous.
        let new_stance = self.state.stance.other();
        let new_offset = end_state.com_offset - displacement;
        let new_state = PendulumState {
            com_offset: new_offset,
            com_velocity: end_state.com_velocity,
            stance: new_stance,
        };
        if !(new_state.com_offset.iter().all(|v| v.is_finite())
            && new_state.com_velocity.iter().all(|v| v.is_finite()))
        {
            return Err(EnvError::NonFiniteState);
        }

        let new_foot_world = self.foot_world + displacement;
        let into_hole = !self.terrain.admissible(new_foot_world.x, new_foot_world.y);
        let violated = kinematic_violation(new_offset, new_stance, &params) || into_hole;

        self.state = new_state;
        self.foot_world = new_foot_world;
        self.steps_taken += 1;
        let terminal = violated;
        let truncated = !terminal && self.steps_taken >= self.config.step_limit;
        self.done = terminal || truncated;

        let next_observation = self.observation();
        let cost = step_cost(
            &next_observation,
            hip_offset(new_offset, new_stance, &params),
            displacement,
            violated,
            &self.config.cost_weights,
        );
        let next_candidates = if terminal {
            Vec::new()
        } else {
            self.candidate_displacements()
        };
        Ok(TransitionRecord {
            observation,
            action_index,
            displacement,
            cost,
            next_observation,
            next_candidates,
            terminal,
            truncated,
        })
    }
}
