//! Inverted-pendulum dynamics for a point-mass walker.
//!
//! Two models live here. The linear inverted pendulum (LIPM) keeps the
//! center of mass at a constant height and has closed-form solutions used
//! for analytic capture bounds and as a baseline stepping policy. The
//! height-varying pendulum couples the horizontal axes to a prescribed
//! vertical trajectory ([`ZProfile`]) and is integrated numerically; it is
//! the dynamics the stepping environment actually runs.
//!
//! All states are expressed in the stance-foot frame: the stance foot is
//! the origin, x points forward, y points to the walker's left, z is up.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PendulumError {
    #[error("invalid pendulum parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("pendulum height must be strictly positive")]
    NonPositiveHeight,
    #[error("z profile must hold at least two samples")]
    ProfileTooShort,
    #[error("z profile heights and accelerations differ in length")]
    ProfileLengthMismatch,
    #[error("z profile is not consistent with its own accelerations")]
    ProfileInconsistent,
    #[error("pendulum height crossed zero at profile sample {index}")]
    HeightSingularity { index: usize },
}

/// Physical constants of the walker model.
///
/// Lengths are meters, durations seconds. `hip_half_width` is the lateral
/// distance from the pelvis center to a hip; the planar (1D) model uses a
/// point hip via [`PendulumParams::point_hip`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub gravity: f64,
    /// CoM height the walker returns to at the start of every step.
    pub nominal_height: f64,
    /// Hip-to-foot distance beyond which a step is kinematically invalid.
    pub max_leg_length: f64,
    /// Fixed duration of one step; steps fire on this clock, not on events.
    pub step_duration: f64,
    pub hip_half_width: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            gravity: 9.81,
            nominal_height: 0.35,
            max_leg_length: 0.4,
            step_duration: 0.2,
            hip_half_width: 0.065,
        }
    }
}

impl PendulumParams {
    /// Same walker with the hips collapsed to a point, for the planar model.
    pub fn point_hip(self) -> Self {
        Self {
            hip_half_width: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), PendulumError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(PendulumError::InvalidParameter("mass"));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(PendulumError::InvalidParameter("gravity"));
        }
        if !(self.nominal_height > 0.0 && self.nominal_height.is_finite()) {
            return Err(PendulumError::InvalidParameter("nominal_height"));
        }
        if !(self.max_leg_length > 0.0 && self.max_leg_length.is_finite()) {
            return Err(PendulumError::InvalidParameter("max_leg_length"));
        }
        if !(self.step_duration > 0.0 && self.step_duration.is_finite()) {
            return Err(PendulumError::InvalidParameter("step_duration"));
        }
        if !(self.hip_half_width >= 0.0 && self.hip_half_width.is_finite()) {
            return Err(PendulumError::InvalidParameter("hip_half_width"));
        }
        if self.nominal_height >= self.max_leg_length {
            return Err(PendulumError::InvalidParameter(
                "nominal_height must be below max_leg_length",
            ));
        }
        Ok(())
    }
}

/// Which foot carries the walker during the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StanceFoot {
    Right,
    Left,
}

impl StanceFoot {
    /// Sign convention used throughout: right = +1, left = -1.
    pub fn sign(self) -> f64 {
        match self {
            StanceFoot::Right => 1.0,
            StanceFoot::Left => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            StanceFoot::Right => StanceFoot::Left,
            StanceFoot::Left => StanceFoot::Right,
        }
    }

    pub fn from_sign(sign: f64) -> Option<Self> {
        if sign > 0.0 {
            Some(StanceFoot::Right)
        } else if sign < 0.0 {
            Some(StanceFoot::Left)
        } else {
            None
        }
    }
}

/// Walker state in the stance-foot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    /// CoM position relative to the stance foot.
    pub com_offset: Vector3<f64>,
    pub com_velocity: Vector3<f64>,
    pub stance: StanceFoot,
}

impl PendulumState {
    /// Reflection across the x-z plane, with the stance foot swapped.
    ///
    /// The walker is left-right symmetric, so dynamics, costs and learned
    /// values must be invariant under this map.
    pub fn mirror_y(&self) -> Self {
        Self {
            com_offset: Vector3::new(self.com_offset.x, -self.com_offset.y, self.com_offset.z),
            com_velocity: Vector3::new(
                self.com_velocity.x,
                -self.com_velocity.y,
                self.com_velocity.z,
            ),
            stance: self.stance.other(),
        }
    }
}

/// Planar constant-height pendulum state along a single horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipmState {
    /// CoM offset from the stance foot.
    pub offset: f64,
    pub velocity: f64,
}

/// Natural frequency `sqrt(g / nominal_height)` of the constant-height model.
pub fn lipm_omega(params: &PendulumParams) -> Result<f64, PendulumError> {
    if !(params.nominal_height > 0.0) {
        return Err(PendulumError::NonPositiveHeight);
    }
    if !(params.gravity > 0.0) {
        return Err(PendulumError::InvalidParameter("gravity"));
    }
    Ok((params.gravity / params.nominal_height).sqrt())
}

/// Closed-form LIPM flow: propagates a planar state by `duration`.
///
/// Solves `x'' = omega^2 x` exactly, so composing two propagations equals
/// one propagation over the summed duration.
pub fn lipm_propagate(
    state: LipmState,
    duration: f64,
    params: &PendulumParams,
) -> Result<LipmState, PendulumError> {
    let omega = lipm_omega(params)?;
    let (s, c) = {
        let a = omega * duration;
        (a.sinh(), a.cosh())
    };
    Ok(LipmState {
        offset: state.offset * c + state.velocity / omega * s,
        velocity: state.offset * omega * s + state.velocity * c,
    })
}

/// Instantaneous capture point (divergent component of motion) of a state:
/// horizontal offset plus velocity over omega, in the stance-foot frame.
pub fn icp_offset(state: &PendulumState, params: &PendulumParams) -> Result<Vector2<f64>, PendulumError> {
    let omega = lipm_omega(params)?;
    Ok(Vector2::new(
        state.com_offset.x + state.com_velocity.x / omega,
        state.com_offset.y + state.com_velocity.y / omega,
    ))
}

/// Capture point of a planar state.
pub fn icp_scalar(state: LipmState, params: &PendulumParams) -> Result<f64, PendulumError> {
    Ok(state.offset + state.velocity / lipm_omega(params)?)
}

/// The capture point evolves autonomously: `xi(t) = xi0 * exp(omega * t)`.
pub fn dcm_propagate(xi0: f64, duration: f64, params: &PendulumParams) -> Result<f64, PendulumError> {
    Ok(xi0 * (lipm_omega(params)? * duration).exp())
}

/// Largest capture-point magnitude from which a walker with maximum step
/// length `max_step` and fixed step period can still come to rest, given
/// unlimited steps: `max_step / (exp(omega T) - 1)`.
///
/// Derivation: stepping `a` relocates the origin, so `xi` maps to
/// `xi * exp(omega T) - a` each step. The boundary orbit is the fixed point
/// with `a = max_step`, i.e. `R * exp(omega T) - max_step = R`.
pub fn analytic_capture_bound(max_step: f64, params: &PendulumParams) -> Result<f64, PendulumError> {
    let omega = lipm_omega(params)?;
    if !(params.step_duration > 0.0) {
        return Err(PendulumError::InvalidParameter("step_duration"));
    }
    Ok(max_step / (omega * params.step_duration).exp_m1())
}

/// Start-of-step state of the periodic in-place gait: feet a hip width
/// apart, the CoM swaying between them, one exchange per `step_duration`.
///
/// At exchange the CoM sits over the pelvis center (half a hip width from
/// the stance foot on the swing side) moving toward the stance foot with
/// `vy = -y0 * omega * sinh(omega T) / (1 + cosh(omega T))`; one step
/// later the state recurs exactly, mirrored. Useful as the canonical
/// "walking calmly" initial condition.
pub fn steady_gait_start(
    params: &PendulumParams,
    stance: StanceFoot,
) -> Result<PendulumState, PendulumError> {
    let omega = lipm_omega(params)?;
    if !(params.step_duration > 0.0) {
        return Err(PendulumError::InvalidParameter("step_duration"));
    }
    let (s, c) = {
        let a = omega * params.step_duration;
        (a.sinh(), a.cosh())
    };
    let y = stance.sign() * params.hip_half_width;
    Ok(PendulumState {
        com_offset: Vector3::new(0.0, y, params.nominal_height),
        com_velocity: Vector3::new(0.0, -y * omega * s / (1.0 + c), 0.0),
        stance,
    })
}

/// Vertical CoM trajectory sampled on a uniform time grid.
///
/// `heights[k]` is the CoM height at time `k * dt`; `accelerations[k]` is
/// the vertical acceleration held constant over `[k dt, (k+1) dt)`. The
/// vectors have equal length; the last acceleration entry pads the sequence
/// and is never integrated. A profile is *consistent* when symplectic-Euler
/// integration of its accelerations from `(heights[0], rest)` reproduces
/// `heights` — [`ZProfile::validate`] checks exactly that, and both the QP
/// solver and [`ZProfile::refine`] produce consistent profiles by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub heights: Vec<f64>,
    pub accelerations: Vec<f64>,
    pub dt: f64,
}

impl ZProfile {
    /// Constant-height profile (zero vertical acceleration).
    pub fn constant(height: f64, samples: usize, dt: f64) -> Self {
        Self {
            heights: vec![height; samples],
            accelerations: vec![0.0; samples],
            dt,
        }
    }

    /// Duration covered by the sampled intervals.
    pub fn duration(&self) -> f64 {
        self.dt * (self.heights.len().saturating_sub(1)) as f64
    }

    /// Vertical velocity at the end of the profile implied by the
    /// accelerations (the profile starts at vertical rest).
    pub fn end_velocity(&self) -> f64 {
        let n = self.heights.len().saturating_sub(1);
        self.accelerations[..n].iter().sum::<f64>() * self.dt
    }

    pub fn validate(&self) -> Result<(), PendulumError> {
        if self.heights.len() < 2 {
            return Err(PendulumError::ProfileTooShort);
        }
        if self.heights.len() != self.accelerations.len() {
            return Err(PendulumError::ProfileLengthMismatch);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PendulumError::InvalidParameter("dt"));
        }
        let mut z = self.heights[0];
        let mut v = 0.0;
        let tol = 1e-9 * self.heights.len() as f64;
        for k in 0..self.heights.len() - 1 {
            v += self.dt * self.accelerations[k];
            z += self.dt * v;
            if (z - self.heights[k + 1]).abs() > tol {
                return Err(PendulumError::ProfileInconsistent);
            }
        }
        Ok(())
    }

    /// Resamples the profile at `substeps` times finer resolution by
    /// re-integrating the held accelerations with the same symplectic-Euler
    /// rule. Knot velocities are preserved exactly; for profiles whose
    /// accelerations sum to zero (rest-to-rest solutions of the z QP) the
    /// terminal height is preserved up to roundoff as well.
    pub fn refine(&self, substeps: usize) -> ZProfile {
        assert!(substeps >= 1, "refinement factor must be at least 1");
        if substeps == 1 {
            return self.clone();
        }
        let n = self.heights.len() - 1;
        let dt = self.dt / substeps as f64;
        let mut heights = Vec::with_capacity(n * substeps + 1);
        let mut accelerations = Vec::with_capacity(n * substeps + 1);
        let mut z = self.heights[0];
        let mut v = 0.0;
        heights.push(z);
        accelerations.push(self.accelerations[0]);
        for k in 0..n {
            let a = self.accelerations[k];
            for _ in 0..substeps {
                v += dt * a;
                z += dt * v;
                heights.push(z);
                accelerations.push(a);
            }
        }
        // Repair the padding convention: entry k describes interval k.
        for k in 0..n * substeps {
            accelerations[k] = self.accelerations[k / substeps];
        }
        let last = *accelerations.last().unwrap();
        *accelerations.last_mut().unwrap() = last;
        ZProfile {
            heights,
            accelerations,
            dt,
        }
    }
}

/// Integrates the height-varying pendulum over one step.
///
/// The horizontal axes obey `a_xy = offset_xy * (zdd + g) / z` with the
/// vertical motion prescribed by `profile`; integration is symplectic Euler
/// at the profile's own `dt` (velocity first, then position with the new
/// velocity). The state's vertical components are replaced by the profile,
/// which starts at vertical rest. The stance foot is unchanged: this is
/// the within-step flow, not the step exchange.
pub fn ipm_integrate(
    state: &PendulumState,
    profile: &ZProfile,
    params: &PendulumParams,
) -> Result<PendulumState, PendulumError> {
    profile.validate()?;
    params.validate()?;
    let n = profile.heights.len() - 1;
    let dt = profile.dt;
    let (mut x, mut y) = (state.com_offset.x, state.com_offset.y);
    let (mut vx, mut vy) = (state.com_velocity.x, state.com_velocity.y);
    let mut vz = 0.0;
    for k in 0..n {
        let z = profile.heights[k];
        if !(z > 0.0) {
            return Err(PendulumError::HeightSingularity { index: k });
        }
        let gain = (profile.accelerations[k] + params.gravity) / z;
        vx += dt * (x * gain);
        vy += dt * (y * gain);
        vz += dt * profile.accelerations[k];
        x += dt * vx;
        y += dt * vy;
    }
    let z_end = profile.heights[n];
    if !(z_end > 0.0) {
        return Err(PendulumError::HeightSingularity { index: n });
    }
    Ok(PendulumState {
        com_offset: Vector3::new(x, y, z_end),
        com_velocity: Vector3::new(vx, vy, vz),
        stance: state.stance,
    })
}
