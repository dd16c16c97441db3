//! Equality-constrained trajectory QPs, solved as direct KKT systems.
//!
//! Two small problems, both convex with only equality constraints, so the
//! KKT conditions are a single linear solve:
//!
//! * [`solve_z_trajectory`] — vertical CoM motion over one step: minimize
//!   the weighted sum of squared leg forces subject to symplectic-Euler
//!   dynamics and rest-to-rest boundary heights. Feeds the height-varying
//!   pendulum integrator.
//! * [`solve_swing_polynomial`] — a quintic swing-foot polynomial per axis
//!   pinned at both endpoints (position and velocity) and at a mid-swing
//!   via point, with the one leftover degree of freedom per axis resolving
//!   by minimum weighted squared coefficients.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::pendulum::{PendulumParams, ZProfile};

#[derive(Debug, Error, PartialEq)]
pub enum TrajOptError {
    #[error("invalid problem: {0}")]
    InvalidProblem(&'static str),
    #[error("KKT system is singular or produced non-finite values")]
    SolveFailed,
}

/// Minimizes `0.5 x' diag(2 h) x` subject to `A x = b` by solving the KKT
/// system `[diag(2h) A'; A 0] [x; lambda] = [0; b]` with a dense LU.
fn solve_equality_qp(
    hessian_diag: &[f64],
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<DVector<f64>, TrajOptError> {
    let n = hessian_diag.len();
    let m = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), m);
    let dim = n + m;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        kkt[(i, i)] = 2.0 * hessian_diag[i];
    }
    for r in 0..m {
        for c in 0..n {
            kkt[(c, n + r)] = a[(r, c)];
            kkt[(n + r, c)] = a[(r, c)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(dim);
    rhs.rows_mut(n, m).copy_from(b);
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs).ok_or(TrajOptError::SolveFailed)?;
    // Two rounds of iterative refinement: the quintic's Vandermonde-like
    // constraint rows leave the raw LU a digit or two short of the
    // residual budget.
    for _ in 0..2 {
        let residual = &rhs - &kkt * &sol;
        if residual.amax() < 1e-14 * rhs.amax().max(1.0) {
            break;
        }
        let correction = lu.solve(&residual).ok_or(TrajOptError::SolveFailed)?;
        sol += correction;
    }
    let x = sol.rows(0, n).into_owned();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(TrajOptError::SolveFailed);
    }
    Ok(x)
}

/// Vertical CoM trajectory problem for one step.
///
/// Decision variables are heights `h_0..h_T`, vertical velocities
/// `v_0..v_T` and leg forces `F_0..F_{T-1}` with `T = num_knots`
/// integration intervals of length `dt`. Dynamics follow the
/// symplectic-Euler rule used everywhere in the crate
/// (`v_{t+1} = v_t + dt (F_t/m - g)`, `h_{t+1} = h_t + dt v_{t+1}`); the
/// boundary pins rest at `initial_height` and rest at `final_height`. The
/// objective is `sum_t force_weight * F_t^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZQpProblem {
    pub initial_height: f64,
    pub final_height: f64,
    /// Number of integration intervals; the profile gets `num_knots + 1`
    /// height samples.
    pub num_knots: usize,
    pub dt: f64,
    pub mass: f64,
    pub gravity: f64,
    pub force_weight: f64,
}

impl ZQpProblem {
    /// Problem for one walker step: the step duration split into `num_knots`
    /// intervals, unit force weight.
    pub fn for_step(
        params: &PendulumParams,
        initial_height: f64,
        final_height: f64,
        num_knots: usize,
    ) -> Self {
        Self {
            initial_height,
            final_height,
            num_knots,
            dt: params.step_duration / num_knots as f64,
            mass: params.mass,
            gravity: params.gravity,
            force_weight: 1.0,
        }
    }

    fn validate(&self) -> Result<(), TrajOptError> {
        if self.num_knots < 2 {
            return Err(TrajOptError::InvalidProblem("num_knots must be at least 2"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(TrajOptError::InvalidProblem("dt must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(TrajOptError::InvalidProblem("mass must be positive"));
        }
        if !(self.gravity > 0.0) {
            return Err(TrajOptError::InvalidProblem("gravity must be positive"));
        }
        if !(self.force_weight > 0.0) {
            return Err(TrajOptError::InvalidProblem("force_weight must be positive"));
        }
        if !(self.initial_height > 0.0 && self.final_height > 0.0) {
            return Err(TrajOptError::InvalidProblem("boundary heights must be positive"));
        }
        Ok(())
    }
}

/// Solves the vertical-trajectory QP and returns the resulting profile.
///
/// The profile heights are re-integrated from the solved forces so the
/// result is bitwise consistent with [`ZProfile::validate`]; boundary
/// residuals stay at LU roundoff (well below 1e-8).
pub fn solve_z_trajectory(problem: &ZQpProblem) -> Result<ZProfile, TrajOptError> {
    problem.validate()?;
    let t = problem.num_knots;
    let dt = problem.dt;
    let (m, g) = (problem.mass, problem.gravity);
    // Variable layout: [h_0..h_T | v_0..v_T | F_0..F_{T-1}].
    let (hs, vs, fs) = (0, t + 1, 2 * (t + 1));
    let n = 3 * t + 2;
    let mut hess = vec![0.0; n];
    for i in 0..t {
        hess[fs + i] = problem.force_weight;
    }
    // Constraints: h_0, v_0, per-interval velocity and height recursions,
    // h_T, v_T.
    let n_con = 2 * t + 4;
    let mut a = DMatrix::<f64>::zeros(n_con, n);
    let mut b = DVector::<f64>::zeros(n_con);
    let mut row = 0;
    a[(row, hs)] = 1.0;
    b[row] = problem.initial_height;
    row += 1;
    a[(row, vs)] = 1.0;
    row += 1;
    for k in 0..t {
        // v_{k+1} - v_k - dt F_k / m = -dt g
        a[(row, vs + k + 1)] = 1.0;
        a[(row, vs + k)] = -1.0;
        a[(row, fs + k)] = -dt / m;
        b[row] = -dt * g;
        row += 1;
        // h_{k+1} - h_k - dt v_{k+1} = 0
        a[(row, hs + k + 1)] = 1.0;
        a[(row, hs + k)] = -1.0;
        a[(row, vs + k + 1)] = -dt;
        row += 1;
    }
    a[(row, hs + t)] = 1.0;
    b[row] = problem.final_height;
    row += 1;
    a[(row, vs + t)] = 1.0;
    row += 1;
    debug_assert_eq!(row, n_con);

    let x = solve_equality_qp(&hess, &a, &b)?;

    // Rebuild the profile by integrating the solved accelerations; this
    // keeps the stored heights exactly consistent with the stored
    // accelerations rather than trusting two separately-rounded solution
    // blocks to agree.
    let mut accelerations = Vec::with_capacity(t + 1);
    for k in 0..t {
        accelerations.push(x[fs + k] / m - g);
    }
    accelerations.push(accelerations[t - 1]);
    let mut heights = Vec::with_capacity(t + 1);
    let mut z = problem.initial_height;
    let mut v = 0.0;
    heights.push(z);
    for k in 0..t {
        v += dt * accelerations[k];
        z += dt * v;
        heights.push(z);
    }
    let profile = ZProfile {
        heights,
        accelerations,
        dt,
    };
    debug_assert!(profile.validate().is_ok());
    if (profile.heights[t] - problem.final_height).abs() > 1e-6 {
        return Err(TrajOptError::SolveFailed);
    }
    Ok(profile)
}

/// Swing-foot interpolation problem: move the foot from `start` to `end`
/// in `duration` seconds, at rest at both ends, passing through `via` at
/// mid-swing. `coeff_weights` are the positive penalties on the squared
/// polynomial coefficients that resolve the leftover degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingProblem {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub via: Vector3<f64>,
    pub duration: f64,
    pub coeff_weights: [f64; 6],
}

impl SwingProblem {
    pub fn new(start: Vector3<f64>, end: Vector3<f64>, via: Vector3<f64>, duration: f64) -> Self {
        Self {
            start,
            end,
            via,
            duration,
            coeff_weights: [1.0; 6],
        }
    }
}

/// Quintic polynomial per axis: `f_a(t) = sum_i coeffs[a][i] t^i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingPolynomial {
    pub coeffs: [[f64; 6]; 3],
    pub duration: f64,
}

impl SwingPolynomial {
    /// Position and velocity at time `t` (not clamped to the duration).
    pub fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let mut pos = Vector3::zeros();
        let mut vel = Vector3::zeros();
        for axis in 0..3 {
            let c = &self.coeffs[axis];
            // Horner for f and f'.
            let mut p = c[5];
            let mut d = 5.0 * c[5];
            for i in (1..5).rev() {
                p = p * t + c[i];
                d = d * t + i as f64 * c[i];
            }
            p = p * t + c[0];
            pos[axis] = p;
            vel[axis] = d;
        }
        (pos, vel)
    }
}

/// Planar midpoint of the two footholds, lifted `clearance` above the
/// higher endpoint — the default mid-swing via point.
pub fn default_via_point(start: Vector3<f64>, end: Vector3<f64>, clearance: f64) -> Vector3<f64> {
    Vector3::new(
        0.5 * (start.x + end.x),
        0.5 * (start.y + end.y),
        start.z.max(end.z) + clearance,
    )
}

/// Solves the swing QP: five equality constraints per axis
/// (`f(0) = start`, `f'(0) = 0`, `f(T) = end`, `f'(T) = 0`,
/// `f(T/2) = via`) on six coefficients, minimizing
/// `sum_i coeff_weights[i] * a_i^2`.
pub fn solve_swing_polynomial(problem: &SwingProblem) -> Result<SwingPolynomial, TrajOptError> {
    let t = problem.duration;
    if !(t > 0.0 && t.is_finite()) {
        return Err(TrajOptError::InvalidProblem("duration must be positive"));
    }
    if problem.coeff_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(TrajOptError::InvalidProblem("coefficient weights must be positive"));
    }
    let powers = |x: f64| {
        let mut p = [1.0; 6];
        for i in 1..6 {
            p[i] = p[i - 1] * x;
        }
        p
    };
    let pt = powers(t);
    let ph = powers(0.5 * t);
    let mut a = DMatrix::<f64>::zeros(5, 6);
    for i in 0..6 {
        a[(0, i)] = if i == 0 { 1.0 } else { 0.0 }; // f(0)
        a[(1, i)] = if i == 1 { 1.0 } else { 0.0 }; // f'(0)
        a[(2, i)] = pt[i]; // f(T)
        a[(3, i)] = if i == 0 { 0.0 } else { i as f64 * pt[i - 1] }; // f'(T)
        a[(4, i)] = ph[i]; // f(T/2)
    }
    let mut coeffs = [[0.0; 6]; 3];
    for axis in 0..3 {
        let b = DVector::from_column_slice(&[
            problem.start[axis],
            0.0,
            problem.end[axis],
            0.0,
            problem.via[axis],
        ]);
        let x = solve_equality_qp(&problem.coeff_weights, &a, &b)?;
        for i in 0..6 {
            coeffs[axis][i] = x[i];
        }
    }
    Ok(SwingPolynomial {
        coeffs,
        duration: t,
    })
}
