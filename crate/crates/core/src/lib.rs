//! Learned footstep planning for inverted-pendulum walkers.
//!
//! The crate models a point-mass walker that balances by choosing where to
//! place its next foot. A small Q-network is trained by regression onto
//! one-step temporal-difference targets over a discrete grid of footstep
//! displacements; the
//! greedy policy over that grid then acts as a constant-cost reactive
//! stepping controller. Supporting pieces: closed-form linear
//! inverted-pendulum (LIPM) math and capture-point analytics
//! ([`pendulum`]), equality-constrained QPs for the vertical CoM and swing
//! trajectories ([`trajopt`]), the stepping environment with procedural
//! terrain ([`env`]), the function approximator ([`qnet`]), training
//! ([`dqn`]), greedy planning over the action grid ([`planner`]), and
//! capture-region analysis against the analytic LIPM bound ([`capture`]).

pub mod capture;
pub mod cli;
pub mod dqn;
pub mod env;
pub mod pendulum;
pub mod planner;
pub mod qnet;
pub mod trajopt;
