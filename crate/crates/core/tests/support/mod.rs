//! Helpers shared by the integration suites: a hand-built reference network,
//! lazily trained checkpoints reused across tests, and an exhaustive
//! dynamic-programming capturability oracle.

#![allow(dead_code)]

use std::sync::OnceLock;

use deepq_stepper::dqn::{train, TrainConfig};
use deepq_stepper::pendulum::{lipm_omega, lipm_propagate, LipmState, PendulumParams};
use deepq_stepper::qnet::{MlpParams, MlpSpec};

/// Hidden stack small enough to train inside a CI budget.
pub fn ci_hidden() -> Vec<usize> {
    vec![128, 128, 128]
}

/// A width-2 ReLU network that computes `|action − end-of-step divergent
/// component|` exactly: the ideal one-step cost-to-go for planar stepping.
/// `relu(u) + relu(−u) = |u|` with `u` linear in the inputs, so the network
/// is exact (not approximate) and its greedy policy is the capture-point
/// controller. Useful as a known-good stand-in for a trained checkpoint.
pub fn dcm_distance_net(params: &PendulumParams) -> MlpParams {
    let omega = lipm_omega(params).expect("valid pendulum parameters");
    let growth = (omega * params.step_duration).exp();
    let spec = MlpSpec {
        input_dim: 3,
        hidden: vec![2],
    };
    let mut net = MlpParams::zeros(&spec);
    let w = [-growth, -growth / omega, 1.0]; // u = a − (x + v/ω)·e^{ωT}
    for (j, &wj) in w.iter().enumerate() {
        net.layers[0].weight[(0, j)] = wj;
        net.layers[0].weight[(1, j)] = -wj;
    }
    net.layers[1].weight[(0, 0)] = 1.0;
    net.layers[1].weight[(0, 1)] = 1.0;
    net
}

/// Training configuration behind [`trained_1d`].
pub fn train_config_1d() -> TrainConfig {
    let mut config = TrainConfig::one_d();
    config.hidden = ci_hidden();
    config.episodes = 4000;
    config.eval_interval = 0;
    config.seed = 0;
    config
}

/// Planar checkpoint shared by the acceptance criteria; trained once per
/// test process.
pub fn trained_1d() -> &'static MlpParams {
    static NET: OnceLock<MlpParams> = OnceLock::new();
    NET.get_or_init(|| {
        let result = train(&train_config_1d()).expect("planar training should succeed");
        result.online
    })
}

/// Training configuration behind [`trained_3d`].
pub fn train_config_3d() -> TrainConfig {
    use deepq_stepper::env::{EnvConfig, TerrainKind};
    let mut config = TrainConfig::default();
    config.env = EnvConfig::three_d(TerrainKind::SteppingStones);
    config.hidden = ci_hidden();
    config.episodes = 6000;
    config.eval_interval = 0;
    config.seed = 0;
    config
}

/// Full-mode checkpoint shared by the nightly acceptance criteria.
pub fn trained_3d() -> &'static MlpParams {
    static NET: OnceLock<MlpParams> = OnceLock::new();
    NET.get_or_init(|| {
        let result = train(&train_config_3d()).expect("full training should succeed");
        result.online
    })
}

/// Result of the dynamic-programming capturability sweep.
pub struct ViabilityOracle {
    /// Largest `|x + v/ω|` over states from which stepping keeps the
    /// pendulum alive forever.
    pub bound: f64,
    /// Oracle resolution expressed in the same units: one state cell maps
    /// to `dx + dv/ω` of divergent-component extent.
    pub xi_cell: f64,
    /// Fixpoint iterations until the surviving set stopped shrinking.
    pub iterations: usize,
    /// Number of surviving state cells.
    pub survivors: usize,
}

/// Exhaustive capturability bound for the constant-height pendulum with
/// displacement-capped steps, computed by viability iteration over a dense
/// state grid — no closed-form shortcuts.
///
/// Model: between exchanges the state flows with the exact hyperbolic
/// solution for `step_duration`; an exchange moves the foot by `u` (CoM
/// position and velocity are continuous), re-centring the offset to
/// `x(T) − u` with `|u| ≤ max_step`. A state survives when some action lands
/// it on a surviving cell; the set of survivors is iterated to a fixpoint
/// from "everything in the box survives". States leaving the box count as
/// fallen, which can only under-estimate the bound; the box is sized so the
/// boundary orbits (which excurse to `|v| ≈ 2.2` m/s) stay inside.
pub fn dp_capture_bound(params: &PendulumParams, max_step: f64) -> ViabilityOracle {
    let omega = lipm_omega(params).expect("valid pendulum parameters");

    const NX: usize = 241;
    const NV: usize = 321;
    const NU: usize = 161;
    let (x_lo, x_hi) = (-0.6_f64, 0.6_f64);
    let (v_lo, v_hi) = (-2.4_f64, 2.4_f64);
    let dx = (x_hi - x_lo) / (NX - 1) as f64;
    let dv = (v_hi - v_lo) / (NV - 1) as f64;
    let du = 2.0 * max_step / (NU - 1) as f64;

    // Flow is state-independent work, so propagate every cell once up front.
    // `landing_x[c]` is the end-of-step offset before the foot moves;
    // `landing_row[c]` the end-of-step velocity row, or NV for "out of box".
    let mut landing_x = vec![0.0_f64; NX * NV];
    let mut landing_row = vec![0_u16; NX * NV];
    for j in 0..NV {
        for i in 0..NX {
            let state = LipmState {
                offset: x_lo + i as f64 * dx,
                velocity: v_lo + j as f64 * dv,
            };
            let end = lipm_propagate(state, params.step_duration, params)
                .expect("valid pendulum parameters");
            let row = ((end.velocity - v_lo) / dv).round();
            landing_x[j * NX + i] = end.offset;
            landing_row[j * NX + i] =
                if (0.0..=(NV - 1) as f64).contains(&row) { row as u16 } else { NV as u16 };
        }
    }

    let mut alive = vec![true; NX * NV];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        for cell in 0..NX * NV {
            if !alive[cell] {
                continue;
            }
            let row = landing_row[cell] as usize;
            let survives = row < NV
                && (0..NU).any(|k| {
                    let u = -max_step + k as f64 * du;
                    let col = ((landing_x[cell] - u - x_lo) / dx).round();
                    (0.0..=(NX - 1) as f64).contains(&col)
                        && alive[row * NX + col as usize]
                });
            if !survives {
                alive[cell] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut bound = 0.0_f64;
    let mut survivors = 0;
    for j in 0..NV {
        for i in 0..NX {
            if alive[j * NX + i] {
                survivors += 1;
                let xi = (x_lo + i as f64 * dx) + (v_lo + j as f64 * dv) / omega;
                bound = bound.max(xi.abs());
            }
        }
    }

    ViabilityOracle {
        bound,
        xi_cell: dx + dv / omega,
        iterations,
        survivors,
    }
}
