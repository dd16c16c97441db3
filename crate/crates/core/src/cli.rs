//! Command-line interface: training runs with reproducible artifacts, and
//! analysis commands (scenario evaluation, rollouts, Q heatmaps with
//! verified capture overlays, analytic-region comparison) over saved
//! checkpoints or the baseline stepper.
//!
//! Results go to stdout as JSON (or to `--out` files as CSV); progress
//! chatter goes to stderr. Every artifact is a pure function of the
//! config and seed, so re-running a command reproduces its outputs byte
//! for byte. Exit codes: 0 on success, 1 on runtime failure, 2 on usage
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::capture::{
    compare_with_analytic, heatmap_csv, offset_plate, q_heatmap, recovery_rate, survival_rate,
    track_velocity, verified_capture_region, Policy, RegionSpec,
};
use crate::dqn::{train_with, EvalPoint, EvalSummary, TrainConfig, TrainResult};
use crate::env::{ActionGrid, EnvConfig, EnvObservation, Mode, SteppingEnv, Terrain, TerrainKind};
use crate::planner::greedy_action;
use crate::qnet::{load_checkpoint, save_checkpoint, MlpParams, MlpSpec};

/// Environment variable overriding the default run-directory root.
pub const RUNS_ROOT_ENV: &str = "DEEPQ_STEPPER_RUNS";

#[derive(Parser)]
#[command(
    name = "deepq-stepper",
    version,
    about = "Learned footstep planning for inverted-pendulum walkers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a stepping value network and write a run directory.
    Train(TrainArgs),
    /// Run a seeded evaluation scenario and print a JSON report.
    Eval(EvalArgs),
    /// Roll one episode and print each step as a JSON line.
    Rollout(RolloutArgs),
    /// Score every footstep action at one state and export the heatmap.
    Heatmap(HeatmapArgs),
    /// Compare a planar network's capture region with the closed form.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Forward-only stepping on flat ground.
    #[value(name = "1d")]
    OneD,
    /// Full planar stepping with terrain.
    #[value(name = "3d")]
    ThreeD,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::OneD => Mode::OneD,
            ModeArg::ThreeD => Mode::ThreeD,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TerrainArg {
    Flat,
    RandomHeight,
    SteppingStones,
}

impl From<TerrainArg> for TerrainKind {
    fn from(t: TerrainArg) -> TerrainKind {
        match t {
            TerrainArg::Flat => TerrainKind::Flat,
            TerrainArg::RandomHeight => TerrainKind::RandomHeight,
            TerrainArg::SteppingStones => TerrainKind::SteppingStones,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NetArg {
    /// 3 hidden layers of 128.
    Compact,
    /// 7 hidden layers of 512.
    Full,
}

#[derive(Args)]
struct TrainArgs {
    /// Full training config as JSON; overrides the preset flags below.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "1d")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "flat")]
    terrain: TerrainArg,
    #[arg(long, value_enum, default_value = "compact")]
    net: NetArg,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run directory (default: <root>/<mode>-<terrain>-<net>-s<seed>,
    /// root "runs" or $DEEPQ_STEPPER_RUNS).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also save the network every N episodes (0 = final only).
    #[arg(long, default_value_t = 0, value_name = "N")]
    checkpoint_interval: usize,
    #[arg(long)]
    eval_interval: Option<usize>,
    #[arg(long)]
    eval_episodes: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    /// Hold a commanded forward velocity from the steady gait.
    Tracking,
    /// Absorb random velocity pushes and come to a stop.
    Recovery,
    /// Cross stepping stones without falling, planning only over
    /// admissible footholds.
    Stones,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Commanded forward velocity (tracking).
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    v_des: f64,
    /// Maximum push speed per horizontal axis (recovery).
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Admissible-cell fraction (stones).
    #[arg(long, default_value_t = 0.6)]
    density: f64,
    /// Episodes (default: tracking 50, recovery 100, stones 50).
    #[arg(long)]
    episodes: Option<usize>,
    /// Steps per episode (default: recovery 10, others 15).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PolicyArgs {
    /// Value-network checkpoint to drive the policy.
    #[arg(long, value_name = "FILE", conflicts_with = "baseline")]
    checkpoint: Option<PathBuf>,
    /// Use the closed-form capture-point stepper instead of a network.
    #[arg(long, requires = "mode")]
    baseline: bool,
    /// Stepping mode; required with --baseline, inferred from the
    /// checkpoint otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl PolicyArgs {
    /// Loads the network (if any) and resolves the mode.
    fn resolve(&self) -> Result<(Option<MlpParams>, Mode)> {
        if self.baseline {
            let mode = self
                .mode
                .context("--baseline needs an explicit --mode")?;
            return Ok((None, mode.into()));
        }
        let path = self
            .checkpoint
            .as_ref()
            .context("either --checkpoint or --baseline is required")?;
        let net = load_net(path)?;
        let inferred = Mode::from_net_input_dim(net.input_dim())
            .with_context(|| format!("checkpoint input width {}", net.input_dim()))?;
        if let Some(flag) = self.mode {
            if Mode::from(flag) != inferred {
                bail!("--mode disagrees with the checkpoint's input width");
            }
        }
        Ok((Some(net), inferred))
    }
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, value_enum, default_value = "flat")]
    terrain: TerrainArg,
    /// Initial observation as a JSON array
    /// [ox, oy, oz, vx, vy, stance, vdx, vdy] (stance +1 right, -1 left);
    /// omitted = a seeded random reset.
    #[arg(long, value_name = "JSON")]
    state: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// State to score, as a JSON array (see `rollout --state`).
    #[arg(long, value_name = "JSON")]
    state: String,
    /// Uniform landing-height change: every action steps onto ground
    /// this far above (+) or below (−) the current foothold.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    terrain_offset: f64,
    /// Also roll every action out (greedy continuation, zero desired
    /// velocity) and record whether the walker stops without falling.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    /// CoM speed below which a verified rollout counts as stopped.
    #[arg(long, default_value_t = 0.1)]
    speed_threshold: f64,
    /// Output CSV path (ax,ay,az,q,admissible,verified).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Planar (1d) checkpoint.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// JSON file holding an array of observations (8-number arrays);
    /// omitted = the built-in sample: forward offsets {−0.1, 0, 0.1} ×
    /// nine forward velocities spanning ±1 m/s, at rest laterally.
    #[arg(long, value_name = "FILE")]
    states_file: Option<PathBuf>,
    /// Slack added to the analytic radius when classifying actions;
    /// defaults to one action-grid cell.
    #[arg(long, default_value_t = 0.08)]
    margin: f64,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 0.1)]
    speed_threshold: f64,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Rollout(args) => cmd_rollout(args),
        Command::Heatmap(args) => cmd_heatmap(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn load_net(path: &Path) -> Result<MlpParams> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn parse_observation(text: &str) -> Result<EnvObservation> {
    let values: Vec<f64> =
        serde_json::from_str(text).context("observation must be a JSON array of 8 numbers")?;
    observation_from_values(values)
}

fn observation_from_values(values: Vec<f64>) -> Result<EnvObservation> {
    let array: [f64; 8] = values
        .try_into()
        .map_err(|v: Vec<f64>| anyhow::anyhow!("expected 8 numbers, got {}", v.len()))?;
    if array[5] != 1.0 && array[5] != -1.0 {
        bail!("stance entry (index 5) must be +1 (right) or -1 (left)");
    }
    EnvObservation::from_vector(&array).context("malformed observation")
}

fn env_config(mode: Mode, terrain: TerrainKind) -> EnvConfig {
    let mut config = match mode {
        Mode::OneD => EnvConfig::one_d(),
        Mode::ThreeD => EnvConfig::three_d(terrain),
    };
    // Keep the requested terrain even when the mode cannot support it, so
    // validation reports the conflict instead of silently ignoring a flag.
    config.terrain = terrain;
    config
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Serialize)]
struct TrainSummary {
    format_version: u32,
    episodes: usize,
    total_env_steps: usize,
    /// Mean episode cost over the last tenth of training.
    mean_cost_last_decile: f64,
    final_eval: Option<EvalSummary>,
    evals: Vec<EvalPoint>,
    final_checkpoint: String,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = build_train_config(&args)?;
    let out_dir = args.out.clone().unwrap_or_else(|| default_run_dir(&args));
    let ckpt_dir = out_dir.join("ckpt");
    std::fs::create_dir_all(&ckpt_dir)
        .with_context(|| format!("creating {}", ckpt_dir.display()))?;
    write_text(
        &out_dir.join("config.json"),
        &format!("{}\n", serde_json::to_string_pretty(&config)?),
    )?;

    let progress_every = (config.episodes / 20).max(1);
    let interval = args.checkpoint_interval;
    let mut save_error = None;
    let result = train_with(&config, |p| {
        if (p.episode + 1) % progress_every == 0 || p.episode + 1 == p.total_episodes {
            let loss = p
                .stats
                .mean_loss
                .map(|l| format!("{l:.4}"))
                .unwrap_or_else(|| "warmup".into());
            let eval = p
                .eval
                .map(|e| format!("  eval {:.3}", e.mean_cost))
                .unwrap_or_default();
            eprintln!(
                "episode {}/{}  steps {}  cost {:.3}  loss {}{}",
                p.episode + 1,
                p.total_episodes,
                p.stats.steps,
                p.stats.total_cost,
                loss,
                eval
            );
        }
        if interval > 0 && (p.episode + 1) % interval == 0 && save_error.is_none() {
            let path = ckpt_dir.join(format!("episode-{:06}.dqsnet", p.episode + 1));
            if let Err(e) = save_checkpoint(p.online, &path) {
                save_error = Some(anyhow::Error::from(e).context("saving interval checkpoint"));
            }
        }
    })?;
    if let Some(err) = save_error {
        return Err(err);
    }

    finish_run(&out_dir, &ckpt_dir, &result)
}

fn build_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        return serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()));
    }
    let mode: Mode = args.mode.into();
    let mut config = TrainConfig {
        env: env_config(mode, args.terrain.into()),
        hidden: match args.net {
            NetArg::Compact => MlpSpec::compact(0).hidden,
            NetArg::Full => MlpSpec::full(0).hidden,
        },
        seed: args.seed,
        ..TrainConfig::default()
    };
    if let Some(episodes) = args.episodes {
        config.episodes = episodes;
    }
    if let Some(interval) = args.eval_interval {
        config.eval_interval = interval;
    }
    if let Some(episodes) = args.eval_episodes {
        config.eval_episodes = episodes;
    }
    Ok(config)
}

fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn default_run_dir(args: &TrainArgs) -> PathBuf {
    if args.config.is_some() {
        return runs_root().join(format!("custom-s{}", args.seed));
    }
    let mode = match args.mode {
        ModeArg::OneD => "1d",
        ModeArg::ThreeD => "3d",
    };
    let terrain = match args.terrain {
        TerrainArg::Flat => "flat",
        TerrainArg::RandomHeight => "random-height",
        TerrainArg::SteppingStones => "stepping-stones",
    };
    let net = match args.net {
        NetArg::Compact => "compact",
        NetArg::Full => "full",
    };
    runs_root().join(format!("{mode}-{terrain}-{net}-s{}", args.seed))
}

fn finish_run(out_dir: &Path, ckpt_dir: &Path, result: &TrainResult) -> Result<()> {
    let final_path = ckpt_dir.join("final.dqsnet");
    save_checkpoint(&result.online, &final_path).context("saving final checkpoint")?;
    write_text(
        &out_dir.join("log.csv"),
        &crate::dqn::training_log_csv(&result.episodes),
    )?;
    let decile = (result.episodes.len() / 10).max(1);
    let tail = &result.episodes[result.episodes.len() - decile..];
    let summary = TrainSummary {
        format_version: 1,
        episodes: result.episodes.len(),
        total_env_steps: result.episodes.iter().map(|s| s.steps).sum(),
        mean_cost_last_decile: tail.iter().map(|s| s.total_cost).sum::<f64>() / decile as f64,
        final_eval: result.evals.last().map(|e| e.summary),
        evals: result.evals.clone(),
        final_checkpoint: final_path.display().to_string(),
    };
    write_text(
        &out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary)?),
    )?;
    eprintln!("run written to {}", out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (net, mode) = args.policy.resolve()?;
    let policy = match &net {
        Some(net) => Policy::Greedy(net),
        None => Policy::Baseline,
    };
    let episodes = args.episodes.unwrap_or(match args.scenario {
        ScenarioArg::Tracking => 50,
        ScenarioArg::Recovery => 100,
        ScenarioArg::Stones => 50,
    });
    let horizon = args.horizon.unwrap_or(match args.scenario {
        ScenarioArg::Recovery => 10,
        _ => 15,
    });
    match args.scenario {
        ScenarioArg::Tracking => {
            if mode != Mode::ThreeD {
                bail!("tracking evaluation needs the spatial (3d) walker");
            }
            let mut config = env_config(mode, TerrainKind::Flat);
            config.step_limit = horizon;
            let report = track_velocity(policy, &config, args.v_des, episodes, args.seed)?;
            print_json(&serde_json::json!({
                "format_version": 1,
                "scenario": "tracking",
                "episodes": episodes,
                "horizon": horizon,
                "seed": args.seed,
                "desired_velocity": args.v_des,
                "mean_velocity_error": report.mean_error(),
                "within_0.15_fraction": report.within_fraction(0.15),
                "fall_rate": report.falls as f64 / episodes.max(1) as f64,
            }))
        }
        ScenarioArg::Recovery => {
            let config = env_config(mode, TerrainKind::Flat);
            let spec = RegionSpec {
                horizon,
                speed_threshold: 0.2,
            };
            let rate = recovery_rate(policy, &config, episodes, args.speed, &spec, args.seed)?;
            print_json(&serde_json::json!({
                "format_version": 1,
                "scenario": "recovery",
                "episodes": episodes,
                "horizon": horizon,
                "seed": args.seed,
                "max_push_speed": args.speed,
                "speed_threshold": spec.speed_threshold,
                "recovery_rate": rate,
            }))
        }
        ScenarioArg::Stones => {
            if mode != Mode::ThreeD {
                bail!("stepping stones need the spatial (3d) walker");
            }
            let mut config = env_config(mode, TerrainKind::SteppingStones);
            config.stone_density = args.density;
            config.step_limit = horizon;
            let rate = survival_rate(policy, &config, episodes, args.seed)?;
            print_json(&serde_json::json!({
                "format_version": 1,
                "scenario": "stones",
                "episodes": episodes,
                "horizon": horizon,
                "seed": args.seed,
                "stone_density": args.density,
                "survival_rate": rate,
                "fall_rate": 1.0 - rate,
            }))
        }
    }
}

// ---------------------------------------------------------------------------
// rollout

#[derive(Serialize)]
struct RolloutStep {
    step: usize,
    action: usize,
    displacement: [f64; 3],
    cost: f64,
    offset: [f64; 3],
    velocity: [f64; 2],
    stance: f64,
    terminal: bool,
    truncated: bool,
}

fn cmd_rollout(args: RolloutArgs) -> Result<()> {
    let (net, mode) = args.policy.resolve()?;
    let config = env_config(mode, args.terrain.into());
    let mut env = SteppingEnv::new(config, args.seed)?;
    match &args.state {
        Some(text) => {
            env.reset_to(&parse_observation(text)?);
        }
        None => {
            env.reset();
        }
    }
    let params = config.params;
    let mut step = 0;
    while !env.is_done() {
        let obs = env.observation();
        let action = match &net {
            Some(net) => {
                let candidates = env.candidate_displacements();
                greedy_action(net, &obs, &candidates)?.index
            }
            None => crate::planner::lipm_baseline_action(&obs, env.grid(), &params)?,
        };
        let rec = env.step(action)?;
        let next = rec.next_observation;
        let line = RolloutStep {
            step,
            action,
            displacement: [rec.displacement.x, rec.displacement.y, rec.displacement.z],
            cost: rec.cost,
            offset: [next.com_offset.x, next.com_offset.y, next.com_offset.z],
            velocity: [next.com_velocity.x, next.com_velocity.y],
            stance: next.stance.sign(),
            terminal: rec.terminal,
            truncated: rec.truncated,
        };
        println!("{}", serde_json::to_string(&line)?);
        step += 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// heatmap / compare

fn cmd_heatmap(args: HeatmapArgs) -> Result<()> {
    let net = load_net(&args.checkpoint)?;
    let mode = Mode::from_net_input_dim(net.input_dim())
        .with_context(|| format!("checkpoint input width {}", net.input_dim()))?;
    let obs = parse_observation(&args.state)?;
    let grid = ActionGrid::for_mode(mode);
    let mut map = q_heatmap(&net, &obs, &grid, args.terrain_offset)?;
    if args.verify {
        let config = env_config(mode, TerrainKind::Flat);
        // The rollout ground must match what the Q column assumes: a
        // plate at the offset height around the level stance foothold.
        // The planar model has no height input, so it verifies on level
        // ground.
        let terrain = match mode {
            Mode::ThreeD => offset_plate(args.terrain_offset),
            Mode::OneD => Terrain::Flat,
        };
        let spec = RegionSpec {
            horizon: args.horizon,
            speed_threshold: args.speed_threshold,
        };
        let flags = verified_capture_region(Policy::Greedy(&net), &config, &terrain, &obs, &spec)?;
        map.set_verified(&flags);
    }
    write_text(&args.out, &heatmap_csv(&map))?;
    print_json(&serde_json::json!({
        "format_version": 1,
        "state": obs.to_vector(),
        "terrain_offset": args.terrain_offset,
        "actions": grid.len(),
        "verified": args.verify,
        "csv": args.out.display().to_string(),
    }))
}

/// The built-in comparison sample: mild forward offsets crossed with
/// forward velocities spanning ±1 m/s, lateral state at rest.
fn default_compare_states() -> Vec<EnvObservation> {
    let mut states = Vec::new();
    for &x in &[-0.1, 0.0, 0.1] {
        for k in 0..9 {
            let v = -1.0 + 0.25 * k as f64;
            states.push(EnvObservation {
                com_offset: nalgebra::Vector3::new(x, 0.0, 0.35),
                com_velocity: nalgebra::Vector2::new(v, 0.0),
                stance: crate::pendulum::StanceFoot::Right,
                desired_velocity: nalgebra::Vector2::zeros(),
            });
        }
    }
    states
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let net = load_net(&args.checkpoint)?;
    let states = match &args.states_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .context("states file must be a JSON array of 8-number arrays")?;
            rows.into_iter()
                .map(observation_from_values)
                .collect::<Result<Vec<_>>>()?
        }
        None => default_compare_states(),
    };
    let spec = RegionSpec {
        horizon: args.horizon,
        speed_threshold: args.speed_threshold,
    };
    let agreement =
        compare_with_analytic(&net, &EnvConfig::one_d(), &states, args.margin, &spec)?;
    print_json(&serde_json::json!({
        "format_version": 1,
        "states": agreement.states,
        "analytic_bound": agreement.analytic_bound,
        "margin": agreement.margin,
        "verified_actions": agreement.verified_actions,
        "verified_inside": agreement.verified_inside,
        "inside_fraction": agreement.inside_fraction(),
        "rank_correlation": agreement.rank_correlation,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn observation_parsing_validates_shape_and_stance() {
        let obs = parse_observation("[0.1, 0.2, 0.35, -0.4, 0.5, -1, 0.3, 0]").unwrap();
        assert_eq!(obs.com_offset.x, 0.1);
        assert_eq!(obs.stance, crate::pendulum::StanceFoot::Left);
        assert_eq!(obs.desired_velocity.x, 0.3);
        assert!(parse_observation("[1, 2, 3]").is_err());
        assert!(parse_observation("[0, 0, 0.35, 0, 0, 0.5, 0, 0]").is_err());
        assert!(parse_observation("not json").is_err());
    }

    #[test]
    fn train_config_presets_match_flags() {
        let args = TrainArgs {
            config: None,
            mode: ModeArg::OneD,
            terrain: TerrainArg::Flat,
            net: NetArg::Compact,
            episodes: Some(77),
            seed: 5,
            out: None,
            checkpoint_interval: 0,
            eval_interval: Some(10),
            eval_episodes: Some(4),
        };
        let config = build_train_config(&args).unwrap();
        assert_eq!(config.env.mode, Mode::OneD);
        assert_eq!(config.hidden, vec![128, 128, 128]);
        assert_eq!(config.episodes, 77);
        assert_eq!(config.seed, 5);
        assert_eq!(config.eval_interval, 10);
        assert_eq!(config.eval_episodes, 4);
        assert!(default_run_dir(&args).ends_with("1d-flat-compact-s5"));
    }

    #[test]
    fn built_in_comparison_sample_is_planar_and_mild() {
        let states = default_compare_states();
        assert_eq!(states.len(), 27);
        for obs in &states {
            assert_eq!(obs.com_offset.y, 0.0);
            assert_eq!(obs.com_velocity.y, 0.0);
            assert!(obs.com_offset.x.abs() <= 0.1);
            assert!(obs.com_velocity.x.abs() <= 1.0);
        }
    }
}
