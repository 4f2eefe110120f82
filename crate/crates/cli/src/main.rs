use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serpnav::config::{load_scenario, Scenario};
use serpnav::format::sig9;
use serpnav::gait::{fit_reduction, sweep_parameters_with, ReductionMap, SweepResult};
use serpnav::perception::perceive;
use serpnav::planner::{plan, render_overlay};
use serpnav::world::{run_episode, SimMode};
use serpnav::Pose;

mod plots;

/// Rectilinear-gait snake robot navigation: gait sweeps, episodes and
/// single-frame planning.
#[derive(Parser, Debug)]
#[command(name = "serpnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario simulation mode.
    #[arg(long, global = true)]
    mode: Option<Mode>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Reduced,
    HighFidelity,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Average body velocity over an (amplitude, curvature) grid and fit the
    /// reduction map.
    Sweep {
        /// Comma-separated amplitudes (m); defaults to the scenario grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        amplitudes: Option<Vec<f64>>,
        /// Comma-separated curvatures (1/m); defaults to the scenario grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        kappas: Option<Vec<f64>>,
    },
    /// Run one episode and write its log and plots.
    Run,
    /// Perceive and plan from a single pose and write the debug images.
    PlanOnce {
        /// Robot pose as `x,y,theta`; defaults to the scene start.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pose: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    // usage errors share exit code 1 with config errors; 2 means collision
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    let threads = match std::env::var("SERPNAV_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("SERPNAV_THREADS must be a positive integer, got {s:?}"))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start thread pool")?;
    pool.install(|| {
        let scenario = load(&cli.common)?;
        fs::create_dir_all(&cli.common.out)
            .with_context(|| format!("cannot create {}", cli.common.out.display()))?;
        match &cli.command {
            Command::Sweep { amplitudes, kappas } => cmd_sweep(
                &scenario,
                amplitudes.as_deref(),
                kappas.as_deref(),
                &cli.common.out,
            ),
            Command::Run => cmd_run(&scenario, &cli.common.out),
            Command::PlanOnce { pose } => {
                cmd_plan_once(&scenario, pose.as_deref(), &cli.common.out)
            }
        }
    })
}

fn load(common: &Common) -> Result<Scenario> {
    let Some(path) = &common.config else {
        bail!("--config is required");
    };
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = common.seed {
        scenario.config.seed = seed;
    }
    if let Some(mode) = common.mode {
        scenario.config.mode = match mode {
            Mode::Reduced => SimMode::Reduced,
            Mode::HighFidelity => SimMode::HighFidelity,
        };
    }
    Ok(scenario)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn sweep(scenario: &Scenario, amplitudes: &[f64], kappas: &[f64]) -> Result<SweepResult> {
    let c = &scenario.config;
    Ok(sweep_parameters_with(
        &c.gait,
        amplitudes,
        kappas,
        &c.friction,
        c.sweep.settle_cycles,
        c.sweep.average_cycles,
        &c.sim,
    )?)
}

fn reduction_map(scenario: &Scenario) -> Result<ReductionMap> {
    if let Some(map) = scenario.map {
        return Ok(map);
    }
    eprintln!("no reduction map configured; fitting one from the scenario sweep grid");
    let s = &scenario.config.sweep;
    let result = sweep(scenario, &s.amplitudes, &s.kappas)?;
    Ok(fit_reduction(&result)?)
}

fn cmd_sweep(
    scenario: &Scenario,
    amplitudes: Option<&[f64]>,
    kappas: Option<&[f64]>,
    out: &Path,
) -> Result<u8> {
    let s = &scenario.config.sweep;
    let result = sweep(
        scenario,
        amplitudes.unwrap_or(&s.amplitudes),
        kappas.unwrap_or(&s.kappas),
    )?;
    write(&out.join("sweep.csv"), result.to_csv())?;
    let map = fit_reduction(&result)?;
    write(&out.join("reduction_map.txt"), map.to_text())?;
    println!("fit_r_squared = {}", sig9(map.fit_r_squared));
    println!("v_forward = {}", sig9(map.v_forward));
    println!("omega_slope = {}", sig9(map.omega_slope));
    println!("omega_intercept = {}", sig9(map.omega_intercept));
    Ok(0)
}

fn cmd_run(scenario: &Scenario, out: &Path) -> Result<u8> {
    let map = reduction_map(scenario)?;
    let cfg = scenario.config.episode();
    let log = run_episode(&scenario.scene, &cfg, &map)?;
    write(&out.join("episode.csv"), log.to_csv())?;
    write(
        &out.join("trajectory.svg"),
        plots::trajectory_svg(&scenario.scene, &log),
    )?;
    write(
        &out.join("curvature.svg"),
        plots::curvature_svg(&log, &map, cfg.planner.kappa_max),
    )?;
    let last = log
        .records
        .last()
        .map(|r| r.true_pose)
        .unwrap_or(scenario.scene.start);
    let summary = format!(
        "termination = {}\nexit_code = {}\ncycles = {}\nreplans = {}\nfinal_x = {}\nfinal_y = {}\nfinal_theta = {}\n{}",
        log.termination.label(),
        log.termination.exit_code(),
        log.records.len(),
        log.plans.len(),
        sig9(last.x),
        sig9(last.y),
        sig9(last.theta),
        map.to_text(),
    );
    write(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(log.termination.exit_code() as u8)
}

fn cmd_plan_once(scenario: &Scenario, pose: Option<&[f64]>, out: &Path) -> Result<u8> {
    let scene = &scenario.scene;
    let pose = match pose {
        Some(&[x, y, theta]) => Pose::new(x, y, theta),
        Some(_) => bail!("--pose takes x,y,theta"),
        None => scene.start,
    };
    if !scene.bounds.contains(pose.position()) {
        bail!(
            "pose ({}, {}) lies outside the scene bounds",
            pose.x,
            pose.y
        );
    }
    let map = reduction_map(scenario)?;
    let cfg = scenario.config.episode();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let frame = perceive(
        scene,
        &pose,
        &cfg.camera,
        cfg.perception.flip_probability,
        &mut rng,
    )?;
    let outcome = plan(&pose, &frame.binary, &cfg.camera, &cfg.planner, &map)?;
    let width = cfg.planner.footprint_width;
    write(&out.join("binary.pgm"), frame.binary.to_pgm())?;
    write(&out.join("blocks.pgm"), frame.blocks.to_pgm())?;
    write(
        &out.join("checked.ppm"),
        render_overlay(&frame.rendered, &outcome, &cfg.camera, width).to_ppm(),
    )?;
    write(
        &out.join("overlay.ppm"),
        render_overlay(&frame.binary, &outcome, &cfg.camera, width).to_ppm(),
    )?;
    for (traj, entry) in outcome
        .candidates
        .candidates
        .iter()
        .zip(&outcome.results.entries)
    {
        println!(
            "candidate kappa = {} feasible_length = {}",
            sig9(traj.kappa),
            sig9(entry.feasible_length)
        );
    }
    match &outcome.selection {
        Ok(sel) => {
            println!("selected kappa = {}", sig9(sel.trajectory.kappa));
            println!("feasible_length = {}", sig9(sel.feasible_length));
            Ok(0)
        }
        Err(e) => {
            println!("no feasible trajectory: {e}");
            Ok(1)
        }
    }
}
