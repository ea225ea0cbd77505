//! Command-line front end: closed-form profiles, the two grid solvers, the
//! Monte-Carlo estimator, convergence sweeps, and end-to-end pipelines.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use impulse_solve::exact1d;
use impulse_solve::fp::{solve_stationary_recording, DensityField, FpConfig};
use impulse_solve::harness::csvio;
use impulse_solve::harness::pipeline::run_pipeline;
use impulse_solve::harness::sweep::{convergence_sweep, sweep_csv};
use impulse_solve::harness::{vertex_to_cell_thresholds, ExperimentConfig, HarnessError};
use impulse_solve::hjb::{value_iteration, HjbConfig};
use impulse_solve::jumpgrid::{build_jump_grid, JumpGrid, RhoPreset};
use impulse_solve::mc::{self, DensityRun, ObjectiveRun, ThresholdPolicy};

/// Default output directory: $IMPULSE_SOLVE_OUTDIR, falling back to ./out.
const OUTDIR_ENV: &str = "IMPULSE_SOLVE_OUTDIR";

#[derive(Parser)]
#[command(name = "impulse-solve", version, about = "Threshold-policy solvers for impulse-controlled jump dynamics with randomly timed observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form 1-D solution: quintet, boundary masses, profile CSV.
    Exact1d(Exact1dArgs),
    /// Value-iteration solve of the optimality equation.
    Hjb(HjbArgs),
    /// Stationary density by the finite-volume solver.
    Fp(FpArgs),
    /// Monte-Carlo density estimate, or `mc objective` for cost estimates.
    Mc(McArgs),
    /// Convergence sweep over resolutions.
    Sweep(SweepArgs),
    /// Run the configured pipeline stages in order.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct Exact1dArgs {
    #[arg(long)]
    config: PathBuf,
    /// Points of the emitted (x, value, density) profile.
    #[arg(long, default_value_t = 1000)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    thresholds_out: Option<PathBuf>,
}

#[derive(Args)]
struct HjbArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "L")]
    l_bins: Option<usize>,
    /// Pseudo-time rule: sec31, sec41, or sec42.
    #[arg(long)]
    rho_preset: Option<String>,
    /// Explicit pseudo-time increment (overrides the preset).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    thresholds_out: Option<PathBuf>,
}

#[derive(Args)]
struct FpArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "L")]
    l_bins: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Threshold table CSV (from hjb or exact1d); defaults to the config's
    /// closed-form threshold.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    burn_in: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    thresholds: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    action: Option<McAction>,
}

#[derive(Subcommand)]
enum McAction {
    /// Discounted-cost estimate from a start state.
    Objective {
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, default_value_t = 0.0)]
        y0: f64,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config output_dir, then $IMPULSE_SOLVE_OUTDIR, then ./out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                HarnessError::Tolerance(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Exact1d(args) => cmd_exact1d(args),
        Command::Hjb(args) => cmd_hjb(args),
        Command::Fp(args) => cmd_fp(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn default_outdir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .map(PathBuf::from)
        .or_else(|| std::env::var(OUTDIR_ENV).ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn cmd_exact1d(args: Exact1dArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let sol = exact1d::solve_quintet(&config.model)
        .map_err(|e| HarnessError::Stage { stage: "exact1d".into(), message: e.to_string() })?;
    println!("x_bar      = {}", sol.x_bar);
    println!("phi0       = {}", sol.phi0);
    println!("phi_plus0  = {}", sol.phi_plus0);
    println!("phi1       = {}", sol.phi1);
    println!("q          = {}", sol.q);
    println!("r          = {}", sol.r);
    if let Some(out) = &args.out {
        csvio::write_file(out, &csvio::exact1d_csv(&sol, args.resolution))?;
        println!("profile    -> {}", out.display());
    }
    if let Some(out) = &args.thresholds_out {
        let rows = config.grid.n + 1;
        csvio::write_file(out, &csvio::thresholds_csv(&vec![sol.x_bar; rows], config.grid.n))?;
        println!("thresholds -> {}", out.display());
    }
    Ok(())
}

fn cmd_hjb(args: HjbArgs) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(n) = args.n {
        config.grid.n = n;
    }
    if let Some(l) = args.l_bins {
        config.grid.l_bins = l;
    }
    if let Some(preset) = &args.rho_preset {
        config.grid.rho_preset =
            Some(RhoPreset::parse(preset).map_err(|e| HarnessError::Config(e.to_string()))?);
        config.grid.rho = None;
    }
    if let Some(rho) = args.rho {
        config.grid.rho = Some(rho);
    }
    if let Some(tol) = args.tol {
        config.hjb.tol = tol;
    }
    if let Some(max_iter) = args.max_iter {
        config.hjb.max_iter = max_iter;
    }

    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model)
        .map_err(|e| HarnessError::Stage { stage: "hjb".into(), message: e.to_string() })?;
    let cfg = HjbConfig {
        tol: config.hjb.tol,
        max_iter: config.hjb.max_iter,
        interp: config.hjb.interp,
    };
    let field = value_iteration(&spec, &grid, &config.model, &cfg)
        .map_err(|e| HarnessError::Stage { stage: "hjb".into(), message: e.to_string() })?;
    println!("n = {}, L = {}, rho = {}", spec.n, spec.l_bins, spec.rho);
    println!("iterations = {}, final residual = {:.3e}", field.iterations, field.final_residual);
    println!("x_bar[0] = {}", field.x_bar[0]);
    if !field.non_threshold_rows.is_empty() {
        println!("non-threshold rows: {:?}", field.non_threshold_rows);
    }
    if let Some(out) = &args.out {
        csvio::write_file(out, &csvio::value_field_csv(&field))?;
        let thresholds_out = args
            .thresholds_out
            .clone()
            .unwrap_or_else(|| sibling(out, "_thresholds"));
        csvio::write_file(&thresholds_out, &csvio::thresholds_csv(&field.x_bar, spec.n))?;
        println!("field      -> {}", out.display());
        println!("thresholds -> {}", thresholds_out.display());
    } else if let Some(out) = &args.thresholds_out {
        csvio::write_file(out, &csvio::thresholds_csv(&field.x_bar, spec.n))?;
        println!("thresholds -> {}", out.display());
    }
    Ok(())
}

/// Turns an arbitrary threshold table into per-cell-row levels.
fn levels_for_grid(raw: Vec<f64>, grid: &JumpGrid) -> Result<Vec<f64>, HarnessError> {
    let ny = grid.ny_cell_rows;
    if raw.len() == ny {
        return Ok(raw);
    }
    if raw.len() == 1 {
        return Ok(vec![raw[0]; ny]);
    }
    if raw.len() == grid.n + 1 {
        return Ok(if ny == 1 { vec![raw[0]] } else { vertex_to_cell_thresholds(&raw) });
    }
    Err(HarnessError::Config(format!(
        "threshold table has {} rows; expected 1, {} (cells), or {} (vertices)",
        raw.len(),
        ny,
        grid.n + 1
    )))
}

fn cmd_fp(args: FpArgs) -> Result<(), HarnessError> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(n) = args.n {
        config.grid.n = n;
    }
    if let Some(l) = args.l_bins {
        config.grid.l_bins = l;
    }
    if let Some(dt) = args.dt {
        config.grid.dt = Some(dt);
    }
    if let Some(tol) = args.tol {
        config.fp.tol = tol;
    }
    if let Some(max_steps) = args.max_steps {
        config.fp.max_steps = max_steps;
    }

    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model)
        .map_err(|e| HarnessError::Stage { stage: "fp".into(), message: e.to_string() })?;
    let levels = match &args.thresholds {
        Some(path) => {
            let raw = csvio::read_thresholds_csv(&std::fs::read_to_string(path)?)?;
            levels_for_grid(raw, &grid)?
        }
        None => {
            let sol = exact1d::solve_quintet(&config.model).map_err(|e| HarnessError::Stage {
                stage: "fp".into(),
                message: format!("no --thresholds given and the closed form is unavailable: {e}"),
            })?;
            vec![sol.x_bar; grid.ny_cell_rows]
        }
    };
    let cfg = FpConfig {
        tol: config.fp.tol,
        max_steps: config.fp.max_steps,
        face: config.fp.face,
        per_time_tol: config.fp.per_time_tol,
    };
    let (field, history) = solve_stationary_recording(
        &spec,
        &grid,
        &config.model,
        &levels,
        DensityField::uniform(&grid),
        &cfg,
        10usize.max(spec.n / 10),
    )
    .map_err(|e| HarnessError::Stage { stage: "fp".into(), message: e.to_string() })?;
    println!("n = {}, L = {}, dt = {}", spec.n, spec.l_bins, spec.dt);
    println!(
        "steps = {}, t = {:.3}, max |mass - 1| = {:.3e}",
        field.steps, field.t, field.max_mass_dev
    );
    if let Some(out) = &args.out {
        csvio::write_file(out, &csvio::density_field_csv(&field))?;
        let mass_out = sibling(out, "_mass");
        csvio::write_file(&mass_out, &csvio::mass_history_csv(&history))?;
        println!("density -> {}", out.display());
        println!("mass    -> {}", mass_out.display());
    }
    Ok(())
}

fn cmd_mc(args: McArgs) -> Result<(), HarnessError> {
    let config_path = args
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::from_file(config_path)?;
    if let Some(paths) = args.paths {
        config.mc.paths = paths;
    }
    if let Some(dt) = args.dt {
        config.mc.dt = dt;
    }
    if let Some(horizon) = args.horizon {
        config.mc.horizon = horizon;
    }
    if args.burn_in.is_some() {
        config.mc.burn_in = args.burn_in;
    }
    if let Some(seed) = args.seed {
        config.mc.seed = seed;
    }

    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model)
        .map_err(|e| HarnessError::Stage { stage: "mc".into(), message: e.to_string() })?;
    let policy = match &args.thresholds {
        Some(path) => {
            let raw = csvio::read_thresholds_csv(&std::fs::read_to_string(path)?)?;
            if raw.len() == 1 {
                ThresholdPolicy::Scalar(raw[0])
            } else if raw.len() == grid.n + 1 {
                ThresholdPolicy::PerRow(raw)
            } else {
                return Err(HarnessError::Config(format!(
                    "threshold table has {} rows; expected 1 or {}",
                    raw.len(),
                    grid.n + 1
                )));
            }
        }
        None => {
            let sol = exact1d::solve_quintet(&config.model).map_err(|e| HarnessError::Stage {
                stage: "mc".into(),
                message: format!("no --thresholds given and the closed form is unavailable: {e}"),
            })?;
            ThresholdPolicy::Scalar(sol.x_bar)
        }
    };

    match args.action {
        Some(McAction::Objective { x0, y0 }) => {
            let run = ObjectiveRun {
                paths: config.mc.paths,
                dt: config.mc.dt,
                horizon: config.mc.horizon,
                seed: config.mc.seed,
            };
            let est = mc::estimate_objective(x0, y0, &config.model, &policy, &run);
            println!(
                "objective({x0}, {y0}) = {} +- {} (stderr), truncation bias <= {:.3e}, {} paths, seed {}",
                est.mean, est.std_err, est.bias_bound, est.paths, run.seed
            );
        }
        None => {
            let run = DensityRun {
                paths: config.mc.paths,
                dt: config.mc.dt,
                burn_in: config
                    .mc
                    .burn_in
                    .unwrap_or_else(|| mc::default_burn_in(&config.model)),
                sample_every: config.mc.sample_every,
                samples_per_path: config.mc.samples_per_path,
                seed: config.mc.seed,
                x0: config.mc.x0,
                y0: if grid.ny_cell_rows == 1 { 0.0 } else { config.mc.y0 },
            };
            let field = mc::estimate_density(&grid, &config.model, &policy, &run);
            let max_p = field.p.iter().copied().fold(0.0f64, f64::max);
            let max_q = field.q.iter().copied().fold(0.0f64, f64::max);
            let max_r = field.r.iter().copied().fold(0.0f64, f64::max);
            println!(
                "paths = {}, dt = {}, burn-in = {}, seed = {}",
                run.paths, run.dt, run.burn_in, run.seed
            );
            println!("max p = {max_p}, max q = {max_q}, max r = {max_r}, mass = {}", field.mass());
            if let Some(out) = &args.out {
                csvio::write_file(out, &csvio::density_field_csv(&field))?;
                println!("density -> {}", out.display());
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let rows = convergence_sweep(&config)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    if let Some(out) = &args.out {
        csvio::write_file(out, &csv)?;
    }
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), HarnessError> {
    let config = ExperimentConfig::from_file(&args.config)?;
    let outdir = args.out_dir.clone().unwrap_or_else(|| default_outdir(&config));
    let outcome = run_pipeline(&config, &outdir)?;
    for record in &outcome.records {
        println!("stage {:<8} {:>8} ms  {}", record.name, record.ms, record.outputs.join(", "));
    }
    if let Some(report) = &outcome.compare {
        println!(
            "compare: interior_l1 = {:.4e}, atom gaps = {:.3}/{:.3}, pass = {}",
            report.interior_l1, report.max_rel_gap[1], report.max_rel_gap[2], report.pass
        );
    }
    println!("manifest -> {}", outcome.manifest_path.display());
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}
