//! End-to-end pipelines: stages run in the configured order, thresholds
//! flow from the value solve (or the closed form) into the density and
//! simulation stages, artifacts land on disk next to a run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::exact1d::{self, Exact1DSolution};
use crate::fp::{solve_stationary_recording, DensityField, FpConfig};
use crate::hjb::{value_iteration, HjbConfig, ValueField};
use crate::jumpgrid::{build_jump_grid, GridMode, JumpGrid};
use crate::mc::{estimate_density, DensityRun, ThresholdPolicy};

use super::compare::{compare_densities, CompareReport};
use super::csvio;
use super::{ExperimentConfig, HarnessError, Stage, ThresholdSource};

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub ms: u64,
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub records: Vec<StageRecord>,
    pub exact: Option<Exact1DSolution>,
    pub hjb: Option<ValueField>,
    pub fp: Option<DensityField>,
    pub mc: Option<DensityField>,
    pub compare: Option<CompareReport>,
    pub manifest_path: PathBuf,
}

fn stage_err(stage: &str, message: impl ToString) -> HarnessError {
    HarnessError::Stage { stage: stage.into(), message: message.to_string() }
}

/// Projects the closed-form density onto the solver grid (1-D only):
/// cell centers for the interior, the exact weights for the atoms.
pub fn project_exact_density(sol: &Exact1DSolution, grid: &JumpGrid) -> DensityField {
    let mut field = DensityField::uniform(grid);
    for i in 1..=grid.n {
        let x = (i as f64 - 0.5) * field.hx;
        field.p[i - 1] = exact1d::exact_density(x, sol);
    }
    field.q[0] = sol.q;
    field.r[0] = sol.r;
    field
}

struct Context {
    exact: Option<Exact1DSolution>,
    hjb: Option<ValueField>,
    fp: Option<DensityField>,
    mc: Option<DensityField>,
    compare: Option<CompareReport>,
}

impl Context {
    /// Per-cell-row threshold levels for the density solve.
    fn fp_thresholds(
        &mut self,
        config: &ExperimentConfig,
        grid: &JumpGrid,
    ) -> Result<Vec<f64>, HarnessError> {
        match config.threshold_source {
            ThresholdSource::Exact => {
                let sol = self.ensure_exact(config)?;
                Ok(vec![sol.x_bar; grid.ny_cell_rows])
            }
            ThresholdSource::Hjb => {
                let field = self.hjb.as_ref().ok_or_else(|| {
                    stage_err("fp", "threshold_source is hjb but no hjb stage ran before fp")
                })?;
                if grid.ny_cell_rows == 1 {
                    Ok(vec![field.x_bar[0]])
                } else {
                    Ok(super::vertex_to_cell_thresholds(&field.x_bar))
                }
            }
        }
    }

    /// Threshold policy for the simulation.
    fn mc_policy(&mut self, config: &ExperimentConfig) -> Result<ThresholdPolicy, HarnessError> {
        match config.threshold_source {
            ThresholdSource::Exact => {
                let sol = self.ensure_exact(config)?;
                Ok(ThresholdPolicy::Scalar(sol.x_bar))
            }
            ThresholdSource::Hjb => {
                let field = self.hjb.as_ref().ok_or_else(|| {
                    stage_err("mc", "threshold_source is hjb but no hjb stage ran before mc")
                })?;
                if field.ny_rows == 1 {
                    Ok(ThresholdPolicy::Scalar(field.x_bar[0]))
                } else {
                    Ok(ThresholdPolicy::PerRow(field.x_bar.clone()))
                }
            }
        }
    }

    fn ensure_exact(
        &mut self,
        config: &ExperimentConfig,
    ) -> Result<&Exact1DSolution, HarnessError> {
        if self.exact.is_none() {
            self.exact = Some(
                exact1d::solve_quintet(&config.model)
                    .map_err(|e| stage_err("exact1d", e))?,
            );
        }
        Ok(self.exact.as_ref().unwrap())
    }
}

/// Executes the configured stages in order, writing artifacts under
/// `outdir` and a `manifest.json` describing the run. A comparison outside
/// tolerance fails the run (after the manifest is written).
pub fn run_pipeline(
    config: &ExperimentConfig,
    outdir: &Path,
) -> Result<PipelineOutcome, HarnessError> {
    std::fs::create_dir_all(outdir)?;
    let mut ctx = Context { exact: None, hjb: None, fp: None, mc: None, compare: None };
    let mut records: Vec<StageRecord> = Vec::new();

    for &stage in &config.pipeline {
        let started = Instant::now();
        let (name, outputs, details) = match stage {
            Stage::Exact1d => run_exact1d(config, outdir, &mut ctx)?,
            Stage::Hjb => run_hjb(config, outdir, &mut ctx)?,
            Stage::Fp => run_fp(config, outdir, &mut ctx)?,
            Stage::Mc => run_mc(config, outdir, &mut ctx)?,
            Stage::Compare => run_compare(config, &mut ctx)?,
        };
        records.push(StageRecord {
            name: name.to_string(),
            ms: started.elapsed().as_millis() as u64,
            outputs,
            details,
        });
    }

    let pass = ctx.compare.as_ref().map(|r| r.pass).unwrap_or(true);
    let manifest = json!({
        "config": config,
        "stages": records,
        "compare": ctx.compare,
        "status": if pass { "pass" } else { "fail" },
    });
    let manifest_path = outdir.join("manifest.json");
    csvio::write_file(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;

    let outcome = PipelineOutcome {
        records,
        exact: ctx.exact,
        hjb: ctx.hjb,
        fp: ctx.fp,
        mc: ctx.mc,
        compare: ctx.compare,
        manifest_path,
    };
    if !pass {
        let report = outcome.compare.as_ref().unwrap();
        return Err(HarnessError::Tolerance(format!(
            "interior_l1 = {:.4e} (max {:.4e}), atom max gaps = {:.3}/{:.3} (max {:.3})",
            report.interior_l1,
            report.interior_l1_max,
            report.max_rel_gap[1],
            report.max_rel_gap[2],
            report.atom_rel_max
        )));
    }
    Ok(outcome)
}

type StageOutput = (&'static str, Vec<String>, serde_json::Value);

fn run_exact1d(
    config: &ExperimentConfig,
    outdir: &Path,
    ctx: &mut Context,
) -> Result<StageOutput, HarnessError> {
    let sol = exact1d::solve_quintet(&config.model).map_err(|e| stage_err("exact1d", e))?;
    let n = config.grid.n;
    let profile = csvio::exact1d_csv(&sol, n.max(1000));
    let rows = if config.mode == GridMode::TwoD { n + 1 } else { 1 };
    let thresholds = csvio::thresholds_csv(&vec![sol.x_bar; rows], n);
    let p1 = outdir.join("exact1d.csv");
    let p2 = outdir.join("exact1d_thresholds.csv");
    csvio::write_file(&p1, &profile)?;
    csvio::write_file(&p2, &thresholds)?;
    let details = json!({
        "x_bar": sol.x_bar,
        "phi0": sol.phi0,
        "phi_plus0": sol.phi_plus0,
        "phi1": sol.phi1,
        "q": sol.q,
        "r": sol.r,
    });
    ctx.exact = Some(sol);
    Ok(("exact1d", vec![path_str(&p1), path_str(&p2)], details))
}

fn run_hjb(
    config: &ExperimentConfig,
    outdir: &Path,
    ctx: &mut Context,
) -> Result<StageOutput, HarnessError> {
    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model).map_err(|e| stage_err("hjb", e))?;
    let cfg = HjbConfig {
        tol: config.hjb.tol,
        max_iter: config.hjb.max_iter,
        interp: config.hjb.interp,
    };
    let field =
        value_iteration(&spec, &grid, &config.model, &cfg).map_err(|e| stage_err("hjb", e))?;
    let p1 = outdir.join("hjb.csv");
    let p2 = outdir.join("hjb_thresholds.csv");
    csvio::write_file(&p1, &csvio::value_field_csv(&field))?;
    csvio::write_file(&p2, &csvio::thresholds_csv(&field.x_bar, spec.n))?;
    let details = json!({
        "iterations": field.iterations,
        "final_residual": field.final_residual,
        "rho": spec.rho,
        "non_threshold_rows": field.non_threshold_rows,
    });
    ctx.hjb = Some(field);
    Ok(("hjb", vec![path_str(&p1), path_str(&p2)], details))
}

fn run_fp(
    config: &ExperimentConfig,
    outdir: &Path,
    ctx: &mut Context,
) -> Result<StageOutput, HarnessError> {
    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model).map_err(|e| stage_err("fp", e))?;
    let levels = ctx.fp_thresholds(config, &grid)?;
    let cfg = FpConfig {
        tol: config.fp.tol,
        max_steps: config.fp.max_steps,
        face: config.fp.face,
        per_time_tol: config.fp.per_time_tol,
    };
    let every = 10usize.max(spec.n / 10);
    let (field, history) = solve_stationary_recording(
        &spec,
        &grid,
        &config.model,
        &levels,
        DensityField::uniform(&grid),
        &cfg,
        every,
    )
    .map_err(|e| stage_err("fp", e))?;
    let p1 = outdir.join("fp.csv");
    let p2 = outdir.join("fp_mass.csv");
    csvio::write_file(&p1, &csvio::density_field_csv(&field))?;
    csvio::write_file(&p2, &csvio::mass_history_csv(&history))?;
    let details = json!({
        "steps": field.steps,
        "t": field.t,
        "max_mass_dev": field.max_mass_dev,
        "dt": spec.dt,
    });
    ctx.fp = Some(field);
    Ok(("fp", vec![path_str(&p1), path_str(&p2)], details))
}

fn run_mc(
    config: &ExperimentConfig,
    outdir: &Path,
    ctx: &mut Context,
) -> Result<StageOutput, HarnessError> {
    let spec = config.grid_spec();
    let grid = build_jump_grid(&spec, &config.model).map_err(|e| stage_err("mc", e))?;
    let policy = ctx.mc_policy(config)?;
    let mc = &config.mc;
    let run = DensityRun {
        paths: mc.paths,
        dt: mc.dt,
        burn_in: mc.burn_in.unwrap_or_else(|| crate::mc::default_burn_in(&config.model)),
        sample_every: mc.sample_every,
        samples_per_path: mc.samples_per_path,
        seed: mc.seed,
        x0: mc.x0,
        y0: if config.mode == GridMode::OneD { 0.0 } else { mc.y0 },
    };
    let field = estimate_density(&grid, &config.model, &policy, &run);
    let p1 = outdir.join("mc.csv");
    csvio::write_file(&p1, &csvio::density_field_csv(&field))?;
    let details = json!({
        "paths": run.paths,
        "dt": run.dt,
        "burn_in": run.burn_in,
        "samples_per_path": run.samples_per_path,
        "seed": run.seed,
    });
    ctx.mc = Some(field);
    Ok(("mc", vec![path_str(&p1)], details))
}

fn run_compare(
    config: &ExperimentConfig,
    ctx: &mut Context,
) -> Result<StageOutput, HarnessError> {
    let left = ctx
        .fp
        .as_ref()
        .ok_or_else(|| stage_err("compare", "no fp field to compare (run fp first)"))?;
    let report = if let Some(mc) = &ctx.mc {
        compare_densities(left, mc, &config.compare)?
    } else {
        let spec = config.grid_spec();
        let grid = build_jump_grid(&spec, &config.model).map_err(|e| stage_err("compare", e))?;
        if grid.ny_cell_rows != 1 {
            return Err(stage_err(
                "compare",
                "closed-form comparison only applies in 1-D mode; add an mc stage",
            ));
        }
        let reference = {
            let sol = ctx.ensure_exact(config)?;
            project_exact_density(sol, &grid)
        };
        compare_densities(ctx.fp.as_ref().unwrap(), &reference, &config.compare)?
    };
    let details = serde_json::to_value(&report)?;
    ctx.compare = Some(report);
    Ok(("compare", Vec::new(), details))
}

fn path_str(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}
