//! Convergence sweeps over resolutions, with rates computed between
//! successive levels and per-row failure isolation.

use std::fmt::Write as _;

use crate::exact1d;
use crate::fp::{solve_stationary, DensityField, FpConfig};
use crate::hjb::{value_iteration, HjbConfig};
use crate::jumpgrid::{build_jump_grid, GridMode};
use crate::model::LevySpec;

use super::norms::{convergence_rate, error_norms, fp_error_norms, hjb_error_norms, Norms};
use super::{parse_l_rule, ExperimentConfig, HarnessError, SweepSolver, ThresholdSource};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub l_bins: usize,
    pub norms: Option<Norms>,
    /// Rates toward the next finer level, one per norm.
    pub cr: Option<Norms>,
    pub x_bar: Option<f64>,
    pub x_bar_err: Option<f64>,
    pub error: Option<String>,
}

/// Runs the configured solver across `sweep.ns`. Errors are compared with
/// the closed form when it applies (1-D, uniform measure); otherwise
/// against the finest level of the sweep itself. A failing row is recorded
/// and the sweep continues.
pub fn convergence_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, HarnessError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep block missing".into()))?;
    let exact = if config.mode == GridMode::OneD && config.model.levy == LevySpec::Uniform {
        Some(exact1d::solve_quintet(&config.model).map_err(|e| HarnessError::Stage {
            stage: "exact1d".into(),
            message: e.to_string(),
        })?)
    } else {
        None
    };

    let mut rows: Vec<SweepRow> = Vec::new();
    let mut solutions: Vec<Option<Solved>> = Vec::new();
    for &n in &sweep.ns {
        let l_bins = parse_l_rule(&sweep.l_rule, n).map_err(HarnessError::Config)?;
        let spec = config.grid_spec_for(n, l_bins);
        let outcome = (|| -> Result<Solved, String> {
            let grid = build_jump_grid(&spec, &config.model).map_err(|e| e.to_string())?;
            match sweep.solver {
                SweepSolver::Hjb => {
                    let cfg = HjbConfig {
                        tol: config.hjb.tol,
                        max_iter: config.hjb.max_iter,
                        interp: config.hjb.interp,
                    };
                    let field = value_iteration(&spec, &grid, &config.model, &cfg)
                        .map_err(|e| e.to_string())?;
                    Ok(Solved::Hjb(field))
                }
                SweepSolver::Fp => {
                    let levels = match (config.threshold_source, &exact) {
                        (ThresholdSource::Exact, Some(sol)) => vec![sol.x_bar; grid.ny_cell_rows],
                        (ThresholdSource::Exact, None) => {
                            return Err("exact thresholds need the 1-D uniform closed form".into())
                        }
                        (ThresholdSource::Hjb, _) => {
                            let cfg = HjbConfig {
                                tol: config.hjb.tol,
                                max_iter: config.hjb.max_iter,
                                interp: config.hjb.interp,
                            };
                            let field = value_iteration(&spec, &grid, &config.model, &cfg)
                                .map_err(|e| e.to_string())?;
                            if grid.ny_cell_rows == 1 {
                                vec![field.x_bar[0]]
                            } else {
                                super::vertex_to_cell_thresholds(&field.x_bar)
                            }
                        }
                    };
                    let cfg = FpConfig {
                        tol: config.fp.tol,
                        max_steps: config.fp.max_steps,
                        face: config.fp.face,
                        per_time_tol: config.fp.per_time_tol,
                    };
                    let field = solve_stationary(
                        &spec,
                        &grid,
                        &config.model,
                        &levels,
                        DensityField::uniform(&grid),
                        &cfg,
                    )
                    .map_err(|e| e.to_string())?;
                    Ok(Solved::Fp(field))
                }
            }
        })();

        match outcome {
            Ok(solved) => {
                let (x_bar, x_bar_err) = match (&solved, &exact) {
                    (Solved::Hjb(f), Some(sol)) => {
                        (Some(f.x_bar[0]), Some((f.x_bar[0] - sol.x_bar).abs()))
                    }
                    (Solved::Hjb(f), None) => (Some(f.x_bar[0]), None),
                    _ => (None, None),
                };
                let norms = match (&solved, &exact) {
                    (Solved::Hjb(f), Some(sol)) => Some(hjb_error_norms(f, sol)?),
                    (Solved::Fp(f), Some(sol)) => Some(fp_error_norms(f, sol)?),
                    _ => None, // self-convergence filled afterwards
                };
                rows.push(SweepRow { n, l_bins, norms, cr: None, x_bar, x_bar_err, error: None });
                solutions.push(Some(solved));
            }
            Err(message) => {
                rows.push(SweepRow {
                    n,
                    l_bins,
                    norms: None,
                    cr: None,
                    x_bar: None,
                    x_bar_err: None,
                    error: Some(message),
                });
                solutions.push(None);
            }
        }
    }

    if exact.is_none() {
        fill_self_convergence(&mut rows, &solutions)?;
    }

    // rate at level k toward level k+1, when both doubled cleanly
    for k in 0..rows.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (rows[k].norms, rows[k + 1].norms) {
            if rows[k + 1].n == 2 * rows[k].n {
                rows[k].cr = Some(Norms {
                    l1: convergence_rate(a.l1, b.l1),
                    l2: convergence_rate(a.l2, b.l2),
                    linf: convergence_rate(a.linf, b.linf),
                });
            }
        }
    }
    Ok(rows)
}

enum Solved {
    Hjb(crate::hjb::ValueField),
    Fp(DensityField),
}

/// Errors against the finest successful level, sampling it at the coarse
/// nodes; the finest row keeps no error entry.
fn fill_self_convergence(
    rows: &mut [SweepRow],
    solutions: &[Option<Solved>],
) -> Result<(), HarnessError> {
    let finest = match solutions.iter().rposition(|s| s.is_some()) {
        Some(idx) => idx,
        None => return Ok(()),
    };
    let reference = solutions[finest].as_ref().unwrap();
    let n_ref = rows[finest].n;
    for k in 0..rows.len() {
        if k == finest || solutions[k].is_none() {
            continue;
        }
        let n = rows[k].n;
        if n_ref % n != 0 {
            rows[k].error = Some(format!("self-convergence needs {n_ref} divisible by {n}"));
            continue;
        }
        let ratio = n_ref / n;
        let norms = match (solutions[k].as_ref().unwrap(), reference) {
            (Solved::Hjb(coarse), Solved::Hjb(fine)) => {
                // vertices nest exactly under integer refinement
                let mut values = Vec::new();
                let mut refs = Vec::new();
                let mut weights = Vec::new();
                let w = (1.0 / n as f64).powi(if coarse.ny_rows == 1 { 1 } else { 2 });
                for j in 0..coarse.ny_rows {
                    let jf = if coarse.ny_rows == 1 { 0 } else { j * ratio };
                    for i in 0..=n {
                        values.push(coarse.phi_at(i, j));
                        refs.push(fine.phi_at(i * ratio, jf));
                        weights.push(w);
                    }
                }
                error_norms(&values, &refs, &weights)?
            }
            (Solved::Fp(coarse), Solved::Fp(fine)) => {
                // sample the fine cell containing each coarse center
                let mut values = Vec::new();
                let mut refs = Vec::new();
                let mut weights = Vec::new();
                let w_cell = coarse.hx * coarse.hy;
                for j in 1..=coarse.ny_cells {
                    let jf = if coarse.ny_cells == 1 {
                        1
                    } else {
                        (((j as f64 - 0.5) * ratio as f64).floor() as usize + 1).min(fine.ny_cells)
                    };
                    for i in 1..=coarse.n {
                        let fi = (((i as f64 - 0.5) * ratio as f64).floor() as usize + 1).min(fine.n);
                        values.push(coarse.p_at(i, j));
                        refs.push(fine.p_at(fi, jf));
                        weights.push(w_cell);
                    }
                    values.push(coarse.q[j - 1]);
                    refs.push(fine.q[jf - 1]);
                    weights.push(coarse.hy);
                    values.push(coarse.r[j - 1]);
                    refs.push(fine.r[jf - 1]);
                    weights.push(coarse.hy);
                }
                error_norms(&values, &refs, &weights)?
            }
            _ => unreachable!("sweep rows share one solver"),
        };
        rows[k].norms = Some(norms);
    }
    Ok(())
}

/// Sweep table: `n,L,l1,l2,linf,cr_l1,cr_l2,cr_linf,x_bar,x_bar_err,error`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,L,l1,l2,linf,cr_l1,cr_l2,cr_linf,x_bar,x_bar_err,error\n");
    for row in rows {
        let norm = |v: Option<Norms>, pick: fn(Norms) -> f64| {
            v.map(|n| pick(n).to_string()).unwrap_or_default()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.n,
            row.l_bins,
            norm(row.norms, |n| n.l1),
            norm(row.norms, |n| n.l2),
            norm(row.norms, |n| n.linf),
            norm(row.cr, |n| n.l1),
            norm(row.cr, |n| n.l2),
            norm(row.cr, |n| n.linf),
            row.x_bar.map(|v| v.to_string()).unwrap_or_default(),
            row.x_bar_err.map(|v| v.to_string()).unwrap_or_default(),
            row.error.clone().unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{SweepConfig, SweepSolver};

    fn config(solver: SweepSolver, ns: Vec<usize>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_json(
            r#"{
                "model": {
                    "delta": 0.1, "Lambda": 0.25, "lambda": 0.2, "c": 0.35, "d": 0.3,
                    "xi": 1.0, "G": 0.0,
                    "source": {"kind": "linear", "S0": 0.0},
                    "levy": {"kind": "uniform"},
                    "z_lo": 0.0, "z_hi": 1.0
                },
                "grid": {"n": 10, "L": 20},
                "mode": "one_d"
            }"#,
        )
        .unwrap();
        cfg.sweep = Some(SweepConfig { solver, ns, l_rule: "2n".into() });
        cfg
    }

    #[test]
    fn hjb_sweep_shows_first_order_decay() {
        let cfg = config(SweepSolver::Hjb, vec![10, 20, 40]);
        let rows = convergence_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        let e0 = rows[0].norms.unwrap().linf;
        let e2 = rows[2].norms.unwrap().linf;
        assert!(e2 < e0, "errors should shrink: {e0} -> {e2}");
        assert!(rows[0].cr.is_some() && rows[2].cr.is_none());
        let csv = sweep_csv(&rows);
        assert!(csv.lines().count() == 4);
        assert!(csv.starts_with("n,L,"));
    }

    #[test]
    fn failed_rows_do_not_stop_the_sweep() {
        let mut cfg = config(SweepSolver::Hjb, vec![10, 20]);
        cfg.hjb.max_iter = 1; // force per-row failure
        let rows = convergence_sweep(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn fp_sweep_uses_exact_thresholds() {
        let cfg = config(SweepSolver::Fp, vec![10, 20]);
        let rows = convergence_sweep(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.error.is_none()));
        assert!(rows[0].norms.unwrap().l1 > rows[1].norms.unwrap().l1 * 0.5);
    }
}
