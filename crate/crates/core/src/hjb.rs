//! Semi-Lagrangian value-iteration solver for the optimality equation on
//! the vertex grid: nonlocal jump term with piecewise-constant remap,
//! replenishment minimization, drift handled by foot-point interpolation.
//!
//! The fixed-point sweeps are Jacobi-style: each sweep reads only the
//! previous iterate, so vertices are computed independently (and in
//! parallel) with no ordering constraint.

use rayon::prelude::*;
use thiserror::Error;

use crate::jumpgrid::{GridSpec, JumpGrid};
use crate::model::{disutility, ModelParams};
use crate::numerics::{interp_point, InterpMode};

#[derive(Debug, Error)]
pub enum HjbError {
    #[error("value iteration did not converge within {max_iter} sweeps (last change {residual:.3e})")]
    MaxIterations { max_iter: usize, residual: f64 },
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

/// Solver knobs on top of the grid spec.
#[derive(Debug, Clone)]
pub struct HjbConfig {
    /// Sup-norm change that terminates the value iteration.
    pub tol: f64,
    /// Sweep cap.
    pub max_iter: usize,
    /// Foot-point interpolation along y.
    pub interp: InterpMode,
}

impl Default for HjbConfig {
    fn default() -> Self {
        HjbConfig { tol: 1e-12, max_iter: 1_000_000, interp: InterpMode::Weno }
    }
}

/// Converged value field, the induced policy, and the detected per-row
/// thresholds.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub n: usize,
    /// 1 in 1-D mode, n+1 in 2-D mode.
    pub ny_rows: usize,
    /// Values at vertices, `ny_rows x (n+1)`, row-major in j.
    pub phi: Vec<f64>,
    /// Optimal replenishment amount at each vertex: 0 or `1 - x_i`.
    pub eta: Vec<f64>,
    /// Detected free boundary per row; -1 when the row never replenishes.
    pub x_bar: Vec<f64>,
    /// Rows whose replenish set is not a prefix in i (reported, not fatal).
    pub non_threshold_rows: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub final_residual: f64,
}

impl ValueField {
    #[inline]
    pub fn phi_at(&self, i: usize, j: usize) -> f64 {
        self.phi[j * (self.n + 1) + i]
    }

    #[inline]
    pub fn eta_at(&self, i: usize, j: usize) -> f64 {
        self.eta[j * (self.n + 1) + i]
    }
}

/// Piecewise-constant jump-term approximation at vertex `(i, j)`:
/// `-lambda_eff phi_ij + sum_l nu_l phi[a_il, b_ijl]`. Annihilates
/// constants by construction.
pub fn nonlocal_jump(phi: &[f64], grid: &JumpGrid, i: usize, j: usize) -> f64 {
    let nxv = grid.n + 1;
    let l_bins = grid.z.len();
    let a = &grid.a[i * l_bins..(i + 1) * l_bins];
    let b = &grid.b[(j * nxv + i) * l_bins..(j * nxv + i + 1) * l_bins];
    let mut inflow = 0.0;
    for l in 0..l_bins {
        inflow += grid.nu[l] * phi[b[l] as usize * nxv + a[l] as usize];
    }
    inflow - grid.lambda_eff * phi[j * nxv + i]
}

/// Replenishment term at vertex `(i, j)`:
/// `Lambda (phi_ij - min(phi_ij, phi_nj + c (1 - x_i) + d))`, along with
/// the minimizing amount. Ties go to doing nothing.
pub fn replenish_operator(
    phi: &[f64],
    i: usize,
    j: usize,
    n: usize,
    params: &ModelParams,
) -> (f64, f64) {
    let nxv = n + 1;
    let here = phi[j * nxv + i];
    let amount = 1.0 - i as f64 / n as f64;
    let target = phi[j * nxv + n] + params.c * amount + params.d;
    if target < here {
        (params.big_lambda * (here - target), amount)
    } else {
        (0.0, 0.0)
    }
}

/// Semi-Lagrangian drift step: evaluates the field at the foot point
/// `(x_i, y_j + f(y_j) rho)`, clamped to the domain, by 1-D interpolation
/// along y. Zero drift reproduces the field bit-for-bit.
pub fn semi_lagrangian_advect(
    phi: &[f64],
    n: usize,
    ny_rows: usize,
    rho: f64,
    params: &ModelParams,
    mode: InterpMode,
) -> Vec<f64> {
    let nxv = n + 1;
    if ny_rows == 1 {
        // single row at y = 0 where the drift vanishes
        return phi.to_vec();
    }
    let mut out = vec![0.0; phi.len()];
    let mut column = vec![0.0; ny_rows];
    // foot offset in grid units: n f(y_j) rho, same for every column
    let offsets: Vec<f64> = (0..ny_rows)
        .map(|j| {
            let y = j as f64 / n as f64;
            n as f64 * params.growth_rate * y * (1.0 - y) * rho
        })
        .collect();
    for i in 0..nxv {
        for (j, slot) in column.iter_mut().enumerate() {
            *slot = phi[j * nxv + i];
        }
        for j in 0..ny_rows {
            let pos = (j as f64 + offsets[j]).clamp(0.0, (ny_rows - 1) as f64);
            let j_foot = (pos.floor() as usize).min(ny_rows - 1);
            let s = pos - j_foot as f64;
            out[j * nxv + i] = interp_point(&column, j_foot, s, mode);
        }
    }
    out
}

/// Runs the value iteration from the zero field until the sup-norm change
/// drops below `cfg.tol`, then derives the policy and thresholds.
pub fn value_iteration(
    spec: &GridSpec,
    grid: &JumpGrid,
    params: &ModelParams,
    cfg: &HjbConfig,
) -> Result<ValueField, HjbError> {
    let n = spec.n;
    let nxv = n + 1;
    let ny_rows = grid.ny_vertex_rows;
    let total = ny_rows * nxv;
    let rho = spec.rho;
    let discount = (-params.delta * rho).exp();
    let gain = (1.0 - discount) / params.delta;

    let source_row: Vec<f64> = (0..ny_rows)
        .map(|j| disutility(j as f64 / n as f64, params))
        .collect::<Result<_, _>>()?;
    // drift offsets vanish identically when G = 0; skip the advect pass then
    let has_drift = ny_rows > 1 && params.growth_rate != 0.0;

    let mut phi = vec![0.0; total];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;

    while iterations < cfg.max_iter {
        let advected = if has_drift {
            semi_lagrangian_advect(&phi, n, ny_rows, rho, params, cfg.interp)
        } else {
            phi.clone()
        };
        let phi_ref = &phi;
        let adv_ref = &advected;
        let next: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let j = idx / nxv;
                let i = idx % nxv;
                let jump = nonlocal_jump(phi_ref, grid, i, j);
                let (repl, _) = replenish_operator(phi_ref, i, j, n, params);
                let running = if i == 0 { 1.0 } else { 0.0 } + source_row[j];
                discount * adv_ref[idx] + gain * (jump - repl + running)
            })
            .collect();
        residual = phi
            .par_iter()
            .zip(next.par_iter())
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max);
        phi = next;
        iterations += 1;
        if residual < cfg.tol {
            break;
        }
    }
    if residual >= cfg.tol {
        return Err(HjbError::MaxIterations { max_iter: cfg.max_iter, residual });
    }

    let mut eta = vec![0.0; total];
    for j in 0..ny_rows {
        for i in 0..nxv {
            let (_, amount) = replenish_operator(&phi, i, j, n, params);
            eta[j * nxv + i] = amount;
        }
    }
    let (x_bar, non_threshold_rows) = detect_threshold(n, ny_rows, &eta);

    Ok(ValueField {
        n,
        ny_rows,
        phi,
        eta,
        x_bar,
        non_threshold_rows,
        iterations,
        final_residual: residual,
    })
}

/// Free-boundary detection per row: an all-prefix replenish set
/// `{0, ..., i'}` yields `x_bar = (i' + 0.5) h`; an empty set yields -1;
/// anything else is flagged as a non-threshold row (the prefix extent is
/// still reported).
pub fn detect_threshold(n: usize, ny_rows: usize, eta: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let nxv = n + 1;
    let h = 1.0 / n as f64;
    let mut x_bar = Vec::with_capacity(ny_rows);
    let mut flagged = Vec::new();
    for j in 0..ny_rows {
        let row = &eta[j * nxv..(j + 1) * nxv];
        let prefix_end = row.iter().take_while(|&&e| e > 0.0).count(); // i' + 1
        let any_after = row[prefix_end..].iter().any(|&e| e > 0.0);
        if any_after {
            flagged.push(j);
        }
        if prefix_end == 0 {
            x_bar.push(-1.0);
        } else {
            x_bar.push((prefix_end as f64 - 0.5) * h);
        }
    }
    (x_bar, flagged)
}
