//! Jump-space discretization: exact bin masses and the precomputed
//! post-jump index tables used by the value-function and density solvers.
//!
//! Both solvers spend their inner loops on these tables, so they are built
//! once per grid and reused across iterations. All floors are evaluated in
//! scaled coordinates (`i - n z_l`, `j * g`, ...) so that exactly-integer
//! borderline cases resolve the way real arithmetic would.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{levy_mass, ModelParams};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
}

/// 1-D reduction (single row at y = 0) or full 2-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    OneD,
    TwoD,
}

/// Named rules for the pseudo-time increment of the value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoPreset {
    /// `rho = h^1.5`
    Sec31,
    /// `rho = h`
    Sec41,
    /// `rho = 10 h^1.5`
    Sec42,
}

impl RhoPreset {
    pub fn value(self, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        match self {
            RhoPreset::Sec31 => h.powf(1.5),
            RhoPreset::Sec41 => h,
            RhoPreset::Sec42 => 10.0 * h.powf(1.5),
        }
    }

    pub fn parse(name: &str) -> Result<Self, GridError> {
        match name {
            "sec31" => Ok(RhoPreset::Sec31),
            "sec41" => Ok(RhoPreset::Sec41),
            "sec42" => Ok(RhoPreset::Sec42),
            other => Err(GridError::Invalid(format!(
                "unknown rho preset '{other}' (expected sec31, sec41, or sec42)"
            ))),
        }
    }
}

/// Discretization parameters shared by the solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells per axis (>= 2); the mesh size is `h = 1/n` exactly.
    pub n: usize,
    /// Jump bins (>= 1).
    #[serde(rename = "L")]
    pub l_bins: usize,
    /// Pseudo-time increment for the value iteration.
    pub rho: f64,
    /// Time increment for the density integration.
    pub dt: f64,
    pub mode: GridMode,
}

impl GridSpec {
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n < 2 {
            return Err(GridError::Invalid(format!("n must be >= 2, got {}", self.n)));
        }
        if self.l_bins < 1 {
            return Err(GridError::Invalid("L must be >= 1".into()));
        }
        if !(self.rho > 0.0) {
            return Err(GridError::Invalid(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.dt > 0.0) {
            return Err(GridError::Invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Discretized jump space plus every post-jump index table.
///
/// Vertex tables (`a`, `b`) evaluate the detachment at vertex ordinates
/// `y_j = j h`; cell tables (`alpha`, `beta`, `gamma`, `omega`) use cell
/// centers. Layouts put the bin index `l` innermost.
#[derive(Debug, Clone)]
pub struct JumpGrid {
    pub n: usize,
    /// Vertex rows: 1 in 1-D mode, n+1 in 2-D mode.
    pub ny_vertex_rows: usize,
    /// Cell rows: 1 in 1-D mode, n in 2-D mode.
    pub ny_cell_rows: usize,
    /// Bin midpoints, length L.
    pub z: Vec<f64>,
    /// Exact bin masses, length L.
    pub nu: Vec<f64>,
    /// Sum of the bin masses; the effective jump intensity used by every
    /// on-diagonal term downstream so discrete conservation is exact.
    pub lambda_eff: f64,
    /// Post-jump x vertex index `max(ceil(n(x_i - z_l)), 0)`, `(n+1) x L`.
    ///
    /// The ceiling realizes the right-continuous piecewise-constant reading
    /// of the value function on (0, 1]: the depleted-state vertex i = 0 is
    /// read only when the jump truly reaches x = 0. Snapping down instead
    /// would leak the x = 0 value (which sits above the interior right
    /// limit) into every sub-cell neighborhood and bias the whole field.
    pub a: Vec<u32>,
    /// Post-jump y vertex index `floor(n y_j g(x_i, z_l))`, `rows x (n+1) x L`.
    pub b: Vec<u32>,
    /// Post-jump x cell offset `floor(n(xc_i - z_l))`, negative = jump past
    /// the depletion boundary; `n x L`.
    pub alpha: Vec<i32>,
    /// Post-jump y cell offset `floor(n yc_j g(xc_i, z_l))`, `cellrows x n x L`.
    pub beta: Vec<u32>,
    /// Post-jump x cell offset for mass leaving x = 1, length L.
    pub gamma: Vec<i32>,
    /// Post-jump y cell offset for mass leaving x = 1, `cellrows x L`.
    pub omega: Vec<u32>,
}

impl JumpGrid {
    #[inline]
    pub fn a_at(&self, i: usize, l: usize) -> usize {
        self.a[i * self.z.len() + l] as usize
    }

    #[inline]
    pub fn b_at(&self, i: usize, j: usize, l: usize) -> usize {
        self.b[(j * (self.n + 1) + i) * self.z.len() + l] as usize
    }

    #[inline]
    pub fn alpha_at(&self, cell_i: usize, l: usize) -> i32 {
        debug_assert!((1..=self.n).contains(&cell_i));
        self.alpha[(cell_i - 1) * self.z.len() + l]
    }

    #[inline]
    pub fn beta_at(&self, cell_i: usize, cell_j: usize, l: usize) -> u32 {
        debug_assert!((1..=self.ny_cell_rows).contains(&cell_j));
        self.beta[((cell_j - 1) * self.n + (cell_i - 1)) * self.z.len() + l]
    }

    #[inline]
    pub fn omega_at(&self, cell_j: usize, l: usize) -> u32 {
        self.omega[(cell_j - 1) * self.z.len() + l]
    }
}

/// Builds the jump grid: midpoint bins with analytically exact masses and
/// all post-jump index tables.
pub fn build_jump_grid(spec: &GridSpec, params: &ModelParams) -> Result<JumpGrid, GridError> {
    spec.validate()?;
    if params.z_hi <= params.z_lo {
        return Err(GridError::Invalid(format!(
            "jump support needs z_hi > z_lo, got ({}, {})",
            params.z_lo, params.z_hi
        )));
    }
    let n = spec.n;
    let big_l = spec.l_bins;
    let nf = n as f64;
    let (z_lo, z_hi) = (params.z_lo, params.z_hi);
    let width = z_hi - z_lo;

    let z: Vec<f64> = (1..=big_l)
        .map(|l| z_lo + width * (l as f64 - 0.5) / big_l as f64)
        .collect();
    let nu: Vec<f64> = (1..=big_l)
        .map(|l| {
            let lo = z_lo + width * (l as f64 - 1.0) / big_l as f64;
            let hi = z_lo + width * l as f64 / big_l as f64;
            levy_mass(lo, hi, params)
        })
        .collect();
    let lambda_eff = crate::numerics::ksum(nu.iter().copied());

    let (ny_vertex_rows, ny_cell_rows) = match spec.mode {
        GridMode::OneD => (1, 1),
        GridMode::TwoD => (n + 1, n),
    };

    // n z_l in one pass; all floors below work on scaled coordinates
    let nz: Vec<f64> = z.iter().map(|&zl| nf * zl).collect();

    let mut a = vec![0u32; (n + 1) * big_l];
    for i in 0..=n {
        for l in 0..big_l {
            let post = (i as f64 - nz[l]).ceil();
            a[i * big_l + l] = post.max(0.0) as u32;
        }
    }

    // g(x, z_l) at vertex abscissas (for b) and cell centers (for beta)
    let g_vertex: Vec<f64> = (0..=n)
        .flat_map(|i| {
            let x = i as f64 / nf;
            z.iter().map(move |&zl| (-params.xi * x.min(zl)).exp()).collect::<Vec<_>>()
        })
        .collect();
    let g_center: Vec<f64> = (1..=n)
        .flat_map(|i| {
            let x = (i as f64 - 0.5) / nf;
            z.iter().map(move |&zl| (-params.xi * x.min(zl)).exp()).collect::<Vec<_>>()
        })
        .collect();

    let mut b = vec![0u32; ny_vertex_rows * (n + 1) * big_l];
    if spec.mode == GridMode::TwoD {
        for j in 0..ny_vertex_rows {
            let jf = j as f64; // n * y_j = j
            for i in 0..=n {
                let base = (j * (n + 1) + i) * big_l;
                for l in 0..big_l {
                    let post = (jf * g_vertex[i * big_l + l]).floor();
                    b[base + l] = (post as u32).min(n as u32);
                }
            }
        }
    }

    let mut alpha = vec![0i32; n * big_l];
    for i in 1..=n {
        let xc_scaled = i as f64 - 0.5; // n * cell center
        for l in 0..big_l {
            alpha[(i - 1) * big_l + l] = (xc_scaled - nz[l]).floor() as i32;
        }
    }

    let mut beta = vec![0u32; ny_cell_rows * n * big_l];
    if spec.mode == GridMode::TwoD {
        for j in 1..=ny_cell_rows {
            let yc_scaled = j as f64 - 0.5; // n * cell center
            for i in 1..=n {
                let base = ((j - 1) * n + (i - 1)) * big_l;
                for l in 0..big_l {
                    beta[base + l] = (yc_scaled * g_center[(i - 1) * big_l + l]).floor() as u32;
                }
            }
        }
    }

    let gamma: Vec<i32> = nz.iter().map(|&nzl| (nf - nzl).floor() as i32).collect();

    let mut omega = vec![0u32; ny_cell_rows * big_l];
    if spec.mode == GridMode::TwoD {
        for j in 1..=ny_cell_rows {
            let yc_scaled = j as f64 - 0.5;
            for l in 0..big_l {
                let g = (-params.xi * (1.0f64).min(z[l])).exp();
                omega[(j - 1) * big_l + l] = (yc_scaled * g).floor() as u32;
            }
        }
    }

    Ok(JumpGrid {
        n,
        ny_vertex_rows,
        ny_cell_rows,
        z,
        nu,
        lambda_eff,
        a,
        b,
        alpha,
        beta,
        gamma,
        omega,
    })
}

/// Number of leftmost cells where replenishment fires for a per-row
/// threshold: `k_j = floor(x_bar_j n)`, 0 for a negative threshold.
/// The approximated threshold `k_j h` sits within `h` of `x_bar_j`.
pub fn replenish_cell_count(x_bar: f64, n: usize) -> usize {
    if x_bar < 0.0 {
        return 0;
    }
    ((x_bar * n as f64).floor() as usize).min(n)
}
