//! Experiment runner: configuration ingestion, error norms against the
//! closed-form reference, convergence sweeps, solver cross-comparison, and
//! the end-to-end pipeline with CSV artifacts and a run manifest.

pub mod compare;
pub mod csvio;
pub mod norms;
pub mod pipeline;
pub mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jumpgrid::{GridMode, GridSpec, RhoPreset};
use crate::model::{xi_from_physics, ModelParams, PhysicalInputs, SourceSpec};
use crate::numerics::InterpMode;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("comparison outside tolerances: {0}")]
    Tolerance(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Pipeline stage names, executed in the order configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Exact1d,
    Hjb,
    Fp,
    Mc,
    Compare,
}

/// Where the density/simulation stages take their threshold policy from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    #[default]
    Exact,
    Hjb,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub l_bins: usize,
    /// Explicit pseudo-time increment; overrides the preset when set.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Named rule for rho; the default depends on the mode.
    #[serde(default)]
    pub rho_preset: Option<RhoPreset>,
    /// Density time increment; defaults to 2/n in 1-D and 1/n in 2-D.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HjbBlock {
    #[serde(default = "default_hjb_tol")]
    pub tol: f64,
    #[serde(default = "default_hjb_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_weno")]
    pub interp: InterpMode,
}

fn default_hjb_tol() -> f64 {
    1e-12
}
fn default_hjb_max_iter() -> usize {
    1_000_000
}
fn default_weno() -> InterpMode {
    InterpMode::Weno
}
fn default_linear() -> InterpMode {
    InterpMode::Linear
}

impl Default for HjbBlock {
    fn default() -> Self {
        HjbBlock { tol: default_hjb_tol(), max_iter: default_hjb_max_iter(), interp: default_weno() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FpBlock {
    #[serde(default = "default_fp_tol")]
    pub tol: f64,
    #[serde(default = "default_fp_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_linear")]
    pub face: InterpMode,
    #[serde(default)]
    pub per_time_tol: bool,
}

fn default_fp_tol() -> f64 {
    1e-10
}
fn default_fp_max_steps() -> usize {
    50_000_000
}

impl Default for FpBlock {
    fn default() -> Self {
        FpBlock {
            tol: default_fp_tol(),
            max_steps: default_fp_max_steps(),
            face: default_linear(),
            per_time_tol: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McBlock {
    #[serde(default = "default_mc_paths")]
    pub paths: usize,
    #[serde(default = "default_mc_dt")]
    pub dt: f64,
    /// Estimation horizon for objective runs (days).
    #[serde(default = "default_mc_horizon")]
    pub horizon: f64,
    /// Burn-in (days); defaults to 20 / (slowest positive rate).
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "default_mc_sample_every")]
    pub sample_every: f64,
    #[serde(default = "default_mc_samples_per_path")]
    pub samples_per_path: usize,
    #[serde(default = "default_mc_seed")]
    pub seed: u64,
    #[serde(default = "default_mc_x0")]
    pub x0: f64,
    #[serde(default)]
    pub y0: f64,
}

fn default_mc_paths() -> usize {
    100_000
}
fn default_mc_dt() -> f64 {
    0.02
}
fn default_mc_horizon() -> f64 {
    150.0
}
fn default_mc_sample_every() -> f64 {
    1.0
}
fn default_mc_samples_per_path() -> usize {
    100
}
fn default_mc_seed() -> u64 {
    1
}
fn default_mc_x0() -> f64 {
    0.5
}

impl Default for McBlock {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareBlock {
    /// Interior l1-distance bound between the two densities.
    #[serde(default = "default_interior_l1_max")]
    pub interior_l1_max: f64,
    /// Relative bound on the per-component maxima of the atom profiles.
    #[serde(default = "default_atom_rel_max")]
    pub atom_rel_max: f64,
}

fn default_interior_l1_max() -> f64 {
    0.05
}
fn default_atom_rel_max() -> f64 {
    0.25
}

impl Default for CompareBlock {
    fn default() -> Self {
        CompareBlock { interior_l1_max: default_interior_l1_max(), atom_rel_max: default_atom_rel_max() }
    }
}

/// Sweep protocol: resolutions and the rule tying L to n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub solver: SweepSolver,
    pub ns: Vec<usize>,
    /// "2n", "n", "n/2", "4n", ... or a plain integer.
    pub l_rule: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepSolver {
    Hjb,
    Fp,
}

/// Full experiment description, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub physical: Option<PhysicalInputs>,
    pub grid: GridConfig,
    pub mode: GridMode,
    #[serde(default)]
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub threshold_source: ThresholdSource,
    #[serde(default)]
    pub hjb: HjbBlock,
    #[serde(default)]
    pub fp: FpBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub compare: CompareBlock,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Fills derived values and enforces the cross-field invariants.
    pub fn resolve(&mut self) -> Result<(), HarnessError> {
        if let Some(phys) = &self.physical {
            phys.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            if self.model.xi.is_nan() {
                self.model.xi = xi_from_physics(phys);
            }
        }
        self.model.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.mode == GridMode::OneD {
            if self.model.growth_rate != 0.0 {
                return Err(HarnessError::Config(
                    "1-D mode requires G = 0 (the population is frozen at zero)".into(),
                ));
            }
            let flat = matches!(self.model.source, SourceSpec::Linear { s0 } if s0 == 0.0);
            if !flat {
                return Err(HarnessError::Config(
                    "1-D mode requires a vanishing disutility (source linear with S0 = 0)".into(),
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            for &n in &sweep.ns {
                parse_l_rule(&sweep.l_rule, n).map_err(HarnessError::Config)?;
            }
        }
        Ok(())
    }

    /// Concrete grid spec with the rho/dt defaults filled in.
    pub fn grid_spec(&self) -> GridSpec {
        self.grid_spec_for(self.grid.n, self.grid.l_bins)
    }

    pub fn grid_spec_for(&self, n: usize, l_bins: usize) -> GridSpec {
        let preset = self.grid.rho_preset.unwrap_or(match self.mode {
            GridMode::OneD => RhoPreset::Sec41,
            GridMode::TwoD => RhoPreset::Sec42,
        });
        let rho = self.grid.rho.unwrap_or_else(|| preset.value(n));
        let dt = self.grid.dt.unwrap_or(match self.mode {
            GridMode::OneD => 2.0 / n as f64,
            GridMode::TwoD => 1.0 / n as f64,
        });
        GridSpec { n, l_bins, rho, dt, mode: self.mode }
    }
}

/// Evaluates an L rule like "2n", "n", "n/2", or a literal count.
pub fn parse_l_rule(rule: &str, n: usize) -> Result<usize, String> {
    let rule = rule.trim();
    let value = if let Some(div) = rule.strip_prefix("n/") {
        let d: usize = div.parse().map_err(|_| format!("bad L rule '{rule}'"))?;
        if d == 0 || n % d != 0 {
            return Err(format!("L rule '{rule}' does not divide n = {n}"));
        }
        n / d
    } else if let Some(mult) = rule.strip_suffix('n') {
        let m: usize =
            if mult.is_empty() { 1 } else { mult.parse().map_err(|_| format!("bad L rule '{rule}'"))? };
        m * n
    } else {
        rule.parse().map_err(|_| format!("bad L rule '{rule}'"))?
    };
    if value < 1 {
        return Err(format!("L rule '{rule}' must evaluate to >= 1"));
    }
    Ok(value)
}

/// Maps vertex-row thresholds (length n+1) to cell-row thresholds
/// (length n) by averaging the bounding vertices; rows whose average is
/// negative stay inactive.
pub fn vertex_to_cell_thresholds(vertex: &[f64]) -> Vec<f64> {
    vertex.windows(2).map(|w| {
        if w[0] < 0.0 && w[1] < 0.0 {
            -1.0
        } else {
            0.5 * (w[0] + w[1])
        }
    }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "model": {
                "delta": 0.1, "Lambda": 0.25, "lambda": 0.2, "c": 0.35, "d": 0.3,
                "xi": 1.0, "G": 0.0,
                "source": {"kind": "linear", "S0": 0.0},
                "levy": {"kind": "uniform"},
                "z_lo": 0.0, "z_hi": 1.0
            },
            "grid": {"n": 50, "L": 100},
            "mode": "one_d",
            "pipeline": ["exact1d", "fp", "compare"]
        }"#
        .to_string()
    }

    #[test]
    fn config_defaults_resolve() {
        let cfg = ExperimentConfig::from_json(&minimal_json()).unwrap();
        let spec = cfg.grid_spec();
        assert_eq!(spec.n, 50);
        assert!((spec.rho - 0.02).abs() < 1e-18); // 1-D default rho = h
        assert!((spec.dt - 0.04).abs() < 1e-18); // 1-D default dt = 2h
        assert_eq!(cfg.threshold_source, ThresholdSource::Exact);
        assert_eq!(cfg.hjb.tol, 1e-12);
        assert_eq!(cfg.fp.tol, 1e-10);
    }

    #[test]
    fn one_d_mode_rejects_growth_and_source() {
        let bad = minimal_json().replace(r#""G": 0.0"#, r#""G": 0.4"#);
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = minimal_json().replace(r#""S0": 0.0"#, r#""S0": 1.0"#);
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn xi_fills_from_physics() {
        let json = minimal_json()
            .replace(r#""xi": 1.0, "#, "")
            .replace(
                r#""model": {"#,
                r#""physical": {"X_bar": 4.0, "kappa": 4.2, "width_m": 25.0, "slope": 0.001, "roughness": 0.03},
                   "model": {"#,
            );
        let cfg = ExperimentConfig::from_json(&json).expect("xi should fill from physical block");
        assert!((cfg.model.xi - 16.8).abs() < 1e-12);
    }

    #[test]
    fn l_rules_evaluate() {
        assert_eq!(parse_l_rule("2n", 200).unwrap(), 400);
        assert_eq!(parse_l_rule("n", 200).unwrap(), 200);
        assert_eq!(parse_l_rule("n/2", 200).unwrap(), 100);
        assert_eq!(parse_l_rule("4n", 50).unwrap(), 200);
        assert_eq!(parse_l_rule("128", 200).unwrap(), 128);
        assert!(parse_l_rule("n/3", 200).is_err());
        assert!(parse_l_rule("xn/", 200).is_err());
    }

    #[test]
    fn vertex_thresholds_map_to_cells() {
        let cells = vertex_to_cell_thresholds(&[0.8, 0.6, -1.0, -1.0]);
        assert!((cells[0] - 0.7).abs() < 1e-15);
        assert!(cells[1] < 0.0); // mixed row falls inactive
        assert_eq!(cells[2], -1.0);
    }
}
