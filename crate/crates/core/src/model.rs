//! Continuous-model coefficients: jump measure, growth, detachment, costs,
//! and the physical parameterization behind the detachment coefficient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the `[0, 1]` domain checks on state variables.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{name} = {value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Disutility of the algae population, `S(y)` with `S(0) = 0`, nondecreasing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// `S(y) = S0 * y`.
    Linear {
        #[serde(rename = "S0")]
        s0: f64,
    },
    /// `S(y) = 4 * max(y - 0.5, 0)`.
    Hinge,
    /// Piecewise-linear table of `(y, S(y))` knots, sorted in `y`.
    Custom { table: Vec<(f64, f64)> },
}

/// Jump-size measure family. Total mass over `(0, 1)` equals the jump
/// intensity `lambda`; both families integrate in closed form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevySpec {
    /// Density `lambda` on `(0, 1)`.
    Uniform,
    /// Density `lambda * theta * exp(-theta z) / (1 - exp(-theta))` on `(0, 1)`.
    TruncatedExp { theta: f64 },
}

/// All continuous-model constants. Field names mirror the JSON keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelParams {
    /// Discount rate (1/day), > 0.
    pub delta: f64,
    /// Observation intensity (1/day), >= 0 (0 disables observations).
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Jump intensity (1/day), >= 0 (0 disables jumps entirely).
    pub lambda: f64,
    /// Proportional replenishment cost, >= 0.
    pub c: f64,
    /// Fixed replenishment cost, > 0.
    pub d: f64,
    /// Detachment coefficient (dimensionless), > 0. May be omitted in JSON
    /// when a physical block is supplied; it is then filled via
    /// [`xi_from_physics`].
    #[serde(default = "f64_nan")]
    pub xi: f64,
    /// Logistic growth rate (1/day), >= 0.
    #[serde(rename = "G")]
    pub growth_rate: f64,
    /// Disutility spec.
    pub source: SourceSpec,
    /// Jump-size measure spec.
    pub levy: LevySpec,
    /// Lower bound of the discretized jump support, >= 0.
    pub z_lo: f64,
    /// Upper bound of the discretized jump support, > z_lo.
    pub z_hi: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParams(m));
        if !(self.delta > 0.0) {
            return bad(format!("delta must be > 0, got {}", self.delta));
        }
        if !(self.big_lambda >= 0.0) {
            return bad(format!("Lambda must be >= 0, got {}", self.big_lambda));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.c >= 0.0) {
            return bad(format!("c must be >= 0, got {}", self.c));
        }
        if !(self.d > 0.0) {
            return bad(format!("d must be > 0, got {}", self.d));
        }
        if !(self.xi > 0.0) {
            return bad(format!("xi must be > 0, got {}", self.xi));
        }
        if !(self.growth_rate >= 0.0) {
            return bad(format!("G must be >= 0, got {}", self.growth_rate));
        }
        if !(self.z_lo >= 0.0 && self.z_lo < self.z_hi) {
            return bad(format!(
                "jump support needs 0 <= z_lo < z_hi, got ({}, {})",
                self.z_lo, self.z_hi
            ));
        }
        if let SourceSpec::Linear { s0 } = self.source {
            if !(s0 >= 0.0) {
                return bad(format!("source.S0 must be >= 0, got {s0}"));
            }
        }
        if let SourceSpec::Custom { table } = &self.source {
            if table.is_empty() || table[0] != (0.0, 0.0) {
                return bad("custom source table must start with (0, 0)".into());
            }
            for w in table.windows(2) {
                if !(w[1].0 > w[0].0) || !(w[1].1 >= w[0].1) {
                    return bad(
                        "custom source table must be increasing in y, nondecreasing in S".into(),
                    );
                }
            }
        }
        if let LevySpec::TruncatedExp { theta } = self.levy {
            if !(theta > 0.0) {
                return bad(format!("levy.theta must be > 0, got {theta}"));
            }
        }
        Ok(())
    }

    /// The 1-D verification parameter set with a uniform jump measure on
    /// (0, 1). `xi` and `G` are inert in the 1-D reduction.
    pub fn one_d_reference() -> Self {
        ModelParams {
            delta: 0.1,
            big_lambda: 0.25,
            lambda: 0.20,
            c: 0.35,
            d: 0.30,
            xi: 1.0,
            growth_rate: 0.0,
            source: SourceSpec::Linear { s0: 0.0 },
            levy: LevySpec::Uniform,
            z_lo: 0.0,
            z_hi: 1.0,
        }
    }

    /// The 2-D application parameter set with a truncated-exponential jump
    /// measure cut off at z = 0.25.
    pub fn two_d_application(theta: f64) -> Self {
        ModelParams {
            delta: 0.15,
            big_lambda: 0.15,
            lambda: 1.0,
            c: 0.30,
            d: 0.15,
            xi: 16.8,
            growth_rate: 0.4,
            source: SourceSpec::Linear { s0: 1.0 },
            levy: LevySpec::TruncatedExp { theta },
            z_lo: 0.0,
            z_hi: 0.25,
        }
    }
}

/// Physical inputs behind the detachment coefficient and the discharge formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalInputs {
    /// Storable sediment per unit river width (m^3/m), > 0.
    #[serde(rename = "X_bar")]
    pub x_bar: f64,
    /// Detachment regression constant (1/m^2), > 0.
    pub kappa: f64,
    /// River width (m).
    pub width_m: f64,
    /// Channel bed slope (dimensionless).
    pub slope: f64,
    /// Manning roughness coefficient (s/m^{1/3}).
    pub roughness: f64,
}

impl PhysicalInputs {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.x_bar > 0.0) || !(self.kappa > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "physical inputs need X_bar > 0 and kappa > 0, got ({}, {})",
                self.x_bar, self.kappa
            )));
        }
        Ok(())
    }
}

fn f64_nan() -> f64 {
    f64::NAN
}

fn check_unit_interval(name: &'static str, v: f64) -> Result<f64, ModelError> {
    if v < -DOMAIN_TOL || v > 1.0 + DOMAIN_TOL {
        return Err(ModelError::Domain { name, value: v });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Logistic growth rate `G y (1 - y)`; zero at both endpoints.
pub fn growth(y: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let y = check_unit_interval("y", y)?;
    Ok(params.growth_rate * y * (1.0 - y))
}

/// Detachment survival factor `exp(-xi * min(x, z))` in (0, 1].
///
/// Equals exactly 1 at `x = 0`: no detachment once the sediment is depleted.
pub fn detachment_factor(x: f64, z: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let x = check_unit_interval("x", x)?;
    if z < 0.0 {
        return Err(ModelError::Domain { name: "z", value: z });
    }
    Ok((-params.xi * x.min(z)).exp())
}

/// Disutility `S(y)` of the selected source spec; `S(0) = 0` always.
pub fn disutility(y: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let y = check_unit_interval("y", y)?;
    Ok(match &params.source {
        SourceSpec::Linear { s0 } => s0 * y,
        SourceSpec::Hinge => 4.0 * (y - 0.5).max(0.0),
        SourceSpec::Custom { table } => piecewise_linear(table, y),
    })
}

fn piecewise_linear(table: &[(f64, f64)], y: f64) -> f64 {
    if y <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let ((y0, v0), (y1, v1)) = (w[0], w[1]);
        if y <= y1 {
            return v0 + (v1 - v0) * (y - y0) / (y1 - y0);
        }
    }
    table.last().unwrap().1
}

/// Exact mass of the jump measure over `(z1, z2) ∩ (0, 1)` (1/day).
///
/// Both measure families integrate analytically, so bin masses downstream
/// carry no quadrature error.
pub fn levy_mass(z1: f64, z2: f64, params: &ModelParams) -> f64 {
    let a = z1.clamp(0.0, 1.0);
    let b = z2.clamp(0.0, 1.0);
    if b <= a {
        return 0.0;
    }
    match params.levy {
        LevySpec::Uniform => params.lambda * (b - a),
        LevySpec::TruncatedExp { theta } => {
            // integral of theta e^{-theta z} / (1 - e^{-theta}) over (a, b)
            params.lambda * ((-theta * a).exp() - (-theta * b).exp()) / (1.0 - (-theta).exp())
        }
    }
}

/// Detachment coefficient from the physical inputs: `kappa * X_bar`.
pub fn xi_from_physics(phys: &PhysicalInputs) -> f64 {
    phys.kappa * phys.x_bar
}

/// Unit-width sediment discharge (m^2/s) as a function of the water
/// discharge `q_w` (m^3/s). Zero below the motion threshold.
pub fn sediment_discharge(q_w: f64, _phys: &PhysicalInputs) -> f64 {
    let s = 0.0176 * q_w.powf(0.6) - 0.047;
    0.0112 * s.max(0.0).powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> ModelParams {
        ModelParams::one_d_reference()
    }

    #[test]
    fn growth_vanishes_at_boundaries() {
        let mut p = reference();
        p.growth_rate = 0.4;
        assert_eq!(growth(0.0, &p).unwrap(), 0.0);
        assert_eq!(growth(1.0, &p).unwrap(), 0.0);
        assert!((growth(0.5, &p).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn growth_rejects_out_of_domain() {
        let p = reference();
        assert!(growth(-1e-9, &p).is_err());
        assert!(growth(1.0 + 1e-9, &p).is_err());
        // within tolerance is clamped, not rejected
        assert_eq!(growth(-1e-13, &p).unwrap(), 0.0);
    }

    #[test]
    fn detachment_factor_anchors() {
        let mut p = reference();
        p.xi = 16.8;
        assert_eq!(detachment_factor(0.0, 0.7, &p).unwrap(), 1.0);
        assert_eq!(detachment_factor(0.4, 0.0, &p).unwrap(), 1.0);
        // exp(-16.8 * 0.25) = exp(-4.2)
        let g = detachment_factor(1.0, 0.25, &p).unwrap();
        assert!((g - 0.014995576820477706).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn detachment_factor_in_unit_interval_and_monotone(
            x1 in 0.0..1.0f64, x2 in 0.0..1.0f64,
            z1 in 1e-6..1.0f64, z2 in 1e-6..1.0f64,
            xi in 0.1..30.0f64,
        ) {
            let mut p = reference();
            p.xi = xi;
            let (xa, xb) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            let (za, zb) = if z1 <= z2 { (z1, z2) } else { (z2, z1) };
            let g_aa = detachment_factor(xa, za, &p).unwrap();
            let g_ba = detachment_factor(xb, za, &p).unwrap();
            let g_ab = detachment_factor(xa, zb, &p).unwrap();
            prop_assert!(g_aa > 0.0 && g_aa <= 1.0);
            prop_assert!(g_ba <= g_aa); // nonincreasing in x
            prop_assert!(g_ab <= g_aa); // nonincreasing in z
        }

        #[test]
        fn levy_full_mass_equals_lambda(
            lambda in 0.01..5.0f64,
            theta in 1.0..100.0f64,
            uniform in proptest::bool::ANY,
        ) {
            let mut p = reference();
            p.lambda = lambda;
            p.levy = if uniform { LevySpec::Uniform } else { LevySpec::TruncatedExp { theta } };
            let total = levy_mass(0.0, 1.0, &p);
            prop_assert!(((total - lambda) / lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn disutility_anchors() {
        let mut p = reference();
        p.source = SourceSpec::Linear { s0: 1.0 };
        assert_eq!(disutility(0.0, &p).unwrap(), 0.0);
        p.source = SourceSpec::Hinge;
        assert_eq!(disutility(0.5, &p).unwrap(), 0.0);
        assert!((disutility(1.0, &p).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn disutility_nondecreasing_on_grid() {
        for source in [
            SourceSpec::Linear { s0: 1.0 },
            SourceSpec::Hinge,
            SourceSpec::Custom {
                table: vec![(0.0, 0.0), (0.3, 0.0), (0.7, 1.2), (1.0, 3.0)],
            },
        ] {
            let mut p = reference();
            p.source = source;
            assert_eq!(disutility(0.0, &p).unwrap(), 0.0);
            let mut prev = 0.0;
            for k in 0..=1000 {
                let v = disutility(k as f64 / 1000.0, &p).unwrap();
                assert!(v >= prev, "disutility decreased at k={k}");
                prev = v;
            }
        }
    }

    // Independent quadrature check of the closed-form bin masses.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 0 { 2.0 } else { 4.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn levy_mass_matches_quadrature() {
        let mut p = reference();
        p.lambda = 0.2;
        assert!((levy_mass(0.0, 1.0, &p) - 0.2).abs() < 1e-15);

        p.lambda = 1.0;
        p.levy = LevySpec::TruncatedExp { theta: 50.0 };
        let m = levy_mass(0.0, 0.25, &p);
        assert!((m - 0.9999962733468279).abs() < 1e-12);
        assert!((levy_mass(0.0, 1.0, &p) - 1.0).abs() < 1e-12);

        let theta = 50.0f64;
        let density = move |z: f64| theta * (-theta * z).exp() / (1.0 - (-theta).exp());
        let quad = simpson(density, 0.05, 0.25, 4000);
        assert!((levy_mass(0.05, 0.25, &p) - quad).abs() < 1e-10);
    }

    #[test]
    fn xi_from_physics_anchors() {
        let phys = PhysicalInputs {
            x_bar: 4.0,
            kappa: 4.2,
            width_m: 25.0,
            slope: 0.001,
            roughness: 0.03,
        };
        assert!((xi_from_physics(&phys) - 16.8).abs() < 1e-14);
        let unit = PhysicalInputs { x_bar: 1.0, kappa: 1.0, ..phys.clone() };
        assert_eq!(xi_from_physics(&unit), 1.0);
        let half = PhysicalInputs { x_bar: 2.0, ..phys };
        assert!((xi_from_physics(&half) - 8.4).abs() < 1e-14);
    }

    #[test]
    fn sediment_discharge_anchors() {
        let phys = PhysicalInputs {
            x_bar: 4.0,
            kappa: 4.2,
            width_m: 25.0,
            slope: 0.001,
            roughness: 0.03,
        };
        assert_eq!(sediment_discharge(0.0, &phys), 0.0);
        // motion threshold: 0.0176 Qw^0.6 = 0.047 at Qw ~ 5.1401
        assert_eq!(sediment_discharge(5.140144367371621, &phys), 0.0);
        assert!(sediment_discharge(5.15, &phys) > 0.0);
        let v = sediment_discharge(30.0, &phys);
        assert!((v - 2.9463172303868231e-4).abs() < 1e-12);
    }

    #[test]
    fn sediment_discharge_nondecreasing() {
        let phys = PhysicalInputs {
            x_bar: 4.0,
            kappa: 4.2,
            width_m: 25.0,
            slope: 0.001,
            roughness: 0.03,
        };
        let mut prev = 0.0;
        for k in 0..=500 {
            let v = sediment_discharge(k as f64 * 0.2, &phys);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn params_json_round_trip_uses_spec_keys() {
        let text = r#"{
            "delta": 0.1, "Lambda": 0.25, "lambda": 0.2, "c": 0.35, "d": 0.3,
            "xi": 16.8, "G": 0.4,
            "source": {"kind": "linear", "S0": 1.0},
            "levy": {"kind": "truncated_exp", "theta": 50.0},
            "z_lo": 0.0, "z_hi": 0.25
        }"#;
        let p: ModelParams = serde_json::from_str(text).unwrap();
        p.validate().unwrap();
        assert_eq!(p.big_lambda, 0.25);
        assert_eq!(p.growth_rate, 0.4);
        let back = serde_json::to_value(&p).unwrap();
        assert_eq!(back["Lambda"], 0.25);
        assert_eq!(back["G"], 0.4);
        assert_eq!(back["source"]["S0"], 1.0);
        assert_eq!(back["levy"]["kind"], "truncated_exp");
    }

    #[test]
    fn validate_rejects_bad_params() {
        let mut p = reference();
        p.d = 0.0;
        assert!(p.validate().is_err());
        let mut p = reference();
        p.z_lo = 0.5;
        p.z_hi = 0.5;
        assert!(p.validate().is_err());
        let mut p = reference();
        p.source = SourceSpec::Custom { table: vec![(0.0, 0.1), (1.0, 0.2)] };
        assert!(p.validate().is_err());
    }
}
