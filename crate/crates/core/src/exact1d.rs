//! Closed-form reference solution of the 1-D reduction with the uniform
//! jump measure on (0, 1): the value-function quintet, the exact stationary
//! density with its boundary point masses, and a residual evaluator that
//! substitutes the solution back into the optimality equation.

use thiserror::Error;

use crate::model::{LevySpec, ModelParams};
use crate::numerics::bisect;

/// Bracketing interval margin and bisection step count for the scalar
/// threshold equation; 200 halvings push the interval far below the f64
/// resolution of the root.
const BRACKET_EPS: f64 = 1e-9;
const BISECT_STEPS: usize = 200;

#[derive(Debug, Error)]
pub enum Exact1dError {
    #[error("no sign change of the threshold equation on [{lo}, {hi}]: the uniqueness assumption fails for these parameters")]
    NoBracket { lo: f64, hi: f64 },
    #[error("threshold {x_bar} must lie in [0, 1) for the stationary density")]
    InvalidThreshold { x_bar: f64 },
    #[error("closed form requires the uniform jump measure on (0, 1), got {0}")]
    UnsupportedMeasure(String),
}

/// The solved quintet, its exponents, and the stationary-density weights.
#[derive(Debug, Clone)]
pub struct Exact1DSolution {
    /// Value at the depleted state x = 0.
    pub phi0: f64,
    /// Right limit of the value function at x = 0 (differs from `phi0`).
    pub phi_plus0: f64,
    /// Value at full storage x = 1.
    pub phi1: f64,
    /// Optimal replenishment threshold in (0, 1).
    pub x_bar: f64,
    /// `lambda / (delta + lambda)`.
    pub beta: f64,
    /// `lambda / (delta + lambda + Lambda)`.
    pub gamma: f64,
    /// `lambda / (lambda + Lambda)`.
    pub alpha: f64,
    /// Point mass at x = 0.
    pub q: f64,
    /// Point mass at x = 1.
    pub r: f64,
    /// Interior density constant: `p(x) = c1 exp(-alpha x)` left of the
    /// threshold.
    pub c1: f64,
    // coefficients needed to evaluate the closed forms
    delta: f64,
    lambda: f64,
    big_lambda: f64,
    c: f64,
    d: f64,
}

fn require_uniform_measure(params: &ModelParams) -> Result<(), Exact1dError> {
    let ok = params.levy == LevySpec::Uniform && params.z_lo == 0.0 && params.z_hi == 1.0;
    if ok {
        Ok(())
    } else {
        Err(Exact1dError::UnsupportedMeasure(format!(
            "levy = {:?} on ({}, {})",
            params.levy, params.z_lo, params.z_hi
        )))
    }
}

/// Left- and right-hand sides of the scalar threshold equation.
pub fn threshold_sides(x: f64, params: &ModelParams) -> (f64, f64) {
    let (delta, lam, big) = (params.delta, params.lambda, params.big_lambda);
    let (c, d) = (params.c, params.d);
    let beta = lam / (delta + lam);
    let gamma = lam / (delta + lam + big);
    let l = (-beta * (1.0 - x)).exp() / (1.0 - (-beta * (1.0 - x)).exp());
    let f_l = (c + d - c * x) * l;
    let f_r = (1.0 / (delta + lam + big) + big / lam * c) * (gamma * x).exp() - big / lam * c;
    (f_l, f_r)
}

/// Solves the scalar threshold equation by bisection on
/// `[BRACKET_EPS, 1 - BRACKET_EPS]`.
pub fn solve_threshold(params: &ModelParams) -> Result<f64, Exact1dError> {
    require_uniform_measure(params)?;
    let f = |x: f64| {
        let (l, r) = threshold_sides(x, params);
        l - r
    };
    let (lo, hi) = (BRACKET_EPS, 1.0 - BRACKET_EPS);
    bisect(lo, hi, f, BISECT_STEPS).ok_or(Exact1dError::NoBracket { lo, hi })
}

/// Solves the full quintet: the threshold plus the three value anchors,
/// then the stationary-density weights.
pub fn solve_quintet(params: &ModelParams) -> Result<Exact1DSolution, Exact1dError> {
    let x_bar = solve_threshold(params)?;
    let (delta, lam, big) = (params.delta, params.lambda, params.big_lambda);
    let (c, d) = (params.c, params.d);
    let beta = lam / (delta + lam);
    let gamma = lam / (delta + lam + big);
    let alpha = lam / (lam + big);

    // remaining linear relations given x_bar
    let repl_cost = c * (1.0 - x_bar) + d;
    let diff01 = repl_cost / (1.0 - (beta * (x_bar - 1.0)).exp()); // phi0 - phi1
    let phi0 = (big * (c + d) - big * diff01 + 1.0) / delta;
    let phi1 = phi0 - diff01;
    let phi_plus0 = (lam * phi0 + big * (phi1 + c + d)) / (delta + lam + big);

    let (q, r, c1) = density_weights(x_bar, params)?;

    Ok(Exact1DSolution {
        phi0,
        phi_plus0,
        phi1,
        x_bar,
        beta,
        gamma,
        alpha,
        q,
        r,
        c1,
        delta,
        lambda: lam,
        big_lambda: big,
        c,
        d,
    })
}

/// Stationary-density weights for a given threshold in [0, 1): the point
/// masses `q` (x = 0) and `r` (x = 1) and the left-branch constant `c1`.
/// At `x_bar = 0` the left branch is empty and `q = r lambda / Lambda`.
pub fn density_weights(x_bar: f64, params: &ModelParams) -> Result<(f64, f64, f64), Exact1dError> {
    if !(0.0..1.0).contains(&x_bar) {
        return Err(Exact1dError::InvalidThreshold { x_bar });
    }
    let u = params.lambda / params.big_lambda;
    let alpha = params.lambda / (params.lambda + params.big_lambda);
    let r = 1.0 / (u + (1.0 - x_bar).exp());
    let q = r * (u - (1.0 - x_bar).exp() * ((alpha * x_bar).exp() - 1.0));
    let c1 = alpha * r * (1.0 - x_bar + alpha * x_bar).exp();
    Ok((q, r, c1))
}

/// The three-branch closed-form value function.
pub fn exact_value(x: f64, sol: &Exact1DSolution) -> f64 {
    if x == 0.0 {
        sol.phi0
    } else if x <= sol.x_bar {
        let coeff = sol.phi_plus0 - sol.phi0 - sol.c / sol.lambda * sol.big_lambda;
        coeff * (sol.gamma * x).exp() + sol.phi0 + sol.c / sol.lambda * sol.big_lambda
    } else {
        -(sol.phi0 - sol.phi1) * (sol.beta * (x - 1.0)).exp() + sol.phi0
    }
}

/// The two-branch interior density; the point masses live in `sol.q` and
/// `sol.r`. The left branch owns the threshold point.
pub fn exact_density(x: f64, sol: &Exact1DSolution) -> f64 {
    if x <= sol.x_bar {
        sol.c1 * (-sol.alpha * x).exp()
    } else {
        sol.r * (1.0 - x).exp()
    }
}

/// Exact integral of the interior density over (0, 1).
pub fn interior_mass(sol: &Exact1DSolution) -> f64 {
    let left = if sol.x_bar > 0.0 {
        sol.c1 * (1.0 - (-sol.alpha * sol.x_bar).exp()) / sol.alpha
    } else {
        0.0
    };
    let right = sol.r * ((1.0 - sol.x_bar).exp() - 1.0);
    left + right
}

/// Max absolute residual of the four quintet relations; zero for an exact
/// solution.
pub fn quintet_residual(sol: &Exact1DSolution) -> f64 {
    let (delta, lam, big) = (sol.delta, sol.lambda, sol.big_lambda);
    let (c, d) = (sol.c, sol.d);
    let repl = c * (1.0 - sol.x_bar) + d;
    let eq1 = (delta + lam + big) * sol.phi_plus0 - lam * sol.phi0 - big * (sol.phi1 + c + d);
    let eq2 = (delta + big) * sol.phi0 - big * (sol.phi1 + c + d) - 1.0;
    let eq3 = (sol.phi_plus0 - sol.phi0 - c / lam * big) * (sol.gamma * sol.x_bar).exp() + sol.phi0
        - sol.phi1
        + c / lam * big
        - repl;
    let eq4 = (sol.phi0 - sol.phi1) * (1.0 - (sol.beta * (sol.x_bar - 1.0)).exp()) - repl;
    eq1.abs().max(eq2.abs()).max(eq3.abs()).max(eq4.abs())
}

/// Integral of the value function over (0, x); the jump term of the 1-D
/// optimality equation reduces to this plus `(1 - x) phi0`.
fn value_integral(x: f64, sol: &Exact1DSolution) -> f64 {
    let coeff = sol.phi_plus0 - sol.phi0 - sol.c / sol.lambda * sol.big_lambda;
    let level = sol.phi0 + sol.c / sol.lambda * sol.big_lambda;
    let left = |a: f64| coeff * ((sol.gamma * a).exp() - 1.0) / sol.gamma + level * a;
    if x <= sol.x_bar {
        left(x)
    } else {
        let d01 = sol.phi0 - sol.phi1;
        left(sol.x_bar)
            - d01 * ((sol.beta * (x - 1.0)).exp() - (sol.beta * (sol.x_bar - 1.0)).exp()) / sol.beta
            + sol.phi0 * (x - sol.x_bar)
    }
}

/// Substitutes the closed form into the 1-D optimality equation, with the
/// jump integral evaluated analytically, and returns the sup residual over
/// the given abscissas.
pub fn residual_hjb_1d(sol: &Exact1DSolution, xs: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in xs {
        let phi = exact_value(x, sol);
        let jump_in = if x == 0.0 {
            sol.phi0
        } else {
            value_integral(x, sol) + (1.0 - x) * sol.phi0
        };
        let repl_target = sol.phi1 + sol.c * (1.0 - x) + sol.d;
        let depletion = if x == 0.0 { 1.0 } else { 0.0 };
        let res = sol.delta * phi + sol.lambda * (phi - jump_in)
            + sol.big_lambda * (phi - phi.min(repl_target))
            - depletion;
        worst = worst.max(res.abs());
    }
    worst
}
