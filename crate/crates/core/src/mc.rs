//! Monte-Carlo simulation of the controlled dynamics under a threshold
//! policy: forward-Euler stepping with Bernoulli-thinned jump and
//! observation events, empirical stationary densities with boundary atom
//! estimates, and pathwise discounted-cost estimates.
//!
//! Paths are independent given disjoint RNG streams; ensembles are
//! partitioned into fixed chunks whose partial results are merged in chunk
//! order, so results are identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fp::DensityField;
use crate::jumpgrid::JumpGrid;
use crate::model::{disutility, LevySpec, ModelParams};

/// Replenishment threshold as a function of the observed population.
#[derive(Debug, Clone)]
pub enum ThresholdPolicy {
    /// One level for every y (the 1-D case, or a flat 2-D policy).
    Scalar(f64),
    /// Levels at the vertex ordinates `y_j = j / n`; lookups snap to the
    /// nearest row.
    PerRow(Vec<f64>),
}

impl ThresholdPolicy {
    #[inline]
    pub fn level(&self, y: f64) -> f64 {
        match self {
            ThresholdPolicy::Scalar(v) => *v,
            ThresholdPolicy::PerRow(rows) => {
                let n = rows.len() - 1;
                let j = (y * n as f64 + 0.5).floor() as usize;
                rows[j.min(n)]
            }
        }
    }
}

/// One path's state and discounted-cost accumulators.
#[derive(Debug, Clone, Default)]
pub struct PathState {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Discounted time spent depleted.
    pub depletion_cost: f64,
    /// Discounted population disutility.
    pub disutility_cost: f64,
    /// Discounted replenishment payments.
    pub replenish_cost: f64,
    pub jumps: usize,
    pub observations: usize,
    /// Present only when event recording was requested.
    pub events: Option<Vec<PathEvent>>,
}

impl PathState {
    pub fn total_cost(&self) -> f64 {
        self.depletion_cost + self.disutility_cost + self.replenish_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathEvent {
    Jump { t: f64, z: f64 },
    Replenish { t: f64, amount: f64 },
    ObserveOnly { t: f64 },
}

/// Inverse-CDF sample of the jump size restricted to the discretized
/// support (normalized by the effective intensity).
pub fn sample_jump_size(u: f64, params: &ModelParams) -> f64 {
    let a = params.z_lo.clamp(0.0, 1.0);
    let b = params.z_hi.clamp(0.0, 1.0);
    match params.levy {
        LevySpec::Uniform => a + u * (b - a),
        LevySpec::TruncatedExp { theta } => {
            let ea = (-theta * a).exp();
            let eb = (-theta * b).exp();
            -(ea - u * (ea - eb)).ln() / theta
        }
    }
}

struct StepContext<'a> {
    params: &'a ModelParams,
    policy: &'a ThresholdPolicy,
    dt: f64,
    lambda_eff: f64,
    /// exp(-delta dt), applied incrementally to the running discount.
    decay: f64,
    /// Exact integral of the discount factor over one step at unit start.
    running_weight: f64,
    /// Discount multiplier for events inside the step (midpoint).
    event_weight: f64,
}

impl<'a> StepContext<'a> {
    fn new(params: &'a ModelParams, policy: &'a ThresholdPolicy, dt: f64) -> Self {
        let delta = params.delta;
        StepContext {
            params,
            policy,
            dt,
            lambda_eff: crate::model::levy_mass(params.z_lo, params.z_hi, params),
            decay: (-delta * dt).exp(),
            running_weight: (1.0 - (-delta * dt).exp()) / delta,
            event_weight: (-delta * dt * 0.5).exp(),
        }
    }

    /// Advances one step; `discount` carries exp(-delta t) across steps.
    #[inline]
    fn step(&self, state: &mut PathState, discount: f64, rng: &mut ChaCha8Rng) {
        let params = self.params;
        // running costs accrue from the current state over (t, t + dt)
        if state.x == 0.0 {
            state.depletion_cost += discount * self.running_weight;
        }
        if state.y > 0.0 {
            state.disutility_cost +=
                discount * self.running_weight * disutility(state.y, params).unwrap_or(0.0);
        }

        // deterministic growth
        let f = params.growth_rate * state.y * (1.0 - state.y);
        if f != 0.0 {
            state.y = (state.y + f * self.dt).clamp(0.0, 1.0);
        }

        // jump first, observation second within a step
        if self.lambda_eff > 0.0 && rng.gen::<f64>() < self.lambda_eff * self.dt {
            let z = sample_jump_size(rng.gen::<f64>(), params);
            let x_pre = state.x;
            state.x = (state.x - z).max(0.0);
            if state.y > 0.0 {
                state.y *= (-params.xi * x_pre.min(z)).exp();
            }
            state.jumps += 1;
            if let Some(events) = state.events.as_mut() {
                events.push(PathEvent::Jump { t: state.t, z });
            }
        }
        if params.big_lambda > 0.0 && rng.gen::<f64>() < params.big_lambda * self.dt {
            state.observations += 1;
            let amount = 1.0 - state.x;
            if state.x <= self.policy.level(state.y) && amount > 0.0 {
                state.replenish_cost +=
                    discount * self.event_weight * (params.c * amount + params.d);
                state.x = 1.0;
                if let Some(events) = state.events.as_mut() {
                    events.push(PathEvent::Replenish { t: state.t, amount });
                }
            } else if let Some(events) = state.events.as_mut() {
                events.push(PathEvent::ObserveOnly { t: state.t });
            }
        }
        state.t += self.dt;
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates a single path to the horizon.
pub fn simulate_path(
    x0: f64,
    y0: f64,
    horizon: f64,
    dt: f64,
    params: &ModelParams,
    policy: &ThresholdPolicy,
    rng: &mut ChaCha8Rng,
    record_events: bool,
) -> PathState {
    let ctx = StepContext::new(params, policy, dt);
    let mut state = PathState {
        x: x0,
        y: y0,
        events: record_events.then(Vec::new),
        ..PathState::default()
    };
    let steps = (horizon / dt).round() as usize;
    let mut discount = 1.0;
    for _ in 0..steps {
        ctx.step(&mut state, discount, rng);
        discount *= ctx.decay;
    }
    state
}

/// Ensemble spec for the stationary-density estimate.
#[derive(Debug, Clone)]
pub struct DensityRun {
    pub paths: usize,
    pub dt: f64,
    /// Days discarded before sampling; defaults to `20 / min positive rate`.
    pub burn_in: f64,
    /// Days between retained samples along one path.
    pub sample_every: f64,
    /// Retained samples per path.
    pub samples_per_path: usize,
    pub seed: u64,
    pub x0: f64,
    pub y0: f64,
}

impl DensityRun {
    pub fn defaults(params: &ModelParams) -> Self {
        DensityRun {
            paths: 10_000,
            dt: 0.02,
            burn_in: default_burn_in(params),
            sample_every: 1.0,
            samples_per_path: 100,
            seed: 1,
            x0: 0.5,
            y0: 0.5,
        }
    }
}

/// Burn-in heuristic: twenty times the slowest positive rate's timescale.
pub fn default_burn_in(params: &ModelParams) -> f64 {
    let mut slowest = f64::INFINITY;
    for rate in [params.delta, params.big_lambda, params.lambda] {
        if rate > 0.0 {
            slowest = slowest.min(rate);
        }
    }
    20.0 / slowest
}

/// Time-averaged empirical density over the finite-volume cells, with the
/// boundary atoms read off the exact-boundary states (truncation pins
/// x = 0, replenishment pins x = 1). Total mass is 1 by construction.
pub fn estimate_density(grid: &JumpGrid, params: &ModelParams, policy: &ThresholdPolicy, run: &DensityRun) -> DensityField {
    let n = grid.n;
    let ny = grid.ny_cell_rows;
    let mut field = DensityField::uniform(grid);
    field.p.iter_mut().for_each(|v| *v = 0.0);
    let (hx, hy) = (field.hx, field.hy);

    let burn_steps = (run.burn_in / run.dt).round() as usize;
    let gap_steps = (run.sample_every / run.dt).round().max(1.0) as usize;
    let chunks = 256.min(run.paths.max(1));
    let bins = ny * n + 2 * ny;

    let partials: Vec<(Vec<u64>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = run.paths * chunk / chunks;
            let hi = run.paths * (chunk + 1) / chunks;
            let mut counts = vec![0u64; bins];
            let mut total = 0u64;
            for path in lo..hi {
                let mut rng = stream_rng(run.seed, path as u64);
                let ctx = StepContext::new(params, policy, run.dt);
                let mut state =
                    PathState { x: run.x0, y: run.y0, ..PathState::default() };
                for _ in 0..burn_steps {
                    ctx.step(&mut state, 0.0, &mut rng);
                }
                for _ in 0..run.samples_per_path {
                    for _ in 0..gap_steps {
                        ctx.step(&mut state, 0.0, &mut rng);
                    }
                    let row = if ny == 1 {
                        0
                    } else {
                        ((state.y * n as f64).floor() as usize).min(ny - 1)
                    };
                    let slot = if state.x == 0.0 {
                        ny * n + row
                    } else if state.x == 1.0 {
                        ny * n + ny + row
                    } else {
                        row * n + ((state.x * n as f64).floor() as usize).min(n - 1)
                    };
                    counts[slot] += 1;
                    total += 1;
                }
            }
            (counts, total)
        })
        .collect();

    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for (part, t) in partials {
        for (a, b) in counts.iter_mut().zip(part) {
            *a += b;
        }
        total += t;
    }
    let norm = 1.0 / total as f64;
    for j in 0..ny {
        for i in 0..n {
            field.p[j * n + i] = counts[j * n + i] as f64 * norm / (hx * hy);
        }
        field.q[j] = counts[ny * n + j] as f64 * norm / hy;
        field.r[j] = counts[ny * n + ny + j] as f64 * norm / hy;
    }
    field.t = run.burn_in + run.samples_per_path as f64 * run.sample_every;
    field.steps = burn_steps + run.samples_per_path * gap_steps;
    field
}

/// Sample-mean estimate of the discounted objective from a start state.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Hard bound on the horizon-truncation bias.
    pub bias_bound: f64,
    pub paths: usize,
}

/// Ensemble spec for the objective estimate.
#[derive(Debug, Clone)]
pub struct ObjectiveRun {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

pub fn estimate_objective(
    x0: f64,
    y0: f64,
    params: &ModelParams,
    policy: &ThresholdPolicy,
    run: &ObjectiveRun,
) -> ObjectiveEstimate {
    let chunks = 256.min(run.paths.max(1));
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = run.paths * chunk / chunks;
            let hi = run.paths * (chunk + 1) / chunks;
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for path in lo..hi {
                let mut rng = stream_rng(run.seed, path as u64);
                let cost = simulate_path(x0, y0, run.horizon, run.dt, params, policy, &mut rng, false)
                    .total_cost();
                sum += cost;
                sumsq += cost * cost;
            }
            (sum, sumsq)
        })
        .collect();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for (s, s2) in partials {
        sum += s;
        sumsq += s2;
    }
    let count = run.paths as f64;
    let mean = sum / count;
    let var = ((sumsq / count - mean * mean) * count / (count - 1.0)).max(0.0);
    let s_one = disutility(1.0, params).unwrap_or(0.0);
    ObjectiveEstimate {
        mean,
        std_err: (var / count).sqrt(),
        bias_bound: (-params.delta * run.horizon).exp() * (1.0 + s_one) / params.delta,
        paths: run.paths,
    }
}
