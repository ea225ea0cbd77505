//! Solver suite for an impulse-control problem driven by compound-Poisson
//! jumps with Poisson-timed observations: a semi-Lagrangian value-iteration
//! solver for the optimality equation, a conservative finite-volume solver
//! for the stationary state density (with boundary point masses), a
//! closed-form 1-D reference solution, and a Monte-Carlo cross-validator.

pub mod exact1d;
pub mod harness;
pub mod fp;
pub mod hjb;
pub mod jumpgrid;
pub mod mc;
pub mod model;
pub mod numerics;
