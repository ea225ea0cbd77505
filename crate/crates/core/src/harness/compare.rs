//! Cross-comparison of two density fields on the same grid schema
//! (solver vs simulation, or solver vs closed form).

use serde::Serialize;

use crate::fp::DensityField;
use crate::numerics::KahanSum;

use super::{CompareBlock, HarnessError};

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub left_max: [f64; 3],
    pub right_max: [f64; 3],
    /// Interior l1 distance, cell-weighted.
    pub interior_l1: f64,
    /// l1 distance of the boundary-atom profiles.
    pub atom_l1: f64,
    /// Relative gaps of the per-component maxima (p, q, r).
    pub max_rel_gap: [f64; 3],
    pub interior_l1_max: f64,
    pub atom_rel_max: f64,
    pub pass: bool,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0f64, f64::max)
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Per-component maxima, interior l1 distance, and atom-profile gaps,
/// judged against the configured tolerances (maxima of q and r only; the
/// interior is judged by the l1 distance).
pub fn compare_densities(
    left: &DensityField,
    right: &DensityField,
    tol: &CompareBlock,
) -> Result<CompareReport, HarnessError> {
    if left.n != right.n || left.ny_cells != right.ny_cells {
        return Err(HarnessError::GridMismatch(format!(
            "left {}x{} vs right {}x{}",
            left.n, left.ny_cells, right.n, right.ny_cells
        )));
    }
    let cell_w = left.hx * left.hy;
    let mut interior = KahanSum::new();
    for (a, b) in left.p.iter().zip(&right.p) {
        interior.add((a - b).abs() * cell_w);
    }
    let mut atoms = KahanSum::new();
    for (a, b) in left.q.iter().zip(&right.q) {
        atoms.add((a - b).abs() * left.hy);
    }
    for (a, b) in left.r.iter().zip(&right.r) {
        atoms.add((a - b).abs() * left.hy);
    }
    let left_max = [max_of(&left.p), max_of(&left.q), max_of(&left.r)];
    let right_max = [max_of(&right.p), max_of(&right.q), max_of(&right.r)];
    let max_rel_gap = [
        rel_gap(left_max[0], right_max[0]),
        rel_gap(left_max[1], right_max[1]),
        rel_gap(left_max[2], right_max[2]),
    ];
    let interior_l1 = interior.value();
    let pass = interior_l1 <= tol.interior_l1_max
        && max_rel_gap[1] <= tol.atom_rel_max
        && max_rel_gap[2] <= tol.atom_rel_max;
    Ok(CompareReport {
        left_max,
        right_max,
        interior_l1,
        atom_l1: atoms.value(),
        max_rel_gap,
        interior_l1_max: tol.interior_l1_max,
        atom_rel_max: tol.atom_rel_max,
        pass,
    })
}
