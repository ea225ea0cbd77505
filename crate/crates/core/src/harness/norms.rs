//! Weighted error norms and the convergence-rate formula used by the
//! sweep tables.

use crate::exact1d::{self, Exact1DSolution};
use crate::fp::DensityField;
use crate::hjb::ValueField;
use crate::numerics::KahanSum;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// `l1 = sum |e| w`, `l2 = sqrt(sum e^2 w)`, `linf = max |e|` over paired
/// entries with per-entry weights.
pub fn error_norms(values: &[f64], reference: &[f64], weights: &[f64]) -> Result<Norms, HarnessError> {
    if values.len() != reference.len() || values.len() != weights.len() {
        return Err(HarnessError::GridMismatch(format!(
            "{} values vs {} reference entries vs {} weights",
            values.len(),
            reference.len(),
            weights.len()
        )));
    }
    let mut l1 = KahanSum::new();
    let mut l2 = KahanSum::new();
    let mut linf = 0.0f64;
    for ((&v, &r), &w) in values.iter().zip(reference).zip(weights) {
        let e = (v - r).abs();
        l1.add(e * w);
        l2.add(e * e * w);
        linf = linf.max(e);
    }
    Ok(Norms { l1: l1.value(), l2: l2.value().sqrt(), linf })
}

/// Convergence rate between two successive refinement levels:
/// `log2(e_coarse / e_fine)`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Value-field error against the closed form at the vertices, including
/// the depleted vertex where the reference is the atom value. Weight h per
/// vertex (1-D fields only).
pub fn hjb_error_norms(field: &ValueField, sol: &Exact1DSolution) -> Result<Norms, HarnessError> {
    if field.ny_rows != 1 {
        return Err(HarnessError::GridMismatch(
            "closed-form comparison needs a 1-D value field".into(),
        ));
    }
    let n = field.n;
    let h = 1.0 / n as f64;
    let reference: Vec<f64> = (0..=n).map(|i| exact1d::exact_value(i as f64 * h, sol)).collect();
    let weights = vec![h; n + 1];
    error_norms(&field.phi, &reference, &weights)
}

/// Density error against the closed form: cells at their centers with
/// weight h, boundary atoms with weight h (1-D fields only).
pub fn fp_error_norms(field: &DensityField, sol: &Exact1DSolution) -> Result<Norms, HarnessError> {
    if field.ny_cells != 1 {
        return Err(HarnessError::GridMismatch(
            "closed-form comparison needs a 1-D density field".into(),
        ));
    }
    let n = field.n;
    let h = field.hx;
    let mut values = Vec::with_capacity(n + 2);
    let mut reference = Vec::with_capacity(n + 2);
    for i in 1..=n {
        values.push(field.p_at(i, 1));
        reference.push(exact1d::exact_density((i as f64 - 0.5) * h, sol));
    }
    values.push(field.q[0]);
    reference.push(sol.q);
    values.push(field.r[0]);
    reference.push(sol.r);
    let weights = vec![h; n + 2];
    error_norms(&values, &reference, &weights)
}
