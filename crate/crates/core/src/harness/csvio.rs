//! CSV emission and ingestion. CSV is the single interchange format; all
//! floats are written with the shortest round-trip representation so that
//! identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::exact1d::{self, Exact1DSolution};
use crate::fp::DensityField;
use crate::hjb::ValueField;

use super::HarnessError;

/// Vertex field: `i,j,x,y,Phi,eta`.
pub fn value_field_csv(field: &ValueField) -> String {
    let n = field.n;
    let h = 1.0 / n as f64;
    let mut out = String::from("i,j,x,y,Phi,eta\n");
    for j in 0..field.ny_rows {
        for i in 0..=n {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                j,
                i as f64 * h,
                j as f64 * h,
                field.phi_at(i, j),
                field.eta_at(i, j)
            );
        }
    }
    out
}

/// Per-row threshold table: `j,y,x_bar`.
pub fn thresholds_csv(x_bar: &[f64], n: usize) -> String {
    let h = 1.0 / n as f64;
    let mut out = String::from("j,y,x_bar\n");
    for (j, &v) in x_bar.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", j, j as f64 * h, v);
    }
    out
}

/// Reads a threshold table back into the per-row vector.
pub fn read_thresholds_csv(text: &str) -> Result<Vec<f64>, HarnessError> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(HarnessError::Config(format!(
                "thresholds csv line {} has {} columns, want 3",
                ln + 1,
                cols.len()
            )));
        }
        let v: f64 = cols[2]
            .trim()
            .parse()
            .map_err(|e| HarnessError::Config(format!("thresholds csv line {}: {e}", ln + 1)))?;
        rows.push(v);
    }
    if rows.is_empty() {
        return Err(HarnessError::Config("thresholds csv has no data rows".into()));
    }
    Ok(rows)
}

/// Density field: interior cell rows plus atom rows tagged by boundary.
/// Columns: `boundary,i,j,x,y,value` (i is empty on atom rows).
pub fn density_field_csv(field: &DensityField) -> String {
    let n = field.n;
    let mut out = String::from("boundary,i,j,x,y,value\n");
    for j in 1..=field.ny_cells {
        let y = (j as f64 - 0.5) * field.hy;
        for i in 1..=n {
            let x = (i as f64 - 0.5) * field.hx;
            let _ = writeln!(out, "interior,{},{},{},{},{}", i, j, x, y, field.p_at(i, j));
        }
    }
    for j in 1..=field.ny_cells {
        let y = (j as f64 - 0.5) * field.hy;
        let _ = writeln!(out, "left,,{},{},{},{}", j, 0.0, y, field.q[j - 1]);
    }
    for j in 1..=field.ny_cells {
        let y = (j as f64 - 0.5) * field.hy;
        let _ = writeln!(out, "right,,{},{},{},{}", j, 1.0, y, field.r[j - 1]);
    }
    out
}

/// Reads a density CSV back (for diffing solver and simulation output).
pub fn read_density_csv(text: &str) -> Result<DensityField, HarnessError> {
    let mut interior: Vec<(usize, usize, f64)> = Vec::new();
    let mut left: Vec<(usize, f64)> = Vec::new();
    let mut right: Vec<(usize, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(HarnessError::Config(format!(
                "density csv line {} has {} columns, want 6",
                ln + 1,
                cols.len()
            )));
        }
        let j: usize = cols[2].trim().parse().map_err(|_| bad_line(ln))?;
        let value: f64 = cols[5].trim().parse().map_err(|_| bad_line(ln))?;
        match cols[0] {
            "interior" => {
                let i: usize = cols[1].trim().parse().map_err(|_| bad_line(ln))?;
                interior.push((i, j, value));
            }
            "left" => left.push((j, value)),
            "right" => right.push((j, value)),
            other => {
                return Err(HarnessError::Config(format!(
                    "density csv line {}: unknown boundary tag '{other}'",
                    ln + 1
                )))
            }
        }
    }
    let n = interior.iter().map(|&(i, _, _)| i).max().unwrap_or(0);
    let ny = interior.iter().map(|&(_, j, _)| j).max().unwrap_or(0);
    if n == 0 || ny == 0 || interior.len() != n * ny || left.len() != ny || right.len() != ny {
        return Err(HarnessError::Config("density csv is not a full grid".into()));
    }
    let mut field = DensityField {
        n,
        ny_cells: ny,
        hx: 1.0 / n as f64,
        hy: if ny == 1 { 1.0 } else { 1.0 / n as f64 },
        p: vec![0.0; n * ny],
        q: vec![0.0; ny],
        r: vec![0.0; ny],
        t: 0.0,
        steps: 0,
        max_mass_dev: 0.0,
    };
    for (i, j, v) in interior {
        field.p[(j - 1) * n + (i - 1)] = v;
    }
    for (j, v) in left {
        field.q[j - 1] = v;
    }
    for (j, v) in right {
        field.r[j - 1] = v;
    }
    Ok(field)
}

fn bad_line(ln: usize) -> HarnessError {
    HarnessError::Config(format!("density csv line {}: parse error", ln + 1))
}

/// Mass history: `step,t,mass`.
pub fn mass_history_csv(history: &[(usize, f64, f64)]) -> String {
    let mut out = String::from("step,t,mass\n");
    for &(step, t, mass) in history {
        let _ = writeln!(out, "{},{},{}", step, t, mass);
    }
    out
}

/// Closed-form profile: `x,value,density` at a uniform resolution.
pub fn exact1d_csv(sol: &Exact1DSolution, points: usize) -> String {
    let mut out = String::from("x,value,density\n");
    for k in 0..=points {
        let x = k as f64 / points as f64;
        let _ = writeln!(
            out,
            "{},{},{}",
            x,
            exact1d::exact_value(x, sol),
            exact1d::exact_density(x.clamp(1e-12, 1.0), sol)
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
