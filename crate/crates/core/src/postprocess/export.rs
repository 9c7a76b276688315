//! Field export (CSV, legacy VTK) and field CSV import.
//!
//! Field CSV columns: `element_id, cx, cy, s, t, m, n, theta_deg`, with the
//! element center in meters, the design variables `(s, t)`, the physical
//! orientation `(m, n)` and the fiber angle in `(-90, 90]` degrees.
//!
//! Constraint CSV columns: `element_id, cx, cy, kappa, psi, kappa_ratio,
//! psi_ratio`, with curl and divergence in 1/m and ratios to their bounds.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manufacturing::{Bounds, ConstraintField};
use crate::mesh::StructuredGrid;
use crate::orientation::{line_angle_deg, DesignState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub element_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub s: f64,
    pub t: f64,
    pub m: f64,
    pub n: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub element_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub kappa: f64,
    pub psi: f64,
    pub kappa_ratio: f64,
    pub psi_ratio: f64,
}

pub fn field_records(grid: &StructuredGrid, state: &DesignState) -> Vec<FieldRecord> {
    (0..grid.n_elements())
        .map(|e| {
            let [cx, cy] = grid.centroid(e);
            let [m, n] = state.field[e];
            FieldRecord {
                element_id: e,
                cx,
                cy,
                s: state.s[e],
                t: state.t[e],
                m,
                n,
                theta_deg: line_angle_deg(m, n),
            }
        })
        .collect()
}

pub fn constraint_records(grid: &StructuredGrid, cf: &ConstraintField, bounds: &Bounds) -> Vec<ConstraintRecord> {
    (0..grid.n_elements())
        .map(|e| {
            let [cx, cy] = grid.centroid(e);
            ConstraintRecord {
                element_id: e,
                cx,
                cy,
                kappa: cf.kappa[e],
                psi: cf.psi[e],
                kappa_ratio: cf.kappa[e].abs() / bounds.kappa_max,
                psi_ratio: cf.psi[e].abs() / bounds.psi_max,
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::FieldFormat {
            path: path.into(),
            message: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in records {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_field_csv(path: &Path, grid: &StructuredGrid, state: &DesignState) -> Result<()> {
    write_csv(path, &field_records(grid, state))
}

pub fn write_constraint_csv(path: &Path, grid: &StructuredGrid, cf: &ConstraintField, bounds: &Bounds) -> Result<()> {
    write_csv(path, &constraint_records(grid, cf, bounds))
}

/// A field CSV read back, with the grid recovered from the element centers.
#[derive(Debug, Clone)]
pub struct FieldTable {
    pub grid: StructuredGrid,
    /// Records in the grid's element order.
    pub records: Vec<FieldRecord>,
}

impl FieldTable {
    pub fn field(&self) -> Vec<[f64; 2]> {
        self.records.iter().map(|r| [r.m, r.n]).collect()
    }

    pub fn design(&self) -> (Vec<f64>, Vec<f64>) {
        (self.records.iter().map(|r| r.s).collect(), self.records.iter().map(|r| r.t).collect())
    }
}

pub fn read_field_csv(path: &Path) -> Result<FieldTable> {
    let bad = |message: String| Error::FieldFormat {
        path: path.into(),
        message,
    };
    let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => bad(format!("{other:?}")),
    })?;
    let mut recs: Vec<FieldRecord> = Vec::new();
    for (line, r) in rd.deserialize().enumerate() {
        let r: FieldRecord = r.map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
        recs.push(r);
    }
    if recs.is_empty() {
        return Err(bad("no rows".into()));
    }
    let hx = infer_spacing(recs.iter().map(|r| r.cx)).ok_or_else(|| bad("cannot infer element width".into()))?;
    let hy = infer_spacing(recs.iter().map(|r| r.cy)).ok_or_else(|| bad("cannot infer element height".into()))?;
    let mut cells = Vec::with_capacity(recs.len());
    for r in &recs {
        let fi = r.cx / hx - 0.5;
        let fj = r.cy / hy - 0.5;
        if fi < -1e-6 || fj < -1e-6 || (fi - fi.round()).abs() > 1e-6 || (fj - fj.round()).abs() > 1e-6 {
            return Err(bad(format!("element {} center ({}, {}) is off the grid", r.element_id, r.cx, r.cy)));
        }
        cells.push((fi.round() as usize, fj.round() as usize));
    }
    let nx = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
    let ny = cells.iter().map(|c| c.1).max().unwrap_or(0) + 1;
    let mut active = vec![false; nx * ny];
    for &(i, j) in &cells {
        if std::mem::replace(&mut active[i * ny + j], true) {
            return Err(bad(format!("cell ({i}, {j}) appears twice")));
        }
    }
    let grid = StructuredGrid::new(nx, ny, hx, hy, active)?;
    let mut records = recs.clone();
    for (r, &(i, j)) in recs.iter().zip(&cells) {
        let e = grid.element_at(i, j).expect("cell marked active");
        records[e] = *r;
    }
    Ok(FieldTable { grid, records })
}

/// Cell size from centers at `(k + 1/2) h`: the smallest gap between
/// distinct centers, or twice the center when only one column exists.
fn infer_spacing(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let lo = *v.first()?;
    let tol = 1e-9 * v.last()?.abs().max(1e-300);
    let gap = v.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > tol).fold(f64::INFINITY, f64::min);
    let h = if gap.is_finite() { gap } else { 2.0 * lo };
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Legacy ASCII VTK on the full cell lattice. Inactive cells hold zeros and
/// an `active` scalar marks the mask.
pub fn vtk_string(grid: &StructuredGrid, scalars: &[(&str, &[f64])], vectors: &[(&str, &[[f64; 2]])]) -> String {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "orientation field");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", nx + 1, ny + 1);
    let _ = writeln!(s, "ORIGIN 0 0 0");
    let _ = writeln!(s, "SPACING {:e} {:e} 1", grid.hx(), grid.hy());
    let _ = writeln!(s, "CELL_DATA {}", nx * ny);
    // VTK orders cells with x fastest.
    let cells = || (0..ny).flat_map(move |j| (0..nx).map(move |i| grid.element_at(i, j)));
    let _ = writeln!(s, "SCALARS active int 1\nLOOKUP_TABLE default");
    for e in cells() {
        let _ = writeln!(s, "{}", u8::from(e.is_some()));
    }
    for (name, vals) in scalars {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for e in cells() {
            let _ = writeln!(s, "{:e}", e.map_or(0.0, |e| vals[e]));
        }
    }
    for (name, vals) in vectors {
        let _ = writeln!(s, "VECTORS {name} double");
        for e in cells() {
            let [a, b] = e.map_or([0.0, 0.0], |e| vals[e]);
            let _ = writeln!(s, "{a:e} {b:e} 0");
        }
    }
    s
}

pub fn write_vtk(path: &Path, grid: &StructuredGrid, scalars: &[(&str, &[f64])], vectors: &[(&str, &[[f64; 2]])]) -> Result<()> {
    std::fs::write(path, vtk_string(grid, scalars, vectors)).map_err(|e| Error::io(path, e))
}
