//! Tow curvature (curl) and gap/overlap density (divergence) of the
//! orientation field, evaluated with finite differences between element
//! centroids, and the local constraints built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;

/// Per-element finite-difference weights for `∂/∂x` and `∂/∂y`.
///
/// Elements with both neighbors along an axis use central differences;
/// elements missing one (grid edge or masked cell) fall back to a one-sided
/// first-order difference on that axis.
#[derive(Debug, Clone)]
pub struct DiffStencil {
    dx: Vec<Vec<(usize, f64)>>,
    dy: Vec<Vec<(usize, f64)>>,
}

fn axis_weights(e: usize, lo: Option<usize>, hi: Option<usize>, h: f64) -> Vec<(usize, f64)> {
    match (lo, hi) {
        (Some(l), Some(r)) => vec![(l, -0.5 / h), (r, 0.5 / h)],
        (None, Some(r)) => vec![(e, -1.0 / h), (r, 1.0 / h)],
        (Some(l), None) => vec![(l, -1.0 / h), (e, 1.0 / h)],
        (None, None) => Vec::new(),
    }
}

impl DiffStencil {
    pub fn new(grid: &StructuredGrid) -> Self {
        let (dx, dy) = (0..grid.n_elements())
            .map(|e| {
                let nb = grid.neighbors(e);
                (
                    axis_weights(e, nb.left, nb.right, grid.hx()),
                    axis_weights(e, nb.down, nb.up, grid.hy()),
                )
            })
            .unzip();
        Self { dx, dy }
    }

    pub fn n_elements(&self) -> usize {
        self.dx.len()
    }

    pub fn dx(&self, e: usize) -> &[(usize, f64)] {
        &self.dx[e]
    }

    pub fn dy(&self, e: usize) -> &[(usize, f64)] {
        &self.dy[e]
    }

    /// True when element `e` uses central differences on both axes.
    pub fn is_interior(&self, e: usize) -> bool {
        self.dx[e].len() == 2 && self.dy[e].len() == 2 && self.dx[e].iter().all(|&(k, _)| k != e) && self.dy[e].iter().all(|&(k, _)| k != e)
    }

    /// Curl `κ = ∂ñ/∂x − ∂m̃/∂y` and divergence `ψ = ∂m̃/∂x + ∂ñ/∂y` per element.
    pub fn curl_div(&self, field: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(field.len(), self.n_elements());
        (0..self.n_elements())
            .map(|e| {
                let (mut dmdx, mut dndx, mut dmdy, mut dndy) = (0.0, 0.0, 0.0, 0.0);
                for &(k, w) in &self.dx[e] {
                    dmdx += w * field[k][0];
                    dndx += w * field[k][1];
                }
                for &(k, w) in &self.dy[e] {
                    dmdy += w * field[k][0];
                    dndy += w * field[k][1];
                }
                (dndx - dmdy, dmdx + dndy)
            })
            .unzip()
    }
}

/// Convenience wrapper building the stencil on the fly.
pub fn curl_div_fd(grid: &StructuredGrid, field: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    DiffStencil::new(grid).curl_div(field)
}

/// Maximum allowed curvature and divergence magnitudes (1/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub kappa_max: f64,
    pub psi_max: f64,
}

impl Bounds {
    /// An infinite bound switches that constraint off (`g = −1` everywhere).
    pub fn new(kappa_max: f64, psi_max: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0;
        if !ok(kappa_max) || !ok(psi_max) {
            return Err(Error::InvalidParameter(format!(
                "bounds must be positive, got kappa_max={kappa_max}, psi_max={psi_max}"
            )));
        }
        Ok(Self { kappa_max, psi_max })
    }

    /// Minimum tow turning radius `1/κ̄` (m).
    pub fn min_turning_radius(&self) -> f64 {
        1.0 / self.kappa_max
    }
}

/// Curl, divergence and the signed constraint vector of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintField {
    pub kappa: Vec<f64>,
    pub psi: Vec<f64>,
    /// `[κ/κ̄ − 1, −κ/κ̄ − 1, ψ/ψ̄ − 1, −ψ/ψ̄ − 1]`, each block `n_e` long.
    pub g: Vec<f64>,
}

impl ConstraintField {
    pub fn evaluate(stencil: &DiffStencil, field: &[[f64; 2]], bounds: &Bounds) -> Self {
        let (kappa, psi) = stencil.curl_div(field);
        let g = assemble_constraints(&kappa, &psi, bounds);
        Self { kappa, psi, g }
    }

    pub fn max_abs_kappa(&self) -> f64 {
        self.kappa.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_psi(&self) -> f64 {
        self.psi.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn assemble_constraints(kappa: &[f64], psi: &[f64], bounds: &Bounds) -> Vec<f64> {
    let mut g = Vec::with_capacity(4 * kappa.len());
    g.extend(kappa.iter().map(|k| k / bounds.kappa_max - 1.0));
    g.extend(kappa.iter().map(|k| -k / bounds.kappa_max - 1.0));
    g.extend(psi.iter().map(|p| p / bounds.psi_max - 1.0));
    g.extend(psi.iter().map(|p| -p / bounds.psi_max - 1.0));
    g
}

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `Aᵀ y`.
    pub fn transpose_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi != 0.0 {
                for &(c, v) in row {
                    out[c] += v * yi;
                }
            }
        }
        out
    }
}

fn push_merged(row: &mut Vec<(usize, f64)>, col: usize, v: f64) {
    if let Some(entry) = row.iter_mut().find(|(c, _)| *c == col) {
        entry.1 += v;
    } else {
        row.push((col, v));
    }
}

/// Jacobian of `g` with respect to the physical field, columns
/// `[m̃_0 .. m̃_ne, ñ_0 .. ñ_ne]`. The constraints are linear in the field, so
/// this matrix depends only on the grid and the bounds.
pub fn constraint_gradients(stencil: &DiffStencil, bounds: &Bounds) -> SparseRows {
    let ne = stencil.n_elements();
    let kappa_rows: Vec<Vec<(usize, f64)>> = (0..ne)
        .map(|e| {
            let mut row = Vec::with_capacity(4);
            for &(k, w) in stencil.dx(e) {
                push_merged(&mut row, ne + k, w / bounds.kappa_max);
            }
            for &(k, w) in stencil.dy(e) {
                push_merged(&mut row, k, -w / bounds.kappa_max);
            }
            row
        })
        .collect();
    let psi_rows: Vec<Vec<(usize, f64)>> = (0..ne)
        .map(|e| {
            let mut row = Vec::with_capacity(4);
            for &(k, w) in stencil.dx(e) {
                push_merged(&mut row, k, w / bounds.psi_max);
            }
            for &(k, w) in stencil.dy(e) {
                push_merged(&mut row, ne + k, w / bounds.psi_max);
            }
            row
        })
        .collect();
    let negate = |rows: &[Vec<(usize, f64)>]| -> Vec<Vec<(usize, f64)>> {
        rows.iter().map(|r| r.iter().map(|&(c, v)| (c, -v)).collect()).collect()
    };
    let mut rows = kappa_rows.clone();
    rows.extend(negate(&kappa_rows));
    rows.extend(psi_rows.clone());
    rows.extend(negate(&psi_rows));
    SparseRows { n_cols: 2 * ne, rows }
}

/// `(∂g/∂(m̃, ñ))ᵀ · dg` per element, without forming the Jacobian.
pub fn constraint_vjp(stencil: &DiffStencil, bounds: &Bounds, dg: &[f64]) -> Vec<[f64; 2]> {
    let ne = stencil.n_elements();
    assert_eq!(dg.len(), 4 * ne);
    let mut out = vec![[0.0; 2]; ne];
    for e in 0..ne {
        let wk = (dg[e] - dg[ne + e]) / bounds.kappa_max;
        let wp = (dg[2 * ne + e] - dg[3 * ne + e]) / bounds.psi_max;
        if wk == 0.0 && wp == 0.0 {
            continue;
        }
        for &(k, w) in stencil.dx(e) {
            out[k][1] += wk * w;
            out[k][0] += wp * w;
        }
        for &(k, w) in stencil.dy(e) {
            out[k][0] -= wk * w;
            out[k][1] += wp * w;
        }
    }
    out
}

/// Tow placement process limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Allowed gap fraction.
    pub gap: f64,
    /// Allowed overlap fraction.
    pub overlap: f64,
    /// Minimum tow cut length (m).
    pub cut_length: f64,
    /// Minimum tow add length (m).
    pub add_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceLimits {
    pub psi_min: f64,
    pub psi_max: f64,
    /// Symmetric magnitude bound `max(|ψ_min|, |ψ_max|)`.
    pub psi_bar: f64,
    /// `ψ_min > ψ_max`, which happens when `1 + a_g < 2(1 − a_o)`.
    pub inverted: bool,
}

/// Divergence limits from gap/overlap fractions and cut/add lengths.
pub fn bounds_from_process(p: &ProcessParams) -> Result<DivergenceLimits> {
    if !(p.cut_length > 0.0 && p.add_length > 0.0) {
        return Err(Error::InvalidParameter("tow cut and add lengths must be positive".into()));
    }
    if !(0.0..1.0).contains(&p.overlap) {
        return Err(Error::InvalidParameter(format!(
            "overlap fraction must lie in [0, 1), got {}",
            p.overlap
        )));
    }
    let arg = (1.0 + p.gap) / (2.0 * (1.0 - p.overlap));
    if !(arg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gap fraction {} gives a non-positive log argument",
            p.gap
        )));
    }
    let psi_min = -arg.ln() / p.cut_length;
    let psi_max = arg.ln() / p.add_length;
    let inverted = psi_min > psi_max;
    if inverted {
        log::warn!("process limits give psi_min = {psi_min} > psi_max = {psi_max}; using the larger magnitude");
    }
    Ok(DivergenceLimits {
        psi_min,
        psi_max,
        psi_bar: psi_min.abs().max(psi_max.abs()),
        inverted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representability {
    /// `1/hx + 1/hy`.
    pub limit: f64,
    /// `max(κ̄, ψ̄) / limit`.
    pub ratio: f64,
    pub passes: bool,
}

/// Checks that the bounds can be resolved on the grid.
pub fn representability_check(grid: &StructuredGrid, bounds: &Bounds) -> Representability {
    let limit = grid.resolution_limit();
    let ratio = bounds.kappa_max.max(bounds.psi_max) / limit;
    Representability {
        limit,
        ratio,
        passes: ratio <= 1.0 + 1e-12,
    }
}
