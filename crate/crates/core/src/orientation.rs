//! Cartesian orientation design field: design pair `(s, t)` per element,
//! the linear distance filter, the normalizing projection onto
//! `(m̃, ñ)`, and the chain rule back to `(s, t)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::StructuredGrid;

/// Regularizer of the unit-vector projection.
pub const PROJECTION_EPS: f64 = 1e-6;

/// Linear "hat" filter `w = max(0, 1 − d/r_f)` over active element
/// centroids, with rows normalized to sum to one.
#[derive(Debug, Clone)]
pub struct OrientationFilter {
    radius: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl OrientationFilter {
    pub fn new(grid: &StructuredGrid, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("filter radius must be non-negative, got {radius}")));
        }
        let reach_x = (radius / grid.hx()).ceil() as isize;
        let reach_y = (radius / grid.hy()).ceil() as isize;
        let rows = (0..grid.n_elements())
            .into_par_iter()
            .map(|e| {
                let (i, j) = grid.element_cell(e);
                let mut row = Vec::new();
                for di in -reach_x..=reach_x {
                    for dj in -reach_y..=reach_y {
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || b < 0 {
                            continue;
                        }
                        let Some(k) = grid.element_at(a as usize, b as usize) else {
                            continue;
                        };
                        let d = (di as f64 * grid.hx()).hypot(dj as f64 * grid.hy());
                        let w = if k == e { 1.0 } else { (1.0 - d / radius).max(0.0) };
                        if w > 0.0 {
                            row.push((k, w));
                        }
                    }
                }
                row.sort_by_key(|&(k, _)| k);
                let total: f64 = row.iter().map(|&(_, w)| w).sum();
                for (_, w) in &mut row {
                    *w /= total;
                }
                row
            })
            .collect();
        Ok(Self { radius, rows })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Normalized weights of element `e`, sorted by neighbor id.
    pub fn weights(&self, e: usize) -> &[(usize, f64)] {
        &self.rows[e]
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.rows.len());
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|&(k, w)| w * values[k]).sum())
            .collect()
    }

    /// Adjoint of [`Self::apply`].
    pub fn apply_transpose(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.rows.len());
        let mut out = vec![0.0; values.len()];
        for (e, row) in self.rows.iter().enumerate() {
            for &(k, w) in row {
                out[k] += w * values[e];
            }
        }
        out
    }
}

/// `(m̃, ñ) = (s̃, t̃) / √(s̃² + t̃² + ε)`.
pub fn project(s: f64, t: f64) -> [f64; 2] {
    let r = (s * s + t * t + PROJECTION_EPS).sqrt();
    [s / r, t / r]
}

/// `∂(m̃, ñ)/∂(s̃, t̃)`, row-major `[[∂m/∂s, ∂m/∂t], [∂n/∂s, ∂n/∂t]]`.
pub fn project_jacobian(s: f64, t: f64) -> [[f64; 2]; 2] {
    let r2 = s * s + t * t + PROJECTION_EPS;
    let r3 = r2 * r2.sqrt();
    let off = -s * t / r3;
    [[(t * t + PROJECTION_EPS) / r3, off], [off, (s * s + PROJECTION_EPS) / r3]]
}

/// Design, filtered and physical fields of one design point.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub s_filtered: Vec<f64>,
    pub t_filtered: Vec<f64>,
    /// Physical orientation `(m̃, ñ)` per element.
    pub field: Vec<[f64; 2]>,
}

impl DesignState {
    pub fn new(filter: &OrientationFilter, s: Vec<f64>, t: Vec<f64>) -> Self {
        let s_filtered = filter.apply(&s);
        let t_filtered = filter.apply(&t);
        let field = s_filtered
            .iter()
            .zip(&t_filtered)
            .map(|(&a, &b)| project(a, b))
            .collect();
        Self {
            s,
            t,
            s_filtered,
            t_filtered,
            field,
        }
    }

    /// Evaluates a flat design vector laid out as `[s_0 .. s_ne, t_0 .. t_ne]`.
    pub fn from_flat(filter: &OrientationFilter, x: &[f64]) -> Self {
        let (s, t) = x.split_at(x.len() / 2);
        Self::new(filter, s.to_vec(), t.to_vec())
    }

    pub fn n_elements(&self) -> usize {
        self.s.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.s.iter().chain(&self.t).copied().collect()
    }

    /// Fiber angle per element in degrees, in `(-90, 90]`.
    pub fn angles_deg(&self) -> Vec<f64> {
        self.field.iter().map(|&[m, n]| line_angle_deg(m, n)).collect()
    }
}

/// Angle of the undirected line through `(m, n)`, mapped to `(-90, 90]` degrees.
pub fn line_angle_deg(m: f64, n: f64) -> f64 {
    let mut a = n.atan2(m).to_degrees();
    if a > 90.0 {
        a -= 180.0;
    } else if a <= -90.0 {
        a += 180.0;
    }
    a
}

/// Uniform initial design `(s, t) = ρ (cos θ0, sin θ0)`.
pub fn uniform_design(n_elements: usize, theta0_deg: f64, rho: f64) -> (Vec<f64>, Vec<f64>) {
    let th = theta0_deg.to_radians();
    (vec![rho * th.cos(); n_elements], vec![rho * th.sin(); n_elements])
}

/// Chains a gradient with respect to `(m̃, ñ)` back to `(s, t)`.
///
/// Returns the flat gradient `[∂/∂s .., ∂/∂t ..]`.
pub fn backpropagate(filter: &OrientationFilter, state: &DesignState, grad_physical: &[[f64; 2]]) -> Vec<f64> {
    let (gs, gt): (Vec<f64>, Vec<f64>) = grad_physical
        .iter()
        .enumerate()
        .map(|(e, g)| {
            let j = project_jacobian(state.s_filtered[e], state.t_filtered[e]);
            (j[0][0] * g[0] + j[1][0] * g[1], j[0][1] * g[0] + j[1][1] * g[1])
        })
        .unzip();
    let mut out = filter.apply_transpose(&gs);
    out.extend(filter.apply_transpose(&gt));
    out
}
