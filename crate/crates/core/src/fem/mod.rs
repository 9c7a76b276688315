//! Plane-stress bilinear quadrilateral analysis with orientation-dependent
//! stiffness, and the adjoint compliance gradient.

mod banded;

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rayon::prelude::*;

pub use banded::{BandedCholesky, BandedSpd};

use crate::error::{Error, Result};
use crate::material::PlaneStress;
use crate::mesh::{LoadCase, StructuredGrid};

pub type Matrix8 = SMatrix<f64, 8, 8>;
pub type Vector8 = SVector<f64, 8>;
pub type StrainMatrix = SMatrix<f64, 3, 8>;

const GAUSS: f64 = 0.577_350_269_189_625_8;
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Strain-displacement matrix of a `hx`×`hy` bilinear element at natural
/// coordinates `(xi, eta)`.
pub fn strain_displacement(hx: f64, hy: f64, xi: f64, eta: f64) -> StrainMatrix {
    let mut b = StrainMatrix::zeros();
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        let dx = 0.25 * xa * (1.0 + ya * eta) * 2.0 / hx;
        let dy = 0.25 * ya * (1.0 + xa * xi) * 2.0 / hy;
        b[(0, 2 * a)] = dx;
        b[(1, 2 * a + 1)] = dy;
        b[(2, 2 * a)] = dy;
        b[(2, 2 * a + 1)] = dx;
    }
    b
}

/// Quadrature data shared by every element of a structured grid.
///
/// Because `B` does not depend on the material, the element stiffness is
/// linear in the entries of `C_X`: `Ke = Σ_ab C_X[a][b] · basis[a][b]` with
/// `basis[a][b] = Σ_gp w·det J·t · B_aᵀ B_b`, where `B_a` is row `a` of `B`.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    hx: f64,
    hy: f64,
    thickness: f64,
    basis: [[Matrix8; 3]; 3],
    centroid_b: StrainMatrix,
}

impl ElementKernel {
    pub fn new(hx: f64, hy: f64, thickness: f64) -> Result<Self> {
        if !(hx > 0.0 && hy > 0.0 && thickness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "element sizes and thickness must be positive (hx={hx}, hy={hy}, t={thickness})"
            )));
        }
        let det_j = 0.25 * hx * hy;
        let mut basis = [[Matrix8::zeros(); 3]; 3];
        for xi in [-GAUSS, GAUSS] {
            for eta in [-GAUSS, GAUSS] {
                let b = strain_displacement(hx, hy, xi, eta);
                for (a, row_a) in basis.iter_mut().enumerate() {
                    for (c, k) in row_a.iter_mut().enumerate() {
                        *k += thickness * det_j * b.row(a).transpose() * b.row(c);
                    }
                }
            }
        }
        Ok(Self {
            hx,
            hy,
            thickness,
            basis,
            centroid_b: strain_displacement(hx, hy, 0.0, 0.0),
        })
    }

    pub fn for_grid(grid: &StructuredGrid, thickness: f64) -> Result<Self> {
        Self::new(grid.hx(), grid.hy(), thickness)
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn element_size(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// `B` evaluated at the element center.
    pub fn centroid_b(&self) -> &StrainMatrix {
        &self.centroid_b
    }

    /// Element stiffness for an arbitrary (symmetric) constitutive matrix.
    pub fn stiffness_for(&self, c: &Matrix3<f64>) -> Matrix8 {
        let mut k = Matrix8::zeros();
        for a in 0..3 {
            for b in 0..3 {
                if c[(a, b)] != 0.0 {
                    k += c[(a, b)] * self.basis[a][b];
                }
            }
        }
        k
    }

    /// The nine element energies `u_eᵀ basis[a][b] u_e`.
    fn energies(&self, ue: &Vector8) -> Matrix3<f64> {
        Matrix3::from_fn(|a, b| ue.dot(&(self.basis[a][b] * ue)))
    }
}

/// `Ke(m, n)` for orientation `(m, n)`.
pub fn element_stiffness(kernel: &ElementKernel, material: &PlaneStress, m: f64, n: f64) -> Matrix8 {
    kernel.stiffness_for(&material.cx(m, n))
}

#[derive(Debug, Clone)]
pub struct FemSolution {
    /// Nodal displacements (m), node-major interleaved.
    pub u: Vec<f64>,
    /// Compliance `fᵀu` (J).
    pub compliance: f64,
    /// `‖K u − f‖ / ‖f‖` over the free dofs (0 when `f = 0`).
    pub residual: f64,
}

impl FemSolution {
    pub fn element_displacements(&self, grid: &StructuredGrid, e: usize) -> Vector8 {
        let dofs = grid.element_dofs(e);
        Vector8::from_fn(|i, _| self.u[dofs[i]])
    }
}

fn element_matrices(kernel: &ElementKernel, material: &PlaneStress, field: &[[f64; 2]]) -> Vec<Matrix8> {
    field
        .par_iter()
        .map(|&[m, n]| element_stiffness(kernel, material, m, n))
        .collect()
}

fn bandwidth(grid: &StructuredGrid) -> usize {
    (0..grid.n_elements())
        .map(|e| {
            let d = grid.element_dofs(e);
            d.iter().max().unwrap() - d.iter().min().unwrap()
        })
        .max()
        .unwrap_or(0)
}

/// Global stiffness in banded form, without boundary conditions.
pub fn assemble(grid: &StructuredGrid, kernel: &ElementKernel, material: &PlaneStress, field: &[[f64; 2]]) -> BandedSpd {
    assert_eq!(field.len(), grid.n_elements(), "one orientation per active element");
    let kes = element_matrices(kernel, material, field);
    let mut k = BandedSpd::zeros(grid.n_dofs(), bandwidth(grid));
    for (e, ke) in kes.iter().enumerate() {
        let dofs = grid.element_dofs(e);
        for a in 0..8 {
            for b in 0..=a {
                k.add(dofs[a], dofs[b], ke[(a, b)]);
            }
        }
    }
    k
}

/// Assembles `K(field)`, applies the supports and solves `K u = f`.
pub fn assemble_solve(
    grid: &StructuredGrid,
    load: &LoadCase,
    kernel: &ElementKernel,
    material: &PlaneStress,
    field: &[[f64; 2]],
) -> Result<FemSolution> {
    if field.len() != grid.n_elements() {
        return Err(Error::InvalidParameter(format!(
            "orientation field has {} entries, grid has {} elements",
            field.len(),
            grid.n_elements()
        )));
    }
    let mut k = assemble(grid, kernel, material, field);
    let full = k.clone();
    for &d in &load.fixed_dofs {
        k.constrain(d);
    }
    let mut rhs = load.force.clone();
    for &d in &load.fixed_dofs {
        rhs[d] = 0.0;
    }
    let u = k.cholesky()?.solve(&rhs);

    let ku = full.mul_vec(&u);
    let mut free = vec![true; grid.n_dofs()];
    for &d in &load.fixed_dofs {
        free[d] = false;
    }
    let (mut r2, mut f2) = (0.0, 0.0);
    for d in 0..grid.n_dofs() {
        if free[d] {
            r2 += (ku[d] - load.force[d]).powi(2);
            f2 += load.force[d].powi(2);
        }
    }
    let residual = if f2 > 0.0 { (r2 / f2).sqrt() } else { r2.sqrt() };
    let compliance = load.force.iter().zip(&u).map(|(f, u)| f * u).sum();
    Ok(FemSolution { u, compliance, residual })
}

/// `∂c/∂(m̃, ñ)` per element, `−u_eᵀ (∂Ke/∂v) u_e`.
pub fn compliance_gradient(
    grid: &StructuredGrid,
    solution: &FemSolution,
    kernel: &ElementKernel,
    material: &PlaneStress,
    field: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    (0..grid.n_elements())
        .into_par_iter()
        .map(|e| {
            let ue = solution.element_displacements(grid, e);
            let energy = kernel.energies(&ue);
            let [m, n] = field[e];
            let (dm, dn) = material.dcx(m, n);
            [-dm.component_mul(&energy).sum(), -dn.component_mul(&energy).sum()]
        })
        .collect()
}

/// Element-center stress `σ_X = C_X B u_e` (Pa).
pub fn centroid_stress(
    grid: &StructuredGrid,
    solution: &FemSolution,
    kernel: &ElementKernel,
    material: &PlaneStress,
    field: &[[f64; 2]],
) -> Vec<Vector3<f64>> {
    (0..grid.n_elements())
        .map(|e| {
            let [m, n] = field[e];
            material.cx(m, n) * kernel.centroid_b() * solution.element_displacements(grid, e)
        })
        .collect()
}

/// Writes the unconstrained global stiffness in MatrixMarket coordinate
/// format (lower triangle, symmetric).
pub fn write_matrix_market(
    path: &Path,
    grid: &StructuredGrid,
    kernel: &ElementKernel,
    material: &PlaneStress,
    field: &[[f64; 2]],
) -> Result<()> {
    let k = assemble(grid, kernel, material, field);
    let n = k.dim();
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..(j + k.bandwidth() + 1).min(n) {
            let v = k.get(i, j);
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric").map_err(io)?;
    writeln!(out, "{n} {n} {}", entries.len()).map_err(io)?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {v:e}", i + 1, j + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}
