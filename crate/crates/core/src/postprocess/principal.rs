//! Principal stress directions at element centers.

use nalgebra::Vector3;

use crate::fem::{centroid_stress, ElementKernel, FemSolution};
use crate::material::PlaneStress;
use crate::mesh::StructuredGrid;

/// Per-element principal stresses. The major direction carries the
/// eigenvalue of larger magnitude (ties go to the tensile one).
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirections {
    pub major: Vec<[f64; 2]>,
    pub minor: Vec<[f64; 2]>,
    /// Signed principal stresses (Pa).
    pub sigma_major: Vec<f64>,
    pub sigma_minor: Vec<f64>,
}

/// Eigenpairs of `[[σ11, σ12], [σ12, σ22]]`, larger eigenvalue first.
pub fn principal_2x2(s11: f64, s22: f64, s12: f64) -> [(f64, [f64; 2]); 2] {
    let mean = 0.5 * (s11 + s22);
    let rad = (0.5 * (s11 - s22)).hypot(s12);
    let phi = 0.5 * (2.0 * s12).atan2(s11 - s22);
    let (c, s) = (phi.cos(), phi.sin());
    [(mean + rad, [c, s]), (mean - rad, [-s, c])]
}

impl PrincipalDirections {
    /// From Voigt stresses `(σ11, σ22, σ12)`.
    pub fn from_stresses(stress: &[Vector3<f64>]) -> Self {
        let mut out = Self {
            major: Vec::with_capacity(stress.len()),
            minor: Vec::with_capacity(stress.len()),
            sigma_major: Vec::with_capacity(stress.len()),
            sigma_minor: Vec::with_capacity(stress.len()),
        };
        for s in stress {
            let [(s1, d1), (s2, d2)] = principal_2x2(s[0], s[1], s[2]);
            let ((a, da), (b, db)) = if s2.abs() > s1.abs() { ((s2, d2), (s1, d1)) } else { ((s1, d1), (s2, d2)) };
            out.sigma_major.push(a);
            out.major.push(da);
            out.sigma_minor.push(b);
            out.minor.push(db);
        }
        out
    }
}

/// Element-center stresses of a solved state and their principal directions.
pub fn principal_directions(
    grid: &StructuredGrid,
    solution: &FemSolution,
    kernel: &ElementKernel,
    material: &PlaneStress,
    field: &[[f64; 2]],
) -> PrincipalDirections {
    PrincipalDirections::from_stresses(&centroid_stress(grid, solution, kernel, material, field))
}
