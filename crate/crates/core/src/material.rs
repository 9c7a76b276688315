//! Orthotropic plane-stress law and its rotation by a fiber orientation
//! vector `(m, n) = (cos θ, sin θ)`.
//!
//! Voigt order is `(11, 22, 12)` with engineering shear strain `γ12 = 2ε12`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Stiffness = Matrix3<f64>;

/// Engineering constants of a transversely reinforced ply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthotropicLaw {
    /// Longitudinal modulus (Pa).
    pub e1: f64,
    /// Transverse modulus (Pa).
    pub e2: f64,
    /// In-plane shear modulus (Pa).
    pub g12: f64,
    /// Major Poisson ratio.
    pub nu12: f64,
}

impl OrthotropicLaw {
    pub fn new(e1: f64, e2: f64, g12: f64, nu12: f64) -> Result<Self> {
        let law = Self { e1, e2, g12, nu12 };
        law.validate()?;
        Ok(law)
    }

    /// Carbon fiber epoxy used for the L-bracket.
    pub fn carbon_epoxy() -> Self {
        Self {
            e1: 140e9,
            e2: 9.5e9,
            g12: 5.8e9,
            nu12: 0.3,
        }
    }

    /// Composite used for the simply supported beam.
    pub fn beam_composite() -> Self {
        Self {
            e1: 100e9,
            e2: 5e9,
            g12: 3e9,
            nu12: 0.3,
        }
    }

    /// Isotropic law with the given modulus and Poisson ratio.
    pub fn isotropic(e: f64, nu: f64) -> Self {
        Self {
            e1: e,
            e2: e,
            g12: e / (2.0 * (1.0 + nu)),
            nu12: nu,
        }
    }

    /// Minor Poisson ratio from reciprocity, `ν21 = ν12·E2/E1`.
    pub fn nu21(&self) -> f64 {
        self.nu12 * self.e2 / self.e1
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.e1) && ok(self.e2) && ok(self.g12)) {
            return Err(Error::InvalidMaterial(format!(
                "moduli must be positive: E1={}, E2={}, G12={}",
                self.e1, self.e2, self.g12
            )));
        }
        let det = 1.0 - self.nu12 * self.nu21();
        if !(det > 0.0) || !self.nu12.is_finite() {
            return Err(Error::InvalidMaterial(format!(
                "1 - nu12*nu21 = {det} must be positive"
            )));
        }
        Ok(())
    }

    /// Plane-stress stiffness in the material frame.
    pub fn c0(&self) -> Result<Stiffness> {
        self.validate()?;
        let nu21 = self.nu21();
        let k = 1.0 / (1.0 - self.nu12 * nu21);
        Ok(Matrix3::new(
            k * self.e1,
            k * self.nu12 * self.e2,
            0.0,
            k * nu21 * self.e1,
            k * self.e2,
            0.0,
            0.0,
            0.0,
            self.g12,
        ))
    }

    pub fn plane_stress(&self) -> Result<PlaneStress> {
        Ok(PlaneStress { c0: self.c0()? })
    }
}

/// Strain transformation for the orientation vector `(m, n)`.
pub fn q_of_mn(m: f64, n: f64) -> Matrix3<f64> {
    let (mm, nn, mn) = (m * m, n * n, m * n);
    Matrix3::new(
        mm,
        nn,
        mn,
        nn,
        mm,
        -mn,
        -2.0 * mn,
        2.0 * mn,
        mm - nn,
    )
}

fn dq_dm(m: f64, n: f64) -> Matrix3<f64> {
    Matrix3::new(2.0 * m, 0.0, n, 0.0, 2.0 * m, -n, -2.0 * n, 2.0 * n, 2.0 * m)
}

fn dq_dn(m: f64, n: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, 2.0 * n, m, 2.0 * n, 0.0, -m, -2.0 * m, 2.0 * m, -2.0 * n)
}

/// Material-frame stiffness, ready to be rotated into the reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStress {
    pub c0: Stiffness,
}

impl PlaneStress {
    /// `C_X = Qᵀ C0 Q` for orientation `(m, n)`.
    pub fn cx(&self, m: f64, n: f64) -> Stiffness {
        let q = q_of_mn(m, n);
        q.transpose() * self.c0 * q
    }

    /// Partial derivatives of [`Self::cx`] with respect to `m` and `n`.
    pub fn dcx(&self, m: f64, n: f64) -> (Stiffness, Stiffness) {
        let q = q_of_mn(m, n);
        let qt_c0 = q.transpose() * self.c0;
        let c0_q = self.c0 * q;
        let dm = dq_dm(m, n);
        let dn = dq_dn(m, n);
        (
            dm.transpose() * c0_q + qt_c0 * dm,
            dn.transpose() * c0_q + qt_c0 * dn,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn theta_form(c0: &Stiffness, theta: f64) -> Stiffness {
        let (c, s) = (theta.cos(), theta.sin());
        let q = Matrix3::new(
            c * c,
            s * s,
            2.0 * c * s,
            s * s,
            c * c,
            -2.0 * c * s,
            -c * s,
            c * s,
            c * c - s * s,
        );
        let qi = q.try_inverse().unwrap();
        qi * c0 * qi.transpose()
    }

    #[test]
    fn carbon_epoxy_c0_values() {
        let law = OrthotropicLaw::carbon_epoxy();
        assert_relative_eq!(law.nu21(), 0.0203571, max_relative = 1e-5);
        let c0 = law.c0().unwrap();
        assert_relative_eq!(c0[(0, 0)], 140e9 / (1.0 - 0.3 * 0.3 * 9.5 / 140.0), max_relative = 1e-14);
        assert_relative_eq!(c0[(0, 0)], 1.40860e11, max_relative = 1e-5);
        assert_eq!(c0[(2, 2)], law.g12);
        assert_relative_eq!(c0[(0, 1)], c0[(1, 0)], max_relative = 1e-15);
    }

    #[test]
    fn isotropic_degenerates_to_plane_stress() {
        let (e, nu) = (70e9, 0.33);
        let c0 = OrthotropicLaw::isotropic(e, nu).c0().unwrap();
        let k = e / (1.0 - nu * nu);
        let expect = Matrix3::new(k, k * nu, 0.0, k * nu, k, 0.0, 0.0, 0.0, k * (1.0 - nu) / 2.0);
        assert_relative_eq!(c0, expect, max_relative = 1e-12);
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(OrthotropicLaw::new(1e9, 1e9, 1e8, 1.0).is_err());
        assert!(OrthotropicLaw::new(-1.0, 1e9, 1e8, 0.3).is_err());
        assert!(OrthotropicLaw::new(1e9, 1e9, 0.0, 0.3).is_err());
    }

    #[test]
    fn q_special_orientations() {
        assert_eq!(q_of_mn(1.0, 0.0), Matrix3::identity());
        assert_eq!(q_of_mn(0.0, 1.0), Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0));
        let h = 0.5f64.sqrt();
        let q = q_of_mn(h, h);
        assert_relative_eq!(q[(2, 0)], -1.0, max_relative = 1e-15);
        assert_relative_eq!(q[(2, 1)], 1.0, max_relative = 1e-15);
        assert_relative_eq!(q[(2, 2)], 0.0, epsilon = 1e-15);
        assert_eq!(q_of_mn(0.6, 0.8), q_of_mn(-0.6, -0.8));
    }

    #[test]
    fn cx_special_orientations() {
        let mat = OrthotropicLaw::carbon_epoxy().plane_stress().unwrap();
        assert_relative_eq!(mat.cx(1.0, 0.0), mat.c0, max_relative = 1e-15);
        assert_relative_eq!(mat.cx(0.0, 1.0)[(0, 0)], mat.c0[(1, 1)], max_relative = 1e-15);
        let iso = OrthotropicLaw::isotropic(10e9, 0.25).plane_stress().unwrap();
        for k in 0..12 {
            let th = k as f64 * 0.37;
            assert_relative_eq!(iso.cx(th.cos(), th.sin()), iso.c0, max_relative = 1e-12, epsilon = 1e-3);
        }
    }

    #[test]
    fn cx_matches_theta_form() {
        let mat = OrthotropicLaw::carbon_epoxy().plane_stress().unwrap();
        for k in 0..24 {
            let th = -3.0 + 0.27 * k as f64;
            let a = mat.cx(th.cos(), th.sin());
            let b = theta_form(&mat.c0, th);
            assert!((a - b).norm() <= 1e-12 * a.norm(), "theta {th}");
        }
    }

    #[test]
    fn dcx_matches_finite_differences() {
        let mat = OrthotropicLaw::new(123e9, 7.1e9, 4.4e9, 0.27).unwrap().plane_stress().unwrap();
        let (m, n) = (0.8, 0.6);
        let h = 1e-6;
        let (dm, dn) = mat.dcx(m, n);
        let fd_m = (mat.cx(m + h, n) - mat.cx(m - h, n)) / (2.0 * h);
        let fd_n = (mat.cx(m, n + h) - mat.cx(m, n - h)) / (2.0 * h);
        assert!((dm - fd_m).norm() <= 1e-6 * dm.norm());
        assert!((dn - fd_n).norm() <= 1e-6 * dn.norm());
    }

    #[test]
    fn dcx_parity_and_isotropy() {
        let mat = OrthotropicLaw::carbon_epoxy().plane_stress().unwrap();
        let (a, b) = mat.dcx(0.3, -0.954);
        let (c, d) = mat.dcx(-0.3, 0.954);
        assert_relative_eq!(a, -c, max_relative = 1e-14);
        assert_relative_eq!(b, -d, max_relative = 1e-14);

        let iso = OrthotropicLaw::isotropic(10e9, 0.3).plane_stress().unwrap();
        let scale = iso.c0.norm();
        let th: f64 = 0.7;
        let (dm, dn) = iso.dcx(th.cos(), th.sin());
        // Off the unit circle the rotation is not orthogonal, but along it the
        // tangential derivative must vanish.
        let tangential = dm * (-th.sin()) + dn * th.cos();
        assert!(tangential.abs().max() < 1e-6 * scale);
    }

    #[test]
    fn mandel_eigenvalues_invariant_along_unit_circle() {
        let mat = OrthotropicLaw::carbon_epoxy().plane_stress().unwrap();
        let d = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 2f64.sqrt()));
        let eig = |c: Stiffness| {
            let mut v: Vec<f64> = (d * c * d).symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let base = eig(mat.c0);
        for k in 0..16 {
            let th = k as f64 * 0.41;
            let e = eig(mat.cx(th.cos(), th.sin()));
            for (a, b) in e.iter().zip(&base) {
                assert!((a - b).abs() <= 1e-9 * b.abs(), "theta {th}: {a} vs {b}");
            }
        }
    }
}
