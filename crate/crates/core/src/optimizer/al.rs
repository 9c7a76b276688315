//! Augmented Lagrangian treatment of the local manufacturing constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manufacturing::SparseRows;

/// Schedule of the penalty terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlParams {
    /// Initial constraint weight `Λ⁰`.
    pub weight0: f64,
    pub weight_max: f64,
    pub weight_growth: f64,
    /// Initial quadratic penalty `μ⁰`.
    pub mu0: f64,
    pub mu_max: f64,
    /// Growth factor `α` of the penalty.
    pub alpha: f64,
    /// Initial multiplier value.
    pub lambda0: f64,
}

impl Default for AlParams {
    fn default() -> Self {
        Self {
            weight0: 1e-2,
            weight_max: 1.0,
            weight_growth: 1.3,
            mu0: 10.0,
            mu_max: 1e6,
            alpha: 1.5,
            lambda0: 0.0,
        }
    }
}

impl AlParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("weight0", self.weight0),
            ("weight_max", self.weight_max),
            ("weight_growth", self.weight_growth),
            ("mu0", self.mu0),
            ("mu_max", self.mu_max),
            ("alpha", self.alpha),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("al.{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("al.lambda0 must be non-negative, got {}", self.lambda0)));
        }
        if self.weight0 > self.weight_max || self.mu0 > self.mu_max {
            return Err(Error::InvalidParameter("initial AL weights exceed their caps".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlState {
    pub lambda: Vec<f64>,
    pub mu: f64,
    /// Constraint weight `Λ`.
    pub weight: f64,
    /// Number of updates applied so far.
    pub k: usize,
    pub params: AlParams,
}

impl AlState {
    pub fn new(n_constraints: usize, params: AlParams) -> Self {
        Self {
            lambda: vec![params.lambda0; n_constraints],
            mu: params.mu0,
            weight: params.weight0,
            k: 0,
            params,
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda.iter().fold(0.0, |a, &v| a.max(v))
    }

    /// `h_j = max(g_j, −λ_j/μ)`.
    pub fn h(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.lambda).map(|(&gj, &lj)| gj.max(-lj / self.mu)).collect()
    }
}

/// Penalty term `(Λ/N) Σ (λ h + μ/2 h²)` and its derivative with respect to `g`.
pub fn al_penalty(g: &[f64], state: &AlState) -> (f64, Vec<f64>) {
    assert_eq!(g.len(), state.lambda.len());
    let scale = state.weight / g.len() as f64;
    let mut value = 0.0;
    let grad = g
        .iter()
        .zip(&state.lambda)
        .map(|(&gj, &lj)| {
            let bound = -lj / state.mu;
            if gj > bound {
                value += lj * gj + 0.5 * state.mu * gj * gj;
                scale * (lj + state.mu * gj)
            } else {
                value += lj * bound + 0.5 * state.mu * bound * bound;
                0.0
            }
        })
        .collect();
    (scale * value, grad)
}

/// `L = c + penalty(g)` with gradient `∂c + (∂g)ᵀ ∂penalty/∂g`.
///
/// `dc` and the columns of `dg` must be expressed in the same variables.
pub fn al_value_and_grad(c: f64, dc: &[f64], g: &[f64], dg: &SparseRows, state: &AlState) -> (f64, Vec<f64>) {
    assert_eq!(dc.len(), dg.n_cols);
    let (pen, dpen) = al_penalty(g, state);
    let mut grad = dg.transpose_mul(&dpen);
    for (a, b) in grad.iter_mut().zip(dc) {
        *a += b;
    }
    (c + pen, grad)
}

/// Multiplier and schedule update after one subproblem.
pub fn al_update(state: &AlState, g: &[f64]) -> AlState {
    let h = state.h(g);
    let p = state.params;
    AlState {
        lambda: state
            .lambda
            .iter()
            .zip(&h)
            .map(|(&l, &hj)| (l + state.mu * hj).max(0.0))
            .collect(),
        mu: (p.alpha * state.mu).min(p.mu_max),
        weight: (p.weight_growth * state.weight).min(p.weight_max),
        k: state.k + 1,
        params: p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inactive_constraints_add_nothing() {
        let st = AlState::new(4, AlParams::default());
        let (v, d) = al_penalty(&[-0.1, -2.0, -0.5, -1e-9], &st);
        assert_eq!(v, 0.0);
        assert!(d.iter().all(|&x| x == 0.0));
        let dg = SparseRows {
            n_cols: 2,
            rows: vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 3.0)], vec![]],
        };
        let (l, grad) = al_value_and_grad(7.0, &[0.5, -0.25], &[-0.1, -2.0, -0.5, -1e-9], &dg, &st);
        assert_eq!(l, 7.0);
        assert_eq!(grad, vec![0.5, -0.25]);
    }

    #[test]
    fn single_violation_arithmetic() {
        let st = AlState::new(4, AlParams::default());
        let (v, _) = al_penalty(&[0.1, -1.0, -1.0, -1.0], &st);
        assert!((v - 1.25e-4).abs() < 1e-18);
    }

    #[test]
    fn update_arithmetic() {
        let st = AlState::new(2, AlParams::default());
        let next = al_update(&st, &[0.1, -0.3]);
        assert!((next.lambda[0] - 1.0).abs() < 1e-15);
        assert_eq!(next.lambda[1], 0.0);
        assert_eq!(next.mu, 15.0);
        assert!((next.weight - 0.013).abs() < 1e-15);
        let next2 = al_update(&next, &[0.0, 0.0]);
        assert_eq!(next2.mu, 22.5);
        assert_eq!(next2.k, 2);
    }

    #[test]
    fn clamped_multiplier_resets_to_zero() {
        let mut st = AlState::new(1, AlParams::default());
        st.lambda[0] = 3.0;
        st.mu = 10.0;
        let next = al_update(&st, &[-0.5]);
        assert_eq!(next.lambda[0], 0.0);
    }

    #[test]
    fn schedules_saturate() {
        let mut st = AlState::new(1, AlParams::default());
        for _ in 0..60 {
            st = al_update(&st, &[0.0]);
        }
        assert_eq!(st.mu, 1e6);
        assert_eq!(st.weight, 1.0);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let mut st = AlState::new(5, AlParams::default());
        st.lambda = vec![0.0, 2.0, 0.5, 0.0, 1.0];
        st.mu = 22.5;
        st.weight = 0.3;
        let g = [0.2, -0.05, 0.01, -0.3, -0.02];
        let (_, d) = al_penalty(&g, &st);
        let h = 1e-7;
        for j in 0..5 {
            let mut gp = g;
            let mut gm = g;
            gp[j] += h;
            gm[j] -= h;
            let fd = (al_penalty(&gp, &st).0 - al_penalty(&gm, &st).0) / (2.0 * h);
            assert!((fd - d[j]).abs() < 1e-7 * d[j].abs().max(1e-3), "j={j}: {fd} vs {}", d[j]);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(AlParams { mu0: -1.0, ..Default::default() }.validate().is_err());
        assert!(AlParams { weight0: 2.0, ..Default::default() }.validate().is_err());
        assert!(AlParams::default().validate().is_ok());
    }
}
