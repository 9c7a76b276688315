//! Analytic versus central finite-difference gradients of the compliance and
//! of the augmented Lagrangian.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::manufacturing::{constraint_gradients, Bounds, ConstraintField};
use crate::optimizer::{al_value_and_grad, AlState, Problem};
use crate::orientation::backpropagate;

/// Finite-difference step. Central differences at `h` and `h/2` are
/// combined by Richardson extrapolation, so the step can stay well above
/// the solver round-off.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest element count accepted by the finite-difference check.
pub const MAX_CELLS: (usize, usize) = (12, 12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientError {
    /// Largest component error relative to `max(|fd_j|, |an_j|, floor)`.
    pub max_rel_error: f64,
    pub variable: usize,
    pub element: usize,
    pub analytic: f64,
    pub finite_difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientReport {
    pub compliance: GradientError,
    pub lagrangian: GradientError,
}

impl GradientReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.compliance.max_rel_error < tol && self.lagrangian.max_rel_error < tol
    }
}

/// Scales the constraint-Jacobian entries of one element; only for testing
/// that the check catches a wrong derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub element: usize,
    pub factor: f64,
}

/// `L = scale·c + penalty(g)` through the assembled sparse constraint Jacobian.
pub fn lagrangian(
    pb: &Problem,
    x: &[f64],
    bounds: &Bounds,
    al: &AlState,
    scale: f64,
    corruption: Option<Corruption>,
) -> Result<(f64, Vec<f64>)> {
    let ev = pb.evaluate(x)?;
    let ne = pb.n_elements();
    let cf = ConstraintField::evaluate(&pb.stencil, &ev.state.field, bounds);
    let mut dg = constraint_gradients(&pb.stencil, bounds);
    if let Some(c) = corruption {
        for row in &mut dg.rows {
            for (col, w) in row.iter_mut() {
                if *col % ne == c.element {
                    *w *= c.factor;
                }
            }
        }
    }
    let dc: Vec<f64> = ev.dc.iter().map(|d| scale * d[0]).chain(ev.dc.iter().map(|d| scale * d[1])).collect();
    let (value, grad) = al_value_and_grad(scale * ev.solution.compliance, &dc, &cf.g, &dg, al);
    let phys: Vec<[f64; 2]> = (0..ne).map(|e| [grad[e], grad[ne + e]]).collect();
    Ok((value, backpropagate(&pb.filter, &ev.state, &phys)))
}

/// Compares both gradients at `x` against extrapolated central differences.
pub fn check_gradients(
    pb: &Problem,
    x: &[f64],
    bounds: &Bounds,
    al: &AlState,
    scale: f64,
    h: f64,
    corruption: Option<Corruption>,
) -> Result<GradientReport> {
    let ne = pb.n_elements();
    let (c0, dc) = pb.compliance_and_grad(x)?;
    let (l0, dl) = lagrangian(pb, x, bounds, al, scale, corruption)?;
    let fd: Vec<(f64, f64)> = (0..x.len())
        .into_par_iter()
        .map(|j| -> Result<(f64, f64)> {
            let central = |h: f64| -> Result<(f64, f64)> {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let cp = pb.evaluate(&xp)?.solution.compliance;
                let cm = pb.evaluate(&xm)?.solution.compliance;
                let lp = lagrangian(pb, &xp, bounds, al, scale, None)?.0;
                let lm = lagrangian(pb, &xm, bounds, al, scale, None)?.0;
                Ok(((cp - cm) / (2.0 * h), (lp - lm) / (2.0 * h)))
            };
            let (c1, l1) = central(h)?;
            let (c2, l2) = central(0.5 * h)?;
            Ok(((4.0 * c2 - c1) / 3.0, (4.0 * l2 - l1) / 3.0))
        })
        .collect::<Result<_>>()?;
    let (fc, fl): (Vec<f64>, Vec<f64>) = fd.into_iter().unzip();
    Ok(GradientReport {
        compliance: compare(&dc, &fc, c0.abs(), ne),
        lagrangian: compare(&dl, &fl, l0.abs().max(scale * c0.abs()), ne),
    })
}

/// Component-normalized error. The floor keeps components that vanish
/// analytically from amplifying round-off: a thousandth of the largest
/// component, or a millionth of the function value.
fn compare(analytic: &[f64], fd: &[f64], value: f64, ne: usize) -> GradientError {
    let peak = fd.iter().chain(analytic).fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = (1e-3 * peak).max(1e-6 * value).max(f64::MIN_POSITIVE);
    let mut worst = GradientError {
        max_rel_error: 0.0,
        variable: 0,
        element: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        finite_difference: fd.first().copied().unwrap_or(0.0),
    };
    for (j, (&a, &f)) in analytic.iter().zip(fd).enumerate() {
        let err = (a - f).abs() / f.abs().max(a.abs()).max(floor);
        if err > worst.max_rel_error {
            worst = GradientError {
                max_rel_error: err,
                variable: j,
                element: j % ne,
                analytic: a,
                finite_difference: f,
            };
        }
    }
    worst
}
