//! Minimum-compliance fiber steering with local curl/divergence limits.

pub mod al;
pub mod ks;
pub mod mma;

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use al::{al_penalty, al_update, al_value_and_grad, AlParams, AlState};
pub use ks::{ks_aggregate, KsParams};
pub use mma::Mma;

use crate::error::{Error, Result};
use crate::fem::{assemble_solve, compliance_gradient, ElementKernel, FemSolution};
use crate::manufacturing::{constraint_vjp, representability_check, Bounds, ConstraintField, DiffStencil};
use crate::material::{OrthotropicLaw, PlaneStress};
use crate::mesh::{build_preset, LoadCase, ProblemPreset, StructuredGrid};
use crate::orientation::{backpropagate, uniform_design, DesignState, OrientationFilter};

/// Everything needed to evaluate a design: mesh, supports, material,
/// filter and difference stencil.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: StructuredGrid,
    pub load: LoadCase,
    pub material: PlaneStress,
    pub kernel: ElementKernel,
    pub filter: OrientationFilter,
    pub stencil: DiffStencil,
}

/// Physical response of one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: DesignState,
    pub solution: FemSolution,
    /// `∂c/∂(m̃, ñ)` per element.
    pub dc: Vec<[f64; 2]>,
}

impl Problem {
    pub fn new(grid: StructuredGrid, load: LoadCase, law: &OrthotropicLaw, thickness: f64, filter_radius: f64) -> Result<Self> {
        let material = law.plane_stress()?;
        let kernel = ElementKernel::for_grid(&grid, thickness)?;
        let filter = OrientationFilter::new(&grid, filter_radius)?;
        let stencil = DiffStencil::new(&grid);
        Ok(Self {
            grid,
            load,
            material,
            kernel,
            filter,
            stencil,
        })
    }

    pub fn from_preset(preset: &ProblemPreset, filter_radius: f64) -> Result<Self> {
        let (grid, load) = build_preset(preset)?;
        Self::new(grid, load, &preset.material, preset.thickness, filter_radius)
    }

    pub fn n_elements(&self) -> usize {
        self.grid.n_elements()
    }

    /// Number of design variables, `2 n_e`.
    pub fn n_vars(&self) -> usize {
        2 * self.grid.n_elements()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        if x.len() != self.n_vars() {
            return Err(Error::InvalidParameter(format!(
                "design has {} variables, expected {}",
                x.len(),
                self.n_vars()
            )));
        }
        let state = DesignState::from_flat(&self.filter, x);
        let solution = assemble_solve(&self.grid, &self.load, &self.kernel, &self.material, &state.field)?;
        let dc = compliance_gradient(&self.grid, &solution, &self.kernel, &self.material, &state.field);
        Ok(Evaluation { state, solution, dc })
    }

    /// Compliance and its gradient with respect to the flat design `[s.., t..]`.
    pub fn compliance_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ev = self.evaluate(x)?;
        let grad = backpropagate(&self.filter, &ev.state, &ev.dc);
        Ok((ev.solution.compliance, grad))
    }

    /// Augmented Lagrangian `L = scale·c + penalty(g)` and its design gradient.
    pub fn al_value_and_grad(&self, x: &[f64], bounds: &Bounds, al: &AlState, scale: f64) -> Result<(f64, Vec<f64>)> {
        let ev = self.evaluate(x)?;
        let cf = ConstraintField::evaluate(&self.stencil, &ev.state.field, bounds);
        let (pen, dpen) = al_penalty(&cf.g, al);
        let mut phys = constraint_vjp(&self.stencil, bounds, &dpen);
        for (p, d) in phys.iter_mut().zip(&ev.dc) {
            p[0] += scale * d[0];
            p[1] += scale * d[1];
        }
        Ok((scale * ev.solution.compliance + pen, backpropagate(&self.filter, &ev.state, &phys)))
    }

    /// Uniform start `ρ (cos θ0, sin θ0)` as a flat design vector.
    pub fn uniform_start(&self, theta0_deg: f64, magnitude: f64) -> Vec<f64> {
        let (s, t) = uniform_design(self.n_elements(), theta0_deg, magnitude);
        s.into_iter().chain(t).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Al,
    Ks,
    Unconstrained,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Al => "al",
            Mode::Ks => "ks",
            Mode::Unconstrained => "unconstrained",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    /// MMA iterations between multiplier (or KS parameter) updates.
    pub inner_iters: usize,
    pub move_limit: f64,
    /// Value of the scaled objective at the initial design.
    pub objective_target: f64,
    pub al: AlParams,
    pub ks: KsParams,
    pub early_stop: bool,
    /// Relative compliance change over one outer step below which the run may stop.
    pub early_stop_change: f64,
    /// Largest tolerated constraint ratio excess for early stopping.
    pub early_stop_violation: f64,
    /// Use the conservative MMA variant, which re-evaluates trial points.
    pub conservative: bool,
    /// Cap on trial points per conservative step.
    pub max_inner: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            inner_iters: 20,
            move_limit: 0.05,
            objective_target: 10.0,
            al: AlParams::default(),
            ks: KsParams::default(),
            early_stop: false,
            early_stop_change: 1e-4,
            early_stop_violation: 0.01,
            conservative: true,
            max_inner: 15,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("optimizer.inner_iters and optimizer.max_inner must be positive".into()));
        }
        for (name, v) in [
            ("move_limit", self.move_limit),
            ("objective_target", self.objective_target),
            ("early_stop_change", self.early_stop_change),
            ("early_stop_violation", self.early_stop_violation),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("optimizer.{name} must be positive, got {v}")));
            }
        }
        self.al.validate()?;
        self.ks.validate()
    }
}

/// One line of the convergence history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub compliance: f64,
    pub max_kappa: f64,
    pub max_psi: f64,
    pub max_kappa_ratio: f64,
    pub max_psi_ratio: f64,
    pub mu: Option<f64>,
    pub lambda_max: Option<f64>,
    pub weight: Option<f64>,
    pub p: Option<f64>,
    /// Scaled objective seen by MMA (AL function in AL mode).
    pub objective: f64,
}

pub const HISTORY_HEADER: &str = "iter,compliance_J,max_kappa_ratio,max_psi_ratio,mu,lambda_max,Lambda,p";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iter,
            r.compliance,
            r.max_kappa_ratio,
            r.max_psi_ratio,
            opt(r.mu),
            opt(r.lambda_max),
            opt(r.weight),
            opt(r.p)
        ));
    }
    out
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(history_csv(rows).as_bytes()).map_err(|e| Error::io(path, e))
}

/// Snapshot handed to the observer at every outer step and at the end.
#[derive(Debug, Clone, Copy)]
pub struct Checkpoint<'a> {
    pub iter: usize,
    pub x: &'a [f64],
    pub state: &'a DesignState,
    pub constraints: &'a ConstraintField,
    pub compliance: f64,
    pub is_final: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: Mode,
    pub bounds: Bounds,
    pub history: Vec<HistoryRow>,
    pub x: Vec<f64>,
    pub state: DesignState,
    pub constraints: ConstraintField,
    pub initial_compliance: f64,
    pub final_compliance: f64,
    /// MMA steps taken.
    pub iterations: usize,
    /// Finite element solves, including rejected trial points.
    pub evaluations: usize,
    pub stopped_early: bool,
}

impl RunResult {
    pub fn final_row(&self) -> &HistoryRow {
        self.history.last().expect("history holds at least the initial row")
    }
}

/// Failure inside a run, with the history recorded up to that point.
#[derive(Debug)]
pub struct RunError {
    pub source: Error,
    pub history: Vec<HistoryRow>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run failed after {} recorded iterations: {}", self.history.len(), self.source)
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Runs the optimizer from `x0`.
///
/// In unconstrained mode `bounds` only feed the reported ratios.
pub fn run(
    problem: &Problem,
    bounds: &Bounds,
    mode: Mode,
    config: &OptimizerConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(&Checkpoint<'_>),
) -> std::result::Result<RunResult, RunError> {
    let mut history = Vec::new();
    match run_inner(problem, bounds, mode, config, x0, observer, &mut history) {
        Ok(r) => Ok(r),
        Err(source) => Err(RunError { source, history }),
    }
}

struct Point {
    ev: Evaluation,
    cf: ConstraintField,
}

fn scaled_objective(mode: Mode, s_obj: f64, pt: &Point, al: &AlState, p: f64) -> (f64, Vec<f64>) {
    let c = s_obj * pt.ev.solution.compliance;
    match mode {
        Mode::Al => (c + al_penalty(&pt.cf.g, al).0, Vec::new()),
        Mode::Ks => (c, vec![ks_aggregate(&pt.cf.g, p).0]),
        Mode::Unconstrained => (c, Vec::new()),
    }
}

fn run_inner(
    problem: &Problem,
    bounds: &Bounds,
    mode: Mode,
    config: &OptimizerConfig,
    x0: &[f64],
    observer: &mut dyn FnMut(&Checkpoint<'_>),
    history: &mut Vec<HistoryRow>,
) -> Result<RunResult> {
    config.validate()?;
    let rep = representability_check(&problem.grid, bounds);
    if !rep.passes {
        log::warn!(
            "bounds exceed the mesh resolution limit {} (ratio {:.3}); constraints cannot be resolved",
            rep.limit,
            rep.ratio
        );
    }
    let n = problem.n_vars();
    if x0.len() != n {
        return Err(Error::InvalidParameter(format!("initial design has {} variables, expected {n}", x0.len())));
    }
    let point_at = |y: &[f64]| -> Result<Point> {
        let ev = problem.evaluate(y)?;
        let c = ev.solution.compliance;
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!("compliance {c} is not positive")));
        }
        let cf = ConstraintField::evaluate(&problem.stencil, &ev.state.field, bounds);
        Ok(Point { ev, cf })
    };

    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let mut mma = Mma::new(n, -1.0, 1.0, config.move_limit)?;
    let mut al = AlState::new(4 * problem.n_elements(), config.al);
    let mut p = config.ks.p0;
    let mut pt = point_at(&x)?;
    let initial_compliance = pt.ev.solution.compliance;
    let s_obj = config.objective_target / initial_compliance;
    let mut last_outer_compliance = initial_compliance;
    let mut stopped_early = false;
    let mut evaluations = 1;
    let inner = config.inner_iters;

    let mut k = 0;
    loop {
        let c = pt.ev.solution.compliance;
        let (kmax, pmax) = (pt.cf.max_abs_kappa(), pt.cf.max_abs_psi());
        let ratio_excess = (kmax / bounds.kappa_max).max(pmax / bounds.psi_max) - 1.0;

        let outer_step = k > 0 && k % inner == 0;
        if outer_step {
            match mode {
                Mode::Al => al = al_update(&al, &pt.cf.g),
                Mode::Ks => p = config.ks.next(p),
                Mode::Unconstrained => {}
            }
        }
        let done = k >= config.max_iter;
        if outer_step && config.early_stop && !done {
            let change = ((c - last_outer_compliance) / last_outer_compliance).abs();
            let feasible = mode == Mode::Unconstrained || ratio_excess < config.early_stop_violation;
            if change < config.early_stop_change && feasible {
                stopped_early = true;
            }
            last_outer_compliance = c;
        }
        let finished = done || stopped_early;
        let (objective, cons_values) = scaled_objective(mode, s_obj, &pt, &al, p);

        history.push(HistoryRow {
            iter: k,
            compliance: c,
            max_kappa: kmax,
            max_psi: pmax,
            max_kappa_ratio: kmax / bounds.kappa_max,
            max_psi_ratio: pmax / bounds.psi_max,
            mu: (mode == Mode::Al).then_some(al.mu),
            lambda_max: (mode == Mode::Al).then(|| al.lambda_max()),
            weight: (mode == Mode::Al).then_some(al.weight),
            p: (mode == Mode::Ks).then_some(p),
            objective,
        });
        log::debug!(
            "iter {k}: c = {c:.6e}, kappa ratio {:.4}, psi ratio {:.4}",
            kmax / bounds.kappa_max,
            pmax / bounds.psi_max
        );

        if k % inner == 0 || finished {
            observer(&Checkpoint {
                iter: k,
                x: &x,
                state: &pt.ev.state,
                constraints: &pt.cf,
                compliance: c,
                is_final: finished,
            });
        }

        if finished {
            return Ok(RunResult {
                mode,
                bounds: *bounds,
                history: history.clone(),
                x,
                state: pt.ev.state,
                constraints: pt.cf,
                initial_compliance,
                final_compliance: c,
                iterations: k,
                evaluations,
                stopped_early,
            });
        }

        let mut grad_phys: Vec<[f64; 2]> = pt.ev.dc.iter().map(|d| [s_obj * d[0], s_obj * d[1]]).collect();
        if mode == Mode::Al {
            let (_, dpen) = al_penalty(&pt.cf.g, &al);
            let vjp = constraint_vjp(&problem.stencil, bounds, &dpen);
            for (a, b) in grad_phys.iter_mut().zip(&vjp) {
                a[0] += b[0];
                a[1] += b[1];
            }
        }
        let df0 = backpropagate(&problem.filter, &pt.ev.state, &grad_phys);
        let cons_grads: Vec<Vec<f64>> = if mode == Mode::Ks {
            let (_, w) = ks_aggregate(&pt.cf.g, p);
            let phys = constraint_vjp(&problem.stencil, bounds, &w);
            vec![backpropagate(&problem.filter, &pt.ev.state, &phys)]
        } else {
            Vec::new()
        };
        let cons = (mode == Mode::Ks).then_some(mma::Constraints {
            values: &cons_values,
            gradients: &cons_grads,
        });

        if config.conservative {
            let mut trial = None;
            let step = mma.step_conservative(&x, objective, &df0, cons, config.max_inner, &mut |y| {
                let tp = point_at(y)?;
                let out = scaled_objective(mode, s_obj, &tp, &al, p);
                trial = Some(tp);
                Ok(out)
            })?;
            evaluations += step.inner;
            x = step.x;
            pt = trial.expect("at least one trial point is evaluated");
        } else {
            x = mma.step_constrained(&x, &df0, cons)?;
            pt = point_at(&x)?;
            evaluations += 1;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ProblemPreset;
    use rand::{Rng, SeedableRng};

    fn small_problem() -> Problem {
        Problem::from_preset(&ProblemPreset::lbracket().with_resolution(8, 8), 0.2).unwrap()
    }

    #[test]
    fn al_gradient_matches_finite_differences() {
        let pb = small_problem();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..pb.n_vars()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bounds = Bounds::new(1.0, 1.0).unwrap();
        let mut al = AlState::new(4 * pb.n_elements(), AlParams::default());
        al.weight = 0.5;
        al.mu = 30.0;
        for l in al.lambda.iter_mut() {
            *l = rng.gen_range(0.0..2.0);
        }
        let scale = 1e-3;
        let (_, grad) = pb.al_value_and_grad(&x, &bounds, &al, scale).unwrap();
        let gmax = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let h = 1e-6;
        for i in (0..pb.n_vars()).step_by(3) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (pb.al_value_and_grad(&xp, &bounds, &al, scale).unwrap().0
                - pb.al_value_and_grad(&xm, &bounds, &al, scale).unwrap().0)
                / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5 * gmax, "var {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn isotropic_unconstrained_run_stays_put() {
        let (grid, load) = build_preset(&ProblemPreset::lbracket().with_resolution(8, 8)).unwrap();
        let pb = Problem::new(grid, load, &OrthotropicLaw::isotropic(70e9, 0.3), 1.0, 0.2).unwrap();
        let x0 = pb.uniform_start(-45.0, std::f64::consts::FRAC_1_SQRT_2);
        let cfg = OptimizerConfig {
            max_iter: 30,
            ..Default::default()
        };
        let res = run(&pb, &Bounds::new(1.0, 1.0).unwrap(), Mode::Unconstrained, &cfg, &x0, &mut |_| {}).unwrap();
        let c0 = res.initial_compliance;
        for row in &res.history {
            // Only the ε-regularized magnitude of the projected field can change.
            assert!((row.compliance - c0).abs() < 1e-5 * c0, "{} vs {c0}", row.compliance);
        }
        for a in res.state.angles_deg() {
            assert!((a + 45.0).abs() < 1e-6, "{a}");
        }
    }

    #[test]
    fn history_layout_and_checkpoints() {
        let pb = small_problem();
        let x0 = pb.uniform_start(-45.0, std::f64::consts::FRAC_1_SQRT_2);
        let cfg = OptimizerConfig {
            max_iter: 45,
            ..Default::default()
        };
        let mut seen = Vec::new();
        let res = run(&pb, &Bounds::new(2.5, 2.5).unwrap(), Mode::Al, &cfg, &x0, &mut |cp| seen.push((cp.iter, cp.is_final))).unwrap();
        assert_eq!(res.history.len(), 46);
        assert_eq!(seen, vec![(0, false), (20, false), (40, false), (45, true)]);
        assert_eq!(res.history[21].mu, Some(15.0));
        assert_eq!(res.history[19].mu, Some(10.0));
        assert!(res.history.windows(2).all(|w| w[1].mu >= w[0].mu && w[1].weight >= w[0].weight));
        let csv = history_csv(&res.history);
        assert!(csv.starts_with(HISTORY_HEADER));
        assert_eq!(csv.lines().count(), 47);
        assert!(res.final_compliance < res.initial_compliance);
    }

    #[test]
    fn ks_run_records_p_schedule() {
        let pb = small_problem();
        let x0 = pb.uniform_start(-45.0, std::f64::consts::FRAC_1_SQRT_2);
        let cfg = OptimizerConfig {
            max_iter: 41,
            ..Default::default()
        };
        let res = run(&pb, &Bounds::new(2.5, 2.5).unwrap(), Mode::Ks, &cfg, &x0, &mut |_| {}).unwrap();
        assert_eq!(res.history[0].p, Some(5.0));
        assert!((res.history[20].p.unwrap() - 5.5).abs() < 1e-12);
        assert!((res.history[40].p.unwrap() - 6.05).abs() < 1e-12);
        assert!(res.history.iter().all(|r| r.mu.is_none()));
    }

    #[test]
    fn wrong_design_length_reports_partial_history() {
        let pb = small_problem();
        let err = run(&pb, &Bounds::new(1.0, 1.0).unwrap(), Mode::Al, &OptimizerConfig::default(), &[0.0; 3], &mut |_| {}).unwrap_err();
        assert!(err.history.is_empty());
        assert!(matches!(err.source, Error::InvalidParameter(_)));
    }
}
