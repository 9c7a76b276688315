//! Method of Moving Asymptotes for box-constrained problems with a small
//! number of general inequality constraints `f_i(x) ≤ 0`.
//!
//! Follows the 2007 formulation: the objective and constraints are replaced by
//! separable convex approximations around the current iterate, and the
//! subproblem is solved by a primal-dual interior point method. Without
//! general constraints the subproblem separates and is solved in closed form.

use crate::error::{Error, Result};

const ASYINIT: f64 = 0.5;
const ASYINCR: f64 = 1.2;
const ASYDECR: f64 = 0.7;
const ALBEFA: f64 = 0.1;
const RAA0: f64 = 1e-5;
const EPSIMIN: f64 = 1e-7;
/// Closest an asymptote may get to the iterate, relative to the variable range.
const ASYMIN: f64 = 1e-5;

/// Elastic variables for the general constraints, as in the standard
/// `a0 = 1, a = 0, c = 1000, d = 1` setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticTerms {
    pub a0: f64,
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for ElasticTerms {
    fn default() -> Self {
        Self {
            a0: 1.0,
            a: 0.0,
            c: 1000.0,
            d: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mma {
    n: usize,
    xmin: Vec<f64>,
    xmax: Vec<f64>,
    /// Absolute cap on `|x_next − x|` per component.
    move_limit: f64,
    low: Vec<f64>,
    upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    iter: usize,
    pub elastic: ElasticTerms,
}

/// Constraint values and gradients, one dense row per constraint.
#[derive(Debug, Clone, Copy)]
pub struct Constraints<'a> {
    pub values: &'a [f64],
    pub gradients: &'a [Vec<f64>],
}

impl Mma {
    pub fn new(n: usize, xmin: f64, xmax: f64, move_limit: f64) -> Result<Self> {
        if !(xmax > xmin) || !(move_limit > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "MMA needs xmin < xmax and a positive move limit, got [{xmin}, {xmax}], {move_limit}"
            )));
        }
        Ok(Self {
            n,
            xmin: vec![xmin; n],
            xmax: vec![xmax; n],
            move_limit,
            low: vec![0.0; n],
            upp: vec![0.0; n],
            xold1: Vec::new(),
            xold2: Vec::new(),
            iter: 0,
            elastic: ElasticTerms::default(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    /// One MMA step for an objective without general constraints.
    pub fn step(&mut self, x: &[f64], df0: &[f64]) -> Result<Vec<f64>> {
        self.step_constrained(x, df0, None)
    }

    /// One MMA step. `constraints` holds `f_i(x)` and `∂f_i/∂x`.
    pub fn step_constrained(&mut self, x: &[f64], df0: &[f64], constraints: Option<Constraints<'_>>) -> Result<Vec<f64>> {
        check_finite(df0, constraints)?;
        self.begin(x);
        let m = constraints.map_or(0, |c| c.values.len());
        let approx = self.approximation(x, 0.0, df0, constraints, RAA0, &vec![RAA0; m]);
        let xnew = approx.solve(self.elastic);
        self.finish(x);
        Ok(xnew)
    }

    /// Conservative (globally convergent) variant: the trial point is
    /// evaluated and the approximation curvature raised until the
    /// approximations overestimate every function there.
    ///
    /// `eval` returns `f0` and the constraint values at a trial point.
    pub fn step_conservative(
        &mut self,
        x: &[f64],
        f0: f64,
        df0: &[f64],
        constraints: Option<Constraints<'_>>,
        max_inner: usize,
        eval: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<ConservativeStep> {
        check_finite(df0, constraints)?;
        if !f0.is_finite() {
            return Err(Error::InvalidParameter("non-finite objective value".into()));
        }
        self.begin(x);
        let n = self.n;
        let m = constraints.map_or(0, |c| c.values.len());
        let weighted = |g: &[f64]| -> f64 {
            let s: f64 = g.iter().zip(self.xmin.iter().zip(&self.xmax)).map(|(g, (a, b))| g.abs() * (b - a)).sum();
            (0.1 * s / n as f64).max(1e-6)
        };
        let mut raa0 = weighted(df0);
        let mut raa: Vec<f64> = constraints.map_or(Vec::new(), |c| c.gradients.iter().map(|g| weighted(g)).collect());

        let mut inner = 0;
        let result = loop {
            let approx = self.approximation(x, f0, df0, constraints, raa0, &raa);
            let xnew = approx.solve(self.elastic);
            let (f0new, fnew) = eval(&xnew)?;
            inner += 1;
            let (f0app, fapp) = approx.values_at(&xnew);
            let conservative =
                f0app + EPSIMIN >= f0new && (0..m).all(|i| fapp[i] + EPSIMIN >= fnew[i]);
            if conservative || inner >= max_inner || !f0new.is_finite() {
                break ConservativeStep {
                    x: xnew,
                    f0: f0new,
                    values: fnew,
                    inner,
                    conservative,
                };
            }
            let mut raacof = 0.0;
            for j in 0..n {
                let d = xnew[j] - x[j];
                let range = (self.xmax[j] - self.xmin[j]).max(1e-5);
                raacof += d * d * (self.upp[j] - self.low[j]) / ((self.upp[j] - xnew[j]) * (xnew[j] - self.low[j]) * range);
            }
            let raacof = raacof.max(1e-12);
            if f0new > f0app + 0.5 * EPSIMIN {
                raa0 = (1.1 * (raa0 + (f0new - f0app) / raacof)).min(10.0 * raa0);
            }
            for i in 0..m {
                if fnew[i] > fapp[i] + 0.5 * EPSIMIN {
                    raa[i] = (1.1 * (raa[i] + (fnew[i] - fapp[i]) / raacof)).min(10.0 * raa[i]);
                }
            }
        };
        self.finish(x);
        Ok(result)
    }

    fn begin(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.n);
        self.iter += 1;
        self.update_asymptotes(x);
    }

    fn finish(&mut self, x: &[f64]) {
        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
    }

    fn approximation(&self, x: &[f64], f0: f64, df0: &[f64], constraints: Option<Constraints<'_>>, raa0: f64, raa: &[f64]) -> Approximation {
        let n = self.n;
        assert_eq!(df0.len(), n);
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut r0 = f0;
        for j in 0..n {
            let range = (self.xmax[j] - self.xmin[j]).max(1e-5);
            alfa[j] = (self.low[j] + ALBEFA * (x[j] - self.low[j]))
                .max(x[j] - self.move_limit)
                .max(self.xmin[j]);
            beta[j] = (self.upp[j] - ALBEFA * (self.upp[j] - x[j]))
                .min(x[j] + self.move_limit)
                .min(self.xmax[j]);
            let ux1 = self.upp[j] - x[j];
            let xl1 = x[j] - self.low[j];
            let (pp, qq) = (df0[j].max(0.0), (-df0[j]).max(0.0));
            let pq = 0.001 * (pp + qq) + raa0 / range;
            p0[j] = (pp + pq) * ux1 * ux1;
            q0[j] = (qq + pq) * xl1 * xl1;
            r0 -= p0[j] / ux1 + q0[j] / xl1;
        }
        let m = constraints.map_or(0, |c| c.values.len());
        let mut pm = vec![vec![0.0; n]; m];
        let mut qm = vec![vec![0.0; n]; m];
        let mut b = vec![0.0; m];
        if let Some(c) = constraints {
            for i in 0..m {
                for j in 0..n {
                    let range = (self.xmax[j] - self.xmin[j]).max(1e-5);
                    let g = c.gradients[i][j];
                    let (pp, qq) = (g.max(0.0), (-g).max(0.0));
                    let pq = 0.001 * (pp + qq) + raa[i] / range;
                    let ux1 = self.upp[j] - x[j];
                    let xl1 = x[j] - self.low[j];
                    pm[i][j] = (pp + pq) * ux1 * ux1;
                    qm[i][j] = (qq + pq) * xl1 * xl1;
                    b[i] += pm[i][j] / ux1 + qm[i][j] / xl1;
                }
                b[i] -= c.values[i];
            }
        }
        Approximation {
            low: self.low.clone(),
            upp: self.upp.clone(),
            alfa,
            beta,
            p0,
            q0,
            r0,
            p: pm,
            q: qm,
            b,
        }
    }

    fn update_asymptotes(&mut self, x: &[f64]) {
        for j in 0..self.n {
            let range = self.xmax[j] - self.xmin[j];
            if self.iter < 3 {
                self.low[j] = x[j] - ASYINIT * range;
                self.upp[j] = x[j] + ASYINIT * range;
            } else {
                let zzz = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if zzz > 0.0 {
                    ASYINCR
                } else if zzz < 0.0 {
                    ASYDECR
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = low.clamp(x[j] - 10.0 * range, x[j] - ASYMIN * range);
                self.upp[j] = upp.clamp(x[j] + ASYMIN * range, x[j] + 10.0 * range);
            }
        }
    }
}

/// Outcome of [`Mma::step_conservative`].
#[derive(Debug, Clone)]
pub struct ConservativeStep {
    pub x: Vec<f64>,
    pub f0: f64,
    pub values: Vec<f64>,
    /// Trial points evaluated.
    pub inner: usize,
    /// False when the inner loop hit its cap before becoming conservative.
    pub conservative: bool,
}

fn check_finite(df0: &[f64], constraints: Option<Constraints<'_>>) -> Result<()> {
    if let Some(i) = df0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient { index: i });
    }
    if let Some(c) = constraints {
        for row in c.gradients {
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { index: i });
            }
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite constraint value".into()));
        }
    }
    Ok(())
}

/// Separable convex model `r + Σ p/(U − x) + q/(x − L)` of the objective and
/// of each constraint (the constraint form stores `b = r`-shifted values).
struct Approximation {
    low: Vec<f64>,
    upp: Vec<f64>,
    alfa: Vec<f64>,
    beta: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    r0: f64,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Approximation {
    fn values_at(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut f0 = self.r0;
        for j in 0..x.len() {
            f0 += self.p0[j] / (self.upp[j] - x[j]) + self.q0[j] / (x[j] - self.low[j]);
        }
        let f = (0..self.b.len())
            .map(|i| {
                let mut v = -self.b[i];
                for j in 0..x.len() {
                    v += self.p[i][j] / (self.upp[j] - x[j]) + self.q[i][j] / (x[j] - self.low[j]);
                }
                v
            })
            .collect();
        (f0, f)
    }

    fn solve(&self, el: ElasticTerms) -> Vec<f64> {
        if self.b.is_empty() {
            return (0..self.p0.len())
                .map(|j| {
                    let (sp, sq) = (self.p0[j].sqrt(), self.q0[j].sqrt());
                    ((sq * self.upp[j] + sp * self.low[j]) / (sp + sq)).clamp(self.alfa[j], self.beta[j])
                })
                .collect();
        }
        Subproblem {
            low: &self.low,
            upp: &self.upp,
            alfa: &self.alfa,
            beta: &self.beta,
            p0: &self.p0,
            q0: &self.q0,
            p: &self.p,
            q: &self.q,
            b: &self.b,
            el,
        }
        .solve()
    }
}

struct Subproblem<'a> {
    low: &'a [f64],
    upp: &'a [f64],
    alfa: &'a [f64],
    beta: &'a [f64],
    p0: &'a [f64],
    q0: &'a [f64],
    p: &'a [Vec<f64>],
    q: &'a [Vec<f64>],
    b: &'a [f64],
    el: ElasticTerms,
}

/// Primal and dual unknowns of the interior point iteration.
#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

impl Subproblem<'_> {
    fn n(&self) -> usize {
        self.low.len()
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn plam_qlam(&self, pt: &Point) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut plam = self.p0.to_vec();
        let mut qlam = self.q0.to_vec();
        for i in 0..self.m() {
            for j in 0..n {
                plam[j] += self.p[i][j] * pt.lam[i];
                qlam[j] += self.q[i][j] * pt.lam[i];
            }
        }
        (plam, qlam)
    }

    fn gvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|i| {
                (0..self.n())
                    .map(|j| self.p[i][j] / (self.upp[j] - x[j]) + self.q[i][j] / (x[j] - self.low[j]))
                    .sum()
            })
            .collect()
    }

    fn residual(&self, pt: &Point, epsi: f64) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        let el = self.el;
        let (plam, qlam) = self.plam_qlam(pt);
        let gvec = self.gvec(&pt.x);
        let mut r = Vec::with_capacity(3 * n + 4 * m + 2);
        for j in 0..n {
            let dpsidx = plam[j] / (self.upp[j] - pt.x[j]).powi(2) - qlam[j] / (pt.x[j] - self.low[j]).powi(2);
            r.push(dpsidx - pt.xsi[j] + pt.eta[j]);
        }
        for i in 0..m {
            r.push(el.c + el.d * pt.y[i] - pt.mu[i] - pt.lam[i]);
        }
        r.push(el.a0 - pt.zet - el.a * pt.lam.iter().sum::<f64>());
        for i in 0..m {
            r.push(gvec[i] - el.a * pt.z - pt.y[i] + pt.s[i] - self.b[i]);
        }
        for j in 0..n {
            r.push(pt.xsi[j] * (pt.x[j] - self.alfa[j]) - epsi);
        }
        for j in 0..n {
            r.push(pt.eta[j] * (self.beta[j] - pt.x[j]) - epsi);
        }
        for i in 0..m {
            r.push(pt.mu[i] * pt.y[i] - epsi);
        }
        r.push(pt.zet * pt.z - epsi);
        for i in 0..m {
            r.push(pt.lam[i] * pt.s[i] - epsi);
        }
        r
    }

    fn solve(&self) -> Vec<f64> {
        let (n, m) = (self.n(), self.m());
        let el = self.el;
        let mut pt = Point {
            x: (0..n).map(|j| 0.5 * (self.alfa[j] + self.beta[j])).collect(),
            y: vec![1.0; m],
            z: 1.0,
            lam: vec![1.0; m],
            xsi: (0..n).map(|j| (1.0 / (0.5 * (self.beta[j] - self.alfa[j]))).max(1.0)).collect(),
            eta: (0..n).map(|j| (1.0 / (0.5 * (self.beta[j] - self.alfa[j]))).max(1.0)).collect(),
            mu: vec![(0.5 * el.c).max(1.0); m],
            zet: 1.0,
            s: vec![1.0; m],
        };
        let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let maxabs = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));

        let mut epsi = 1.0;
        while epsi > EPSIMIN {
            let res = self.residual(&pt, epsi);
            let mut resnorm = norm(&res);
            let mut resmax = maxabs(&res);
            let mut ittt = 0;
            while resmax > 0.9 * epsi && ittt < 200 {
                ittt += 1;
                let (plam, qlam) = self.plam_qlam(&pt);
                let gvec = self.gvec(&pt.x);
                let mut delx = vec![0.0; n];
                let mut diagx = vec![0.0; n];
                for j in 0..n {
                    let ux1 = self.upp[j] - pt.x[j];
                    let xl1 = pt.x[j] - self.low[j];
                    let dpsidx = plam[j] / (ux1 * ux1) - qlam[j] / (xl1 * xl1);
                    delx[j] = dpsidx - epsi / (pt.x[j] - self.alfa[j]) + epsi / (self.beta[j] - pt.x[j]);
                    diagx[j] = 2.0 * (plam[j] / ux1.powi(3) + qlam[j] / xl1.powi(3))
                        + pt.xsi[j] / (pt.x[j] - self.alfa[j])
                        + pt.eta[j] / (self.beta[j] - pt.x[j]);
                }
                // GG[i][j] = ∂gvec_i/∂x_j
                let gg: Vec<Vec<f64>> = (0..m)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                self.p[i][j] / (self.upp[j] - pt.x[j]).powi(2) - self.q[i][j] / (pt.x[j] - self.low[j]).powi(2)
                            })
                            .collect()
                    })
                    .collect();
                let lam_sum: f64 = pt.lam.iter().sum();
                let dely: Vec<f64> = (0..m).map(|i| el.c + el.d * pt.y[i] - pt.lam[i] - epsi / pt.y[i]).collect();
                let delz = el.a0 - el.a * lam_sum - epsi / pt.z;
                let dellam: Vec<f64> = (0..m)
                    .map(|i| gvec[i] - el.a * pt.z - pt.y[i] - self.b[i] + epsi / pt.lam[i])
                    .collect();
                let diagy: Vec<f64> = (0..m).map(|i| el.d + pt.mu[i] / pt.y[i]).collect();
                let diaglamyi: Vec<f64> = (0..m).map(|i| pt.s[i] / pt.lam[i] + 1.0 / diagy[i]).collect();

                // Reduced (m+1)×(m+1) system in (dlam, dz).
                let dim = m + 1;
                let mut aa = nalgebra::DMatrix::<f64>::zeros(dim, dim);
                let mut bb = nalgebra::DVector::<f64>::zeros(dim);
                for i in 0..m {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += gg[i][j] * delx[j] / diagx[j];
                    }
                    bb[i] = dellam[i] + dely[i] / diagy[i] - acc;
                    for k in 0..m {
                        let mut v = 0.0;
                        for j in 0..n {
                            v += gg[i][j] * gg[k][j] / diagx[j];
                        }
                        aa[(i, k)] = v;
                    }
                    aa[(i, i)] += diaglamyi[i];
                    aa[(i, m)] = el.a;
                    aa[(m, i)] = el.a;
                }
                aa[(m, m)] = -pt.zet / pt.z;
                bb[m] = delz;
                let sol = aa.lu().solve(&bb).unwrap_or_else(|| nalgebra::DVector::zeros(dim));
                let dlam: Vec<f64> = (0..m).map(|i| sol[i]).collect();
                let dz = sol[m];
                let dx: Vec<f64> = (0..n)
                    .map(|j| {
                        let gl: f64 = (0..m).map(|i| gg[i][j] * dlam[i]).sum();
                        -delx[j] / diagx[j] - gl / diagx[j]
                    })
                    .collect();
                let dy: Vec<f64> = (0..m).map(|i| -dely[i] / diagy[i] + dlam[i] / diagy[i]).collect();
                let dxsi: Vec<f64> = (0..n)
                    .map(|j| {
                        let d = pt.x[j] - self.alfa[j];
                        -pt.xsi[j] + epsi / d - pt.xsi[j] * dx[j] / d
                    })
                    .collect();
                let deta: Vec<f64> = (0..n)
                    .map(|j| {
                        let d = self.beta[j] - pt.x[j];
                        -pt.eta[j] + epsi / d + pt.eta[j] * dx[j] / d
                    })
                    .collect();
                let dmu: Vec<f64> = (0..m).map(|i| -pt.mu[i] + epsi / pt.y[i] - pt.mu[i] * dy[i] / pt.y[i]).collect();
                let dzet = -pt.zet + epsi / pt.z - pt.zet * dz / pt.z;
                let ds: Vec<f64> = (0..m).map(|i| -pt.s[i] + epsi / pt.lam[i] - pt.s[i] * dlam[i] / pt.lam[i]).collect();

                // Largest step keeping every positive unknown positive.
                let mut stm: f64 = 1.0;
                let mut bump = |v: f64, d: f64| stm = stm.max(-1.01 * d / v);
                for i in 0..m {
                    bump(pt.y[i], dy[i]);
                    bump(pt.lam[i], dlam[i]);
                    bump(pt.mu[i], dmu[i]);
                    bump(pt.s[i], ds[i]);
                }
                bump(pt.z, dz);
                bump(pt.zet, dzet);
                for j in 0..n {
                    bump(pt.xsi[j], dxsi[j]);
                    bump(pt.eta[j], deta[j]);
                    bump(pt.x[j] - self.alfa[j], dx[j]);
                    bump(self.beta[j] - pt.x[j], -dx[j]);
                }
                let mut steg = 1.0 / stm;

                let old = pt.clone();
                let mut itto = 0;
                let mut resinew = 2.0 * resnorm;
                let mut newres = Vec::new();
                while resinew > resnorm && itto < 50 {
                    itto += 1;
                    let axpy = |a: &[f64], d: &[f64]| -> Vec<f64> { a.iter().zip(d).map(|(a, d)| a + steg * d).collect() };
                    pt = Point {
                        x: axpy(&old.x, &dx),
                        y: axpy(&old.y, &dy),
                        z: old.z + steg * dz,
                        lam: axpy(&old.lam, &dlam),
                        xsi: axpy(&old.xsi, &dxsi),
                        eta: axpy(&old.eta, &deta),
                        mu: axpy(&old.mu, &dmu),
                        zet: old.zet + steg * dzet,
                        s: axpy(&old.s, &ds),
                    };
                    newres = self.residual(&pt, epsi);
                    resinew = norm(&newres);
                    steg /= 2.0;
                }
                resnorm = resinew;
                resmax = maxabs(&newres);
            }
            epsi *= 0.1;
        }
        pt.x
    }
}
