//! Kreisselmeier–Steinhauser aggregation of the local constraints into one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(1/p) ln((1/N) Σ exp(p g_j))` and its gradient (softmax weights).
pub fn ks_aggregate(g: &[f64], p: f64) -> (f64, Vec<f64>) {
    assert!(!g.is_empty());
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = g.iter().map(|&v| (p * (v - gmax)).exp()).collect();
    let sum: f64 = w.iter().sum();
    let value = gmax + (sum / g.len() as f64).ln() / p;
    (value, w.into_iter().map(|v| v / sum).collect())
}

/// Continuation of the aggregation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KsParams {
    pub p0: f64,
    pub growth: f64,
    pub p_max: f64,
}

impl Default for KsParams {
    fn default() -> Self {
        Self {
            p0: 5.0,
            growth: 1.1,
            p_max: 50.0,
        }
    }
}

impl KsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.growth >= 1.0 && self.p_max >= self.p0) {
            return Err(Error::InvalidParameter(format!(
                "ks schedule needs p0 > 0, growth >= 1, p_max >= p0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn next(&self, p: f64) -> f64 {
        (p * self.growth).min(self.p_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_entries_reproduce_value() {
        let (v, w) = ks_aggregate(&[-0.3; 7], 17.0);
        assert!((v + 0.3).abs() < 1e-15);
        assert!(w.iter().all(|x| (x - 1.0 / 7.0).abs() < 1e-15));
    }

    #[test]
    fn log_sum_exp_bounds() {
        let g = [0.1, -0.5, 0.4, -2.0, 0.39];
        for p in [5.0, 12.0, 50.0] {
            let (v, _) = ks_aggregate(&g, p);
            assert!(v <= 0.4);
            assert!(v >= 0.4 - (g.len() as f64).ln() / p);
        }
    }

    #[test]
    fn overflow_safe() {
        let (v, w) = ks_aggregate(&[800.0, 799.0], 50.0);
        assert!(v.is_finite() && w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = [0.3, -0.1, 0.25, -0.9, 0.05, 0.29];
        let p = 20.0;
        let (_, d) = ks_aggregate(&g, p);
        let h = 1e-6;
        let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 0..g.len() {
            let mut gp = g;
            let mut gm = g;
            gp[j] += h;
            gm[j] -= h;
            let fd = (ks_aggregate(&gp, p).0 - ks_aggregate(&gm, p).0) / (2.0 * h);
            assert!((fd - d[j]).abs() <= 1e-8 * scale, "j={j}");
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn schedule_caps() {
        let s = KsParams::default();
        let mut p = s.p0;
        for _ in 0..100 {
            let q = s.next(p);
            assert!(q >= p);
            p = q;
        }
        assert_eq!(p, 50.0);
        assert!((s.next(5.0) - 5.5).abs() < 1e-15);
    }
}
