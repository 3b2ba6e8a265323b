//! Levenberg-Marquardt with a projection step for simple feasible sets.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative step falls below this.
    pub xtol: f64,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when ‖Jᵀr‖∞ falls below this.
    pub gtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, xtol: 1e-14, ftol: 1e-15, gtol: 1e-16 }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    pub iterations: usize,
}

impl LmResult {
    pub fn rms(&self) -> f64 {
        (self.residuals.norm_squared() / self.residuals.len().max(1) as f64).sqrt()
    }
}

/// Minimizes ½‖r(x)‖² subject to x ∈ C, where `project` maps onto C.
/// `model` returns (residuals, Jacobian).
pub fn levenberg_marquardt(
    mut model: impl FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
    project: impl Fn(&mut DVector<f64>),
    x0: DVector<f64>,
    opts: LmOptions,
) -> Result<LmResult> {
    let mut x = x0;
    project(&mut x);
    let (mut r, mut jac) = model(&x);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for it in 0..opts.max_iter {
        let g = jac.transpose() * &r;
        if g.amax() <= opts.gtol || cost == 0.0 {
            return Ok(LmResult { x, residuals: r, iterations: it });
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut xn = &x + &step;
            project(&mut xn);
            let (rn, jn) = model(&xn);
            let cn = rn.norm_squared();
            if cn.is_finite() && cn <= cost {
                let dx = (&xn - &x).norm();
                let small_step = dx <= opts.xtol * (x.norm() + opts.xtol);
                let small_gain = cost - cn <= opts.ftol * cost;
                x = xn;
                r = rn;
                jac = jn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    return Ok(LmResult { x, residuals: r, iterations: it + 1 });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent along any damping: at a (constrained) minimum
            return Ok(LmResult { x, residuals: r, iterations: it + 1 });
        }
    }
    Err(Error::FitFailure { iterations: opts.max_iter, rms: (cost / r.len().max(1) as f64).sqrt() })
}
