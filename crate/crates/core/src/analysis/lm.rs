//! Bounded Levenberg–Marquardt with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{QuditError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when every relative parameter change is below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            xtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Standard errors from s²·(JᵀJ)⁻¹; NaN when the normal matrix is singular.
    pub std_errors: Vec<f64>,
    /// ½Σr².
    pub cost: f64,
    pub iterations: usize,
    pub n_residuals: usize,
}

fn jacobian<F>(f: &F, p: &[f64], r0: &DVector<f64>, lo: &[f64], hi: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = p.len();
    let mut j = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for k in 0..n {
        let h = 1e-6 * p[k].abs().max(1e-6);
        let up = (p[k] + h).min(hi[k]);
        let dn = (p[k] - h).max(lo[k]);
        if up <= dn {
            continue;
        }
        q[k] = up;
        let ru = f(&q);
        q[k] = dn;
        let rd = f(&q);
        q[k] = p[k];
        for i in 0..m {
            j[(i, k)] = (ru[i] - rd[i]) / (up - dn);
        }
    }
    j
}

fn cost_of(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimize ½‖f(p)‖² subject to lo ≤ p ≤ hi.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], lo: &[f64], hi: &[f64], opts: LmOptions) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    assert!(lo.len() == n && hi.len() == n, "bounds must match parameter count");
    let clamp = |p: &mut [f64]| {
        for k in 0..n {
            p[k] = p[k].clamp(lo[k], hi[k]);
        }
    };
    let mut p = p0.to_vec();
    clamp(&mut p);
    let mut r = DVector::from_vec(f(&p));
    let m = r.len();
    if m < n {
        return Err(QuditError::InsufficientData(format!("{m} residuals for {n} parameters")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(QuditError::FitDiverged {
            iterations: 0,
            cost: f64::NAN,
            last_step: 0.0,
        });
    }
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut last_step = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let j = jacobian(&f, &p, &r, lo, hi);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p.clone();
            for k in 0..n {
                trial[k] += delta[k];
            }
            clamp(&mut trial);
            let rt = DVector::from_vec(f(&trial));
            let ct = cost_of(&rt);
            if ct.is_finite() && ct <= cost {
                last_step = (0..n)
                    .map(|k| (trial[k] - p[k]).abs() / p[k].abs().max(1e-12))
                    .fold(0.0, f64::max);
                let improvement = cost - ct;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if last_step < opts.xtol || improvement <= 1e-15 * cost.max(f64::MIN_POSITIVE) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: numerically at the minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(QuditError::FitDiverged {
            iterations,
            cost,
            last_step,
        });
    }
    let j = jacobian(&f, &p, &r, lo, hi);
    let dof = (m - n).max(1) as f64;
    let s2 = 2.0 * cost / dof;
    let std_errors = match (j.transpose() * &j).try_inverse() {
        Some(inv) => (0..n).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; n],
    };
    Ok(LmResult {
        params: p,
        std_errors,
        cost,
        iterations,
        n_residuals: m,
    })
}
