//! A compact Levenberg-Marquardt minimizer for small parameter vectors.
//!
//! Used to polish grid-search optima over the two or three nonlinear
//! parameters of the log-periodic models, with the linear parameters
//! profiled out inside the residual function. The Jacobian is taken by
//! central differences.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Relative cost decrease below which the run counts as converged.
    pub ftol: f64,
    /// Relative step size below which the run counts as converged.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian of `residuals` at `p`; `None` if any probe is
/// infeasible.
pub fn jacobian<F>(residuals: &F, p: &[f64], steps: &[f64]) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let base = residuals(p)?;
    let mut jac = DMatrix::zeros(base.len(), p.len());
    let mut probe = p.to_vec();
    for j in 0..p.len() {
        let h = steps[j];
        probe[j] = p[j] + h;
        let plus = residuals(&probe);
        probe[j] = p[j] - h;
        let minus = residuals(&probe);
        probe[j] = p[j];
        match (plus, minus) {
            (Some(rp), Some(rm)) => {
                for i in 0..base.len() {
                    jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            (Some(rp), None) => {
                for i in 0..base.len() {
                    jac[(i, j)] = (rp[i] - base[i]) / h;
                }
            }
            (None, Some(rm)) => {
                for i in 0..base.len() {
                    jac[(i, j)] = (base[i] - rm[i]) / h;
                }
            }
            (None, None) => return None,
        }
    }
    Some(jac)
}

fn fd_steps(p: &[f64], scale: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(scale)
        .map(|(v, s)| 1e-6 * v.abs().max(*s))
        .collect()
}

/// Minimizes `sum(residuals(p)^2)` starting from `start`.
///
/// `residuals` returns `None` for parameter vectors outside the feasible
/// region; such trial steps are rejected like uphill steps. `scale` gives a
/// typical magnitude per parameter for finite-difference step sizing.
pub fn minimize<F>(residuals: F, start: &[f64], scale: &[f64], cfg: &LmConfig) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut p = start.to_vec();
    let mut r = residuals(&p)?;
    let mut cost = cost_of(&r);
    let mut lambda = cfg.initial_lambda;
    let n = p.len();

    for iter in 0..cfg.max_iter {
        if cost == 0.0 {
            return Some(LmOutcome {
                params: p,
                cost,
                iterations: iter,
                converged: true,
            });
        }
        let jac = jacobian(&residuals, &p, &fd_steps(&p, scale))?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;

        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..n {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            match residuals(&trial) {
                Some(tr) => {
                    let tc = cost_of(&tr);
                    if tc < cost {
                        let rel_drop = (cost - tc) / cost;
                        let rel_step = step
                            .iter()
                            .zip(&p)
                            .zip(scale)
                            .map(|((s, x), sc)| s.abs() / x.abs().max(*sc))
                            .fold(0.0, f64::max);
                        p = trial;
                        r = tr;
                        cost = tc;
                        lambda = (lambda / 10.0).max(1e-12);
                        accepted = true;
                        if rel_drop < cfg.ftol || rel_step < cfg.xtol {
                            return Some(LmOutcome {
                                params: p,
                                cost,
                                iterations: iter + 1,
                                converged: true,
                            });
                        }
                        break;
                    }
                    lambda *= 10.0;
                }
                None => lambda *= 10.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: a (local) minimum
            return Some(LmOutcome {
                params: p,
                cost,
                iterations: iter + 1,
                converged: true,
            });
        }
    }
    Some(LmOutcome {
        params: p,
        cost,
        iterations: cfg.max_iter,
        converged: false,
    })
}
