//! Grid-search fits of the full model and of the oscillation-free envelope.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::linear::{envelope_cell, rss_row, solve_cell, Problem};
use super::model::eval_model;
use super::{
    FitConfig, FitReport, LpplParams, Oscillation, ParamErrors, Stage, Uncertainty, Variant,
};
use crate::error::{Error, Result};
use crate::lm::{self, LmConfig};
use crate::series::TimeSeries;
use crate::stats::linspace;

/// Index of the smallest `Some` value, first occurrence on ties.
pub(crate) fn argmin(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if v.is_finite() && best.is_none_or(|(_, b)| *v < b) {
                best = Some((i, *v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Standard error of the profile minimum from a parabola through the five
/// grid points bracketing it: `rss ~ a (t - t0)^2 + ...` gives
/// `sqrt(sigma2 / a)`. `None` when the curvature is not positive.
pub(crate) fn profile_stderr(grid: &[f64], profile: &[Option<f64>], sigma2: f64) -> Option<f64> {
    let best = argmin(profile)?;
    let len = grid.len();
    if len < 3 {
        return None;
    }
    let half = 2.min((len - 1) / 2);
    let lo = best.saturating_sub(half).min(len - (2 * half + 1));
    let hi = lo + 2 * half + 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in lo..hi {
        if let Some(v) = profile[i] {
            xs.push(grid[i] - grid[best]);
            ys.push(v);
        }
    }
    if xs.len() < 3 {
        return None;
    }
    // least-squares quadratic y = c0 + c1 x + c2 x^2
    let x = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
    let (beta, _, _) = super::linear::svd_solve(&x, &ys).ok()?;
    let curvature = beta[2];
    if !(curvature > 0.0) || !sigma2.is_finite() {
        return None;
    }
    Some((sigma2.max(0.0) / curvature).sqrt())
}

/// Number of oscillation cycles the fitted `w` completes over the window.
pub(crate) fn cycles(p: &Problem, tc: f64, w: f64) -> f64 {
    let first = p.times[0];
    let last = p.last_time();
    w * ((tc - first) / (tc - last)).ln() / std::f64::consts::TAU
}

/// Gauss-Newton covariance `sigma2 (J^T J)^-1` of `residuals` at `params`.
pub(crate) fn jacobian_covariance<F>(
    residuals: &F,
    params: &[f64],
    scale: &[f64],
    sigma2: f64,
) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let steps: Vec<f64> = params
        .iter()
        .zip(scale)
        .map(|(v, s)| 1e-6 * v.abs().max(*s))
        .collect();
    let jac = lm::jacobian(residuals, params, &steps)?;
    let k = params.len();
    let mut jtj = jac.transpose() * &jac;
    let norms: Vec<f64> = (0..k).map(|i| jtj[(i, i)].sqrt()).collect();
    if norms.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    for i in 0..k {
        for j in 0..k {
            jtj[(i, j)] /= norms[i] * norms[j];
        }
    }
    let svd = jtj.svd(true, true);
    if !(svd.singular_values.min() > 1e-13 * svd.singular_values.max()) {
        return None;
    }
    let mut inv = svd.pseudo_inverse(0.0).ok()?;
    for i in 0..k {
        for j in 0..k {
            inv[(i, j)] *= sigma2 / (norms[i] * norms[j]);
        }
    }
    Some(inv)
}

fn diag_se(cov: &Option<DMatrix<f64>>, i: usize) -> Option<f64> {
    cov.as_ref()
        .map(|c| c[(i, i)].max(0.0).sqrt())
        .filter(|v| v.is_finite())
}

pub(crate) fn check_window(s: &TimeSeries, cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if s.len() < cfg.min_obs {
        return Err(Error::TooShort {
            len: s.len(),
            min: cfg.min_obs,
        });
    }
    Ok(())
}

struct GridCell {
    tc: f64,
    w: f64,
    m: f64,
    rss: f64,
}

/// Grid search of the full model, optionally polished, with uncertainties.
pub fn fit_full(s: &TimeSeries, variant: Variant, cfg: &FitConfig) -> Result<FitReport> {
    check_window(s, cfg)?;
    let p = Problem::new(s, variant, cfg.exponent, cfg.oscillation);
    let n = p.n();
    let last = p.last_time();
    let tcs: Vec<f64> = cfg.tc_offsets(n).iter().map(|o| last + o).collect();
    let ws = linspace(cfg.w_band.0, cfg.w_band.1, cfg.w_count);
    let ms = match variant {
        Variant::Power => linspace(cfg.m_band.0, cfg.m_band.1, cfg.m_count),
        Variant::Log => vec![0.0],
    };

    // rows[tc][m][w]
    let rows: Vec<Vec<Vec<Option<f64>>>> = tcs
        .par_iter()
        .map(|&tc| ms.iter().map(|&m| rss_row(&p, tc, m, &ws)).collect())
        .collect();

    // tie-break: smallest t_c, then smallest w, then smallest m
    let mut best: Option<GridCell> = None;
    let mut profile = Vec::with_capacity(tcs.len());
    for (ti, per_m) in rows.iter().enumerate() {
        let mut row_min: Option<f64> = None;
        for wi in 0..ws.len() {
            for (mi, per_w) in per_m.iter().enumerate() {
                if let Some(rss) = per_w[wi] {
                    if row_min.is_none_or(|r| rss < r) {
                        row_min = Some(rss);
                    }
                    if best.as_ref().is_none_or(|b| rss < b.rss) {
                        best = Some(GridCell {
                            tc: tcs[ti],
                            w: ws[wi],
                            m: ms[mi],
                            rss,
                        });
                    }
                }
            }
        }
        profile.push(row_min);
    }
    let best = best.ok_or(Error::AllCellsDegenerate)?;

    let power = variant == Variant::Power;
    let with_w = cfg.oscillation == Oscillation::Cosine;
    let tc_hi = last
        + cfg
            .tc_offsets(n)
            .last()
            .copied()
            .unwrap_or(cfg.tc_min_offset);
    let pack = |tc: f64, w: f64, m: f64| {
        let mut v = vec![tc];
        if with_w {
            v.push(w);
        }
        if power {
            v.push(m);
        }
        v
    };
    let unpack = |v: &[f64]| {
        let tc = v[0];
        let w = if with_w { v[1] } else { best.w };
        let m = if power { v[v.len() - 1] } else { 0.0 };
        (tc, w, m)
    };
    let feasible = |tc: f64, w: f64, m: f64| {
        tc > last
            && tc <= tc_hi
            && w >= cfg.w_band.0
            && w <= cfg.w_band.1
            && (!power || (m >= cfg.m_band.0 && m <= cfg.m_band.1))
    };
    let profiled = |v: &[f64]| -> Option<Vec<f64>> {
        let (tc, w, m) = unpack(v);
        if !feasible(tc, w, m) {
            return None;
        }
        solve_cell(&p, tc, m, w).ok().map(|(_, r, _)| r)
    };

    let (mut tc, mut w, mut m) = (best.tc, best.w, best.m);
    let mut converged = true;
    if cfg.refine {
        let start = pack(tc, w, m);
        let scale = pack(tc - p.origin, 1.0, 0.1);
        match lm::minimize(profiled, &start, &scale, &LmConfig::default()) {
            Some(out) if out.converged => {
                let (t2, w2, m2) = unpack(&out.params);
                tc = t2;
                w = w2;
                m = m2;
            }
            _ => converged = false,
        }
    }

    let (lin, resid, _) = solve_cell(&p, tc, m, w)?;
    let rss: f64 = resid.iter().map(|r| r * r).sum();
    let n_params = if with_w { 6 } else { 4 } + usize::from(power);
    let sigma2 = cfg.residual_variance(&resid, n.saturating_sub(n_params));

    let params = LpplParams {
        variant,
        a: lin.a,
        b: lin.b,
        c: lin.c,
        m: power.then_some(m),
        w,
        phi: lin.phi,
        t_c: tc,
        origin: p.origin,
        exponent: cfg.exponent,
        oscillation: cfg.oscillation,
    };

    // full parameter covariance: [a, b, c, phi, w, t_c, m]
    let model_resid = |v: &[f64]| -> Option<Vec<f64>> {
        let mut q = params;
        q.a = v[0];
        q.b = v[1];
        q.c = v[2];
        q.phi = v[3];
        q.w = v[4];
        q.t_c = v[5];
        if power {
            q.m = Some(v[6]);
        }
        if !(q.t_c > last) {
            return None;
        }
        p.times
            .iter()
            .zip(&p.y)
            .map(|(t, y)| eval_model(&q, *t).ok().map(|f| y - f))
            .collect()
    };
    let mut full = vec![
        params.a, params.b, params.c, params.phi, params.w, params.t_c,
    ];
    let mut scale = vec![1.0, 1.0, 0.1, 1.0, 1.0, tc - p.origin];
    if power {
        full.push(m);
        scale.push(0.1);
    }
    let cov = if with_w {
        jacobian_covariance(&model_resid, &full, &scale, sigma2)
    } else {
        None
    };
    let stderr = ParamErrors {
        a: diag_se(&cov, 0),
        b: diag_se(&cov, 1),
        c: diag_se(&cov, 2),
        phi: diag_se(&cov, 3),
        w: diag_se(&cov, 4),
        t_c: diag_se(&cov, 5),
        m: if power { diag_se(&cov, 6) } else { None },
    };

    let span = tc_hi - tcs[0];
    let tc_stderr = match cfg.uncertainty {
        Uncertainty::Profile => profile_stderr(&tcs, &profile, sigma2),
        Uncertainty::Jacobian => stderr.t_c,
    }
    .unwrap_or(span);

    let c_significant = with_w
        && params.c.abs() < 1.0
        && stderr
            .c
            .is_some_and(|se| params.c.abs() > cfg.significance * se)
        && cycles(&p, tc, w) >= cfg.min_cycles;
    if params.c.abs() >= 1.0 {
        converged = false;
    }

    Ok(FitReport {
        stage: Stage::Full,
        params,
        rss,
        sigma: (rss / n as f64).sqrt(),
        stderr,
        converged,
        n_obs: n,
        tc_stderr,
        c_significant,
        excluded: 0,
        window: (s.first_time(), s.last_time()),
    })
}

/// First stage: fits the oscillation-free trend `y = A + B f(x)` over the
/// `t_c` (and `m`) grid.
pub fn fit_envelope(s: &TimeSeries, variant: Variant, cfg: &FitConfig) -> Result<FitReport> {
    check_window(s, cfg)?;
    let p = Problem::new(s, variant, cfg.exponent, cfg.oscillation);
    let n = p.n();
    let last = p.last_time();
    let tcs: Vec<f64> = cfg.tc_offsets(n).iter().map(|o| last + o).collect();
    let power = variant == Variant::Power;
    let ms = if power {
        linspace(cfg.m_band.0, cfg.m_band.1, cfg.m_count)
    } else {
        vec![0.0]
    };

    let rows: Vec<Vec<Option<(f64, f64, f64)>>> = tcs
        .par_iter()
        .map(|&tc| ms.iter().map(|&m| envelope_cell(&p, tc, m)).collect())
        .collect();

    let mut best: Option<GridCell> = None;
    let mut profile = Vec::with_capacity(tcs.len());
    for (ti, per_m) in rows.iter().enumerate() {
        let mut row_min: Option<f64> = None;
        for (mi, cell) in per_m.iter().enumerate() {
            if let Some((_, _, rss)) = cell {
                if row_min.is_none_or(|r| *rss < r) {
                    row_min = Some(*rss);
                }
                if best.as_ref().is_none_or(|b| *rss < b.rss) {
                    best = Some(GridCell {
                        tc: tcs[ti],
                        w: 0.0,
                        m: ms[mi],
                        rss: *rss,
                    });
                }
            }
        }
        profile.push(row_min);
    }
    let best = best.ok_or(Error::AllCellsDegenerate)?;
    let tc_hi = *tcs.last().expect("non-empty grid");

    let env_resid = |v: &[f64]| -> Option<Vec<f64>> {
        let tc = v[0];
        let m = if power { v[1] } else { 0.0 };
        if !(tc > last && tc <= tc_hi) || (power && !(m >= cfg.m_band.0 && m <= cfg.m_band.1)) {
            return None;
        }
        let (a, b, _) = envelope_cell(&p, tc, m)?;
        let (f, _) = p.features(tc, m).ok()?;
        Some(p.y.iter().zip(&f).map(|(y, f)| y - a - b * f).collect())
    };

    let (mut tc, mut m) = (best.tc, best.m);
    let mut converged = true;
    if cfg.refine {
        let start = if power { vec![tc, m] } else { vec![tc] };
        let scale = if power {
            vec![tc - p.origin, 0.1]
        } else {
            vec![tc - p.origin]
        };
        match lm::minimize(env_resid, &start, &scale, &LmConfig::default()) {
            Some(out) if out.converged => {
                tc = out.params[0];
                if power {
                    m = out.params[1];
                }
            }
            _ => converged = false,
        }
    }
    let (a, b, rss) = envelope_cell(&p, tc, m).ok_or(Error::AllCellsDegenerate)?;

    // flat input: the trend term carries no signal and t_c is unidentifiable
    let (f, _) = p.features(tc, m)?;
    let f_range = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - f.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_scale =
        p.y.iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let y_spread = p.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - p.y.iter().cloned().fold(f64::INFINITY, f64::min);
    if y_spread == 0.0 || (b * f_range).abs() < 1e-9 * y_scale {
        converged = false;
    }

    let n_params = 3 + usize::from(power);
    let resid = env_resid(&if power { vec![tc, m] } else { vec![tc] }).unwrap_or_default();
    let sigma2 = if resid.is_empty() {
        rss / n.saturating_sub(n_params).max(1) as f64
    } else {
        cfg.residual_variance(&resid, n.saturating_sub(n_params))
    };
    let params = LpplParams {
        variant,
        a,
        b,
        c: 0.0,
        m: power.then_some(m),
        w: 0.0,
        phi: 0.0,
        t_c: tc,
        origin: p.origin,
        exponent: cfg.exponent,
        oscillation: cfg.oscillation,
    };

    let model_resid = |v: &[f64]| -> Option<Vec<f64>> {
        let tc = v[2];
        let m = if power { v[3] } else { 0.0 };
        if !(tc > last) {
            return None;
        }
        let (f, _) = p.features(tc, m).ok()?;
        Some(
            p.y.iter()
                .zip(&f)
                .map(|(y, f)| y - v[0] - v[1] * f)
                .collect(),
        )
    };
    let mut full = vec![a, b, tc];
    let mut scale = vec![1.0, 1.0, tc - p.origin];
    if power {
        full.push(m);
        scale.push(0.1);
    }
    let cov = jacobian_covariance(&model_resid, &full, &scale, sigma2);
    let stderr = ParamErrors {
        a: diag_se(&cov, 0),
        b: diag_se(&cov, 1),
        t_c: diag_se(&cov, 2),
        m: if power { diag_se(&cov, 3) } else { None },
        ..ParamErrors::default()
    };
    let span = tc_hi - tcs[0];
    let tc_stderr = match cfg.uncertainty {
        Uncertainty::Profile => profile_stderr(&tcs, &profile, sigma2),
        Uncertainty::Jacobian => stderr.t_c,
    }
    .unwrap_or(span);

    Ok(FitReport {
        stage: Stage::Envelope,
        params,
        rss,
        sigma: (rss / n as f64).sqrt(),
        stderr,
        converged,
        n_obs: n,
        tc_stderr,
        c_significant: false,
        excluded: 0,
        window: (s.first_time(), s.last_time()),
    })
}
