//! Second stage of the separated fit and the agreement test between stages.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::fit::{argmin, check_window, cycles, jacobian_covariance, profile_stderr};
use super::linear::{oscillation_row, recover_amplitude_phase, svd_solve, Problem};
use super::model::basis;
use super::{
    Estimate, FitConfig, FitReport, LpplParams, OscWeighting, Oscillation, ParamErrors,
    RuptureEstimate, Stage, Uncertainty,
};
use crate::error::{Error, Result};
use crate::lm::{self, LmConfig};
use crate::series::TimeSeries;
use crate::stats::linspace;

/// Normalized residual of the envelope: `rho = (y - A - B f) / (B f)`.
struct Residual {
    times: Vec<f64>,
    rho: Vec<f64>,
    weight: Vec<f64>,
    excluded: usize,
}

fn normalized_residual(p: &Problem, env: &LpplParams, cfg: &FitConfig) -> Result<Residual> {
    let scale = env.t_c - env.origin;
    let bf: Vec<f64> = p
        .times
        .iter()
        .map(|t| {
            env.b
                * basis(
                    env.variant,
                    env.exponent,
                    env.m.unwrap_or(0.0),
                    (env.t_c - t) / scale,
                )
        })
        .collect();
    let peak = bf.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = cfg.b_floor * peak;
    let mut out = Residual {
        times: Vec::new(),
        rho: Vec::new(),
        weight: Vec::new(),
        excluded: 0,
    };
    for ((t, y), bf) in p.times.iter().zip(&p.y).zip(&bf) {
        if !(bf.abs() >= floor) || *bf == 0.0 {
            out.excluded += 1;
            continue;
        }
        out.times.push(*t);
        out.rho.push((y - env.a - bf) / bf);
        out.weight.push(match cfg.weighting {
            OscWeighting::Uniform => 1.0,
            OscWeighting::Envelope => bf * bf,
        });
    }
    Ok(out)
}

fn log_x(times: &[f64], origin: f64, tc: f64) -> Vec<f64> {
    times
        .iter()
        .map(|t| ((tc - t) / (tc - origin)).ln())
        .collect()
}

/// Weighted solve of `rho ~ P cos(w L) + Q sin(w L)` (or `rho ~ G L + H` for
/// the linear form); returns `(c, phi, w_reported, residuals)` with the
/// residuals already multiplied by `sqrt(weight)`.
fn solve_oscillation(
    r: &Residual,
    origin: f64,
    tc: f64,
    w: f64,
    form: Oscillation,
) -> Option<(f64, f64, f64, Vec<f64>)> {
    let lx = log_x(&r.times, origin, tc);
    let sw: Vec<f64> = r.weight.iter().map(|v| v.sqrt()).collect();
    let n = r.rho.len();
    let y: Vec<f64> = r.rho.iter().zip(&sw).map(|(a, b)| a * b).collect();
    match form {
        Oscillation::Cosine => {
            let x = DMatrix::from_fn(n, 2, |i, j| {
                let (s, c) = (w * lx[i]).sin_cos();
                sw[i] * if j == 0 { c } else { s }
            });
            let (beta, resid, _) = svd_solve(&x, &y).ok()?;
            let (c, phi) = recover_amplitude_phase(1.0, beta[0], beta[1]);
            Some((c, phi, w, resid))
        }
        Oscillation::Linear => {
            let x = DMatrix::from_fn(n, 2, |i, j| sw[i] * if j == 0 { lx[i] } else { 1.0 });
            let (beta, resid, _) = svd_solve(&x, &y).ok()?;
            let c = beta[0];
            let phi = if c != 0.0 { beta[1] / c } else { 0.0 };
            Some((c, phi, 1.0, resid))
        }
    }
}

/// Second stage: fits `C cos(w ln x + phi)` to the envelope's normalized
/// residual, with `t_c` free, giving an estimate of the rupture time that is
/// independent of the envelope's own.
pub fn fit_oscillation(s: &TimeSeries, envelope: &FitReport, cfg: &FitConfig) -> Result<FitReport> {
    check_window(s, cfg)?;
    if !envelope.converged {
        return Err(Error::NotConverged);
    }
    let env = envelope.params;
    let p = Problem::new(s, env.variant, env.exponent, cfg.oscillation);
    let r = normalized_residual(&p, &env, cfg)?;
    let n_used = r.rho.len();
    let min_used = cfg.min_obs.max(8);
    if n_used < min_used {
        return Err(Error::InsufficientData {
            got: n_used,
            need: min_used,
        });
    }

    let last = p.last_time();
    let tcs: Vec<f64> = cfg.tc_offsets(p.n()).iter().map(|o| last + o).collect();
    let tc_hi = *tcs.last().expect("non-empty grid");
    let ws = linspace(cfg.w_band.0, cfg.w_band.1, cfg.w_count);
    let origin = p.origin;

    let rows: Vec<Vec<Option<f64>>> = tcs
        .par_iter()
        .map(|&tc| {
            let lx = log_x(&r.times, origin, tc);
            oscillation_row(&r.rho, &r.weight, &lx, &ws, cfg.oscillation)
        })
        .collect();

    let mut best: Option<(f64, f64, f64)> = None;
    let mut profile = Vec::with_capacity(tcs.len());
    for (ti, row) in rows.iter().enumerate() {
        profile.push(argmin(row).and_then(|i| row[i]));
        for (wi, rss) in row.iter().enumerate() {
            if let Some(rss) = rss {
                if best.is_none_or(|(_, _, b)| *rss < b) {
                    best = Some((tcs[ti], ws[wi], *rss));
                }
            }
        }
    }
    let (mut tc, mut w, _) = best.ok_or(Error::AllCellsDegenerate)?;

    let with_w = cfg.oscillation == Oscillation::Cosine;
    let feasible =
        |tc: f64, w: f64| tc > last && tc <= tc_hi && w >= cfg.w_band.0 && w <= cfg.w_band.1;
    let profiled = |v: &[f64]| -> Option<Vec<f64>> {
        let w = if with_w { v[1] } else { 1.0 };
        if !feasible(v[0], if with_w { w } else { cfg.w_band.0 }) {
            return None;
        }
        solve_oscillation(&r, origin, v[0], w, cfg.oscillation).map(|s| s.3)
    };
    let mut converged = true;
    if cfg.refine {
        let start = if with_w { vec![tc, w] } else { vec![tc] };
        let scale = if with_w {
            vec![tc - origin, 1.0]
        } else {
            vec![tc - origin]
        };
        match lm::minimize(profiled, &start, &scale, &LmConfig::default()) {
            Some(out) if out.converged => {
                tc = out.params[0];
                if with_w {
                    w = out.params[1];
                }
            }
            _ => converged = false,
        }
    }
    let (c, phi, w_rep, resid) =
        solve_oscillation(&r, origin, tc, w, cfg.oscillation).ok_or(Error::RankDeficient)?;
    let rss: f64 = resid.iter().map(|v| v * v).sum();
    let n_params = if with_w { 4 } else { 3 };
    let sigma2 = cfg.residual_variance(&resid, n_used.saturating_sub(n_params));

    // covariance over [c, phi, w, t_c] of the weighted residual
    let model_resid = |v: &[f64]| -> Option<Vec<f64>> {
        let (c, phi, w, tc) = (v[0], v[1], v[2], v[3]);
        if !(tc > last) {
            return None;
        }
        Some(
            r.times
                .iter()
                .zip(&r.rho)
                .zip(&r.weight)
                .map(|((t, rho), wt)| {
                    let l = ((tc - t) / (tc - origin)).ln();
                    let model = match cfg.oscillation {
                        Oscillation::Cosine => c * (w * l + phi).cos(),
                        Oscillation::Linear => c * (w * l + phi),
                    };
                    wt.sqrt() * (rho - model)
                })
                .collect(),
        )
    };
    let cov = if with_w {
        jacobian_covariance(
            &model_resid,
            &[c, phi, w, tc],
            &[0.1, 1.0, 1.0, tc - origin],
            sigma2,
        )
    } else {
        // w is pinned to 1 in the linear form
        let pinned = |v: &[f64]| model_resid(&[v[0], v[1], 1.0, v[2]]);
        jacobian_covariance(&pinned, &[c, phi, tc], &[0.1, 1.0, tc - origin], sigma2).map(|m| {
            let mut full = DMatrix::zeros(4, 4);
            for (i, fi) in [0usize, 1, 3].iter().enumerate() {
                for (j, fj) in [0usize, 1, 3].iter().enumerate() {
                    full[(*fi, *fj)] = m[(i, j)];
                }
            }
            full
        })
    };
    let se = |i: usize| {
        cov.as_ref()
            .map(|m| m[(i, i)].max(0.0).sqrt())
            .filter(|v| v.is_finite())
    };
    let stderr = ParamErrors {
        c: se(0),
        phi: se(1),
        w: if with_w { se(2) } else { None },
        t_c: se(3),
        ..ParamErrors::default()
    };
    let span = tc_hi - tcs[0];
    let tc_stderr = match cfg.uncertainty {
        Uncertainty::Profile => profile_stderr(&tcs, &profile, sigma2),
        Uncertainty::Jacobian => stderr.t_c,
    }
    .unwrap_or(span);

    let c_significant = c.abs() < 1.0
        && stderr.c.is_some_and(|s| c.abs() > cfg.significance * s)
        && (!with_w || cycles(&p, tc, w) >= cfg.min_cycles);

    let params = LpplParams {
        c,
        w: w_rep,
        phi,
        t_c: tc,
        oscillation: cfg.oscillation,
        ..env
    };
    Ok(FitReport {
        stage: Stage::Oscillation,
        params,
        rss,
        sigma: (rss / n_used as f64).sqrt(),
        stderr,
        converged,
        n_obs: n_used,
        tc_stderr,
        c_significant,
        excluded: r.excluded,
        window: (s.first_time(), s.last_time()),
    })
}

/// Combines the two stages' rupture times.
///
/// The stages agree when their `t_c` differ by at most `k` combined standard
/// errors and the oscillation stage found a significant amplitude; only then
/// is the inverse-variance weighted `tc_combined` reported.
pub fn estimate_rupture(env: &FitReport, osc: &FitReport, k: f64) -> Result<RuptureEstimate> {
    if !env.converged || !osc.converged {
        return Err(Error::NotConverged);
    }
    if !(k > 0.0) {
        return Err(Error::Config(
            "agreement multiplier must be positive".into(),
        ));
    }
    let e = Estimate {
        value: env.params.t_c,
        stderr: env.tc_stderr,
    };
    let o = Estimate {
        value: osc.params.t_c,
        stderr: osc.tc_stderr,
    };
    let gap = (e.value - o.value).abs();
    let within = gap <= k * e.stderr.hypot(o.stderr);
    let agrees = within && osc.c_significant;
    let tc_combined = agrees.then(|| combine(e, o));
    Ok(RuptureEstimate {
        tc_envelope: e,
        tc_oscillation: o,
        within_error_bars: within,
        oscillation_significant: osc.c_significant,
        agrees,
        tc_combined,
        k,
        window: env.window,
    })
}

fn combine(a: Estimate, b: Estimate) -> Estimate {
    match (a.stderr > 0.0, b.stderr > 0.0) {
        (true, true) => {
            let wa = 1.0 / (a.stderr * a.stderr);
            let wb = 1.0 / (b.stderr * b.stderr);
            Estimate {
                value: (wa * a.value + wb * b.value) / (wa + wb),
                stderr: (wa + wb).sqrt().recip(),
            }
        }
        // an exact estimate dominates; two exact ones average
        (false, true) => a,
        (true, false) => b,
        (false, false) => Estimate {
            value: 0.5 * (a.value + b.value),
            stderr: 0.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppl::Variant;

    fn report(tc: f64, se: f64, significant: bool) -> FitReport {
        FitReport {
            stage: Stage::Oscillation,
            params: LpplParams::log(0.0, -1.0, 0.1, 8.0, 0.0, tc),
            rss: 0.0,
            sigma: 0.0,
            stderr: ParamErrors::default(),
            converged: true,
            n_obs: 100,
            tc_stderr: se,
            c_significant: significant,
            excluded: 0,
            window: (1.0, 100.0),
        }
    }

    #[test]
    fn agreement_with_equal_errors_averages() {
        let est =
            estimate_rupture(&report(100.0, 2.0, false), &report(101.0, 2.0, true), 2.0).unwrap();
        assert!(est.agrees);
        let comb = est.tc_combined.unwrap();
        assert!((comb.value - 100.5).abs() < 1e-12);
        assert!((comb.stderr - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn distant_estimates_disagree() {
        let est =
            estimate_rupture(&report(100.0, 1.0, false), &report(110.0, 1.0, true), 2.0).unwrap();
        assert!(!est.within_error_bars);
        assert!(!est.agrees);
        assert!(est.tc_combined.is_none());
    }

    #[test]
    fn identical_reports_agree() {
        let r = report(100.0, 3.0, true);
        let est = estimate_rupture(&r, &r, 2.0).unwrap();
        assert!(est.agrees);
        assert!((est.tc_combined.unwrap().value - 100.0).abs() < 1e-12);
    }

    #[test]
    fn insignificant_oscillation_blocks_agreement() {
        let est =
            estimate_rupture(&report(100.0, 2.0, false), &report(100.0, 2.0, false), 2.0).unwrap();
        assert!(est.within_error_bars);
        assert!(!est.agrees);
    }

    #[test]
    fn non_converged_input_is_an_error() {
        let mut bad = report(100.0, 1.0, true);
        bad.converged = false;
        assert_eq!(
            estimate_rupture(&bad, &report(100.0, 1.0, true), 2.0).unwrap_err(),
            Error::NotConverged
        );
    }

    #[test]
    fn oscillation_stage_refuses_unconverged_envelope() {
        let s = TimeSeries::from_values(
            "x",
            (0..60).map(|i| (i as f64).sin()).collect(),
            crate::series::SeriesKind::Level,
        )
        .unwrap();
        let mut env = report(80.0, 1.0, false);
        env.converged = false;
        env.params.variant = Variant::Log;
        assert_eq!(
            fit_oscillation(&s, &env, &FitConfig::default()).unwrap_err(),
            Error::NotConverged
        );
    }
}
