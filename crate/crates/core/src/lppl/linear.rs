//! Exact linear solves for fixed nonlinear parameters.
//!
//! Two paths compute the same least-squares problem: an SVD solve on the
//! explicit design matrix (accurate, used for reported fits and polishing)
//! and a normal-equation accumulator used for the grid scans, where the
//! `w` axis is swept with an angle-addition recurrence instead of fresh
//! trigonometric calls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::basis;
use super::{ExponentSign, Oscillation, Variant};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Singular-value ratio below which a design matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Smallest admissible pivot of a unit-diagonal Gram matrix.
const PIVOT_TOL: f64 = 1e-11;

/// Solution of `y ~ A + B f + D f cos(w ln x) + E f sin(w ln x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub e: f64,
    pub rss: f64,
    /// `sqrt(D^2 + E^2) / |B|`.
    pub c: f64,
    /// Phase in `[0, 2 pi)`.
    pub phi: f64,
}

/// Fixed description of one fitting problem: the window data plus the model
/// family.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub origin: f64,
    pub variant: Variant,
    pub exponent: ExponentSign,
    pub oscillation: Oscillation,
}

impl Problem {
    pub fn new(
        s: &TimeSeries,
        variant: Variant,
        exponent: ExponentSign,
        oscillation: Oscillation,
    ) -> Self {
        Self {
            times: s.times().to_vec(),
            y: s.values().to_vec(),
            origin: s.first_time() - 1.0,
            variant,
            exponent,
            oscillation,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `(f, ln x)` per observation, or a domain error when `t_c` does not lie
    /// after every observation.
    pub fn features(&self, tc: f64, m: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(tc > self.last_time()) {
            return Err(Error::Domain {
                t: self.last_time(),
                tc,
            });
        }
        let scale = tc - self.origin;
        let mut f = Vec::with_capacity(self.n());
        let mut lx = Vec::with_capacity(self.n());
        for &t in &self.times {
            let x = (tc - t) / scale;
            f.push(basis(self.variant, self.exponent, m, x));
            lx.push(x.ln());
        }
        Ok((f, lx))
    }

    /// Design matrix columns for the full model at `(tc, m, w)`.
    pub fn design(&self, tc: f64, m: f64, w: f64) -> Result<DMatrix<f64>> {
        let (f, lx) = self.features(tc, m)?;
        let k = match self.oscillation {
            Oscillation::Cosine => 4,
            Oscillation::Linear => 3,
        };
        let mut x = DMatrix::zeros(self.n(), k);
        for i in 0..self.n() {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = f[i];
            match self.oscillation {
                Oscillation::Cosine => {
                    let (s, c) = (w * lx[i]).sin_cos();
                    x[(i, 2)] = f[i] * c;
                    x[(i, 3)] = f[i] * s;
                }
                Oscillation::Linear => x[(i, 2)] = f[i] * lx[i],
            }
        }
        Ok(x)
    }
}

/// Least squares by SVD with column equilibration.
///
/// Returns coefficients, residuals and the unscaled covariance
/// `(X^T X)^-1`.
pub(crate) fn svd_solve(
    x: &DMatrix<f64>,
    y: &[f64],
) -> Result<(DVector<f64>, Vec<f64>, DMatrix<f64>)> {
    let (n, k) = x.shape();
    if n < k {
        return Err(Error::RankDeficient);
    }
    let mut scaled = x.clone();
    let mut norms = vec![0.0; k];
    for j in 0..k {
        let norm = scaled.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::RankDeficient);
        }
        norms[j] = norm;
        scaled.column_mut(j).scale_mut(1.0 / norm);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let mut beta = svd.solve(&yv, 0.0).map_err(|_| Error::RankDeficient)?;
    let v_t = svd.v_t.as_ref().ok_or(Error::RankDeficient)?;
    let inv_s2 = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let mut cov = v_t.transpose() * inv_s2 * v_t;
    for j in 0..k {
        beta[j] /= norms[j];
        for l in 0..k {
            cov[(j, l)] /= norms[j] * norms[l];
        }
    }
    let fitted = x * &beta;
    let resid: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    Ok((beta, resid, cov))
}

pub(crate) fn recover_amplitude_phase(b: f64, d: f64, e: f64) -> (f64, f64) {
    if b == 0.0 {
        return (0.0, 0.0);
    }
    let c = d.hypot(e) / b.abs();
    let sb = b.signum();
    let phi = (-e * sb).atan2(d * sb).rem_euclid(std::f64::consts::TAU);
    (c, phi)
}

/// Full linear solve at fixed `(tc, m, w)`, with the unscaled covariance of
/// the coefficients.
pub(crate) fn solve_cell(
    p: &Problem,
    tc: f64,
    m: f64,
    w: f64,
) -> Result<(LinearFit, Vec<f64>, DMatrix<f64>)> {
    let x = p.design(tc, m, w)?;
    let (beta, resid, cov) = svd_solve(&x, &p.y)?;
    let rss = resid.iter().map(|r| r * r).sum();
    let fit = match p.oscillation {
        Oscillation::Cosine => {
            let (c, phi) = recover_amplitude_phase(beta[1], beta[2], beta[3]);
            LinearFit {
                a: beta[0],
                b: beta[1],
                d: beta[2],
                e: beta[3],
                rss,
                c,
                phi,
            }
        }
        Oscillation::Linear => {
            // B f (1 + C (w ln x + phi)) with phi = 0: coefficient of f ln x is B C w
            let c = if beta[1] != 0.0 {
                beta[2] / (beta[1] * w)
            } else {
                0.0
            };
            LinearFit {
                a: beta[0],
                b: beta[1],
                d: beta[2],
                e: 0.0,
                rss,
                c,
                phi: 0.0,
            }
        }
    };
    Ok((fit, resid, cov))
}

/// Solves `y ~ A + B f + D f cos(w ln x) + E f sin(w ln x)` with
/// `f = x^(-m)` when `m` is given and `f = ln x` otherwise.
///
/// Times are measured from one observation before the first point of `s`.
pub fn linear_subfit(s: &TimeSeries, t_c: f64, m: Option<f64>, w: f64) -> Result<LinearFit> {
    let variant = if m.is_some() {
        Variant::Power
    } else {
        Variant::Log
    };
    let p = Problem::new(s, variant, ExponentSign::Divergent, Oscillation::Cosine);
    solve_cell(&p, t_c, m.unwrap_or(0.0), w).map(|(fit, _, _)| fit)
}

// ---------------------------------------------------------------------------
// Normal-equation path for grid scans
// ---------------------------------------------------------------------------

/// Solves the `k x k` normal equations `G beta = r` after scaling `G` to unit
/// diagonal; `None` when a pivot collapses.
fn cholesky_solve<const K: usize>(g: &[[f64; K]; K], r: &[f64; K]) -> Option<[f64; K]> {
    let mut d = [0.0; K];
    for i in 0..K {
        if !(g[i][i] > 0.0) {
            return None;
        }
        d[i] = g[i][i].sqrt();
    }
    let mut l = [[0.0; K]; K];
    for i in 0..K {
        for j in 0..=i {
            let mut sum = g[i][j] / (d[i] * d[j]);
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > PIVOT_TOL) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut z = [0.0; K];
    for i in 0..K {
        let mut sum = r[i] / d[i];
        for k in 0..i {
            sum -= l[i][k] * z[k];
        }
        z[i] = sum / l[i][i];
    }
    let mut beta = [0.0; K];
    for i in (0..K).rev() {
        let mut sum = z[i];
        for k in i + 1..K {
            sum -= l[k][i] * beta[k];
        }
        beta[i] = sum / l[i][i];
    }
    for i in 0..K {
        beta[i] /= d[i];
    }
    Some(beta)
}

fn rss_from_normal<const K: usize>(g: &[[f64; K]; K], r: &[f64; K], yy: f64) -> Option<f64> {
    let beta = cholesky_solve(g, r)?;
    let explained: f64 = beta.iter().zip(r).map(|(b, r)| b * r).sum();
    Some((yy - explained).max(0.0))
}

/// Residual sum of squares of the full model for every `w` in `ws` at fixed
/// `(tc, m)`. `ws` must be evenly spaced. Degenerate cells are `None`.
pub(crate) fn rss_row(p: &Problem, tc: f64, m: f64, ws: &[f64]) -> Vec<Option<f64>> {
    let Ok((f, lx)) = p.features(tc, m) else {
        return vec![None; ws.len()];
    };
    let n = p.n();
    let ybar = p.y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = p.y.iter().map(|v| v - ybar).collect();
    let yy: f64 = yc.iter().map(|v| v * v).sum();
    let (mut s1f, mut sff, mut sfy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        s1f += f[i];
        sff += f[i] * f[i];
        sfy += f[i] * yc[i];
    }
    let nf = n as f64;

    if p.oscillation == Oscillation::Linear {
        let (mut s1g, mut sfg, mut sgg, mut sgy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let g = f[i] * lx[i];
            s1g += g;
            sfg += f[i] * g;
            sgg += g * g;
            sgy += g * yc[i];
        }
        let gram = [[nf, s1f, s1g], [s1f, sff, sfg], [s1g, sfg, sgg]];
        let rss = rss_from_normal(&gram, &[0.0, sfy, sgy], yy);
        return vec![rss; ws.len()];
    }

    let dw = if ws.len() > 1 { ws[1] - ws[0] } else { 0.0 };
    let mut cs: Vec<(f64, f64)> = lx.iter().map(|l| (ws[0] * l).sin_cos()).collect();
    let steps: Vec<(f64, f64)> = lx.iter().map(|l| (dw * l).sin_cos()).collect();
    let mut out = Vec::with_capacity(ws.len());
    for wi in 0..ws.len() {
        if wi > 0 {
            // re-anchor periodically so the recurrence cannot drift
            if wi % 32 == 0 {
                for (i, l) in lx.iter().enumerate() {
                    cs[i] = (ws[wi] * l).sin_cos();
                }
            } else {
                for (c, st) in cs.iter_mut().zip(&steps) {
                    let (s0, c0) = *c;
                    *c = (s0 * st.1 + c0 * st.0, c0 * st.1 - s0 * st.0);
                }
            }
        }
        let (mut s1g, mut s1h, mut sfg, mut sfh, mut sgg, mut sgh, mut shh, mut sgy, mut shy) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let g = f[i] * cs[i].1;
            let h = f[i] * cs[i].0;
            s1g += g;
            s1h += h;
            sfg += f[i] * g;
            sfh += f[i] * h;
            sgg += g * g;
            sgh += g * h;
            shh += h * h;
            sgy += g * yc[i];
            shy += h * yc[i];
        }
        let gram = [
            [nf, s1f, s1g, s1h],
            [s1f, sff, sfg, sfh],
            [s1g, sfg, sgg, sgh],
            [s1h, sfh, sgh, shh],
        ];
        out.push(rss_from_normal(&gram, &[0.0, sfy, sgy, shy], yy));
    }
    out
}

/// Envelope-only fit `y ~ A + B f` at fixed `(tc, m)`: `(A, B, rss)`.
pub(crate) fn envelope_cell(p: &Problem, tc: f64, m: f64) -> Option<(f64, f64, f64)> {
    let (f, _) = p.features(tc, m).ok()?;
    let n = p.n() as f64;
    let fbar = f.iter().sum::<f64>() / n;
    let ybar = p.y.iter().sum::<f64>() / n;
    let (mut sff, mut sfy) = (0.0, 0.0);
    for (fi, yi) in f.iter().zip(&p.y) {
        let df = fi - fbar;
        sff += df * df;
        sfy += df * (yi - ybar);
    }
    let scale = f.iter().map(|v| v * v).sum::<f64>() / n;
    if !(sff > PIVOT_TOL * scale) {
        return None;
    }
    let b = sfy / sff;
    let a = ybar - b * fbar;
    let rss: f64 = f
        .iter()
        .zip(&p.y)
        .map(|(fi, yi)| {
            let r = yi - a - b * fi;
            r * r
        })
        .sum();
    Some((a, b, rss))
}

/// Weighted fit of `rho ~ P cos(w L) + Q sin(w L)` over a sweep of evenly
/// spaced `ws`, returning the weighted rss per `w`.
pub(crate) fn oscillation_row(
    rho: &[f64],
    weight: &[f64],
    lx: &[f64],
    ws: &[f64],
    form: Oscillation,
) -> Vec<Option<f64>> {
    let rr: f64 = rho.iter().zip(weight).map(|(r, w)| w * r * r).sum();
    if form == Oscillation::Linear {
        let (mut s11, mut s1l, mut sll, mut s1r, mut slr) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..rho.len() {
            let w = weight[i];
            s11 += w;
            s1l += w * lx[i];
            sll += w * lx[i] * lx[i];
            s1r += w * rho[i];
            slr += w * lx[i] * rho[i];
        }
        let rss = rss_from_normal(&[[sll, s1l], [s1l, s11]], &[slr, s1r], rr);
        return vec![rss; ws.len()];
    }
    let dw = if ws.len() > 1 { ws[1] - ws[0] } else { 0.0 };
    let mut cs: Vec<(f64, f64)> = lx.iter().map(|l| (ws[0] * l).sin_cos()).collect();
    let steps: Vec<(f64, f64)> = lx.iter().map(|l| (dw * l).sin_cos()).collect();
    let mut out = Vec::with_capacity(ws.len());
    for wi in 0..ws.len() {
        if wi > 0 {
            if wi % 32 == 0 {
                for (i, l) in lx.iter().enumerate() {
                    cs[i] = (ws[wi] * l).sin_cos();
                }
            } else {
                for (c, st) in cs.iter_mut().zip(&steps) {
                    let (s0, c0) = *c;
                    *c = (s0 * st.1 + c0 * st.0, c0 * st.1 - s0 * st.0);
                }
            }
        }
        let (mut scc, mut scs, mut sss, mut scr, mut ssr) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..rho.len() {
            let w = weight[i];
            let (s, c) = cs[i];
            scc += w * c * c;
            scs += w * c * s;
            sss += w * s * s;
            scr += w * c * rho[i];
            ssr += w * s * rho[i];
        }
        out.push(rss_from_normal(&[[scc, scs], [scs, sss]], &[scr, ssr], rr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppl::{eval_model, LpplParams};
    use crate::series::SeriesKind;
    use crate::stats::linspace;

    fn lppl_series(p: &LpplParams, n: usize) -> TimeSeries {
        let v = (1..=n).map(|k| eval_model(p, k as f64).unwrap()).collect();
        TimeSeries::from_values("lppl", v, SeriesKind::LogLevel).unwrap()
    }

    #[test]
    fn recovers_linear_parameters_at_true_nonlinear_ones() {
        let truth = LpplParams::log(7.0, -0.4, 0.12, 7.5, 1.3, 520.0);
        let s = lppl_series(&truth, 500);
        let fit = linear_subfit(&s, 520.0, None, 7.5).unwrap();
        assert!(((fit.a - 7.0) / 7.0).abs() < 1e-8, "{fit:?}");
        assert!(((fit.b + 0.4) / 0.4).abs() < 1e-8);
        assert!((fit.c - 0.12).abs() < 1e-6);
        assert!((fit.phi - 1.3).abs() < 1e-6);
        assert!(fit.rss < 1e-18);
    }

    #[test]
    fn null_oscillation_has_no_cos_sin_terms() {
        let truth = LpplParams::power(3.0, 0.2, 0.0, 0.4, 9.0, 0.0, 300.0);
        let s = lppl_series(&truth, 250);
        let fit = linear_subfit(&s, 300.0, Some(0.4), 9.0).unwrap();
        assert!(fit.d.abs() < 1e-10 && fit.e.abs() < 1e-10, "{fit:?}");
    }

    #[test]
    fn two_points_are_rank_deficient() {
        let s = TimeSeries::from_values("x", vec![1.0, 2.0], SeriesKind::Level).unwrap();
        assert_eq!(
            linear_subfit(&s, 10.0, None, 5.0).unwrap_err(),
            Error::RankDeficient
        );
    }

    #[test]
    fn tc_inside_window_is_a_domain_error() {
        let s = TimeSeries::from_values("x", (0..40).map(f64::from).collect(), SeriesKind::Level)
            .unwrap();
        assert!(matches!(
            linear_subfit(&s, 20.0, None, 5.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn phase_recovery_handles_negative_b() {
        for &(b, c, phi) in &[(1.0, 0.3, 0.4), (-2.0, 0.1, 5.9), (-0.5, 0.2, 3.0)] {
            let d = b * c * f64::cos(phi);
            let e = -b * c * f64::sin(phi);
            let (c2, phi2) = recover_amplitude_phase(b, d, e);
            assert!((c2 - c).abs() < 1e-12 && (phi2 - phi).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_row_matches_svd_solve() {
        let truth = LpplParams::log(5.0, -0.3, 0.1, 6.0, 0.7, 230.0);
        let mut s = lppl_series(&truth, 200);
        // break exactness so rss is not zero
        let noisy: Vec<f64> = s
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.01 * ((i * 7919) % 13) as f64)
            .collect();
        s = s.map_values(noisy, SeriesKind::LogLevel).unwrap();
        let p = Problem::new(
            &s,
            Variant::Log,
            ExponentSign::Divergent,
            Oscillation::Cosine,
        );
        let ws = linspace(2.0, 40.0, 120);
        let row = rss_row(&p, 240.0, 0.0, &ws);
        for (w, rss) in ws.iter().zip(&row) {
            let exact = solve_cell(&p, 240.0, 0.0, *w).unwrap().0.rss;
            let got = rss.unwrap();
            assert!(
                (got - exact).abs() < 1e-9 * exact.max(1e-12),
                "w={w}: {got} vs {exact}"
            );
        }
    }
}
