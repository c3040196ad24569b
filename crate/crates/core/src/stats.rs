//! Small numeric helpers shared by the analyses.

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

/// Fits a straight line; `None` when fewer than two points or all `x` equal.
pub fn ols_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .sum();
    let slope_stderr = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + step * i as f64
                    }
                })
                .collect()
        }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Root mean square.
pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Variance inflation `(1 + r) / (1 - r)` for residuals with lag-one
/// autocorrelation `r`, i.e. the ratio of nominal to effective sample size
/// under an AR(1) error model. Negative `r` is treated as zero and `r` is
/// capped at 0.999.
pub fn ar1_inflation(resid: &[f64]) -> f64 {
    let ss: f64 = resid.iter().map(|v| v * v).sum();
    if resid.len() < 3 || !(ss > 0.0) {
        return 1.0;
    }
    let lag: f64 = resid.windows(2).map(|w| w[0] * w[1]).sum();
    let r = (lag / ss).clamp(0.0, 0.999);
    (1.0 + r) / (1.0 - r)
}
