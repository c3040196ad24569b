use super::{ExponentSign, LpplParams, Oscillation, Variant};
use crate::error::{Error, Result};

/// The trend term `f(x)`: `x^(-m)` (or `x^m`) for the power variant, `ln x`
/// for the log variant.
#[inline]
pub fn basis(variant: Variant, exponent: ExponentSign, m: f64, x: f64) -> f64 {
    match variant {
        Variant::Log => x.ln(),
        Variant::Power => match exponent {
            ExponentSign::Divergent => x.powf(-m),
            ExponentSign::Bounded => x.powf(m),
        },
    }
}

/// Evaluates the model at time `t`; fails for `t >= t_c`.
pub fn eval_model(p: &LpplParams, t: f64) -> Result<f64> {
    if !(t < p.t_c) {
        return Err(Error::Domain { t, tc: p.t_c });
    }
    let x = (p.t_c - t) / (p.t_c - p.origin);
    let f = basis(p.variant, p.exponent, p.m.unwrap_or(0.0), x);
    let lx = x.ln();
    let osc = match p.oscillation {
        Oscillation::Cosine => (p.w * lx + p.phi).cos(),
        Oscillation::Linear => p.w * lx + p.phi,
    };
    Ok(p.a + p.b * f * (1.0 + p.c * osc))
}
