//! Independent tail oracle through the factorization `P = A_T·B_T`.
//!
//! Under the tilted measure `dP_T/dP = exp(αZ_T(c) − T L_T(α))`,
//! `A_T = exp(T L_T(α))` and `B_T = E_T[exp(−αZ) 1{side}]`. `B_T` is
//! recovered from the characteristic function `Φ_T(u) = E_T[exp(iuZ/β)]`:
//!
//! ```text
//! B_T = −1/(2πκ) ∫ Φ_T(u) / (1 + iu/κ) du,   κ = αβ < 0.
//! ```
//!
//! The integral is truncated at `|u| ≤ s_T` (`C_T`) and the remainder `D_T`
//! is bounded by Cauchy-Schwarz with [`char_bound`].

use num_complex::Complex64;
use serde::Serialize;

use crate::cgf::{cgf_exact, char_bound, log_char_fn};
use crate::error::{horizon, Error, Result};
use crate::model::{classify_case, Regime, Side};
use crate::quadrature::{integrate, integrate_real, QuadOptions};
use crate::saddle::solve_saddle;
use crate::sldp::zero_threshold_value;

/// Tilt `α_T`, scaling `β_T` and truncation growth `s_T = s·T^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltPlan {
    pub regime: Regime,
    pub side: Side,
    pub alpha: f64,
    pub beta: f64,
    pub s_power: f64,
}

/// Picks `α_T` (the fixed point `a_c` or the saddle `a_T`) and `β_T`.
pub fn tilt_plan(theta: f64, c: f64, t: f64) -> Result<TiltPlan> {
    use Regime::*;
    horizon(t)?;
    let regime = classify_case(theta, c)?;
    let th = if matches!(regime, UnstableLeft | UnstableRight) {
        0.0
    } else {
        theta
    };
    let side = match regime.side() {
        Some(s) if regime.has_cgf_route() => s,
        _ => return Err(Error::NoExpansion { regime }),
    };
    let sigma_c = (-0.5 / c).abs().sqrt();
    let sqrt_t = t.sqrt();
    let (alpha, beta, s_power) = match regime {
        StableLeft | ExplosiveLeft | UnstableLeft => {
            ((c * c - th * th) / (2.0 * c), sigma_c * sqrt_t, 1.0 / 6.0)
        }
        StableInner => (solve_saddle(th, c, t)?.a_t, -sigma_c * sqrt_t, 1.0 / 6.0),
        ExplosiveCritical => (solve_saddle(th, c, t)?.a_t, sqrt_t, 1.0 / 6.0),
        StableCritical => (solve_saddle(th, c, t)?.a_t, -sqrt_t, 1.0 / 6.0),
        ExplosiveValley => (solve_saddle(th, c, t)?.a_t, t, 2.0 / 3.0),
        StableRight | ExplosiveRight | UnstableRight => {
            (solve_saddle(th, c, t)?.a_t, -t, 2.0 / 3.0)
        }
        _ => return Err(Error::NoExpansion { regime }),
    };
    Ok(TiltPlan {
        regime,
        side,
        alpha,
        beta,
        s_power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleOptions {
    /// `s` in `s_T = s·T^p`.
    pub s: f64,
    /// Relative tolerance of the quadrature of `C_T`.
    pub rel_tol: f64,
    /// `s_T` is doubled until `d_bound ≤ d_tol·|C_T|`.
    pub d_tol: f64,
    /// Panel width in `u` for the initial quadrature partition.
    pub panel_width: f64,
    pub max_doublings: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            s: 1.0,
            rel_tol: 1e-10,
            d_tol: 1e-8,
            panel_width: 2.0,
            max_doublings: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalResult {
    pub c_factor: f64,
    /// Imaginary residue of the truncated integral, which should vanish.
    pub c_imag: f64,
    pub d_bound: f64,
    pub quadrature_error: f64,
    pub s_t: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionResult {
    pub regime: Regime,
    pub side: Side,
    pub a_t_used: f64,
    pub beta_used: f64,
    /// `log A_T = T L_T(α_T)`
    pub log_a_factor: f64,
    pub a_factor: f64,
    pub b_factor: f64,
    pub d_bound: f64,
    pub s_t: f64,
    pub probability: f64,
    pub log_probability: f64,
    /// Quadrature error plus the `D_T` bound plus the imaginary residue, in
    /// units of `B_T`, scaled by `A_T`.
    pub quadrature_error: f64,
}

/// Upper bound on `|D_T|` from `∫_{|u|>s} |Φ_T|²` and `∫ |1 + iu/κ|^{-2} = π|κ|`.
fn d_tail_bound(theta: f64, c: f64, t: f64, alpha: f64, beta: f64, s: f64) -> Result<f64> {
    let kappa = alpha * beta;
    let opts = QuadOptions {
        rel_tol: 1e-6,
        ..Default::default()
    };
    let mut total = 0.0;
    let mut lo = s;
    for _ in 0..200 {
        let hi = 2.0 * lo;
        let mut bad = None;
        let (band, _) = integrate_real(
            |u| match char_bound(theta, c, alpha, u / beta, t) {
                Ok(v) => v,
                Err(e) => {
                    bad = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            &opts,
        )?;
        if let Some(e) = bad {
            return Err(e);
        }
        total += band;
        if band <= 1e-4 * total || band < 1e-300 {
            break;
        }
        lo = hi;
    }
    let sq = 2.0 * total;
    Ok((std::f64::consts::PI * kappa.abs() * sq).sqrt() / (2.0 * std::f64::consts::PI * kappa.abs()))
}

/// `C_T` over `|u| ≤ s_T` together with the `D_T` bound.
///
/// The integral is accumulated band by band; with `auto_extend`, `s_T` is
/// doubled until the `D_T` bound falls below `d_tol·|C_T|`.
pub fn b_t_parseval_with(
    theta: f64,
    c: f64,
    t: f64,
    alpha: f64,
    beta: f64,
    s_t: f64,
    opts: &OracleOptions,
    auto_extend: bool,
) -> Result<ParsevalResult> {
    horizon(t)?;
    let kappa = alpha * beta;
    if !(kappa < 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("α·β must be negative, got {kappa:e}"),
        });
    }
    if !(s_t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "s_T",
            reason: "must be positive".into(),
        });
    }
    // Validate once so the integrand cannot fail afterwards.
    log_char_fn(theta, c, t, alpha, beta, s_t)?;
    let integrand = |u: f64| {
        let phi = log_char_fn(theta, c, t, alpha, beta, u)
            .map(|l| l.exp())
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        phi / Complex64::new(1.0, u / kappa)
    };
    let q = QuadOptions {
        rel_tol: opts.rel_tol,
        panel_width: opts.panel_width,
        ..Default::default()
    };
    let mut sum = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut evals = 0;
    let mut lo = 0.0;
    let mut hi = s_t;
    let mut doublings = 0;
    loop {
        for (a, b) in [(-hi, -lo), (lo, hi)] {
            let r = integrate(&integrand, a, b, &q)?;
            if !r.value.re.is_finite() {
                return Err(Error::Quadrature(format!(
                    "non-finite integrand on [{a:e}, {b:e}]"
                )));
            }
            sum += r.value;
            err += r.error;
            evals += r.evaluations;
        }
        let scale = -1.0 / (2.0 * std::f64::consts::PI * kappa);
        let c_val = sum * scale;
        let d_bound = d_tail_bound(theta, c, t, alpha, beta, hi)?;
        let done = !auto_extend
            || d_bound <= opts.d_tol * c_val.re.abs()
            || doublings >= opts.max_doublings;
        if done {
            return Ok(ParsevalResult {
                c_factor: c_val.re,
                c_imag: c_val.im,
                d_bound,
                quadrature_error: err * scale.abs(),
                s_t: hi,
                evaluations: evals,
            });
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
}

/// `C_T` at a fixed truncation `s_T`.
pub fn b_t_parseval(
    theta: f64,
    c: f64,
    t: f64,
    alpha: f64,
    beta: f64,
    s_t: f64,
) -> Result<ParsevalResult> {
    b_t_parseval_with(theta, c, t, alpha, beta, s_t, &OracleOptions::default(), false)
}

/// Tail probability through `A_T·B_T` with default options.
pub fn oracle_tail(theta: f64, c: f64, t: f64) -> Result<InversionResult> {
    oracle_tail_with(theta, c, t, &OracleOptions::default())
}

pub fn oracle_tail_with(theta: f64, c: f64, t: f64, opts: &OracleOptions) -> Result<InversionResult> {
    horizon(t)?;
    let regime = classify_case(theta, c)?;
    if regime.is_zero_threshold() {
        let side = regime.side().expect("zero thresholds have a side");
        let p = zero_threshold_value(theta, t)?;
        return Ok(InversionResult {
            regime,
            side,
            a_t_used: 0.0,
            beta_used: 0.0,
            log_a_factor: 0.0,
            a_factor: 1.0,
            b_factor: p,
            d_bound: 0.0,
            s_t: 0.0,
            probability: p,
            log_probability: p.ln(),
            quadrature_error: 0.0,
        });
    }
    let plan = tilt_plan(theta, c, t)?;
    let th = if matches!(regime, Regime::UnstableLeft | Regime::UnstableRight) {
        0.0
    } else {
        theta
    };
    let s_t = opts.s * t.powf(plan.s_power);
    let pr = b_t_parseval_with(th, c, t, plan.alpha, plan.beta, s_t, opts, true)?;
    let log_a = t * cgf_exact(th, c, plan.alpha, t)?;
    let b = pr.c_factor;
    let log_p = log_a + b.ln();
    let a_factor = log_a.exp();
    let err_b = pr.quadrature_error + pr.d_bound + pr.c_imag.abs();
    Ok(InversionResult {
        regime,
        side: plan.side,
        a_t_used: plan.alpha,
        beta_used: plan.beta,
        log_a_factor: log_a,
        a_factor,
        b_factor: b,
        d_bound: pr.d_bound,
        s_t: pr.s_t,
        probability: log_p.exp(),
        log_probability: log_p,
        quadrature_error: err_b * a_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_signs() {
        for &(th, c) in &[
            (-1.0, -2.0),
            (-1.0, -0.5),
            (-1.0, -1.0 / 3.0),
            (-1.0, 0.5),
            (1.0, -2.0),
            (1.0, -1.0),
            (1.0, 0.5),
            (1.0, 2.0),
            (0.0, -1.0),
            (0.0, 1.0),
        ] {
            let p = tilt_plan(th, c, 20.0).unwrap();
            assert!(p.alpha * p.beta < 0.0, "{th} {c}");
        }
        assert!(matches!(
            tilt_plan(1.0, 1.0, 10.0),
            Err(Error::NoExpansion { .. })
        ));
    }

    #[test]
    fn truncated_integral_is_real() {
        let p = tilt_plan(1.0, 2.0, 10.0).unwrap();
        let r = b_t_parseval(1.0, 2.0, 10.0, p.alpha, p.beta, 50.0).unwrap();
        assert!(r.c_imag.abs() < 1e-10 * r.c_factor.abs());
    }
}
