//! Sharp large-deviation expansions of `P(θ̂_T ≤ c)` / `P(θ̂_T ≥ c)`.
//!
//! Every non-zero threshold factors as `P = A_T·B_T` with
//! `A_T = exp(T L_T(α_T))`. The leading term is `exp(−T I(c))` times an
//! explicit prefactor; the order-one correction combines the closed-form
//! coefficient of `A_T` with a numerically extrapolated coefficient of `B_T`.
//! At `c = 0` the tail is a Gaussian probability and is expanded exactly.

use std::collections::HashMap;
use std::f64::consts::{E, PI};
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{finite, horizon, Error, Result};
use crate::model::{classify_case, rate_function, Regime, Side};
use crate::oracle::oracle_tail;

/// `Γ(1/4)`
pub fn gamma_quarter() -> f64 {
    libm::tgamma(0.25)
}

/// Closed-form constants of the expansions. Fields that do not apply to the
/// regime are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ExpansionConstants {
    pub a_c: Option<f64>,
    pub sigma_c_sq: Option<f64>,
    /// `H(a_c)` for the left and inner branches.
    pub h_of_ac: Option<f64>,
    /// `K(c)` for the right branches.
    pub k_of_c: Option<f64>,
    /// `J(c)` in the valley.
    pub j_of_c: Option<f64>,
    /// `P(c)` in `A_T ≈ exp(−TI + P(c))·√(eT)`.
    pub p_of_c: Option<f64>,
    /// First coefficient of `A_T`.
    pub gamma1: Option<f64>,
    /// `δ = −L′(a_c)`.
    pub delta: Option<f64>,
    pub delta1: Option<f64>,
    /// `β₀ = −1/(a_c σ_c √(2π))`.
    pub beta0: Option<f64>,
    /// Limit of `B_T·T^q` actually attained (`q` = ½, 1 or 0 by regime).
    pub b_limit: Option<f64>,
    pub a_theta: Option<f64>,
    pub sigma_theta_sq: Option<f64>,
}

fn snapped_theta(regime: Regime, theta: f64) -> f64 {
    match regime {
        Regime::UnstableLeft | Regime::UnstableRight | Regime::UnstableZero => 0.0,
        _ => theta,
    }
}

/// Constants for `(θ, c)`.
pub fn expansion_constants(theta: f64, c: f64) -> Result<ExpansionConstants> {
    use Regime::*;
    let regime = classify_case(theta, c)?;
    let th = snapped_theta(regime, theta);
    let sqrt_2pi = (2.0 * PI).sqrt();
    let mut k = ExpansionConstants::default();
    match regime {
        StableLeft | ExplosiveLeft | UnstableLeft | StableInner => {
            let a_c = (c * c - th * th) / (2.0 * c);
            let s2 = -0.5 / c;
            let beta0 = -1.0 / (a_c * s2.sqrt() * sqrt_2pi);
            k.a_c = Some(a_c);
            k.sigma_c_sq = Some(s2);
            k.h_of_ac = Some(-0.5 * ((c + th) * (3.0 * c - th) / (4.0 * c * c)).ln());
            k.beta0 = Some(beta0);
            k.b_limit = Some(beta0.abs());
            if regime != StableInner {
                k.gamma1 = Some(0.0);
            }
        }
        StableRight | ExplosiveRight | UnstableRight => {
            let a_c = 2.0 * (c - th);
            let d = 2.0 * c - th;
            let e = 3.0 * c - th;
            let delta = e / (2.0 * d);
            let delta1 = 1.0 / (a_c * delta * (2.0 * PI * E).sqrt());
            k.a_c = Some(a_c);
            k.sigma_c_sq = Some(c * c / (2.0 * d * d * d));
            k.k_of_c = Some(-0.5 * ((c - th) * e / (4.0 * c * c)).ln());
            k.p_of_c = Some(-0.5 * ((c - th) / (2.0 * d * e)).ln());
            k.gamma1 = Some(c * (c * c - 3.0 * th * c + th * th) / (2.0 * (c - th) * (th - 2.0 * c) * e * e));
            k.delta = Some(delta);
            k.delta1 = Some(delta1);
            k.b_limit = Some(delta1);
        }
        ExplosiveValley => {
            let a_c = th / (c + th);
            let delta = -(c + th) / (2.0 * th);
            let delta1 = 1.0 / (a_c * delta * (2.0 * PI * E).sqrt());
            k.a_c = Some(a_c);
            k.sigma_c_sq = Some(c * c / (2.0 * th * th * th));
            k.j_of_c = Some(-0.5 * ((th - c) * (th + c) / (4.0 * c * c)).ln());
            k.p_of_c = Some(-0.5 * ((th - c) / (2.0 * th * (c + th))).ln());
            k.gamma1 = Some(-c * (c * c + th * c - th * th) / (2.0 * th * (c - th) * (c + th) * (c + th)));
            k.delta = Some(delta);
            k.delta1 = Some(delta1);
            // B_T tends to a constant here, not to δ₁/T.
            k.b_limit = Some(2.0 / (2.0 * PI * E).sqrt());
        }
        ExplosiveCritical => {
            k.a_theta = Some(th.sqrt());
            k.sigma_theta_sq = Some(0.5 / th);
            k.gamma1 = Some(3.0 / (8.0 * th.sqrt()));
            k.delta1 = Some((-0.25f64).exp() * gamma_quarter() / (2.0 * PI));
            k.b_limit = Some((-0.25f64).exp() * libm::tgamma(0.75) / PI);
        }
        StableCritical => {
            let a_theta = -4.0 * th / 3.0;
            let s2 = -1.5 / th;
            k.a_theta = Some(a_theta);
            k.sigma_theta_sq = Some(s2);
            // A_T ≈ exp(−TI)(e|c|T)^{1/4}; B_T·√T tends to half the reference constant.
            let reference = gamma_quarter()
                / (2.0 * PI * a_theta.powf(0.75) * s2.sqrt() * (E * c.abs()).powf(0.25));
            k.b_limit = Some(0.5 * reference);
        }
        StableZero | ExplosiveZero => {}
        StableAtTheta | ExplosiveAtTheta | UnstableZero => {
            return Err(Error::NoExpansion { regime })
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailApproximation {
    pub regime: Regime,
    pub side: Side,
    pub rate: f64,
    /// Log of the prefactor multiplying `exp(−T I(c))`.
    pub prefactor_log: f64,
    /// Correction coefficients used, lowest order first.
    pub corrections: Vec<f64>,
    pub order: u32,
    /// Value before clamping to `[0, 1]`.
    pub raw_probability: f64,
    pub probability: f64,
    /// Log of the raw value; finite even when `probability` underflows.
    pub log_probability: f64,
    /// Size of the first omitted term, where known.
    pub error_estimate: Option<f64>,
    /// The textbook closed-form leading term, where it differs from the one
    /// used here.
    pub reference_leading: Option<f64>,
}

/// Highest order available for the regime.
pub fn max_order(regime: Regime) -> Option<u32> {
    use Regime::*;
    match regime {
        StableZero | ExplosiveZero => Some(ZERO_MAX_ORDER),
        StableLeft | StableInner | StableRight | StableCritical => Some(0),
        ExplosiveLeft | ExplosiveRight | ExplosiveValley | ExplosiveCritical | UnstableLeft
        | UnstableRight => Some(1),
        StableAtTheta | ExplosiveAtTheta | UnstableZero => None,
    }
}

const ZERO_MAX_ORDER: u32 = 40;

/// `d_T = √T/σ_T` with `σ_T² = (e^{2θT} − 1)/(2θ)`, computed without overflow.
pub fn zero_threshold_d(theta: f64, t: f64) -> f64 {
    let x = theta * t;
    if x == 0.0 {
        1.0
    } else if x > 0.0 {
        (2.0 * x / -(-2.0 * x).exp_m1()).sqrt() * (-x).exp()
    } else {
        (2.0 * x / (2.0 * x).exp_m1()).sqrt()
    }
}

/// Exact Gaussian tail at `c = 0`: `P(θ̂_T ≤ 0)` for `θ ≥ 0` and
/// `P(θ̂_T ≥ 0)` for `θ < 0`.
pub fn zero_threshold_value(theta: f64, t: f64) -> Result<f64> {
    finite("theta", theta)?;
    horizon(t)?;
    let d = zero_threshold_d(theta, t);
    let x = d / std::f64::consts::SQRT_2;
    Ok(if theta >= 0.0 { libm::erf(x) } else { libm::erfc(x) })
}

/// Terms `t_k = (2d/√(2π))·(−1)^k (d²/2)^k / ((2k+1) k!)` of the Taylor
/// series of `P(|N| ≤ d) = 2(Φ(d) − ½)`.
pub fn zero_threshold_terms(d: f64, count: usize) -> Vec<f64> {
    let lead = 2.0 * d / (2.0 * PI).sqrt();
    let y = 0.5 * d * d;
    let mut out = Vec::with_capacity(count);
    let mut pow = 1.0;
    for k in 0..count {
        if k > 0 {
            pow *= -y / k as f64;
        }
        out.push(lead * pow / (2 * k + 1) as f64);
    }
    out
}

/// Explosive `c = 0`: the order-`p` series in `d_T²/2 ≈ θT e^{−2θT}`.
///
/// `d_T` is taken exactly; replacing it by `√(2θT) e^{−θT}` costs a relative
/// error of about `e^{−2θT}/2`.
pub fn zero_threshold_exact(theta: f64, t: f64, p: u32) -> Result<TailApproximation> {
    finite("theta", theta)?;
    horizon(t)?;
    let regime = classify_case(theta, 0.0)?;
    if regime != Regime::ExplosiveZero {
        return Err(Error::Domain {
            violated: "θ > 0".into(),
        });
    }
    if p > ZERO_MAX_ORDER {
        return Err(Error::OrderUnavailable {
            regime,
            requested: p,
            max: ZERO_MAX_ORDER,
        });
    }
    let d = zero_threshold_d(theta, t);
    let terms = zero_threshold_terms(d, p as usize + 2);
    let raw: f64 = terms[..=p as usize].iter().rev().sum();
    let rate = rate_function(theta, 0.0)?;
    let y = 0.5 * d * d;
    let corrections = (1..=p as usize)
        .map(|k| terms[k] / terms[0] / y.powi(k as i32))
        .collect();
    let reference = 2.0 * (-theta * t).exp() * (2.0 * theta * t).sqrt() / (2.0 * PI).sqrt();
    Ok(TailApproximation {
        regime,
        side: Side::LowerTail,
        rate,
        prefactor_log: (terms[0] / (-rate * t).exp()).ln(),
        corrections,
        order: p,
        raw_probability: raw,
        probability: raw.clamp(0.0, 1.0),
        log_probability: raw.ln(),
        error_estimate: Some(terms[p as usize + 1].abs()),
        reference_leading: Some(reference),
    })
}

/// Stable `c = 0`: `P(θ̂_T ≥ 0) = P(|N| ≥ d_T)` with the Mills-ratio series
/// `2e^{θT}/(√(2πT)√(−2θ))·Σ (2k)!/(2^{2k} θ^k T^k k!)`.
fn stable_zero(theta: f64, t: f64, p: u32) -> Result<TailApproximation> {
    let regime = Regime::StableZero;
    if p > ZERO_MAX_ORDER {
        return Err(Error::OrderUnavailable {
            regime,
            requested: p,
            max: ZERO_MAX_ORDER,
        });
    }
    let rate = rate_function(theta, 0.0)?;
    let lead_log = -rate * t + 2f64.ln() - 0.5 * (2.0 * PI * t).ln() - 0.5 * (-2.0 * theta).ln();
    let mut coeffs = Vec::new();
    let mut term = 1.0;
    let mut sum = 1.0;
    let x = theta * t;
    for k in 1..=p + 1 {
        // (2k)!/(2^{2k} k!) = (2k−1)!!/2^k
        term *= (2 * k - 1) as f64 / (2.0 * x);
        if k <= p {
            coeffs.push(term * t.powi(k as i32));
            sum += term;
        }
    }
    let raw_log = lead_log + sum.ln();
    let raw = raw_log.exp();
    Ok(TailApproximation {
        regime,
        side: Side::UpperTail,
        rate,
        prefactor_log: lead_log + rate * t,
        corrections: coeffs,
        order: p,
        raw_probability: raw,
        probability: raw.clamp(0.0, 1.0),
        log_probability: raw_log,
        error_estimate: Some(term.abs() * lead_log.exp()),
        reference_leading: None,
    })
}

/// Power `q` with `B_T ≈ b_limit·T^{−q}`, and whether corrections run in `1/√T`.
fn b_scaling(regime: Regime) -> (f64, bool) {
    use Regime::*;
    match regime {
        StableLeft | StableInner | ExplosiveLeft | UnstableLeft => (0.5, false),
        StableRight | ExplosiveRight | UnstableRight => (1.0, false),
        ExplosiveValley => (0.0, false),
        ExplosiveCritical => (0.0, true),
        StableCritical => (0.5, true),
        _ => (0.0, false),
    }
}

/// Horizons used to extrapolate the first coefficient of `B_T`.
pub const B1_HORIZONS: [f64; 3] = [50.0, 200.0, 800.0];

fn b1_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// First correction coefficient `b₁` of `B_T = b_limit·T^{−q}(1 + b₁ε + …)`,
/// `ε = 1/T` (or `1/√T` at the critical thresholds), by two levels of
/// Richardson extrapolation of oracle values at [`B1_HORIZONS`].
pub fn numeric_b1(theta: f64, c: f64) -> Result<f64> {
    let key = (theta.to_bits(), c.to_bits());
    if let Some(v) = b1_cache().lock().expect("cache lock").get(&key) {
        return Ok(*v);
    }
    let regime = classify_case(theta, c)?;
    let k = expansion_constants(theta, c)?;
    let b_lim = k.b_limit.ok_or(Error::NoExpansion { regime })?;
    let (q, sqrt_scale) = b_scaling(regime);
    let mut g = [0.0; 3];
    for (i, &t) in B1_HORIZONS.iter().enumerate() {
        let o = oracle_tail(theta, c, t)?;
        let ratio = o.b_factor * t.powf(q) / b_lim;
        let inv_eps = if sqrt_scale { t.sqrt() } else { t };
        g[i] = inv_eps * (ratio - 1.0);
    }
    // Horizons grow by 4, so ε shrinks by 4 (or by 2 on the √T scale).
    let r = if sqrt_scale { 2.0 } else { 4.0 };
    let l1a = (r * g[1] - g[0]) / (r - 1.0);
    let l1b = (r * g[2] - g[1]) / (r - 1.0);
    let b1 = (r * r * l1b - l1a) / (r * r - 1.0);
    b1_cache().lock().expect("cache lock").insert(key, b1);
    Ok(b1)
}

/// Sharp large-deviation approximation of the tail on the side the
/// regime is stated for.
pub fn tail_probability(theta: f64, c: f64, t: f64, order: u32) -> Result<TailApproximation> {
    use Regime::*;
    horizon(t)?;
    let regime = classify_case(theta, c)?;
    let max = max_order(regime).ok_or(Error::NoExpansion { regime })?;
    if order > max {
        return Err(Error::OrderUnavailable {
            regime,
            requested: order,
            max,
        });
    }
    match regime {
        ExplosiveZero => return zero_threshold_exact(theta, t, order),
        StableZero => return stable_zero(theta, t, order),
        _ => {}
    }
    let th = snapped_theta(regime, theta);
    let side = regime.side().ok_or(Error::NoExpansion { regime })?;
    let k = expansion_constants(theta, c)?;
    let rate = rate_function(th, c)?;
    let half_log_2pi_t = 0.5 * (2.0 * PI * t).ln();
    let ln_abs = |x: f64| x.abs().ln();
    let mut reference_log = None;
    let prefactor_log = match regime {
        StableLeft | ExplosiveLeft | UnstableLeft | StableInner => {
            let (a_c, s2, h) = (k.a_c.unwrap(), k.sigma_c_sq.unwrap(), k.h_of_ac.unwrap());
            h - ln_abs(a_c) - 0.5 * s2.ln() - half_log_2pi_t
        }
        StableRight | ExplosiveRight | UnstableRight => {
            let (a_c, s2, kc) = (k.a_c.unwrap(), k.sigma_c_sq.unwrap(), k.k_of_c.unwrap());
            kc - a_c.ln() - 0.5 * s2.ln() - half_log_2pi_t
        }
        ExplosiveValley => {
            let (a_c, s2, j) = (k.a_c.unwrap(), k.sigma_c_sq.unwrap(), k.j_of_c.unwrap());
            reference_log = Some(j - a_c.ln() - 0.5 * s2.ln() - half_log_2pi_t);
            k.p_of_c.unwrap() + 0.5 * (E * t).ln() + k.b_limit.unwrap().ln()
        }
        ExplosiveCritical => {
            let (a, s2) = (k.a_theta.unwrap(), k.sigma_theta_sq.unwrap());
            reference_log = Some(
                gamma_quarter().ln() - (2.0 * PI).ln() - 0.25 * t.ln() - 0.75 * a.ln() - 0.5 * s2.ln(),
            );
            0.25 * (E * th * t).ln() + k.b_limit.unwrap().ln()
        }
        StableCritical => {
            let (a, s2) = (k.a_theta.unwrap(), k.sigma_theta_sq.unwrap());
            let reference =
                gamma_quarter().ln() - (2.0 * PI).ln() - 0.25 * t.ln() - 0.75 * a.ln() - 0.5 * s2.ln();
            reference_log = Some(reference);
            reference - 2f64.ln()
        }
        _ => return Err(Error::NoExpansion { regime }),
    };
    let mut corrections = Vec::new();
    let mut factor = 1.0;
    if order >= 1 {
        let gamma1 = k.gamma1.unwrap_or(0.0);
        let b1 = numeric_b1(theta, c)?;
        let d1 = gamma1 + b1;
        let eps = if b_scaling(regime).1 { 1.0 / t.sqrt() } else { 1.0 / t };
        corrections.push(d1);
        factor += d1 * eps;
    }
    let raw_log = -t * rate + prefactor_log + factor.abs().ln();
    let raw = raw_log.exp() * if factor < 0.0 { -1.0 } else { 1.0 };
    Ok(TailApproximation {
        regime,
        side,
        rate,
        prefactor_log,
        corrections,
        order,
        raw_probability: raw,
        probability: raw.clamp(0.0, 1.0),
        log_probability: raw_log,
        error_estimate: None,
        reference_leading: reference_log.map(|l| (l - t * rate).exp()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_quarter_value() {
        assert!((gamma_quarter() / 3.625_609_908_221_908_3 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_constants() {
        let k = expansion_constants(1.0, 2.0).unwrap();
        assert_eq!(k.a_c, Some(2.0));
        assert!((k.sigma_c_sq.unwrap() - 2.0 / 27.0).abs() < 1e-16);
        assert!((k.k_of_c.unwrap() - 0.5 * (16.0f64 / 5.0).ln()).abs() < 1e-15);
        assert!((k.gamma1.unwrap() - 1.0 / 75.0).abs() < 1e-16);
        let k = expansion_constants(1.0, -1.0).unwrap();
        assert_eq!(k.a_theta, Some(1.0));
        assert_eq!(k.sigma_theta_sq, Some(0.5));
        let k = expansion_constants(1.0, -2.0).unwrap();
        assert_eq!(k.a_c, Some(-0.75));
        let b0 = -1.0 / (-0.75 * 0.5 * (2.0 * PI).sqrt());
        assert!((k.beta0.unwrap() - b0).abs() < 1e-15);
        assert!(matches!(
            expansion_constants(1.0, 1.0),
            Err(Error::NoExpansion { .. })
        ));
    }

    #[test]
    fn right_prefactor_composition() {
        // exp(P)·√e·δ₁ reproduces exp(K)/(a_c σ_c √(2π)).
        for &(th, c) in &[(1.0, 2.0), (0.5, 3.0), (-1.0, 0.2)] {
            let k = expansion_constants(th, c).unwrap();
            let lhs = k.p_of_c.unwrap().exp() * E.sqrt() * k.delta1.unwrap();
            let rhs = k.k_of_c.unwrap().exp()
                / (k.a_c.unwrap() * k.sigma_c_sq.unwrap().sqrt() * (2.0 * PI).sqrt());
            assert!((lhs / rhs - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hermite_form_of_zero_series() {
        let d = 0.3;
        let terms = zero_threshold_terms(d, 8);
        let lead = 2.0 * d / (2.0 * PI).sqrt();
        let mut fact = 1.0;
        for (k, t) in terms.iter().enumerate() {
            if k > 0 {
                fact *= ((2 * k) * (2 * k + 1)) as f64;
            }
            let h = crate::model::hermite_number(2 * k as u32).unwrap() as f64;
            let alt = lead * h * d.powi(2 * k as i32) / (2f64.powi(k as i32) * fact);
            assert!((t - alt).abs() < 1e-15 * lead);
        }
    }

    #[test]
    fn zero_threshold_examples() {
        let a = zero_threshold_exact(1.0, 5.0, 3).unwrap();
        let exact = zero_threshold_value(1.0, 5.0).unwrap();
        assert!((a.probability / exact - 1.0).abs() < 1e-14);
        assert!((a.corrections[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!(zero_threshold_exact(-1.0, 5.0, 1).is_err());
        let s = tail_probability(-1.0, 0.0, 10.0, 0).unwrap();
        let lead = 2.0 * (-10.0f64).exp() / ((20.0 * PI).sqrt() * 2f64.sqrt());
        assert!((s.probability / lead - 1.0).abs() < 1e-14);
    }

    #[test]
    fn order_limits() {
        assert!(matches!(
            tail_probability(-1.0, -2.0, 10.0, 1),
            Err(Error::OrderUnavailable { max: 0, .. })
        ));
        assert!(matches!(
            tail_probability(1.0, 1.0, 10.0, 0),
            Err(Error::NoExpansion { .. })
        ));
    }

    #[test]
    fn right_leading_term() {
        let r = tail_probability(1.0, 2.0, 10.0, 0).unwrap();
        let v = (-30.0 + 0.5 * (16.0f64 / 5.0).ln()).exp()
            / (2.0 * (2.0f64 / 27.0).sqrt() * (20.0 * PI).sqrt());
        assert!((r.probability / v - 1.0).abs() < 1e-13);
    }
}
