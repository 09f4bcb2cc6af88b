//! Time-varying saddle point `a_T`, root of `L′(a) + H′(a)/T = 0`, and its
//! asymptotic series in `1/T` (or `1/√T` at the critical thresholds).

use serde::Serialize;

use crate::cgf::border_gap;
use crate::error::{finite, horizon, Error, Result};
use crate::model::{classify_case, effective_domain, Regime};

/// Expansion variable of the saddle-point series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesScale {
    InverseT,
    InverseSqrtT,
}

impl SeriesScale {
    /// `1/T` or `1/√T`.
    pub fn epsilon(self, t: f64) -> f64 {
        match self {
            SeriesScale::InverseT => 1.0 / t,
            SeriesScale::InverseSqrtT => 1.0 / t.sqrt(),
        }
    }
}

/// `a_T ≈ Σ a_k ε^k`, `φ(a_T) ≈ Σ φ_k ε^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCoeffs {
    pub scale: SeriesScale,
    pub a_coeffs: Vec<f64>,
    pub phi_coeffs: Vec<f64>,
}

impl SeriesCoeffs {
    /// Partial sum of the first `terms` coefficients of `a_T`.
    pub fn a_at(&self, t: f64, terms: usize) -> f64 {
        partial_sum(&self.a_coeffs, self.scale.epsilon(t), terms)
    }

    pub fn phi_at(&self, t: f64, terms: usize) -> f64 {
        partial_sum(&self.phi_coeffs, self.scale.epsilon(t), terms)
    }
}

fn partial_sum(coeffs: &[f64], eps: f64, terms: usize) -> f64 {
    coeffs
        .iter()
        .take(terms)
        .rev()
        .fold(0.0, |acc, &k| acc * eps + k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleSolution {
    pub a_t: f64,
    pub phi_at: f64,
    pub residual: f64,
    pub iterations: usize,
    pub regime: Regime,
}

fn has_saddle(r: Regime) -> bool {
    use Regime::*;
    matches!(
        r,
        ExplosiveRight | ExplosiveValley | ExplosiveCritical | StableRight | StableInner
            | StableCritical | UnstableRight
    )
}

/// Series coefficients up to second order.
pub fn series_coeffs(theta: f64, c: f64) -> Result<SeriesCoeffs> {
    use Regime::*;
    let regime = classify_case(theta, c)?;
    let (scale, a, p) = match regime {
        ExplosiveRight | StableRight | UnstableRight => {
            let th = if regime == UnstableRight { 0.0 } else { theta };
            let d = 3.0 * c - th;
            let d3 = d * d * d;
            (
                SeriesScale::InverseT,
                [
                    2.0 * (c - th),
                    (th - 2.0 * c) / d,
                    -c * (c * c - 5.0 * th * c + 2.0 * th * th) / (2.0 * (c - th) * d3),
                ],
                [
                    th - 2.0 * c,
                    c / d,
                    c * c * (4.0 * c * c - 9.0 * th * c + 3.0 * th * th)
                        / (2.0 * (c - th) * (2.0 * c - th) * d3),
                ],
            )
        }
        ExplosiveValley => {
            let s = c + theta;
            let s3 = s * s * s;
            (
                SeriesScale::InverseT,
                [
                    0.0,
                    -theta / s,
                    -c * (c * c + 3.0 * theta * c - 2.0 * theta * theta)
                        / (2.0 * (c - theta) * s3),
                ],
                [
                    -theta,
                    c / s,
                    c * c * (2.0 * c * c + 3.0 * theta * c - 3.0 * theta * theta)
                        / (2.0 * theta * (c - theta) * s3),
                ],
            )
        }
        ExplosiveCritical => {
            let r = theta.sqrt();
            (
                SeriesScale::InverseSqrtT,
                [0.0, -r, -0.125],
                [-theta, -r, 0.375],
            )
        }
        StableCritical => {
            let r = (-theta / 3.0).sqrt();
            (
                SeriesScale::InverseSqrtT,
                [-4.0 * theta / 3.0, -r, -0.125],
                [theta / 3.0, -r, 0.375],
            )
        }
        StableInner => {
            // Interior root: φ(a_T) → c, so the leading factor φ − c carries the 1/T terms.
            let g0 = (3.0 * c - theta) * (c + theta) / (2.0 * c);
            let p1 = -(c - theta) * (c - theta) / ((3.0 * c - theta) * (c + theta));
            let p2 = (-c * p1 - p1 * p1 * g0 - 2.0 * c * p1 * p1) / (c * g0);
            (
                SeriesScale::InverseT,
                [(c * c - theta * theta) / (2.0 * c), p1, p2 + p1 * p1 / (2.0 * c)],
                [c, p1, p2],
            )
        }
        _ => return Err(Error::NoSeries { regime }),
    };
    Ok(SeriesCoeffs {
        scale,
        a_coeffs: a.to_vec(),
        phi_coeffs: p.to_vec(),
    })
}

/// Polynomial form `T φ(φ−c)(φ+a+θ) − c(a+θ) + φ²` of the saddle equation
/// and its derivative in `a`. Returns `None` outside `θ²+2ac > 0`.
fn equation(theta: f64, c: f64, a: f64, t: f64) -> Option<(f64, f64)> {
    let r = theta * theta + 2.0 * a * c;
    if r <= 0.0 {
        return None;
    }
    let phi = -r.sqrt();
    let gap = border_gap(theta, c, a, phi);
    let dphi = c / phi;
    let f = t * phi * (phi - c) * gap - c * (a + theta) + phi * phi;
    let df = t * (dphi * (2.0 * phi - c) * gap + phi * (phi - c) * (dphi + 1.0)) + c;
    Some((f, df))
}

/// `L′(a) + H′(a)/T = −f/(2Tφ²·gap)` with `f` the polynomial form.
fn normalized(theta: f64, c: f64, a: f64, t: f64, f: f64) -> f64 {
    let phi = -(theta * theta + 2.0 * a * c).sqrt();
    -f / (2.0 * t * phi * phi * border_gap(theta, c, a, phi))
}

/// Value of the saddle equation `L′(a) + H′(a)/T` at `a`.
pub fn saddle_residual(theta: f64, c: f64, a: f64, t: f64) -> Result<f64> {
    equation(theta, c, a, t)
        .map(|(f, _)| normalized(theta, c, a, t, f))
        .ok_or_else(|| Error::Domain {
            violated: "θ² + 2ac > 0".into(),
        })
}

const TARGET: f64 = 1e-12;

/// Solves for `a_T` by bracketing followed by safeguarded Newton steps.
///
/// Border regimes search inward from the finite upper endpoint of `Δ_c`;
/// the interior regime brackets around `(c²−θ²)/(2c)`.
pub fn solve_saddle(theta: f64, c: f64, t: f64) -> Result<SaddleSolution> {
    horizon(t)?;
    finite("theta", theta)?;
    finite("c", c)?;
    let regime = classify_case(theta, c)?;
    if !has_saddle(regime) {
        return Err(Error::NoSeries { regime });
    }
    let th = if regime == Regime::UnstableRight { 0.0 } else { theta };
    let dom = effective_domain(th, c)?;
    let f = |a: f64| equation(th, c, a, t).map(|v| v.0);
    let unresolved = || Error::SaddleNotConverged {
        residual: f64::INFINITY,
    };

    let (mut lo, mut hi) = if regime == Regime::StableInner {
        let a0 = (c * c - th * th) / (2.0 * c);
        let mut w = 1e-3 * a0.abs().max(1.0) / t;
        loop {
            let (l, h) = ((a0 - w).max(dom.lower), (a0 + w).min(dom.upper));
            let (fl, fh) = (f(l).ok_or_else(unresolved)?, f(h).ok_or_else(unresolved)?);
            if fl * fh <= 0.0 {
                break (l, h);
            }
            if l <= dom.lower && h >= dom.upper {
                return Err(unresolved());
            }
            w *= 2.0;
        }
    } else {
        let top = dom.upper;
        let scale = top.abs().max(1.0);
        let mut delta = 1e-15 * scale;
        let mut inner = top - delta;
        while inner >= top {
            delta *= 2.0;
            inner = top - delta;
        }
        let f_top = f(inner).ok_or_else(unresolved)?;
        let mut prev = inner;
        loop {
            delta *= 2.0;
            let a = top - delta;
            if a <= dom.lower || delta > 1e6 * scale {
                return Err(unresolved());
            }
            match f(a) {
                Some(v) if v * f_top <= 0.0 => break (a, prev),
                Some(_) => prev = a,
                None => return Err(unresolved()),
            }
        }
    };

    let mut f_lo = f(lo).ok_or_else(unresolved)?;
    let mut a = 0.5 * (lo + hi);
    let mut iterations = 0;
    let mut best = (f64::INFINITY, a);
    for _ in 0..300 {
        iterations += 1;
        let (fa, dfa) = equation(th, c, a, t).ok_or_else(unresolved)?;
        let g = normalized(th, c, a, t, fa).abs();
        if g < best.0 {
            best = (g, a);
        }
        if g < 1e-3 * TARGET || hi - lo <= 4.0 * f64::EPSILON * a.abs().max(1e-300) {
            break;
        }
        if fa * f_lo > 0.0 {
            lo = a;
            f_lo = fa;
        } else {
            hi = a;
        }
        let newton = a - fa / dfa;
        a = if newton > lo && newton < hi && dfa.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    let a_t = best.1;
    let residual = best.0;
    if !(residual < TARGET) || !dom.contains(a_t) {
        return Err(Error::SaddleNotConverged { residual });
    }
    Ok(SaddleSolution {
        a_t,
        phi_at: -(th * th + 2.0 * a_t * c).sqrt(),
        residual,
        iterations,
        regime,
    })
}
