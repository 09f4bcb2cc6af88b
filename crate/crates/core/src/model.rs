//! Regime classification, rate function and effective domains.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{finite, horizon, Error, Result};

/// Absolute tolerance used to snap `c` onto the singular thresholds
/// `θ`, `−θ`, `θ/3`, `0` (and `θ` onto `0`).
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Distance to the effective-domain boundary below which CGF evaluations
/// refuse to return a value.
pub const NEAR_BOUNDARY: f64 = 1e-10;

/// Drift parameter and observation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub theta: f64,
    pub horizon: f64,
}

impl ModelSpec {
    pub fn new(theta: f64, horizon: f64) -> Result<Self> {
        finite("theta", theta)?;
        crate::error::horizon(horizon)?;
        Ok(Self { theta, horizon })
    }
}

/// One tag per branch of the tail asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    StableLeft,
    StableInner,
    StableAtTheta,
    StableCritical,
    StableZero,
    StableRight,
    ExplosiveLeft,
    ExplosiveCritical,
    ExplosiveValley,
    ExplosiveZero,
    ExplosiveAtTheta,
    ExplosiveRight,
    UnstableLeft,
    UnstableZero,
    UnstableRight,
}

/// Which tail a branch is stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `P(θ̂_T ≤ c)`
    LowerTail,
    /// `P(θ̂_T ≥ c)`
    UpperTail,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::StableLeft => "StableLeft",
            Regime::StableInner => "StableInner",
            Regime::StableAtTheta => "StableAtTheta",
            Regime::StableCritical => "StableCritical",
            Regime::StableZero => "StableZero",
            Regime::StableRight => "StableRight",
            Regime::ExplosiveLeft => "ExplosiveLeft",
            Regime::ExplosiveCritical => "ExplosiveCritical",
            Regime::ExplosiveValley => "ExplosiveValley",
            Regime::ExplosiveZero => "ExplosiveZero",
            Regime::ExplosiveAtTheta => "ExplosiveAtTheta",
            Regime::ExplosiveRight => "ExplosiveRight",
            Regime::UnstableLeft => "UnstableLeft",
            Regime::UnstableZero => "UnstableZero",
            Regime::UnstableRight => "UnstableRight",
        }
    }

    /// Tail in which the branch formula is stated. `None` for `c = θ`.
    pub fn side(self) -> Option<Side> {
        use Regime::*;
        match self {
            StableLeft | ExplosiveLeft | ExplosiveCritical | ExplosiveValley | ExplosiveZero
            | UnstableLeft => Some(Side::LowerTail),
            StableInner | StableCritical | StableZero | StableRight | ExplosiveRight
            | UnstableRight => Some(Side::UpperTail),
            StableAtTheta | ExplosiveAtTheta | UnstableZero => None,
        }
    }

    /// `c = 0` branches, handled by the Gaussian route rather than the CGF.
    pub fn is_zero_threshold(self) -> bool {
        matches!(self, Regime::StableZero | Regime::ExplosiveZero)
    }

    /// Branches with a tilted-measure representation `P = A_T·B_T`.
    pub fn has_cgf_route(self) -> bool {
        self.side().is_some() && !self.is_zero_threshold()
    }

    /// Branches where the tilt is the fixed interior point `a_c`.
    pub fn uses_fixed_tilt(self) -> bool {
        matches!(
            self,
            Regime::StableLeft | Regime::ExplosiveLeft | Regime::UnstableLeft
        )
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn snap(x: f64, target: f64) -> bool {
    (x - target).abs() <= BOUNDARY_TOL
}

/// Classifies `(θ, c)` into exactly one regime.
///
/// Equality cases are detected with absolute tolerance [`BOUNDARY_TOL`].
/// The stable case `c = θ` has its own tag, [`Regime::StableAtTheta`].
pub fn classify_case(theta: f64, c: f64) -> Result<Regime> {
    finite("theta", theta)?;
    finite("c", c)?;
    let r = if snap(theta, 0.0) {
        if snap(c, 0.0) {
            Regime::UnstableZero
        } else if c < 0.0 {
            Regime::UnstableLeft
        } else {
            Regime::UnstableRight
        }
    } else if theta < 0.0 {
        if snap(c, 0.0) {
            Regime::StableZero
        } else if snap(c, theta / 3.0) {
            Regime::StableCritical
        } else if snap(c, theta) {
            Regime::StableAtTheta
        } else if c < theta {
            Regime::StableLeft
        } else if c < theta / 3.0 {
            Regime::StableInner
        } else {
            Regime::StableRight
        }
    } else if snap(c, 0.0) {
        Regime::ExplosiveZero
    } else if snap(c, theta) {
        Regime::ExplosiveAtTheta
    } else if snap(c, -theta) {
        Regime::ExplosiveCritical
    } else if c < -theta {
        Regime::ExplosiveLeft
    } else if c > theta {
        Regime::ExplosiveRight
    } else {
        Regime::ExplosiveValley
    };
    Ok(r)
}

/// Rate function `I(c)` of the large deviation principle for `θ̂_T`.
pub fn rate_function(theta: f64, c: f64) -> Result<f64> {
    use Regime::*;
    let regime = classify_case(theta, c)?;
    let quad = |th: f64| -(c - th) * (c - th) / (4.0 * c);
    let v = match regime {
        StableAtTheta | ExplosiveAtTheta | UnstableZero => 0.0,
        StableLeft | StableInner | ExplosiveLeft => quad(theta),
        // At these snapped points both adjacent formulas agree.
        StableCritical => -theta / 3.0,
        ExplosiveCritical => theta,
        StableZero => -theta,
        StableRight | ExplosiveRight => 2.0 * c - theta,
        ExplosiveValley | ExplosiveZero => theta,
        UnstableLeft => -c / 4.0,
        UnstableRight => 2.0 * c,
    };
    Ok(v.max(0.0))
}

/// Open interval `]lower, upper[`; `lower` may be `-∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDomain {
    pub lower: f64,
    pub upper: f64,
}

impl EffectiveDomain {
    pub fn contains(&self, a: f64) -> bool {
        a > self.lower && a < self.upper
    }

    /// Distance from `a` to the nearer endpoint (negative when outside).
    pub fn margin(&self, a: f64) -> f64 {
        (a - self.lower).min(self.upper - a)
    }

    /// A finite interior point, used as a fallback initializer.
    pub fn midpoint(&self) -> f64 {
        if self.lower.is_finite() {
            0.5 * (self.lower + self.upper)
        } else {
            self.upper - 1.0f64.max(self.upper.abs())
        }
    }
}

fn zero_threshold_error() -> Error {
    Error::Domain {
        violated: "c = 0 degenerates the tilted family; use the Gaussian route".into(),
    }
}

/// `Δ_c = { a : θ²+2ac > 0, a+θ < √(θ²+2ac) }` in closed form.
pub fn effective_domain(theta: f64, c: f64) -> Result<EffectiveDomain> {
    finite("theta", theta)?;
    finite("c", c)?;
    if snap(c, 0.0) {
        return Err(zero_threshold_error());
    }
    let th = if snap(theta, 0.0) { 0.0 } else { theta };
    let c1 = -th * th / (2.0 * c);
    let border = 2.0 * (c - th);
    let (lower, upper) = if c > 0.0 {
        if snap(c, th) {
            return Err(Error::Domain {
                violated: "c = θ > 0 leaves an empty effective domain".into(),
            });
        } else if c > th {
            (if th >= 0.0 { 0.0 } else { c1 }, border)
        } else if c > th / 2.0 {
            (border, 0.0)
        } else {
            (c1, 0.0)
        }
    } else if c <= th {
        if th > 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, c1)
        }
    } else if c > th / 2.0 {
        (f64::NEG_INFINITY, border)
    } else {
        (f64::NEG_INFINITY, c1)
    };
    Ok(EffectiveDomain { lower, upper })
}

fn s_coth(s: f64, t: f64) -> f64 {
    let x = t * s;
    if x < 1e-8 {
        1.0 / t + s * x / 3.0
    } else {
        s / x.tanh()
    }
}

/// Conservative inner set `Δ̃_{T,c}`: `a + θ < √(θ²+2ac)·coth(T√(θ²+2ac))`.
///
/// The finite endpoints of [`effective_domain`] that come from the second
/// inequality are pushed outward by bisection on the coth condition.
pub fn finite_t_domain(theta: f64, c: f64, t: f64) -> Result<EffectiveDomain> {
    horizon(t)?;
    let base = effective_domain(theta, c)?;
    let th = if snap(theta, 0.0) { 0.0 } else { theta };
    let radicand = |a: f64| th * th + 2.0 * a * c;
    let g = |a: f64| {
        let r = radicand(a);
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        s_coth(r.sqrt(), t) - (a + th)
    };
    let c1 = -th * th / (2.0 * c);
    let extend = |e: f64, dir: f64| -> f64 {
        // The square-root constraint caps the extension.
        let cap = if (c > 0.0 && dir < 0.0) || (c < 0.0 && dir > 0.0) {
            c1
        } else {
            dir * f64::INFINITY
        };
        if (e - cap).abs() <= BOUNDARY_TOL {
            return e;
        }
        let mut inside = e;
        let mut step = 1e-3 * e.abs().max(1.0);
        let mut outside;
        loop {
            let probe = inside + dir * step;
            if cap.is_finite() && (probe - cap) * dir >= 0.0 {
                if g(cap - dir * 1e-15 * cap.abs().max(1.0)) > 0.0 {
                    return cap;
                }
                outside = cap;
                break;
            }
            if g(probe) <= 0.0 {
                outside = probe;
                break;
            }
            inside = probe;
            step *= 2.0;
            if step > 1e12 {
                return probe;
            }
        }
        for _ in 0..200 {
            if (outside - inside).abs() <= 1e-12 * inside.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (inside + outside);
            if g(mid) > 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lower = if base.lower.is_finite() {
        extend(base.lower, -1.0)
    } else {
        base.lower
    };
    let upper = extend(base.upper, 1.0);
    Ok(EffectiveDomain { lower, upper })
}

/// Hermite numbers `H_n = H_n(0)` from `H_n = −2(n−1)H_{n−2}`.
///
/// Returns `None` once the value leaves the `i128` range (n ≥ 50).
pub fn hermite_number(n: u32) -> Option<i128> {
    if n % 2 == 1 {
        return Some(0);
    }
    let mut h: i128 = 1;
    let mut k = 2;
    while k <= n {
        h = h.checked_mul(-2 * (k as i128 - 1))?;
        k += 2;
    }
    Some(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        assert_eq!(classify_case(1.0, 2.0).unwrap(), Regime::ExplosiveRight);
        assert_eq!(
            classify_case(-1.0, -1.0 / 3.0).unwrap(),
            Regime::StableCritical
        );
        assert_eq!(classify_case(1.0, -1.0).unwrap(), Regime::ExplosiveCritical);
        assert_eq!(classify_case(-1.0, -1.0).unwrap(), Regime::StableAtTheta);
        assert_eq!(classify_case(0.0, 0.0).unwrap(), Regime::UnstableZero);
        assert_eq!(classify_case(1e-13, 1.0).unwrap(), Regime::UnstableRight);
        assert!(classify_case(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_function(-1.0, -1.0).unwrap(), 0.0);
        assert_eq!(rate_function(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(rate_function(0.0, -2.0).unwrap(), 0.5);
        assert_eq!(rate_function(-1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_examples() {
        assert_eq!(
            effective_domain(1.0, 2.0).unwrap(),
            EffectiveDomain { lower: 0.0, upper: 2.0 }
        );
        let d = effective_domain(1.0, -2.0).unwrap();
        assert_eq!(d.lower, f64::NEG_INFINITY);
        assert_eq!(d.upper, 0.0);
        assert_eq!(
            effective_domain(1.0, 0.4).unwrap(),
            EffectiveDomain { lower: -1.25, upper: 0.0 }
        );
        assert!(effective_domain(1.0, 0.0).is_err());
        assert!(effective_domain(1.0, 1.0).is_err());
    }

    #[test]
    fn finite_t_domain_contains_limit_domain() {
        // At T = 10 the upper extension is ~1e-25, below one ulp of 2.
        let d = finite_t_domain(1.0, 2.0, 10.0).unwrap();
        assert!(d.lower < 0.0 && d.upper >= 2.0);
        let d = finite_t_domain(1.0, -2.0, 3.0).unwrap();
        assert_eq!(d.lower, f64::NEG_INFINITY);
        let u1 = finite_t_domain(1.0, 2.0, 1.0).unwrap().upper;
        let u2 = finite_t_domain(1.0, 2.0, 2.0).unwrap().upper;
        let u4 = finite_t_domain(1.0, 2.0, 4.0).unwrap().upper;
        assert!(u1 > u2 && u2 > u4 && u4 > 2.0);
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_number(0), Some(1));
        assert_eq!(hermite_number(1), Some(0));
        assert_eq!(hermite_number(2), Some(-2));
        assert_eq!(hermite_number(4), Some(12));
        assert_eq!(hermite_number(7), Some(0));
        assert!(hermite_number(48).is_some());
        assert!(hermite_number(60).is_none());
    }
}
