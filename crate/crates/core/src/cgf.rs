//! Normalized cumulant generating function `L_T(a) = (1/T) log E[exp(a Z_T(c))]`
//! of `Z_T(c) = (X_T² − T)/2 − c∫₀ᵀ X_t² dt`.
//!
//! With `φ(a) = −√(θ²+2ac)`, `τ = a+θ−φ` and `h = (a+θ)/φ`,
//!
//! ```text
//! L_T(a) = −τ/2 − (1/2T) log(1 + (τ/2φ)(1 − e^{2φT}))
//!        = L(a) + H(a)/T + R_T(a)/T
//! L(a)   = −½(a + θ + √(θ²+2ac))
//! H(a)   = −½ log(½(1+h))
//! R_T(a) = −½ log(1 + ((1−h)/(1+h)) e^{2φT})
//! ```

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{finite, horizon, Error, Result};
use crate::model::{effective_domain, finite_t_domain, NEAR_BOUNDARY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfParts {
    pub phi: f64,
    pub tau: f64,
    pub h_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfDecomposition {
    pub phi: f64,
    pub tau: f64,
    pub h_ratio: f64,
    pub big_l: f64,
    pub big_h: f64,
    pub remainder: f64,
    pub assembled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfDerivatives {
    /// `L′(a)`
    pub dl: f64,
    /// `L″(a)`
    pub d2l: f64,
    /// `H′(a)`
    pub dh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCgfPoint {
    pub z: Complex64,
    pub value: Complex64,
    pub branch_ok: bool,
}

fn radicand(theta: f64, c: f64, a: f64) -> Result<f64> {
    let r = theta * theta + 2.0 * a * c;
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::Domain {
            violated: format!("θ² + 2ac > 0 (got {r:e})"),
        })
    }
}

/// `(φ(a), τ(a), h(a))`.
pub fn cgf_parts(theta: f64, c: f64, a: f64) -> Result<CgfParts> {
    finite("theta", theta)?;
    finite("c", c)?;
    finite("a", a)?;
    let phi = -radicand(theta, c, a)?.sqrt();
    Ok(CgfParts {
        phi,
        tau: a + theta - phi,
        h_ratio: (a + theta) / phi,
    })
}

/// `φ(a) + a + θ`, which vanishes on the finite border of `Δ_c`.
///
/// Uses `(a+θ)² − φ² = a(a + 2θ − 2c)` to avoid cancellation.
pub fn border_gap(theta: f64, c: f64, a: f64, phi: f64) -> f64 {
    let s = a + theta;
    if s >= 0.0 {
        a * (a + 2.0 * theta - 2.0 * c) / (s - phi)
    } else {
        s + phi
    }
}

fn check_inside(theta: f64, c: f64, a: f64) -> Result<()> {
    let dom = effective_domain(theta, c)?;
    if !dom.contains(a) {
        return Err(Error::Domain {
            violated: format!(
                "a + θ < √(θ²+2ac) with θ²+2ac > 0 (a = {a}, Δ_c = ]{}, {}[)",
                dom.lower, dom.upper
            ),
        });
    }
    let m = dom.margin(a);
    if m < NEAR_BOUNDARY * a.abs().max(1.0) {
        return Err(Error::Boundary { distance: m });
    }
    Ok(())
}

/// Splits `L_T(a)` into `L + H/T + R_T/T`. Requires `a ∈ Δ_c`.
pub fn decompose(theta: f64, c: f64, a: f64, t: f64) -> Result<CgfDecomposition> {
    horizon(t)?;
    let p = cgf_parts(theta, c, a)?;
    check_inside(theta, c, a)?;
    let gap = border_gap(theta, c, a, p.phi);
    let big_l = -0.5 * p.tau;
    // ½(1+h) = gap/(2φ); (1−h)/(1+h) = −τ/gap.
    let big_h = -0.5 * (gap / (2.0 * p.phi)).ln();
    let remainder = -0.5 * (-p.tau / gap * (2.0 * p.phi * t).exp()).ln_1p();
    Ok(CgfDecomposition {
        phi: p.phi,
        tau: p.tau,
        h_ratio: p.h_ratio,
        big_l,
        big_h,
        remainder,
        assembled: big_l + (big_h + remainder) / t,
    })
}

/// Closed form `L_T(a) = −τ/2 − (1/2T) log(1 + (τ/2φ)(1 − e^{2φT}))`.
pub fn cgf_exact(theta: f64, c: f64, a: f64, t: f64) -> Result<f64> {
    horizon(t)?;
    let p = cgf_parts(theta, c, a)?;
    // 1 + (τ/2φ)(1 − e^{2φT}) = (gap − τe^{2φT})/(2φ), free of cancellation
    // when a + θ + φ is small.
    let gap = border_gap(theta, c, a, p.phi);
    let y = (gap - p.tau * (2.0 * p.phi * t).exp()) / (2.0 * p.phi);
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain {
            violated: format!("1 + (τ/2φ)(1 − e^{{2φT}}) > 0 (a = {a}, T = {t})"),
        });
    }
    Ok(-0.5 * p.tau - 0.5 * y.ln() / t)
}

/// Variance of `X_T` under the OU law with drift `φ(a)`:
/// `σ_T²(a) = −(1 − e^{2φT})/(2φ)`.
pub fn sigma_t_sq(phi: f64, t: f64) -> f64 {
    if phi == 0.0 {
        t
    } else {
        (2.0 * phi * t).exp_m1() / (2.0 * phi)
    }
}

/// `L′`, `L″` in closed form and `H′` (the latter needs `a ∈ Δ_c`).
pub fn cgf_derivatives(theta: f64, c: f64, a: f64) -> Result<CgfDerivatives> {
    let p = cgf_parts(theta, c, a)?;
    check_inside(theta, c, a)?;
    let s = -p.phi;
    let dl = -0.5 * (1.0 + c / s);
    let d2l = 0.5 * c * c / (s * s * s);
    let gap = border_gap(theta, c, a, p.phi);
    let dh = -0.5 * (p.phi * p.phi - c * (a + theta)) / (p.phi * p.phi * gap);
    Ok(CgfDerivatives { dl, d2l, dh })
}

fn on_cut(w: Complex64) -> bool {
    w.re <= 0.0 && w.im.abs() <= 1e-14 * w.re.abs().max(1e-300)
}

/// `φ(z) = −√(θ²+2zc)` with the principal square root. For `Re z ∈ Δ_c`
/// this equals `φ(a)·√(1 + 2icu/φ(a)²)`, whose argument has real part 1.
pub(crate) fn phi_complex(theta: f64, c: f64, z: Complex64) -> Complex64 {
    -(Complex64::new(theta * theta, 0.0) + z * (2.0 * c)).sqrt()
}

pub(crate) struct ComplexPieces {
    pub tau: Complex64,
    /// `H(z)`
    pub h: Complex64,
    /// `R_T(z)`
    pub r: Complex64,
    pub branch_ok: bool,
}

/// `H(z)` and `R_T(z)` with principal logarithms, for `Re z ∈ Δ_c`.
pub(crate) fn complex_pieces(theta: f64, c: f64, z: Complex64, t: f64) -> ComplexPieces {
    let phi = phi_complex(theta, c, z);
    let s = z + theta;
    let tau = s - phi;
    let gap = if s.re >= 0.0 {
        z * (z + 2.0 * theta - 2.0 * c) / tau
    } else {
        s + phi
    };
    let w_h = gap / (phi * 2.0);
    let w_r = Complex64::new(1.0, 0.0) - tau / gap * (phi * (2.0 * t)).exp();
    ComplexPieces {
        tau,
        h: -0.5 * w_h.ln(),
        r: -0.5 * w_r.ln(),
        branch_ok: !on_cut(w_h) && !on_cut(w_r),
    }
}

/// `L_T(z)` for complex `z` with principal branches.
///
/// When `Re z ∈ Δ_c` the decomposition route is used; otherwise the closed
/// form. `branch_ok` is false if a log argument lies on `]−∞, 0]`.
pub fn complex_cgf(theta: f64, c: f64, z: Complex64, t: f64) -> Result<ComplexCgfPoint> {
    horizon(t)?;
    finite("Re z", z.re)?;
    finite("Im z", z.im)?;
    let dom = finite_t_domain(theta, c, t)?;
    if !dom.contains(z.re) {
        return Err(Error::Domain {
            violated: format!("Re z inside ]{}, {}[", dom.lower, dom.upper),
        });
    }
    let limit = effective_domain(theta, c)?;
    if limit.contains(z.re) {
        let p = complex_pieces(theta, c, z, t);
        let value = -0.5 * p.tau + (p.h + p.r) / t;
        return Ok(ComplexCgfPoint {
            z,
            value,
            branch_ok: p.branch_ok,
        });
    }
    let phi = phi_complex(theta, c, z);
    let tau = z + theta - phi;
    let w = Complex64::new(1.0, 0.0)
        + tau / (phi * 2.0) * (Complex64::new(1.0, 0.0) - (phi * (2.0 * t)).exp());
    Ok(ComplexCgfPoint {
        z,
        value: -0.5 * tau - 0.5 * w.ln() / t,
        branch_ok: !on_cut(w),
    })
}

/// `log Φ_T(u) = T(L_T(α + iu/β) − L_T(α))`, evaluated in difference form so
/// that `Φ_T(0) = 1` exactly and no large terms cancel.
pub fn log_char_fn(theta: f64, c: f64, t: f64, alpha: f64, beta: f64, u: f64) -> Result<Complex64> {
    horizon(t)?;
    finite("alpha", alpha)?;
    finite("u", u)?;
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: "must be finite and non-zero".into(),
        });
    }
    let v = u / beta;
    let limit = effective_domain(theta, c)?;
    if !limit.contains(alpha) {
        let z = complex_cgf(theta, c, Complex64::new(alpha, v), t)?;
        let z0 = cgf_exact(theta, c, alpha, t)?;
        return Ok((z.value - z0) * t);
    }
    let z = Complex64::new(alpha, v);
    let w = Complex64::new(theta * theta + 2.0 * alpha * c, 2.0 * v * c);
    let s0 = (theta * theta + 2.0 * alpha * c).sqrt();
    // φ(z) − φ(α) = −(√w_z − √w_α) = −2ivc/(√w_z + √w_α)
    let dphi = -Complex64::new(0.0, 2.0 * v * c) / (w.sqrt() + s0);
    let dl = -0.5 * t * (Complex64::new(0.0, v) - dphi);
    let pz = complex_pieces(theta, c, z, t);
    let p0 = complex_pieces(theta, c, Complex64::new(alpha, 0.0), t);
    Ok(dl + (pz.h - p0.h) + (pz.r - p0.r))
}

/// Characteristic function `Φ_T(u)` of `Z_T(c)/β` under the tilted measure.
pub fn char_fn(theta: f64, c: f64, t: f64, alpha: f64, beta: f64, u: f64) -> Result<Complex64> {
    Ok(log_char_fn(theta, c, t, alpha, beta, u)?.exp())
}

/// `ℓ(a, c, θ) = max(1, |φ+θ|/|φ|)·max(1, |φ+2c−θ|/|φ|)`.
pub fn ell_constant(theta: f64, c: f64, a: f64) -> Result<f64> {
    let phi = cgf_parts(theta, c, a)?.phi;
    Ok(((phi + theta).abs() / phi.abs()).max(1.0)
        * ((phi + 2.0 * c - theta).abs() / phi.abs()).max(1.0))
}

/// Upper bound on `|exp(T(L_T(a+iv) − L_T(a)))|²`:
/// `4ℓ(1+x)^{1/4} exp(T c²v²/(2φ³)·(1+x)^{−3/4})` with `x = 4c²v²/φ⁴`.
pub fn char_bound(theta: f64, c: f64, a: f64, v: f64, t: f64) -> Result<f64> {
    horizon(t)?;
    finite("v", v)?;
    let phi = cgf_parts(theta, c, a)?.phi;
    let ell = ell_constant(theta, c, a)?;
    let phi2 = phi * phi;
    let x = 4.0 * c * c * v * v / (phi2 * phi2);
    let expo = t * c * c * v * v / (2.0 * phi2 * phi) * (1.0 + x).powf(-0.75);
    Ok(4.0 * ell * (1.0 + x).powf(0.25) * expo.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parts_examples() {
        let p = cgf_parts(0.0, -1.0, -2.0).unwrap();
        assert_eq!((p.phi, p.tau, p.h_ratio), (-2.0, 0.0, 1.0));
        let p = cgf_parts(1.0, 2.0, 1.0).unwrap();
        let r5 = 5f64.sqrt();
        assert_relative_eq!(p.phi, -r5, epsilon = 1e-15);
        assert_relative_eq!(p.tau, 2.0 + r5, epsilon = 1e-15);
        assert_relative_eq!(p.h_ratio, -2.0 / r5, epsilon = 1e-15);
        let p = cgf_parts(1.0, 2.0, 2.0 - 1e-12).unwrap();
        assert!((p.phi + 3.0).abs() < 1e-11);
        assert!(cgf_parts(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_point_is_zero() {
        let d = decompose(0.0, -1.0, -2.0, 3.0).unwrap();
        assert_eq!((d.big_l, d.big_h, d.remainder, d.assembled), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(cgf_exact(0.0, -1.0, -2.0, 7.0).unwrap(), 0.0);
    }

    #[test]
    fn two_routes_agree() {
        let d = decompose(1.0, 2.0, 1.0, 10.0).unwrap();
        let e = cgf_exact(1.0, 2.0, 1.0, 10.0).unwrap();
        assert!((d.assembled - e).abs() < 1e-14);
        let lim = -0.5 * (1.0 + 1.0 + 5f64.sqrt());
        assert_relative_eq!(cgf_exact(1.0, 2.0, 1.0, 1e6).unwrap(), lim, epsilon = 1e-5);
    }

    #[test]
    fn derivative_examples() {
        let d = cgf_derivatives(1.0, 0.5, -1e-3).unwrap();
        assert!((d.dl + 0.75).abs() < 1e-3);
        let d = cgf_derivatives(1.0, 2.0, 2.0 - 1e-6).unwrap();
        assert!((-d.dl - 5.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn outside_and_boundary_are_rejected() {
        assert!(matches!(
            decompose(1.0, 2.0, 2.5, 10.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            decompose(1.0, 2.0, 2.0 - 1e-12, 10.0),
            Err(Error::Boundary { .. })
        ));
    }

    #[test]
    fn complex_restricts_to_real() {
        for &(th, c, a, t) in &[(1.0, 2.0, 1.0, 10.0), (-1.0, -2.0, -0.75, 5.0), (1.0, 0.5, -0.3, 8.0)] {
            let z = complex_cgf(th, c, Complex64::new(a, 0.0), t).unwrap();
            let e = cgf_exact(th, c, a, t).unwrap();
            assert!((z.value.re - e).abs() < 1e-14 && z.value.im == 0.0);
            assert!(z.branch_ok);
        }
        // Outside Δ_c but inside the finite-T set: closed-form route.
        let z = complex_cgf(1.0, 2.0, Complex64::new(2.02, 0.0), 1.0).unwrap();
        assert!((z.value.re - cgf_exact(1.0, 2.0, 2.02, 1.0).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn char_fn_normalized_and_hermitian() {
        let (th, c, t) = (1.0, 2.0, 10.0);
        let alpha = 1.9;
        assert_eq!(char_fn(th, c, t, alpha, -t, 0.0).unwrap(), Complex64::new(1.0, 0.0));
        for k in 1..50 {
            let u = k as f64 * 0.7;
            let p = char_fn(th, c, t, alpha, -t, u).unwrap();
            let m = char_fn(th, c, t, alpha, -t, -u).unwrap();
            assert!((p - m.conj()).norm() < 1e-13);
            assert!(p.norm() <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn difference_form_matches_direct_form() {
        let (th, c, t, alpha, beta) = (-1.0, -2.0, 5.0, -0.75, 2.0);
        for &u in &[0.3, 1.0, 4.0] {
            let lf = log_char_fn(th, c, t, alpha, beta, u).unwrap();
            let z = complex_cgf(th, c, Complex64::new(alpha, u / beta), t).unwrap();
            let direct = (z.value - cgf_exact(th, c, alpha, t).unwrap()) * t;
            assert!((lf - direct).norm() < 1e-12);
        }
    }
}
