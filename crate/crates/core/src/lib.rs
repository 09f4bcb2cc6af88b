//! Sharp large deviations for the maximum-likelihood drift estimator of the
//! Ornstein-Uhlenbeck process `dX = θX dt + dB`, `X_0 = 0`.
//!
//! The crate provides the rate function, the normalized cumulant generating
//! function of `Z_T(c)`, the saddle point, the asymptotic tail expansions,
//! an independent Fourier-inversion oracle and Monte Carlo estimators.

pub mod cgf;
pub mod error;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod saddle;
pub mod sldp;

pub use error::{Error, Result};
pub use model::{
    classify_case, effective_domain, finite_t_domain, hermite_number, rate_function,
    EffectiveDomain, ModelSpec, Regime, Side,
};
