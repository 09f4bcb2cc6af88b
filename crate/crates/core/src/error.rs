use thiserror::Error;

use crate::model::Regime;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {name}")]
    NonFinite { name: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("outside the effective domain: {violated}")]
    Domain { violated: String },

    #[error("within {distance:e} of the domain boundary")]
    Boundary { distance: f64 },

    #[error("no expansion available for regime {regime}")]
    NoExpansion { regime: Regime },

    #[error("no saddle-point series for regime {regime}")]
    NoSeries { regime: Regime },

    #[error("order {requested} unavailable for regime {regime} (max {max})")]
    OrderUnavailable {
        regime: Regime,
        requested: u32,
        max: u32,
    },

    #[error("saddle-point iteration did not converge (residual {residual:e})")]
    SaddleNotConverged { residual: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),
}

impl Error {
    /// Short machine-readable tag used by the command-line reports.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Domain { .. } => "domain",
            Error::Boundary { .. } => "boundary",
            Error::NoExpansion { .. } => "no_expansion",
            Error::NoSeries { .. } => "no_series",
            Error::OrderUnavailable { .. } => "order_unavailable",
            Error::SaddleNotConverged { .. } => "saddle_not_converged",
            Error::Quadrature(_) => "quadrature",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { name })
    }
}

pub(crate) fn horizon(t: f64) -> Result<f64> {
    finite("T", t)?;
    if t > 0.0 {
        Ok(t)
    } else {
        Err(Error::InvalidParameter {
            name: "T",
            reason: format!("must be positive, got {t}"),
        })
    }
}
