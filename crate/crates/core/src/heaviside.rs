//! The Heaviside function and its C¹ cubic regularization.

use crate::error::{Error, Result};
use crate::grid::Field;

/// `H(v) = 0` for `v ≤ 0`, `1` for `v > 0`.
#[inline]
pub fn heaviside(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Smoothing width `ε > 0` of the regularized Heaviside `H_ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothing {
    eps: f64,
}

impl Smoothing {
    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Smoothing { eps })
        } else {
            Err(Error::InvalidParameter(format!(
                "smoothing width must be positive and finite, got {eps}"
            )))
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `H_ε(v)`: zero for `v ≤ 0`, `v²(3ε − 2v)/ε³` on `(0, ε)`, one for `v ≥ ε`.
    #[inline]
    pub fn value(&self, v: f64) -> f64 {
        let e = self.eps;
        if v <= 0.0 {
            0.0
        } else if v >= e {
            1.0
        } else {
            v * v * (3.0 * e - 2.0 * v) / (e * e * e)
        }
    }

    /// `H_ε'(v) = 6v(ε − v)/ε³` on `(0, ε)`, zero elsewhere.
    #[inline]
    pub fn derivative(&self, v: f64) -> f64 {
        let e = self.eps;
        if v <= 0.0 || v >= e {
            0.0
        } else {
            6.0 * v * (e - v) / (e * e * e)
        }
    }

    pub fn apply(&self, g: &Field) -> Field {
        g.map(|v| self.value(v))
    }

    pub fn apply_derivative(&self, g: &Field) -> Field {
        g.map(|v| self.derivative(v))
    }
}

pub fn heaviside_field(g: &Field) -> Field {
    g.map(heaviside)
}
