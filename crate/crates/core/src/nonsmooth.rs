//! Monotone, locally Lipschitz nonlinearities `β` and their Nemytskii action.
//!
//! Every kind is single valued and non-decreasing. `subderivative` returns the
//! right derivative, which lies in the Clarke subdifferential at kinks.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Continuous piecewise-linear map given by its kinks, slopes and value at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    offset: f64,
}

impl PiecewiseLinear {
    /// `slopes` has one more entry than `breakpoints`; `offset = β(0)`.
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, offset: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if slopes.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "slopes must be finite and non-negative (β monotone)".into(),
            ));
        }
        if !offset.is_finite() || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(PiecewiseLinear {
            breakpoints,
            slopes,
            offset,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn piece(&self, y: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= y)
    }

    /// `∫_0^y s(t) dt` for the piecewise-constant slope function `s`.
    fn slope_integral(&self, y: f64) -> f64 {
        let (lo, hi, sign) = if y >= 0.0 { (0.0, y, 1.0) } else { (y, 0.0, -1.0) };
        let acc: f64 = self
            .slopes
            .iter()
            .enumerate()
            .map(|(p, &s)| {
                let left = if p == 0 { f64::NEG_INFINITY } else { self.breakpoints[p - 1] };
                let right = self.breakpoints.get(p).copied().unwrap_or(f64::INFINITY);
                s * (right.min(hi) - left.max(lo)).max(0.0)
            })
            .sum();
        sign * acc
    }

    fn value(&self, y: f64) -> f64 {
        self.offset + self.slope_integral(y)
    }

    /// `∫_0^y β(t) dt`, exact since β is linear on each piece.
    fn primitive(&self, y: f64) -> f64 {
        let (lo, hi, sign) = if y >= 0.0 { (0.0, y, 1.0) } else { (y, 0.0, -1.0) };
        let mut nodes = vec![lo];
        nodes.extend(self.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
        nodes.push(hi);
        let total: f64 = nodes
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1])))
            .sum();
        sign * total
    }

    fn lipschitz(&self, m: f64) -> f64 {
        (0..self.slopes.len())
            .filter(|&p| {
                let left = if p == 0 { f64::NEG_INFINITY } else { self.breakpoints[p - 1] };
                let right = self.breakpoints.get(p).copied().unwrap_or(f64::INFINITY);
                left < m && right > -m
            })
            .map(|p| self.slopes[p])
            .fold(0.0, f64::max)
    }
}

/// The nonlinearity `β` of the state equation.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum NonsmoothMap {
    /// `max{y, 0}`.
    #[default]
    Max0,
    /// `½(|y − a| + y − a)`, kink at `a`.
    AbsShifted { shift: f64 },
    PiecewiseLinear(PiecewiseLinear),
    /// `c·y` with `c ≥ 0`; differentiable everywhere.
    SmoothReference { slope: f64 },
}

impl NonsmoothMap {
    pub fn smooth_reference(slope: f64) -> Result<Self> {
        if slope >= 0.0 && slope.is_finite() {
            Ok(NonsmoothMap::SmoothReference { slope })
        } else {
            Err(Error::InvalidParameter(format!(
                "reference slope must be non-negative, got {slope}"
            )))
        }
    }

    pub fn abs_shifted(shift: f64) -> Result<Self> {
        if shift.is_finite() {
            Ok(NonsmoothMap::AbsShifted { shift })
        } else {
            Err(Error::InvalidParameter("non-finite shift".into()))
        }
    }

    /// Builds a map from its configuration name and parameter list.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "β kind `{name}` takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "max0" => {
                want(0)?;
                Ok(NonsmoothMap::Max0)
            }
            "abs_shifted" => {
                want(1)?;
                NonsmoothMap::abs_shifted(params[0])
            }
            "smooth_reference" => {
                want(1)?;
                NonsmoothMap::smooth_reference(params[0])
            }
            // offset, then k breakpoints, then k + 1 slopes
            "piecewise_linear" => {
                if params.len() < 2 || !params.len().is_multiple_of(2) {
                    return Err(Error::InvalidParameter(
                        "piecewise_linear takes [offset, b_1..b_k, s_0..s_k]".into(),
                    ));
                }
                let k = (params.len() - 2) / 2;
                let offset = params[0];
                let bps = params[1..1 + k].to_vec();
                let slopes = params[1 + k..].to_vec();
                Ok(NonsmoothMap::PiecewiseLinear(PiecewiseLinear::new(
                    bps, slopes, offset,
                )?))
            }
            other => Err(Error::InvalidParameter(format!("unknown β kind `{other}`"))),
        }
    }

    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        match self {
            NonsmoothMap::Max0 => y.max(0.0),
            NonsmoothMap::AbsShifted { shift } => (y - shift).max(0.0),
            NonsmoothMap::PiecewiseLinear(p) => p.value(y),
            NonsmoothMap::SmoothReference { slope } => slope * y,
        }
    }

    /// Right derivative of β at `y`.
    #[inline]
    pub fn right_derivative(&self, y: f64) -> f64 {
        match self {
            NonsmoothMap::Max0 => {
                if y >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            NonsmoothMap::AbsShifted { shift } => {
                if y >= *shift {
                    1.0
                } else {
                    0.0
                }
            }
            NonsmoothMap::PiecewiseLinear(p) => p.slopes[p.piece(y)],
            NonsmoothMap::SmoothReference { slope } => *slope,
        }
    }

    /// `∫_0^y β(t) dt`; convex because β is non-decreasing.
    pub fn primitive(&self, y: f64) -> f64 {
        match self {
            NonsmoothMap::Max0 => 0.5 * y.max(0.0).powi(2),
            NonsmoothMap::AbsShifted { shift } => {
                0.5 * (y - shift).max(0.0).powi(2) - 0.5 * (-shift).max(0.0).powi(2)
            }
            NonsmoothMap::PiecewiseLinear(p) => p.primitive(y),
            NonsmoothMap::SmoothReference { slope } => 0.5 * slope * y * y,
        }
    }

    /// Lipschitz constant of β on `[−M, M]`.
    pub fn lipschitz_constant(&self, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::InvalidParameter(format!("M must be positive, got {m}")));
        }
        Ok(match self {
            NonsmoothMap::Max0 => 1.0,
            NonsmoothMap::AbsShifted { .. } => 1.0,
            NonsmoothMap::PiecewiseLinear(p) => p.lipschitz(m),
            NonsmoothMap::SmoothReference { slope } => *slope,
        })
    }

    /// Largest slope anywhere.
    pub fn max_slope(&self) -> f64 {
        match self {
            NonsmoothMap::PiecewiseLinear(p) => p.slopes.iter().copied().fold(0.0, f64::max),
            NonsmoothMap::SmoothReference { slope } => *slope,
            _ => 1.0,
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.value(0.0)
    }

    pub fn apply(&self, y: &Field) -> Field {
        y.map(|v| self.value(v))
    }

    pub fn subderivative(&self, y: &Field) -> Field {
        y.map(|v| self.right_derivative(v))
    }
}
