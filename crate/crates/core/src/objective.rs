//! Reduced cost functionals and the adjoint gradient.
//!
//! ```text
//! J(g)   = ∫_E (𝒮(g) − y_d)² + α ∫_D 1 − H(g)
//! j_ε(g) = ∫_E (S_ε(g) − y_d)² + α ∫_D 1 − H_ε(g) + ½‖g − ḡ‖²_W
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{same_grid, Field};
use crate::heaviside::Smoothing;
use crate::nonsmooth::NonsmoothMap;
use crate::pde::{solve_adjoint, solve_masked, solve_state, MaskedSolve, SolverConfig, StateSolve};
use crate::shapes::{area_via_heaviside, default_tau, extract_shape, validate_fs};
use crate::wspace::{norm_w_sq, w_operator};

/// Which sign pattern of the data holds, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignCase {
    /// `f ≥ β(0)` on `D` and `y_d ≤ 0` on `E`.
    Upper,
    /// `f ≤ β(0)` on `D` and `y_d ≥ 0` on `E`.
    Lower,
}

/// Data of the control problem.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub f: Field,
    pub y_d: Field,
    pub alpha: f64,
    pub beta: NonsmoothMap,
    /// Anchor `ḡ` of the proximal term.
    pub anchor: Field,
    pub solver: SolverConfig,
}

impl ProblemData {
    pub fn new(
        f: Field,
        y_d: Field,
        alpha: f64,
        beta: NonsmoothMap,
        anchor: Field,
        solver: SolverConfig,
    ) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be ≥ 0, got {alpha}")));
        }
        f.check_same_grid(&y_d)?;
        f.check_same_grid(&anchor)?;
        solver.validate()?;
        Ok(ProblemData {
            f,
            y_d,
            alpha,
            beta,
            anchor,
            solver,
        })
    }

    pub fn sign_case(&self) -> Option<SignCase> {
        let grid = self.f.grid();
        let b0 = self.beta.at_zero();
        let f = self.f.values();
        let yd = self.y_d.values();
        let on_e = |pred: &dyn Fn(f64) -> bool| (0..grid.len()).filter(|&k| grid.in_e(k)).all(|k| pred(yd[k]));
        if f.iter().all(|&v| v >= b0) && on_e(&|v| v <= 0.0) {
            Some(SignCase::Upper)
        } else if f.iter().all(|&v| v <= b0) && on_e(&|v| v >= 0.0) {
            Some(SignCase::Lower)
        } else {
            None
        }
    }

    fn check_grid(&self, g: &Field) -> Result<()> {
        if same_grid(self.f.grid(), g.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// `∫_E (y − y_d)²`.
pub fn tracking(y: &Field, y_d: &Field) -> f64 {
    let grid = y.grid();
    (0..grid.len())
        .filter(|&k| grid.in_e(k))
        .map(|k| grid.weight(k) * (y.values()[k] - y_d.values()[k]).powi(2))
        .sum()
}

/// Value of the sharp functional with its parts.
#[derive(Clone, Debug)]
pub struct SharpValue {
    pub total: f64,
    pub tracking: f64,
    pub volume: f64,
    pub state: MaskedSolve,
}

pub fn j_sharp(data: &ProblemData, g: &Field) -> Result<SharpValue> {
    data.check_grid(g)?;
    let rep = validate_fs(g, default_tau(g));
    if !rep.is_member() {
        return Err(Error::NotInFs(format!("g ∉ F_s: {}", rep.failures().join(", "))));
    }
    let mask = Arc::new(extract_shape(g)?);
    let state = solve_masked(&data.beta, &mask, &data.f, &data.solver)?;
    let tr = tracking(&state.y, &data.y_d);
    let volume = data.alpha * area_via_heaviside(g);
    Ok(SharpValue {
        total: tr + volume,
        tracking: tr,
        volume,
        state,
    })
}

/// Value of the regularized functional with its parts.
#[derive(Clone, Debug)]
pub struct Objective {
    pub total: f64,
    pub tracking: f64,
    pub volume: f64,
    pub proximal: f64,
    pub state: StateSolve,
}

impl Objective {
    /// `key=value` breakdown.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "j_eps={:.16e}", self.total);
        let _ = writeln!(s, "tracking={:.16e}", self.tracking);
        let _ = writeln!(s, "volume={:.16e}", self.volume);
        let _ = writeln!(s, "proximal={:.16e}", self.proximal);
        s
    }
}

/// Errors unless `g ≤ 0` on every node of `E`.
pub fn check_in_f(g: &Field) -> Result<()> {
    let grid = g.grid();
    match (0..grid.len()).find(|&k| grid.in_e(k) && g.values()[k] > 0.0) {
        Some(k) => Err(Error::NotInF(format!(
            "g ∉ F: g = {} > 0 at E node {:?}",
            g.values()[k],
            grid.ij(k)
        ))),
        None => Ok(()),
    }
}

pub fn j_eps(data: &ProblemData, s: &Smoothing, g: &Field) -> Result<Objective> {
    data.check_grid(g)?;
    check_in_f(g)?;
    let state = solve_state(&data.beta, s, g, &data.f, &data.solver)?;
    let tr = tracking(&state.y, &data.y_d);
    let grid = g.grid();
    let volume = data.alpha
        * g.values()
            .iter()
            .enumerate()
            .map(|(k, &v)| grid.weight(k) * (1.0 - s.value(v)))
            .sum::<f64>();
    let proximal = 0.5 * norm_w_sq(&g.sub(&data.anchor)?);
    Ok(Objective {
        total: tr + volume + proximal,
        tracking: tr,
        volume,
        proximal,
        state,
    })
}

/// Gradient of [`j_ε`](j_eps) from an already computed value at `g`.
pub fn gradient_at(data: &ProblemData, s: &Smoothing, g: &Field, value: &Objective) -> Result<Field> {
    let y = &value.state.y;
    let p = solve_adjoint(&data.beta, s, g, y, &data.y_d, &data.solver)?;
    let w = w_operator(&g.sub(&data.anchor)?);
    let eps = s.eps();
    let source = if data.solver.eps_source { eps } else { 0.0 };
    let values = (0..g.len())
        .map(|k| {
            let hp = s.derivative(g.values()[k]);
            let pk = p.values()[k];
            source * pk - hp * y.values()[k] * pk / eps - data.alpha * hp + w.values()[k]
        })
        .collect();
    Field::new(g.grid(), values)
}

/// `L²` Riesz representer of the derivative of `j_ε`, with the value.
pub fn gradient_j_eps(data: &ProblemData, s: &Smoothing, g: &Field) -> Result<(Objective, Field)> {
    let value = j_eps(data, s, g)?;
    let grad = gradient_at(data, s, g, &value)?;
    Ok((value, grad))
}
