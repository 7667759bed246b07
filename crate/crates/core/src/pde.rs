//! State, masked and adjoint solvers.
//!
//! All solves share one discrete operator: the five-point Laplacian `A` acting
//! on an *active* node set (interior nodes of `D`, or the nodes of a shape
//! component), with every other node held at zero. The nonlinear equation
//!
//! ```text
//! F(y) = A y + β(y) + c·y − r = 0     on active nodes
//! ```
//!
//! is solved by a damped semismooth Newton method. `F` is the gradient of the
//! convex energy `½yᵀAy + ΣB(y) + ½Σc·y² − rᵀy` (`B' = β`), which drives the
//! backtracking; a Picard iteration takes over if backtracking stalls.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{norm, Field, Grid, NormKind};
use crate::heaviside::Smoothing;
use crate::linalg::pcg;
use crate::nonsmooth::NonsmoothMap;
use crate::shapes::ShapeMask;

/// Tolerances and switches for the nonlinear and linear solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Keep the `+εg` source term.
    pub eps_source: bool,
    /// Relative tolerance: `‖F‖ ≤ tol·(1 + ‖r‖)` in discrete `L²`.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_source: true,
            newton_tol: 1e-10,
            max_newton: 200,
            cg_rtol: 1e-12,
            cg_max_iter: 50_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.cg_rtol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_newton == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a nonlinear solve.
#[derive(Clone, Debug)]
pub struct StateSolve {
    pub y: Field,
    pub iterations: usize,
    /// Discrete `L²` norm of the final residual.
    pub residual: f64,
    pub tolerance: f64,
    pub history: Vec<f64>,
    pub picard_steps: usize,
    pub cg_iterations: usize,
}

impl StateSolve {
    /// `key=value` lines.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "solver=semismooth_newton");
        let _ = writeln!(s, "iterations={}", self.iterations);
        let _ = writeln!(s, "residual={:.6e}", self.residual);
        let _ = writeln!(s, "tolerance={:.6e}", self.tolerance);
        let _ = writeln!(s, "picard_steps={}", self.picard_steps);
        let _ = writeln!(s, "cg_iterations={}", self.cg_iterations);
        let _ = writeln!(s, "max_abs_y={:.6e}", self.y.max_abs());
        s
    }
}

/// Solution of the variable-domain problem on a shape component.
#[derive(Clone, Debug)]
pub struct MaskedSolve {
    pub y: Field,
    pub mask: Arc<ShapeMask>,
    pub solve: StateSolve,
}

/// The active-set operator `A + diag(d)` with zero values off the set.
struct System<'a> {
    grid: &'a Arc<Grid>,
    active: Vec<usize>,
}

impl<'a> System<'a> {
    fn new(grid: &'a Arc<Grid>, is_active: Vec<bool>) -> Self {
        let active = (0..grid.len()).filter(|&k| is_active[k]).collect();
        System { grid, active }
    }

    fn interior(grid: &'a Arc<Grid>) -> Self {
        System::new(grid, (0..grid.len()).map(|k| !grid.is_boundary(k)).collect())
    }

    /// `out = (A + diag(d)) x` on active nodes, zero elsewhere.
    fn apply(&self, d: &[f64], x: &[f64], out: &mut [f64]) {
        let nx = self.grid.nx();
        let ih2 = 1.0 / (self.grid.h() * self.grid.h());
        out.iter_mut().for_each(|v| *v = 0.0);
        for &k in &self.active {
            let lap = 4.0 * x[k] - x[k - 1] - x[k + 1] - x[k - nx] - x[k + nx];
            out[k] = ih2 * lap + d[k] * x[k];
        }
    }

    fn inv_diag(&self, d: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let mut inv = vec![0.0; self.grid.len()];
        for &k in &self.active {
            inv[k] = 1.0 / (4.0 / (h * h) + d[k]);
        }
        inv
    }

    fn l2(&self, v: &[f64]) -> f64 {
        self.active
            .iter()
            .map(|&k| self.grid.weight(k) * v[k] * v[k])
            .sum::<f64>()
            .sqrt()
    }

    fn linear_solve(&self, d: &[f64], b: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
        let inv = self.inv_diag(d);
        let mut x = vec![0.0; b.len()];
        let rep = pcg(
            |v, out| self.apply(d, v, out),
            &inv,
            b,
            &mut x,
            cfg.cg_rtol,
            cfg.cg_max_iter,
        )?;
        Ok((x, rep.iterations))
    }

    fn residual(&self, beta: &NonsmoothMap, c: &[f64], r: &[f64], y: &[f64], out: &mut [f64]) {
        self.apply(c, y, out);
        for &k in &self.active {
            out[k] += beta.value(y[k]) - r[k];
        }
    }

    fn energy(&self, beta: &NonsmoothMap, c: &[f64], r: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; y.len()];
        self.apply(c, y, &mut ay);
        self.active
            .iter()
            .map(|&k| 0.5 * y[k] * ay[k] + beta.primitive(y[k]) - r[k] * y[k])
            .sum()
    }

    /// Solves `A y + β(y) + c·y = r` on the active set, starting from zero.
    fn solve(
        &self,
        beta: &NonsmoothMap,
        c: &[f64],
        r: &[f64],
        cfg: &SolverConfig,
    ) -> Result<(Vec<f64>, StateSolve)> {
        cfg.validate()?;
        let n = self.grid.len();
        let mut masked_r = vec![0.0; n];
        for &k in &self.active {
            masked_r[k] = r[k];
        }
        let r = masked_r;
        let tol = cfg.newton_tol * (1.0 + self.l2(&r));
        let mut y = vec![0.0; n];
        let mut f = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        let mut history = Vec::new();
        let mut picard_steps = 0;
        let mut cg_total = 0;
        self.residual(beta, c, &r, &y, &mut f);
        let mut fnorm = self.l2(&f);
        history.push(fnorm);

        for it in 0..cfg.max_newton {
            if !fnorm.is_finite() {
                return Err(Error::NonFinite("state residual"));
            }
            if fnorm <= tol {
                let solve = self.finish(y.clone(), it, fnorm, tol, history, picard_steps, cg_total);
                return Ok((y, solve));
            }
            let mut jd = c.to_vec();
            for &k in &self.active {
                jd[k] += beta.right_derivative(y[k]);
            }
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let (d, cg_it) = self.linear_solve(&jd, &neg_f, cfg)?;
            cg_total += cg_it;

            let slope: f64 = self.active.iter().map(|&k| f[k] * d[k]).sum();
            let e0 = self.energy(beta, c, &r, &y);
            let mut t = 1.0;
            let mut accepted = None;
            while t >= 1e-12 {
                let trial: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                self.residual(beta, c, &r, &trial, &mut f_trial);
                let tn = self.l2(&f_trial);
                if tn <= 0.9 * fnorm
                    || (slope < 0.0 && self.energy(beta, c, &r, &trial) <= e0 + 1e-4 * t * slope)
                {
                    accepted = Some((trial, tn));
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some((trial, tn)) => {
                    y = trial;
                    std::mem::swap(&mut f, &mut f_trial);
                    fnorm = tn;
                }
                None => {
                    // Picard: (A + c + L) y⁺ = r − β(y) + L y
                    let l = beta.max_slope();
                    let shifted: Vec<f64> = c.iter().map(|v| v + l).collect();
                    let mut rhs = vec![0.0; n];
                    for &k in &self.active {
                        rhs[k] = r[k] - beta.value(y[k]) + l * y[k];
                    }
                    let (next, cg_it) = self.linear_solve(&shifted, &rhs, cfg)?;
                    cg_total += cg_it;
                    picard_steps += 1;
                    y = next;
                    self.residual(beta, c, &r, &y, &mut f);
                    fnorm = self.l2(&f);
                }
            }
            history.push(fnorm);
        }
        if fnorm <= tol {
            let solve = self.finish(y.clone(), cfg.max_newton, fnorm, tol, history, picard_steps, cg_total);
            return Ok((y, solve));
        }
        Err(Error::NotConverged {
            solver: "semismooth newton",
            iterations: cfg.max_newton,
            last: fnorm,
            history,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        y: Vec<f64>,
        iterations: usize,
        residual: f64,
        tolerance: f64,
        history: Vec<f64>,
        picard_steps: usize,
        cg_iterations: usize,
    ) -> StateSolve {
        StateSolve {
            y: Field::from_vec(self.grid, y),
            iterations,
            residual,
            tolerance,
            history,
            picard_steps,
            cg_iterations,
        }
    }
}

fn check_inputs(grid: &Arc<Grid>, fields: &[&Field]) -> Result<()> {
    for f in fields {
        if !crate::grid::same_grid(grid, f.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// Reaction coefficient `H_ε(g)/ε`.
pub fn penalty_coefficient(s: &Smoothing, g: &Field) -> Vec<f64> {
    g.values().iter().map(|&v| s.value(v) / s.eps()).collect()
}

/// Solves `−Δy + β(y) + (1/ε)H_ε(g)y = f + εg` in `D`, `y = 0` on `∂D`.
pub fn solve_state(
    beta: &NonsmoothMap,
    s: &Smoothing,
    g: &Field,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<StateSolve> {
    let grid = g.grid();
    check_inputs(grid, &[f])?;
    let c = penalty_coefficient(s, g);
    let r: Vec<f64> = if cfg.eps_source {
        f.values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a + s.eps() * b)
            .collect()
    } else {
        f.values().to_vec()
    };
    let sys = System::interior(grid);
    Ok(sys.solve(beta, &c, &r, cfg)?.1)
}

/// Solves `−Δy + β(y) = f` on the component of `mask`, `y = 0` elsewhere.
pub fn solve_masked(
    beta: &NonsmoothMap,
    mask: &Arc<ShapeMask>,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<MaskedSolve> {
    let grid = f.grid();
    if mask.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: mask.len(),
        });
    }
    if (0..grid.len()).any(|k| grid.in_e(k) && !mask.component()[k]) {
        return Err(Error::ENotInsideShape(
            "mask component does not contain every node of E".into(),
        ));
    }
    let sys = System::new(grid, mask.component().to_vec());
    let c = vec![0.0; grid.len()];
    let (_, solve) = sys.solve(beta, &c, f.values(), cfg)?;
    Ok(MaskedSolve {
        y: solve.y.clone(),
        mask: Arc::clone(mask),
        solve,
    })
}

/// The linearized state operator `A + diag(β'(y) + H_ε(g)/ε)` on interior nodes.
pub struct Linearized<'a> {
    sys: System<'a>,
    diag: Vec<f64>,
    cfg: SolverConfig,
}

impl<'a> Linearized<'a> {
    pub fn new(
        beta: &NonsmoothMap,
        s: &Smoothing,
        g: &'a Field,
        y: &Field,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        g.check_same_grid(y)?;
        let grid = g.grid();
        let mut diag = penalty_coefficient(s, g);
        for (d, &v) in diag.iter_mut().zip(y.values()) {
            *d += beta.right_derivative(v);
        }
        Ok(Linearized {
            sys: System::interior(grid),
            diag,
            cfg: cfg.clone(),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.sys.apply(&self.diag, x, &mut out);
        out
    }

    /// Solves on interior nodes; boundary entries of `b` are ignored.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; b.len()];
        for &k in &self.sys.active {
            rhs[k] = b[k];
        }
        Ok(self.sys.linear_solve(&self.diag, &rhs, &self.cfg)?.0)
    }
}

/// Adjoint state: `(−Δ + β'(y) + H_ε(g)/ε) p = 2(y − y_d)χ_E`, `p = 0` on `∂D`.
pub fn solve_adjoint(
    beta: &NonsmoothMap,
    s: &Smoothing,
    g: &Field,
    y: &Field,
    y_d: &Field,
    cfg: &SolverConfig,
) -> Result<Field> {
    check_inputs(g.grid(), &[y, y_d])?;
    let grid = g.grid();
    let b: Vec<f64> = (0..grid.len())
        .map(|k| {
            if grid.in_e(k) {
                2.0 * (y.values()[k] - y_d.values()[k])
            } else {
                0.0
            }
        })
        .collect();
    let lin = Linearized::new(beta, s, g, y, cfg)?;
    Ok(Field::from_vec(grid, lin.solve(&b)?))
}

/// Norms entering the a-priori bound `‖y‖ ≤ c₁ + c₂‖g‖_{L²}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AprioriSample {
    pub g_l2: f64,
    pub y_h1: f64,
    pub y_inf: f64,
}

pub fn apriori_sample(solve: &StateSolve, g: &Field) -> AprioriSample {
    AprioriSample {
        g_l2: norm(g, NormKind::L2D),
        y_h1: norm(&solve.y, NormKind::H1D),
        y_inf: solve.y.max_abs(),
    }
}

/// Affine envelope `c₁ + c₂·x` over a batch of samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AprioriFit {
    /// Least-squares coefficients of `‖y‖_{H¹}` against `‖g‖_{L²}`.
    pub c1: f64,
    pub c2: f64,
    /// Intercept raised so that every sample lies on or below the line.
    pub envelope_c1: f64,
    pub max_h1: f64,
}

impl AprioriFit {
    pub fn envelope(&self, g_l2: f64) -> f64 {
        self.envelope_c1 + self.c2 * g_l2
    }

    /// Whether every sample satisfies `y_h1 ≤ (1 + slack)·envelope(g_l2)`.
    pub fn covers(&self, samples: &[AprioriSample], slack: f64) -> bool {
        samples
            .iter()
            .all(|s| s.y_h1 <= (1.0 + slack) * self.envelope(s.g_l2) + 1e-14)
    }
}

pub fn fit_apriori(samples: &[AprioriSample]) -> Result<AprioriFit> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empty sample batch".into()));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.g_l2).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.y_h1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.g_l2 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.g_l2 - mx) * (s.y_h1 - my)).sum();
    let c2 = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let c1 = my - c2 * mx;
    let lift = samples
        .iter()
        .map(|s| s.y_h1 - (c1 + c2 * s.g_l2))
        .fold(0.0, f64::max);
    Ok(AprioriFit {
        c1,
        c2,
        envelope_c1: c1 + lift,
        max_h1: samples.iter().map(|s| s.y_h1).fold(0.0, f64::max),
    })
}

/// `‖S_ε(g₁) − S_ε(g₂)‖_{H¹} / ‖g₁ − g₂‖_{L²}`.
pub fn lipschitz_ratio(
    beta: &NonsmoothMap,
    s: &Smoothing,
    g1: &Field,
    g2: &Field,
    f: &Field,
    cfg: &SolverConfig,
) -> Result<f64> {
    let dg = norm(&g1.sub(g2)?, NormKind::L2D);
    if dg == 0.0 {
        return Err(Error::InvalidParameter("controls coincide".into()));
    }
    let y1 = solve_state(beta, s, g1, f, cfg)?.y;
    let y2 = solve_state(beta, s, g2, f, cfg)?.y;
    Ok(norm(&y1.sub(&y2)?, NormKind::H1D) / dg)
}
