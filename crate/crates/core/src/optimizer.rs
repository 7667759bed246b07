//! Projected gradient descent on `F` and the ε-continuation loop.
//!
//! Each phase minimizes `j_ε` over `F ∩ B̄(ḡ, r/2)` starting from the previous
//! phase's result. Directions are `W`-Riesz representers of the gradient
//! (falling back to the `L²` gradient when that direction stalls). Iterates
//! are projected pointwise onto `F` and a step is accepted when
//!
//! ```text
//! j(g⁺) ≤ j(g) + c₁ ⟨∇j(g), g⁺ − g⟩_{L²}
//! ```
//!
//! which reduces to `j(g) − c₁·t·‖∇j‖²` for an unprojected `L²` step.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::density::{project_to_fs, Projection};
use crate::error::{Error, Result};
use crate::grid::{inner_l2, norm, Field, NormKind};
use crate::heaviside::Smoothing;
use crate::linalg::BandedCholesky;
use crate::objective::{check_in_f, gradient_at, j_eps, j_sharp, Objective, ProblemData, SharpValue};
use crate::pde::{solve_masked, MaskedSolve};
use crate::shapes::{default_tau, extract_shape, shape_distance, validate_fs, FsReport, ShapeMask};
use crate::wspace::{factor_gram, norm_w_sq};

/// Geometric schedule `ε₀, ρε₀, ρ²ε₀, … ≥ ε_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub eps_min: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            eps0: 0.1,
            ratio: 0.5,
            eps_min: 1e-4,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("ε ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite() && self.eps_min > 0.0 && self.eps_min.is_finite()) {
            return Err(Error::InvalidParameter("ε₀ and ε_min must be positive and finite".into()));
        }
        if self.eps0 < self.eps_min * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "empty ε schedule: ε₀ = {} < ε_min = {}",
                self.eps0, self.eps_min
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut eps = self.eps0;
        while eps >= self.eps_min * (1.0 - 1e-12) {
            out.push(eps);
            eps *= self.ratio;
        }
        out
    }
}

/// Metric in which descent directions are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    W,
    L2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Iterations per ε-phase.
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub step_floor: f64,
    /// Tolerance on the projected-gradient stationarity measure.
    pub grad_tol: f64,
    /// Radius `r` of the localization ball `B̄(ḡ, r/2)`; `None` is unbounded.
    pub radius: Option<f64>,
    pub schedule: EpsSchedule,
    pub metric: Metric,
    /// Relative `L²` target for the final `F_s` certification.
    pub certify_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 40,
            armijo_c1: 1e-4,
            initial_step: 1.0,
            shrink: 0.5,
            step_floor: 1e-10,
            grad_tol: 1e-8,
            radius: None,
            schedule: EpsSchedule::default(),
            metric: Metric::W,
            certify_tol: 0.05,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return bad("armijo c₁ must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("step shrink factor must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial step must be positive");
        }
        if !(self.step_floor > 0.0 && self.step_floor <= self.initial_step) {
            return bad("step floor must lie in (0, initial step]");
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("gradient tolerance must be positive");
        }
        if !(self.certify_tol > 0.0 && self.certify_tol.is_finite()) {
            return bad("certification tolerance must be positive");
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("ball radius must be positive");
            }
        }
        self.schedule.validate()
    }
}

/// Pointwise `L²` projection onto `F`, followed when `ball = (c, R)` is given
/// by alternating projections with `B̄(c, R)`.
pub fn project_f(g: &Field, ball: Option<(&Field, f64)>) -> Field {
    let grid = g.grid().clone();
    let clamp = |v: &mut [f64]| {
        for (k, x) in v.iter_mut().enumerate() {
            if grid.in_e(k) && *x > 0.0 {
                *x = 0.0;
            }
        }
    };
    let mut v = g.values().to_vec();
    clamp(&mut v);
    let Some((center, radius)) = ball else {
        return Field::from_vec(&grid, v);
    };
    for _ in 0..20 {
        let diff: Vec<f64> = v.iter().zip(center.values()).map(|(a, c)| a - c).collect();
        let dist = diff
            .iter()
            .enumerate()
            .map(|(k, d)| grid.weight(k) * d * d)
            .sum::<f64>()
            .sqrt();
        if dist <= radius + 1e-12 {
            break;
        }
        let s = radius / dist;
        for (x, (d, c)) in v.iter_mut().zip(diff.iter().zip(center.values())) {
            *x = c + s * d;
        }
        clamp(&mut v);
    }
    Field::from_vec(&grid, v)
}

/// Why a fixed-ε run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Stationary,
    StepFloor,
    MaxIters,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Stationary => "stationary",
            StopReason::StepFloor => "step_floor",
            StopReason::MaxIters => "max_iters",
        }
    }
}

/// One accepted iterate (iteration 0 is the starting point).
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub eps: f64,
    pub iter: usize,
    pub j: f64,
    pub tracking: f64,
    pub volume: f64,
    pub proximal: f64,
    pub step: f64,
    pub grad_norm: f64,
    /// `‖P_F(g − ∇j) − g‖_{L²}`.
    pub stationarity: f64,
    pub dist_anchor: f64,
    /// Symmetric-difference measure to the previous iterate's shape.
    pub shape_change: f64,
    pub direction: Metric,
}

impl IterRecord {
    pub const CSV_HEADER: &'static str =
        "eps,iter,j,tracking,volume,proximal,step,grad_norm,stationarity,dist_anchor,shape_change,direction";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.eps,
            self.iter,
            self.j,
            self.tracking,
            self.volume,
            self.proximal,
            self.step,
            self.grad_norm,
            self.stationarity,
            self.dist_anchor,
            self.shape_change,
            match self.direction {
                Metric::W => "w",
                Metric::L2 => "l2",
            }
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct OptimizerTrace {
    pub records: Vec<IterRecord>,
}

impl OptimizerTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(IterRecord::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Accepted values are nonincreasing within each ε-phase.
    pub fn is_monotone_per_phase(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[0].eps != w[1].eps || w[1].j <= w[0].j)
    }
}

/// Result of a fixed-ε run.
#[derive(Clone, Debug)]
pub struct FixedEpsRun {
    pub control: Field,
    pub value: Objective,
    pub trace: OptimizerTrace,
    pub stop: StopReason,
}

fn ball<'a>(data: &'a ProblemData, cfg: &OptimizerConfig) -> Option<(&'a Field, f64)> {
    cfg.radius.map(|r| (&data.anchor, 0.5 * r))
}

fn w_direction(chol: &BandedCholesky, grad: &Field) -> Field {
    let grid = grad.grid();
    let mut rhs: Vec<f64> = grad
        .values()
        .iter()
        .enumerate()
        .map(|(k, g)| -grid.weight(k) * g)
        .collect();
    chol.solve_in_place(&mut rhs);
    Field::from_vec(grid, rhs)
}

#[allow(clippy::too_many_arguments)]
fn record(
    data: &ProblemData,
    eps: f64,
    iter: usize,
    value: &Objective,
    grad: &Field,
    stationarity: f64,
    step: f64,
    shape_change: f64,
    direction: Metric,
    g: &Field,
) -> IterRecord {
    IterRecord {
        eps,
        iter,
        j: value.total,
        tracking: value.tracking,
        volume: value.volume,
        proximal: value.proximal,
        step,
        grad_norm: norm(grad, NormKind::L2D),
        stationarity,
        dist_anchor: norm(&g.sub(&data.anchor).expect("same grid"), NormKind::L2D),
        shape_change,
        direction,
    }
}

fn stationarity(g: &Field, grad: &Field, ball: Option<(&Field, f64)>) -> f64 {
    let trial = project_f(&g.axpy(-1.0, grad).expect("same grid"), ball);
    norm(&trial.sub(g).expect("same grid"), NormKind::L2D)
}

fn check_start(data: &ProblemData, g0: &Field, cfg: &OptimizerConfig) -> Result<()> {
    data.f.check_same_grid(g0)?;
    check_in_f(g0)?;
    if let Some((c, r)) = ball(data, cfg) {
        let d = norm(&g0.sub(c)?, NormKind::L2D);
        if d > r + 1e-10 {
            return Err(Error::Precondition(format!(
                "starting control lies outside the ball: ‖g − ḡ‖ = {d:.6e} > r/2 = {r:.6e}"
            )));
        }
    }
    Ok(())
}

fn run_fixed(
    data: &ProblemData,
    s: &Smoothing,
    g0: &Field,
    cfg: &OptimizerConfig,
    chol: Option<&BandedCholesky>,
) -> Result<FixedEpsRun> {
    check_start(data, g0, cfg)?;
    let ball = ball(data, cfg);
    let eps = s.eps();
    let mut g = g0.clone();
    let mut value = j_eps(data, s, &g)?;
    let mut grad = gradient_at(data, s, &g, &value)?;
    let mut stat = stationarity(&g, &grad, ball);
    let mut trace = OptimizerTrace::default();
    trace
        .records
        .push(record(data, eps, 0, &value, &grad, stat, 0.0, 0.0, cfg.metric, &g));

    let mut stop = StopReason::MaxIters;
    for iter in 1..=cfg.max_iters {
        if stat <= cfg.grad_tol {
            stop = StopReason::Stationary;
            break;
        }
        let mut directions = Vec::with_capacity(2);
        if let (Metric::W, Some(ch)) = (cfg.metric, chol) {
            directions.push((Metric::W, w_direction(ch, &grad)));
        }
        directions.push((Metric::L2, grad.scale(-1.0)));

        let mut accepted = None;
        'dirs: for (kind, dir) in directions {
            let mut t = cfg.initial_step;
            while t >= cfg.step_floor {
                let trial = project_f(&g.axpy(t, &dir)?, ball);
                let decrease = inner_l2(&grad, &trial.sub(&g)?)?;
                if decrease < 0.0 {
                    if let Ok(v) = j_eps(data, s, &trial) {
                        if v.total <= value.total + cfg.armijo_c1 * decrease {
                            accepted = Some((kind, t, trial, v));
                            break 'dirs;
                        }
                    }
                }
                t *= cfg.shrink;
            }
        }
        let Some((kind, t, trial, v)) = accepted else {
            stop = StopReason::StepFloor;
            break;
        };
        let (a, b) = shape_distance(&g, &trial)?;
        g = trial;
        value = v;
        grad = gradient_at(data, s, &g, &value)?;
        stat = stationarity(&g, &grad, ball);
        trace
            .records
            .push(record(data, eps, iter, &value, &grad, stat, t, a + b, kind, &g));
        if iter == cfg.max_iters && stat <= cfg.grad_tol {
            stop = StopReason::Stationary;
        }
    }
    Ok(FixedEpsRun {
        control: g,
        value,
        trace,
        stop,
    })
}

/// Projected gradient descent on `j_ε` for a fixed smoothing width.
pub fn minimize_fixed_eps(
    data: &ProblemData,
    s: &Smoothing,
    g0: &Field,
    cfg: &OptimizerConfig,
) -> Result<FixedEpsRun> {
    cfg.validate()?;
    let chol = match cfg.metric {
        Metric::W => Some(factor_gram(g0.grid())?),
        Metric::L2 => None,
    };
    run_fixed(data, s, g0, cfg, chol.as_ref())
}

/// Diagnostics at the end of one ε-phase.
#[derive(Clone, Debug)]
pub struct PhaseResult {
    pub eps: f64,
    pub control: Field,
    pub value: Objective,
    pub iterations: usize,
    pub stop: StopReason,
    /// `‖ḡ_ε − ḡ‖_W`.
    pub w_dist_anchor: f64,
    /// `∫_{D \ Ω_g} y²` with `Ω_g = {g < 0}`.
    pub exterior_mass: f64,
}

/// How the final control was placed in `F_s`.
#[derive(Clone, Debug)]
pub enum Certification {
    /// The control already passes the validator.
    Direct(FsReport),
    /// The control was replaced by its density-pipeline projection.
    Projected(Projection),
}

impl Certification {
    pub fn report(&self) -> &FsReport {
        match self {
            Certification::Direct(r) => r,
            Certification::Projected(p) => &p.report,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuationResult {
    /// Last relaxed control.
    pub control: Field,
    pub phases: Vec<PhaseResult>,
    pub trace: OptimizerTrace,
    pub certification: Certification,
    /// Certified control in `F_s`.
    pub certified: Field,
    pub shape: Arc<ShapeMask>,
    pub state: MaskedSolve,
    pub sharp: SharpValue,
}

impl ContinuationResult {
    /// `key=value` summary including the per-phase diagnostics.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (n, p) in self.phases.iter().enumerate() {
            let _ = writeln!(
                s,
                "phase={n} eps={:.6e} iterations={} stop={} j_eps={:.16e} w_dist_anchor={:.6e} exterior_mass={:.6e}",
                p.eps,
                p.iterations,
                p.stop.as_str(),
                p.value.total,
                p.w_dist_anchor,
                p.exterior_mass
            );
        }
        let cert = match &self.certification {
            Certification::Direct(_) => "direct".to_string(),
            Certification::Projected(p) => format!("projected m={} error={:.6e}", p.m, p.error),
        };
        let _ = writeln!(s, "certification={cert}");
        let _ = writeln!(s, "shape_area={:.16e}", self.shape.area());
        let _ = writeln!(s, "j_sharp={:.16e}", self.sharp.total);
        let _ = writeln!(s, "monotone_per_phase={}", self.trace.is_monotone_per_phase());
        s
    }
}

fn exterior_mass(g: &Field, y: &Field) -> f64 {
    let grid = g.grid();
    (0..grid.len())
        .filter(|&k| g.values()[k] >= 0.0)
        .map(|k| grid.weight(k) * y.values()[k].powi(2))
        .sum()
}

/// Certifies `g` into `F_s`, directly when possible and through the density
/// pipeline otherwise.
pub fn certify(g: &Field, rel_tol: f64, rng: &mut impl Rng) -> Result<(Field, Certification)> {
    let rep = validate_fs(g, default_tau(g));
    if rep.is_member() {
        return Ok((g.clone(), Certification::Direct(rep)));
    }
    let target = rel_tol * norm(g, NormKind::L2D);
    let proj = project_to_fs(g, target, rng)?;
    Ok((proj.field.clone(), Certification::Projected(proj)))
}

/// Warm-started minimization along the ε schedule, then certification, shape
/// extraction and the variable-domain solve.
pub fn continuation(
    data: &ProblemData,
    g_init: &Field,
    cfg: &OptimizerConfig,
    rng: &mut impl Rng,
) -> Result<ContinuationResult> {
    cfg.validate()?;
    check_start(data, g_init, cfg)?;
    let chol = match cfg.metric {
        Metric::W => Some(factor_gram(g_init.grid())?),
        Metric::L2 => None,
    };
    let mut g = g_init.clone();
    let mut phases = Vec::new();
    let mut trace = OptimizerTrace::default();
    for eps in cfg.schedule.values() {
        let s = Smoothing::new(eps)?;
        let run = run_fixed(data, &s, &g, cfg, chol.as_ref())?;
        let iterations = run.trace.records.len() - 1;
        trace.records.extend(run.trace.records);
        g = run.control;
        phases.push(PhaseResult {
            eps,
            w_dist_anchor: norm_w_sq(&g.sub(&data.anchor)?).sqrt(),
            exterior_mass: exterior_mass(&g, &run.value.state.y),
            control: g.clone(),
            value: run.value,
            iterations,
            stop: run.stop,
        });
    }
    let (certified, certification) = certify(&g, cfg.certify_tol, rng)?;
    let shape = Arc::new(extract_shape(&certified)?);
    let state = solve_masked(&data.beta, &shape, &data.f, &data.solver)?;
    let sharp = j_sharp(data, &certified)?;
    Ok(ContinuationResult {
        control: g,
        phases,
        trace,
        certification,
        certified,
        shape,
        state,
        sharp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{disk_quadratic, random_smooth};
    use crate::grid::{Grid, ObservationRegion};
    use crate::nonsmooth::NonsmoothMap;
    use crate::pde::{solve_state, SolverConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let mut c = OptimizerConfig::default();
        c.schedule.ratio = 1.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.schedule.eps_min = 1.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::default();
        c.armijo_c1 = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_schedule() {
        let v = EpsSchedule::default().values();
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 0.1);
        assert!((v[9] - 0.1 / 512.0).abs() < 1e-18);
        let single = EpsSchedule {
            eps0: 0.01,
            ratio: 0.5,
            eps_min: 0.01,
        };
        assert_eq!(single.values(), vec![0.01]);
    }

    #[test]
    fn projection_examples() {
        let g = grid(17);
        let neg = disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap();
        assert_eq!(project_f(&neg, None), neg);
        let p = project_f(&Field::constant(&g, 1.0), None);
        for k in 0..g.len() {
            assert_eq!(p.values()[k], if g.in_e(k) { 0.0 } else { 1.0 });
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ball_projection_lands_on_the_surface(seed in 0u64..10_000, r in 0.01f64..0.5) {
            let g = grid(17);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = project_f(&random_smooth(&g, &mut rng, 3, 1.0), None);
            let far = project_f(&center.add(&random_smooth(&g, &mut rng, 3, 5.0)).unwrap(), None);
            prop_assume!(norm(&far.sub(&center).unwrap(), NormKind::L2D) > r);
            let p = project_f(&far, Some((&center, r)));
            let d = norm(&p.sub(&center).unwrap(), NormKind::L2D);
            prop_assert!((d - r).abs() <= 1e-12);
            prop_assert!(check_in_f(&p).is_ok());
        }
    }

    fn inverse_problem(n: usize, alpha: f64) -> (ProblemData, Field) {
        let g = grid(n);
        let truth = disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap();
        let mut data = ProblemData::new(
            Field::constant(&g, 10.0),
            Field::zeros(&g),
            alpha,
            NonsmoothMap::smooth_reference(1.0).unwrap(),
            Field::zeros(&g),
            SolverConfig::default(),
        )
        .unwrap();
        let s = Smoothing::new(0.05).unwrap();
        data.y_d = solve_state(&data.beta, &s, &truth, &data.f, &data.solver).unwrap().y;
        (data, truth)
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let (mut data, truth) = inverse_problem(33, 0.0);
        data.anchor = truth.clone();
        let s = Smoothing::new(0.05).unwrap();
        let run = minimize_fixed_eps(&data, &s, &truth, &OptimizerConfig::default()).unwrap();
        assert_eq!(run.stop, StopReason::Stationary);
        assert!(run.trace.records.len() <= 2);
        assert_eq!(run.control, truth);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let (data, _) = inverse_problem(17, 0.0);
        let s = Smoothing::new(0.05).unwrap();
        let bad = Field::constant(data.f.grid(), 1.0);
        assert!(matches!(
            minimize_fixed_eps(&data, &s, &bad, &OptimizerConfig::default()),
            Err(Error::NotInF(_))
        ));
    }

    #[test]
    fn descent_in_the_quadratic_regime() {
        let (mut data, _) = inverse_problem(64, 0.0);
        data.anchor = Field::zeros(data.f.grid());
        let start = disk_quadratic(data.f.grid(), (0.5, 0.5), 0.2).unwrap();
        let s = Smoothing::new(0.05).unwrap();
        let cfg = OptimizerConfig {
            max_iters: 100,
            ..OptimizerConfig::default()
        };
        let run = minimize_fixed_eps(&data, &s, &start, &cfg).unwrap();
        let first = run.trace.records[0].j;
        let last = run.value.total;
        assert!(run.trace.is_monotone_per_phase());
        assert!(last <= 0.1 * first, "{first} → {last}");
        assert!(check_in_f(&run.control).is_ok());
    }

    #[test]
    fn ball_constraint_is_respected() {
        let (mut data, _) = inverse_problem(33, 0.0);
        data.anchor = disk_quadratic(data.f.grid(), (0.5, 0.5), 0.2).unwrap();
        let s = Smoothing::new(0.05).unwrap();
        let cfg = OptimizerConfig {
            radius: Some(0.02),
            max_iters: 15,
            ..OptimizerConfig::default()
        };
        let run = minimize_fixed_eps(&data, &s, &data.anchor.clone(), &cfg).unwrap();
        for r in &run.trace.records {
            assert!(r.dist_anchor <= 0.01 + 1e-10);
        }
    }

    #[test]
    fn single_phase_matches_fixed_eps() {
        let (mut data, _) = inverse_problem(33, 0.01);
        data.anchor = disk_quadratic(data.f.grid(), (0.5, 0.5), 0.3).unwrap();
        let start = disk_quadratic(data.f.grid(), (0.5, 0.5), 0.25).unwrap();
        let cfg = OptimizerConfig {
            max_iters: 5,
            schedule: EpsSchedule {
                eps0: 0.05,
                ratio: 0.5,
                eps_min: 0.05,
            },
            ..OptimizerConfig::default()
        };
        let fixed = minimize_fixed_eps(&data, &Smoothing::new(0.05).unwrap(), &start, &cfg).unwrap();
        let cont = continuation(&data, &start, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(cont.control, fixed.control);
        assert_eq!(cont.trace.records, fixed.trace.records);
    }
}
