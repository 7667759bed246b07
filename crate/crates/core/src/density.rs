//! Constructive approximation of relaxed controls by admissible shape functions.
//!
//! Three stages, each landing in a smaller class:
//!
//! 1. [`clamp_and_mollify`]: clamp to `min{g, 0}` near `E`, extend by zero and
//!    convolve with a scaled bump. Output is `≤ 0` on `E`.
//! 2. [`boundary_lift`]: add a collar that makes the field positive on `∂D`.
//! 3. [`sard_shift`]: shift by a small random `δ` whose level set avoids flat
//!    regions, then add a bump outside the shifted shape. Output passes
//!    [`validate_fs`](crate::shapes::validate_fs).
//!
//! [`project_to_fs`] composes the stages with increasing scale `m`.

use rand::Rng;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{norm, Field, Grid, NormKind};
use crate::shapes::{default_tau, smootherstep, validate_fs, FsReport};

const SARD_RETRIES: usize = 50;

/// Discrete bump `ψ_m`: the separable profile `(1 − s₁²)³(1 − s₂²)³` sampled
/// at grid offsets `|t| ≤ R = ⌊1/(m h)⌋` and normalized to unit mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    m: usize,
    radius: usize,
    weights: Vec<f64>,
}

impl Mollifier {
    pub fn new(grid: &Grid, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("scale index m must be positive".into()));
        }
        let radius = (1.0 / (m as f64 * grid.h()) + 1e-9).floor() as usize;
        let weights = if radius == 0 {
            vec![1.0]
        } else {
            let raw: Vec<f64> = (-(radius as isize)..=radius as isize)
                .map(|t| {
                    let s = t as f64 / radius as f64;
                    (1.0 - s * s).powi(3)
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        };
        Ok(Mollifier { m, radius, weights })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Support half-width in grid steps.
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// One-dimensional factor; the 2D kernel is its tensor square.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ ψ_m`, which equals `∫ψ_m` in units of the cell area.
    pub fn mass(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        s * s
    }

    /// Zero-extended separable convolution.
    pub fn convolve(&self, field: &Field) -> Field {
        let grid = field.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let r = self.radius as isize;
        let v = field.values();
        let mut tmp = vec![0.0; v.len()];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                for (t, w) in (-r..=r).zip(&self.weights) {
                    let ii = i as isize + t;
                    if ii >= 0 && (ii as usize) < nx {
                        acc += w * v[j * nx + ii as usize];
                    }
                }
                tmp[j * nx + i] = acc;
            }
        }
        let mut out = vec![0.0; v.len()];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = 0.0;
                for (t, w) in (-r..=r).zip(&self.weights) {
                    let jj = j as isize + t;
                    if jj >= 0 && (jj as usize) < ny {
                        acc += w * tmp[jj as usize * nx + i];
                    }
                }
                out[j * nx + i] = acc;
            }
        }
        Field::from_vec(grid, out)
    }
}

fn check_nonpositive_on_e(g: &Field) -> Result<()> {
    let grid = g.grid();
    match (0..grid.len()).find(|&k| grid.in_e(k) && g.values()[k] > 0.0) {
        Some(k) => Err(Error::NotInF(format!(
            "g = {} > 0 at E node {:?}",
            g.values()[k],
            grid.ij(k)
        ))),
        None => Ok(()),
    }
}

/// Nodes within max-norm distance `r` steps of `E`.
pub fn dilate_e(grid: &Grid, r: usize) -> Vec<bool> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let e = grid.e_mask();
    let mut rows = vec![false; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            if e[j * nx + i] {
                for ii in i.saturating_sub(r)..=(i + r).min(nx - 1) {
                    rows[j * nx + ii] = true;
                }
            }
        }
    }
    let mut out = vec![false; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            if rows[j * nx + i] {
                for jj in j.saturating_sub(r)..=(j + r).min(ny - 1) {
                    out[jj * nx + i] = true;
                }
            }
        }
    }
    out
}

/// Stage one: clamp on `E_m`, extend by zero, mollify at scale `1/m`.
pub fn clamp_and_mollify(g: &Field, m: usize) -> Result<Field> {
    check_nonpositive_on_e(g)?;
    let grid = g.grid();
    let moll = Mollifier::new(grid, m)?;
    if moll.radius() >= grid.e_gap_steps() {
        return Err(Error::InvalidParameter(format!(
            "1/m = {} is not below the E-to-boundary gap {}",
            1.0 / m as f64,
            grid.e_gap()
        )));
    }
    let em = dilate_e(grid, moll.radius());
    let clamped: Vec<f64> = g
        .values()
        .iter()
        .zip(&em)
        .map(|(&v, &inside)| if inside { v.min(0.0) } else { v })
        .collect();
    Ok(moll.convolve(&Field::from_vec(grid, clamped)))
}

/// Distance from a node to `∂D`.
fn boundary_distance(grid: &Grid, k: usize) -> f64 {
    let (x, y) = grid.coords(k);
    grid.domain().distance_to_boundary(x, y)
}

/// Stage two: `g + h_m` with the collar
/// `h_m = (−2·min{min_∂D g, 0} + 1/m)·(1 − ramp(m·dist(x, ∂D)))`.
pub fn boundary_lift(g: &Field, m: usize) -> Result<Field> {
    check_nonpositive_on_e(g)?;
    if m == 0 {
        return Err(Error::InvalidParameter("scale index m must be positive".into()));
    }
    let grid = g.grid();
    let width = 1.0 / m as f64;
    if width >= grid.e_gap() {
        return Err(Error::InvalidParameter(format!(
            "collar width {width} reaches E (gap {})",
            grid.e_gap()
        )));
    }
    let min_bd = (0..grid.len())
        .filter(|&k| grid.is_boundary(k))
        .map(|k| g.values()[k])
        .fold(f64::INFINITY, f64::min);
    let amplitude = -2.0 * min_bd.min(0.0) + width;
    let values = (0..grid.len())
        .map(|k| {
            let d = boundary_distance(grid, k);
            g.values()[k] + amplitude * (1.0 - smootherstep(d / width))
        })
        .collect();
    Field::new(grid, values)
}

/// Output of [`sard_shift`].
#[derive(Clone, Debug)]
pub struct SardShift {
    pub field: Field,
    pub delta: f64,
    pub attempts: usize,
}

/// Threshold on corner gradients of cells cut by the shifted level.
pub fn sard_tau(g: &Field) -> f64 {
    1e-6 * (1.0 + g.max_abs())
}

/// Smallest corner gradient over cells whose corners straddle `level`, with
/// the number of such cells.
fn level_gradient(g: &Field, level: f64) -> (f64, usize) {
    let grid = g.grid();
    let v = g.values();
    let mut min_grad = f64::INFINITY;
    let mut cells = 0;
    for j in 0..grid.ny() - 1 {
        for i in 0..grid.nx() - 1 {
            let c = [
                grid.index(i, j),
                grid.index(i + 1, j),
                grid.index(i, j + 1),
                grid.index(i + 1, j + 1),
            ];
            let below = c.iter().any(|&k| v[k] < level);
            let above = c.iter().any(|&k| v[k] >= level);
            if below && above {
                cells += 1;
                for &k in &c {
                    min_grad = min_grad.min(g.gradient_norm_at(k));
                }
            }
        }
    }
    (min_grad, cells)
}

/// Stage three: `g − δ + f/m`, where `f = ramp(min{(g − δ)·m, 1})` outside
/// `{g ≤ δ}` and zero on it.
///
/// `δ` is drawn uniformly from `(0, min{δ_prev, 1/m, min_∂D g})` until every
/// grid cell cut by the level `δ` has corner gradients above [`sard_tau`] and
/// the result passes the validator.
pub fn sard_shift(g: &Field, m: usize, delta_prev: f64, rng: &mut impl Rng) -> Result<SardShift> {
    check_nonpositive_on_e(g)?;
    if m == 0 {
        return Err(Error::InvalidParameter("scale index m must be positive".into()));
    }
    let grid = g.grid();
    let min_bd = (0..grid.len())
        .filter(|&k| grid.is_boundary(k))
        .map(|k| g.values()[k])
        .fold(f64::INFINITY, f64::min);
    if !(min_bd > 0.0) {
        return Err(Error::NotInFs(format!(
            "g must be positive on the boundary, min is {min_bd}"
        )));
    }
    let width = 1.0 / m as f64;
    let upper = delta_prev.min(width).min(min_bd);
    let tau = sard_tau(g);
    let mut log = String::new();
    for attempt in 1..=SARD_RETRIES {
        let delta = upper * rng.gen_range(f64::EPSILON..1.0);
        let (grad, cells) = level_gradient(g, delta);
        if grad < tau {
            let _ = writeln!(
                log,
                "attempt={attempt} delta={delta:.6e} cut_cells={cells} min_gradient={grad:.6e} tau={tau:.6e}"
            );
            continue;
        }
        let values: Vec<f64> = g
            .values()
            .iter()
            .map(|&v| {
                let shifted = v - delta;
                let bump = if shifted > 0.0 {
                    smootherstep((shifted / width).min(1.0))
                } else {
                    0.0
                };
                shifted + bump * width
            })
            .collect();
        let field = Field::new(grid, values)?;
        let rep = validate_fs(&field, default_tau(&field));
        if rep.is_member() {
            return Ok(SardShift {
                field,
                delta,
                attempts: attempt,
            });
        }
        let _ = writeln!(
            log,
            "attempt={attempt} delta={delta:.6e} validator_failures={:?}",
            rep.failures()
        );
    }
    Err(Error::NoAdmissibleShift {
        attempts: SARD_RETRIES,
        report: log,
    })
}

/// One pass of the three stages at scale `m`.
#[derive(Clone, Debug)]
pub struct PipelineStep {
    pub m: usize,
    pub field: Field,
    pub delta: f64,
    pub error: f64,
    pub report: FsReport,
}

pub fn pipeline(g: &Field, m: usize, delta_prev: f64, rng: &mut impl Rng) -> Result<PipelineStep> {
    let stage1 = clamp_and_mollify(g, m)?;
    let stage2 = boundary_lift(&stage1, m)?;
    let shift = sard_shift(&stage2, m, delta_prev, rng)?;
    let error = norm(&shift.field.sub(g)?, NormKind::L2D);
    let report = validate_fs(&shift.field, default_tau(&shift.field));
    Ok(PipelineStep {
        m,
        field: shift.field,
        delta: shift.delta,
        error,
        report,
    })
}

/// Result of [`project_to_fs`].
#[derive(Clone, Debug)]
pub struct Projection {
    pub field: Field,
    pub report: FsReport,
    /// Achieved `‖result − g‖_{L²}`.
    pub error: f64,
    pub m: usize,
    pub target_met: bool,
    /// `(m, error)` for every validated pass.
    pub history: Vec<(usize, f64)>,
}

/// Smallest power of two, at least 4, whose mollifier and collar fit
/// between `E` and `∂D`.
pub fn initial_scale(grid: &Grid) -> usize {
    let mut m = 4;
    while Mollifier::new(grid, m).map(|mo| mo.radius()).unwrap_or(0) >= grid.e_gap_steps()
        || 1.0 / m as f64 >= grid.e_gap()
    {
        m *= 2;
    }
    m
}

/// Runs [`pipeline`] for `m = m₀, 2m₀, …` until the error drops to
/// `target_err` or the scale `1/m` falls below the mesh width.
pub fn project_to_fs(g: &Field, target_err: f64, rng: &mut impl Rng) -> Result<Projection> {
    check_nonpositive_on_e(g)?;
    let grid = g.grid();
    let mut m = initial_scale(grid);
    let mut delta_prev = f64::INFINITY;
    let mut best: Option<PipelineStep> = None;
    let mut history = Vec::new();
    let mut last_err = None;
    loop {
        match pipeline(g, m, delta_prev, rng) {
            Ok(step) if step.report.is_member() => {
                delta_prev = step.delta;
                history.push((m, step.error));
                let better = best.as_ref().is_none_or(|b| step.error < b.error);
                if better {
                    best = Some(step);
                }
            }
            Ok(step) => last_err = Some(Error::NotInFs(step.report.report())),
            Err(e) => last_err = Some(e),
        }
        if best.as_ref().is_some_and(|b| b.error <= target_err) || (m as f64) * grid.h() > 1.0 {
            break;
        }
        m *= 2;
    }
    match best {
        Some(b) => Ok(Projection {
            target_met: b.error <= target_err,
            field: b.field,
            report: b.report,
            error: b.error,
            m: b.m,
            history,
        }),
        None => Err(last_err.unwrap_or_else(|| Error::NotInFs("no validated pass".into()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::random_relaxed_control;
    use crate::grid::ObservationRegion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap())
    }

    fn disk(g: &Arc<Grid>, r: f64) -> Field {
        Field::from_fn(g, |x, y| (x - 0.5).powi(2) + (y - 0.5).powi(2) - r * r).unwrap()
    }

    #[test]
    fn mollifier_has_unit_mass() {
        let g = grid(65);
        for m in [2, 4, 8, 16, 32, 64, 128] {
            let mo = Mollifier::new(&g, m).unwrap();
            assert!((mo.mass() - 1.0).abs() < 1e-10);
            assert!(mo.weights().iter().all(|&w| w >= 0.0));
        }
        assert_eq!(Mollifier::new(&g, 4).unwrap().radius(), 16);
    }

    #[test]
    fn constant_is_preserved_away_from_boundary() {
        let g = grid(65);
        let out = clamp_and_mollify(&Field::constant(&g, -1.0), 8).unwrap();
        let r = 8;
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            if i >= r && j >= r && i + r < 65 && j + r < 65 {
                assert!((out.values()[k] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mollification_error_decreases() {
        let g = grid(129);
        let f = Field::from_fn(&g, |x, y| -((3.0 * x).sin() * (2.0 * y).cos()).abs() - x * y).unwrap();
        let errs: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&m| norm(&clamp_and_mollify(&f, m).unwrap().sub(&f).unwrap(), NormKind::L2D))
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{errs:?}");
        }
    }

    #[test]
    fn clamp_keeps_e_nonpositive() {
        let g = grid(65);
        let f = Field::from_fn(&g, |x, y| {
            if g.e_region().contains(x, y) {
                0.0
            } else {
                5.0
            }
        })
        .unwrap();
        let out = clamp_and_mollify(&f, 8).unwrap();
        for k in 0..g.len() {
            if g.in_e(k) {
                assert!(out.values()[k] <= 0.0);
            }
        }
    }

    #[test]
    fn scale_too_coarse_is_rejected() {
        let g = grid(65);
        assert!(clamp_and_mollify(&Field::constant(&g, -1.0), 2).is_err());
        assert!(matches!(
            clamp_and_mollify(&Field::constant(&g, 1.0), 8),
            Err(Error::NotInF(_))
        ));
    }

    #[test]
    fn boundary_lift_examples() {
        let g = grid(65);
        let m = 8;
        let up = Field::from_fn(&g, |x, y| if g.e_region().contains(x, y) { -1.0 } else { 2.0 }).unwrap();
        let lifted = boundary_lift(&up, m).unwrap();
        let extra = lifted.sub(&up).unwrap();
        assert!((extra.max() - 1.0 / m as f64).abs() < 1e-12);
        let neg = Field::constant(&g, -1.0);
        let lifted = boundary_lift(&neg, m).unwrap();
        for k in 0..g.len() {
            if g.is_boundary(k) {
                assert!(lifted.values()[k] >= 1.0 / m as f64 - 1e-12);
            }
            if g.in_e(k) {
                assert_eq!(lifted.values()[k], -1.0);
            }
        }
        let errs: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&m| norm(&boundary_lift(&neg, m).unwrap().sub(&neg).unwrap(), NormKind::L2D))
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn sard_shift_on_radial_field() {
        let g = grid(129);
        let r = 0.3;
        let d = boundary_lift(&disk(&g, r), 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let out = sard_shift(&d, 8, f64::INFINITY, &mut rng).unwrap();
        assert!(validate_fs(&out.field, default_tau(&out.field)).is_member());
        assert!(out.field.sub(&d).unwrap().max_abs() <= out.delta + 1.0 / 8.0 + 1e-14);
        for k in 0..g.len() {
            if g.in_e(k) {
                assert!(out.field.values()[k] < 0.0);
            }
        }
        // {|x−c|² < r² + δ} grows by πδ
        let a0 = crate::shapes::area_via_heaviside(&d);
        let a1 = crate::shapes::area_via_heaviside(&out.field);
        let expected = std::f64::consts::PI * out.delta;
        assert!((a1 - a0 - expected).abs() <= 4.0 * g.h() * 2.0 * std::f64::consts::PI * r);
    }

    #[test]
    fn sard_requires_positive_boundary() {
        let g = grid(33);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sard_shift(&disk(&g, 0.8), 8, 1.0, &mut rng).is_err());
    }

    #[test]
    fn flat_level_sets_are_rejected() {
        let g = grid(33);
        // a raised block in a flat sea: the cell at its outer corner has a
        // corner node whose four neighbours are all zero
        let f = Field::from_fn(&g, |x, y| {
            if g.e_region().contains(x, y) {
                -1.0
            } else if x.min(y) < 1e-9 || x.max(y) > 1.0 - 1e-9 {
                0.5
            } else if (0.74..0.86).contains(&x) && (0.74..0.86).contains(&y) {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match sard_shift(&f, 4, 1.0, &mut rng) {
            Err(Error::NoAdmissibleShift { attempts, report }) => {
                assert_eq!(attempts, 50);
                assert!(report.contains("min_gradient"));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn projection_of_smooth_member_is_close() {
        let g = grid(65);
        let d = disk(&g, 0.3).scale(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = project_to_fs(&d, 0.05 * norm(&d, NormKind::L2D), &mut rng).unwrap();
        assert!(p.target_met && p.report.is_member());
        assert!(p.m <= 64, "{:?}", p.history);
    }

    #[test]
    fn projection_of_random_relaxed_controls() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let f = random_relaxed_control(&g, &mut rng);
            let target = 0.1 * norm(&f, NormKind::L2D);
            let p = project_to_fs(&f, target, &mut rng).unwrap();
            assert!(p.report.is_member());
            assert!(p.error <= target, "{} > {target}", p.error);
        }
    }

    #[test]
    fn zero_on_e_becomes_strictly_negative() {
        let g = grid(65);
        let f = Field::from_fn(&g, |x, y| if g.e_region().contains(x, y) { 0.0 } else { 1.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = project_to_fs(&f, 0.0, &mut rng).unwrap();
        for k in 0..g.len() {
            if g.in_e(k) {
                assert!(p.field.values()[k] < 0.0);
            }
        }
        assert!(!p.target_met);
    }

    #[test]
    fn reapplying_the_pipeline_is_nearly_idempotent() {
        let g = grid(65);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_relaxed_control(&g, &mut rng);
        let m = 16;
        let once = pipeline(&f, m, f64::INFINITY, &mut rng).unwrap();
        let twice = pipeline(&once.field, m, once.delta, &mut rng).unwrap();
        let change = (norm(&twice.field, NormKind::L2D) - norm(&once.field, NormKind::L2D)).abs();
        assert!(change <= 2.0 * (once.delta + 1.0 / m as f64), "{change}");
    }
}
