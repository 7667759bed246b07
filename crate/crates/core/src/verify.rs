//! Property suites behind the `verify` command and the acceptance tests.
//!
//! Every check returns a [`Check`] with the measured quantities in `detail`,
//! so a caller can print a pass/fail table without re-deriving anything.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use crate::density::{pipeline, project_to_fs};
use crate::error::Result;
use crate::generators::{disk_quadratic, random_relaxed_control, random_relaxed_control_windowed, random_smooth};
use crate::grid::{inner_l2, norm, Field, Grid, NormKind, ObservationRegion};
use crate::heaviside::{heaviside, Smoothing};
use crate::nonsmooth::NonsmoothMap;
use crate::objective::{gradient_j_eps, j_eps, j_sharp, ProblemData};
use crate::optimizer::{continuation, OptimizerConfig};
use crate::pde::{solve_masked, solve_state, SolverConfig};
use crate::shapes::{extract_shape, reparametrize, shape_distance, sign_loss_measure, validate_fs};

/// Outcome of one property check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{} {} ({:.2}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let t0 = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Check {
        name: name.to_string(),
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn unit_grid(n: usize) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::unit_square(n, ObservationRegion::default())?))
}

/// Which regularized Heaviside the suite exercises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeavisideVariant {
    #[default]
    Reference,
    /// Reports half the true derivative; a negative control for the suite.
    Broken,
}

impl HeavisideVariant {
    fn eval(self, s: &Smoothing, v: f64) -> (f64, f64) {
        match self {
            HeavisideVariant::Reference => (s.value(v), s.derivative(v)),
            HeavisideVariant::Broken => (s.value(v), 0.5 * s.derivative(v)),
        }
    }
}

/// Range, monotonicity, `H_ε ≤ H`, nesting, midpoint value and a `C¹`
/// finite-difference match at `points` random abscissae per width.
pub fn heaviside_suite(points: usize, variant: HeavisideVariant, rng: &mut impl Rng) -> Check {
    timed("heaviside", || {
        let mut worst_fd: f64 = 0.0;
        let mut failures = Vec::new();
        for eps in [1e-1, 1e-3, 1e-6] {
            let s = Smoothing::new(eps)?;
            let half = Smoothing::new(0.5 * eps)?;
            let mut xs: Vec<f64> = (0..points).map(|_| rng.gen_range(-eps..2.0 * eps)).collect();
            xs.sort_by(f64::total_cmp);
            let mut prev = f64::NEG_INFINITY;
            for &v in &xs {
                let (h, dh) = variant.eval(&s, v);
                if !(0.0..=1.0).contains(&h) {
                    failures.push(format!("range at {v:e}"));
                }
                if h < prev {
                    failures.push(format!("monotonicity at {v:e}"));
                }
                prev = h;
                if h > heaviside(v) {
                    failures.push(format!("H_eps > H at {v:e}"));
                }
                if variant.eval(&half, v).0 < h {
                    failures.push(format!("nesting at {v:e}"));
                }
                let d = 1e-4 * eps;
                if v.abs() > 2.0 * d && (v - eps).abs() > 2.0 * d {
                    let fd = (variant.eval(&s, v + d).0 - variant.eval(&s, v - d).0) / (2.0 * d);
                    worst_fd = worst_fd.max((fd - dh).abs() / (1.5 / eps));
                }
            }
            if (variant.eval(&s, 0.5 * eps).0 - 0.5).abs() > 4.0 * f64::EPSILON {
                failures.push(format!("midpoint at eps={eps:e}"));
            }
        }
        if worst_fd > 1e-6 {
            failures.push(format!("finite differences {worst_fd:.3e}"));
        }
        failures.truncate(4);
        Ok((
            failures.is_empty(),
            format!("points={points} worst_fd_rel={worst_fd:.3e} failures=[{}]", failures.join("; ")),
        ))
    })
}

/// `L²` errors and observed rates for the manufactured solution
/// `u = sin(πx)·sin(2πy)` with `β = max(·, 0)`, `g ≡ −1`.
pub fn mesh_convergence(sizes: &[usize], min_rate: f64) -> Check {
    timed("pde_mesh_convergence", || {
        let eps = 0.1;
        let s = Smoothing::new(eps)?;
        let beta = NonsmoothMap::Max0;
        let exact = |x: f64, y: f64| (PI * x).sin() * (2.0 * PI * y).sin();
        let mut errs = Vec::new();
        for &n in sizes {
            let g = unit_grid(n)?;
            let f = Field::from_fn(&g, |x, y| {
                let u = exact(x, y);
                5.0 * PI * PI * u + beta.value(u) + eps
            })?;
            let sol = solve_state(&beta, &s, &Field::constant(&g, -1.0), &f, &SolverConfig::default())?;
            errs.push(norm(&sol.y.sub(&Field::from_fn(&g, exact)?)?, NormKind::L2D));
        }
        let rates: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        Ok((
            rates.iter().all(|&r| r >= min_rate),
            format!("grids={sizes:?} errors={} rates={rates:.3?}", sci(&errs)),
        ))
    })
}

/// Interior gap to the variable-domain solve and exterior mass along a
/// decreasing ε sweep for a disk control.
pub fn eps_convergence(n: usize, eps: &[f64]) -> Check {
    timed("eps_convergence", || {
        let g = unit_grid(n)?;
        let ctrl = disk_quadratic(&g, (0.5, 0.5), 0.3)?;
        let mask = Arc::new(extract_shape(&ctrl)?);
        let f = Field::constant(&g, 10.0);
        let beta = NonsmoothMap::Max0;
        let cfg = SolverConfig::default();
        let z = solve_masked(&beta, &mask, &f, &cfg)?.y;
        let mut gaps = Vec::new();
        let mut ext = Vec::new();
        for &e in eps {
            let y = solve_state(&beta, &Smoothing::new(e)?, &ctrl, &f, &cfg)?.y;
            let (mut gap, mut mass) = (0.0, 0.0);
            for k in 0..g.len() {
                let w = g.weight(k);
                if mask.component()[k] {
                    gap += w * (y.values()[k] - z.values()[k]).powi(2);
                }
                if ctrl.values()[k] >= 0.0 {
                    mass += w * y.values()[k].powi(2);
                }
            }
            gaps.push(gap.sqrt());
            ext.push(mass);
        }
        let gap_ok = gaps.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        let ext_ok = ext.windows(2).all(|w| w[1] <= 0.9 * w[0]);
        Ok((
            gap_ok && ext_ok,
            format!("n={n} interior_gap={} exterior_mass={}", sci(&gaps), sci(&ext)),
        ))
    })
}

/// Sign and ordering checks under the upper data case `f ≥ β(0)`, with
/// the `εg` source disabled.
///
/// For each control `g ∈ F_s` with single-component lift `g̃`, checks
/// `min Ŝ_ε(g) ≥ −1e−10` and `Ŝ_k(g̃) ≤ Ŝ_ε(g)` for `k ∈ {ε, ε/2, ε/10}`, plus
/// the variable-domain state below `Ŝ_ε(g)`.
pub fn comparison(n: usize, controls: usize, rng: &mut impl Rng) -> Check {
    timed("comparison_principles", || {
        let g = unit_grid(n)?;
        let beta = NonsmoothMap::abs_shifted(-0.5)?;
        let cfg = SolverConfig {
            eps_source: false,
            ..SolverConfig::default()
        };
        let eps = 0.01;
        let s = Smoothing::new(eps)?;
        let mut min_y = f64::INFINITY;
        let mut worst_order = f64::NEG_INFINITY;
        for _ in 0..controls {
            let relaxed = random_relaxed_control(&g, rng);
            let ctrl = project_to_fs(&relaxed, 0.1 * norm(&relaxed, NormKind::L2D), rng)?.field;
            let bump = random_smooth(&g, rng, 3, 1.0);
            let f = bump.map(|b| beta.at_zero() + 5.0 * b.abs());
            let y = solve_state(&beta, &s, &ctrl, &f, &cfg)?.y;
            min_y = min_y.min(y.min());
            let mask = Arc::new(extract_shape(&ctrl)?);
            let lifted = reparametrize(&ctrl, &mask)?;
            for k in [eps, 0.5 * eps, 0.1 * eps] {
                let z = solve_state(&beta, &Smoothing::new(k)?, &lifted, &f, &cfg)?.y;
                worst_order = worst_order.max(z.sub(&y)?.max());
            }
            let z = solve_masked(&beta, &mask, &f, &cfg)?.y;
            worst_order = worst_order.max(z.sub(&y)?.max());
        }
        Ok((
            min_y >= -1e-10 && worst_order <= 1e-10,
            format!("controls={controls} min_y={min_y:.3e} max(z - y)={worst_order:.3e}"),
        ))
    })
}

/// Density pipeline on windowed random relaxed controls: every pass must
/// validate, errors must decrease over `scales`, and the last relative error
/// must not exceed `tol`.
pub fn density_decay(n: usize, controls: usize, scales: &[usize], tol: f64, rng: &mut impl Rng) -> Check {
    timed("density_pipeline", || {
        let g = unit_grid(n)?;
        let mut worst_final: f64 = 0.0;
        let mut all_valid = true;
        let mut decreasing = true;
        for _ in 0..controls {
            let ctrl = random_relaxed_control_windowed(&g, rng, 0.15, 5.0);
            let size = norm(&ctrl, NormKind::L2D);
            let mut delta = f64::INFINITY;
            let mut errs = Vec::new();
            for &m in scales {
                let step = pipeline(&ctrl, m, delta, rng)?;
                all_valid &= step.report.is_member();
                delta = step.delta;
                errs.push(step.error / size);
            }
            decreasing &= errs.windows(2).all(|w| w[1] < w[0]);
            worst_final = worst_final.max(*errs.last().unwrap_or(&f64::INFINITY));
        }
        Ok((
            all_valid && decreasing && worst_final <= tol,
            format!(
                "n={n} controls={controls} scales={scales:?} valid={all_valid} decreasing={decreasing} worst_final_rel={worst_final:.4}"
            ),
        ))
    })
}

/// Adjoint directional derivatives against central differences with
/// `β = smooth_reference`.
pub fn gradient_check(n: usize, controls: usize, directions: usize, rng: &mut impl Rng) -> Check {
    timed("gradient_check", || {
        let g = unit_grid(n)?;
        let anchor = disk_quadratic(&g, (0.5, 0.5), 0.3)?;
        let data = ProblemData::new(
            Field::from_fn(&g, |x, _| 5.0 + x)?,
            Field::from_fn(&g, |x, y| 0.05 * x - 0.02 * y)?,
            0.3,
            NonsmoothMap::smooth_reference(1.0)?,
            anchor.clone(),
            SolverConfig::default(),
        )?;
        let s = Smoothing::new(0.05)?;
        let mut worst: f64 = 0.0;
        for _ in 0..controls {
            let ctrl = anchor
                .add(&random_smooth(&g, rng, 3, 0.05))?
                .zip_map(&anchor, |a, b| if b < -0.05 { a.min(0.0) } else { a })?;
            let (_, grad) = gradient_j_eps(&data, &s, &ctrl)?;
            for _ in 0..directions {
                let dir = random_smooth(&g, rng, 3, 1.0);
                let t = 1e-6 * norm(&ctrl, NormKind::L2D) / norm(&dir, NormKind::L2D);
                let jp = j_eps(&data, &s, &ctrl.axpy(t, &dir)?)?.total;
                let jm = j_eps(&data, &s, &ctrl.axpy(-t, &dir)?)?.total;
                let fd = (jp - jm) / (2.0 * t);
                let ad = inner_l2(&grad, &dir)?;
                worst = worst.max((fd - ad).abs() / ad.abs().max(1e-12));
            }
        }
        Ok((
            worst <= 1e-4,
            format!("n={n} controls={controls} directions={directions} worst_rel={worst:.3e}"),
        ))
    })
}

/// `μ{h > 0 ∧ h_n ≤ 0}` for `h_n = h − c/n` and two transversal `h`; the
/// sequence must be nonincreasing and end within two cell rows along the
/// zero level set.
pub fn sign_loss(n: usize) -> Check {
    timed("sign_loss_measure", || {
        let g = unit_grid(n)?;
        let h = g.h();
        let cases: [(&str, Field, f64); 2] = [
            ("halfplane", Field::from_fn(&g, |x, _| x - 0.5 + 0.25 * h)?, 1.0),
            ("disk", disk_quadratic(&g, (0.5, 0.5), 0.3)?.scale(-1.0), 2.0 * PI * 0.3),
        ];
        let mut ok = true;
        let mut detail = String::new();
        for (name, base, length) in cases {
            let seq: Vec<f64> = (0..=12)
                .map(|p| {
                    let shift = 1.0 / f64::from(1u32 << p);
                    sign_loss_measure(&base, &base.map(|v| v - shift))
                })
                .collect::<Result<_>>()?;
            let monotone = seq.windows(2).all(|w| w[1] <= w[0]);
            let last = *seq.last().unwrap_or(&f64::INFINITY);
            let bound = 2.0 * h * length;
            ok &= monotone && last <= bound;
            let _ = write!(detail, "{name}: final={last:.3e} bound={bound:.3e} monotone={monotone}; ");
        }
        Ok((ok, detail.trim_end().to_string()))
    })
}

/// A two-component control, its single-component lift, the lift scaled by 2
/// and the lift with a modified plateau all give the same mask and the same
/// sharp value; the lift never costs more than the original.
pub fn reparametrization(n: usize) -> Check {
    timed("reparametrization_invariance", || {
        let g = unit_grid(n)?;
        let two = Field::from_fn(&g, |x, y| {
            let a = (x - 0.5).powi(2) + (y - 0.5).powi(2) - 0.06;
            let b = (x - 0.83).powi(2) + (y - 0.2).powi(2) - 0.01;
            a.min(b)
        })?;
        let data = ProblemData::new(
            Field::constant(&g, 10.0),
            Field::zeros(&g),
            0.1,
            NonsmoothMap::Max0,
            Field::zeros(&g),
            SolverConfig::default(),
        )?;
        let mask = extract_shape(&two)?;
        let lift = reparametrize(&two, &mask)?;
        let wobble = Field::from_fn(&g, |x, y| 1.5 + 0.5 * (3.0 * PI * x).sin() * (2.0 * PI * y).sin())?;
        let variants = [
            ("scaled", lift.scale(2.0)),
            ("plateau", lift.zip_map(&wobble, |a, b| a * b)?),
        ];
        let base_mask = extract_shape(&lift)?;
        let base = j_sharp(&data, &lift)?.total;
        let mut ok = validate_fs(&lift, crate::shapes::default_tau(&lift)).is_member() && base_mask.is_single_component();
        let mut detail = format!("J(lift)={base:.12e}");
        for (name, v) in variants {
            let m = extract_shape(&v)?;
            let jv = j_sharp(&data, &v)?.total;
            let same = m.inside() == base_mask.inside() && m.component() == base_mask.component();
            ok &= same && (jv - base).abs() <= 1e-12;
            let _ = write!(detail, " {name}: same_mask={same} |dJ|={:.3e}", (jv - base).abs());
        }
        let original = j_sharp(&data, &two)?.total;
        ok &= base <= original;
        let _ = write!(detail, " J(original)={original:.12e}");
        Ok((ok, detail))
    })
}

/// Outcome of [`shape_recovery`].
#[derive(Clone, Debug)]
pub struct Recovery {
    pub symmetric_difference: f64,
    pub domain_area: f64,
    pub monotone: bool,
    pub summary: String,
}

/// Disk inverse problem: `y_d` from the variable-domain state of a disk of
/// radius 0.3, anchor at the exact parametrization, started from a shifted
/// smaller disk.
pub fn shape_recovery(n: usize, alpha: f64, cfg: &OptimizerConfig, rng: &mut impl Rng) -> Result<Recovery> {
    let g = unit_grid(n)?;
    let truth = disk_quadratic(&g, (0.5, 0.5), 0.3)?;
    let mask = Arc::new(extract_shape(&truth)?);
    let f = Field::constant(&g, 10.0);
    let beta = NonsmoothMap::Max0;
    let solver = SolverConfig::default();
    let y_d = solve_masked(&beta, &mask, &f, &solver)?.y;
    let data = ProblemData::new(f, y_d, alpha, beta, truth.clone(), solver)?;
    let start = disk_quadratic(&g, (0.47, 0.53), 0.2)?;
    let res = continuation(&data, &start, cfg, rng)?;
    let (a, b) = shape_distance(&res.certified, &truth)?;
    Ok(Recovery {
        symmetric_difference: a + b,
        domain_area: g.area(),
        monotone: res.trace.is_monotone_per_phase(),
        summary: res.summary(),
    })
}

pub fn shape_recovery_check(n: usize, tol: f64, rng: &mut impl Rng) -> Check {
    timed("shape_recovery", || {
        let cfg = OptimizerConfig {
            max_iters: 20,
            ..OptimizerConfig::default()
        };
        let r = shape_recovery(n, 1e-3, &cfg, rng)?;
        let ratio = r.symmetric_difference / r.domain_area;
        Ok((
            ratio <= tol && r.monotone,
            format!("n={n} symmetric_difference/|D|={ratio:.4} monotone={}", r.monotone),
        ))
    })
}

/// Settings for [`run_suite`].
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub n: usize,
    pub heaviside: HeavisideVariant,
    pub controls: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n: 64,
            heaviside: HeavisideVariant::Reference,
            controls: 5,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{passed}/{} checks passed", self.checks.len());
        s
    }
}

/// The property suites at desk scale on an `n × n` grid.
pub fn run_suite(cfg: &SuiteConfig, rng: &mut impl Rng) -> SuiteReport {
    let n = cfg.n;
    let scales: Vec<usize> = [4, 8, 16, 32].into_iter().filter(|&m| m * 4 <= n).collect();
    SuiteReport {
        checks: vec![
            heaviside_suite(1000, cfg.heaviside, rng),
            mesh_convergence(&[17, 33, 65], 1.9),
            eps_convergence(n, &[1e-1, 1e-2, 1e-3, 1e-4]),
            comparison(n, cfg.controls, rng),
            density_decay(n, cfg.controls, &scales, 0.1, rng),
            gradient_check(n.min(48), 2, 2, rng),
            sign_loss(n),
            reparametrization(n),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn broken_heaviside_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(heaviside_suite(200, HeavisideVariant::Reference, &mut rng).passed);
        let broken = heaviside_suite(200, HeavisideVariant::Broken, &mut rng);
        assert!(!broken.passed);
        assert!(broken.detail.contains("finite differences"));
    }

    #[test]
    fn small_suite_passes() {
        let cfg = SuiteConfig {
            n: 64,
            controls: 2,
            ..SuiteConfig::default()
        };
        let report = run_suite(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert!(report.all_passed(), "{}", report.table());
    }
}
