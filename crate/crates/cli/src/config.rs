//! Run configuration: a TOML file, validated and resolved before any solve.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fdshape::generators;
use fdshape::io::read_field;
use fdshape::nonsmooth::NonsmoothMap;
use fdshape::objective::ProblemData;
use fdshape::optimizer::{EpsSchedule, Metric, OptimizerConfig};
use fdshape::pde::{solve_masked, SolverConfig};
use fdshape::shapes::extract_shape;
use fdshape::verify::{HeavisideVariant, SuiteConfig};
use fdshape::{Field, Grid, ObservationRegion, Rect};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Nodes along x; the y count follows from the domain aspect ratio.
    pub nodes: usize,
    /// `[x0, x1, y0, y1]`.
    pub domain: [f64; 4],
    pub observation: ObservationSection,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nodes: 64,
            domain: [0.0, 1.0, 0.0, 1.0],
            observation: ObservationSection::Rect {
                bounds: [0.4, 0.6, 0.4, 0.6],
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservationSection {
    Rect { bounds: [f64; 4] },
    Disk { center: [f64; 2], radius: f64 },
}

/// A field given analytically or read from a CSV file.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        sigma: f64,
    },
    DiskSdf {
        center: [f64; 2],
        radius: f64,
    },
    DiskQuadratic {
        center: [f64; 2],
        radius: f64,
    },
    RectSdf {
        bounds: [f64; 4],
    },
    SineProduct {
        #[serde(default = "one")]
        amplitude: f64,
    },
    File {
        path: PathBuf,
    },
    /// Variable-domain state of the shape of `shape`, solved with the
    /// problem's `f` and `β`.
    MaskedState {
        shape: Box<FieldSpec>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSection {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub alpha: f64,
    pub beta: BetaSection,
    /// Smoothing width for single-ε commands.
    pub eps: f64,
    pub f: FieldSpec,
    pub y_d: FieldSpec,
    pub anchor: Option<FieldSpec>,
    /// Control for `solve-state`, `solve-shape` and `certify`; start of `optimize`.
    pub control: Option<FieldSpec>,
    /// Reference solution reported against by `solve-state`.
    pub exact: Option<FieldSpec>,
    /// Shape function of a known optimum; `optimize` reports the symmetric
    /// difference to its shape.
    pub reference: Option<FieldSpec>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            alpha: 0.0,
            beta: BetaSection {
                kind: "max0".into(),
                params: Vec::new(),
            },
            eps: 0.01,
            f: FieldSpec::Constant { value: 1.0 },
            y_d: FieldSpec::Constant { value: 0.0 },
            anchor: None,
            control: None,
            exact: None,
            reference: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eps_source: bool,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub cg_rtol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            eps_source: d.eps_source,
            newton_tol: d.newton_tol,
            max_newton: d.max_newton,
            cg_rtol: d.cg_rtol,
            cg_max_iter: d.cg_max_iter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub step_floor: f64,
    pub grad_tol: f64,
    pub radius: Option<f64>,
    pub eps0: f64,
    pub eps_ratio: f64,
    pub eps_min: f64,
    /// `"w"` or `"l2"`.
    pub metric: String,
    pub certify_tol: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerSection {
            max_iters: d.max_iters,
            armijo_c1: d.armijo_c1,
            initial_step: d.initial_step,
            shrink: d.shrink,
            step_floor: d.step_floor,
            grad_tol: d.grad_tol,
            radius: d.radius,
            eps0: d.schedule.eps0,
            eps_ratio: d.schedule.ratio,
            eps_min: d.schedule.eps_min,
            metric: "w".into(),
            certify_tol: d.certify_tol,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub controls: usize,
    /// Negative-control hook: run the suite against a deliberately wrong
    /// Heaviside derivative.
    pub broken_heaviside: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            controls: 5,
            broken_heaviside: false,
        }
    }
}

/// Everything a command needs, fully validated.
pub struct Resolved {
    pub grid: Arc<Grid>,
    pub data: ProblemData,
    pub eps: f64,
    pub control: Option<Field>,
    pub exact: Option<Field>,
    pub reference: Option<Field>,
    pub optimizer: OptimizerConfig,
    pub suite: SuiteConfig,
    pub seed: u64,
}

/// A config that failed to parse or validate.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<fdshape::Error> for ConfigError {
    fn from(e: fdshape::Error) -> Self {
        ConfigError(e.to_string())
    }
}

impl RunConfig {
    /// The configuration of an empty file.
    pub fn default_toml() -> Self {
        toml::from_str("").expect("empty config parses")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Builds the grid, fields and solver settings. Relative file paths are
    /// taken relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, ConfigError> {
        let grid = Arc::new(self.build_grid()?);
        let p = &self.problem;
        if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
            return Err(ConfigError(format!("problem.alpha must be ≥ 0, got {}", p.alpha)));
        }
        if !(p.eps > 0.0 && p.eps.is_finite()) {
            return Err(ConfigError(format!("problem.eps must be positive, got {}", p.eps)));
        }
        let beta = NonsmoothMap::from_name(&p.beta.kind, &p.beta.params)?;
        let solver = SolverConfig {
            eps_source: self.solver.eps_source,
            newton_tol: self.solver.newton_tol,
            max_newton: self.solver.max_newton,
            cg_rtol: self.solver.cg_rtol,
            cg_max_iter: self.solver.cg_max_iter,
        };
        solver.validate()?;
        let optimizer = self.build_optimizer()?;

        let ctx = FieldContext {
            grid: &grid,
            base,
            beta: &beta,
            solver: &solver,
        };
        let f = ctx.build(&p.f, None)?;
        let y_d = ctx.build(&p.y_d, Some(&f))?;
        let control = p.control.as_ref().map(|s| ctx.build(s, Some(&f))).transpose()?;
        let anchor = match &p.anchor {
            Some(s) => ctx.build(s, Some(&f))?,
            None => control.clone().unwrap_or_else(|| Field::zeros(&grid)),
        };
        let exact = p.exact.as_ref().map(|s| ctx.build(s, Some(&f))).transpose()?;
        let reference = p.reference.as_ref().map(|s| ctx.build(s, Some(&f))).transpose()?;
        let data = ProblemData::new(f, y_d, p.alpha, beta, anchor, solver)?;
        let suite = SuiteConfig {
            n: grid.nx(),
            heaviside: if self.verify.broken_heaviside {
                HeavisideVariant::Broken
            } else {
                HeavisideVariant::Reference
            },
            controls: self.verify.controls.max(1),
        };
        Ok(Resolved {
            grid,
            data,
            eps: p.eps,
            control,
            exact,
            reference,
            optimizer,
            suite,
            seed: self.seed,
        })
    }

    fn build_grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.grid;
        let [x0, x1, y0, y1] = g.domain;
        let domain = Rect::new(x0, x1, y0, y1);
        if g.nodes < 5 {
            return Err(ConfigError(format!("grid.nodes must be ≥ 5, got {}", g.nodes)));
        }
        let h = domain.width() / (g.nodes - 1) as f64;
        let ny_f = domain.height() / h;
        if (ny_f - ny_f.round()).abs() > 1e-9 * ny_f.max(1.0) {
            return Err(ConfigError("domain height is not a multiple of the mesh width".into()));
        }
        let ny = ny_f.round() as usize + 1;
        let e = match g.observation {
            ObservationSection::Rect { bounds: [a, b, c, d] } => ObservationRegion::Rect(Rect::new(a, b, c, d)),
            ObservationSection::Disk { center, radius } => ObservationRegion::Disk {
                center: (center[0], center[1]),
                radius,
            },
        };
        Ok(Grid::new(g.nodes, ny, domain, e)?)
    }

    fn build_optimizer(&self) -> Result<OptimizerConfig, ConfigError> {
        let o = &self.optimizer;
        let metric = match o.metric.as_str() {
            "w" => Metric::W,
            "l2" => Metric::L2,
            other => return Err(ConfigError(format!("optimizer.metric must be \"w\" or \"l2\", got {other:?}"))),
        };
        let cfg = OptimizerConfig {
            max_iters: o.max_iters,
            armijo_c1: o.armijo_c1,
            initial_step: o.initial_step,
            shrink: o.shrink,
            step_floor: o.step_floor,
            grad_tol: o.grad_tol,
            radius: o.radius,
            schedule: EpsSchedule {
                eps0: o.eps0,
                ratio: o.eps_ratio,
                eps_min: o.eps_min,
            },
            metric,
            certify_tol: o.certify_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

struct FieldContext<'a> {
    grid: &'a Arc<Grid>,
    base: &'a Path,
    beta: &'a NonsmoothMap,
    solver: &'a SolverConfig,
}

impl FieldContext<'_> {
    fn build(&self, spec: &FieldSpec, f: Option<&Field>) -> Result<Field, ConfigError> {
        let g = self.grid;
        let pt = |c: [f64; 2]| (c[0], c[1]);
        Ok(match spec {
            FieldSpec::Constant { value } => generators::constant(g, *value),
            FieldSpec::Gaussian {
                amplitude,
                center,
                sigma,
            } => {
                if !(*sigma > 0.0) {
                    return Err(ConfigError("gaussian sigma must be positive".into()));
                }
                generators::gaussian(g, *amplitude, pt(*center), *sigma)?
            }
            FieldSpec::DiskSdf { center, radius } => generators::disk_sdf(g, pt(*center), *radius)?,
            FieldSpec::DiskQuadratic { center, radius } => generators::disk_quadratic(g, pt(*center), *radius)?,
            FieldSpec::RectSdf { bounds: [a, b, c, d] } => generators::rect_sdf(g, Rect::new(*a, *b, *c, *d))?,
            FieldSpec::SineProduct { amplitude } => generators::sine_product(g).scale(*amplitude),
            FieldSpec::File { path } => {
                let full = if path.is_absolute() { path.clone() } else { self.base.join(path) };
                read_field(&full, g)?
            }
            FieldSpec::MaskedState { shape } => {
                let f = f.ok_or_else(|| ConfigError("masked_state cannot define f itself".into()))?;
                let sg = self.build(shape, Some(f))?;
                let mask = Arc::new(extract_shape(&sg)?);
                solve_masked(self.beta, &mask, f, self.solver)
                    .map_err(|e| ConfigError(format!("masked_state: {e}")))?
                    .y
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.grid.nx(), 64);
        assert_eq!(r.grid.ny(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[solver]\nnewton_tolerance = 1e-9").is_err());
        let bad_field = "[problem]\nalpha = 0.0\neps = 0.1\nbeta = { kind = \"max0\" }\nf = { kind = \"constant\", value = 1.0, extra = 2 }\ny_d = { kind = \"constant\", value = 0.0 }";
        assert!(toml::from_str::<RunConfig>(bad_field).is_err());
    }

    #[test]
    fn negative_alpha_is_a_config_error() {
        let text = "[problem]\nalpha = -1.0\neps = 0.1\nbeta = { kind = \"max0\" }\nf = { kind = \"constant\", value = 1.0 }\ny_d = { kind = \"constant\", value = 0.0 }";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert!(cfg.resolve(Path::new(".")).is_err());
    }

    #[test]
    fn rectangular_domains_follow_the_aspect_ratio() {
        let text = "[grid]\nnodes = 41\ndomain = [0.0, 2.0, 0.0, 1.0]\nobservation = { kind = \"disk\", center = [1.0, 0.5], radius = 0.1 }";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!((r.grid.nx(), r.grid.ny()), (41, 21));
    }
}
