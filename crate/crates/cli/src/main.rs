//! `fdshape` command-line front end.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use fdshape::grid::{norm, NormKind};
use fdshape::heaviside::{heaviside_field, Smoothing};
use fdshape::io::{field_to_csv, mask_to_csv, polylines_to_csv, read_field, vtk_string};
use fdshape::objective::j_sharp;
use fdshape::optimizer::{certify, continuation, Certification};
use fdshape::pde::{solve_masked, solve_state};
use fdshape::shapes::{default_tau, extract_shape, level_set_polylines, shape_distance, validate_fs};
use fdshape::verify::run_suite;
use fdshape::{Error, Field};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{ConfigError, Resolved, RunConfig};

#[derive(Parser)]
#[command(name = "fdshape", version, about = "Fixed-domain penalization for non-smooth shape optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply to every omitted key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nodes per axis along x (overrides `grid.nodes`).
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the penalized state equation for `problem.control` at `problem.eps`.
    SolveState,
    /// Extract the shape of `problem.control` and solve on its E-component.
    SolveShape,
    /// Validate `problem.control` as a shape function, projecting if needed.
    Certify,
    /// Run the ε-continuation from `problem.control`.
    Optimize,
    /// Run the property suites and print a pass/fail table.
    Verify,
    /// Write the problem fields (and extra CSV fields) to a VTK file.
    ExportVtk {
        /// Extra field as `NAME=PATH`.
        #[arg(long = "field")]
        fields: Vec<String>,
    },
}

enum Failure {
    Property(String),
    Config(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Property(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Property(m) | Failure::Config(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::NoAdmissibleShift { .. } | Error::NonFinite(_) => {
                Failure::Numeric(e.to_string())
            }
            other => Failure::Config(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir })
    }

    fn write(&self, name: &str, text: &str) -> Outcome {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
    }

    fn field(&self, name: &str, f: &Field) -> Outcome {
        self.write(name, &field_to_csv(f))
    }
}

fn require<'a>(f: &'a Option<Field>, what: &str) -> Result<&'a Field, Failure> {
    f.as_ref()
        .ok_or_else(|| Failure::Config(format!("this command needs `{what}` in the config")))
}

fn cmd_solve_state(r: &Resolved, out: &Output) -> Outcome {
    let g = require(&r.control, "problem.control")?;
    let s = Smoothing::new(r.eps)?;
    let sol = solve_state(&r.data.beta, &s, g, &r.data.f, &r.data.solver)?;
    let mut report = sol.report();
    if let Some(exact) = &r.exact {
        let err = norm(&sol.y.sub(exact)?, NormKind::L2D);
        let _ = writeln!(report, "l2_error={err:.6e}");
    }
    out.field("y.csv", &sol.y)?;
    out.write("report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_solve_shape(r: &Resolved, out: &Output) -> Outcome {
    let g = require(&r.control, "problem.control")?;
    let mask = Arc::new(extract_shape(g)?);
    let sol = solve_masked(&r.data.beta, &mask, &r.data.f, &r.data.solver)?;
    let mut report = sol.solve.report();
    let _ = writeln!(report, "shape_area={:.16e}", mask.area());
    let _ = writeln!(report, "single_component={}", mask.is_single_component());
    if validate_fs(g, default_tau(g)).is_member() {
        let v = j_sharp(&r.data, g)?;
        let _ = writeln!(report, "j_sharp={:.16e}", v.total);
    }
    out.field("y.csv", &sol.y)?;
    out.write("mask.csv", &mask_to_csv(&r.grid, &mask))?;
    out.write("curves.csv", &polylines_to_csv(&level_set_polylines(g)))?;
    out.write("report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_certify(r: &Resolved, out: &Output) -> Outcome {
    let g = require(&r.control, "problem.control")?;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let (field, cert) = certify(g, r.optimizer.certify_tol, &mut rng)?;
    let mut report = cert.report().report();
    match &cert {
        Certification::Direct(_) => report.push_str("method=direct\n"),
        Certification::Projected(p) => {
            let _ = writeln!(report, "method=projected\nm={}\nerror={:.16e}\ntarget_met={}", p.m, p.error, p.target_met);
        }
    }
    out.field("certified.csv", &field)?;
    out.write("report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_optimize(r: &Resolved, out: &Output) -> Outcome {
    let start = r.control.as_ref().unwrap_or(&r.data.anchor);
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let res = continuation(&r.data, start, &r.optimizer, &mut rng)?;
    out.write("trace.csv", &res.trace.to_csv())?;
    out.field("control.csv", &res.control)?;
    out.field("certified.csv", &res.certified)?;
    out.field("state.csv", &res.state.y)?;
    out.write("mask.csv", &mask_to_csv(&r.grid, &res.shape))?;
    out.write("curves.csv", &polylines_to_csv(&level_set_polylines(&res.certified)))?;
    let mut summary = res.summary();
    if let Some(reference) = &r.reference {
        let (a, b) = shape_distance(&res.certified, reference)?;
        let _ = writeln!(summary, "symmetric_difference={:.16e}", a + b);
        let _ = writeln!(summary, "symmetric_difference_fraction={:.6e}", (a + b) / r.grid.area());
    }
    out.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_verify(r: &Resolved) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let report = run_suite(&r.suite, &mut rng);
    print!("{}", report.table());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Property("one or more properties failed".into()))
    }
}

fn cmd_export_vtk(r: &Resolved, out: &Output, extra: &[String], base: &Path) -> Outcome {
    let mut owned: Vec<(String, Field)> = vec![
        ("f".into(), r.data.f.clone()),
        ("y_d".into(), r.data.y_d.clone()),
        ("anchor".into(), r.data.anchor.clone()),
    ];
    if let Some(g) = &r.control {
        owned.push(("control".into(), g.clone()));
        owned.push(("indicator".into(), heaviside_field(g).map(|h| 1.0 - h)));
    }
    for spec in extra {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--field expects NAME=PATH, got {spec:?}")))?;
        let path = Path::new(path);
        let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
        owned.push((name.to_string(), read_field(&full, &r.grid)?));
    }
    let refs: Vec<(&str, &Field)> = owned.iter().map(|(n, f)| (n.as_str(), f)).collect();
    out.write("fields.vtk", &vtk_string(&r.grid, &refs)?)?;
    println!("wrote {} arrays to {}", refs.len(), out.dir.join("fields.vtk").display());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let (mut cfg, base) = match &cli.config {
        Some(p) => (
            RunConfig::load(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (RunConfig::default_toml(), PathBuf::from(".")),
    };
    if let Some(n) = cli.grid {
        cfg.grid.nodes = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let resolved = cfg.resolve(&base)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Verify => cmd_verify(&resolved),
        cmd => {
            let out = Output::create(out_dir)?;
            match cmd {
                Command::SolveState => cmd_solve_state(&resolved, &out),
                Command::SolveShape => cmd_solve_shape(&resolved, &out),
                Command::Certify => cmd_certify(&resolved, &out),
                Command::Optimize => cmd_optimize(&resolved, &out),
                Command::ExportVtk { fields } => cmd_export_vtk(&resolved, &out, fields, &base),
                Command::Verify => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
