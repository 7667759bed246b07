use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use fdshape::io::{field_to_csv, read_field};
use fdshape::{Grid, ObservationRegion};

const BIN: &str = env!("CARGO_BIN_EXE_fdshape");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {report}"))
        .parse()
        .unwrap()
}

const MMS: &str = r#"
[grid]
nodes = 33

[problem]
eps = 0.1
beta = { kind = "smooth_reference", params = [0.0] }
f = { kind = "sine_product", amplitude = 19.739208802178716 }
control = { kind = "constant", value = -1.0 }
exact = { kind = "sine_product" }

[solver]
eps_source = false
"#;

const INVERSE: &str = r#"
seed = 11

[grid]
nodes = 48

[problem]
alpha = 1e-3
eps = 0.01
beta = { kind = "max0" }
f = { kind = "constant", value = 10.0 }
y_d = { kind = "masked_state", shape = { kind = "disk_quadratic", center = [0.5, 0.5], radius = 0.3 } }
anchor = { kind = "disk_quadratic", center = [0.5, 0.5], radius = 0.3 }
reference = { kind = "disk_quadratic", center = [0.5, 0.5], radius = 0.3 }
control = { kind = "disk_quadratic", center = [0.47, 0.53], radius = 0.2 }

[optimizer]
max_iters = 15
"#;

#[test]
fn manufactured_solution_matches_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "mms.toml", MMS);
    let o = run(dir.path(), &["solve-state", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let err = value(&stdout(&o), "l2_error");
    assert!((err / 4.017888e-4 - 1.0).abs() <= 0.05, "{err}");
    assert!(dir.path().join("o/y.csv").exists());
}

#[test]
fn zero_data_gives_zero_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "zero.toml",
        "[grid]\nnodes = 33\n[problem]\nf = { kind = \"constant\", value = 0.0 }\ncontrol = { kind = \"constant\", value = 0.0 }\n[solver]\neps_source = false\n",
    );
    let o = run(dir.path(), &["solve-state", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(value(&stdout(&o), "max_abs_y") <= 1e-10);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[problem]\nf = { kind = \"file\", path = \"missing.csv\" }\n",
        "[problem]\nalpha = -0.5\n",
        "[optimizer]\neps0 = 1e-3\neps_min = 1e-2\n",
        "typo = 3\n",
        "[problem]\nbeta = { kind = \"cubic\" }\n",
    ];
    for (n, text) in cases.iter().enumerate() {
        let cfg = config(dir.path(), &format!("bad{n}.toml"), text);
        for cmd in ["verify", "optimize"] {
            let o = run(dir.path(), &[cmd, "--config", cfg.to_str().unwrap()]);
            assert_eq!(code(&o), 2, "{cmd} with {text}");
        }
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), &["verify"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    assert!(stdout(&ok).contains("8/8 checks passed"));
    let cfg = config(dir.path(), "broken.toml", "[verify]\nbroken_heaviside = true\n");
    let broken = run(dir.path(), &["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&broken), 1);
    assert!(stdout(&broken).contains("FAIL heaviside"));
}

#[test]
fn inverse_problem_recovers_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "inv.toml", INVERSE);
    let o = run(dir.path(), &["optimize", "--config", cfg.to_str().unwrap(), "--out", "a"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = stdout(&o);
    assert!(value(&summary, "symmetric_difference_fraction") <= 0.05, "{summary}");
    assert!(summary.contains("monotone_per_phase=true"));

    let again = run(dir.path(), &["optimize", "--config", cfg.to_str().unwrap(), "--out", "b"]);
    assert_eq!(code(&again), 0);
    for name in ["trace.csv", "control.csv", "certified.csv", "state.csv", "mask.csv", "curves.csv", "summary.txt"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let grid = Arc::new(Grid::unit_square(48, ObservationRegion::default()).unwrap());
    for name in ["control.csv", "certified.csv", "state.csv"] {
        let path = dir.path().join("a").join(name);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(field_to_csv(&read_field(&path, &grid).unwrap()), text, "{name}");
    }
}

#[test]
fn resuming_from_a_persisted_control_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let single = "[optimizer]\neps0 = 0.01\neps_min = 0.01\n";
    let base = INVERSE.replace("max_iters = 15", "max_iters = {ITERS}").replace("[optimizer]\n", single);
    let two = config(dir.path(), "two.toml", &base.replace("{ITERS}", "2"));
    let one = config(dir.path(), "one.toml", &base.replace("{ITERS}", "1"));
    assert_eq!(code(&run(dir.path(), &["optimize", "--config", two.to_str().unwrap(), "--out", "two"])), 0);
    assert_eq!(code(&run(dir.path(), &["optimize", "--config", one.to_str().unwrap(), "--out", "one"])), 0);
    let resumed = base
        .replace("{ITERS}", "1")
        .replace(
            "control = { kind = \"disk_quadratic\", center = [0.47, 0.53], radius = 0.2 }",
            "control = { kind = \"file\", path = \"one/control.csv\" }",
        );
    let resumed = config(dir.path(), "resumed.toml", &resumed);
    assert_eq!(code(&run(dir.path(), &["optimize", "--config", resumed.to_str().unwrap(), "--out", "res"])), 0);
    let rows = fs::read_to_string(dir.path().join("two/trace.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 3);
    let a = fs::read(dir.path().join("two/control.csv")).unwrap();
    let b = fs::read(dir.path().join("res/control.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shape_certify_and_export_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "s.toml",
        "[grid]\nnodes = 40\n[problem]\nf = { kind = \"constant\", value = 10.0 }\ncontrol = { kind = \"disk_quadratic\", center = [0.5, 0.5], radius = 0.3 }\n",
    );
    let c = cfg.to_str().unwrap();
    let shape = run(dir.path(), &["solve-shape", "--config", c, "--out", "s"]);
    assert_eq!(code(&shape), 0);
    assert!(stdout(&shape).contains("single_component=true"));
    let cert = run(dir.path(), &["certify", "--config", c, "--out", "s"]);
    assert_eq!(code(&cert), 0);
    assert!(stdout(&cert).contains("method=direct"));
    let vtk = run(dir.path(), &["export-vtk", "--config", c, "--out", "s", "--field", "y=s/y.csv"]);
    assert_eq!(code(&vtk), 0, "{}", String::from_utf8_lossy(&vtk.stderr));
    let text = fs::read_to_string(dir.path().join("s/fields.vtk")).unwrap();
    assert!(text.contains("SCALARS y double 1"));

    let relaxed = config(
        dir.path(),
        "r.toml",
        "[grid]\nnodes = 64\n[problem]\ncontrol = { kind = \"disk_quadratic\", center = [0.5, 0.5], radius = 0.6 }\n",
    );
    let cert = run(dir.path(), &["certify", "--config", relaxed.to_str().unwrap(), "--out", "r"]);
    assert_eq!(code(&cert), 0, "{}", String::from_utf8_lossy(&cert.stderr));
    assert!(stdout(&cert).contains("method=projected"));
}

#[test]
fn grid_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "mms.toml", MMS);
    let o = run(dir.path(), &["solve-state", "--config", cfg.to_str().unwrap(), "--grid", "17", "--out", "o"]);
    assert_eq!(code(&o), 0);
    let rows = fs::read_to_string(dir.path().join("o/y.csv")).unwrap().lines().count();
    assert_eq!(rows, 17 * 17 + 1);
}

#[test]
fn solver_breakdown_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "n.toml",
        "[grid]\nnodes = 33\n[problem]\nf = { kind = \"constant\", value = 10.0 }\ncontrol = { kind = \"constant\", value = -1.0 }\n[solver]\ncg_max_iter = 1\nmax_newton = 1\n",
    );
    let o = run(dir.path(), &["solve-state", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
