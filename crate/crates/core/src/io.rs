//! Field, mask and curve files.
//!
//! Fields are CSV with header `i,j,x,y,value`, one row per node in
//! lexicographic order, values written with 17 significant digits so that a
//! write/read cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::shapes::{Polyline, ShapeMask};

pub const FIELD_HEADER: [&str; 5] = ["i", "j", "x", "y", "value"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => format_err(path, format!("{other:?}")),
    }
}

/// Renders a field as CSV text.
pub fn field_to_csv(field: &Field) -> String {
    let grid = field.grid();
    let mut s = FIELD_HEADER.join(",");
    s.push('\n');
    for (k, v) in field.values().iter().enumerate() {
        let (i, j) = grid.ij(k);
        let (x, y) = grid.coords(k);
        let _ = writeln!(s, "{i},{j},{x:.16e},{y:.16e},{v:.16e}");
    }
    s
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    fs::write(path, field_to_csv(field)).map_err(|e| io_err(path, e))
}

/// Reads a field written by [`write_field`] onto `grid`.
///
/// Rows may come in any order but every node must appear exactly once, and
/// the stored coordinates must match the grid to `1e-9·h`.
pub fn read_field(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(FIELD_HEADER.iter().copied()) {
        return Err(format_err(path, format!("expected header i,j,x,y,value, got {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    let tol = 1e-9 * grid.h();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = line + 2;
        let field = |n: usize| rec.get(n).ok_or_else(|| format_err(path, format!("row {row}: missing column")));
        let parse_idx = |n: usize| {
            field(n)?
                .parse::<usize>()
                .map_err(|e| format_err(path, format!("row {row}: {e}")))
        };
        let parse_f = |n: usize| {
            field(n)?
                .parse::<f64>()
                .map_err(|e| format_err(path, format!("row {row}: {e}")))
        };
        let (i, j) = (parse_idx(0)?, parse_idx(1)?);
        if i >= grid.nx() || j >= grid.ny() {
            return Err(format_err(path, format!("row {row}: node ({i}, {j}) outside the grid")));
        }
        let k = grid.index(i, j);
        if seen[k] {
            return Err(format_err(path, format!("row {row}: node ({i}, {j}) repeated")));
        }
        let (x, y) = (parse_f(2)?, parse_f(3)?);
        let (gx, gy) = grid.coords(k);
        if (x - gx).abs() > tol || (y - gy).abs() > tol {
            return Err(format_err(path, format!("row {row}: coordinates ({x}, {y}) do not match the grid")));
        }
        let v = parse_f(4)?;
        if !v.is_finite() {
            return Err(format_err(path, format!("row {row}: non-finite value")));
        }
        values[k] = v;
        seen[k] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(format_err(path, format!("node {:?} missing", grid.ij(k))));
    }
    Field::new(grid, values)
}

/// CSV with header `i,j,x,y,inside,component`, flags written as 0/1.
pub fn mask_to_csv(grid: &Grid, mask: &ShapeMask) -> String {
    let mut s = String::from("i,j,x,y,inside,component\n");
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        let (x, y) = grid.coords(k);
        let _ = writeln!(
            s,
            "{i},{j},{x:.16e},{y:.16e},{},{}",
            u8::from(mask.inside()[k]),
            u8::from(mask.component()[k])
        );
    }
    s
}

pub fn write_mask(path: &Path, grid: &Grid, mask: &ShapeMask) -> Result<()> {
    fs::write(path, mask_to_csv(grid, mask)).map_err(|e| io_err(path, e))
}

/// Reads the `(inside, component)` flags of a mask file.
pub fn read_mask(path: &Path, grid: &Grid) -> Result<(Vec<bool>, Vec<bool>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut inside = vec![false; grid.len()];
    let mut component = vec![false; grid.len()];
    let mut count = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let get = |n: usize| rec.get(n).unwrap_or("");
        let i: usize = get(0).parse().map_err(|_| format_err(path, "bad i"))?;
        let j: usize = get(1).parse().map_err(|_| format_err(path, "bad j"))?;
        if i >= grid.nx() || j >= grid.ny() {
            return Err(format_err(path, format!("node ({i}, {j}) outside the grid")));
        }
        let k = grid.index(i, j);
        inside[k] = get(4) == "1";
        component[k] = get(5) == "1";
        count += 1;
    }
    if count != grid.len() {
        return Err(format_err(path, format!("{count} rows for {} nodes", grid.len())));
    }
    Ok((inside, component))
}

/// CSV with header `curve,closed,x,y`, one row per vertex.
pub fn polylines_to_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("curve,closed,x,y\n");
    for (n, line) in lines.iter().enumerate() {
        for &(x, y) in &line.points {
            let _ = writeln!(s, "{n},{},{x:.16e},{y:.16e}", u8::from(line.closed));
        }
    }
    s
}

pub fn write_polylines(path: &Path, lines: &[Polyline]) -> Result<()> {
    fs::write(path, polylines_to_csv(lines)).map_err(|e| io_err(path, e))
}

/// Legacy VTK `STRUCTURED_POINTS` dataset with one scalar array per field.
pub fn vtk_string(grid: &Grid, fields: &[(&str, &Field)]) -> Result<String> {
    let d = grid.domain();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "fdshape fields");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", grid.nx(), grid.ny());
    let _ = writeln!(s, "ORIGIN {:.16e} {:.16e} 0", d.x0, d.y0);
    let _ = writeln!(s, "SPACING {:.16e} {:.16e} 1", grid.h(), grid.h());
    let _ = writeln!(s, "POINT_DATA {}", grid.len());
    for (name, field) in fields {
        if field.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: field.len(),
            });
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("bad VTK array name {name:?}")));
        }
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in field.values() {
            let _ = writeln!(s, "{v:.16e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, grid: &Grid, fields: &[(&str, &Field)]) -> Result<()> {
    let text = vtk_string(grid, fields)?;
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{disk_quadratic, random_smooth};
    use crate::grid::ObservationRegion;
    use crate::shapes::{extract_shape, level_set_polylines};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn field_round_trip_is_lossless(seed in any::<u64>(), scale in -30i32..30) {
            let g = grid(17);
            let f = random_smooth(&g, &mut ChaCha8Rng::seed_from_u64(seed), 4, 10f64.powi(scale));
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.csv");
            write_field(&p, &f).unwrap();
            let back = read_field(&p, &g).unwrap();
            prop_assert!(f.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let g = grid(5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let good = field_to_csv(&Field::constant(&g, 1.0));

        fs::write(&p, good.replacen("value", "val", 1)).unwrap();
        assert!(matches!(read_field(&p, &g), Err(Error::Format { .. })));

        let truncated: String = good.lines().take(10).map(|l| format!("{l}\n")).collect();
        fs::write(&p, truncated).unwrap();
        assert!(matches!(read_field(&p, &g), Err(Error::Format { .. })));

        fs::write(&p, good.replacen("1.0000000000000000e0", "nan", 1)).unwrap();
        assert!(matches!(read_field(&p, &g), Err(Error::Format { .. })));

        assert!(matches!(read_field(&dir.path().join("missing.csv"), &g), Err(Error::Io { .. })));
        assert!(matches!(read_field(&p, &grid(9)), Err(Error::Format { .. })));
    }

    #[test]
    fn mask_round_trip() {
        let g = grid(33);
        let mask = extract_shape(&disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_mask(&p, &g, &mask).unwrap();
        let (inside, component) = read_mask(&p, &g).unwrap();
        assert_eq!(inside, mask.inside());
        assert_eq!(component, mask.component());
    }

    #[test]
    fn vtk_layout() {
        let g = grid(9);
        let f = disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap();
        let s = vtk_string(&g, &[("g", &f), ("y", &Field::zeros(&g))]).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains("DIMENSIONS 9 9 1"));
        assert!(s.contains("POINT_DATA 81"));
        assert_eq!(s.lines().count(), 8 + 2 * (2 + 81));
        assert!(vtk_string(&g, &[("bad name", &f)]).is_err());
    }

    #[test]
    fn polyline_rows() {
        let g = grid(33);
        let lines = level_set_polylines(&disk_quadratic(&g, (0.5, 0.5), 0.3).unwrap());
        let csv = polylines_to_csv(&lines);
        let rows = csv.lines().count() - 1;
        assert_eq!(rows, lines.iter().map(|l| l.points.len()).sum::<usize>());
    }
}
