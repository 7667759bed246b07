//! Uniform Cartesian discretization of the holdall domain `D`, the embedded
//! observation region `E`, grid-sampled fields, quadrature and discrete norms.
//!
//! Nodes are numbered lexicographically, `k = j * nx + i`, with `i` running
//! along `x`. Quadrature uses the trapezoid rule on `D`; every node owns its
//! dual cell, so integrals over a node mask (`E`, `D \ E`, a shape) add the
//! trapezoid weights of the nodes in the mask. Interior nodes weigh `h²`.

use std::sync::Arc;

use crate::error::{Error, Result};

const GEOM_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Euclidean distance from an inside point to the rectangle boundary.
    pub fn distance_to_boundary(&self, x: f64, y: f64) -> f64 {
        (x - self.x0)
            .min(self.x1 - x)
            .min(y - self.y0)
            .min(self.y1 - y)
            .max(0.0)
    }
}

/// The observation set `E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservationRegion {
    Rect(Rect),
    Disk { center: (f64, f64), radius: f64 },
}

impl ObservationRegion {
    /// Centered square of half-width `half` inside the unit square.
    pub fn centered_square(half: f64) -> Self {
        ObservationRegion::Rect(Rect::new(0.5 - half, 0.5 + half, 0.5 - half, 0.5 + half))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ObservationRegion::Rect(r) => {
                x >= r.x0 - GEOM_TOL
                    && x <= r.x1 + GEOM_TOL
                    && y >= r.y0 - GEOM_TOL
                    && y <= r.y1 + GEOM_TOL
            }
            ObservationRegion::Disk { center, radius } => {
                let (dx, dy) = (x - center.0, y - center.1);
                (dx * dx + dy * dy).sqrt() <= radius + GEOM_TOL
            }
        }
    }
}

impl Default for ObservationRegion {
    fn default() -> Self {
        ObservationRegion::centered_square(0.1)
    }
}

/// Uniform grid on `D` with the node set of `E` precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    h: f64,
    domain: Rect,
    e_region: ObservationRegion,
    e_mask: Vec<bool>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, domain: Rect, e_region: ObservationRegion) -> Result<Self> {
        if nx < 5 || ny < 5 {
            return Err(Error::InvalidGrid(format!(
                "need at least 5 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::InvalidGrid("domain has non-positive extent".into()));
        }
        let hx = domain.width() / (nx - 1) as f64;
        let hy = domain.height() / (ny - 1) as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            return Err(Error::InvalidGrid(format!(
                "mesh width differs between axes ({hx} vs {hy})"
            )));
        }
        let h = hx;
        let mut e_mask = vec![false; nx * ny];
        let mut weights = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let x = domain.x0 + i as f64 * h;
                let y = domain.y0 + j as f64 * h;
                let wx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
                weights[k] = wx * wy * h * h;
                if e_region.contains(x, y) {
                    if i < 2 || j < 2 || i + 2 >= nx || j + 2 >= ny {
                        return Err(Error::InvalidGrid(format!(
                            "E node ({i},{j}) lies within 2h of the boundary of D"
                        )));
                    }
                    e_mask[k] = true;
                }
            }
        }
        if !e_mask.iter().any(|&b| b) {
            return Err(Error::InvalidGrid("E contains no grid node".into()));
        }
        Ok(Grid {
            nx,
            ny,
            h,
            domain,
            e_region,
            e_mask,
            weights,
        })
    }

    /// `n × n` grid on the unit square.
    pub fn unit_square(n: usize, e_region: ObservationRegion) -> Result<Self> {
        Grid::new(n, n, Rect::unit(), e_region)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn e_region(&self) -> ObservationRegion {
        self.e_region
    }

    pub fn area(&self) -> f64 {
        self.domain.area()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.domain.x0 + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.domain.y0 + j as f64 * self.h
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.x(i), self.y(j))
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    #[inline]
    pub fn in_e(&self, k: usize) -> bool {
        self.e_mask[k]
    }

    pub fn e_mask(&self) -> &[bool] {
        &self.e_mask
    }

    /// Trapezoid weight (dual-cell area) of node `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// 4-neighbours of `k` that exist on the grid.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.ij(k);
        let nx = self.nx;
        let ny = self.ny;
        let cand = [
            (i > 0).then(|| k - 1),
            (i + 1 < nx).then(|| k + 1),
            (j > 0).then(|| k - nx),
            (j + 1 < ny).then(|| k + nx),
        ];
        cand.into_iter().flatten()
    }

    /// Smallest number of grid steps (max-norm) between an `E` node and `∂D`.
    pub fn e_gap_steps(&self) -> usize {
        (0..self.len())
            .filter(|&k| self.e_mask[k])
            .map(|k| {
                let (i, j) = self.ij(k);
                i.min(j).min(self.nx - 1 - i).min(self.ny - 1 - j)
            })
            .min()
            .unwrap_or(0)
    }

    /// Max-norm distance between the nodes of `E` and `∂D`.
    pub fn e_gap(&self) -> f64 {
        self.e_gap_steps() as f64 * self.h
    }

    /// One-dimensional first-derivative stencil at position `i` of an axis with
    /// `n` nodes: central inside, second-order one-sided at the ends.
    pub(crate) fn d1_stencil(n: usize, i: usize, h: f64) -> [(usize, f64); 3] {
        let c = 1.0 / (2.0 * h);
        if i == 0 {
            [(0, -3.0 * c), (1, 4.0 * c), (2, -c)]
        } else if i + 1 == n {
            [(n - 3, c), (n - 2, -4.0 * c), (n - 1, 3.0 * c)]
        } else {
            [(i - 1, -c), (i, 0.0), (i + 1, c)]
        }
    }

    /// Second-derivative stencil; shifted three-point formula at the ends.
    pub(crate) fn d2_stencil(n: usize, i: usize, h: f64) -> [(usize, f64); 3] {
        let c = 1.0 / (h * h);
        let m = i.clamp(1, n - 2);
        [(m - 1, c), (m, -2.0 * c), (m + 1, c)]
    }
}

/// A scalar function sampled at the grid nodes.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Wraps values that are finite by construction.
    pub(crate) fn from_vec(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        assert!(c.is_finite(), "constant field must be finite");
        Field::from_vec(grid, vec![c; grid.len()])
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Pointwise map. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(values.iter().all(|v| v.is_finite()), "map produced non-finite values");
        Field::from_vec(&self.grid, values)
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::new(&self.grid, values)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self + t * dir`
    pub fn axpy(&self, t: f64, dir: &Field) -> Result<Field> {
        self.zip_map(dir, |a, b| a + t * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Central-difference gradient magnitude at node `k` (one-sided at `∂D`).
    pub fn gradient_norm_at(&self, k: usize) -> f64 {
        let (gx, gy) = self.gradient_at(k);
        gx.hypot(gy)
    }

    pub fn gradient_at(&self, k: usize) -> (f64, f64) {
        let g = &*self.grid;
        let (i, j) = g.ij(k);
        let gx = Grid::d1_stencil(g.nx, i, g.h)
            .iter()
            .map(|&(ii, c)| c * self.values[g.index(ii, j)])
            .sum();
        let gy = Grid::d1_stencil(g.ny, j, g.h)
            .iter()
            .map(|&(jj, c)| c * self.values[g.index(i, jj)])
            .sum();
        (gx, gy)
    }
}

/// Integration region.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    D,
    E,
    /// `D \ Ē`: all nodes not in `E`.
    Exterior,
    /// Arbitrary node mask.
    Mask(&'a [bool]),
}

impl Region<'_> {
    fn includes(&self, grid: &Grid, k: usize) -> bool {
        match self {
            Region::D => true,
            Region::E => grid.in_e(k),
            Region::Exterior => !grid.in_e(k),
            Region::Mask(m) => m[k],
        }
    }
}

/// Trapezoid quadrature of `field` over `region`.
pub fn integrate(field: &Field, region: Region<'_>) -> Result<f64> {
    let grid = field.grid();
    if let Region::Mask(m) = region {
        if m.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: m.len(),
            });
        }
    }
    Ok((0..grid.len())
        .filter(|&k| region.includes(grid, k))
        .map(|k| grid.weight(k) * field.values()[k])
        .sum())
}

/// Measure of a node mask (sum of dual-cell areas).
pub fn measure(grid: &Grid, mask: &[bool]) -> f64 {
    mask.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0.0, |acc, (k, _)| acc + grid.weight(k))
}

/// Norm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2D,
    L2E,
    H1D,
    /// `L²(D)` plus the full `H²(D \ Ē)` norm.
    W,
}

/// Discrete `L²(D)` inner product.
pub fn inner_l2(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    let grid = a.grid();
    Ok(a.values()
        .iter()
        .zip(b.values())
        .enumerate()
        .map(|(k, (x, y))| grid.weight(k) * x * y)
        .sum())
}

pub fn norm(field: &Field, kind: NormKind) -> f64 {
    let grid = field.grid();
    let v = field.values();
    match kind {
        NormKind::L2D => (0..grid.len())
            .map(|k| grid.weight(k) * v[k] * v[k])
            .sum::<f64>()
            .sqrt(),
        NormKind::L2E => (0..grid.len())
            .filter(|&k| grid.in_e(k))
            .map(|k| grid.weight(k) * v[k] * v[k])
            .sum::<f64>()
            .sqrt(),
        NormKind::H1D => (0..grid.len())
            .map(|k| {
                let (gx, gy) = field.gradient_at(k);
                grid.weight(k) * (v[k] * v[k] + gx * gx + gy * gy)
            })
            .sum::<f64>()
            .sqrt(),
        NormKind::W => crate::wspace::norm_w_sq(field).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap())
    }

    #[test]
    fn constants_integrate_exactly() {
        let g = grid(33);
        let one = Field::constant(&g, 1.0);
        assert!((integrate(&one, Region::D).unwrap() - 1.0).abs() < 1e-12);
        let zero = Field::zeros(&g);
        assert_eq!(integrate(&zero, Region::E).unwrap(), 0.0);
        let d = integrate(&one, Region::D).unwrap();
        let split = integrate(&one, Region::E).unwrap() + integrate(&one, Region::Exterior).unwrap();
        assert!((d - split).abs() < 1e-14);
    }

    #[test]
    fn sine_product_converges_at_second_order() {
        let exact = 4.0 / (PI * PI);
        let errs: Vec<f64> = [17, 33, 65, 129]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let f = Field::from_fn(&g, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap();
                (integrate(&f, Region::D).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate >= 1.9, "rate {rate} from {errs:?}");
        }
    }

    #[test]
    fn constant_l2_norm() {
        let g = grid(17);
        assert!((norm(&Field::constant(&g, -3.0), NormKind::L2D) - 3.0).abs() < 1e-12);
        for kind in [NormKind::L2D, NormKind::L2E, NormKind::H1D, NormKind::W] {
            assert_eq!(norm(&Field::zeros(&g), kind), 0.0);
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::zeros(&grid(17));
        let b = Field::zeros(&grid(33));
        assert!(matches!(a.add(&b), Err(Error::GridMismatch)));
        let mask = vec![true; 10];
        assert!(integrate(&a, Region::Mask(&mask)).is_err());
    }

    #[test]
    fn e_too_close_to_boundary_is_rejected() {
        let e = ObservationRegion::Rect(Rect::new(0.0, 0.2, 0.4, 0.6));
        assert!(matches!(Grid::unit_square(33, e), Err(Error::InvalidGrid(_))));
        let tiny = ObservationRegion::Disk {
            center: (0.51, 0.51),
            radius: 1e-4,
        };
        assert!(Grid::unit_square(33, tiny).is_err());
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = grid(9);
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(matches!(Field::new(&g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn boundary_predicate_counts() {
        let g = grid(9);
        let nb = (0..g.len()).filter(|&k| g.is_boundary(k)).count();
        assert_eq!(nb, 4 * 8);
    }
}
