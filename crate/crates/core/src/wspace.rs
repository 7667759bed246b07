//! The control space `W = L²(D) ∩ H²(D \ Ē)`.
//!
//! The squared norm is the discrete quadratic form
//!
//! ```text
//! Q(u) = Σ_k w_k u_k²  +  Σ_{k ∉ E} w_k [ u² + u_x² + u_y² + u_xx² + 2 u_xy² + u_yy² ]_k
//! ```
//!
//! with node-centred difference operators (one-sided at `∂D`). Nodes of `Ē`
//! contribute only through the `L²(D)` part.

use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::linalg::BandedCholesky;

/// Calls `visit(factor, stencil)` for each derivative operator evaluated at
/// node `k` in the `H²` part of the form.
fn for_each_operator(grid: &Grid, k: usize, mut visit: impl FnMut(f64, &[(usize, f64)])) {
    let (i, j) = grid.ij(k);
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    visit(1.0, &[(k, 1.0)]);

    let dx = Grid::d1_stencil(nx, i, h);
    let dy = Grid::d1_stencil(ny, j, h);
    let sx: Vec<(usize, f64)> = dx.iter().map(|&(ii, c)| (grid.index(ii, j), c)).collect();
    let sy: Vec<(usize, f64)> = dy.iter().map(|&(jj, c)| (grid.index(i, jj), c)).collect();
    visit(1.0, &sx);
    visit(1.0, &sy);

    let sxx: Vec<(usize, f64)> = Grid::d2_stencil(nx, i, h)
        .iter()
        .map(|&(ii, c)| (grid.index(ii, j), c))
        .collect();
    let syy: Vec<(usize, f64)> = Grid::d2_stencil(ny, j, h)
        .iter()
        .map(|&(jj, c)| (grid.index(i, jj), c))
        .collect();
    visit(1.0, &sxx);
    visit(1.0, &syy);

    let mut sxy = Vec::with_capacity(9);
    for &(ii, cx) in &dx {
        for &(jj, cy) in &dy {
            let c = cx * cy;
            if c != 0.0 {
                sxy.push((grid.index(ii, jj), c));
            }
        }
    }
    visit(2.0, &sxy);
}

/// `‖u‖²_W`.
pub fn norm_w_sq(u: &Field) -> f64 {
    let grid = u.grid();
    let v = u.values();
    let mut total = 0.0;
    for k in 0..grid.len() {
        let w = grid.weight(k);
        total += w * v[k] * v[k];
        if !grid.in_e(k) {
            for_each_operator(grid, k, |factor, st| {
                let d: f64 = st.iter().map(|&(n, c)| c * v[n]).sum();
                total += w * factor * d * d;
            });
        }
    }
    total
}

/// Euclidean gradient of `½ Q(u)`, i.e. the Gram matrix of the W inner
/// product applied to the nodal vector.
pub fn gram_apply(u: &Field) -> Vec<f64> {
    let grid = u.grid();
    let v = u.values();
    let mut out: Vec<f64> = (0..grid.len()).map(|k| grid.weight(k) * v[k]).collect();
    for k in 0..grid.len() {
        if grid.in_e(k) {
            continue;
        }
        let w = grid.weight(k);
        for_each_operator(grid, k, |factor, st| {
            let d: f64 = st.iter().map(|&(n, c)| c * v[n]).sum();
            for &(n, c) in st {
                out[n] += w * factor * c * d;
            }
        });
    }
    out
}

/// Riesz representer of the W inner product in the discrete `L²` metric:
/// `⟨W_op u, v⟩_{L²} = (u, v)_W`.
pub fn w_operator(u: &Field) -> Field {
    let grid = u.grid();
    let raw = gram_apply(u);
    let values = raw
        .into_iter()
        .enumerate()
        .map(|(k, g)| g / grid.weight(k))
        .collect();
    Field::from_vec(grid, values)
}

/// Half-bandwidth of the Gram matrix in lexicographic ordering.
pub fn gram_bandwidth(grid: &Grid) -> usize {
    2 * grid.nx() + 2
}

/// Assembles and factors the Gram matrix.
pub fn factor_gram(grid: &Grid) -> Result<BandedCholesky> {
    let n = grid.len();
    let bw = gram_bandwidth(grid);
    let mut mat = crate::linalg::BandedMatrix::zeros(n, bw);
    for k in 0..n {
        mat.add(k, k, grid.weight(k));
        if grid.in_e(k) {
            continue;
        }
        let w = grid.weight(k);
        for_each_operator(grid, k, |factor, st| {
            for &(a, ca) in st {
                for &(b, cb) in st {
                    if a >= b {
                        mat.add(a, b, w * factor * ca * cb);
                    }
                }
            }
        });
    }
    BandedCholesky::factor(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ObservationRegion, Rect};
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::unit_square(n, ObservationRegion::default()).unwrap())
    }

    #[test]
    fn gram_is_the_gradient_of_the_form() {
        let g = grid(12);
        let u = Field::from_fn(&g, |x, y| (3.0 * x).sin() + x * y * y).unwrap();
        let v = Field::from_fn(&g, |x, y| (2.0 * y).cos() - x).unwrap();
        let gu = gram_apply(&u);
        let lhs: f64 = gu.iter().zip(v.values()).map(|(a, b)| a * b).sum();
        let p = norm_w_sq(&u.add(&v).unwrap());
        let m = norm_w_sq(&u.sub(&v).unwrap());
        let rhs = 0.25 * (p - m);
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn banded_factor_inverts_gram() {
        let g = grid(10);
        let u = Field::from_fn(&g, |x, y| x * x - y + (5.0 * x * y).sin()).unwrap();
        let chol = factor_gram(&g).unwrap();
        let mut b = gram_apply(&u);
        chol.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(u.values()) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
    }

    #[test]
    fn linear_fields_have_only_lower_order_terms() {
        // E is chosen so that the union of its dual cells is a rectangle R.
        let n = 65;
        let h = 1.0 / 64.0;
        let e = ObservationRegion::Rect(Rect::new(24.0 * h, 40.0 * h, 24.0 * h, 40.0 * h));
        let g = Arc::new(Grid::unit_square(n, e).unwrap());
        let (a, b) = (0.7, -1.3);
        let u = Field::from_fn(&g, |x, y| a * x + b * y).unwrap();
        let (r0, r1) = (23.5 * h, 40.5 * h);
        // ∫ over a rectangle of (ax+by)²
        let rect_int = |x0: f64, x1: f64, y0: f64, y1: f64| {
            let ix2 = (x1.powi(3) - x0.powi(3)) / 3.0;
            let ix = (x1 * x1 - x0 * x0) / 2.0;
            let iy2 = (y1.powi(3) - y0.powi(3)) / 3.0;
            let iy = (y1 * y1 - y0 * y0) / 2.0;
            a * a * ix2 * (y1 - y0) + 2.0 * a * b * ix * iy + b * b * iy2 * (x1 - x0)
        };
        let l2_d = rect_int(0.0, 1.0, 0.0, 1.0);
        let l2_out = l2_d - rect_int(r0, r1, r0, r1);
        let grad_out = (a * a + b * b) * (1.0 - (r1 - r0).powi(2));
        let expected = l2_d + l2_out + grad_out;
        let got = norm_w_sq(&u);
        assert!(
            (got - expected).abs() < 2.0 * h * h,
            "got {got}, expected {expected}"
        );
    }
}
