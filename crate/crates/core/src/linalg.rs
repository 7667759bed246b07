//! Linear solvers: Jacobi-preconditioned conjugate gradients for the
//! five-point systems and a banded Cholesky factorization for the W metric.

use crate::error::{Error, Result};

/// Outcome of a CG solve.
#[derive(Clone, Debug)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` given by `apply`.
///
/// `inv_diag` is the Jacobi preconditioner; entries set to zero freeze the
/// corresponding unknowns (their residual is ignored). `x` holds the initial
/// guess on entry.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for k in 0..n {
        r[k] = if inv_diag[k] != 0.0 { b[k] - r[k] } else { 0.0 };
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 0..max_iter {
        let rnorm = dot(&r, &r).sqrt() / bnorm;
        if !rnorm.is_finite() {
            return Err(Error::NonFinite("conjugate gradient residual"));
        }
        if rnorm <= rtol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: rnorm,
            });
        }
        if it % 50 == 0 {
            history.push(rnorm);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Precondition(
                "operator is not positive definite".into(),
            ));
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let last = dot(&r, &r).sqrt() / bnorm;
    if last <= rtol {
        return Ok(CgReport {
            iterations: max_iter,
            relative_residual: last,
        });
    }
    history.push(last);
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        last,
        history,
    })
}

/// Symmetric banded matrix, lower triangle stored row by row.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` to entry `(i, j)`, `i >= j`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i && i - j <= self.bw, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }
}

/// `L Lᵀ` factorization of a symmetric positive definite banded matrix.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedMatrix,
}

impl BandedCholesky {
    pub fn factor(mut a: BandedMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        for i in 0..n {
            let jlo = i.saturating_sub(bw);
            for j in jlo..=i {
                let klo = jlo.max(j.saturating_sub(bw));
                let mut s = a.data[i * w + (j + bw - i)];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in klo..j {
                    s -= a.data[ri + k] * a.data[rj + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Precondition(format!(
                            "matrix not positive definite at row {i}"
                        )));
                    }
                    a.data[ri + i] = s.sqrt();
                } else {
                    a.data[ri + j] = s / a.data[rj + j];
                }
            }
        }
        Ok(BandedCholesky { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        let w = bw + 1;
        let d = &self.l.data;
        for i in 0..n {
            let ri = i * w + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= d[ri + k] * b[k];
            }
            b[i] = s / d[ri + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= d[k * w + bw - k + i] * b[k];
            }
            b[i] = s / d[i * w + bw - i + i];
        }
    }
}
