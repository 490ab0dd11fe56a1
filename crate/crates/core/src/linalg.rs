//! Thin dense/tridiagonal linear-algebra layer over `faer`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

/// Fails unless `max |A - A^T| <= tol * max |A|`.
pub fn check_symmetric(m: MatRef<'_, f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = max_abs(m);
    let mut asym = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let relative = if scale > 0.0 { asym / scale } else { 0.0 };
    if relative > tol {
        return Err(Error::Asymmetric { asymmetry: asym, relative });
    }
    Ok(())
}

/// `(A + A^T) / 2`.
pub fn symmetrize(m: &Mat<f64>) -> Mat<f64> {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending; eigenvectors
/// are the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl EigenDecomposition {
    /// `U f(Lambda) U^T`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.values.len();
        let fu = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * f(self.values[j]));
        let out = &fu * self.vectors.transpose();
        symmetrize(&out)
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

pub fn eigh(m: MatRef<'_, f64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenDecomposition { values: vec![], vectors: Mat::zeros(0, 0) });
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::invalid("matrix", "eigendecomposition did not converge"))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap());
    let values = order.iter().map(|&k| s[k]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(EigenDecomposition { values, vectors })
}

pub fn eigvalsh(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    let mut v: Vec<f64> = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::invalid("matrix", "eigenvalue iteration did not converge"))?;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// Solves `A X = B` with partial-pivot LU.
pub fn lu_solve(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    a.partial_piv_lu().solve(b)
}

pub fn inverse(a: MatRef<'_, f64>) -> Mat<f64> {
    a.partial_piv_lu().inverse()
}

/// Largest absolute eigenvalue of a symmetric matrix (its operator 2-norm).
pub fn sym_norm(m: MatRef<'_, f64>) -> Result<f64> {
    let v = eigvalsh(m)?;
    Ok(v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

pub fn diag_scale(d: &[f64], m: MatRef<'_, f64>, e: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * e[j])
}

pub fn matvec(m: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|x| x * s).collect(),
            off: self.off.iter().map(|x| x * s).collect(),
        }
    }

    pub fn shifted(&self, z: f64) -> Self {
        Self { diag: self.diag.iter().map(|x| x + z).collect(), off: self.off.clone() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Thomas algorithm. Stable for the diagonally dominant shifted kinetic
    /// matrices used here; returns `None` on a zero pivot.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv == 0.0 {
            return None;
        }
        c[0] = if n > 1 { self.off[0] / piv } else { 0.0 };
        d[0] = b[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.off[i - 1] * c[i - 1];
            if piv == 0.0 {
                return None;
            }
            c[i] = if i + 1 < n { self.off[i] / piv } else { 0.0 };
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / piv;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Some(x)
    }

    /// Columns `cols` of the inverse, restricted to rows `rows`.
    pub fn inverse_block(&self, rows: &[usize], cols: &[usize]) -> Option<Mat<f64>> {
        let n = self.len();
        let mut out = Mat::zeros(rows.len(), cols.len());
        let mut e = vec![0.0; n];
        for (jj, &j) in cols.iter().enumerate() {
            e[j] = 1.0;
            let x = self.solve(&e)?;
            e[j] = 0.0;
            for (ii, &i) in rows.iter().enumerate() {
                out[(ii, jj)] = x[i];
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_dense() {
        let t = Tridiagonal { diag: vec![4.0, 5.0, 6.0, 7.0], off: vec![1.0, -2.0, 0.5] };
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = t.solve(&b).unwrap();
        let r = t.apply(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let inv = inverse(t.to_dense().as_ref());
        let blk = t.inverse_block(&[0, 1, 2, 3], &[2]).unwrap();
        for i in 0..4 {
            assert!((inv[(i, 2)] - blk[(i, 0)]).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetric_check() {
        let mut m = Mat::<f64>::identity(3, 3);
        assert!(check_symmetric(m.as_ref(), SYMMETRY_TOL).is_ok());
        m[(0, 1)] = 1e-3;
        assert!(matches!(check_symmetric(m.as_ref(), SYMMETRY_TOL), Err(Error::Asymmetric { .. })));
    }
}
