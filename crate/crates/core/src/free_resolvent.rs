//! Free s-wave Hamiltonian, its resolvent and its square root on radial grids.
//!
//! Operators act on the symmetric representation `v_i = sqrt(mu_i) psi(r_i)`
//! where `mu_i` is the lumped radial measure, so every discretized
//! self-adjoint operator is a symmetric matrix and multiplication operators
//! are diagonal. In d=3 the kinetic term is a finite-volume Laplacian for the
//! reduced function `u = r psi` with `u(0) = 0`; in other dimensions it is a
//! finite-volume Laplacian for `psi` with zero flux through the origin. The
//! outer Dirichlet condition sits at the grid's ghost node.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::linalg::{self, Tridiagonal, SYMMETRY_TOL};
use crate::special::{bessel_i0_scaled, bessel_k0_scaled};

pub const DEFAULT_MASS: f64 = 0.5;

/// Dense symmetric operator on a radial grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: Mat<f64>,
    grid: Arc<RadialGrid>,
    dim: u32,
    mass: f64,
    label: String,
}

impl OperatorMatrix {
    pub fn new(entries: Mat<f64>, grid: Arc<RadialGrid>, dim: u32, mass: f64, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != grid.len() || entries.ncols() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: entries.nrows() });
        }
        linalg::check_symmetric(entries.as_ref(), SYMMETRY_TOL)?;
        Ok(Self { entries, grid, dim, mass, label: label.into() })
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<f64> {
        self.entries
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Same grid and metadata, new entries.
    pub fn with_entries(&self, entries: Mat<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(entries, self.grid.clone(), self.dim, self.mass, label)
    }

    /// `self - diag(v)`.
    pub fn minus_diagonal(&self, v: &[f64], label: impl Into<String>) -> Result<Self> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: v.len() });
        }
        let mut e = self.entries.clone();
        for (i, x) in v.iter().enumerate() {
            e[(i, i)] -= x;
        }
        self.with_entries(e, label)
    }
}

/// Behaviour of the reduced wave function at the origin (d=3 only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerBoundary {
    /// `u(0) = 0`: the free operator.
    Regular,
    /// `u'(0) = 0`: functions may behave like `1/r`, the s-wave point
    /// interaction with infinite scattering length.
    Resonant,
}

fn check_dim(d: u32) -> Result<()> {
    if !(2..=4).contains(&d) {
        return Err(Error::invalid("d", format!("radial kinetic operator supports d in 2..=4, got {d}")));
    }
    Ok(())
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("m", format!("mass must be positive, got {m}")));
    }
    Ok(())
}

/// Face conductances and cell sizes of the finite-volume Laplacian; the
/// matrix is `D^(-1/2) S D^(-1/2)` with `S` the weighted path Laplacian.
struct Conductances {
    /// `faces[k]` sits below node `k`; `faces[n]` is the outer face.
    faces: Vec<f64>,
    cells: Vec<f64>,
}

fn conductances(grid: &RadialGrid, d: u32, m: f64, inner: InnerBoundary) -> Result<Conductances> {
    check_dim(d)?;
    check_mass(m)?;
    if inner == InnerBoundary::Resonant && d != 3 {
        return Err(Error::invalid("inner", "resonant inner boundary is only defined for d=3"));
    }
    let r = grid.nodes();
    let n = r.len();
    let cells = if d == 3 { grid.weights().to_vec() } else { grid.measure(d) };
    let conductance = |a: f64, b: f64| -> f64 {
        if d == 3 {
            1.0 / (b - a)
        } else {
            (0.5 * (a + b)).powi(d as i32 - 1) / (b - a)
        }
    };
    let mut faces = vec![0.0; n + 1];
    faces[0] = match (d, inner) {
        (3, InnerBoundary::Regular) => 1.0 / r[0],
        _ => 0.0,
    };
    for k in 1..n {
        faces[k] = conductance(r[k - 1], r[k]);
    }
    faces[n] = conductance(r[n - 1], grid.ghost());
    Ok(Conductances { faces, cells })
}

impl Conductances {
    fn tridiagonal(&self, pref: f64) -> Tridiagonal {
        let (c, cell) = (&self.faces, &self.cells);
        let n = cell.len();
        let diag = (0..n).map(|i| pref * (c[i] + c[i + 1]) / cell[i]).collect();
        let off = (0..n - 1).map(|i| -pref * c[i + 1] / (cell[i] * cell[i + 1]).sqrt()).collect();
        Tridiagonal { diag, off }
    }
}

/// Tridiagonal finite-volume matrix of `-(1/2m) Laplacian` (s-wave).
pub fn kinetic_tridiagonal(grid: &RadialGrid, d: u32, m: f64, inner: InnerBoundary) -> Result<Tridiagonal> {
    Ok(conductances(grid, d, m, inner)?.tridiagonal(1.0 / (2.0 * m)))
}

/// Step in `ln s` of the quadrature behind [`kinetic_sqrt`].
const SQRT_LOG_STEP: f64 = 0.25;

/// Square root of the kinetic matrix, accurate entry by entry even when its
/// spectrum spans many decades (as on long logarithmic grids, where a dense
/// eigen-decomposition loses the low end).
///
/// Uses `sqrt(K) = (2/pi) int_0^inf K (K + s^2)^(-1) ds` on a trapezoid rule in
/// `ln s`. Every `(K + s^2)^(-1)` is formed by elimination on the path
/// Laplacian written through series conductances, so no step subtracts.
pub fn kinetic_sqrt(grid: &RadialGrid, d: u32, m: f64, inner: InnerBoundary) -> Result<Mat<f64>> {
    let cond = conductances(grid, d, m, inner)?;
    let k = cond.tridiagonal(1.0);
    let (c, cell) = (&cond.faces, &cond.cells);
    let n = cell.len();
    let sqrt_cell: Vec<f64> = cell.iter().map(|x| x.sqrt()).collect();
    let k_max = k.diag.iter().fold(0.0f64, |a, &x| a.max(x));
    let s_lo = 1e-8 / grid.ghost();
    let s_hi = 1e8 * k_max.sqrt();
    let steps = ((s_hi / s_lo).ln() / SQRT_LOG_STEP).ceil() as usize;
    let h = (s_hi / s_lo).ln() / steps as f64;

    let mut acc = Mat::<f64>::zeros(n, n);
    let mut fwd = vec![0.0; n];
    let mut bwd = vec![0.0; n];
    let mut up = vec![0.0; n];
    let mut gdiag = vec![0.0; n];
    for step in 0..=steps {
        let s = s_lo * (h * step as f64).exp();
        let s2 = s * s;
        let weight = if step == 0 || step == steps { 0.5 } else { 1.0 } * h * s;
        // excess conductance to ground seen from each node, left and right
        for i in 0..n {
            let left = if i == 0 { c[0] } else { c[i] * fwd[i - 1] / (c[i] + fwd[i - 1]) };
            fwd[i] = s2 * cell[i] + left;
        }
        for i in (0..n).rev() {
            let right = if i == n - 1 { c[n] } else { c[i + 1] * bwd[i + 1] / (c[i + 1] + bwd[i + 1]) };
            bwd[i] = s2 * cell[i] + right;
        }
        for i in 0..n {
            let left = if i == 0 { c[0] } else { c[i] * fwd[i - 1] / (c[i] + fwd[i - 1]) };
            let right = if i == n - 1 { c[n] } else { c[i + 1] * bwd[i + 1] / (c[i + 1] + bwd[i + 1]) };
            gdiag[i] = 1.0 / (left + right + s2 * cell[i]);
            up[i] = if i == 0 { 0.0 } else { c[i] / (c[i] + bwd[i]) };
        }
        for j in 0..n {
            let gjj = gdiag[j] * cell[j];
            let xjj = if s2 <= k.diag[j] {
                1.0 - s2 * gjj
            } else {
                // K G on the diagonal, free of cancellation for large s
                let mut v = k.diag[j] * gjj;
                if j > 0 {
                    v += k.off[j - 1] * gdiag[j] * (c[j] / (c[j] + fwd[j - 1])) * sqrt_cell[j - 1] * sqrt_cell[j];
                }
                if j + 1 < n {
                    v += k.off[j] * gdiag[j] * up[j + 1] * sqrt_cell[j + 1] * sqrt_cell[j];
                }
                v
            };
            acc[(j, j)] += weight * xjj;
            let mut g = gdiag[j];
            for i in j + 1..n {
                g *= up[i];
                if g < 1e-300 {
                    break;
                }
                acc[(i, j)] -= weight * s2 * g * sqrt_cell[i] * sqrt_cell[j];
            }
        }
    }
    let pref = (1.0 / (2.0 * m)).sqrt();
    let two_over_pi = 2.0 / std::f64::consts::PI;
    Ok(Mat::from_fn(n, n, |i, j| {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        // tails: X -> 1 below s_lo and X -> K / s^2 above s_hi
        let mut v = acc[(a, b)];
        if a == b {
            v += s_lo + k.diag[a] / s_hi;
        } else if a == b + 1 {
            v += k.off[b] / s_hi;
        }
        pref * two_over_pi * v
    }))
}

/// Discretized free s-wave Hamiltonian `-(1/2m) Laplacian` with Dirichlet
/// conditions at the origin (reduced function) and beyond `r_max`.
pub fn discretize_h0(grid: &Arc<RadialGrid>, d: u32, m: f64) -> Result<OperatorMatrix> {
    let t = kinetic_tridiagonal(grid, d, m, InnerBoundary::Regular)?;
    OperatorMatrix::new(t.to_dense(), grid.clone(), d, m, "H0")
}

/// s-wave kernel of `(H0 + z)^(-1)` with respect to the radial measure
/// `r^(d-1) dr`, for real `z > 0`.
pub fn radial_green_kernel(d: u32, z: f64, r: f64, rp: f64, m: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("z", format!("only real z > 0 is supported, got {z}")));
    }
    if !(r > 0.0 && rp > 0.0) {
        return Err(Error::invalid("r", "radii must be positive"));
    }
    check_mass(m)?;
    let k = (2.0 * m * z).sqrt();
    let (lo, hi) = if r < rp { (r, rp) } else { (rp, r) };
    match d {
        3 => {
            // 2m sinh(k lo) e^{-k hi} / (k r r')
            let s = 0.5 * ((-k * (hi - lo)).exp() - (-k * (hi + lo)).exp());
            Ok(2.0 * m * s / (k * r * rp))
        }
        2 => Ok(2.0 * m * bessel_i0_scaled(k * lo) * bessel_k0_scaled(k * hi) * (k * (lo - hi)).exp()),
        _ => Err(Error::invalid("d", format!("Green kernel defined for d=2,3, got {d}"))),
    }
}

/// Dense `(M + z)^(-1)`.
pub fn resolvent_matrix(m: &OperatorMatrix, z: f64) -> Result<Mat<f64>> {
    let n = m.len();
    let mut a = m.entries().clone();
    for i in 0..n {
        a[(i, i)] += z;
    }
    let inv = linalg::inverse(a.as_ref());
    if !inv.as_ref().is_all_finite() {
        let smallest = smallest_abs_eigenvalue(&a)?;
        return Err(Error::Singular { smallest });
    }
    Ok(linalg::symmetrize(&inv))
}

fn smallest_abs_eigenvalue(a: &Mat<f64>) -> Result<f64> {
    Ok(linalg::eigvalsh(a.as_ref())?.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs())))
}

/// Principal square root of a symmetric positive-semidefinite operator.
pub fn operator_sqrt(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let evd = linalg::eigh(m.entries().as_ref())?;
    let top = evd.values.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * top.max(1.0);
    if let Some(&low) = evd.values.first() {
        if low < -tol {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: low });
        }
    }
    let s = evd.apply_fn(|x| x.max(0.0).sqrt());
    m.with_entries(s, format!("sqrt({})", m.label()))
}

/// Solves `(M + z) g = f` for a physical grid function `f`.
pub fn solve_resolvent(m: &OperatorMatrix, z: f64, f: &GridFunction) -> Result<GridFunction> {
    let n = m.len();
    if f.values().len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.values().len() });
    }
    let d = m.dim();
    let b = f.to_symmetric(d);
    let mut a = m.entries().clone();
    for i in 0..n {
        a[(i, i)] += z;
    }
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let x = linalg::lu_solve(a.as_ref(), rhs.as_ref());
    let xs: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let ax = linalg::matvec(a.as_ref(), &xs);
    let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let scale = linalg::norm2(&b).max(f64::MIN_POSITIVE);
    if !xs.iter().all(|v| v.is_finite()) || res / scale > 1e-8 {
        return Err(Error::Singular { smallest: smallest_abs_eigenvalue(&a)? });
    }
    GridFunction::from_symmetric(m.grid().clone(), &xs, d)
}

/// Lumped-measure estimate of the resolvent kernel at nodes `(i, j)` from a
/// dense discrete resolvent.
pub fn kernel_from_matrix(grid: &RadialGrid, d: u32, resolvent: &Mat<f64>, i: usize, j: usize) -> f64 {
    let mu = grid.measure(d);
    resolvent[(i, j)] / (mu[i] * mu[j]).sqrt()
}
