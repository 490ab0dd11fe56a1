//! Birman-Schwinger operators `Q(z) = sqrt(V) (H0 + z)^(-1) sqrt(V)`,
//! zero-energy resonances and the boundary coefficients of their profiles.
//!
//! `Q(z)` is assembled from the same discrete kinetic operator as `H0`, so the
//! counting principle (eigenvalues of `Q(z)` above 1 versus eigenvalues of
//! `H0 - V` below `-z`) holds exactly on every grid.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::free_resolvent::{kinetic_tridiagonal, InnerBoundary, OperatorMatrix};
use crate::grid::{GridFunction, RadialGrid, Spacing};
use crate::linalg::{self, Tridiagonal};
use crate::potential::{scale_potential, BasePotential, ScaledPotential, ScalingLaw};

/// Smallest spectral parameter at which `Q(z)` is evaluated.
pub const Z_MIN: f64 = 1e-8;
/// Relative tolerance of the critical-coupling bisection.
pub const BISECTION_RTOL: f64 = 1e-6;
/// Relative fit residual above which a boundary fit is not asymptotic.
pub const FIT_RESIDUAL_TOL: f64 = 1e-3;
/// Default number of nodes for resonance searches.
pub const DEFAULT_NODES: usize = 800;

const Z_LADDER: [f64; 3] = [Z_MIN, 2.0 * Z_MIN, 4.0 * Z_MIN];

/// Grid suited to zero-energy problems for a potential supported in
/// `[0, support]`: three quarters of the nodes uniformly inside `support`,
/// the rest geometrically out to `1e6 * support`.
pub fn resonance_grid(n: usize, support: f64) -> Result<Arc<RadialGrid>> {
    if !(support > 0.0 && support.is_finite()) {
        return Err(Error::invalid("support", format!("must be positive, got {support}")));
    }
    let n_inner = (3 * n) / 4;
    let spacing = Spacing::Hybrid { r_switch: support, n_inner };
    Ok(Arc::new(RadialGrid::build(n, 1e6 * support, spacing)?))
}

/// `sqrt(V)` restricted to the nodes where `V > 0`.
#[derive(Debug, Clone)]
struct SqrtPotential {
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SqrtPotential {
    fn new(v: &[f64]) -> Result<Self> {
        let mut support = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if !(x >= 0.0) {
                return Err(Error::NegativePotential { index: i, value: x });
            }
            if x > 0.0 {
                support.push(i);
                values.push(x.sqrt());
            }
        }
        Ok(Self { support, values })
    }

    fn embed(&self, n: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for ((&i, &b), &xi) in self.support.iter().zip(&self.values).zip(x) {
            out[i] = b * xi;
        }
        out
    }
}

/// Compact form of `Q(z)` on the support of the potential.
#[derive(Debug, Clone)]
struct BsKernel {
    grid: Arc<RadialGrid>,
    kinetic: Tridiagonal,
    sqrt_v: SqrtPotential,
    dim: u32,
}

impl BsKernel {
    fn new(v: &GridFunction, d: u32, m: f64) -> Result<Self> {
        let grid = v.grid().clone();
        let kinetic = kinetic_tridiagonal(&grid, d, m, InnerBoundary::Regular)?;
        let sqrt_v = SqrtPotential::new(v.values())?;
        Ok(Self { grid, kinetic, sqrt_v, dim: d })
    }

    fn block(&self, z: f64) -> Result<Mat<f64>> {
        let s = &self.sqrt_v.support;
        let k = s.len();
        if k == 0 {
            return Ok(Mat::zeros(0, 0));
        }
        let inv = self
            .kinetic
            .shifted(z)
            .inverse_block(s, s)
            .ok_or(Error::Singular { smallest: 0.0 })?;
        let b = &self.sqrt_v.values;
        let q = Mat::from_fn(k, k, |i, j| b[i] * inv[(i, j)] * b[j]);
        Ok(linalg::symmetrize(&q))
    }

    fn eigenvalues(&self, z: f64) -> Result<Vec<f64>> {
        let q = self.block(z)?;
        if q.nrows() == 0 {
            return Ok(Vec::new());
        }
        linalg::eigvalsh(q.as_ref())
    }

    fn top(&self, z: f64) -> Result<f64> {
        Ok(self.eigenvalues(z)?.last().copied().unwrap_or(0.0))
    }

    /// Top eigenvalue extrapolated to `z -> 0+` from the ladder
    /// `{z_min, 2 z_min, 4 z_min}` with the model `a + b sqrt(z) + c z`.
    fn top_at_threshold(&self) -> Result<f64> {
        let mu: Vec<f64> = Z_LADDER.iter().map(|&z| self.top(z)).collect::<Result<_>>()?;
        Ok(extrapolate_sqrt_ladder(&mu))
    }

    /// Zero-energy solution `H0^(-1) sqrt(V) phi` in the physical representation.
    fn reconstruct(&self, phi: &[f64], z: f64) -> Result<GridFunction> {
        let n = self.grid.len();
        let rhs = self.sqrt_v.embed(n, phi);
        let x = self.kinetic.shifted(z).solve(&rhs).ok_or(Error::Singular { smallest: 0.0 })?;
        GridFunction::from_symmetric(self.grid.clone(), &x, self.dim)
    }
}

/// Richardson extrapolation of values at `z, 2z, 4z` to `z = 0` assuming
/// `mu(z) = a + b sqrt(z) + c z`.
pub fn extrapolate_sqrt_ladder(mu: &[f64]) -> f64 {
    let s = std::f64::consts::SQRT_2;
    // Solve the 3x3 system in the variables (a, b sqrt(z0), c z0).
    let rows = [[1.0, 1.0, 1.0], [1.0, s, 2.0], [1.0, 2.0, 4.0]];
    let a = Mat::from_fn(3, 3, |i, j| rows[i][j]);
    let b = Mat::from_fn(3, 1, |i, _| mu[i]);
    linalg::lu_solve(a.as_ref(), b.as_ref())[(0, 0)]
}

fn check_z(z: f64) -> Result<()> {
    if !(z >= Z_MIN * (1.0 - 1e-12) && z.is_finite()) {
        return Err(Error::invalid("z", format!("must be at least {Z_MIN:e}, got {z}")));
    }
    Ok(())
}

/// Dense `sqrt(V) (H0 + z)^(-1) sqrt(V)` on the full grid of `v`.
pub fn bs_operator(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<OperatorMatrix> {
    check_z(z)?;
    let kernel = BsKernel::new(v, d, m)?;
    let block = kernel.block(z)?;
    let n = v.grid().len();
    let mut full = Mat::zeros(n, n);
    let s = &kernel.sqrt_v.support;
    for (a, &i) in s.iter().enumerate() {
        for (b, &j) in s.iter().enumerate() {
            full[(i, j)] = block[(a, b)];
        }
    }
    OperatorMatrix::new(full, v.grid().clone(), d, m, "Q(z)")
}

/// Largest eigenvalue of `Q(z)`.
pub fn bs_top_eigenvalue(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<f64> {
    check_z(z)?;
    BsKernel::new(v, d, m)?.top(z)
}

/// Largest eigenvalue of `Q(z)` in the limit `z -> 0+`.
pub fn bs_top_at_threshold(v: &GridFunction, d: u32, m: f64) -> Result<f64> {
    BsKernel::new(v, d, m)?.top_at_threshold()
}

/// Number of eigenvalues of `Q(z)` strictly above 1.
pub fn bs_count_above_one(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<usize> {
    check_z(z)?;
    Ok(BsKernel::new(v, d, m)?.eigenvalues(z)?.iter().filter(|&&x| x > 1.0).count())
}

/// Least-squares fit `psi(r) ~ C / r + D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFit {
    pub c: f64,
    pub d: f64,
    /// Root-mean-square residual relative to the root-mean-square of `psi`.
    pub residual: f64,
    pub points: usize,
    pub asymptotic: bool,
}

/// Fits `C / r + D` to `psi` on `[2 * support_radius, r_max / 2]`.
pub fn boundary_fit(psi: &GridFunction, support_radius: f64) -> Result<BoundaryFit> {
    let grid = psi.grid();
    boundary_fit_window(psi, 2.0 * support_radius, 0.5 * grid.r_max())
}

/// Fits `C / r + D` to `psi` on the nodes inside `[lo, hi]`.
pub fn boundary_fit_window(psi: &GridFunction, lo: f64, hi: f64) -> Result<BoundaryFit> {
    const MIN_POINTS: usize = 3;
    let pts: Vec<(f64, f64)> = psi
        .grid()
        .nodes()
        .iter()
        .zip(psi.values())
        .filter(|(&r, _)| r >= lo && r <= hi)
        .map(|(&r, &v)| (r, v))
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::FitWindowTooSmall { lo, hi, points: pts.len(), min: MIN_POINTS });
    }
    // Columns 1/r and 1, each scaled to unit norm before the normal equations.
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let n1 = pts.iter().map(|(r, _)| r.powi(-2)).sum::<f64>().sqrt();
    let n2 = (pts.len() as f64).sqrt();
    for &(r, v) in &pts {
        let a = 1.0 / (r * n1);
        let b = 1.0 / n2;
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        t1 += a * v;
        t2 += b * v;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-14 {
        return Err(Error::FitWindowTooSmall { lo, hi, points: pts.len(), min: MIN_POINTS });
    }
    let c = (s22 * t1 - s12 * t2) / det / n1;
    let d = (s11 * t2 - s12 * t1) / det / n2;
    let (mut res, mut norm) = (0.0, 0.0);
    for &(r, v) in &pts {
        res += (v - c / r - d).powi(2);
        norm += v * v;
    }
    let residual = if norm > 0.0 { (res / norm).sqrt() } else { res.sqrt() };
    Ok(BoundaryFit { c, d, residual, points: pts.len(), asymptotic: residual <= FIT_RESIDUAL_TOL })
}

/// Outcome of a critical-coupling search.
#[derive(Debug, Clone)]
pub struct ResonanceReport {
    /// Strength of the base potential at which the scaled potential is resonant.
    pub lambda_critical: f64,
    /// Top eigenvalue of `Q(0+)` at `lambda_critical`.
    pub bs_top_eigenvalue: f64,
    /// Gap between the two largest eigenvalues of `Q(0+)` at `lambda_critical`.
    pub top_gap: f64,
    pub boundary_c: f64,
    pub boundary_d: f64,
    pub fit: BoundaryFit,
    /// Zero-energy solution normalized by `<V, psi> = 1`.
    pub resonance_profile: GridFunction,
    pub potential: ScaledPotential,
}

/// Locates the smallest strength in `bracket` at which `base` scaled by `law`
/// has a zero-energy resonance (three-dimensional, reduced mass 1/2).
pub fn find_resonance_coupling(base: &BasePotential, law: &ScalingLaw, bracket: (f64, f64)) -> Result<ResonanceReport> {
    find_resonance_coupling_with(base, law, bracket, DEFAULT_NODES, crate::free_resolvent::DEFAULT_MASS)
}

pub fn find_resonance_coupling_with(
    base: &BasePotential,
    law: &ScalingLaw,
    bracket: (f64, f64),
    n: usize,
    m: f64,
) -> Result<ResonanceReport> {
    let d = law.dim;
    if d != 3 {
        return Err(Error::invalid("dim", "zero-energy resonances are searched in d=3 only"));
    }
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let unit = scale_potential(&base.with_strength(1.0), law)?;
    let grid = resonance_grid(n, crate::potential::RadialPotential::support_cutoff(&unit))?;
    let kernel = BsKernel::new(&unit.on_grid(&grid), d, m)?;

    // Q is linear in the strength, so its threshold top eigenvalue is too.
    let mu_unit = kernel.top_at_threshold()?;
    let deficit = |lambda: f64| lambda * mu_unit - 1.0;
    if !(deficit(lo) < 0.0 && deficit(hi) > 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while (b - a) > BISECTION_RTOL * 0.5 * (a + b) {
        let mid = 0.5 * (a + b);
        if deficit(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let lambda = 0.5 * (a + b);

    let q = kernel.block(Z_MIN)?;
    let evd = linalg::eigh(q.as_ref())?;
    let k = evd.values.len();
    let top_gap = if k > 1 { lambda * (evd.values[k - 1] - evd.values[k - 2]) } else { f64::INFINITY };
    if top_gap < 1e-8 {
        return Err(Error::DegenerateTopEigenvalue { gap: top_gap });
    }
    let phi = evd.vector(k - 1);
    let raw = kernel.reconstruct(&phi, 0.0)?;
    let potential = scale_potential(&base.with_strength(lambda), law)?;
    let v = potential.on_grid(&grid);
    let norm = raw.inner(&v, d);
    if norm.abs() < 1e-300 {
        return Err(Error::NotNormalized { value: norm });
    }
    let profile = GridFunction::new(grid.clone(), raw.values().iter().map(|x| x / norm).collect())?;
    let support = crate::potential::RadialPotential::support_cutoff(&potential);
    let fit = boundary_fit(&profile, support)?;
    Ok(ResonanceReport {
        lambda_critical: lambda,
        bs_top_eigenvalue: lambda * mu_unit,
        top_gap,
        boundary_c: fit.c,
        boundary_d: fit.d,
        fit,
        resonance_profile: profile,
        potential,
    })
}

/// Adds a regular (subcritical, unscaled) potential to a resonance profile:
/// returns the solution of `psi' = psi + H0^(-1) V3 psi'` in d=3.
pub fn add_regular_potential(report: &ResonanceReport, v3: &GridFunction, m: f64) -> Result<GridFunction> {
    let grid = report.resonance_profile.grid().clone();
    if !Arc::ptr_eq(&grid, v3.grid()) && **v3.grid() != *grid {
        return Err(Error::invalid("v3", "must live on the resonance grid"));
    }
    let k = kinetic_tridiagonal(&grid, 3, m, InnerBoundary::Regular)?;
    let psi = report.resonance_profile.to_symmetric(3);
    let rhs = k.apply(&psi);
    let mut shifted = k.clone();
    for (dd, v) in shifted.diag.iter_mut().zip(v3.values()) {
        *dd -= v;
    }
    let x = shifted.solve(&rhs).ok_or(Error::Singular { smallest: 0.0 })?;
    GridFunction::from_symmetric(grid, &x, 3)
}

/// The 2x2 Birman-Schwinger kernel of two resonant channels at one `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoResonanceMatrix {
    pub z: f64,
    pub entries: [[f64; 2]; 2],
}

impl TwoResonanceMatrix {
    pub fn diagonal(&self) -> [f64; 2] {
        [self.entries[0][0], self.entries[1][1]]
    }

    pub fn off_diagonal(&self) -> [f64; 2] {
        [self.entries[0][1], self.entries[1][0]]
    }

    pub fn determinant(&self) -> f64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let e = &self.entries;
        (e[0][1] - e[1][0]).abs() <= tol * e[0][1].abs().max(e[1][0].abs()).max(f64::MIN_POSITIVE)
    }

    /// Solves `entries x = rhs`.
    pub fn solve(&self, rhs: [f64; 2]) -> Result<[f64; 2]> {
        let det = self.determinant();
        let scale = self.entries.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::Singular { smallest: det.abs() });
        }
        let e = &self.entries;
        Ok([(e[1][1] * rhs[0] - e[0][1] * rhs[1]) / det, (e[0][0] * rhs[1] - e[1][0] * rhs[0]) / det])
    }
}

/// Two identical particles, each coupled to a third one by the same
/// potential tuned to resonance, in a box of radius `box_radius`.
#[derive(Debug, Clone)]
pub struct TwoChannelSetup {
    pub lambda_critical: f64,
    /// Top eigenvalue of the channel operator at `z = 0` (1 up to rounding).
    pub channel_top: f64,
    kernel: BsKernel,
    /// Normalized top eigenvector of the channel operator, on the support.
    phi: Vec<f64>,
    /// Eigen-decomposition of the one-coordinate kinetic operator.
    energies: Vec<f64>,
    modes: Mat<f64>,
}

pub const TWO_CHANNEL_NODES: usize = 200;
pub const TWO_CHANNEL_BOX: f64 = 20.0;

impl TwoChannelSetup {
    pub fn new(base: &BasePotential, n: usize, box_radius: f64, m: f64) -> Result<Self> {
        let grid = Arc::new(RadialGrid::build(n, box_radius, Spacing::Linear)?);
        let law = ScalingLaw::unscaled(3)?;
        let unit = scale_potential(&base.with_strength(1.0), &law)?;
        let unit_kernel = BsKernel::new(&unit.on_grid(&grid), 3, m)?;
        let mu = unit_kernel.top(0.0)?;
        if !(mu > 0.0) {
            return Err(Error::invalid("base", "potential has no attractive channel"));
        }
        let lambda = 1.0 / mu;
        let pot = scale_potential(&base.with_strength(lambda), &law)?;
        let kernel = BsKernel::new(&pot.on_grid(&grid), 3, m)?;
        let evd = linalg::eigh(kernel.block(0.0)?.as_ref())?;
        let k = evd.values.len();
        let channel_top = evd.values[k - 1];
        if (channel_top - 1.0).abs() > 1e-8 {
            return Err(Error::NotResonant { top: channel_top, tol: 1e-8 });
        }
        let phi = evd.vector(k - 1);
        let h = linalg::eigh(kernel.kinetic.to_dense().as_ref())?;
        Ok(Self { lambda_critical: lambda, channel_top, kernel, phi, energies: h.values, modes: h.vectors })
    }

    /// Entries of the 2x2 kernel at spectral parameter `z`.
    pub fn matrix(&self, z: f64) -> Result<TwoResonanceMatrix> {
        if !(z >= 0.0) {
            return Err(Error::invalid("z", format!("must be nonnegative, got {z}")));
        }
        let q = self.kernel.block(z)?;
        let qphi = linalg::matvec(q.as_ref(), &self.phi);
        let diag = linalg::dot(&self.phi, &qphi) - 1.0;

        // Cross-channel overlap <sqrt(V) phi (x) chi, R0(z) chi (x) sqrt(V) phi>,
        // with chi the spectator ground state, in the product eigenbasis.
        let n = self.energies.len();
        let bphi = self.kernel.sqrt_v.embed(n, &self.phi);
        let alpha: Vec<f64> = (0..n).map(|a| (0..n).map(|i| self.modes[(i, a)] * bphi[i]).sum()).collect();
        // chi is the first mode, so its expansion coefficients are e_0.
        let off = alpha[0] * alpha[0] / (2.0 * self.energies[0] + z);
        Ok(TwoResonanceMatrix { z, entries: [[diag, off], [off, diag]] })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.kernel.grid
    }
}

/// Two-resonance kernel for `base` on the default box.
pub fn two_resonance_matrix(base: &BasePotential, z: f64) -> Result<TwoResonanceMatrix> {
    TwoChannelSetup::new(base, TWO_CHANNEL_NODES, TWO_CHANNEL_BOX, crate::free_resolvent::DEFAULT_MASS)?.matrix(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_resolvent::discretize_h0;
    use crate::potential::Profile;
    use crate::spectrum::eig_spectrum;
    use std::f64::consts::PI;

    fn square(strength: f64) -> BasePotential {
        BasePotential::new(Profile::SquareWell, strength, 1.0).unwrap()
    }

    fn gaussian(strength: f64) -> BasePotential {
        BasePotential::new(Profile::Gaussian, strength, 1.0).unwrap()
    }

    fn on_grid(base: &BasePotential, grid: &Arc<RadialGrid>) -> GridFunction {
        scale_potential(base, &ScalingLaw::unscaled(3).unwrap()).unwrap().on_grid(grid)
    }

    /// RK4 for `u'' = -2 m lambda V(r) u` with `u(0) = 0`, `u'(0) = 1`; returns `u'(r_end)`.
    fn shoot(base: &BasePotential, lambda: f64, r_end: f64, steps: usize) -> f64 {
        let m = 0.5;
        let f = |r: f64, u: f64| -2.0 * m * lambda * base.shape(r) * u;
        let h = r_end / steps as f64;
        let (mut u, mut p) = (0.0, 1.0);
        for i in 0..steps {
            let r = i as f64 * h;
            let (k1u, k1p) = (p, f(r, u));
            let (k2u, k2p) = (p + 0.5 * h * k1p, f(r + 0.5 * h, u + 0.5 * h * k1u));
            let (k3u, k3p) = (p + 0.5 * h * k2p, f(r + 0.5 * h, u + 0.5 * h * k2u));
            let (k4u, k4p) = (p + h * k3p, f(r + h, u + h * k3u));
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        }
        p
    }

    fn shooting_critical(base: &BasePotential, r_end: f64) -> f64 {
        let (mut a, mut b) = (0.5, 0.5);
        while shoot(base, b, r_end, 4000) > 0.0 {
            a = b;
            b += 0.25;
        }
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if shoot(base, mid, r_end, 4000) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn shooting_oracle_reproduces_square_well() {
        // the square-well kink sits on a step boundary, so RK4 stays fourth order
        let lc = shooting_critical(&square(1.0), 1.0);
        assert!((lc - PI * PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_potential_gives_zero_matrix() {
        let g = resonance_grid(64, 1.0).unwrap();
        let v = GridFunction::new(g.clone(), vec![0.0; 64]).unwrap();
        let q = bs_operator(&v, Z_MIN, 3, 0.5).unwrap();
        assert_eq!(linalg::max_abs(q.entries().as_ref()), 0.0);
    }

    #[test]
    fn negative_potential_rejected() {
        let g = resonance_grid(64, 1.0).unwrap();
        let mut vals = vec![0.0; 64];
        vals[3] = -1.0;
        let v = GridFunction::new(g, vals).unwrap();
        assert!(matches!(bs_operator(&v, Z_MIN, 3, 0.5), Err(Error::NegativePotential { index: 3, .. })));
        let v = GridFunction::new(resonance_grid(64, 1.0).unwrap(), vec![0.0; 64]).unwrap();
        assert!(bs_operator(&v, 0.0, 3, 0.5).is_err());
    }

    #[test]
    fn linear_in_coupling() {
        let g = resonance_grid(200, 8.0).unwrap();
        let a = bs_top_eigenvalue(&on_grid(&gaussian(1.3), &g), 1e-3, 3, 0.5).unwrap();
        let b = bs_top_eigenvalue(&on_grid(&gaussian(2.6), &g), 1e-3, 3, 0.5).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn square_well_top_eigenvalue() {
        let g = resonance_grid(800, 1.0).unwrap();
        let top = bs_top_eigenvalue(&on_grid(&square(1.0), &g), Z_MIN, 3, 0.5).unwrap();
        assert!((top - 4.0 / (PI * PI)).abs() < 1e-3, "{top}");
    }

    #[test]
    fn square_well_critical_coupling() {
        let law = ScalingLaw::unscaled(3).unwrap();
        let rep = find_resonance_coupling(&square(1.0), &law, (1.0, 5.0)).unwrap();
        let exact = PI * PI / 4.0;
        assert!((rep.lambda_critical / exact - 1.0).abs() < 1e-4, "{}", rep.lambda_critical);
        assert!((rep.bs_top_eigenvalue - 1.0).abs() < 1e-5);
        // <V, psi> = 1 fixes the 1/r tail at C = 2m = 1 and leaves D ~ 0
        assert!((rep.boundary_c - 1.0).abs() < 1e-3, "{}", rep.boundary_c);
        assert!(rep.boundary_d.abs() < 1e-3 * rep.boundary_c.abs());
        assert!(rep.fit.asymptotic);
        let half = bs_top_at_threshold(&on_grid(&square(rep.lambda_critical / 2.0), rep.resonance_profile.grid()), 3, 0.5)
            .unwrap();
        assert!((half - 0.5).abs() < 1e-5);
    }

    #[test]
    fn gaussian_critical_coupling_matches_shooting() {
        let law = ScalingLaw::unscaled(3).unwrap();
        let rep = find_resonance_coupling(&gaussian(1.0), &law, (1.0, 5.0)).unwrap();
        let oracle = shooting_critical(&gaussian(1.0), 8.0);
        assert!((rep.lambda_critical / oracle - 1.0).abs() < 1e-4, "{} vs {oracle}", rep.lambda_critical);
    }

    #[test]
    fn no_sign_change_reported() {
        let law = ScalingLaw::unscaled(3).unwrap();
        assert!(matches!(
            find_resonance_coupling(&square(1.0), &law, (0.1, 1.0)),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn contact_scaling_rescales_critical_strength() {
        // eps^-3 V(r/eps) is unitarily equivalent to eps^-2 (eps^-1 V), so the
        // resonant strength is eps times the unscaled one
        let eps = 0.1;
        let law = ScalingLaw::contact(eps, 3).unwrap();
        let rep = find_resonance_coupling_with(&square(1.0), &law, (0.01, 1.0), 400, 0.5).unwrap();
        let base = find_resonance_coupling_with(&square(1.0), &ScalingLaw::unscaled(3).unwrap(), (1.0, 5.0), 400, 0.5)
            .unwrap();
        assert!((rep.lambda_critical / (eps * base.lambda_critical) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn synthetic_fit_recovery() {
        let g = Arc::new(RadialGrid::build(100, 50.0, Spacing::Logarithmic { r_min: 0.1 }).unwrap());
        let psi = GridFunction::from_fn(g.clone(), |r| 3.0 / r + 2.0);
        let fit = boundary_fit(&psi, 0.5).unwrap();
        assert!((fit.c - 3.0).abs() < 1e-10 && (fit.d - 2.0).abs() < 1e-10);
        let flat = GridFunction::from_fn(g.clone(), |_| 1.0);
        assert!(boundary_fit(&flat, 0.5).unwrap().c.abs() < 1e-10);
        assert!(matches!(boundary_fit(&psi, 20.0), Err(Error::FitWindowTooSmall { .. })));
    }

    #[test]
    fn counting_principle_on_small_grid() {
        let g = resonance_grid(200, 1.0).unwrap();
        let h0 = discretize_h0(&g, 3, 0.5).unwrap();
        for lambda in [1.0, 3.0, 30.0, 80.0] {
            let v = on_grid(&square(lambda), &g);
            let h = h0.minus_diagonal(v.values(), "H").unwrap();
            let bound = eig_spectrum(&h).unwrap().count_below(-Z_MIN);
            assert_eq!(bs_count_above_one(&v, Z_MIN, 3, 0.5).unwrap(), bound, "lambda={lambda}");
        }
    }

    #[test]
    fn two_resonance_structure() {
        let setup = TwoChannelSetup::new(&gaussian(1.0), 120, 20.0, 0.5).unwrap();
        let small = setup.matrix(Z_MIN).unwrap();
        let large = setup.matrix(1e-4).unwrap();
        assert!(small.is_symmetric(1e-14));
        assert!(small.diagonal()[0].abs() < large.diagonal()[0].abs());
        assert!(small.off_diagonal()[0].abs() > 100.0 * small.diagonal()[0].abs());
        let x = small.solve([1.0, -0.5]).unwrap();
        let e = small.entries;
        assert!((e[0][0] * x[0] + e[0][1] * x[1] - 1.0).abs() < 1e-10);
        assert!((e[1][0] * x[0] + e[1][1] * x[1] + 0.5).abs() < 1e-10);
    }
}
