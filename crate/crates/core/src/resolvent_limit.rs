//! Zero-range limit of two resonant channels on a product of radial grids.
//!
//! The model is the s-wave sector of two relative coordinates `x` and `y`,
//! `H^eps = h^eps (x) 1 + 1 (x) h^eps` with `h^eps = h0 - V^eps` and
//! `V^eps(r) = eps^-2 lambda V(r / eps)` tuned to a zero-energy resonance
//! on the grid. As `eps -> 0` the one-coordinate operator converges to the
//! unitary point interaction, which on the grid is the kinetic operator with
//! a zero-flux inner face. Product-space operators act on matrices
//! `F[(i, j)] = sqrt(mu_x[i] mu_y[j]) f(x_i, y_j)`.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_resolvent::{kinetic_tridiagonal, InnerBoundary};
use crate::grid::{GridFunction, RadialGrid, Spacing};
use crate::linalg::{self, EigenDecomposition, Tridiagonal};
use crate::potential::{scale_potential, sphere_area, BasePotential, ScalingLaw};

/// Largest product-grid dimension assembled densely.
pub const PRODUCT_CAP: usize = 10_000;
pub const LIMIT_NODES: usize = 64;
pub const LIMIT_RMAX: f64 = 20.0;

/// Logarithmic grid with `n` nodes, node ratio `2^(1/4)` and last node `r_max`,
/// so that halving a length shifts a profile by exactly four nodes.
pub fn limit_grid(n: usize, r_max: f64) -> Result<Arc<RadialGrid>> {
    let ratio = 2f64.powf(0.25);
    let r_min = r_max / ratio.powi(n as i32 - 1);
    Ok(Arc::new(RadialGrid::build(n, r_max, Spacing::Logarithmic { r_min })?))
}

fn check_product(nx: usize, ny: usize) -> Result<()> {
    let dim = nx * ny;
    if dim > PRODUCT_CAP {
        return Err(Error::ProductTooLarge { dim, cap: PRODUCT_CAP });
    }
    Ok(())
}

/// Free two-coordinate Hamiltonian after the partial dilation `x -> x / eps`:
/// `eps^-2 k T_x + eps^2 k T_y + eps X` with `k = (m + 1) / (2m)`, `T = -Laplacian`
/// (s-wave) and `X` the cross-gradient block.
#[derive(Debug, Clone)]
pub struct ScaledFreeHamiltonian {
    pub epsilon: f64,
    pub mass: f64,
    grid_x: Arc<RadialGrid>,
    grid_y: Arc<RadialGrid>,
    laplacian_x: Tridiagonal,
    laplacian_y: Tridiagonal,
}

impl ScaledFreeHamiltonian {
    pub fn kinetic_coefficient(&self) -> f64 {
        (self.mass + 1.0) / (2.0 * self.mass)
    }

    /// Coefficients of the x-kinetic, y-kinetic and cross blocks.
    pub fn coefficients(&self) -> [f64; 3] {
        let k = self.kinetic_coefficient();
        let e = self.epsilon;
        [k / (e * e), k * e * e, e / self.mass]
    }

    pub fn dim(&self) -> usize {
        self.grid_x.len() * self.grid_y.len()
    }

    /// `eps^2` times the operator, so that the x block has coefficient `k`.
    pub fn normalized_dense(&self) -> Mat<f64> {
        let e2 = self.epsilon * self.epsilon;
        let mut m = self.to_dense();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                m[(i, j)] *= e2;
            }
        }
        m
    }

    /// Dense matrix with row index `i * n_y + j`.
    ///
    /// The cross-gradient `grad_x . grad_y` maps the s-wave sector of each
    /// coordinate into the p-wave sector, so its block vanishes here.
    pub fn to_dense(&self) -> Mat<f64> {
        let [cx, cy, _] = self.coefficients();
        let tx = self.laplacian_x.to_dense();
        let ty = self.laplacian_y.to_dense();
        let (nx, ny) = (tx.nrows(), ty.nrows());
        Mat::from_fn(nx * ny, nx * ny, |p, q| {
            let (i, j) = (p / ny, p % ny);
            let (k, l) = (q / ny, q % ny);
            let mut v = 0.0;
            if j == l {
                v += cx * tx[(i, k)];
            }
            if i == k {
                v += cy * ty[(j, l)];
            }
            v
        })
    }

    /// Applies the operator to a product-grid matrix.
    pub fn apply(&self, f: &Mat<f64>) -> Mat<f64> {
        let [cx, cy, _] = self.coefficients();
        apply_sum(&self.laplacian_x.scaled(cx), &self.laplacian_y.scaled(cy), f)
    }
}

/// `(A (x) 1 + 1 (x) B) F`.
fn apply_sum(a: &Tridiagonal, b: &Tridiagonal, f: &Mat<f64>) -> Mat<f64> {
    let (nx, ny) = (f.nrows(), f.ncols());
    let mut out = Mat::zeros(nx, ny);
    for j in 0..ny {
        let col: Vec<f64> = (0..nx).map(|i| f[(i, j)]).collect();
        let ac = a.apply(&col);
        for i in 0..nx {
            out[(i, j)] += ac[i];
        }
    }
    for i in 0..nx {
        let row: Vec<f64> = (0..ny).map(|j| f[(i, j)]).collect();
        let br = b.apply(&row);
        for j in 0..ny {
            out[(i, j)] += br[j];
        }
    }
    out
}

/// Partially dilated free Hamiltonian on `grid_x (x) grid_y`.
pub fn scaled_h0(
    epsilon: f64,
    mass: f64,
    grid_x: &Arc<RadialGrid>,
    grid_y: &Arc<RadialGrid>,
) -> Result<ScaledFreeHamiltonian> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 1], got {epsilon}")));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("m", format!("must be positive, got {mass}")));
    }
    check_product(grid_x.len(), grid_y.len())?;
    Ok(ScaledFreeHamiltonian {
        epsilon,
        mass,
        grid_x: grid_x.clone(),
        grid_y: grid_y.clone(),
        laplacian_x: kinetic_tridiagonal(grid_x, 3, 0.5, InnerBoundary::Regular)?,
        laplacian_y: kinetic_tridiagonal(grid_y, 3, 0.5, InnerBoundary::Regular)?,
    })
}

/// `h (x) 1 + 1 (x) h'` through the eigen-decompositions of `h` and `h'`.
#[derive(Debug, Clone)]
pub struct SeparableOperator {
    x: EigenDecomposition,
    y: EigenDecomposition,
    tri_x: Tridiagonal,
    tri_y: Tridiagonal,
}

impl SeparableOperator {
    pub fn new(x: Tridiagonal, y: Tridiagonal) -> Result<Self> {
        Ok(Self {
            x: linalg::eigh(x.to_dense().as_ref())?,
            y: linalg::eigh(y.to_dense().as_ref())?,
            tri_x: x,
            tri_y: y,
        })
    }

    pub fn lowest(&self) -> f64 {
        self.x.values[0] + self.y.values[0]
    }

    /// `(H + z) F`.
    pub fn apply_shifted(&self, z: f64, f: &Mat<f64>) -> Mat<f64> {
        let mut out = apply_sum(&self.tri_x, &self.tri_y, f);
        for j in 0..f.ncols() {
            for i in 0..f.nrows() {
                out[(i, j)] += z * f[(i, j)];
            }
        }
        out
    }

    /// `(H + z)^(-1) F`.
    pub fn resolvent(&self, z: f64, f: &Mat<f64>) -> Mat<f64> {
        let ux = &self.x.vectors;
        let uy = &self.y.vectors;
        let mut g = ux.transpose() * f * uy;
        for b in 0..g.ncols() {
            for a in 0..g.nrows() {
                g[(a, b)] /= self.x.values[a] + self.y.values[b] + z;
            }
        }
        ux * &g * uy.transpose()
    }
}

/// Weak-contact potential tuned to a zero-energy resonance on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteResonance {
    pub epsilon: f64,
    pub lambda_critical: f64,
    /// `eps^-2 lambda V(r / eps)` cell-averaged on the grid.
    pub potential: GridFunction,
    /// Zero-energy solution, normalized by `<V, psi> = 1`.
    pub profile: GridFunction,
}

/// Outward zero-energy recursion for `(h0 - lambda v) u = 0` in the reduced
/// variable `u = r psi`; returns `u` and the flux through the last face.
fn zero_energy_march(grid: &RadialGrid, v: &[f64], lambda: f64, m: f64) -> (Vec<f64>, f64) {
    let r = grid.nodes();
    let w = grid.weights();
    let n = r.len();
    let mut u = vec![0.0; n];
    u[0] = 1.0;
    let mut flux = 1.0 / r[0];
    for i in 0..n {
        flux -= 2.0 * m * w[i] * lambda * v[i] * u[i];
        if i + 1 < n {
            u[i + 1] = u[i] + flux * (r[i + 1] - r[i]);
        }
    }
    (u, flux)
}

/// Smallest strength at which `eps^-2 lambda V(r / eps)` has a zero-energy
/// resonance on `grid`, in the sense that the outward zero-energy solution
/// carries no flux past the potential.
pub fn discrete_resonance(
    base: &BasePotential,
    epsilon: f64,
    grid: &Arc<RadialGrid>,
    m: f64,
) -> Result<DiscreteResonance> {
    let law = ScalingLaw::weak_contact(epsilon, 3)?;
    let unit = scale_potential(&base.with_strength(1.0), &law)?.on_grid(grid);
    let v = unit.values();
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::invalid("epsilon", "potential vanishes on the grid"));
    }
    let flux = |lambda: f64| zero_energy_march(grid, v, lambda, m).1;
    let mut hi = 1e-3;
    let mut lo = 0.0;
    while flux(hi) > 0.0 {
        lo = hi;
        hi *= 1.05;
        if hi > 1e6 {
            return Err(Error::NoSignChange { lo: 1e-3, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if flux(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (u, _) = zero_energy_march(grid, v, lambda, m);
    let potential = GridFunction::new(grid.clone(), v.iter().map(|x| lambda * x).collect())?;
    let psi: Vec<f64> = u.iter().zip(grid.nodes()).map(|(u, r)| u / r).collect();
    let raw = GridFunction::new(grid.clone(), psi)?;
    let norm = raw.inner(&potential, 3);
    let profile = GridFunction::new(grid.clone(), raw.values().iter().map(|x| x / norm).collect())?;
    Ok(DiscreteResonance { epsilon, lambda_critical: lambda, potential, profile })
}

/// One resonant channel: rank one in the resonant coordinate for every
/// spectator mode, `sum_b |a_b><a_b| / den_b (x) |b><b|`.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    /// Column `b` is `a_b = (h0 + z + e_b)^(-1) e_0` on the resonant grid.
    pub sources: Mat<f64>,
    /// Spectator-shifted denominators `1 / c - a_b[0]`.
    pub denominators: Vec<f64>,
    spectator: Mat<f64>,
}

impl ChannelBlock {
    fn new(h0: &Tridiagonal, coupling: f64, spectator: &EigenDecomposition, z: f64) -> Result<Self> {
        let n = h0.len();
        let nb = spectator.values.len();
        let mut sources = Mat::zeros(n, nb);
        let mut denominators = Vec::with_capacity(nb);
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        for (b, &eb) in spectator.values.iter().enumerate() {
            let a = h0.shifted(z + eb).solve(&e0).ok_or(Error::Singular { smallest: 0.0 })?;
            let den = 1.0 / coupling - a[0];
            if !(den.abs() > 1e-300) {
                return Err(Error::DegenerateDenominator { value: den });
            }
            for i in 0..n {
                sources[(i, b)] = a[i];
            }
            denominators.push(den);
        }
        Ok(Self { sources, denominators, spectator: spectator.vectors.clone() })
    }

    /// Applies the block with the resonant coordinate along rows.
    fn apply(&self, f: &Mat<f64>) -> Mat<f64> {
        let g = f * &self.spectator;
        let nb = self.denominators.len();
        let mut coef = Mat::zeros(self.sources.nrows(), nb);
        for b in 0..nb {
            let s: f64 = (0..g.nrows()).map(|i| self.sources[(i, b)] * g[(i, b)]).sum();
            let c = s / self.denominators[b];
            for i in 0..coef.nrows() {
                coef[(i, b)] = c * self.sources[(i, b)];
            }
        }
        coef * self.spectator.transpose()
    }
}

/// The limit `W(z) = (H + z)^(-1) - (H0 + z)^(-1)` with both channels at the
/// unitary point interaction.
#[derive(Debug, Clone)]
pub struct LimitResolvent {
    pub z: f64,
    /// `sqrt(z) / (4 pi) |<sqrt(V), psi>|^2`.
    pub denominator_constant: f64,
    pub channel1: ChannelBlock,
    pub channel2: ChannelBlock,
    free: SeparableOperator,
    limit: SeparableOperator,
    grid_x: Arc<RadialGrid>,
    grid_y: Arc<RadialGrid>,
}

fn inner_face_coupling(grid: &RadialGrid, m: f64) -> f64 {
    let r = grid.nodes();
    (1.0 / (2.0 * m)) / (r[0] * grid.weights()[0])
}

/// Builds `W(z)` from a resonance profile `psi` of `V`.
pub fn limit_w(
    z: f64,
    psi: &GridFunction,
    v: &GridFunction,
    grid_x: &Arc<RadialGrid>,
    grid_y: &Arc<RadialGrid>,
    m: f64,
) -> Result<LimitResolvent> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("z", format!("must be positive, got {z}")));
    }
    check_product(grid_x.len(), grid_y.len())?;
    let norm = psi.inner(v, 3);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { value: norm });
    }
    let sqrt_v = GridFunction::new(v.grid().clone(), v.values().iter().map(|x| x.max(0.0).sqrt()).collect())?;
    let overlap = sphere_area(3) * psi.inner(&sqrt_v, 3);
    if overlap.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator { value: overlap.abs() });
    }
    let denominator_constant = z.sqrt() / (4.0 * PI) * overlap * overlap;

    let hx = kinetic_tridiagonal(grid_x, 3, m, InnerBoundary::Regular)?;
    let hy = kinetic_tridiagonal(grid_y, 3, m, InnerBoundary::Regular)?;
    let nx_inf = kinetic_tridiagonal(grid_x, 3, m, InnerBoundary::Resonant)?;
    let ny_inf = kinetic_tridiagonal(grid_y, 3, m, InnerBoundary::Resonant)?;
    let free = SeparableOperator::new(hx.clone(), hy.clone())?;
    let limit = SeparableOperator::new(nx_inf, ny_inf)?;
    let channel1 = ChannelBlock::new(&hx, inner_face_coupling(grid_x, m), &free.y, z)?;
    let channel2 = ChannelBlock::new(&hy, inner_face_coupling(grid_y, m), &free.x, z)?;
    Ok(LimitResolvent {
        z,
        denominator_constant,
        channel1,
        channel2,
        free,
        limit,
        grid_x: grid_x.clone(),
        grid_y: grid_y.clone(),
    })
}

impl LimitResolvent {
    pub fn apply(&self, f: &Mat<f64>) -> Mat<f64> {
        self.limit.resolvent(self.z, f) - self.free.resolvent(self.z, f)
    }

    pub fn apply_channel1(&self, f: &Mat<f64>) -> Mat<f64> {
        self.channel1.apply(f)
    }

    pub fn apply_channel2(&self, f: &Mat<f64>) -> Mat<f64> {
        self.channel2.apply(&f.transpose().to_owned()).transpose().to_owned()
    }

    /// Part of `W` not captured by the two single-channel blocks.
    pub fn apply_coupling(&self, f: &Mat<f64>) -> Mat<f64> {
        self.apply(f) - self.apply_channel1(f) - self.apply_channel2(f)
    }

    /// `(H0 + z)^(-1) + W(z)`.
    pub fn apply_full(&self, f: &Mat<f64>) -> Mat<f64> {
        self.free.resolvent(self.z, f) + self.apply(f)
    }

    /// The limit Hamiltonian `h_inf (x) 1 + 1 (x) h_inf`.
    pub fn hamiltonian(&self) -> &SeparableOperator {
        &self.limit
    }

    pub fn free_hamiltonian(&self) -> &SeparableOperator {
        &self.free
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid_x.len(), self.grid_y.len())
    }

    /// Dense matrix of `W` (row index `i * n_y + j`).
    pub fn to_dense(&self) -> Result<Mat<f64>> {
        let (nx, ny) = self.shape();
        check_product(nx, ny)?;
        let n = nx * ny;
        let mut out = Mat::zeros(n, n);
        for q in 0..n {
            let mut e = Mat::zeros(nx, ny);
            e[(q / ny, q % ny)] = 1.0;
            let w = self.apply(&e);
            for p in 0..n {
                out[(p, q)] = w[(p / ny, p % ny)];
            }
        }
        Ok(out)
    }
}

/// Residuals of `((H0 + z)^(-1) + W(z)) (H + z) f = f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub z: f64,
    /// `||S (H + z) f - f|| / ||f||` per test function.
    pub residuals: Vec<f64>,
    /// `max |<g, S (H + z) f> - <g, f>| / (||g|| ||f||)` over pairs of test functions.
    pub form_residual: f64,
    pub max_residual: f64,
}

fn frob(m: &Mat<f64>) -> f64 {
    linalg::frobenius(m.as_ref())
}

fn frob_inner(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * b[(i, j)];
        }
    }
    s
}

/// Checks the resolvent identity with `S = (H0 + z)^(-1) + W` where `w` may
/// be absent (free case) and `h` is the Hamiltonian it should invert.
pub fn verify_limit_identity(
    w: Option<&LimitResolvent>,
    free: &SeparableOperator,
    h: &SeparableOperator,
    z: f64,
    test_functions: &[Mat<f64>],
) -> IdentityReport {
    let outputs: Vec<Mat<f64>> = test_functions
        .iter()
        .map(|f| {
            let hf = h.apply_shifted(z, f);
            let mut s = free.resolvent(z, &hf);
            if let Some(w) = w {
                s = s + w.apply(&hf);
            }
            s
        })
        .collect();
    let residuals: Vec<f64> =
        outputs.iter().zip(test_functions).map(|(s, f)| frob(&(s - f)) / frob(f)).collect();
    let mut form_residual = 0.0f64;
    for g in test_functions {
        for (s, f) in outputs.iter().zip(test_functions) {
            let r = (frob_inner(g, s) - frob_inner(g, f)).abs() / (frob(g) * frob(f));
            form_residual = form_residual.max(r);
        }
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    IdentityReport { z, residuals, form_residual, max_residual }
}

/// Finite-eps resolvent difference `W^eps(z)` of the two-channel model.
#[derive(Debug, Clone)]
pub struct FiniteResolvent {
    pub resonance: DiscreteResonance,
    pub z: f64,
    interacting: SeparableOperator,
    free: SeparableOperator,
}

impl FiniteResolvent {
    pub fn new(base: &BasePotential, epsilon: f64, z: f64, grid: &Arc<RadialGrid>, m: f64) -> Result<Self> {
        let resonance = discrete_resonance(base, epsilon, grid, m)?;
        let h0 = kinetic_tridiagonal(grid, 3, m, InnerBoundary::Regular)?;
        let mut h = h0.clone();
        for (d, v) in h.diag.iter_mut().zip(resonance.potential.values()) {
            *d -= v;
        }
        let interacting = SeparableOperator::new(h.clone(), h)?;
        if interacting.lowest() + z <= 0.0 {
            return Err(Error::Singular { smallest: interacting.lowest() + z });
        }
        let free = SeparableOperator::new(h0.clone(), h0)?;
        Ok(Self { resonance, z, interacting, free })
    }

    pub fn apply(&self, f: &Mat<f64>) -> Mat<f64> {
        self.interacting.resolvent(self.z, f) - self.free.resolvent(self.z, f)
    }
}

/// Smooth random test functions on the product grid: sums of three
/// Gaussian bumps centred in `[0.5, 3]^2`, in the symmetric representation.
pub fn random_test_functions(
    grid_x: &RadialGrid,
    grid_y: &RadialGrid,
    count: usize,
    seed: u64,
) -> Vec<Mat<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mx = grid_x.measure(3);
    let my = grid_y.measure(3);
    (0..count)
        .map(|_| {
            let bumps: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)))
                .collect();
            Mat::from_fn(grid_x.len(), grid_y.len(), |i, j| {
                let (x, y) = (grid_x.nodes()[i], grid_y.nodes()[j]);
                let f: f64 = bumps
                    .iter()
                    .map(|&(c, a, b)| c * (-((x - a).powi(2) + (y - b).powi(2)) / (2.0 * 0.25)).exp())
                    .sum();
                (mx[i] * my[j]).sqrt() * f
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub z: f64,
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `discrepancies[k][t] = ||W^eps_k f_t - W f_t|| / ||f_t||`.
    pub discrepancies: Vec<Vec<f64>>,
    /// Whether every test function's discrepancy decreases strictly along eps.
    pub monotone: bool,
    /// First over last discrepancy, per test function.
    pub reductions: Vec<f64>,
}

/// Compares `W^eps(z) f` with `W(z) f` along a decreasing list of `eps`.
pub fn convergence_study(
    base: &BasePotential,
    epsilons: &[f64],
    z: f64,
    grid: &Arc<RadialGrid>,
    test_functions: &[Mat<f64>],
    m: f64,
) -> Result<ConvergenceReport> {
    if epsilons.is_empty() {
        return Err(Error::invalid("epsilons", "list is empty"));
    }
    if let Some(i) = epsilons.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(Error::NotDecreasing { index: i + 1 });
    }
    let first = discrete_resonance(base, epsilons[0], grid, m)
        .map_err(|e| Error::AtEpsilon { epsilon: epsilons[0], source: Box::new(e) })?;
    let w = limit_w(z, &first.profile, &first.potential, grid, grid, m)?;
    let limits: Vec<Mat<f64>> = test_functions.iter().map(|f| w.apply(f)).collect();
    let mut lambdas = Vec::new();
    let mut discrepancies = Vec::new();
    for &eps in epsilons {
        let fin = FiniteResolvent::new(base, eps, z, grid, m)
            .map_err(|e| Error::AtEpsilon { epsilon: eps, source: Box::new(e) })?;
        lambdas.push(fin.resonance.lambda_critical);
        discrepancies.push(
            test_functions
                .iter()
                .zip(&limits)
                .map(|(f, wf)| frob(&(fin.apply(f) - wf)) / frob(f))
                .collect::<Vec<_>>(),
        );
    }
    let nf = test_functions.len();
    let monotone = (0..nf).all(|t| discrepancies.windows(2).all(|w| w[1][t] < w[0][t]));
    let last = discrepancies.len() - 1;
    let reductions = (0..nf).map(|t| discrepancies[0][t] / discrepancies[last][t]).collect();
    Ok(ConvergenceReport { z, epsilons: epsilons.to_vec(), lambdas, discrepancies, monotone, reductions })
}

/// Channel-resolved Konno-Kuroda assembly on a small product grid.
#[derive(Debug, Clone)]
pub struct FourTermReport {
    /// `R0 B_j K_jk B_k R0` for `(j, k)` in `(1,1), (1,2), (2,1), (2,2)`.
    pub terms: [Mat<f64>; 4],
    /// Assembly with the single factor `sqrt(V(x) + V(y))`.
    pub single: Mat<f64>,
    /// `||sum(terms) - single|| / ||single||`.
    pub relative_difference: f64,
    /// Same comparison when the four terms are built from `K` of the single
    /// factor and sandwiched by `sqrt(V(x))`, `sqrt(V(y))`.
    pub shared_kernel_difference: f64,
}

/// Splits the resolvent difference of `h0 - V(x) - V(y)` into the two
/// diagonal and two off-diagonal channel terms.
pub fn four_term_assembly(vx: &GridFunction, vy: &GridFunction, z: f64, m: f64) -> Result<FourTermReport> {
    let (gx, gy) = (vx.grid(), vy.grid());
    let (nx, ny) = (gx.len(), gy.len());
    check_product(nx, ny)?;
    if !(z > 0.0) {
        return Err(Error::invalid("z", format!("must be positive, got {z}")));
    }
    let n = nx * ny;
    let free = SeparableOperator::new(
        kinetic_tridiagonal(gx, 3, m, InnerBoundary::Regular)?,
        kinetic_tridiagonal(gy, 3, m, InnerBoundary::Regular)?,
    )?;
    let mut r0 = Mat::zeros(n, n);
    for q in 0..n {
        let mut e = Mat::zeros(nx, ny);
        e[(q / ny, q % ny)] = 1.0;
        let col = free.resolvent(z, &e);
        for p in 0..n {
            r0[(p, q)] = col[(p / ny, p % ny)];
        }
    }
    let r0 = linalg::symmetrize(&r0);
    let b1: Vec<f64> = (0..n).map(|p| vx.values()[p / ny].max(0.0).sqrt()).collect();
    let b2: Vec<f64> = (0..n).map(|p| vy.values()[p % ny].max(0.0).sqrt()).collect();
    let b: Vec<f64> = (0..n).map(|p| (b1[p] * b1[p] + b2[p] * b2[p]).sqrt()).collect();
    let ones = vec![1.0; n];

    // single factor
    let br0 = linalg::diag_scale(&b, r0.as_ref(), &ones);
    let q = linalg::diag_scale(&ones, br0.as_ref(), &b);
    let one_minus = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - q[(i, j)]);
    let k_single = linalg::inverse(one_minus.as_ref());
    let single = linalg::symmetrize(&(br0.transpose() * &k_single * &br0));

    // stacked channel factor [B1; B2]
    let stacked: Vec<&Vec<f64>> = vec![&b1, &b2];
    let bj_r0: Vec<Mat<f64>> = stacked.iter().map(|bj| linalg::diag_scale(bj, r0.as_ref(), &ones)).collect();
    let big = Mat::from_fn(2 * n, 2 * n, |p, qq| {
        let (j, i) = (p / n, p % n);
        let (k, l) = (qq / n, qq % n);
        let v = bj_r0[j][(i, l)] * stacked[k][l];
        if p == qq {
            1.0 - v
        } else {
            -v
        }
    });
    let kk = linalg::inverse(big.as_ref());
    let block = |j: usize, k: usize| Mat::from_fn(n, n, |i, l| kk[(j * n + i, k * n + l)]);
    let term = |j: usize, k: usize| bj_r0[j].transpose() * block(j, k) * &bj_r0[k];
    let terms = [term(0, 0), term(0, 1), term(1, 0), term(1, 1)];
    let sum = &terms[0] + &terms[1] + &terms[2] + &terms[3];
    let scale = linalg::sym_norm(single.as_ref())?;
    let relative_difference = linalg::sym_norm(linalg::symmetrize(&(&sum - &single)).as_ref())? / scale;

    let shared = |j: usize, k: usize| bj_r0[j].transpose() * &k_single * &bj_r0[k];
    let shared_sum = shared(0, 0) + shared(0, 1) + shared(1, 0) + shared(1, 1);
    let shared_kernel_difference =
        linalg::sym_norm(linalg::symmetrize(&(&shared_sum - &single)).as_ref())? / scale;
    Ok(FourTermReport { terms, single, relative_difference, shared_kernel_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_resolvent::DEFAULT_MASS;
    use crate::potential::Profile;

    fn gaussian() -> BasePotential {
        BasePotential::new(Profile::Gaussian, 1.0, 1.0).unwrap()
    }

    #[test]
    fn identity_scaling_is_unscaled_h0() {
        let g = limit_grid(12, 5.0).unwrap();
        let h = scaled_h0(1.0, 1.0, &g, &g).unwrap();
        assert_eq!(h.coefficients(), [1.0, 1.0, 1.0]);
        let dense = h.to_dense();
        linalg::check_symmetric(dense.as_ref(), 1e-10).unwrap();
        let t = kinetic_tridiagonal(&g, 3, 0.5, InnerBoundary::Regular).unwrap();
        let sep = SeparableOperator::new(t.clone(), t).unwrap();
        let f = random_test_functions(&g, &g, 1, 3).remove(0);
        let a = h.apply(&f);
        let b = sep.apply_shifted(0.0, &f);
        assert!(frob(&(a - b)) < 1e-12 * frob(&f).max(1.0));
    }

    #[test]
    fn small_epsilon_suppresses_y_and_cross_blocks() {
        let g = limit_grid(10, 5.0).unwrap();
        let h = scaled_h0(0.01, 1.0, &g, &g).unwrap();
        let [cx, cy, cc] = h.coefficients();
        let k = h.kinetic_coefficient();
        assert!((cx * 1e-4 - k).abs() < 1e-12);
        assert!((cy / k - 1e-4).abs() < 1e-16);
        assert!((cc - 0.01).abs() < 1e-16);
        assert!(scaled_h0(0.0, 1.0, &g, &g).is_err());
        let big = Arc::new(RadialGrid::build(101, 5.0, Spacing::Linear).unwrap());
        assert!(matches!(scaled_h0(0.5, 1.0, &big, &big), Err(Error::ProductTooLarge { .. })));
    }

    #[test]
    fn discrete_resonance_has_flat_exterior() {
        let g = limit_grid(LIMIT_NODES, LIMIT_RMAX).unwrap();
        let res = discrete_resonance(&gaussian(), 0.1, &g, DEFAULT_MASS).unwrap();
        // continuum value is about 2.684; the coarse grid stays within a few percent
        assert!((res.lambda_critical / 2.684 - 1.0).abs() < 0.05, "{}", res.lambda_critical);
        let last = res.profile.values().len() - 1;
        let u_far = res.profile.values()[last] * g.nodes()[last];
        let u_mid = res.profile.values()[50] * g.nodes()[50];
        assert!((u_far / u_mid - 1.0).abs() < 1e-8);
        assert!((res.profile.inner(&res.potential, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halving_epsilon_shifts_the_resonance_by_four_nodes() {
        let g = limit_grid(LIMIT_NODES, LIMIT_RMAX).unwrap();
        let a = discrete_resonance(&gaussian(), 0.2, &g, DEFAULT_MASS).unwrap();
        let b = discrete_resonance(&gaussian(), 0.1, &g, DEFAULT_MASS).unwrap();
        assert!((a.lambda_critical / b.lambda_critical - 1.0).abs() < 1e-3);
    }

    fn small_limit(n: usize, z: f64) -> (Arc<RadialGrid>, LimitResolvent) {
        let g = limit_grid(n, 10.0).unwrap();
        let res = discrete_resonance(&gaussian(), 1.0, &g, DEFAULT_MASS).unwrap();
        let w = limit_w(z, &res.profile, &res.potential, &g, &g, DEFAULT_MASS).unwrap();
        (g, w)
    }

    #[test]
    fn limit_is_symmetric_positive_and_low_rank() {
        let (_, w) = small_limit(16, 1.0);
        let dense = w.to_dense().unwrap();
        let asym = linalg::max_abs((&dense - dense.transpose()).as_ref());
        assert!(asym <= 1e-10 * linalg::max_abs(dense.as_ref()));
        let ev = linalg::eigvalsh(linalg::symmetrize(&dense).as_ref()).unwrap();
        let top = ev.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(ev.iter().all(|&x| x > -1e-12 * top));
        let rank = ev.iter().filter(|x| x.abs() > 1e-10 * top).count();
        assert!(rank <= 2 * 16, "{rank}");
    }

    #[test]
    fn channel_swap_symmetry() {
        let (g, w) = small_limit(16, 1.0);
        for f in random_test_functions(&g, &g, 3, 11) {
            let a = w.apply(&f.transpose().to_owned()).transpose().to_owned();
            let b = w.apply(&f);
            assert!(frob(&(a - b)) < 1e-12 * frob(&f));
            let c1 = w.apply_channel1(&f.transpose().to_owned()).transpose().to_owned();
            let c2 = w.apply_channel2(&f);
            assert!(frob(&(c1 - c2)) < 1e-12 * frob(&f));
        }
    }

    #[test]
    fn single_channel_block_is_exact() {
        // with only x resonant, W equals channel 1 exactly
        let (g, w) = small_limit(16, 0.7);
        let hx = kinetic_tridiagonal(&g, 3, DEFAULT_MASS, InnerBoundary::Resonant).unwrap();
        let hy = kinetic_tridiagonal(&g, 3, DEFAULT_MASS, InnerBoundary::Regular).unwrap();
        let one = SeparableOperator::new(hx, hy).unwrap();
        for f in random_test_functions(&g, &g, 2, 5) {
            let exact = one.resolvent(0.7, &f) - w.free_hamiltonian().resolvent(0.7, &f);
            let block = w.apply_channel1(&f);
            assert!(frob(&(exact - block)) < 1e-10 * frob(&f));
        }
    }

    #[test]
    fn denominator_scales_with_root_z() {
        let (_, a) = small_limit(12, 1.0);
        let (_, b) = small_limit(12, 2.0);
        assert!((b.denominator_constant / a.denominator_constant - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unnormalized_profile_rejected() {
        let g = limit_grid(12, 10.0).unwrap();
        let res = discrete_resonance(&gaussian(), 1.0, &g, DEFAULT_MASS).unwrap();
        let doubled = GridFunction::new(g.clone(), res.profile.values().iter().map(|x| 2.0 * x).collect()).unwrap();
        assert!(matches!(
            limit_w(1.0, &doubled, &res.potential, &g, &g, DEFAULT_MASS),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn identity_holds_for_limit_and_free_cases() {
        let (g, w) = small_limit(16, 1.0);
        let fs = random_test_functions(&g, &g, 5, 1);
        let rep = verify_limit_identity(Some(&w), w.free_hamiltonian(), w.hamiltonian(), 1.0, &fs);
        assert!(rep.max_residual < 1e-10, "{rep:?}");
        assert!(rep.form_residual < 1e-10);
        let free = verify_limit_identity(None, w.free_hamiltonian(), w.free_hamiltonian(), 1.0, &fs);
        assert!(free.max_residual < 1e-10);
    }

    #[test]
    fn four_terms_sum_to_single_factor() {
        let g = limit_grid(14, 10.0).unwrap();
        let res = discrete_resonance(&gaussian(), 1.0, &g, DEFAULT_MASS).unwrap();
        let rep = four_term_assembly(&res.potential, &res.potential, 1.0, DEFAULT_MASS).unwrap();
        assert!(rep.relative_difference < 1e-8, "{}", rep.relative_difference);
        assert!(rep.shared_kernel_difference.is_finite());
    }

    #[test]
    fn finite_epsilon_approaches_limit() {
        let g = limit_grid(LIMIT_NODES, LIMIT_RMAX).unwrap();
        let fs = random_test_functions(&g, &g, 2, 7);
        let eps = [0.2, 0.1, 0.05, 0.025, 0.0125];
        let rep = convergence_study(&gaussian(), &eps, 1.0, &g, &fs, DEFAULT_MASS).unwrap();
        assert!(rep.monotone, "{:?}", rep.discrepancies);
        assert!(rep.reductions.iter().all(|&r| r >= 4.0), "{:?}", rep.reductions);
    }
}
