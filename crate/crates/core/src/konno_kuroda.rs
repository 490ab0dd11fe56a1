//! Factorized resolvent differences `R(z) - R0(z) = R0 B (1 - Q)^(-1) B R0`
//! and the norms that measure how separate potentials decouple as the
//! scaling parameter goes to zero.

use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::free_resolvent::{discretize_h0, resolvent_matrix, OperatorMatrix};
use crate::grid::{GridFunction, RadialGrid, Spacing};
use crate::linalg;
use crate::potential::{sphere_area, sqrt_product_l1, PotentialFamily, PotentialSum, RadialPotential};
use crate::quadrature::piecewise;

/// Smallest admissible |eigenvalue| of `1 - Q(z)`.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    KonnoKuroda,
    Direct,
}

#[derive(Debug, Clone)]
pub struct ResolventDifference {
    pub matrix: OperatorMatrix,
    pub z: f64,
    pub assembly: Assembly,
}

impl ResolventDifference {
    /// Largest |eigenvalue| of `self - other`, relative to that of `other`.
    pub fn relative_distance(&self, other: &ResolventDifference) -> Result<f64> {
        let a = self.matrix.entries();
        let b = other.matrix.entries();
        let diff = linalg::symmetrize(&(a - b));
        let scale = linalg::sym_norm(b.as_ref())?;
        let num = linalg::sym_norm(diff.as_ref())?;
        Ok(if scale > 0.0 { num / scale } else { num })
    }
}

fn check_potential(v: &GridFunction) -> Result<Vec<f64>> {
    v.values()
        .iter()
        .enumerate()
        .map(|(i, &x)| if x >= 0.0 { Ok(x.sqrt()) } else { Err(Error::NegativePotential { index: i, value: x }) })
        .collect()
}

fn check_z(z: f64) -> Result<()> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("z", format!("must be positive, got {z}")));
    }
    Ok(())
}

/// `R0 B (1 - Q)^(-1) B R0` with `B = sqrt(V)`.
pub fn assemble_resolvent_diff(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<ResolventDifference> {
    check_z(z)?;
    let b = check_potential(v)?;
    let h0 = discretize_h0(v.grid(), d, m)?;
    let r0 = resolvent_matrix(&h0, z)?;
    let n = b.len();
    let br0 = linalg::diag_scale(&b, r0.as_ref(), &vec![1.0; n]);
    let mut one_minus_q = linalg::diag_scale(&vec![1.0; n], br0.as_ref(), &b);
    for i in 0..n {
        for j in 0..n {
            one_minus_q[(i, j)] = if i == j { 1.0 } else { 0.0 } - one_minus_q[(i, j)];
        }
    }
    let one_minus_q = linalg::symmetrize(&one_minus_q);
    let smallest = linalg::eigvalsh(one_minus_q.as_ref())?
        .iter()
        .fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if smallest < SINGULAR_TOL {
        return Err(Error::Singular { smallest });
    }
    let x = linalg::lu_solve(one_minus_q.as_ref(), br0.as_ref());
    let diff = linalg::symmetrize(&(br0.transpose() * &x));
    Ok(ResolventDifference { matrix: h0.with_entries(diff, "R - R0")?, z, assembly: Assembly::KonnoKuroda })
}

/// `(H0 - V + z)^(-1) - (H0 + z)^(-1)` by dense inversion.
pub fn direct_resolvent_diff(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<ResolventDifference> {
    check_z(z)?;
    check_potential(v)?;
    let h0 = discretize_h0(v.grid(), d, m)?;
    let h = h0.minus_diagonal(v.values(), "H")?;
    let r = resolvent_matrix(&h, z)?;
    let r0 = resolvent_matrix(&h0, z)?;
    let diff = linalg::symmetrize(&(&r - &r0));
    Ok(ResolventDifference { matrix: h0.with_entries(diff, "R - R0")?, z, assembly: Assembly::Direct })
}

/// First Born term `R0 V R0`.
pub fn born_term(v: &GridFunction, z: f64, d: u32, m: f64) -> Result<OperatorMatrix> {
    check_z(z)?;
    check_potential(v)?;
    let h0 = discretize_h0(v.grid(), d, m)?;
    let r0 = resolvent_matrix(&h0, z)?;
    let vr0 = linalg::diag_scale(v.values(), r0.as_ref(), &vec![1.0; v.values().len()]);
    h0.with_entries(linalg::symmetrize(&(&r0 * &vr0)), "R0 V R0")
}

/// Bound-state energies of `H0 - V` located as the values `-z` at which
/// an eigenvalue of `Q(z)` crosses 1.
pub fn bound_states_by_sweep(v: &GridFunction, d: u32, m: f64) -> Result<Vec<f64>> {
    use crate::birman_schwinger::{bs_count_above_one, Z_MIN};
    let vmax = v.values().iter().fold(0.0f64, |a, &x| a.max(x));
    let z_hi = vmax + 1.0;
    let count = |z: f64| bs_count_above_one(v, z, d, m);
    let total = count(Z_MIN)?;
    let mut energies = Vec::with_capacity(total);
    for k in 1..=total {
        // largest z with at least k eigenvalues of Q(z) above one
        let (mut lo, mut hi) = (Z_MIN.ln(), z_hi.ln());
        while hi - lo > 1e-11 {
            let mid = 0.5 * (lo + hi);
            if count(mid.exp())? >= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        energies.push(-(0.5 * (lo + hi)).exp());
    }
    energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(energies)
}

/// Norms along a decreasing list of scaling parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectReport {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `ln(value)` against `ln(eps)`; infinite when
    /// every value vanishes.
    pub fitted_exponent: f64,
    /// Entries whose quadrature error estimate exceeds 1% of the value.
    pub flagged: Vec<bool>,
}

impl DefectReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn check_decreasing(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::invalid("epsilons", "list is empty"));
    }
    if let Some(i) = eps.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(Error::NotDecreasing { index: i + 1 });
    }
    if let Some(&e) = eps.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::invalid("epsilons", format!("must be positive, got {e}")));
    }
    Ok(())
}

const NORM_TOL: f64 = 1e-12;

fn report(eps: &[f64], entries: Vec<(f64, f64)>) -> DefectReport {
    let values: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let flagged = entries.iter().map(|&(v, err)| err > 0.01 * v.abs() && v != 0.0).collect();
    DefectReport { epsilons: eps.to_vec(), fitted_exponent: fit_power_law(eps, &values), values, flagged }
}

/// `|| sqrt(V1^eps) sqrt(U^eps) ||_1` with `U^eps` the sum of `u` at each eps.
pub fn cross_term_norm(v1: &PotentialFamily, u: &[PotentialFamily], epsilons: &[f64]) -> Result<DefectReport> {
    check_decreasing(epsilons)?;
    let d = v1.dim;
    let entries = epsilons
        .iter()
        .map(|&e| {
            let a = v1.at(e)?;
            let b = PotentialSum(u.iter().map(|f| f.at(e)).collect::<Result<_>>()?);
            Ok(sqrt_product_l1(&a, &b, d, NORM_TOL))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(epsilons, entries))
}

/// `|| (sqrt(V2^eps) + sqrt(V3))^2 - V2^eps - V3 ||_1`.
pub fn additivity_defect(v2: &PotentialFamily, v3: &PotentialFamily, epsilons: &[f64]) -> Result<DefectReport> {
    check_decreasing(epsilons)?;
    let d = v2.dim;
    let entries = epsilons
        .iter()
        .map(|&e| {
            let a = v2.at(e)?;
            let b = v3.at(e)?;
            let cutoff = a.support_cutoff().max(b.support_cutoff());
            let mut breaks = a.breakpoints();
            breaks.extend(b.breakpoints());
            let (val, err) = piecewise(
                |r| {
                    let (x, y) = (a.value(r), b.value(r));
                    ((x.sqrt() + y.sqrt()).powi(2) - x - y).abs() * r.powi(d as i32 - 1)
                },
                0.0,
                cutoff,
                &breaks,
                NORM_TOL,
            );
            Ok((sphere_area(d) * val, sphere_area(d) * err))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(epsilons, entries))
}

/// Comparison of the low-lying spectrum of the full Hamiltonian with the
/// spectrum predicted by adding single-potential resolvent differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub epsilon: f64,
    pub z: f64,
    /// Largest eigenvalues of `R(z)` for the full potential.
    pub actual: Vec<f64>,
    /// Largest eigenvalues of `R0 + sum_k (R_k - R0)`.
    pub predicted: Vec<f64>,
    pub discrepancy: f64,
}

/// Number of resolvent eigenvalues compared.
pub const LOW_LYING: usize = 4;
pub const INDEPENDENCE_NODES: usize = 300;
pub const INDEPENDENCE_RMAX: f64 = 40.0;

/// Logarithmic grid resolving lengths from `eps / 100` to `r_max`.
pub fn independence_grid(epsilon: f64, n: usize) -> Result<Arc<RadialGrid>> {
    let r_min = (1e-2 * epsilon).min(1e-2);
    Ok(Arc::new(RadialGrid::build(n, INDEPENDENCE_RMAX, Spacing::Logarithmic { r_min })?))
}

fn top_eigenvalues(m: &Mat<f64>, k: usize) -> Result<Vec<f64>> {
    let mut ev = linalg::eigvalsh(m.as_ref())?;
    ev.reverse();
    ev.truncate(k);
    Ok(ev)
}

/// Discrepancy `delta(eps)` for the potentials present in `families`
/// (d=3, reduced mass `m`), on an `n`-node grid.
pub fn independence_spectrum_check(
    families: &[PotentialFamily],
    epsilon: f64,
    z: f64,
    n: usize,
    m: f64,
) -> Result<IndependenceReport> {
    check_z(z)?;
    if families.is_empty() {
        return Err(Error::invalid("families", "need at least one potential"));
    }
    let d = families[0].dim;
    let grid = independence_grid(epsilon, n)?;
    let pots: Vec<GridFunction> = families.iter().map(|f| Ok(f.at(epsilon)?.on_grid(&grid))).collect::<Result<_>>()?;
    let h0 = discretize_h0(&grid, d, m)?;
    let r0 = resolvent_matrix(&h0, z)?;
    let mut predicted = r0.clone();
    let mut total = vec![0.0; grid.len()];
    for v in &pots {
        let rk = resolvent_matrix(&h0.minus_diagonal(v.values(), "H_k")?, z)?;
        predicted = &predicted + &(&rk - &r0);
        for (t, x) in total.iter_mut().zip(v.values()) {
            *t += x;
        }
    }
    let full = resolvent_matrix(&h0.minus_diagonal(&total, "H")?, z)?;
    let actual = top_eigenvalues(&full, LOW_LYING)?;
    let predicted = top_eigenvalues(&linalg::symmetrize(&predicted), LOW_LYING)?;
    let discrepancy = actual.iter().zip(&predicted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(IndependenceReport { epsilon, z, actual, predicted, discrepancy })
}

/// [`independence_spectrum_check`] along a decreasing list of scaling parameters.
pub fn independence_sweep(
    families: &[PotentialFamily],
    epsilons: &[f64],
    z: f64,
    n: usize,
    m: f64,
) -> Result<Vec<IndependenceReport>> {
    check_decreasing(epsilons)?;
    epsilons
        .iter()
        .map(|&e| {
            independence_spectrum_check(families, e, z, n, m)
                .map_err(|err| Error::AtEpsilon { epsilon: e, source: Box::new(err) })
        })
        .collect()
}
