//! Effective one-dimensional operators for three-body problems with
//! zero-range forces, and the spectral diagnostics used on them: positivity
//! and accumulation thresholds, geometric ratios, the two-dimensional
//! three-body kernel and its hyperradial reduction.

use std::f64::consts::{LN_10, PI};
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_resolvent::{kinetic_sqrt, kinetic_tridiagonal, InnerBoundary, OperatorMatrix};
use crate::grid::{RadialGrid, Spacing};
use crate::linalg;
use crate::quadrature::tanh_sinh;
use crate::spectrum::{eig_spectrum, SpectrumReport};

/// Largest admissible `r_min` of an effective-operator grid.
pub const MAX_R_MIN: f64 = 1e-4;
/// Smallest admissible `r_max` of an effective-operator grid.
pub const MIN_R_MAX: f64 = 1e2;
/// Spread of successive ratios above which a spectrum is not geometric.
pub const GEOMETRIC_TOL: f64 = 0.10;
/// Largest accepted relative drift of a threshold under refinement.
pub const DRIFT_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveKind {
    /// `sqrt(-Laplacian) - C / r`.
    ContactImage,
    /// `sqrt(-Laplacian) - C log(1/r)` for `r <= 1`, nothing beyond.
    WeakImage,
    /// `(1/m)(-Laplacian) - c / r` in the hyperradius of three particles in the plane.
    ThreeBody2d,
}

impl EffectiveKind {
    fn potential(self, r: f64) -> f64 {
        match self {
            Self::ContactImage | Self::ThreeBody2d => 1.0 / r,
            Self::WeakImage => {
                if r <= 1.0 {
                    -r.ln()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Logarithmic grid with a fixed number of nodes per decade.
pub fn log_grid(r_min: f64, r_max: f64, nodes_per_decade: usize) -> Result<Arc<RadialGrid>> {
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::invalid("r_min", format!("need 0 < r_min < r_max, got {r_min}, {r_max}")));
    }
    if nodes_per_decade == 0 {
        return Err(Error::invalid("nodes_per_decade", "must be positive"));
    }
    let n = ((r_max / r_min).log10() * nodes_per_decade as f64).round() as usize + 1;
    Ok(Arc::new(RadialGrid::build(n, r_max, Spacing::Logarithmic { r_min })?))
}

fn check_scale_bracket(grid: &RadialGrid) -> Result<()> {
    if !grid.is_logarithmic() {
        return Err(Error::NotLogarithmic);
    }
    let (r_min, r_max) = (grid.r_min(), grid.r_max());
    if r_min > MAX_R_MIN * (1.0 + 1e-12) || r_max < MIN_R_MAX * (1.0 - 1e-12) {
        return Err(Error::ScaleBracketTooNarrow { r_min, r_max });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    pub kind: EffectiveKind,
    pub coupling: f64,
    pub dim: u32,
    pub mass: f64,
    pub matrix: OperatorMatrix,
}

impl EffectiveOperator {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.matrix.grid()
    }

    pub fn spectrum(&self) -> Result<SpectrumReport> {
        eig_spectrum(&self.matrix)
    }
}

fn effective_matrix(kind: EffectiveKind, coupling: f64, d: u32, grid: &Arc<RadialGrid>, m: f64) -> Result<Mat<f64>> {
    let mut h = match kind {
        EffectiveKind::ContactImage | EffectiveKind::WeakImage => {
            if !(d == 2 || d == 3) {
                return Err(Error::invalid("d", format!("images are defined for d in {{2, 3}}, got {d}")));
            }
            kinetic_sqrt(grid, d, m, InnerBoundary::Regular)?
        }
        EffectiveKind::ThreeBody2d => {
            if d != 2 {
                return Err(Error::invalid("d", format!("three-body operator is planar, got d={d}")));
            }
            // two planar relative coordinates: s-wave in four dimensions
            kinetic_tridiagonal(grid, 4, 0.5 * m, InnerBoundary::Regular)?.to_dense()
        }
    };
    for (i, &r) in grid.nodes().iter().enumerate() {
        h[(i, i)] -= coupling * kind.potential(r);
    }
    Ok(h)
}

/// Builds the effective operator on a logarithmic grid. For the images `m`
/// sets the kinetic part `sqrt(-(1/2m) Laplacian)`; for the three-body
/// operator it is the particle mass.
pub fn effective_operator(
    kind: EffectiveKind,
    coupling: f64,
    d: u32,
    grid: &Arc<RadialGrid>,
    m: f64,
) -> Result<EffectiveOperator> {
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return Err(Error::invalid("C", format!("must be non-negative, got {coupling}")));
    }
    check_scale_bracket(grid)?;
    let h = effective_matrix(kind, coupling, d, grid, m)?;
    let matrix = OperatorMatrix::new(linalg::symmetrize(&h), grid.clone(), d, m, format!("{kind:?}"))?;
    Ok(EffectiveOperator { kind, coupling, dim: d, mass: m, matrix })
}

/// Eigenvalues of `r^(1/2) sqrt(-Laplacian) r^(1/2)`: the contact image at
/// coupling `C` has exactly as many negative eigenvalues as there are
/// values below `C`.
fn contact_pencil(d: u32, grid: &Arc<RadialGrid>) -> Result<Vec<f64>> {
    let s = kinetic_sqrt(grid, d, 0.5, InnerBoundary::Regular)?;
    let half: Vec<f64> = grid.nodes().iter().map(|r| r.sqrt()).collect();
    let m = linalg::diag_scale(&half, s.as_ref(), &half);
    linalg::eigvalsh(linalg::symmetrize(&m).as_ref())
}

/// Counting function of a sorted spectrum, linear between eigenvalues.
fn smooth_count(values: &[f64], c: f64) -> f64 {
    let k = values.partition_point(|&v| v <= c);
    let (lo, hi) = if k == 0 {
        (0, 1)
    } else if k >= values.len() {
        (values.len() - 2, values.len() - 1)
    } else {
        (k - 1, k)
    };
    lo as f64 + (c - values[lo]) / (values[hi] - values[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSettings {
    pub r_max: f64,
    /// Decades spanned by the shorter grid of each pair.
    pub decades: u32,
    pub nodes_per_decade: usize,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        Self { r_max: 1e2, decades: 7, nodes_per_decade: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdLevel {
    pub nodes_per_decade: usize,
    pub c0: f64,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub kind: EffectiveKind,
    pub dim: u32,
    pub c0: f64,
    pub c1: f64,
    /// Largest relative change of `C0` or `C1` under the last refinement.
    pub grid_refinement_drift: f64,
    pub levels: Vec<ThresholdLevel>,
    pub flagged: bool,
}

fn thresholds_at(d: u32, bracket: (f64, f64), s: &ThresholdSettings) -> Result<ThresholdLevel> {
    let r_short = s.r_max * 10f64.powi(-(s.decades as i32));
    let short = log_grid(r_short, s.r_max, s.nodes_per_decade)?;
    let long = log_grid(0.1 * r_short, s.r_max, s.nodes_per_decade)?;
    let longest = log_grid(0.01 * r_short, s.r_max, s.nodes_per_decade)?;
    check_scale_bracket(&short)?;
    let mu_short = contact_pencil(d, &short)?;
    let mu_long = contact_pencil(d, &long)?;
    let mu_longest = contact_pencil(d, &longest)?;

    // lowest pencil value approaches C0 like a / L^2 + b / L^3 in the log-length L
    let l_short = (s.r_max / short.r_min()).ln();
    let rows: Vec<[f64; 4]> = [(l_short, mu_short[0]), (l_short + LN_10, mu_long[0]), (l_short + 2.0 * LN_10, mu_longest[0])]
        .iter()
        .map(|&(l, mu)| [1.0, l.powi(-2), l.powi(-3), mu])
        .collect();
    let c0 = solve3(&rows);

    // states gained per decade of inner cutoff
    let gain = |c: f64| smooth_count(&mu_long, c) - smooth_count(&mu_short, c);
    let lo = bracket.0.max(c0);
    let (mut lo, mut hi) = (lo, bracket.1);
    if !(c0 > bracket.0) {
        return Err(Error::NonStraddlingBracket { reason: format!("C0 = {c0} is not above {}", bracket.0) });
    }
    if !(gain(hi) > 1.0) {
        return Err(Error::NonStraddlingBracket {
            reason: format!("fewer than one state per decade at C = {hi}"),
        });
    }
    if gain(lo) >= 1.0 {
        return Err(Error::NonStraddlingBracket { reason: format!("already one state per decade at C = {lo}") });
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if gain(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdLevel { nodes_per_decade: s.nodes_per_decade, c0, c1: 0.5 * (lo + hi) })
}

/// Cramer's rule for the leading unknown of a 3x3 system given as augmented rows.
fn solve3(rows: &[[f64; 4]]) -> f64 {
    let det = |c: [usize; 3]| {
        let m = |i: usize, j: usize| rows[i][c[j]];
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    };
    det([3, 1, 2]) / det([0, 1, 2])
}

/// Positivity threshold `C0` and accumulation threshold `C1` of the contact
/// image. `C0` is the largest coupling with no negative eigenvalue in the
/// limit of vanishing inner cutoff; `C1` the coupling at which every decade
/// of inner cutoff adds one bound state. Both are computed at the given
/// resolution and once more at twice the nodes per decade.
pub fn find_thresholds(
    kind: EffectiveKind,
    d: u32,
    bracket: (f64, f64),
    settings: &ThresholdSettings,
) -> Result<ThresholdReport> {
    if kind != EffectiveKind::ContactImage {
        return Err(Error::invalid("kind", "only the contact image has an accumulation threshold"));
    }
    if !(d == 2 || d == 3) {
        return Err(Error::invalid("d", format!("must be 2 or 3, got {d}")));
    }
    if !(bracket.0 >= 0.0 && bracket.1 > bracket.0) {
        return Err(Error::invalid("bracket", format!("need 0 <= lo < hi, got {bracket:?}")));
    }
    let coarse = thresholds_at(d, bracket, settings)?;
    let finer = ThresholdSettings { nodes_per_decade: 2 * settings.nodes_per_decade, ..*settings };
    let fine = thresholds_at(d, bracket, &finer)?;
    let drift = ((fine.c0 - coarse.c0) / fine.c0).abs().max(((fine.c1 - coarse.c1) / fine.c1).abs());
    Ok(ThresholdReport {
        kind,
        dim: d,
        c0: fine.c0,
        c1: fine.c1,
        grid_refinement_drift: drift,
        levels: vec![coarse, fine],
        flagged: drift >= DRIFT_TOL || fine.c0 > fine.c1,
    })
}

/// Largest coupling for which the given operator kind has no negative
/// eigenvalue on `grid`, by bisection on the lowest eigenvalue.
pub fn positivity_threshold(kind: EffectiveKind, d: u32, grid: &Arc<RadialGrid>, m: f64, c_max: f64) -> Result<f64> {
    check_scale_bracket(grid)?;
    let lowest = |c: f64| -> Result<f64> {
        let h = effective_matrix(kind, c, d, grid, m)?;
        Ok(linalg::eigvalsh(linalg::symmetrize(&h).as_ref())?[0])
    };
    if lowest(c_max)? >= 0.0 {
        return Err(Error::NonStraddlingBracket { reason: format!("no bound state up to C = {c_max}") });
    }
    let (mut lo, mut hi) = (0.0, c_max);
    while hi - lo > 1e-10 * c_max {
        let mid = 0.5 * (lo + hi);
        if lowest(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Bound states accumulate geometrically at zero.
    Efimov,
    /// Bound states diverge geometrically as the inner cutoff is removed.
    Thomas,
    NotGeometric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricFit {
    /// Geometric mean of `|E_{n+1}| / |E_n|` over the window.
    pub ratio: f64,
    /// Largest relative distance of a single ratio from `ratio`.
    pub deviation: f64,
    /// One-based indices (deepest first) of the first and last eigenvalue used.
    pub window: (usize, usize),
    pub ratios: Vec<f64>,
}

impl GeometricFit {
    pub fn is_geometric(&self) -> bool {
        self.deviation <= GEOMETRIC_TOL
    }

    fn from_ratios(ratios: Vec<f64>, window: (usize, usize)) -> Self {
        let ratio = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
        let deviation = ratios.iter().map(|r| (r / ratio - 1.0).abs()).fold(0.0, f64::max);
        Self { ratio, deviation, window, ratios }
    }
}

/// Ratio fit over all negative eigenvalues except the deepest and the shallowest.
pub fn geometric_ratio(spectrum: &SpectrumReport) -> Result<GeometricFit> {
    let k = spectrum.count_negative;
    if k < 4 {
        return Err(Error::TooFewBoundStates { found: k, needed: 4 });
    }
    geometric_ratio_window(spectrum, 2, k - 1)
}

/// Ratio fit over negative eigenvalues `first..=last`, counted from the deepest (one-based).
pub fn geometric_ratio_window(spectrum: &SpectrumReport, first: usize, last: usize) -> Result<GeometricFit> {
    if first == 0 || last <= first {
        return Err(Error::invalid("window", format!("need 1 <= first < last, got {first}..{last}")));
    }
    if spectrum.count_negative < last {
        return Err(Error::TooFewBoundStates { found: spectrum.count_negative, needed: last });
    }
    let e = spectrum.negative();
    let ratios = (first..last).map(|i| e[i].abs() / e[i - 1].abs()).collect();
    Ok(GeometricFit::from_ratios(ratios, (first, last)))
}

/// Decides between the two faces of a geometric spectrum from how it
/// responds to a smaller inner cutoff and a larger box.
pub fn classify_accumulation(
    base: &SpectrumReport,
    finer_core: &SpectrumReport,
    wider_box: &SpectrumReport,
) -> Result<(GeometricFit, Accumulation)> {
    let fit = geometric_ratio(base)?;
    if !fit.is_geometric() {
        return Ok((fit, Accumulation::NotGeometric));
    }
    let deepest = base.negative()[0];
    let deeper = finer_core.lowest().unwrap_or(0.0);
    if deeper < 2.0 * deepest {
        return Ok((fit, Accumulation::Thomas));
    }
    let stable = (wider_box.lowest().unwrap_or(0.0) / deepest - 1.0).abs() < 0.01;
    if stable && wider_box.count_negative > base.count_negative {
        return Ok((fit, Accumulation::Efimov));
    }
    Ok((fit, Accumulation::NotGeometric))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfimovSettings {
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// One-based eigenvalue window, deepest first.
    pub window: (usize, usize),
}

impl Default for EfimovSettings {
    fn default() -> Self {
        Self { n: 2000, r_min: 1e-7, r_max: 1e2, window: (3, 6) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfimovReport {
    pub coupling: f64,
    pub dim: u32,
    pub n_negative: usize,
    pub ratio: f64,
    pub deviation: f64,
    pub classification: Accumulation,
    pub grid_n: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Window ratios on the half-resolution and full grids and their extrapolation.
    pub coarse_ratios: Vec<f64>,
    pub fine_ratios: Vec<f64>,
    pub extrapolated_ratios: Vec<f64>,
    /// Bound states gained when `r_max` grows tenfold (at half resolution).
    pub added_states: usize,
    /// `|E_k| / |E_{k-1}|` in the larger box for the previously shallowest state `k`.
    pub added_ratio: f64,
    pub added_consistent: bool,
}

fn contact_spectrum(c: f64, d: u32, grid: &Arc<RadialGrid>) -> Result<SpectrumReport> {
    effective_operator(EffectiveKind::ContactImage, c, d, grid, 0.5)?.spectrum()
}

/// Geometric-ratio study of the contact image at coupling `c`.
pub fn efimov_study(c: f64, d: u32, settings: &EfimovSettings) -> Result<EfimovReport> {
    let s = settings;
    if s.n < 16 {
        return Err(Error::GridTooSmall { n: s.n, min: 16 });
    }
    let fine_grid = Arc::new(RadialGrid::build(s.n, s.r_max, Spacing::Logarithmic { r_min: s.r_min })?);
    let coarse_n = (s.n - 1) / 2 + 1;
    let coarse_grid = Arc::new(RadialGrid::build(coarse_n, s.r_max, Spacing::Logarithmic { r_min: s.r_min })?);
    let fine = contact_spectrum(c, d, &fine_grid)?;
    let coarse = contact_spectrum(c, d, &coarse_grid)?;
    let (first, last) = s.window;
    let fit_fine = geometric_ratio_window(&fine, first, last)?;
    let fit_coarse = geometric_ratio_window(&coarse, first, last)?;
    let extrapolated: Vec<f64> =
        fit_fine.ratios.iter().zip(&fit_coarse.ratios).map(|(f, c)| (4.0 * f - c) / 3.0).collect();
    let fit = GeometricFit::from_ratios(extrapolated.clone(), s.window);

    // cutoff responses at half resolution
    let step = (s.r_max / s.r_min).ln() / (coarse_n - 1) as f64;
    let extra = (LN_10 / step).round() as usize;
    let core_grid = Arc::new(RadialGrid::build(
        coarse_n + extra,
        s.r_max,
        Spacing::Logarithmic { r_min: s.r_min * (-(extra as f64) * step).exp() },
    )?);
    let box_grid = Arc::new(RadialGrid::build(
        coarse_n + extra,
        s.r_max * (extra as f64 * step).exp(),
        Spacing::Logarithmic { r_min: s.r_min },
    )?);
    let finer_core = contact_spectrum(c, d, &core_grid)?;
    let wider_box = contact_spectrum(c, d, &box_grid)?;
    let (_, mut classification) = classify_accumulation(&coarse, &finer_core, &wider_box)?;
    if !fit.is_geometric() {
        classification = Accumulation::NotGeometric;
    }
    let added_states = wider_box.count_negative.saturating_sub(coarse.count_negative);
    let k = coarse.count_negative;
    let added_ratio = if added_states > 0 && k >= 2 {
        let e = wider_box.negative();
        e[k - 1].abs() / e[k - 2].abs()
    } else {
        f64::NAN
    };
    let added_consistent = added_states >= 1 && (added_ratio / fit.ratio - 1.0).abs() <= fit.deviation.max(0.03);
    Ok(EfimovReport {
        coupling: c,
        dim: d,
        n_negative: fine.count_negative,
        ratio: fit.ratio,
        deviation: fit.deviation,
        classification,
        grid_n: s.n,
        r_min: s.r_min,
        r_max: s.r_max,
        coarse_ratios: fit_coarse.ratios,
        fine_ratios: fit_fine.ratios,
        extrapolated_ratios: extrapolated,
        added_states,
        added_ratio,
        added_consistent,
    })
}

/// Value of the planar three-body kernel, or a pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum KernelValue {
    Value(f64),
    Pole,
}

impl KernelValue {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Pole => None,
        }
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `1 / ((q1^2 + q2^2 + q1.q2) (q1 + q2)^2)` for planar momenta.
pub fn kernel22(q1: [f64; 2], q2: [f64; 2]) -> KernelValue {
    let s = [q1[0] + q2[0], q1[1] + q2[1]];
    let den = (dot2(q1, q1) + dot2(q2, q2) + dot2(q1, q2)) * dot2(s, s);
    if den == 0.0 {
        KernelValue::Pole
    } else {
        KernelValue::Value(1.0 / den)
    }
}

/// Angular quadrature on the 3-sphere for [`hyperradial_reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularQuadrature {
    /// The pole factor `(q1 + q2)^2` is replaced by `(q1 + q2)^2 + delta^2 r^2`.
    pub regularization: f64,
    pub tolerance: f64,
}

impl Default for AngularQuadrature {
    fn default() -> Self {
        Self { regularization: 1e-2, tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperradialProfile {
    pub radii: Vec<f64>,
    /// Minus the integral of the kernel over the 3-sphere of radius `r`.
    pub profile: Vec<f64>,
    /// Least-squares power `p` in `profile ~ prefactor * r^p`.
    pub exponent: f64,
    pub prefactor: f64,
    /// Relative change of the profile when the angular tolerance is tightened.
    pub refinement_change: f64,
    pub flagged: bool,
}

/// Integral of the regularized kernel over the sphere `|q1|^2 + |q2|^2 = r^2`
/// in Hopf coordinates `q1 = r cos(a) e(p1)`, `q2 = r sin(a) e(p2)`.
fn sphere_integral(r: f64, quad: &AngularQuadrature, tol: f64) -> (f64, f64) {
    let delta2 = quad.regularization * quad.regularization;
    let inner = |alpha: f64| -> (f64, f64) {
        let (sa, ca) = alpha.sin_cos();
        let q1 = [r * ca, 0.0];
        let f = |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let q2 = [r * sa * ct, r * sa * st];
            let s = [q1[0] + q2[0], q1[1] + q2[1]];
            let a = dot2(q1, q1) + dot2(q2, q2) + dot2(q1, q2);
            1.0 / (a * (dot2(s, s) + delta2 * r * r))
        };
        let (v, e) = tanh_sinh(f, 0.0, PI, tol);
        (2.0 * v, 2.0 * e)
    };
    let area = r.powi(3);
    let mut total = 0.0;
    let mut err = 0.0;
    for (a, b) in [(0.0, 0.25 * PI), (0.25 * PI, 0.5 * PI)] {
        let (v, e) = tanh_sinh(
            |alpha| {
                let (v, _) = inner(alpha);
                alpha.sin() * alpha.cos() * v
            },
            a,
            b,
            tol,
        );
        total += v;
        err += e;
    }
    (2.0 * PI * area * total, 2.0 * PI * area * err)
}

/// Reduces the planar three-body kernel to a hyperradial profile.
pub fn hyperradial_reduce(quad: &AngularQuadrature, radii: &[f64]) -> Result<HyperradialProfile> {
    if radii.len() < 2 || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("radii", "need at least two positive radii"));
    }
    let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if hi / lo < 100.0 {
        return Err(Error::invalid("radii", format!("must span two decades, got {lo}..{hi}")));
    }
    if !(quad.regularization > 0.0 && quad.tolerance > 0.0) {
        return Err(Error::invalid("regularization", "regularization and tolerance must be positive"));
    }
    let mut profile = Vec::with_capacity(radii.len());
    let mut refinement_change = 0.0f64;
    for &r in radii {
        let (v, _) = sphere_integral(r, quad, quad.tolerance);
        let (w, _) = sphere_integral(r, quad, 1e-2 * quad.tolerance);
        refinement_change = refinement_change.max(((w - v) / w).abs());
        profile.push(-w);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = profile.iter().map(|p| p.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let exponent = sxy / sxx;
    let prefactor = -(my - exponent * mx).exp();
    Ok(HyperradialProfile {
        radii: radii.to_vec(),
        profile,
        exponent,
        prefactor,
        refinement_change,
        flagged: refinement_change > 1e-6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassPoint {
    pub mass: f64,
    pub count_negative: usize,
    /// Bound states whose decay leaves negligible weight beyond `r_max / 2`.
    pub resolved: usize,
    pub energies: Vec<f64>,
    pub max_abs_energy: f64,
    /// Largest relative gap between the resolved energies and the lightest
    /// mass's energies scaled by the mass ratio.
    pub similarity_deviation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassSweepReport {
    pub coupling: f64,
    pub points: Vec<MassPoint>,
    pub count_nondecreasing: bool,
    pub max_energy_nonincreasing: bool,
    pub max_similarity_deviation: f64,
}

/// Bound state tail weight `exp(-kappa r_max)` below which a state counts as resolved by the box.
pub const RESOLVED_TAIL: f64 = 1e-8;

/// Negative eigenvalues whose exterior decay `exp(-2 kappa r)`, `kappa = sqrt(m |E|)`,
/// leaves less than [`RESOLVED_TAIL`] of the weight beyond `r_max / 2`.
fn resolved_states(op: &EffectiveOperator) -> Result<(SpectrumReport, Vec<f64>)> {
    let spec = op.spectrum()?;
    let r_max = op.grid().r_max();
    let resolved = spec
        .negative()
        .iter()
        .copied()
        .filter(|e| (op.mass * e.abs()).sqrt() * r_max >= -RESOLVED_TAIL.ln())
        .collect();
    Ok((spec, resolved))
}

/// Spectra of `(1/m)(-Laplacian) - c / r` in the planar three-body hyperradius
/// for increasing masses.
pub fn mass_sweep_2d(masses: &[f64], c: f64, grid: &Arc<RadialGrid>) -> Result<MassSweepReport> {
    if masses.is_empty() {
        return Err(Error::invalid("masses", "list is empty"));
    }
    if let Some(&m) = masses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::invalid("masses", format!("must be positive, got {m}")));
    }
    if let Some(i) = masses.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("masses", format!("must increase, entry {} does not", i + 1)));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    let mut points = Vec::with_capacity(masses.len());
    let mut reference: Vec<f64> = Vec::new();
    for &m in masses {
        let op = effective_operator(EffectiveKind::ThreeBody2d, c, 2, grid, m)?;
        let (spec, energies) = resolved_states(&op)?;
        if reference.is_empty() {
            reference = energies.clone();
        }
        let scale = m / masses[0];
        let similarity_deviation = reference
            .iter()
            .zip(&energies)
            .map(|(e0, e)| (e / (scale * e0) - 1.0).abs())
            .fold(0.0, f64::max);
        points.push(MassPoint {
            mass: m,
            count_negative: spec.count_negative,
            resolved: energies.len(),
            max_abs_energy: spec.negative().iter().fold(0.0f64, |a, e| a.max(e.abs())),
            flagged: energies.is_empty(),
            energies,
            similarity_deviation,
        });
    }
    let count_nondecreasing = points.windows(2).all(|w| w[1].resolved >= w[0].resolved);
    let max_energy_nonincreasing = points.windows(2).all(|w| w[1].max_abs_energy <= w[0].max_abs_energy);
    let max_similarity_deviation = points.iter().map(|p| p.similarity_deviation).fold(0.0, f64::max);
    Ok(MassSweepReport { coupling: c, points, count_nondecreasing, max_energy_nonincreasing, max_similarity_deviation })
}
