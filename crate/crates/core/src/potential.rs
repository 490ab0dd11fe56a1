//! Radial potential profiles and their epsilon-scaled families.
//!
//! Potentials are stored nonnegative; Hamiltonians subtract them
//! (`H = H0 - V`), so a positive strength is attractive.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, RadialGrid};
use crate::quadrature::{gauss5, piecewise, tanh_sinh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Gaussian,
    SquareWell,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePotential {
    pub profile: Profile,
    pub strength: f64,
    #[serde(default = "default_range")]
    pub range: f64,
}

fn default_range() -> f64 {
    1.0
}

impl BasePotential {
    pub fn new(profile: Profile, strength: f64, range: f64) -> Result<Self> {
        let v = Self { profile, strength, range };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength > 0.0 && self.strength.is_finite()) {
            return Err(Error::invalid("strength", format!("must be positive, got {}", self.strength)));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::invalid("range", format!("must be positive, got {}", self.range)));
        }
        Ok(())
    }

    pub fn with_strength(&self, strength: f64) -> Self {
        Self { strength, ..*self }
    }

    /// Unit-strength shape at `r`.
    pub fn shape(&self, r: f64) -> f64 {
        let x = r / self.range;
        match self.profile {
            Profile::Gaussian => (-x * x).exp(),
            Profile::SquareWell => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Exponential => (-x).exp(),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.strength * self.shape(r)
    }

    /// Radius beyond which the profile is negligible (below ~1e-26 relative).
    pub fn support_cutoff(&self) -> f64 {
        match self.profile {
            Profile::Gaussian => 8.0 * self.range,
            Profile::SquareWell => self.range,
            Profile::Exponential => 60.0 * self.range,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self.profile {
            Profile::SquareWell => vec![self.range],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Contact3d,
    WeakContact3d,
    Contact2d,
    WeakContact2d,
    Unscaled,
}

/// `V -> eps^(-p) V(r / eps)` in dimension `d`; `exponent = None` leaves
/// the potential unscaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub exponent: Option<u32>,
    pub epsilon: f64,
    pub dim: u32,
}

impl ScalingLaw {
    pub fn new(exponent: Option<u32>, epsilon: f64, dim: u32) -> Result<Self> {
        let law = Self { exponent, epsilon, dim };
        law.regime()?;
        Ok(law)
    }

    pub fn contact(epsilon: f64, dim: u32) -> Result<Self> {
        Self::new(Some(dim), epsilon, dim)
    }

    pub fn weak_contact(epsilon: f64, dim: u32) -> Result<Self> {
        Self::new(Some(dim - 1), epsilon, dim)
    }

    pub fn unscaled(dim: u32) -> Result<Self> {
        Self::new(None, 1.0, dim)
    }

    pub fn regime(&self) -> Result<Regime> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        match (self.exponent, self.dim) {
            (Some(3), 3) => Ok(Regime::Contact3d),
            (Some(2), 3) => Ok(Regime::WeakContact3d),
            (Some(2), 2) => Ok(Regime::Contact2d),
            (Some(1), 2) => Ok(Regime::WeakContact2d),
            (None, 2 | 3) => Ok(Regime::Unscaled),
            (None, d) => Err(Error::invalid("dim", format!("must be 2 or 3, got {d}"))),
            (Some(p), d) => Err(Error::UnsupportedScaling { p, d }),
        }
    }

    /// `eps` for scaled laws, 1 for the unscaled one.
    pub fn length_scale(&self) -> f64 {
        if self.exponent.is_some() {
            self.epsilon
        } else {
            1.0
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self.exponent {
            Some(p) => self.epsilon.powi(-(p as i32)),
            None => 1.0,
        }
    }
}

/// Anything that can be evaluated as a nonnegative radial potential.
pub trait RadialPotential {
    fn value(&self, r: f64) -> f64;
    /// Radius beyond which the potential is negligible.
    fn support_cutoff(&self) -> f64;
    /// Points of discontinuity.
    fn breakpoints(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledPotential {
    pub base: BasePotential,
    pub law: ScalingLaw,
}

impl RadialPotential for ScaledPotential {
    fn value(&self, r: f64) -> f64 {
        let s = self.law.length_scale();
        self.law.amplitude() * self.base.value(r / s)
    }

    fn support_cutoff(&self) -> f64 {
        self.base.support_cutoff() * self.law.length_scale()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let s = self.law.length_scale();
        self.base.breakpoints().into_iter().map(|b| b * s).collect()
    }
}

/// A base potential together with a scaling exponent: `eps -> eps^(-p) V(r / eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialFamily {
    pub base: BasePotential,
    pub exponent: Option<u32>,
    pub dim: u32,
}

impl PotentialFamily {
    pub fn contact(base: BasePotential, dim: u32) -> Self {
        Self { base, exponent: Some(dim), dim }
    }

    pub fn weak_contact(base: BasePotential, dim: u32) -> Self {
        Self { base, exponent: Some(dim - 1), dim }
    }

    pub fn unscaled(base: BasePotential, dim: u32) -> Self {
        Self { base, exponent: None, dim }
    }

    pub fn at(&self, epsilon: f64) -> Result<ScaledPotential> {
        scale_potential(&self.base, &ScalingLaw::new(self.exponent, epsilon, self.dim)?)
    }
}

/// Pointwise sum of potentials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PotentialSum(pub Vec<ScaledPotential>);

impl RadialPotential for PotentialSum {
    fn value(&self, r: f64) -> f64 {
        self.0.iter().map(|v| v.value(r)).sum()
    }

    fn support_cutoff(&self) -> f64 {
        self.0.iter().map(|v| v.support_cutoff()).fold(0.0, f64::max)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.iter().flat_map(|v| v.breakpoints()).collect()
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: u32) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => panic!("sphere_area: unsupported dimension {d}"),
    }
}

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialNorms {
    pub l1: f64,
    pub l2: f64,
    /// `int int V(x) V(y) / |x-y|^2 dx dy`; only defined in three dimensions.
    pub rollnik: Option<f64>,
}

/// Applies a scaling law to a base potential.
pub fn scale_potential(base: &BasePotential, law: &ScalingLaw) -> Result<ScaledPotential> {
    base.validate()?;
    law.regime()?;
    Ok(ScaledPotential { base: *base, law: *law })
}

impl ScaledPotential {
    pub fn dim(&self) -> u32 {
        self.law.dim
    }

    pub fn norms(&self) -> PotentialNorms {
        let d = self.law.dim;
        PotentialNorms {
            l1: l1_norm(self, d),
            l2: l2_norm(self, d),
            rollnik: (d == 3).then(|| rollnik_norm(self)),
        }
    }

    pub fn on_grid(&self, grid: &Arc<RadialGrid>) -> GridFunction {
        cell_averages(self, grid, self.law.dim)
    }
}

/// `int V d^d x` over all of `R^d`.
pub fn l1_norm(v: &dyn RadialPotential, d: u32) -> f64 {
    let (val, _) = piecewise(
        |r| v.value(r) * r.powi(d as i32 - 1),
        0.0,
        v.support_cutoff(),
        &v.breakpoints(),
        NORM_TOL,
    );
    sphere_area(d) * val
}

pub fn l2_norm(v: &dyn RadialPotential, d: u32) -> f64 {
    let (val, _) = piecewise(
        |r| v.value(r).powi(2) * r.powi(d as i32 - 1),
        0.0,
        v.support_cutoff(),
        &v.breakpoints(),
        NORM_TOL,
    );
    (sphere_area(d) * val).sqrt()
}

/// Rollnik double integral in three dimensions, after the angular
/// integrations: `8 pi^2 int int V(r) V(s) r s ln|(r+s)/(r-s)| dr ds`.
pub fn rollnik_norm(v: &dyn RadialPotential) -> f64 {
    let cutoff = v.support_cutoff();
    let breaks = v.breakpoints();
    let inner = |r: f64| -> f64 {
        let kernel = |s: f64| v.value(s) * s * ((r + s) / (r - s)).abs().ln();
        let (a, _) = piecewise(kernel, 0.0, r, &breaks, 1e-11);
        let (b, _) = piecewise(kernel, r, cutoff, &breaks, 1e-11);
        a + b
    };
    let (outer, _) = piecewise(|r| v.value(r) * r * inner(r), 0.0, cutoff, &breaks, 1e-10);
    8.0 * PI * PI * outer
}

/// `int sqrt(a) sqrt(b) d^d x`.
pub fn sqrt_product_l1(a: &dyn RadialPotential, b: &dyn RadialPotential, d: u32, tol: f64) -> (f64, f64) {
    let cutoff = a.support_cutoff().min(b.support_cutoff());
    let mut breaks = a.breakpoints();
    breaks.extend(b.breakpoints());
    let (val, err) = piecewise(
        |r| (a.value(r) * b.value(r)).sqrt() * r.powi(d as i32 - 1),
        0.0,
        cutoff,
        &breaks,
        tol,
    );
    (sphere_area(d) * val, sphere_area(d) * err)
}

/// Weight exponent of the finite-volume cell measure used by the kinetic
/// discretization (`dr` for the reduced d=3 variable, `r^(d-1) dr` otherwise).
pub(crate) fn cell_weight_exponent(d: u32) -> i32 {
    if d == 3 {
        0
    } else {
        d as i32 - 1
    }
}

/// Cell-averaged potential: each node carries the average of `v` over its
/// finite-volume cell, which keeps discontinuous profiles second-order.
pub fn cell_averages(v: &dyn RadialPotential, grid: &Arc<RadialGrid>, d: u32) -> GridFunction {
    let faces = grid.faces();
    let k = cell_weight_exponent(d);
    let cutoff = v.support_cutoff();
    let breaks = v.breakpoints();
    let values = faces
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a >= cutoff {
                return 0.0;
            }
            let mut pts = vec![a];
            pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
            pts.push(b);
            let mut num = 0.0;
            let mut den = 0.0;
            for p in pts.windows(2) {
                num += gauss5(|r| v.value(r) * r.powi(k), p[0], p[1]);
                den += gauss5(|r| r.powi(k), p[0], p[1]);
            }
            num / den
        })
        .collect();
    GridFunction::new(grid.clone(), values).expect("one value per cell")
}

/// Plain tanh-sinh on `[a, b]`, re-exported for callers integrating
/// potentials against their own weights.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    tanh_sinh(f, a, b, tol).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> BasePotential {
        BasePotential::new(Profile::Gaussian, 1.0, 1.0).unwrap()
    }

    #[test]
    fn identity_scaling() {
        let v = scale_potential(&gauss(), &ScalingLaw::contact(1.0, 3).unwrap()).unwrap();
        for r in [0.0, 0.3, 1.0, 2.7] {
            assert_eq!(v.value(r), gauss().value(r));
        }
    }

    #[test]
    fn contact_l1_invariant() {
        for base in [gauss(), BasePotential::new(Profile::Exponential, 2.0, 0.5).unwrap()] {
            let v1 = scale_potential(&base, &ScalingLaw::contact(1.0, 3).unwrap()).unwrap();
            let v2 = scale_potential(&base, &ScalingLaw::contact(0.1, 3).unwrap()).unwrap();
            let ratio = v2.norms().l1 / v1.norms().l1;
            assert!((ratio - 1.0).abs() < 1e-9, "{ratio}");
        }
    }

    #[test]
    fn weak_law_halves_l1_at_half_epsilon() {
        let base = BasePotential::new(Profile::SquareWell, 1.0, 1.0).unwrap();
        let v0 = scale_potential(&base, &ScalingLaw::unscaled(3).unwrap()).unwrap();
        let v = scale_potential(&base, &ScalingLaw::weak_contact(0.5, 3).unwrap()).unwrap();
        assert!((v0.norms().l1 - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!((v.norms().l1 / v0.norms().l1 - 0.5).abs() < 1e-10);
    }

    #[test]
    fn gaussian_rollnik_is_pi_cubed() {
        // separating centre-of-mass and relative coordinates gives pi^3 exactly
        let v = scale_potential(&gauss(), &ScalingLaw::unscaled(3).unwrap()).unwrap();
        let r = v.norms().rollnik.unwrap();
        assert!((r - PI.powi(3)).abs() / PI.powi(3) < 1e-6, "{r}");
    }

    #[test]
    fn rejects_bad_laws() {
        assert_eq!(ScalingLaw::new(Some(3), 0.1, 2), Err(Error::UnsupportedScaling { p: 3, d: 2 }));
        assert!(ScalingLaw::new(Some(2), 0.0, 3).is_err());
        assert!(ScalingLaw::new(Some(2), -1.0, 3).is_err());
        assert!(BasePotential::new(Profile::Gaussian, -1.0, 1.0).is_err());
    }

    #[test]
    fn cell_average_of_step() {
        let g = Arc::new(RadialGrid::build(10, 1.0, crate::grid::Spacing::Linear).unwrap());
        let base = BasePotential::new(Profile::SquareWell, 2.0, 0.5).unwrap();
        let v = scale_potential(&base, &ScalingLaw::unscaled(3).unwrap()).unwrap();
        let f = v.on_grid(&g);
        // node 0.5 straddles the edge: cell [0.45, 0.55] is half inside
        assert!((f.values()[4] - 1.0).abs() < 1e-12);
        assert_eq!(f.values()[3], 2.0);
        assert_eq!(f.values()[6], 0.0);
    }
}
