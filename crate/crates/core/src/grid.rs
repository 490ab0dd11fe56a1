//! Radial grids and functions sampled on them.
//!
//! Every grid carries trapezoid weights built with an implicit node at the
//! origin and an implicit "ghost" node one step beyond the last node; the
//! ghost is where the outer Dirichlet condition is imposed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    /// Uniform nodes `h, 2h, ..., r_max`.
    Linear,
    /// Geometric nodes from `r_min` to `r_max`.
    Logarithmic { r_min: f64 },
    /// `n_inner` uniform nodes up to `r_switch`, then a geometric tail to `r_max`.
    Hybrid { r_switch: f64, n_inner: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: Spacing,
    r_max: f64,
    ghost: f64,
}

impl RadialGrid {
    pub fn build(n: usize, r_max: f64, spacing: Spacing) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::GridTooSmall { n, min: MIN_NODES });
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::invalid("r_max", format!("must be positive and finite, got {r_max}")));
        }
        let nodes: Vec<f64> = match spacing {
            Spacing::Linear => {
                let h = r_max / n as f64;
                (1..=n).map(|i| i as f64 * h).collect()
            }
            Spacing::Logarithmic { r_min } => {
                if !(r_min > 0.0 && r_min < r_max) {
                    return Err(Error::invalid("r_min", format!("need 0 < r_min < r_max, got {r_min}")));
                }
                let q = (r_max / r_min).ln() / (n - 1) as f64;
                (0..n).map(|i| r_min * (q * i as f64).exp()).collect()
            }
            Spacing::Hybrid { r_switch, n_inner } => {
                if !(r_switch > 0.0 && r_switch < r_max) {
                    return Err(Error::invalid("r_switch", format!("need 0 < r_switch < r_max, got {r_switch}")));
                }
                if n_inner < 2 || n_inner >= n {
                    return Err(Error::invalid("n_inner", format!("need 2 <= n_inner < n, got {n_inner}")));
                }
                let h = r_switch / n_inner as f64;
                let n_tail = n - n_inner;
                let q = (r_max / r_switch).ln() / n_tail as f64;
                (1..=n_inner)
                    .map(|i| i as f64 * h)
                    .chain((1..=n_tail).map(|i| r_switch * (q * i as f64).exp()))
                    .collect()
            }
        };
        let mut grid = Self::from_nodes(nodes, spacing)?;
        grid.r_max = r_max;
        Ok(grid)
    }

    /// Builds a grid from explicit nodes. The ghost node is extrapolated
    /// geometrically for non-linear spacings and arithmetically otherwise.
    pub fn from_nodes(nodes: Vec<f64>, spacing: Spacing) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::GridTooSmall { n, min: MIN_NODES });
        }
        if nodes[0] <= 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes", "must be positive and strictly increasing"));
        }
        let last = nodes[n - 1];
        let prev = nodes[n - 2];
        let ghost = match spacing {
            Spacing::Linear => last + (last - prev),
            _ => last * last / prev,
        };
        let weights = (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { nodes[i - 1] };
                let right = if i + 1 == n { ghost } else { nodes[i + 1] };
                0.5 * (right - left)
            })
            .collect();
        Ok(Self { nodes, weights, spacing, r_max: last, ghost })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }

    /// Position of the implicit node carrying the outer Dirichlet condition.
    pub fn ghost(&self) -> f64 {
        self.ghost
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self.spacing, Spacing::Logarithmic { .. })
    }

    /// Constant node ratio of a logarithmic grid.
    pub fn log_ratio(&self) -> Option<f64> {
        self.is_logarithmic().then(|| self.nodes[1] / self.nodes[0])
    }

    /// Radial measure `r^(d-1) dr` lumped onto the nodes.
    pub fn measure(&self, d: u32) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(r, w)| r.powi(d as i32 - 1) * w)
            .collect()
    }

    /// Cell boundaries: midpoints between nodes, with `r_1/2` below the
    /// first node and the midpoint to the ghost above the last.
    pub fn faces(&self) -> Vec<f64> {
        let n = self.len();
        let mut f = Vec::with_capacity(n + 1);
        f.push(0.5 * self.nodes[0]);
        for w in self.nodes.windows(2) {
            f.push(0.5 * (w[0] + w[1]));
        }
        f.push(0.5 * (self.nodes[n - 1] + self.ghost));
        f
    }

    /// The grid with every length multiplied by `s`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::invalid("s", "dilation factor must be positive"));
        }
        let spacing = match self.spacing {
            Spacing::Linear => Spacing::Linear,
            Spacing::Logarithmic { r_min } => Spacing::Logarithmic { r_min: r_min * s },
            Spacing::Hybrid { r_switch, n_inner } => Spacing::Hybrid { r_switch: r_switch * s, n_inner },
        };
        Ok(Self {
            nodes: self.nodes.iter().map(|r| r * s).collect(),
            weights: self.weights.iter().map(|w| w * s).collect(),
            spacing,
            r_max: self.r_max * s,
            ghost: self.ghost * s,
        })
    }
}

/// Values of a radial function at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `int f(r) r^(d-1) dr` by the grid's lumped quadrature.
    pub fn integrate(&self, d: u32) -> f64 {
        self.grid.measure(d).iter().zip(&self.values).map(|(m, v)| m * v).sum()
    }

    /// `<self, other>` in the radial measure of dimension `d`.
    pub fn inner(&self, other: &GridFunction, d: u32) -> f64 {
        self.grid
            .measure(d)
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(m, (a, b))| m * a * b)
            .sum()
    }

    /// Vector `sqrt(mu_i) f(r_i)`: the representation in which discretized
    /// operators are symmetric matrices.
    pub fn to_symmetric(&self, d: u32) -> Vec<f64> {
        self.grid.measure(d).iter().zip(&self.values).map(|(m, v)| m.sqrt() * v).collect()
    }

    pub fn from_symmetric(grid: Arc<RadialGrid>, v: &[f64], d: u32) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: v.len() });
        }
        let values = grid.measure(d).iter().zip(v).map(|(m, x)| x / m.sqrt()).collect();
        Ok(Self { grid, values })
    }
}
