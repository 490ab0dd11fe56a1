//! Declarative run configuration.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use zrange_core::grid::{RadialGrid, Spacing};
use zrange_core::potential::{BasePotential, ScalingLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ScaleNorms,
    Resonance,
    KkVerify,
    CrossTerm,
    Additivity,
    Independence,
    LimitResolvent,
    Efimov,
    Thresholds,
    Kernel22,
    MassSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::ScaleNorms => "scale-norms",
            Self::Resonance => "resonance",
            Self::KkVerify => "kk-verify",
            Self::CrossTerm => "cross-term",
            Self::Additivity => "additivity",
            Self::Independence => "independence",
            Self::LimitResolvent => "limit-resolvent",
            Self::Efimov => "efimov",
            Self::Thresholds => "thresholds",
            Self::Kernel22 => "kernel22",
            Self::MassSweep => "mass-sweep",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid request; `n` is mandatory, the rest falls back to per-command defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
    /// Number of node doublings applied on top of `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<u32>,
}

impl GridSpec {
    pub fn nodes(&self) -> usize {
        let n = self.n.unwrap_or(0);
        n << self.refine.unwrap_or(0)
    }

    pub fn r_max_or(&self, default: f64) -> f64 {
        self.r_max.unwrap_or(default)
    }

    pub fn build(&self, default_r_max: f64, default_spacing: Spacing) -> zrange_core::Result<RadialGrid> {
        RadialGrid::build(self.nodes(), self.r_max_or(default_r_max), self.spacing.unwrap_or(default_spacing))
    }

    /// Lower end of a logarithmic spacing, if one was requested.
    pub fn r_min(&self) -> Option<f64> {
        match self.spacing {
            Some(Spacing::Logarithmic { r_min }) => Some(r_min),
            _ => None,
        }
    }
}

/// Second potential of the two-potential studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerSpec {
    pub potential: BasePotential,
    /// Scaling exponent; absent for an unscaled partner.
    #[serde(default)]
    pub exponent: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumPair {
    pub q1: [f64; 2],
    pub q2: [f64; 2],
}

/// Parameter lists. Each command reads the entries it understands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    /// Couplings given as multiples of the accumulation threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_multiples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<MomentumPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_functions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<BasePotential>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<ScalingLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<PartnerSpec>,
    /// Reduced mass; the free Hamiltonian is `-(1/2m) Laplacian`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// Command-line overrides of configuration fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid_n: Option<usize>,
    pub r_max: Option<f64>,
    pub refine: Option<u32>,
}

/// A configuration problem, tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let field = missing_field(&inner.to_string())
                .map(|f| if path == "." { f } else { format!("{path}.{f}") })
                .unwrap_or(path);
            ConfigError::new(field, inner.to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, command: Command, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(ConfigError::new("command", format!("config is for `{c}`, invoked as `{command}`")));
            }
        }
        self.command = Some(command);
        if o.grid_n.is_some() || o.r_max.is_some() || o.refine.is_some() {
            let g = self.grid.get_or_insert_with(GridSpec::default);
            if let Some(n) = o.grid_n {
                g.n = Some(n);
            }
            if let Some(r) = o.r_max {
                g.r_max = Some(r);
            }
            if let Some(k) = o.refine {
                g.refine = Some(k);
            }
        }
        Ok(())
    }

    pub fn command(&self) -> Command {
        self.command.expect("command is set before validation")
    }

    pub fn grid(&self) -> &GridSpec {
        self.grid.as_ref().expect("grid is checked by validate")
    }

    pub fn mass(&self) -> f64 {
        self.mass.unwrap_or(zrange_core::free_resolvent::DEFAULT_MASS)
    }

    /// Checks every field the command will read, before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let command = self.command.ok_or_else(|| ConfigError::new("command", "missing"))?;
        let grid = self.grid.as_ref().ok_or_else(|| ConfigError::new("grid", "missing field `grid`"))?;
        match grid.n {
            None => return Err(ConfigError::new("grid.n", "missing field `n`")),
            Some(n) if n < zrange_core::grid::MIN_NODES => {
                return Err(ConfigError::new("grid.n", format!("need at least {} nodes, got {n}", zrange_core::grid::MIN_NODES)))
            }
            Some(_) => {}
        }
        if grid.refine.unwrap_or(0) > 6 {
            return Err(ConfigError::new("grid.refine", "at most 6 doublings"));
        }
        if let Some(r) = grid.r_max {
            positive("grid.r_max", r)?;
        }
        if let Some(Spacing::Logarithmic { r_min }) = grid.spacing {
            positive("grid.spacing.r_min", r_min)?;
        }
        if let Some(m) = self.mass {
            positive("mass", m)?;
        }
        if let Some(p) = &self.potential {
            p.validate().map_err(|e| core_field("potential", e))?;
        }
        if let Some(law) = &self.law {
            law.regime().map_err(|e| core_field("law", e))?;
        }
        if let Some(p) = &self.partner {
            p.potential.validate().map_err(|e| core_field("partner.potential", e))?;
        }
        let needs_potential = matches!(
            command,
            Command::ScaleNorms
                | Command::Resonance
                | Command::KkVerify
                | Command::CrossTerm
                | Command::Additivity
                | Command::Independence
        );
        if needs_potential && self.potential.is_none() {
            return Err(ConfigError::new("potential", "missing field `potential`"));
        }
        if command == Command::ScaleNorms && self.law.is_none() {
            return Err(ConfigError::new("law", "missing field `law`"));
        }
        let s = &self.sweep;
        for (name, list) in [
            ("sweep.epsilons", &s.epsilons),
            ("sweep.z", &s.z),
            ("sweep.lambdas", &s.lambdas),
            ("sweep.couplings", &s.couplings),
            ("sweep.c1_multiples", &s.c1_multiples),
            ("sweep.masses", &s.masses),
            ("sweep.radii", &s.radii),
        ] {
            if let Some(values) = list {
                if values.is_empty() {
                    return Err(ConfigError::new(name, "list is empty"));
                }
                for &v in values {
                    if name == "sweep.couplings" {
                        if !(v >= 0.0 && v.is_finite()) {
                            return Err(ConfigError::new(name, format!("must be non-negative, got {v}")));
                        }
                    } else {
                        positive(name, v)?;
                    }
                }
            }
        }
        if let Some(dims) = &s.dims {
            if dims.is_empty() || dims.iter().any(|d| !(2..=3).contains(d)) {
                return Err(ConfigError::new("sweep.dims", format!("entries must be 2 or 3, got {dims:?}")));
            }
        }
        if let Some((lo, hi)) = s.bracket {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(ConfigError::new("sweep.bracket", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
            }
        }
        if let Some((a, b)) = s.window {
            if !(a >= 1 && b > a) {
                return Err(ConfigError::new("sweep.window", format!("need 1 <= first < last, got [{a}, {b}]")));
            }
        }
        if s.test_functions == Some(0) {
            return Err(ConfigError::new("sweep.test_functions", "must be positive"));
        }
        if let Some(d) = s.regularization {
            positive("sweep.regularization", d)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be positive, got {v}")))
    }
}

fn core_field(prefix: &str, e: zrange_core::Error) -> ConfigError {
    match &e {
        zrange_core::Error::InvalidParameter { name, .. } => ConfigError::new(format!("{prefix}.{name}"), e.to_string()),
        _ => ConfigError::new(prefix, e.to_string()),
    }
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
