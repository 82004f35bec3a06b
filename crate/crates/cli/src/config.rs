//! Run configuration: one TOML section per module, unknown keys rejected,
//! defaults that reproduce the shipped experiments. Domain constraints are
//! re-validated at parse time by constructing the owning types.

use deepzero::approx::Target;
use deepzero::lattice::{PerturbedLattice, Scheme};
use deepzero::mollifier::{Bump, MollifierPair};
use deepzero::Generator;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub lattice: LatticeConfig,
    pub mollifier: MollifierConfig,
    pub approx: ApproxConfig,
    /// Output directory; created if missing.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            lattice: LatticeConfig::default(),
            mollifier: MollifierConfig::default(),
            approx: ApproxConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    /// Gaussian width parameter; must be positive.
    pub a: f64,
    /// Flat-zero strength; 0 switches to the pure-Gaussian cross-check mode.
    pub b: f64,
    /// Half-width of the time-side quadrature window.
    pub half_width: f64,
    /// Quadrature step; also sets the certified frequency band.
    pub step: f64,
    /// Quadrature error budget.
    pub budget: f64,
    /// Forces the decay-envelope rate instead of fitting it.
    pub envelope_rate: Option<f64>,
    /// Forces the envelope amplitude (usually together with the rate).
    pub envelope_amplitude: Option<f64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            half_width: 12.0,
            step: 0.01,
            budget: 1e-9,
            envelope_rate: None,
            envelope_amplitude: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    /// Lattice spans the integers `-half_count..=half_count`.
    pub half_count: usize,
    /// One of `alternating`, `random`, `constant`.
    pub scheme: String,
    /// Perturbation amplitude, strictly inside (0, 1).
    pub amplitude: f64,
    /// Geometric decay ratio of the perturbations, strictly inside (0, 1).
    pub ratio: f64,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            half_count: 8,
            scheme: "alternating".into(),
            amplitude: 0.5,
            ratio: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierConfig {
    /// Spline order; even, between 2 and 12.
    pub order: usize,
    /// Kernel width parameter.
    pub width: f64,
    /// Support radius of the flat bump used in pairing experiments.
    pub bump_radius: f64,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self {
            order: 4,
            width: 0.02,
            bump_radius: 0.3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    /// Norm exponent; at least 1, and p = 1 needs a weight.
    pub p: f64,
    /// Grid half-extent; sized from the largest lattice when absent.
    pub extent: Option<f64>,
    /// Grid step.
    pub step: f64,
    /// Ridge override for the inner least-squares solves.
    pub tau: Option<f64>,
    /// Residual smoothing floor override for the reweighted solver.
    pub delta: Option<f64>,
    /// One of `gaussian`, `gaussian-difference`, `smoothed-indicator`,
    /// `modulated-gaussian`.
    pub target: String,
    /// `none` or `inverse-quadratic` (`1 / (1 + x^2)`).
    pub weight: String,
    /// Lattice sizes on the completeness curve, strictly ascending.
    pub m_list: Vec<usize>,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            p: 1.5,
            extent: None,
            step: 0.05,
            tau: None,
            delta: None,
            target: "gaussian".into(),
            weight: "none".into(),
            m_list: vec![4, 8, 16, 24],
        }
    }
}

/// Grid weight selection for the approximation norm.
#[derive(Clone, Copy, Debug)]
pub enum WeightKind {
    None,
    InverseQuadratic,
}

impl WeightKind {
    pub fn function(self) -> Option<fn(f64) -> f64> {
        match self {
            WeightKind::None => None,
            WeightKind::InverseQuadratic => Some(|x| 1.0 / (1.0 + x * x)),
        }
    }
}

pub fn parse_weight(s: &str) -> Result<WeightKind, String> {
    match s {
        "none" => Ok(WeightKind::None),
        "inverse-quadratic" => Ok(WeightKind::InverseQuadratic),
        other => Err(format!(
            "approx.weight must be `none` or `inverse-quadratic`, got `{other}`"
        )),
    }
}

/// Reads the configuration (defaults when no path is given) and re-validates
/// every domain constraint by building the owning types once.
pub fn load(path: Option<&Path>) -> Result<RunConfig, String> {
    let config = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("config: {e}"))?
        }
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), String> {
    let core = |e: deepzero::Error| e.to_string();
    Generator::new(config.generator.a, config.generator.b).map_err(core)?;
    for (name, value) in [
        ("generator.half_width", config.generator.half_width),
        ("generator.step", config.generator.step),
        ("generator.budget", config.generator.budget),
        ("approx.step", config.approx.step),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(format!("{name} must be positive and finite, got {value}"));
        }
    }
    let scheme: Scheme = config.lattice.scheme.parse().map_err(core)?;
    PerturbedLattice::new(
        config.lattice.half_count,
        config.lattice.amplitude,
        config.lattice.ratio,
        scheme,
        config.lattice.seed,
    )
    .map_err(core)?;
    MollifierPair::new(config.mollifier.order, config.mollifier.width).map_err(core)?;
    Bump::new(config.mollifier.bump_radius).map_err(core)?;
    config.approx.target.parse::<Target>().map_err(core)?;
    let weight = parse_weight(&config.approx.weight)?;
    if !(config.approx.p >= 1.0) || !config.approx.p.is_finite() {
        return Err(format!(
            "approx.p must be finite and at least 1, got {}",
            config.approx.p
        ));
    }
    if config.approx.p == 1.0 && matches!(weight, WeightKind::None) {
        return Err("approx.p = 1 needs approx.weight = \"inverse-quadratic\"".into());
    }
    if let Some(tau) = config.approx.tau {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(format!("approx.tau must be non-negative, got {tau}"));
        }
    }
    if let Some(delta) = config.approx.delta {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(format!("approx.delta must be positive, got {delta}"));
        }
    }
    if config.approx.m_list.is_empty()
        || config.approx.m_list.windows(2).any(|w| w[1] <= w[0])
    {
        return Err("approx.m_list must be nonempty and strictly ascending".into());
    }
    Ok(())
}
