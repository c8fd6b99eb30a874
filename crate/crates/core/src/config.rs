//! TOML run configuration.
//!
//! ```toml
//! seed = 42
//!
//! [network]
//! kind = "symmetric"
//! n = 3
//! h = 2.0          # scalar or one value per neuron
//! w = 1.0
//! nu = 1.0
//! sigma = 0.5
//! ```
//!
//! The full schema with every default is listed in the repository README.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levy::{Law, LawFamily, LevySpec};
use crate::linalg::Matrix;
use crate::network::{NetworkConfig, SimOptions, DEFAULT_MAX_SPIKES};
use crate::verification::{
    BridgeParams, DivergenceParams, DominanceParams, EmpiricalRateParams, FluidDeviationParams,
    RenewalParams, ReturnTimeParams, TvParams, WindowParams,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// A number or a list with one entry per neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNeuron {
    One(f64),
    Many(Vec<f64>),
}

impl PerNeuron {
    fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerNeuron::One(v) => Ok(vec![*v; n]),
            PerNeuron::Many(v) if v.len() == n => Ok(v.clone()),
            PerNeuron::Many(v) => Err(invalid(path, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

fn zero() -> PerNeuron {
    PerNeuron::One(0.0)
}

fn unit_jump() -> Law {
    Law::constant(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NetworkSection {
    /// `b_ii = h_i`, `b_ij = w_i`, common driver.
    Symmetric {
        n: usize,
        h: PerNeuron,
        w: PerNeuron,
        nu: f64,
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        jump_rate: f64,
        #[serde(default = "unit_jump")]
        jump_law: Law,
        #[serde(default)]
        signal_family: LawFamily,
    },
    /// Arbitrary mean matrix (`means`, with laws from `signal_family`) or
    /// full law matrix (`signal_laws`); exactly one of the two.
    Explicit {
        nu: PerNeuron,
        #[serde(default = "zero")]
        sigma: PerNeuron,
        #[serde(default = "zero")]
        jump_rate: PerNeuron,
        #[serde(default = "unit_jump")]
        jump_law: Law,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        signal_family: LawFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signal_laws: Option<Vec<Vec<Law>>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    #[default]
    Full,
    Decoupled,
    /// Decoupled, with initial states drawn from the reset laws.
    DecoupledBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    pub dt: f64,
    pub replicas: u64,
    pub sample_stride: usize,
    pub max_spikes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z0: Option<Vec<f64>>,
    pub coupling: CouplingMode,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: 100.0,
            dt: 0.01,
            replicas: 1,
            sample_stride: 100,
            max_spikes: DEFAULT_MAX_SPIKES,
            z0: None,
            coupling: CouplingMode::Full,
        }
    }
}

impl SimSection {
    pub fn options(&self) -> SimOptions {
        SimOptions {
            horizon: self.horizon,
            dt: self.dt,
            sample_stride: self.sample_stride,
            max_spikes: self.max_spikes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    /// Start of the fluid trajectory; the uniform unit vector when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<f64>>,
    /// Integration horizon; unbounded when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub checks: Vec<String>,
    pub dominance: DominanceParams,
    pub renewal: RenewalParams,
    pub rates: EmpiricalRateParams,
    pub divergence: DivergenceParams,
    pub fluid_deviation: FluidDeviationParams,
    pub window: WindowParams,
    pub return_time: ReturnTimeParams,
    pub bridge: BridgeParams,
    pub tv: TvParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: Format::Json,
        }
    }
}

/// The configuration document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub seed: u64,
    pub network: NetworkSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub fluid: FluidSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated configuration together with the network it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    doc: ConfigDoc,
    network: NetworkConfig,
}

impl RunConfig {
    pub fn doc(&self) -> &ConfigDoc {
        &self.doc
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn seed(&self) -> u64 {
        self.doc.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.doc.seed = seed;
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.doc).expect("configuration documents always serialize")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: ConfigDoc = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let network = build_network(&doc.network)?;
    validate_sections(&doc, network.n())?;
    Ok(RunConfig { doc, network })
}

fn driver(nu: f64, sigma: f64, jump_rate: f64, jump_law: &Law, path: &str) -> Result<LevySpec, ConfigError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid(format!("{path}.nu"), format!("nu must be positive, got {nu}")));
    }
    let spec = LevySpec::brownian(nu, sigma).with_jumps(jump_rate, jump_law.clone());
    spec.validate().map_err(|e| invalid(path, e.to_string()))?;
    Ok(spec)
}

fn build_network(section: &NetworkSection) -> Result<NetworkConfig, ConfigError> {
    match section {
        NetworkSection::Symmetric {
            n,
            h,
            w,
            nu,
            sigma,
            jump_rate,
            jump_law,
            signal_family,
        } => {
            if *n == 0 {
                return Err(invalid("network.n", "need at least one neuron"));
            }
            let h = h.expand(*n, "network.h")?;
            let w = w.expand(*n, "network.w")?;
            for (i, (hi, wi)) in h.iter().zip(&w).enumerate() {
                if !(*wi > 0.0) {
                    return Err(invalid(format!("network.w[{i}]"), format!("w must be positive, got {wi}")));
                }
                if !(hi > wi) {
                    return Err(invalid(
                        format!("network.h[{i}]"),
                        format!("H must exceed w (got H = {hi}, w = {wi})"),
                    ));
                }
            }
            let spec = driver(*nu, *sigma, *jump_rate, jump_law, "network")?;
            NetworkConfig::symmetric(&h, &w, *nu, &spec, *signal_family)
                .map_err(|e| invalid("network", e.to_string()))
        }
        NetworkSection::Explicit {
            nu,
            sigma,
            jump_rate,
            jump_law,
            means,
            signal_family,
            signal_laws,
        } => {
            let laws = match (means, signal_laws) {
                (Some(means), None) => {
                    let m = Matrix::from_rows(means)
                        .map_err(|e| invalid("network.means", e.to_string()))?;
                    for (i, row) in means.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            if !(*v > 0.0 && v.is_finite()) {
                                return Err(invalid(
                                    format!("network.means[{i}][{j}]"),
                                    format!("signal means must be positive, got {v}"),
                                ));
                            }
                        }
                    }
                    (0..m.n())
                        .map(|i| (0..m.n()).map(|j| Law::with_mean(*signal_family, m[(i, j)])).collect())
                        .collect::<Vec<Vec<Law>>>()
                }
                (None, Some(laws)) => laws.clone(),
                _ => {
                    return Err(invalid(
                        "network",
                        "give exactly one of `means` and `signal_laws`",
                    ))
                }
            };
            let n = laws.len();
            if n == 0 {
                return Err(invalid("network", "need at least one neuron"));
            }
            for (i, row) in laws.iter().enumerate() {
                if row.len() != n {
                    return Err(invalid(
                        format!("network.signal_laws[{i}]"),
                        format!("expected {n} laws, got {}", row.len()),
                    ));
                }
                for (j, law) in row.iter().enumerate() {
                    law.validate()
                        .map_err(|e| invalid(format!("network.signal_laws[{i}][{j}]"), e.to_string()))?;
                }
            }
            let nu = nu.expand(n, "network.nu")?;
            let sigma = sigma.expand(n, "network.sigma")?;
            let jump_rate = jump_rate.expand(n, "network.jump_rate")?;
            let specs = (0..n)
                .map(|i| driver(nu[i], sigma[i], jump_rate[i], jump_law, &format!("network[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            NetworkConfig::new(specs, laws).map_err(|e| invalid("network", e.to_string()))
        }
    }
}

fn validate_sections(doc: &ConfigDoc, n: usize) -> Result<(), ConfigError> {
    doc.sim
        .options()
        .validate()
        .map_err(|e| invalid("sim", e.to_string()))?;
    if doc.sim.replicas == 0 {
        return Err(invalid("sim.replicas", "need at least one replica"));
    }
    if let Some(z0) = &doc.sim.z0 {
        if z0.len() != n {
            return Err(invalid("sim.z0", format!("expected {n} values, got {}", z0.len())));
        }
        if let Some((i, v)) = z0.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("sim.z0[{i}]"), format!("must be non-negative, got {v}")));
        }
    }
    if let Some(phi0) = &doc.fluid.phi0 {
        if phi0.len() != n {
            return Err(invalid("fluid.phi0", format!("expected {n} values, got {}", phi0.len())));
        }
        if let Some((i, v)) = phi0.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("fluid.phi0[{i}]"), format!("must be non-negative, got {v}")));
        }
    }
    if let Some(h) = doc.fluid.horizon {
        if !(h >= 0.0) {
            return Err(invalid("fluid.horizon", format!("must be non-negative, got {h}")));
        }
    }
    for (i, name) in doc.verify.checks.iter().enumerate() {
        if !crate::verification::CHECK_NAMES.contains(&name.as_str()) {
            return Err(invalid(format!("verify.checks[{i}]"), format!("unknown check `{name}`")));
        }
    }
    Ok(())
}
