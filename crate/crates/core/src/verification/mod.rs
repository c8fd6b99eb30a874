//! Monte Carlo checks of the qualitative behaviour of the network.
//!
//! Each check takes a parameter struct (serde-friendly, with defaults), a
//! master seed, and returns a [`CheckResult`]. Replica `r` of a check always
//! uses the key `(seed, r)`, so results are bit-reproducible and independent
//! of the thread count: replicas run on the rayon pool and are collected in
//! replica order before any aggregation.

mod bridge;
mod coupling;
mod fluid_checks;
mod rates;
mod recurrence;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ParamError, SimError, VerifyError};
use crate::network::{Engine, NetworkConfig};
use crate::stability::{check_partial_stability, StabilityReport};

pub use bridge::{bridge_monotonicity, BridgeParams};
pub use coupling::{dominance_check, DominanceParams};
pub use fluid_checks::{divergence_check, fluid_deviation, DivergenceParams, FluidDeviationParams};
pub use rates::{
    empirical_rate_check, renewal_rate_estimate, spike_rate_window_check, EmpiricalRateParams,
    RenewalParams, WindowParams,
};
pub use recurrence::{return_time_estimate, tv_diagnostic, ReturnTimeParams, StartLaw, TvParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub replicas: u64,
    pub seed: u64,
    pub details: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    fn new(name: &str, statistic: f64, threshold: f64, pass: bool, replicas: u64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold,
            pass,
            replicas,
            seed,
            details: BTreeMap::new(),
            note: None,
        }
    }

    fn detail(mut self, key: &str, values: Vec<f64>) -> Self {
        self.details.insert(key.to_string(), values);
        self
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Check identifiers, as used on the command line and in results.
pub const CHECK_NAMES: [&str; 9] = [
    "dominance",
    "renewal",
    "rates",
    "divergence",
    "fluid-deviation",
    "window",
    "return-time",
    "bridge",
    "tv",
];

/// Runs `f` for replicas `0..replicas` in parallel; results come back in
/// replica order.
fn per_replica<T, F>(replicas: u64, f: F) -> Result<Vec<T>, VerifyError>
where
    T: Send,
    F: Fn(u64) -> Result<T, VerifyError> + Sync + Send,
{
    (0..replicas).into_par_iter().map(f).collect()
}

fn require_replicas(replicas: u64) -> Result<(), VerifyError> {
    if replicas == 0 {
        return Err(VerifyError::Precondition("replicas must be at least 1".into()));
    }
    Ok(())
}

fn advance(engine: &mut Engine<'_>, steps: u64) -> Result<(), SimError> {
    for _ in 0..steps {
        engine.step()?;
    }
    Ok(())
}

fn require_stable(config: &NetworkConfig) -> Result<StabilityReport, VerifyError> {
    let report = check_partial_stability(&config.mean_matrix(), &config.nu())?;
    if !report.is_stable() {
        return Err(VerifyError::Precondition(format!(
            "network is not classified stable (witness {:?})",
            report.witness().unwrap_or(&[])
        )));
    }
    Ok(report)
}

fn initial_state(config: &NetworkConfig, z0: &Option<Vec<f64>>) -> Result<Vec<f64>, VerifyError> {
    let z0 = z0.clone().unwrap_or_else(|| vec![1.0; config.n()]);
    if z0.len() != config.n() {
        return Err(ParamError::Invalid(format!(
            "initial state has {} entries for {} neurons",
            z0.len(),
            config.n()
        ))
        .into());
    }
    Ok(z0)
}

/// Direction of a scaled start: non-negative with unit l1 norm. Defaults to
/// the uniform direction.
fn unit_direction(config: &NetworkConfig, phi0: &Option<Vec<f64>>) -> Result<Vec<f64>, VerifyError> {
    let n = config.n();
    let phi0 = phi0.clone().unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if phi0.len() != n {
        return Err(VerifyError::Precondition(format!(
            "phi0 has {} entries for {n} neurons",
            phi0.len()
        )));
    }
    if phi0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(VerifyError::Precondition("phi0 entries must be non-negative".into()));
    }
    let norm: f64 = phi0.iter().sum();
    if norm == 0.0 {
        return Err(VerifyError::Precondition("phi0 = 0 has no direction".into()));
    }
    if (norm - 1.0).abs() > 1e-9 {
        return Err(VerifyError::Precondition(format!(
            "phi0 must have unit l1 norm, got {norm}"
        )));
    }
    Ok(phi0)
}

fn relative_errors(estimate: &[f64], target: &[f64]) -> Vec<f64> {
    estimate
        .iter()
        .zip(target)
        .map(|(e, t)| ((e - t) / t).abs())
        .collect()
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; n];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / rows.len() as f64).collect()
}
