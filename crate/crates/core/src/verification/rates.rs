use serde::{Deserialize, Serialize};

use super::{
    advance, max_of, mean_rows, per_replica, relative_errors, require_replicas, require_stable,
    initial_state, unit_direction, CheckResult,
};
use crate::error::VerifyError;
use crate::fluid::integrate_fluid;
use crate::levy::{Law, LevySpec};
use crate::network::{steps_for, Coupling, Engine, NetworkConfig};
use crate::rng::ReplicaKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalParams {
    /// Neuron whose driver and reset law are used when the check runs on a
    /// network configuration.
    pub neuron: usize,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: u64,
}

impl Default for RenewalParams {
    fn default() -> Self {
        Self {
            neuron: 0,
            horizon: 1e5,
            dt: 0.01,
            replicas: 1,
        }
    }
}

/// Spike rate of a single neuron that is reset by `reset_law` and receives no
/// signals, started from an independent reset draw, against `nu / E reset`.
pub fn renewal_rate_estimate(
    spec: &LevySpec,
    reset_law: &Law,
    params: &RenewalParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let config = NetworkConfig::new(vec![spec.clone()], vec![vec![reset_law.clone()]])?;
    let target = spec.nu / reset_law.mean();
    if params.horizon * target < 1e3 {
        return Err(VerifyError::Precondition(format!(
            "horizon {} gives fewer than 1000 expected spikes at rate {target}",
            params.horizon
        )));
    }
    let steps = steps_for(params.horizon, params.dt);
    let horizon = steps as f64 * params.dt;
    let rates = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut engine = Engine::new(&config, &[], Coupling::Decoupled { bar: true }, key, params.dt)?;
        advance(&mut engine, steps)?;
        Ok(engine.counts()[0] as f64 / horizon)
    })?;
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let statistic = ((mean - target) / target).abs();
    Ok(
        CheckResult::new("renewal", statistic, 0.02, statistic <= 0.02, params.replicas, seed)
            .detail("rate", vec![mean])
            .detail("target", vec![target])
            .detail("replica_rates", rates),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalRateParams {
    pub z0: Option<Vec<f64>>,
    pub horizon: f64,
    pub burn_in: f64,
    pub dt: f64,
    pub replicas: u64,
}

impl Default for EmpiricalRateParams {
    fn default() -> Self {
        Self {
            z0: None,
            horizon: 1e5,
            burn_in: 1e3,
            dt: 0.01,
            replicas: 20,
        }
    }
}

/// Post-burn-in spike rates of a stable network against the steady rates.
pub fn empirical_rate_check(
    config: &NetworkConfig,
    params: &EmpiricalRateParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let report = require_stable(config)?;
    let target = report.rates.clone().expect("stable networks have steady rates");
    let z0 = initial_state(config, &params.z0)?;
    if !(params.burn_in >= 0.0 && params.burn_in < params.horizon) {
        return Err(VerifyError::Precondition(format!(
            "burn-in {} must lie in [0, horizon {})",
            params.burn_in, params.horizon
        )));
    }
    let burn_steps = if params.burn_in > 0.0 {
        steps_for(params.burn_in, params.dt)
    } else {
        0
    };
    let steps = steps_for(params.horizon, params.dt);
    let span = (steps - burn_steps) as f64 * params.dt;

    let per_replica_rates = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut engine = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        advance(&mut engine, burn_steps)?;
        let start = engine.counts().to_vec();
        advance(&mut engine, steps - burn_steps)?;
        Ok(engine
            .counts()
            .iter()
            .zip(&start)
            .map(|(end, start)| (end - start) as f64 / span)
            .collect::<Vec<f64>>())
    })?;
    let rates = mean_rows(&per_replica_rates);
    let errors = relative_errors(&rates, &target);
    let statistic = max_of(&errors);
    Ok(
        CheckResult::new("rates", statistic, 0.03, statistic <= 0.03, params.replicas, seed)
            .detail("rate", rates)
            .detail("target", target)
            .detail("relative_error", errors),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowParams {
    /// Start direction; uniform when absent.
    pub phi0: Option<Vec<f64>>,
    pub scale: f64,
    /// Window start, in scaled time.
    pub t: f64,
    /// Window length, in scaled time.
    pub window: f64,
    pub dt: f64,
    pub replicas: u64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            phi0: None,
            scale: 2000.0,
            t: 5.0,
            window: 2.0,
            dt: 0.01,
            replicas: 1,
        }
    }
}

/// Spike counts in the scaled window `[scale t, scale (t + window)]`, divided
/// by `scale window`, against the steady rates.
pub fn spike_rate_window_check(
    config: &NetworkConfig,
    params: &WindowParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let phi0 = unit_direction(config, &params.phi0)?;
    if params.scale < 1e3 {
        return Err(VerifyError::Precondition(format!(
            "scale must be at least 1000, got {}",
            params.scale
        )));
    }
    let report = require_stable(config)?;
    let target = report.rates.clone().expect("stable networks have steady rates");

    let settle = match config.symmetric_params() {
        Some(p) => p.emptying_bound(),
        None => integrate_fluid(&phi0, &config.mean_matrix(), &config.nu(), f64::INFINITY)?
            .emptying_time()
            .ok_or_else(|| VerifyError::Precondition("fluid limit does not empty".into()))?,
    };
    if !(params.t > settle) {
        return Err(VerifyError::Precondition(format!(
            "window start {} must exceed the fluid emptying time {settle}",
            params.t
        )));
    }
    let min_expected = target.iter().fold(f64::INFINITY, |m, &r| m.min(r)) * params.scale * params.window;
    if !(min_expected >= 10.0) {
        return Err(VerifyError::Precondition(format!(
            "window too short: {min_expected:.2} expected spikes, need at least 10"
        )));
    }

    let z0: Vec<f64> = phi0.iter().map(|p| p * params.scale).collect();
    let start_steps = steps_for(params.scale * params.t, params.dt);
    let end_steps = steps_for(params.scale * (params.t + params.window), params.dt);
    let span = (end_steps - start_steps) as f64 * params.dt;
    let per_replica_rates = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut engine = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        advance(&mut engine, start_steps)?;
        let start = engine.counts().to_vec();
        advance(&mut engine, end_steps - start_steps)?;
        Ok(engine
            .counts()
            .iter()
            .zip(&start)
            .map(|(end, start)| (end - start) as f64 / span)
            .collect::<Vec<f64>>())
    })?;
    let rates = mean_rows(&per_replica_rates);
    let errors = relative_errors(&rates, &target);
    let statistic = max_of(&errors);
    Ok(
        CheckResult::new("window", statistic, 0.05, statistic <= 0.05, params.replicas, seed)
            .detail("rate", rates)
            .detail("target", target)
            .detail("relative_error", errors)
            .with_note("single large scale taken as representative of the scaling limit"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LawFamily;

    #[test]
    fn deterministic_renewal_is_exact() {
        let params = RenewalParams {
            horizon: 2048.0,
            dt: 1.0 / 64.0,
            ..RenewalParams::default()
        };
        let result =
            renewal_rate_estimate(&LevySpec::brownian(1.0, 0.0), &Law::constant(2.0), &params, 1)
                .unwrap();
        assert_eq!(result.statistic, 0.0);
        assert!(result.pass);
    }

    #[test]
    fn renewal_horizon_guard() {
        let params = RenewalParams {
            horizon: 100.0,
            ..RenewalParams::default()
        };
        assert!(matches!(
            renewal_rate_estimate(&LevySpec::brownian(1.0, 1.0), &Law::constant(2.0), &params, 1),
            Err(VerifyError::Precondition(_))
        ));
    }

    #[test]
    fn window_guards() {
        let cfg = NetworkConfig::symmetric(
            &[2.0; 3],
            &[1.0; 3],
            1.0,
            &LevySpec::brownian(1.0, 0.5),
            LawFamily::Constant,
        )
        .unwrap();
        let short = WindowParams {
            window: 0.01,
            ..WindowParams::default()
        };
        assert!(matches!(
            spike_rate_window_check(&cfg, &short, 1),
            Err(VerifyError::Precondition(m)) if m.contains("window too short")
        ));
        let early = WindowParams {
            t: 1.0,
            ..WindowParams::default()
        };
        assert!(matches!(
            spike_rate_window_check(&cfg, &early, 1),
            Err(VerifyError::Precondition(_))
        ));
        let small = WindowParams {
            scale: 100.0,
            ..WindowParams::default()
        };
        assert!(spike_rate_window_check(&cfg, &small, 1).is_err());
    }

    #[test]
    fn unstable_network_is_refused() {
        let b = crate::linalg::Matrix::from_rows(&[
            vec![8.0, 2.0, 6.0],
            vec![2.0, 8.0, 6.0],
            vec![6.0, 6.0, 8.0],
        ])
        .unwrap();
        let cfg = NetworkConfig::from_means(LevySpec::brownian(1.0, 0.5), &b, LawFamily::Constant)
            .unwrap();
        assert!(matches!(
            empirical_rate_check(&cfg, &EmpiricalRateParams::default(), 1),
            Err(VerifyError::Precondition(_))
        ));
    }
}
