use serde::{Deserialize, Serialize};

use super::{advance, initial_state, per_replica, require_replicas, unit_direction, CheckResult};
use crate::error::VerifyError;
use crate::fluid::{fluid_rates, fluid_slopes, integrate_fluid};
use crate::network::{steps_for, Coupling, Engine, NetworkConfig};
use crate::rng::ReplicaKey;
use crate::stability::check_partial_stability;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceParams {
    pub z0: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: u64,
}

impl Default for DivergenceParams {
    fn default() -> Self {
        Self {
            z0: None,
            horizon: 1e4,
            dt: 0.01,
            replicas: 20,
        }
    }
}

/// Growth rate `Z_k(T) / T` of the coordinate pushed away by the failing
/// subset, against the fluid slope.
///
/// For a partial-risk network with witness `S` the prediction is the largest
/// fluid slope outside `S` when `S` is the active set, and the statistic is
/// the replica mean of `Z_k(T) / T` for that coordinate; it must lie within
/// 25% of a positive prediction. For a stable network the prediction is zero
/// growth, the statistic is the largest mean `Z_k(T) / T` over all
/// coordinates and the tolerance is an absolute 0.05.
pub fn divergence_check(
    config: &NetworkConfig,
    params: &DivergenceParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let z0 = initial_state(config, &params.z0)?;
    let b = config.mean_matrix();
    let nu = config.nu();
    let n = config.n();
    let report = check_partial_stability(&b, &nu)?;

    let target = match report.witness() {
        Some(witness) => {
            let rates = fluid_rates(witness, &b, &nu)?;
            let slopes = fluid_slopes(witness, &rates.rates, &b, &nu);
            let k = (0..n)
                .filter(|i| !witness.contains(i))
                .max_by(|&i, &j| slopes[i].total_cmp(&slopes[j]))
                .ok_or_else(|| {
                    VerifyError::Precondition(
                        "witness covers every neuron; no coordinate to follow".into(),
                    )
                })?;
            Some((k, slopes[k].max(0.0)))
        }
        None => None,
    };

    let steps = steps_for(params.horizon, params.dt);
    let horizon = steps as f64 * params.dt;
    let growth = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut engine = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        advance(&mut engine, steps)?;
        Ok(engine.state().iter().map(|z| z / horizon).collect::<Vec<f64>>())
    })?;
    let mean_growth = super::mean_rows(&growth);

    let (coordinate, prediction, statistic) = match target {
        Some((k, pred)) => (k, pred, mean_growth[k]),
        None => {
            let k = (0..n)
                .max_by(|&i, &j| mean_growth[i].total_cmp(&mean_growth[j]))
                .expect("at least one neuron");
            (k, 0.0, mean_growth[k])
        }
    };
    let threshold = if prediction > 0.0 { 0.25 * prediction } else { 0.05 };
    let pass = (statistic - prediction).abs() <= threshold;
    Ok(
        CheckResult::new("divergence", statistic, threshold, pass, params.replicas, seed)
            .detail("prediction", vec![prediction])
            .detail("coordinate", vec![coordinate as f64])
            .detail("mean_growth", mean_growth)
            .detail(
                "replica_growth",
                growth.iter().map(|g| g[coordinate]).collect(),
            )
            .with_note("threshold is the allowed |statistic - prediction|"),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidDeviationParams {
    pub phi0: Option<Vec<f64>>,
    pub scale: f64,
    pub dt: f64,
    pub replicas: u64,
    /// Approximate number of comparison times.
    pub grid_points: u64,
}

impl Default for FluidDeviationParams {
    fn default() -> Self {
        Self {
            phi0: None,
            scale: 2000.0,
            dt: 1e-3,
            replicas: 1,
            grid_points: 1000,
        }
    }
}

/// Largest l1 distance between the rescaled trajectory `Z(scale t) / scale`
/// started from `scale phi0` and the fluid limit from `phi0`, over a time grid
/// up to the fluid emptying time (maximum over replicas).
pub fn fluid_deviation(
    config: &NetworkConfig,
    params: &FluidDeviationParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    if params.scale < 1e3 {
        return Err(VerifyError::Precondition(format!(
            "scale must be at least 1000, got {}",
            params.scale
        )));
    }
    fluid_deviation_at_any_scale(config, params, seed)
}

pub(crate) fn fluid_deviation_at_any_scale(
    config: &NetworkConfig,
    params: &FluidDeviationParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let phi0 = unit_direction(config, &params.phi0)?;
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(VerifyError::Precondition("scale must be positive".into()));
    }
    let trajectory = integrate_fluid(&phi0, &config.mean_matrix(), &config.nu(), f64::INFINITY)?;
    let emptied = trajectory
        .emptying_time()
        .ok_or_else(|| VerifyError::Precondition("fluid limit from phi0 does not empty".into()))?;

    let z0: Vec<f64> = phi0.iter().map(|p| p * params.scale).collect();
    let steps = steps_for(params.scale * emptied, params.dt);
    let stride = (steps / params.grid_points.max(1)).max(1);
    let sup = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut engine = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        let distance = |engine: &Engine<'_>| {
            let t = engine.time() / params.scale;
            engine
                .state()
                .iter()
                .zip(trajectory.phi_at(t))
                .map(|(z, phi)| (z / params.scale - phi).abs())
                .sum::<f64>()
        };
        let mut sup = distance(&engine);
        for s in 1..=steps {
            engine.step()?;
            if s % stride == 0 || s == steps {
                sup = sup.max(distance(&engine));
            }
        }
        Ok(sup)
    })?;
    let statistic = sup.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(
        CheckResult::new("fluid-deviation", statistic, 0.1, statistic <= 0.1, params.replicas, seed)
            .detail("replica_sup", sup)
            .detail("emptying_time", vec![emptied])
            .detail("scale", vec![params.scale]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{LawFamily, LevySpec};

    fn sym2(sigma: f64) -> NetworkConfig {
        NetworkConfig::symmetric(
            &[2.0, 2.0],
            &[1.0, 1.0],
            1.0,
            &LevySpec::brownian(1.0, sigma),
            LawFamily::Constant,
        )
        .unwrap()
    }

    #[test]
    fn deviation_shrinks_with_scale() {
        let cfg = sym2(0.5);
        let stats: Vec<f64> = [500.0, 1000.0, 2000.0]
            .iter()
            .map(|&scale| {
                let params = FluidDeviationParams {
                    phi0: Some(vec![0.5, 0.5]),
                    scale,
                    dt: 1e-3,
                    replicas: 4,
                    ..FluidDeviationParams::default()
                };
                fluid_deviation_at_any_scale(&cfg, &params, 11).unwrap().statistic
            })
            .collect();
        assert!(stats[0] >= stats[1] && stats[1] >= stats[2], "{stats:?}");
    }

    #[test]
    fn deterministic_driver_only_shows_reset_granularity() {
        let params = FluidDeviationParams {
            phi0: Some(vec![0.75, 0.25]),
            scale: 1000.0,
            dt: 1.0 / 64.0,
            ..FluidDeviationParams::default()
        };
        let result = fluid_deviation(&sym2(0.0), &params, 3).unwrap();
        assert!(result.statistic <= 2.0 * 2.0 / 1000.0, "{}", result.statistic);
    }

    #[test]
    fn zero_direction_is_rejected() {
        let params = FluidDeviationParams {
            phi0: Some(vec![0.0, 0.0]),
            ..FluidDeviationParams::default()
        };
        assert!(matches!(
            fluid_deviation(&sym2(0.5), &params, 1),
            Err(VerifyError::Precondition(_))
        ));
        let small = FluidDeviationParams {
            scale: 10.0,
            ..FluidDeviationParams::default()
        };
        assert!(fluid_deviation(&sym2(0.5), &small, 1).is_err());
    }
}
