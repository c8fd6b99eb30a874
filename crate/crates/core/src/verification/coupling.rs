use serde::{Deserialize, Serialize};

use super::{initial_state, per_replica, require_replicas, CheckResult};
use crate::error::VerifyError;
use crate::network::{Coupling, Engine, NetworkConfig};
use crate::rng::ReplicaKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DominanceParams {
    /// Initial state; all ones when absent.
    pub z0: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: u64,
}

impl Default for DominanceParams {
    fn default() -> Self {
        Self {
            z0: None,
            horizon: 1e3,
            dt: 0.01,
            replicas: 200,
        }
    }
}

/// Runs the network and its decoupled version on the same key, step by step,
/// and checks that the coupled spike counts never exceed the decoupled ones.
pub fn dominance_check(
    config: &NetworkConfig,
    params: &DominanceParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let z0 = initial_state(config, &params.z0)?;
    let steps = crate::network::steps_for(params.horizon, params.dt);

    // (dominated, first violation time or -1, total coupled spikes, total decoupled spikes)
    let outcomes = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let mut full = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        let mut free = Engine::new(config, &z0, Coupling::Decoupled { bar: false }, key, params.dt)?;
        let mut violation = -1.0;
        for _ in 0..steps {
            full.step()?;
            free.step()?;
            if violation < 0.0 && full.counts().iter().zip(free.counts()).any(|(a, b)| a > b) {
                violation = full.time();
            }
        }
        let coupled: u64 = full.counts().iter().sum();
        let decoupled: u64 = free.counts().iter().sum();
        Ok((violation < 0.0, violation, coupled as f64, decoupled as f64))
    })?;

    let dominated = outcomes.iter().filter(|o| o.0).count();
    let fraction = dominated as f64 / params.replicas as f64;
    Ok(
        CheckResult::new("dominance", fraction, 1.0, fraction == 1.0, params.replicas, seed)
            .detail("first_violation_time", outcomes.iter().map(|o| o.1).collect())
            .detail("coupled_spikes", outcomes.iter().map(|o| o.2).collect())
            .detail("decoupled_spikes", outcomes.iter().map(|o| o.3).collect()),
    )
}
