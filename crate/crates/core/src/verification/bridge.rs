use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{per_replica, CheckResult};
use crate::error::VerifyError;
use crate::levy::crossing_probability;
use crate::rng::{ReplicaKey, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeParams {
    /// Barrier depth below zero.
    pub k: f64,
    pub sigma: f64,
    pub t: f64,
    /// End-point drifts, strictly increasing.
    pub x_grid: Vec<f64>,
    /// Paths per grid point.
    pub replicas: u64,
    /// Grid steps per path; crossings between grid points are drawn from the
    /// bridge minimum law.
    pub steps: usize,
}

impl Default for BridgeParams {
    fn default() -> Self {
        Self {
            k: 0.5,
            sigma: 1.0,
            t: 1.0,
            x_grid: vec![-1.0, 0.0, 1.0, 2.0],
            replicas: 100_000,
            steps: 100,
        }
    }
}

/// `P{ min_s (x s / t + bridge(s)) >= -k }` for a bridge pinned at zero at
/// both ends.
pub fn bridge_survival_closed_form(x: f64, k: f64, sigma: f64, t: f64) -> f64 {
    if x + k <= 0.0 || k <= 0.0 {
        return 0.0;
    }
    1.0 - (-2.0 * k * (x + k) / (sigma * sigma * t)).exp()
}

fn survival_estimate(x: f64, params: &BridgeParams, key: ReplicaKey) -> f64 {
    let mut rng = key.stream(Stream::Aux(0));
    let m = params.steps;
    let h = params.t / m as f64;
    let sd = params.sigma * h.sqrt();
    let mut w = vec![0.0; m + 1];
    let mut survived = 0u64;
    for _ in 0..params.replicas {
        for j in 1..=m {
            w[j] = w[j - 1] + sd * rng.sample::<f64, _>(StandardNormal);
        }
        let end = w[m];
        let level = |j: usize| {
            let s = j as f64 / m as f64;
            params.k + x * s + w[j] - s * end
        };
        let mut alive = true;
        let mut a = level(0);
        for j in 1..=m {
            let b = level(j);
            if b <= 0.0 || rng.random::<f64>() < crossing_probability(a, b, params.sigma, h) {
                alive = false;
                break;
            }
            a = b;
        }
        survived += alive as u64;
    }
    survived as f64 / params.replicas as f64
}

/// Monte Carlo survival probabilities along `x_grid`; fails if a later grid
/// point falls below an earlier neighbour by more than three pooled
/// standard errors. Grid point `i` uses its own key `(seed, i)`.
pub fn bridge_monotonicity(params: &BridgeParams, seed: u64) -> Result<CheckResult, VerifyError> {
    if params.replicas < 10_000 {
        return Err(VerifyError::Precondition(format!(
            "need at least 10000 paths per grid point, got {}",
            params.replicas
        )));
    }
    if params.x_grid.is_empty() || params.x_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(VerifyError::Precondition("x_grid must be strictly increasing".into()));
    }
    if !(params.sigma > 0.0 && params.t > 0.0 && params.k >= 0.0) || params.steps == 0 {
        return Err(VerifyError::Precondition(
            "need sigma > 0, t > 0, k >= 0 and at least one step".into(),
        ));
    }

    let grid = &params.x_grid;
    let p = per_replica(grid.len() as u64, |i| {
        Ok(survival_estimate(grid[i as usize], params, ReplicaKey::new(seed, i)))
    })?;
    let n = params.replicas as f64;
    let violations: Vec<f64> = p
        .windows(2)
        .map(|w| {
            let pooled = 0.5 * (w[0] + w[1]);
            let se = (2.0 * pooled * (1.0 - pooled) / n).sqrt();
            w[0] - w[1] - 3.0 * se
        })
        .collect();
    let statistic = violations.iter().fold(0.0_f64, |m, &v| m.max(v));
    let closed: Vec<f64> = grid
        .iter()
        .map(|&x| bridge_survival_closed_form(x, params.k, params.sigma, params.t))
        .collect();
    let z_closed: Vec<f64> = p
        .iter()
        .zip(&closed)
        .map(|(&est, &cf)| {
            let se = (cf * (1.0 - cf) / n).sqrt();
            if se > 0.0 {
                (est - cf) / se
            } else if est == cf {
                0.0
            } else {
                f64::MAX
            }
        })
        .collect();
    Ok(
        CheckResult::new("bridge", statistic, 0.0, statistic <= 0.0, params.replicas, seed)
            .detail("x", grid.clone())
            .detail("p", p.clone())
            .detail(
                "standard_error",
                p.iter().map(|&q| (q * (1.0 - q) / n).sqrt()).collect(),
            )
            .detail("closed_form", closed)
            .detail("z_closed_form", z_closed)
            .detail("excess_drop", violations),
    )
}
