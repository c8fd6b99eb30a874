use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{initial_state, per_replica, require_replicas, require_stable, CheckResult};
use crate::error::VerifyError;
use crate::network::{steps_for, Coupling, Engine, NetworkConfig};
use crate::rng::{ReplicaKey, Stream};

/// Where the return-time experiment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StartLaw {
    /// Uniform on the non-negative part of the l1 sphere of radius `k0`.
    #[default]
    Sphere,
    /// `k0 direction / |direction|_1`.
    Direction { direction: Vec<f64> },
    /// A fixed state, inside or outside the ball.
    Point { z: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnTimeParams {
    /// Radius of the ball; ten times the largest reset mean when absent.
    pub k0: Option<f64>,
    pub epsilon: f64,
    pub dt: f64,
    pub replicas: u64,
    pub max_steps: u64,
    pub start: StartLaw,
}

impl Default for ReturnTimeParams {
    fn default() -> Self {
        Self {
            k0: None,
            epsilon: 0.01,
            dt: 0.01,
            replicas: 100,
            max_steps: 1_000_000,
            start: StartLaw::Sphere,
        }
    }
}

/// First time after `epsilon` at which the l1 norm of the state is below
/// `k0`. Replicas that have not returned after `max_steps` steps count as
/// failures and enter the mean at the cap.
pub fn return_time_estimate(
    config: &NetworkConfig,
    params: &ReturnTimeParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    let n = config.n();
    let b = config.mean_matrix();
    let k0 = params
        .k0
        .unwrap_or_else(|| 10.0 * (0..n).map(|i| b[(i, i)]).fold(0.0, f64::max));
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(VerifyError::Precondition(format!("k0 must be positive, got {k0}")));
    }
    if !(params.epsilon > 0.0) {
        return Err(VerifyError::Precondition("epsilon must be positive".into()));
    }
    match &params.start {
        StartLaw::Direction { direction } if direction.len() != n
            || direction.iter().any(|d| !(*d >= 0.0))
            || direction.iter().sum::<f64>() <= 0.0 =>
        {
            return Err(VerifyError::Precondition(
                "start direction must be non-negative, non-zero and match the network size".into(),
            ));
        }
        StartLaw::Point { z } => {
            initial_state(config, &Some(z.clone()))?;
        }
        _ => {}
    }
    let min_steps = steps_for(params.epsilon, params.dt).max(1);
    let cap = params.max_steps.max(min_steps);

    // (returned, return time)
    let outcomes = per_replica(params.replicas, |r| {
        let key = ReplicaKey::new(seed, r);
        let z0 = match &params.start {
            StartLaw::Sphere => {
                let mut rng = key.stream(Stream::Aux(0));
                let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = e.iter().sum();
                e.iter().map(|v| k0 * v / total).collect()
            }
            StartLaw::Direction { direction } => {
                let total: f64 = direction.iter().sum();
                direction.iter().map(|d| k0 * d / total).collect()
            }
            StartLaw::Point { z } => z.clone(),
        };
        let mut engine = Engine::new(config, &z0, Coupling::Full, key, params.dt)?;
        for s in 1..=cap {
            engine.step()?;
            if s >= min_steps && engine.state().iter().map(|z| z.abs()).sum::<f64>() < k0 {
                return Ok((true, engine.time()));
            }
        }
        Ok((false, engine.time()))
    })?;

    let returned = outcomes.iter().filter(|o| o.0).count();
    let mean = outcomes.iter().map(|o| o.1).sum::<f64>() / outcomes.len() as f64;
    let cap_time = cap as f64 * params.dt;
    Ok(CheckResult::new(
        "return-time",
        mean,
        cap_time,
        returned == outcomes.len(),
        params.replicas,
        seed,
    )
    .detail("return_time", outcomes.iter().map(|o| o.1).collect())
    .detail("returned_fraction", vec![returned as f64 / outcomes.len() as f64])
    .detail("k0", vec![k0])
    .with_note("pass iff every replica re-enters the ball within the step cap"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvParams {
    /// First start; all ones when absent.
    pub z0_a: Option<Vec<f64>>,
    /// Second start; all fifties when absent.
    pub z0_b: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub replicas: u64,
    pub bins: usize,
}

impl Default for TvParams {
    fn default() -> Self {
        Self {
            z0_a: None,
            z0_b: None,
            horizon: 1e3,
            dt: 0.05,
            replicas: 10_000,
            bins: 50,
        }
    }
}

/// Sum of absolute differences between the normalised histograms of two
/// samples over their pooled range.
pub(crate) fn histogram_l1(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let lo = a.iter().chain(b).fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = a.iter().chain(b).fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let width = (hi - lo) / bins as f64;
    let histogram = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in xs {
            let k = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            h[k] += 1.0 / xs.len() as f64;
        }
        h
    };
    histogram(a)
        .iter()
        .zip(histogram(b))
        .map(|(p, q)| (p - q).abs())
        .sum()
}

/// Compares the per-coordinate laws of `Z(t)` from two starts, at
/// `t = horizon / 4` and `t = horizon`, with independent noise for the two
/// starts. The statistic is the largest histogram l1 distance over the
/// coordinates at the horizon.
pub fn tv_diagnostic(
    config: &NetworkConfig,
    params: &TvParams,
    seed: u64,
) -> Result<CheckResult, VerifyError> {
    require_replicas(params.replicas)?;
    require_stable(config)?;
    if params.bins == 0 {
        return Err(VerifyError::Precondition("bins must be at least 1".into()));
    }
    let n = config.n();
    let z0_a = initial_state(config, &params.z0_a)?;
    let z0_b = initial_state(config, &Some(params.z0_b.clone().unwrap_or_else(|| vec![50.0; n])))?;
    let steps = steps_for(params.horizon, params.dt);
    let quarter = steps / 4;

    let run = |z0: &[f64], key: ReplicaKey| -> Result<(Vec<f64>, Vec<f64>), VerifyError> {
        let mut engine = Engine::new(config, z0, Coupling::Full, key, params.dt)?;
        super::advance(&mut engine, quarter)?;
        let early = engine.state().to_vec();
        super::advance(&mut engine, steps - quarter)?;
        Ok((early, engine.state().to_vec()))
    };
    let samples = per_replica(params.replicas, |r| {
        let a = run(&z0_a, ReplicaKey::new(seed, 2 * r))?;
        let b = run(&z0_b, ReplicaKey::new(seed, 2 * r + 1))?;
        Ok((a, b))
    })?;

    let coordinate = |i: usize, late: bool, second: bool| -> Vec<f64> {
        samples
            .iter()
            .map(|(a, b)| {
                let run = if second { b } else { a };
                if late {
                    run.1[i]
                } else {
                    run.0[i]
                }
            })
            .collect()
    };
    let early: Vec<f64> = (0..n)
        .map(|i| histogram_l1(&coordinate(i, false, false), &coordinate(i, false, true), params.bins))
        .collect();
    let late: Vec<f64> = (0..n)
        .map(|i| histogram_l1(&coordinate(i, true, false), &coordinate(i, true, true), params.bins))
        .collect();
    let stat_early = early.iter().fold(0.0_f64, |m, &v| m.max(v));
    let stat_late = late.iter().fold(0.0_f64, |m, &v| m.max(v));
    let pass = stat_late < stat_early && stat_late < 0.1;
    Ok(
        CheckResult::new("tv", stat_late, 0.1, pass, params.replicas, seed)
            .detail("distance_quarter", early)
            .detail("distance_final", late)
            .detail("times", vec![quarter as f64 * params.dt, steps as f64 * params.dt])
            .with_note(
                "heuristic: histogram distance decay stands in for total-variation convergence",
            ),
    )
}
