//! Spectrally positive Lévy driver: Brownian motion with drift plus
//! compound-Poisson positive jumps.
//!
//! The process `X` of one neuron has mean `E X(t) = -nu t`. Its continuous
//! part carries drift `d = -(nu + jump_rate * E[jump])` so that the jumps do
//! not shift the overall mean. Downward motion is continuous, so threshold
//! crossings are attributed to the Gaussian part only; within a step they are
//! detected with the Brownian-bridge minimum formula.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_nonnegative, require_positive, ParamError};

/// Positive-support distribution with finite mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Law {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
    /// `exp(N(mu, sigma2))`.
    LogNormal { mu: f64, sigma2: f64 },
}

impl Law {
    pub fn constant(value: f64) -> Self {
        Law::Constant { value }
    }

    /// Distribution of the given `family` rescaled to have mean `mean`.
    pub fn with_mean(family: LawFamily, mean: f64) -> Self {
        match family {
            LawFamily::Constant => Law::Constant { value: mean },
            LawFamily::Exponential => Law::Exponential { mean },
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match *self {
            Law::Constant { value } => {
                require_positive("constant value", value)?;
            }
            Law::Uniform { low, high } => {
                require_positive("uniform low", low)?;
                require_finite("uniform high", high)?;
                if high < low {
                    return Err(ParamError::Invalid(format!(
                        "uniform law needs low <= high, got ({low}, {high})"
                    )));
                }
            }
            Law::Exponential { mean } => {
                require_positive("exponential mean", mean)?;
            }
            Law::LogNormal { mu, sigma2 } => {
                require_finite("lognormal mu", mu)?;
                require_nonnegative("lognormal sigma2", sigma2)?;
                if !self.mean().is_finite() {
                    return Err(ParamError::Invalid(format!(
                        "lognormal({mu}, {sigma2}) has non-finite mean"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Constant { value } => value,
            Law::Uniform { low, high } => 0.5 * (low + high),
            Law::Exponential { mean } => mean,
            Law::LogNormal { mu, sigma2 } => (mu + 0.5 * sigma2).exp(),
        }
    }

    /// Draws one value. Constant laws consume no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Constant { value } => value,
            Law::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Law::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            Law::LogNormal { mu, sigma2 } => {
                let g: f64 = StandardNormal.sample(rng);
                (mu + sigma2.sqrt() * g).exp()
            }
        }
    }
}

/// Family used when a law is specified only through its mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawFamily {
    #[default]
    Constant,
    Exponential,
}

fn default_jump_law() -> Law {
    Law::Constant { value: 1.0 }
}

/// Driving-noise parameters of one neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySpec {
    /// Mean decay rate, `nu = -E X(1) > 0`.
    pub nu: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub jump_rate: f64,
    #[serde(default = "default_jump_law")]
    pub jump_law: Law,
}

impl LevySpec {
    pub fn brownian(nu: f64, sigma: f64) -> Self {
        Self {
            nu,
            sigma,
            jump_rate: 0.0,
            jump_law: default_jump_law(),
        }
    }

    pub fn with_jumps(mut self, jump_rate: f64, jump_law: Law) -> Self {
        self.jump_rate = jump_rate;
        self.jump_law = jump_law;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        require_positive("nu", self.nu)?;
        require_nonnegative("sigma", self.sigma)?;
        require_nonnegative("jump_rate", self.jump_rate)?;
        self.jump_law.validate()
    }

    /// Drift of the continuous component.
    pub fn continuous_drift(&self) -> f64 {
        if self.jump_rate > 0.0 {
            -(self.nu + self.jump_rate * self.jump_law.mean())
        } else {
            -self.nu
        }
    }

    /// Fills `draws` with one step of the driver. The number of values taken
    /// from `rng` depends only on the spec and the drawn jump count, never on
    /// any network state.
    pub fn draw_step<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, draws: &mut StepDraws) {
        draws.clear();
        if self.jump_rate > 0.0 {
            let count = Poisson::new(self.jump_rate * dt)
                .map(|p| p.sample(rng) as usize)
                .unwrap_or(0);
            for _ in 0..count {
                let offset = dt * rng.random::<f64>();
                let size = self.jump_law.sample(rng);
                draws.jumps.push(Jump { offset, size });
            }
            draws.jumps.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        }
        let drift = self.continuous_drift();
        let mut start = 0.0;
        for k in 0..=draws.jumps.len() {
            let end = draws.jumps.get(k).map_or(dt, |j| j.offset);
            let len = end - start;
            let mut increment = drift * len;
            if self.sigma > 0.0 {
                let g: f64 = StandardNormal.sample(rng);
                increment += self.sigma * len.sqrt() * g;
            }
            draws.pieces.push(Piece { len, increment });
            start = end;
        }
        if self.sigma > 0.0 {
            for _ in 0..draws.pieces.len() {
                draws.uniforms.push(rng.random::<f64>());
            }
        }
    }

    /// Samples the increment of `X` over a step of length `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(
        &self,
        dt: f64,
        rng: &mut R,
    ) -> Result<Increment, ParamError> {
        require_positive("dt", dt)?;
        let mut draws = StepDraws::default();
        self.draw_step(dt, rng, &mut draws);
        Ok(Increment {
            continuous_part: draws.continuous_part(),
            jumps: draws.jumps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    /// Time of the jump measured from the start of the step.
    pub offset: f64,
    pub size: f64,
}

/// Continuous motion between consecutive jumps of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub len: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub continuous_part: f64,
    pub jumps: Vec<Jump>,
}

impl Increment {
    pub fn total(&self) -> f64 {
        self.continuous_part + self.jumps.iter().map(|j| j.size).sum::<f64>()
    }
}

/// Reusable buffer with the raw draws of one step: jumps in time order, the
/// continuous pieces between them, and one uniform per piece for the
/// sub-step crossing decision (only when `sigma > 0`).
#[derive(Debug, Clone, Default)]
pub struct StepDraws {
    pub jumps: Vec<Jump>,
    pub pieces: Vec<Piece>,
    pub uniforms: Vec<f64>,
}

impl StepDraws {
    pub fn clear(&mut self) {
        self.jumps.clear();
        self.pieces.clear();
        self.uniforms.clear();
    }

    pub fn continuous_part(&self) -> f64 {
        self.pieces.iter().map(|p| p.increment).sum()
    }

    pub fn total(&self) -> f64 {
        self.continuous_part() + self.jumps.iter().map(|j| j.size).sum::<f64>()
    }
}

/// Probability that a Brownian path with diffusion `sigma` going from
/// `z_start` to `z_end` over time `dt` touches zero.
pub fn crossing_probability(z_start: f64, z_end: f64, sigma: f64, dt: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    if z_start <= 0.0 || z_end <= 0.0 {
        return 1.0;
    }
    if sigma == 0.0 {
        return 0.0;
    }
    (-2.0 * z_start * z_end / (sigma * sigma * dt)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{ReplicaKey, Stream};
    use proptest::prelude::*;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        ReplicaKey::new(seed, 0).stream(Stream::Aux(0))
    }

    #[test]
    fn deterministic_drift_without_noise() {
        let spec = LevySpec::brownian(1.0, 0.0);
        let inc = spec.sample_increment(0.5, &mut rng(1)).unwrap();
        assert_eq!(inc.continuous_part, -0.5);
        assert!(inc.jumps.is_empty());
    }

    #[test]
    fn rejects_bad_dt() {
        let spec = LevySpec::brownian(1.0, 1.0);
        assert!(spec.sample_increment(f64::NAN, &mut rng(1)).is_err());
        assert!(spec.sample_increment(0.0, &mut rng(1)).is_err());
    }

    #[test]
    fn mean_increment_matches_minus_nu_dt() {
        let spec = LevySpec::brownian(1.0, 1.0).with_jumps(2.0, Law::constant(0.5));
        let mut r = rng(7);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = spec.sample_increment(0.1, &mut r).unwrap().total();
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean + 0.1).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn increment_variance_is_sigma_squared_dt() {
        let spec = LevySpec::brownian(1.0, 2.0);
        let mut r = rng(11);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| spec.sample_increment(0.25, &mut r).unwrap().total())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - var * var) / n as f64).sqrt();
        assert!((var - 1.0).abs() <= 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn path_average_slope_converges_to_minus_nu() {
        let spec = LevySpec::brownian(0.7, 1.5).with_jumps(0.8, Law::Exponential { mean: 0.6 });
        let replicas = 400;
        let horizon_steps = 1000;
        let slopes: Vec<f64> = (0..replicas)
            .map(|r| {
                let mut g = ReplicaKey::new(5, r).stream(Stream::Noise(0));
                let mut draws = StepDraws::default();
                let mut x = 0.0;
                for _ in 0..horizon_steps {
                    spec.draw_step(1.0, &mut g, &mut draws);
                    x += draws.total();
                }
                x / horizon_steps as f64
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / replicas as f64;
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64;
        let se = (var / replicas as f64).sqrt();
        assert!((mean + 0.7).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn crossing_probability_edge_cases() {
        assert_eq!(crossing_probability(1.0, -0.1, 1.0, 0.1), 1.0);
        assert_eq!(crossing_probability(0.0, 2.0, 1.0, 0.1), 1.0);
        assert_eq!(crossing_probability(1.0, 1.0, 0.0, 0.1), 0.0);
        let (sigma, dt) = (0.7, 0.3);
        let z = sigma * f64::sqrt(dt);
        assert!((crossing_probability(z, z, sigma, dt) - (-2.0f64).exp()).abs() < 1e-15);
    }

    /// Independent check of the bridge-minimum formula: discretely monitored
    /// bridges at two resolutions on common paths, extrapolated in `1/sqrt(M)`.
    #[test]
    fn crossing_probability_matches_fine_grained_bridges() {
        let (sigma, dt) = (1.0, 1.0);
        let z = sigma * f64::sqrt(dt);
        let fine = 1600;
        let coarse_every = 4;
        let paths = 100_000;
        let mut r = rng(99);
        let h = dt / fine as f64;
        let (mut hit_fine, mut hit_coarse) = (0u64, 0u64);
        let mut w = vec![0.0; fine + 1];
        for _ in 0..paths {
            for k in 0..fine {
                let g: f64 = StandardNormal.sample(&mut r);
                w[k + 1] = w[k] + sigma * h.sqrt() * g;
            }
            let w_end = w[fine];
            let (mut min_fine, mut min_coarse) = (f64::INFINITY, f64::INFINITY);
            for (k, wk) in w.iter().enumerate() {
                let s = k as f64 / fine as f64;
                let v = z + wk - s * w_end;
                min_fine = min_fine.min(v);
                if k % coarse_every == 0 {
                    min_coarse = min_coarse.min(v);
                }
            }
            hit_fine += u64::from(min_fine <= 0.0);
            hit_coarse += u64::from(min_coarse <= 0.0);
        }
        let p_fine = hit_fine as f64 / paths as f64;
        let p_coarse = hit_coarse as f64 / paths as f64;
        // bias ~ c / sqrt(M); M_fine = 4 M_coarse so the limit is 2 p_fine - p_coarse
        let extrapolated = 2.0 * p_fine - p_coarse;
        let se = (5.0 * p_fine * (1.0 - p_fine) / paths as f64).sqrt();
        let exact = crossing_probability(z, z, sigma, dt);
        assert!(
            (extrapolated - exact).abs() <= 4.0 * se,
            "extrapolated {extrapolated} vs {exact} (se {se})"
        );
    }

    proptest! {
        #[test]
        fn crossing_probability_is_monotone(
            a in 0.001f64..5.0, b in 0.001f64..5.0, da in 0.0f64..2.0,
            sigma in 0.01f64..3.0, dt in 0.001f64..2.0,
        ) {
            let p = crossing_probability(a, b, sigma, dt);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(crossing_probability(a + da, b, sigma, dt) <= p);
            prop_assert!(crossing_probability(a, b + da, sigma, dt) <= p);
        }

        #[test]
        fn sampled_jumps_are_positive(
            seed in any::<u64>(),
            law_kind in 0usize..4,
            p1 in 0.01f64..3.0,
            p2 in 0.0f64..2.0,
        ) {
            let law = match law_kind {
                0 => Law::Constant { value: p1 },
                1 => Law::Uniform { low: p1, high: p1 + p2 },
                2 => Law::Exponential { mean: p1 },
                _ => Law::LogNormal { mu: p1 - 1.5, sigma2: p2 },
            };
            prop_assert!(law.validate().is_ok());
            let spec = LevySpec::brownian(1.0, 0.3).with_jumps(20.0, law);
            let mut r = rng(seed);
            for _ in 0..50 {
                let inc = spec.sample_increment(0.5, &mut r).unwrap();
                prop_assert!(inc.jumps.iter().all(|j| j.size > 0.0));
                prop_assert!(inc.jumps.windows(2).all(|w| w[0].offset <= w[1].offset));
            }
        }
    }

    #[test]
    fn law_validation() {
        assert!(Law::Constant { value: 0.0 }.validate().is_err());
        assert!(Law::Uniform { low: 0.0, high: 1.0 }.validate().is_err());
        assert!(Law::Uniform { low: 2.0, high: 1.0 }.validate().is_err());
        assert!(Law::Exponential { mean: -1.0 }.validate().is_err());
        assert!(Law::LogNormal { mu: 0.0, sigma2: -1.0 }.validate().is_err());
        assert!(LevySpec::brownian(0.0, 1.0).validate().is_err());
        assert!(LevySpec::brownian(1.0, -1.0).validate().is_err());
        assert!((Law::LogNormal { mu: 0.0, sigma2: 2.0 }.mean() - 1f64.exp()).abs() < 1e-12);
    }
}
