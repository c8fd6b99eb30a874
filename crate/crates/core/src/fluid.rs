//! Piecewise-linear fluid limit.
//!
//! On every segment the coordinates at zero form the active set `A`. Their
//! spike rates solve `sum_{j in A} b_ji r_j = nu_i` for `i in A` (so their
//! potentials stay at zero); inactive neurons do not spike and their
//! potentials move with slope `-nu_i + sum_{j in A} b_ji r_j`. A new segment
//! starts whenever a positive coordinate reaches zero.

use serde::{Deserialize, Serialize};

use crate::error::{require_nonnegative, FluidError, ParamError};
use crate::linalg::{solve_left, Matrix};
use crate::network::SymmetricParams;

/// Coordinates reaching zero within this time of each other join together.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidRates {
    /// Spike rates, zero off the active set.
    pub rates: Vec<f64>,
    /// No active rate is negative.
    pub feasible: bool,
}

pub fn fluid_rates(active: &[usize], b: &Matrix, nu: &[f64]) -> Result<FluidRates, FluidError> {
    let n = b.n();
    let mut rates = vec![0.0; n];
    if active.is_empty() {
        return Ok(FluidRates {
            rates,
            feasible: true,
        });
    }
    let restricted = b.restrict(active);
    let rhs: Vec<f64> = active.iter().map(|&i| nu[i]).collect();
    let solved = solve_left(&restricted, &rhs).map_err(|_| FluidError::Rank {
        active: active.to_vec(),
    })?;
    for (&i, r) in active.iter().zip(solved) {
        rates[i] = r;
    }
    let feasible = active.iter().all(|&i| rates[i] >= 0.0);
    Ok(FluidRates { rates, feasible })
}

pub fn fluid_slopes(active: &[usize], rates: &[f64], b: &Matrix, nu: &[f64]) -> Vec<f64> {
    (0..b.n())
        .map(|i| {
            if active.contains(&i) {
                0.0
            } else {
                -nu[i] + active.iter().map(|&j| b[(j, i)] * rates[j]).sum::<f64>()
            }
        })
        .collect()
}

/// Closed-form active rates of the symmetric network.
pub fn symmetric_fluid_rates(p: &SymmetricParams, active: &[usize]) -> Vec<f64> {
    let load = 1.0 + active.iter().map(|&k| p.w[k] / (p.h[k] - p.w[k])).sum::<f64>();
    let mut r = vec![0.0; p.n()];
    for &i in active {
        r[i] = p.nu / ((p.h[i] - p.w[i]) * load);
    }
    r
}

/// Common slope of the inactive coordinates in the symmetric network.
pub fn symmetric_fluid_slope(p: &SymmetricParams, active: &[usize]) -> f64 {
    -p.nu / (1.0 + active.iter().map(|&k| p.w[k] / (p.h[k] - p.w[k])).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub phi_start: Vec<f64>,
    pub slope: Vec<f64>,
    pub rates: Vec<f64>,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum FluidStatus {
    /// All coordinates are zero from `time` on.
    EmptiedAt { time: f64 },
    /// A coordinate grows without bound (`coordinate`, `slope`), or the active
    /// rates are infeasible (`coordinate` absent).
    Diverges {
        time: f64,
        coordinate: Option<usize>,
        slope: Option<f64>,
    },
    HorizonTruncated { horizon: f64 },
}

/// Segments start at `breakpoints[k]`; the last segment is open-ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidTrajectory {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Segment>,
    #[serde(flatten)]
    pub status: FluidStatus,
}

impl FluidTrajectory {
    pub fn emptying_time(&self) -> Option<f64> {
        match self.status {
            FluidStatus::EmptiedAt { time } => Some(time),
            _ => None,
        }
    }

    pub fn phi_at(&self, t: f64) -> Vec<f64> {
        let k = self
            .breakpoints
            .iter()
            .rposition(|&b| b <= t)
            .unwrap_or(0);
        let seg = &self.segments[k];
        let dt = (t - seg.start).max(0.0);
        seg.phi_start
            .iter()
            .zip(&seg.slope)
            .map(|(p, s)| (p + s * dt).max(0.0))
            .collect()
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.slope.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Event-driven integration of the fluid limit from `phi0` up to `horizon`
/// (which may be infinite).
pub fn integrate_fluid(
    phi0: &[f64],
    b: &Matrix,
    nu: &[f64],
    horizon: f64,
) -> Result<FluidTrajectory, FluidError> {
    let n = b.n();
    if phi0.len() != n || nu.len() != n {
        return Err(ParamError::Invalid(format!(
            "phi0 and nu must have {n} entries (got {} and {})",
            phi0.len(),
            nu.len()
        ))
        .into());
    }
    for &v in phi0 {
        require_nonnegative("phi0", v)?;
    }
    if !(horizon >= 0.0) {
        return Err(ParamError::Negative {
            name: "horizon",
            value: horizon,
        }
        .into());
    }

    let mut phi = phi0.to_vec();
    let mut t = 0.0;
    let mut breakpoints = Vec::new();
    let mut segments = Vec::new();
    let status = loop {
        let active: Vec<usize> = (0..n).filter(|&i| phi[i] <= 0.0).collect();
        for &i in &active {
            phi[i] = 0.0;
        }
        let FluidRates { rates, feasible } = fluid_rates(&active, b, nu)?;
        let slope = fluid_slopes(&active, &rates, b, nu);
        breakpoints.push(t);
        segments.push(Segment {
            start: t,
            phi_start: phi.clone(),
            slope: slope.clone(),
            rates,
            active: active.clone(),
        });

        if !feasible {
            break FluidStatus::Diverges {
                time: t,
                coordinate: None,
                slope: None,
            };
        }
        if active.len() == n {
            break FluidStatus::EmptiedAt { time: t };
        }
        if let Some((k, &s)) = slope
            .iter()
            .enumerate()
            .filter(|&(i, &s)| !active.contains(&i) && s > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            break FluidStatus::Diverges {
                time: t,
                coordinate: Some(k),
                slope: Some(s),
            };
        }

        let hits: Vec<(usize, f64)> = (0..n)
            .filter(|&i| !active.contains(&i) && slope[i] < 0.0)
            .map(|i| (i, phi[i] / -slope[i]))
            .collect();
        let Some(tau) = hits.iter().map(|h| h.1).min_by(f64::total_cmp) else {
            break FluidStatus::HorizonTruncated { horizon };
        };
        if t + tau > horizon {
            break FluidStatus::HorizonTruncated { horizon };
        }
        for i in 0..n {
            phi[i] += slope[i] * tau;
        }
        for &(i, hit) in &hits {
            if hit - tau <= TIE_TOLERANCE {
                phi[i] = 0.0;
            }
        }
        t += tau;
    };

    Ok(FluidTrajectory {
        breakpoints,
        segments,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix() -> Matrix {
        Matrix::from_rows(&[
            vec![8.0, 2.0, 6.0],
            vec![2.0, 8.0, 6.0],
            vec![6.0, 6.0, 8.0],
        ])
        .unwrap()
    }

    fn sym2() -> (Matrix, SymmetricParams) {
        (
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            SymmetricParams {
                h: vec![2.0, 2.0],
                w: vec![1.0, 1.0],
                nu: 1.0,
            },
        )
    }

    #[test]
    fn empty_active_set() {
        let (b, _) = sym2();
        let r = fluid_rates(&[], &b, &[1.0, 1.0]).unwrap();
        assert_eq!(r.rates, vec![0.0, 0.0]);
        assert_eq!(fluid_slopes(&[], &r.rates, &b, &[1.0, 1.0]), vec![-1.0, -1.0]);
    }

    #[test]
    fn symmetric_rates_and_slopes() {
        let (b, p) = sym2();
        let r = fluid_rates(&[1], &b, &[1.0, 1.0]).unwrap();
        assert!((r.rates[1] - 0.5).abs() < 1e-15 && r.rates[0] == 0.0);
        assert_eq!(symmetric_fluid_rates(&p, &[1]), vec![0.0, 0.5]);
        let s = fluid_slopes(&[1], &r.rates, &b, &[1.0, 1.0]);
        assert!((s[0] + 0.5).abs() < 1e-15 && s[1] == 0.0);
        assert_eq!(symmetric_fluid_slope(&p, &[1]), -0.5);
    }

    #[test]
    fn appendix_rates_and_positive_slope() {
        let b = appendix();
        let r = fluid_rates(&[0, 1], &b, &[1.0; 3]).unwrap();
        assert!((r.rates[0] - 0.1).abs() < 1e-15 && (r.rates[1] - 0.1).abs() < 1e-15);
        assert_eq!(r.rates[2], 0.0);
        let s = fluid_slopes(&[0, 1], &r.rates, &b, &[1.0; 3]);
        assert!((s[2] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn singular_active_block_is_a_rank_error() {
        let b = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(
            fluid_rates(&[0, 1], &b, &[1.0, 1.0]),
            Err(FluidError::Rank { active: vec![0, 1] })
        );
    }

    #[test]
    fn zero_start_is_already_empty() {
        let (b, _) = sym2();
        let traj = integrate_fluid(&[0.0, 0.0], &b, &[1.0, 1.0], 10.0).unwrap();
        assert_eq!(traj.status, FluidStatus::EmptiedAt { time: 0.0 });
        assert_eq!(traj.segments.len(), 1);
    }

    #[test]
    fn symmetric_two_neurons_empty_at_two() {
        let (b, p) = sym2();
        let traj = integrate_fluid(&[1.0, 0.0], &b, &[1.0, 1.0], f64::INFINITY).unwrap();
        assert_eq!(traj.breakpoints, vec![0.0, 2.0]);
        assert_eq!(traj.status, FluidStatus::EmptiedAt { time: 2.0 });
        assert!(2.0 <= p.emptying_bound());
        assert_eq!(traj.phi_at(1.0), vec![0.5, 0.0]);
        assert_eq!(traj.phi_at(5.0), vec![0.0, 0.0]);
    }

    #[test]
    fn appendix_diverges_on_third_neuron() {
        let traj = integrate_fluid(&[0.0, 0.0, 1.0], &appendix(), &[1.0; 3], 100.0).unwrap();
        match traj.status {
            FluidStatus::Diverges {
                coordinate: Some(2),
                slope: Some(s),
                ..
            } => assert!((s - 0.2).abs() < 1e-14),
            other => panic!("unexpected status {other:?}"),
        }
    }

    #[test]
    fn horizon_truncation() {
        let (b, _) = sym2();
        let traj = integrate_fluid(&[1.0, 0.0], &b, &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(traj.status, FluidStatus::HorizonTruncated { horizon: 1.0 });
    }

    #[test]
    fn ties_join_together() {
        let (b, _) = sym2();
        let traj = integrate_fluid(&[0.5, 0.5 + 1e-14], &b, &[1.0, 1.0], 10.0).unwrap();
        assert_eq!(traj.segments.len(), 2);
        assert_eq!(traj.segments[1].active, vec![0, 1]);
    }
}
