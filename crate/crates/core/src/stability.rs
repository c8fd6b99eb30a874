//! Steady spike rates and the subset conditions for full stability.
//!
//! Rates use the row-vector convention `x B = nu`: neuron `i` spiking at
//! rate `x_i` delivers `x_i b_ij` per unit time to neuron `j`. The restricted
//! systems of the subset conditions use the same convention,
//! `sum_{i in S} a_i b_ij = nu_j` for `j in S`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::StabilityError;
use crate::linalg::{solve_left, Matrix};

pub const MAX_SUBSET_NEURONS: usize = 20;

/// Closed-form steady rates of the symmetric network:
/// `nu / ((h_i - w_i) (1 + sum_k w_k / (h_k - w_k)))`.
pub fn closed_form_rates(h: &[f64], w: &[f64], nu: f64) -> Result<Vec<f64>, StabilityError> {
    if h.len() != w.len() || h.is_empty() {
        return Err(StabilityError::Precondition(
            "h and w must be non-empty and of equal length".into(),
        ));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(StabilityError::Precondition(format!("nu must be positive, got {nu}")));
    }
    for (i, (&hi, &wi)) in h.iter().zip(w).enumerate() {
        if !(wi > 0.0) || !(hi > wi) || !hi.is_finite() {
            return Err(StabilityError::Precondition(format!(
                "neuron {i}: need H > w > 0, got H = {hi}, w = {wi}"
            )));
        }
    }
    let load = 1.0 + h.iter().zip(w).map(|(h, w)| w / (h - w)).sum::<f64>();
    Ok(h.iter().zip(w).map(|(h, w)| nu / ((h - w) * load)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyRates {
    pub rates: Vec<f64>,
    /// All rates strictly positive.
    pub feasible: bool,
}

/// Solves `x B = nu`.
pub fn steady_rates(b: &Matrix, nu: &[f64]) -> Result<SteadyRates, StabilityError> {
    let n = b.n();
    if nu.len() != n || n == 0 {
        return Err(StabilityError::Precondition(format!(
            "nu has {} entries for a {n}x{n} matrix",
            nu.len()
        )));
    }
    if (0..n).any(|i| b.row(i).iter().any(|&v| !(v > 0.0 && v.is_finite()))) {
        return Err(StabilityError::Precondition(
            "mean matrix entries must be strictly positive".into(),
        ));
    }
    let rates = solve_left(b, nu).map_err(|_| StabilityError::Rank)?;
    let feasible = rates.iter().all(|&x| x > 0.0);
    Ok(SteadyRates { rates, feasible })
}

/// Evaluation of the sufficient condition for one subset `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCheck {
    pub subset: Vec<usize>,
    pub invertible: bool,
    /// Solution of the restricted system, indexed like `subset`.
    pub a: Option<Vec<f64>>,
    /// `sum_{i in S} a_i sum_{j not in S} b_ij`.
    pub load: Option<f64>,
    /// `sum_{j not in S} nu_j`.
    pub budget: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    /// The sufficient condition fails; `witness` is the first failing subset
    /// (the full index set when only the steady rates are infeasible).
    PartialRisk { witness: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rates: Option<Vec<f64>>,
    pub feasible: bool,
    pub subset_checks: Vec<SubsetCheck>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }

    pub fn witness(&self) -> Option<&[usize]> {
        match &self.verdict {
            Verdict::PartialRisk { witness } => Some(witness),
            Verdict::Stable => None,
        }
    }

    pub fn subset(&self, members: &[usize]) -> Option<&SubsetCheck> {
        self.subset_checks.iter().find(|c| c.subset == members)
    }

    /// Plain-text table, one row per subset. Neurons are labelled from 1.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let fmt_vec = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match &self.rates {
            Some(r) => {
                let _ = writeln!(out, "steady rates: [{}] (feasible: {})", fmt_vec(r), self.feasible);
            }
            None => {
                let _ = writeln!(out, "steady rates: singular mean matrix");
            }
        }
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:<28} {:>12} {:>12} {:>6}",
            "subset", "invertible", "a", "load", "budget", "pass"
        );
        for c in &self.subset_checks {
            let label = format!(
                "{{{}}}",
                c.subset
                    .iter()
                    .map(|i| (i + 1).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            let a = c.a.as_deref().map(fmt_vec).unwrap_or_else(|| "-".into());
            let load = c.load.map(|l| format!("{l:.6}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<16} {:>10} {:<28} {:>12} {:>12.6} {:>6}",
                label, c.invertible, a, load, c.budget, c.pass
            );
        }
        match &self.verdict {
            Verdict::Stable => {
                let _ = writeln!(out, "verdict: stable");
            }
            Verdict::PartialRisk { witness } => {
                let w: Vec<String> = witness.iter().map(|i| (i + 1).to_string()).collect();
                let _ = writeln!(out, "verdict: partial-risk, witness {{{}}}", w.join(","));
            }
        }
        out
    }
}

fn check_subset(b: &Matrix, nu: &[f64], subset: Vec<usize>) -> SubsetCheck {
    let n = b.n();
    let outside: Vec<usize> = (0..n).filter(|j| !subset.contains(j)).collect();
    let budget: f64 = outside.iter().map(|&j| nu[j]).sum();
    let restricted = b.restrict(&subset);
    let rhs: Vec<f64> = subset.iter().map(|&j| nu[j]).collect();
    match solve_left(&restricted, &rhs) {
        Ok(a) => {
            let load: f64 = subset
                .iter()
                .zip(&a)
                .map(|(&i, ai)| ai * outside.iter().map(|&j| b[(i, j)]).sum::<f64>())
                .sum();
            let pass = a.iter().all(|&v| v > 0.0) && load < budget;
            SubsetCheck {
                subset,
                invertible: true,
                a: Some(a),
                load: Some(load),
                budget,
                pass,
            }
        }
        Err(_) => SubsetCheck {
            subset,
            invertible: false,
            a: None,
            load: None,
            budget,
            pass: false,
        },
    }
}

/// Evaluates every nonempty proper subset (ordered by size, then
/// lexicographically) and classifies the network.
pub fn check_partial_stability(b: &Matrix, nu: &[f64]) -> Result<StabilityReport, StabilityError> {
    let n = b.n();
    if n > MAX_SUBSET_NEURONS {
        return Err(StabilityError::Size {
            n,
            max: MAX_SUBSET_NEURONS,
        });
    }
    let (rates, feasible) = match steady_rates(b, nu) {
        Ok(s) => (Some(s.rates), s.feasible),
        Err(StabilityError::Rank) => (None, false),
        Err(e) => return Err(e),
    };

    let mut masks: Vec<u32> = (1..(1u32 << n).saturating_sub(1)).collect();
    masks.sort_by_key(|m| {
        let members: Vec<usize> = (0..n).filter(|i| m & (1 << i) != 0).collect();
        (members.len(), members)
    });
    let subset_checks: Vec<SubsetCheck> = masks
        .into_iter()
        .map(|m| check_subset(b, nu, (0..n).filter(|i| m & (1 << i) != 0).collect()))
        .collect();

    let verdict = match subset_checks.iter().find(|c| !c.pass) {
        Some(c) => Verdict::PartialRisk {
            witness: c.subset.clone(),
        },
        None if !feasible => Verdict::PartialRisk {
            witness: (0..n).collect(),
        },
        None => Verdict::Stable,
    };
    Ok(StabilityReport {
        rates,
        feasible,
        subset_checks,
        verdict,
    })
}
