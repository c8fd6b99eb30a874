use pifnet::fluid::{
    fluid_rates, fluid_slopes, integrate_fluid, symmetric_fluid_slope, FluidStatus,
};
use pifnet::levy::{LawFamily, LevySpec};
use pifnet::linalg::Matrix;
use pifnet::network::{NetworkConfig, SymmetricParams};
use pifnet::stability::check_partial_stability;
use proptest::prelude::*;

fn preset() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..7).prop_flat_map(|n| {
        (
            proptest::collection::vec((0.1f64..3.0, 1.05f64..10.0), n),
            0.2f64..5.0,
        )
            .prop_map(|(hw, nu)| {
                let w: Vec<f64> = hw.iter().map(|p| p.0).collect();
                let h: Vec<f64> = hw.iter().map(|p| p.0 * p.1).collect();
                (h, w, nu)
            })
    })
}

fn means(h: &[f64], w: &[f64]) -> Matrix {
    let n = h.len();
    let mut b = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = if i == j { h[i] } else { w[i] };
        }
    }
    b
}

fn direction(raw: &[f64], n: usize) -> Vec<f64> {
    let v: Vec<f64> = raw[..n].to_vec();
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

proptest! {
    #[test]
    fn symmetric_fluid_empties_within_the_bound(
        (h, w, nu) in preset(),
        raw in proptest::collection::vec(0.0f64..1.0, 7),
        shrink in 0.0f64..=1.0,
    ) {
        let n = h.len();
        prop_assume!(raw[..n].iter().sum::<f64>() > 1e-6);
        let phi0: Vec<f64> = direction(&raw, n).iter().map(|v| v * shrink).collect();
        let b = means(&h, &w);
        let traj = integrate_fluid(&phi0, &b, &vec![nu; n], f64::INFINITY).unwrap();
        let bound = SymmetricParams { h: h.clone(), w: w.clone(), nu }.emptying_bound();
        match traj.status {
            FluidStatus::EmptiedAt { time } => prop_assert!(time <= bound * (1.0 + 1e-12), "{time} > {bound}"),
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn symmetric_slope_shrinks_as_the_active_set_grows((h, w, nu) in preset()) {
        let p = SymmetricParams { h: h.clone(), w: w.clone(), nu };
        let b = means(&h, &w);
        let nus = vec![nu; h.len()];
        let mut previous = f64::NEG_INFINITY;
        for k in 0..h.len() {
            let active: Vec<usize> = (0..k).collect();
            let slope = symmetric_fluid_slope(&p, &active);
            prop_assert!(slope < 0.0);
            prop_assert!(slope.abs() <= previous.abs() || previous == f64::NEG_INFINITY);
            // closed form agrees with the general solve for every inactive coordinate
            let r = fluid_rates(&active, &b, &nus).unwrap();
            let s = fluid_slopes(&active, &r.rates, &b, &nus);
            for i in k..h.len() {
                prop_assert!((s[i] - slope).abs() <= 1e-9 * nu);
            }
            previous = slope;
        }
    }

    #[test]
    fn segments_are_consistent_and_continuous(
        (h, w, nu) in preset(),
        raw in proptest::collection::vec(0.0f64..1.0, 7),
    ) {
        let n = h.len();
        prop_assume!(raw[..n].iter().sum::<f64>() > 1e-6);
        let phi0 = direction(&raw, n);
        let b = means(&h, &w);
        let nus = vec![nu; n];
        let traj = integrate_fluid(&phi0, &b, &nus, f64::INFINITY).unwrap();
        prop_assert_eq!(traj.breakpoints.len(), traj.segments.len());
        for (k, seg) in traj.segments.iter().enumerate() {
            let r = fluid_rates(&seg.active, &b, &nus).unwrap();
            let s = fluid_slopes(&seg.active, &r.rates, &b, &nus);
            for &i in &seg.active {
                prop_assert_eq!(s[i], 0.0);
                prop_assert_eq!(seg.phi_start[i], 0.0);
            }
            for i in 0..n {
                if !seg.active.contains(&i) {
                    prop_assert_eq!(seg.rates[i], 0.0);
                }
                prop_assert!(seg.phi_start[i] >= 0.0);
            }
            if k > 0 {
                let prev = &traj.segments[k - 1];
                prop_assert!(prev.active.iter().all(|i| seg.active.contains(i)));
                let dt = seg.start - prev.start;
                prop_assert!(dt > 0.0);
                for i in 0..n {
                    let end = (prev.phi_start[i] + prev.slope[i] * dt).max(0.0);
                    prop_assert!((end - seg.phi_start[i]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn slopes_respect_the_lipschitz_bound(
        (h, w, nu) in preset(),
        raw in proptest::collection::vec(0.0f64..1.0, 7),
    ) {
        let n = h.len();
        prop_assume!(raw[..n].iter().sum::<f64>() > 1e-6);
        let b = means(&h, &w);
        let traj = integrate_fluid(&direction(&raw, n), &b, &vec![nu; n], f64::INFINITY).unwrap();
        let max_b = b.max_abs();
        let gap = (0..n)
            .map(|i| {
                let max_in = (0..n).filter(|&j| j != i).map(|j| b[(j, i)]).fold(0.0, f64::max);
                b[(i, i)] - max_in
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(traj.max_abs_slope() <= nu * (1.0 + 1e-12));
        // the column-gap bound only makes sense when every H_i exceeds all incoming w_j
        if gap > 0.0 {
            let bound = nu * (1.0 + max_b / gap);
            prop_assert!(traj.max_abs_slope() <= bound + 1e-12);
        }
    }

    #[test]
    fn stable_networks_always_empty(
        n in 1usize..5,
        entries in proptest::collection::vec(0.1f64..1.0, 16),
        diag in proptest::collection::vec(1.0f64..4.0, 4),
        raw in proptest::collection::vec(0.0f64..1.0, 4),
    ) {
        prop_assume!(raw[..n].iter().sum::<f64>() > 1e-6);
        let mut b = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = if i == j { diag[i] } else { entries[i * 4 + j] };
            }
        }
        let nu = vec![1.0; n];
        let report = check_partial_stability(&b, &nu).unwrap();
        prop_assume!(report.is_stable());
        let traj = integrate_fluid(&direction(&raw, n), &b, &nu, f64::INFINITY).unwrap();
        prop_assert!(matches!(traj.status, FluidStatus::EmptiedAt { .. }), "{:?}", traj.status);
    }
}

#[test]
fn appendix_trajectory_serializes_with_its_status() {
    let b = Matrix::from_rows(&[
        vec![8.0, 2.0, 6.0],
        vec![2.0, 8.0, 6.0],
        vec![6.0, 6.0, 8.0],
    ])
    .unwrap();
    let traj = integrate_fluid(&[0.0, 0.0, 1.0], &b, &[1.0; 3], 50.0).unwrap();
    let json = serde_json::to_value(&traj).unwrap();
    assert_eq!(json["status"], "diverges");
    assert_eq!(json["coordinate"], 2);
    let back: pifnet::fluid::FluidTrajectory = serde_json::from_value(json).unwrap();
    assert_eq!(back, traj);
}

#[test]
fn network_preset_agrees_with_hand_built_matrix() {
    let cfg = NetworkConfig::symmetric(
        &[2.0, 3.0],
        &[1.0, 0.5],
        1.0,
        &LevySpec::brownian(1.0, 0.0),
        LawFamily::Constant,
    )
    .unwrap();
    assert_eq!(cfg.mean_matrix(), means(&[2.0, 3.0], &[1.0, 0.5]));
}
