use pifnet::linalg::Matrix;
use pifnet::stability::{check_partial_stability, closed_form_rates, steady_rates};
use proptest::prelude::*;

fn preset() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=8).prop_flat_map(|n| {
        (
            proptest::collection::vec((0.05f64..5.0, 1.0001f64..=10.0), n),
            0.1f64..10.0,
        )
            .prop_map(|(wf, nu)| {
                let w: Vec<f64> = wf.iter().map(|p| p.0).collect();
                let h: Vec<f64> = wf.iter().map(|p| p.0 * p.1).collect();
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

proptest! {
    #[test]
    fn closed_form_matches_the_linear_solve((h, w, nu) in preset()) {
        let closed = closed_form_rates(&h, &w, nu).unwrap();
        let solved = steady_rates(&means(&h, &w), &vec![nu; h.len()]).unwrap();
        prop_assert!(solved.feasible);
        for (a, b) in closed.iter().zip(&solved.rates) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn steady_rates_have_small_residual(
        n in 1usize..8,
        entries in proptest::collection::vec(0.01f64..10.0, 64),
        nu in proptest::collection::vec(0.1f64..5.0, 8),
    ) {
        let mut b = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = entries[i * 8 + j] + if i == j { 10.0 } else { 0.0 };
            }
        }
        let x = steady_rates(&b, &nu[..n]).unwrap().rates;
        let xb = b.left_mul(&x);
        let scale = nu[..n].iter().fold(0.0f64, |m, v| m.max(*v));
        for j in 0..n {
            prop_assert!((xb[j] - nu[j]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn inhibition_load_stays_below_one((h, w, nu) in preset()) {
        let x = closed_form_rates(&h, &w, nu).unwrap();
        let load: f64 = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / nu;
        prop_assert!(load < 1.0);
    }

    #[test]
    fn symmetric_presets_are_stable((h, w, nu) in preset()) {
        prop_assume!(h.len() <= 6);
        let report = check_partial_stability(&means(&h, &w), &vec![nu; h.len()]).unwrap();
        prop_assert!(report.is_stable());
    }
}

#[test]
fn report_serializes_with_verdict_and_witness() {
    let b = Matrix::from_rows(&[
        vec![8.0, 2.0, 6.0],
        vec![2.0, 8.0, 6.0],
        vec![6.0, 6.0, 8.0],
    ])
    .unwrap();
    let report = check_partial_stability(&b, &[1.0; 3]).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["verdict"], "partial-risk");
    assert_eq!(json["witness"], serde_json::json!([0, 1]));
    assert_eq!(json["feasible"], false);
}

#[test]
fn reduced_cross_inhibition_passes_every_subset() {
    let b = Matrix::from_rows(&[
        vec![8.0, 2.0, 2.0],
        vec![2.0, 8.0, 2.0],
        vec![6.0, 6.0, 8.0],
    ])
    .unwrap();
    let report = check_partial_stability(&b, &[1.0; 3]).unwrap();
    let s = report.subset(&[0, 1]).unwrap();
    assert!((s.load.unwrap() - 0.4).abs() < 1e-14);
    assert!(report.is_stable());
}
