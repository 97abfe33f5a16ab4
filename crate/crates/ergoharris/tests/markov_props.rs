use ergoharris::markov::transport::solve_transport;
use ergoharris::markov::{
    lift_distance, make_finite_kernel, total_variation, DistanceLike, Measure,
};
use proptest::prelude::*;

fn measure(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], n).prop_filter_map(
        "positive mass",
        |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-3).then(|| w.iter().map(|x| x / s).collect())
        },
    )
}

fn pair_with_costs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            measure(n),
            measure(n),
            prop::collection::vec(0.0..5.0f64, n * n),
        )
    })
}

fn kernel() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..8).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0.0..1.0f64, n), n).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    r[i] += 1e-3;
                    let s: f64 = r.iter().sum();
                    r.iter().map(|x| x / s).collect()
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn transport_plan_has_exact_marginals((mu, nu, c) in pair_with_costs()) {
        let n = mu.len();
        let t = solve_transport(&mu, &nu, |i, j| c[i * n + j]).unwrap();
        for i in 0..n {
            let row: f64 = t.plan[i * n..(i + 1) * n].iter().sum();
            let col: f64 = (0..n).map(|r| t.plan[r * n + i]).sum();
            prop_assert!((row - mu[i]).abs() <= 1e-12);
            prop_assert!((col - nu[i]).abs() <= 1e-12);
        }
        prop_assert!(t.plan.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn transport_duals_certify_optimality((mu, nu, c) in pair_with_costs()) {
        let n = mu.len();
        let t = solve_transport(&mu, &nu, |i, j| c[i * n + j]).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(t.u[i] + t.v[j] <= c[i * n + j] + 1e-9, "dual slack at ({}, {})", i, j);
            }
        }
        let dual: f64 = (0..n).map(|i| mu[i] * t.u[i] + nu[i] * t.v[i]).sum();
        prop_assert!((t.value - dual).abs() <= 1e-9);
    }

    #[test]
    fn trivial_lift_is_total_variation((mu, nu, _c) in pair_with_costs()) {
        let n = mu.len();
        let (a, b) = (Measure::new(mu.clone()).unwrap(), Measure::new(nu.clone()).unwrap());
        let (lifted, _) = lift_distance(&DistanceLike::trivial(n), &a, &b).unwrap();
        let half_l1: f64 = 0.5 * mu.iter().zip(&nu).map(|(x, y)| (x - y).abs()).sum::<f64>();
        prop_assert!((lifted - half_l1).abs() < 1e-10);
        prop_assert!((total_variation(&a, &b).unwrap() - half_l1).abs() < 1e-12);
    }

    #[test]
    fn kernel_powers_stay_stochastic(rows in kernel(), t in 0usize..40) {
        let k = make_finite_kernel(&rows).unwrap();
        let p = k.power(t);
        for i in 0..k.n() {
            let s: f64 = p.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.row(i).iter().all(|&x| x >= 0.0));
        }
    }
}

#[test]
fn massless_rows_and_columns_keep_feasible_duals() {
    let mu = [0.5, 0.0, 0.5, 0.0];
    let nu = [0.0, 0.25, 0.0, 0.75];
    let cost = |i: usize, j: usize| ((i * 7 + j * 3) % 5) as f64;
    let t = solve_transport(&mu, &nu, cost).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!(t.u[i] + t.v[j] <= cost(i, j) + 1e-12);
        }
    }
}
