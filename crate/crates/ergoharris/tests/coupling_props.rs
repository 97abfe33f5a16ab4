use ergoharris::coupling::{
    build_contracting_coupling_kernel, empirical_marginal, hit_then_bind_alpha,
    hit_then_bind_samples, sample_coupled_paths, uniqueness_cross_check, Verdict,
};
use ergoharris::markov::{make_finite_kernel, DistanceLike, FiniteKernel, Measure};
use ergoharris::stats::chi_square_gof;
use proptest::prelude::*;

/// Kernels mixed with the uniform law, so one step contracts the scaled
/// discrete distance by at most `1 - theta`.
fn mixed_kernel() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
    (2usize..7, 0.3..0.9f64).prop_flat_map(|(n, theta)| {
        prop::collection::vec(prop::collection::vec(0.01..1.0f64, n), n).prop_map(move |rows| {
            let rows = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter()
                        .map(|x| theta / n as f64 + (1.0 - theta) * x / s)
                        .collect()
                })
                .collect();
            (rows, theta)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_kernel_marginals_are_exact((rows, theta) in mixed_kernel()) {
        let k = make_finite_kernel(&rows).unwrap();
        let d = DistanceLike::from_fn(k.n(), |x, y| if x == y { 0.0 } else { 0.5 }).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 1.0 - theta / 2.0).unwrap();
        prop_assert!(ck.marginal_error(&k) <= 1e-12);
    }

    #[test]
    fn expected_distance_contracts((rows, theta) in mixed_kernel()) {
        let k = make_finite_kernel(&rows).unwrap();
        let d = DistanceLike::from_fn(k.n(), |x, y| if x == y { 0.0 } else { 0.5 }).unwrap();
        let alpha = 1.0 - theta / 2.0;
        let ck = build_contracting_coupling_kernel(&k, &d, alpha).unwrap();
        for x in 0..k.n() {
            for y in 0..k.n() {
                prop_assert!(ck.expected_distance(&d, x, y) <= alpha * d.get(x, y) + 1e-12);
            }
        }
    }

    #[test]
    fn coupling_is_absorbed_on_the_diagonal((rows, theta) in mixed_kernel(), seed in 0u64..1000) {
        let k = make_finite_kernel(&rows).unwrap();
        let d = DistanceLike::from_fn(k.n(), |x, y| if x == y { 0.0 } else { 0.5 }).unwrap();
        let ck = build_contracting_coupling_kernel(&k, &d, 1.0 - theta / 2.0).unwrap();
        for p in sample_coupled_paths(&ck, &d, 0, 1, 30, 20, seed) {
            if let Some(t) = p.distances.iter().position(|&x| x == 0.0) {
                prop_assert!(p.distances[t..].iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn coupled_marginals_follow_the_kernel() {
    let k = FiniteKernel::reflected_walk(6, 0.6).unwrap();
    let d = DistanceLike::trivial(6);
    let ck = build_contracting_coupling_kernel(&k, &d, 0.5).unwrap();
    let paths = sample_coupled_paths(&ck, &d, 0, 5, 8, 20_000, 3);
    let p8 = k.power(8);
    for (start, left) in [(0, true), (5, false)] {
        let counts = empirical_marginal(&paths, 8, 6, left);
        let c = chi_square_gof(&counts, p8.row(start));
        assert!(
            c.p_value > 1e-4,
            "chi-square p = {} for start {start}",
            c.p_value
        );
    }
}

#[test]
fn hit_then_bind_failures_have_geometric_tail() {
    let n = 10;
    let k = FiniteKernel::reflected_walk(n, 0.6).unwrap();
    let d = DistanceLike::trivial(n);
    let ck = build_contracting_coupling_kernel(&k, &d, 0.5).unwrap();
    let b: Vec<usize> = (0..n).collect();
    let u = [0, 1];
    let t_u = 10;
    let alpha = hit_then_bind_alpha(&k, &b, &u, t_u);
    let m = 4000;
    let runs = hit_then_bind_samples(
        &k,
        &ck,
        &d,
        &b,
        &u,
        n - 1,
        &Measure::dirac(n, n - 2),
        t_u,
        2000,
        m,
        9,
    )
    .unwrap();
    for j in 1..6 {
        let p = runs.iter().filter(|r| r.failed_trials >= j).count() as f64 / m as f64;
        // each trial moves two independent copies, so it succeeds with probability >= alpha^2
        let bound = (1.0 - alpha * alpha).powi(j as i32);
        let se = (bound * (1.0 - bound) / m as f64).sqrt();
        assert!(
            p <= bound + 3.0 * se,
            "P(failures >= {j}) = {p} above {bound}"
        );
    }
}

#[test]
fn two_blocks_never_couple_across() {
    let a = make_finite_kernel(&[vec![0.5, 0.5], vec![0.3, 0.7]]).unwrap();
    let k = FiniteKernel::block_diagonal(&[a.clone(), a]);
    let d = DistanceLike::trivial(4);
    let ck = build_contracting_coupling_kernel(&k, &d, 0.5).unwrap();
    let r = uniqueness_cross_check(&k, &ck, &d, 1, 2, 100, 200, 5).unwrap();
    assert_eq!(r.invariant_count, 2);
    assert_eq!(r.asymptotic.estimate, 0.0);
    assert_eq!(r.verdict, Verdict::Consistent);
}
