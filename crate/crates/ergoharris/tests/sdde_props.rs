use ergoharris::rng::stream;
use ergoharris::sdde::{
    brownian_increments, girsanov_shift, integrate_pair_binding_with_noise, integrate_with_noise,
    SddeSystem, Segment,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shared_noise_reproduces_paths_bit_for_bit(x0 in -2.0..2.0f64, seed in 0u64..10_000) {
        let sys = SddeSystem::motivating(1.0, 0.5, 1.0).unwrap();
        let eta = Segment::constant(0.5, 0.05, &[x0]).unwrap();
        let dw = brownian_increments(&mut stream(seed, 0), 200, 1, 0.01, 1);
        let a = integrate_with_noise(&sys, &eta, 0.01, &dw).unwrap();
        let b = integrate_with_noise(&sys, &eta, 0.01, &dw).unwrap();
        for n in 0..=200 {
            prop_assert_eq!(a.point(n)[0].to_bits(), b.point(n)[0].to_bits());
        }
    }

    #[test]
    fn binding_from_equal_starts_never_separates(x0 in -2.0..2.0f64, lambda in 0.0..20.0f64, seed in 0u64..10_000) {
        let sys = SddeSystem::cubic(1.0, 0.5).unwrap();
        let eta = Segment::constant(0.5, 0.05, &[x0]).unwrap();
        let dw = brownian_increments(&mut stream(seed, 0), 100, 1, 0.01, 1);
        let (x, y) = integrate_pair_binding_with_noise(&sys, lambda, &eta, &eta, 0.01, &dw).unwrap();
        for n in 0..=100 {
            prop_assert_eq!(x.point(n)[0], y.point(n)[0]);
        }
        let shift = girsanov_shift(&sys, lambda, &x, &y).unwrap();
        prop_assert_eq!(shift.total(), 0.0);
    }

    #[test]
    fn linear_binding_gap_is_deterministic(gap in 0.1..3.0f64, lambda in 0.0..20.0f64, seed in 0u64..10_000) {
        // additive noise cancels in the difference
        let sys = SddeSystem::linear(1.0, 0.5);
        let dt = 1e-3;
        let (x0, y0) = (Segment::constant(0.0, dt, &[gap]).unwrap(), Segment::constant(0.0, dt, &[0.0]).unwrap());
        let dw = brownian_increments(&mut stream(seed, 0), 500, 1, dt, 1);
        let (x, y) = integrate_pair_binding_with_noise(&sys, lambda, &x0, &y0, dt, &dw).unwrap();
        let z = x.terminal()[0] - y.terminal()[0];
        let exact = gap * (-(1.0 + lambda) * 0.5f64).exp();
        prop_assert!((z - exact).abs() <= 1e-2 * exact.max(1e-6));
    }
}
