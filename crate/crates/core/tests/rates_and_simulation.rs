use proptest::prelude::*;

use contrakit::models::{erf_g, erf_system, linear_decay_system, shifted_system};
use contrakit::simulate::{integrate, IntegratorConfig};
use contrakit::verify::{transform_rates, RateTransform};

fn example1_rate(tau: f64) -> f64 {
    (1.0 - (-tau * tau).exp()) / 2.0
}

proptest! {
    #[test]
    fn delayed_form_keeps_the_overshoot(tau in 0.01f64..10.0, eps in 0.01f64..10.0, ell in 0.001f64..10.0) {
        let r = transform_rates(RateTransform::SostToDelayed { tau, eps, ell }).unwrap();
        prop_assert!(r.ell <= ell && r.ell > 0.0);
        prop_assert!((1.0 + eps / 2.0) * (tau * r.ell).exp() <= (1.0 + eps) * (1.0 + 1e-12));
    }

    #[test]
    fn bridge_rate_is_monotone(eps in 0.01f64..10.0, tau0 in 0.001f64..2.0, ell1 in 0.001f64..10.0, k in 1.0f64..4.0) {
        let base = transform_rates(RateTransform::SweBridge { eps, tau0, ell1 }).unwrap();
        let longer = transform_rates(RateTransform::SweBridge { eps, tau0: tau0 * k, ell1 }).unwrap();
        let faster = transform_rates(RateTransform::SweBridge { eps, tau0, ell1: ell1 * k }).unwrap();
        prop_assert!(longer.ell <= base.ell && base.ell <= faster.ell);
        prop_assert_eq!(base.tau, 0.0);
    }

    #[test]
    fn tied_form_round_trip(a in 0.01f64..5.0, b in 0.01f64..5.0, ell in 0.01f64..5.0) {
        let shift = RateTransform::tied_shift(a, b);
        prop_assert!(shift <= a && shift <= b);
        let r = transform_rates(RateTransform::TiedToSost { tau_hat: a, eps_hat: b, ell }).unwrap();
        prop_assert_eq!((r.tau, r.eps, r.ell), (a, b, ell));
    }

    #[test]
    fn example1_rate_grows_with_the_shift(t in 0.0f64..5.0, dt in 0.0f64..1.0) {
        prop_assert!(example1_rate(t) <= example1_rate(t + dt));
        prop_assert!(example1_rate(t) < 0.5);
    }

    #[test]
    fn erf_flow_matches_closed_form(t1 in 0.0f64..10.0, a in -0.99f64..0.99, len in 0.0f64..10.0) {
        let m = erf_system();
        let tr = integrate(&m, t1, &[a], t1 + len, &IntegratorConfig::with_tol(1e-11)).unwrap();
        let exact = (erf_g(t1 + len) - erf_g(t1)).exp() * a;
        prop_assert!((tr.final_state()[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn scalar_flows_preserve_order(t1 in 0.0f64..5.0, a in -0.9f64..0.9, gap in 1e-3f64..0.5) {
        let cfg = IntegratorConfig::with_tol(1e-10);
        for m in [linear_decay_system(), shifted_system()] {
            let b = (a + gap).min(0.99);
            let x = integrate(&m, t1, &[a], t1 + 3.0, &cfg).unwrap();
            let y = integrate(&m, t1, &[b], t1 + 3.0, &cfg).unwrap();
            prop_assert!(x.final_state()[0] < y.final_state()[0]);
        }
    }
}

#[test]
fn invalid_transforms_are_rejected() {
    assert!(transform_rates(RateTransform::SostToDelayed { tau: 0.0, eps: 1.0, ell: 1.0 }).is_err());
    assert!(transform_rates(RateTransform::TiedToSost { tau_hat: 1.0, eps_hat: f64::NAN, ell: 1.0 }).is_err());
}
