use proptest::prelude::*;

use contrakit::measures::mu_limit_estimate;
use contrakit::{BaseNorm, Matrix, MeasureSpec};

fn matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |d| Matrix::from_row_slice(n, &d).unwrap())
}

fn pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..=6).prop_flat_map(|n| (matrix(n), matrix(n)))
}

/// Diagonally dominant, hence well conditioned, weights.
fn weight(n: usize) -> impl Strategy<Value = Matrix> {
    (prop::collection::vec(-0.2f64..0.2, n * n), prop::collection::vec(0.5f64..2.0, n)).prop_map(move |(off, diag)| {
        let mut d = off;
        for i in 0..n {
            d[i * n + i] = diag[i] * n as f64;
        }
        Matrix::from_row_slice(n, &d).unwrap()
    })
}

fn norms() -> [MeasureSpec; 3] {
    [MeasureSpec::l1(), MeasureSpec::l2(), MeasureSpec::linf()]
}

proptest! {
    #[test]
    fn subadditive_and_homogeneous((a, b) in pair(), c in 0.0f64..10.0) {
        for spec in norms() {
            let mu = |m: &Matrix| spec.mu(m).unwrap();
            prop_assert!(mu(&a.add(&b).unwrap()) <= mu(&a) + mu(&b) + 1e-9);
            prop_assert!((mu(&a.scale(c)) - c * mu(&a)).abs() <= 1e-9 * (1.0 + c * mu(&a).abs()));
        }
    }

    #[test]
    fn bounded_by_the_induced_norm((a, _) in pair(), shift in -5.0f64..5.0) {
        let n = a.dim();
        for spec in norms() {
            let mu = spec.mu(&a).unwrap();
            let norm = spec.induced_norm(&a).unwrap();
            prop_assert!(mu <= norm + 1e-9 && -norm <= mu + 1e-9);
            // μ(A + cI) = μ(A) + c.
            let shifted = spec.mu(&a.add(&Matrix::identity(n).scale(shift)).unwrap()).unwrap();
            prop_assert!((shifted - mu - shift).abs() <= 1e-9 * (1.0 + mu.abs() + shift.abs()));
            // Every eigenvalue's real part lies below the measure.
            prop_assert!(a.spectral_abscissa().unwrap() <= mu + 1e-7 * (1.0 + norm));
        }
    }

    #[test]
    fn limit_quotient_decreases_to_the_measure((a, _) in pair()) {
        for spec in norms() {
            let mu = spec.mu(&a).unwrap();
            let coarse = mu_limit_estimate(&a, &spec, 1e-2).unwrap();
            let fine = mu_limit_estimate(&a, &spec, 1e-6).unwrap();
            prop_assert!(coarse >= fine - 1e-7);
            prop_assert!(fine >= mu - 1e-7);
            let norm = spec.induced_norm(&a).unwrap();
            prop_assert!(fine - mu <= 1e-6 * (1.0 + norm * norm));
        }
    }

    #[test]
    fn weighted_measure_is_a_similarity((a, p) in (1usize..=5).prop_flat_map(|n| (matrix(n), weight(n)))) {
        let pinv = p.inverse().unwrap();
        for base in [BaseNorm::L1, BaseNorm::L2, BaseNorm::Linf] {
            let weighted = MeasureSpec::weighted(base, p.clone()).unwrap();
            // μ_P(P⁻¹ B P) = μ(B).
            let b = pinv.mul(&a).unwrap().mul(&p).unwrap();
            let lhs = weighted.mu(&b).unwrap();
            let rhs = MeasureSpec::plain(base).mu(&a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
        }
    }
}

#[test]
fn ill_conditioned_weights_are_rejected() {
    let p = Matrix::from_diag(&[1.0, 1e-13]);
    assert!(MeasureSpec::weighted(BaseNorm::L1, p).is_err());
}
