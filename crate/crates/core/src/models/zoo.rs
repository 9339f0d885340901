use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SystemModel;
use crate::domain::{DomainSpec, NestedFamily};
use crate::matrix::Matrix;

fn scalar(v: f64) -> Matrix {
    Matrix::from_diag(&[v])
}

/// `g(t) = (√π/2)·erf(t) − t`, the antiderivative of `exp(−t²) − 1` with
/// `g(0) = 0`.
pub fn erf_g(t: f64) -> f64 {
    0.5 * PI.sqrt() * libm::erf(t) - t
}

/// `ẋ = (exp(−t²) − 1) x` on `(−1, 1)`. Not contractive in any norm since
/// `J(0) = 0`.
pub fn erf_system() -> SystemModel {
    let domain = DomainSpec::open_box(vec![-1.0], vec![1.0]).expect("static domain");
    SystemModel::new(
        "erf",
        domain,
        |t, x, out| out[0] = ((-t * t).exp() - 1.0) * x[0],
        |t, _| scalar((-t * t).exp() - 1.0),
    )
    .with_closed_form(|t, t1, a| vec![(erf_g(t) - erf_g(t1)).exp() * a[0]])
    .with_lipschitz_bound(1.0)
}

/// `ẋ = −x / (t + 1)` on `[−1, 1]`: measure negative everywhere, yet the
/// decay is only algebraic.
pub fn counterexample_system() -> SystemModel {
    let domain = DomainSpec::closed_box(vec![-1.0], vec![1.0]).expect("static domain");
    SystemModel::new(
        "counterexample",
        domain.with_family(NestedFamily::Shrink),
        |t, x, out| out[0] = -x[0] / (t + 1.0),
        |t, _| scalar(-1.0 / (t + 1.0)),
    )
    .with_closed_form(|t, t1, a| vec![a[0] * (t1 + 1.0) / (t + 1.0)])
    .with_lipschitz_bound(1.0)
}

/// Frozen on `[0, 1]`, then `ẋ = −2x`, on `(−1, 1)`.
pub fn shifted_system() -> SystemModel {
    let domain = DomainSpec::open_box(vec![-1.0], vec![1.0]).expect("static domain");
    SystemModel::new(
        "shifted",
        domain,
        |t, x, out| out[0] = if t <= 1.0 { 0.0 } else { -2.0 * x[0] },
        |t, _| scalar(if t <= 1.0 { 0.0 } else { -2.0 }),
    )
    .with_closed_form(|t, t1, a| {
        if t <= 1.0 {
            vec![a[0]]
        } else {
            vec![(-2.0 * (t - t1.max(1.0))).exp() * a[0]]
        }
    })
    .with_switching_times(vec![1.0])
    .with_lipschitz_bound(2.0)
}

/// `ẋ = −x` on `[−1, 1]`.
pub fn linear_decay_system() -> SystemModel {
    let domain = DomainSpec::closed_box(vec![-1.0], vec![1.0]).expect("static domain");
    SystemModel::new("linear_decay", domain.with_family(NestedFamily::Shrink), |_, x, out| out[0] = -x[0], |_, _| {
        scalar(-1.0)
    })
    .with_closed_form(|t, t1, a| vec![(-(t - t1)).exp() * a[0]])
    .with_lipschitz_bound(1.0)
    .time_invariant(true)
}

/// `ẋ = x(1 − x)` on `[0, 1]`; both facets are equilibria.
pub fn logistic_system() -> SystemModel {
    let domain = DomainSpec::closed_box(vec![0.0], vec![1.0]).expect("static domain");
    SystemModel::new("logistic", domain, |_, x, out| out[0] = x[0] * (1.0 - x[0]), |_, x| scalar(1.0 - 2.0 * x[0]))
        .with_closed_form(|t, t1, a| {
            let e = (t - t1).exp();
            vec![a[0] * e / (1.0 - a[0] + a[0] * e)]
        })
        .with_lipschitz_bound(1.0)
        .time_invariant(true)
}

/// `ẋ = 1 − x` on `[0, 2]`.
pub fn relaxation_system() -> SystemModel {
    let domain = DomainSpec::closed_box(vec![0.0], vec![2.0]).expect("static domain");
    SystemModel::new("relaxation", domain, |_, x, out| out[0] = 1.0 - x[0], |_, _| scalar(-1.0))
        .with_closed_form(|t, t1, a| vec![1.0 + (a[0] - 1.0) * (-(t - t1)).exp()])
        .with_lipschitz_bound(1.0)
        .time_invariant(true)
}

/// Input `u(t) = offset + amplitude·sin(ω t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineForcing {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
}

impl SineForcing {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn value(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (self.omega * t).sin()
    }

    /// The periodic solution of `ẋ = −x + u(t)`.
    pub fn periodic_orbit(&self, t: f64) -> f64 {
        let w = self.omega;
        self.offset + self.amplitude * ((w * t).sin() - w * (w * t).cos()) / (1.0 + w * w)
    }
}

/// `ẋ = −x + u(t)` on `[−2, 2]` with sinusoidal `u`. With zero amplitude the
/// period is still declared (degenerate forcing).
pub fn forced_linear_system(forcing: SineForcing) -> crate::error::Result<SystemModel> {
    if !(forcing.omega > 0.0 && forcing.omega.is_finite()) {
        return Err(crate::error::Error::Parameter(format!("omega must be positive, got {}", forcing.omega)));
    }
    let bound = 1.0 + forcing.offset.abs() + forcing.amplitude.abs();
    let domain = DomainSpec::closed_box(vec![-bound], vec![bound])?;
    SystemModel::new("forced_linear", domain, move |t, x, out| out[0] = -x[0] + forcing.value(t), |_, _| scalar(-1.0))
        .with_closed_form(move |t, t1, a| {
            let p = |s| forcing.periodic_orbit(s);
            vec![p(t) + (a[0] - p(t1)) * (-(t - t1)).exp()]
        })
        .with_lipschitz_bound(1.0)
        .time_invariant(forcing.amplitude == 0.0)
        .with_period(forcing.period())
}

/// The erf system lifted to an autonomous 2-state system with a clock
/// coordinate: `ẋ₁ = (exp(−x₂²) − 1) x₁`, `ẋ₂ = 1`, `x₂(t₁) = t₁`.
pub fn augmented_erf_system() -> SystemModel {
    let domain = crate::domain::DomainSpec::open_box(vec![-1.0, 0.0], vec![1.0, 10.0])
        .expect("static domain")
        .with_clock_axis(1)
        .expect("axis in range")
        .with_family(NestedFamily::ClockOffset { axis: 1 });
    SystemModel::new(
        "augmented_erf",
        domain,
        |_, x, out| {
            out[0] = ((-x[1] * x[1]).exp() - 1.0) * x[0];
            out[1] = 1.0;
        },
        |_, x| {
            let e = (-x[1] * x[1]).exp();
            Matrix::from_rows(&[[e - 1.0, -2.0 * x[0] * x[1] * e], [0.0, 0.0]]).expect("2x2")
        },
    )
    .with_closed_form(|t, t1, a| {
        let clock = a[1] + (t - t1);
        vec![(erf_g(clock) - erf_g(a[1])).exp() * a[0], clock]
    })
    .time_invariant(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_examples() {
        let m = erf_system();
        assert_eq!(m.eval(0.0, &[0.5]), vec![0.0]);
        assert_eq!(m.closed_form(3.7, 3.7, &[0.42]).unwrap(), vec![0.42]);
        // g(10) = (√π/2)·erf(10) − 10 with erf(10) = 1 to double precision.
        let expected = (0.886_226_925_452_758_f64 - 10.0).exp() * 0.5;
        let got = m.closed_form(10.0, 0.0, &[0.5]).unwrap()[0];
        assert!(((got - expected) / expected).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn counterexample_examples() {
        let m = counterexample_system();
        for a in [0.3, -0.8] {
            for t in [0.0, 1.0, 9.0] {
                assert!((m.closed_form(t, 0.0, &[a]).unwrap()[0] - a / (t + 1.0)).abs() < 1e-15);
            }
        }
        assert_eq!(m.closed_form(5.0, 5.0, &[0.3]).unwrap(), vec![0.3]);
    }

    #[test]
    fn shifted_examples() {
        let m = shifted_system();
        let a = 0.6;
        assert_eq!(m.closed_form(0.7, 0.0, &[a]).unwrap()[0], a);
        assert!((m.closed_form(2.0, 0.0, &[a]).unwrap()[0] - (-2.0_f64).exp() * a).abs() < 1e-15);
        assert!((m.closed_form(3.0, 2.0, &[a]).unwrap()[0] - (-2.0_f64).exp() * a).abs() < 1e-15);
        assert_eq!(m.eval(1.0, &[a]), vec![0.0]);
        assert_eq!(m.eval(1.0 + 1e-12, &[a]), vec![-2.0 * a]);
    }

    #[test]
    fn forced_linear_orbit() {
        let f = SineForcing { offset: 0.0, amplitude: 1.0, omega: 1.0 };
        for t in [0.0_f64, 0.3, 2.0, 5.5] {
            let expected = (t.sin() - t.cos()) / 2.0;
            assert!((f.periodic_orbit(t) - expected).abs() < 1e-15);
        }
        let m = forced_linear_system(f).unwrap();
        assert!((m.period().unwrap() - 2.0 * PI).abs() < 1e-15);
        assert!(!m.is_time_invariant());
    }

    #[test]
    fn periodic_fields_repeat() {
        let m = forced_linear_system(SineForcing { offset: 0.2, amplitude: 0.7, omega: 3.0 }).unwrap();
        let period = m.period().unwrap();
        for &t in &[0.0, 0.4, 1.7, 12.9] {
            for &x in &[-1.0, 0.0, 0.8] {
                let a = m.eval(t, &[x])[0];
                let b = m.eval(t + period, &[x])[0];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn augmented_pair_jacobian_drops_clock() {
        let m = augmented_erf_system();
        let j = m.pair_jacobian(0.0, &[0.5, 0.3]);
        assert_eq!(j.dim(), 1);
        assert!((j[(0, 0)] - ((-0.09_f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(m.pair_coords(&[0.5, 0.3]), vec![0.5]);
    }
}
