//! The cyclic biochemical feedback circuit
//! `ẋ₁ = g(xₙ) − α₁x₁`, `ẋᵢ = xᵢ₋₁ − αᵢxᵢ`, with `g(u) = (1 + u)/(k + u)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::SystemModel;
use crate::domain::{DomainSpec, NestedFamily};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioParams {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub k: f64,
}

impl BioParams {
    pub fn new(alphas: Vec<f64>, k: f64) -> Result<Self> {
        Self { n: alphas.len(), alphas, k }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n == 0 {
            return Err(Error::Parameter("bio circuit needs n ≥ 1".into()));
        }
        if self.alphas.len() != self.n {
            return Err(Error::Parameter(format!(
                "bio circuit: n = {} but {} alphas were given",
                self.n,
                self.alphas.len()
            )));
        }
        if let Some((i, a)) = self.alphas.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::Parameter(format!("bio circuit: alphas[{i}] = {a} must be positive and finite")));
        }
        if !(self.k.is_finite() && self.k > 1.0) {
            return Err(Error::Parameter(format!("bio circuit: k = {} must be finite and > 1", self.k)));
        }
        Ok(self)
    }

    /// `α = Π αᵢ`.
    pub fn alpha(&self) -> f64 {
        self.alphas.iter().product()
    }

    pub fn g(&self, u: f64) -> f64 {
        (1.0 + u) / (self.k + u)
    }

    pub fn g_prime(&self, u: f64) -> f64 {
        (self.k - 1.0) / ((self.k + u) * (self.k + u))
    }

    /// `k − 1 < α k²`: the strict contractivity threshold on the orthant.
    pub fn is_strictly_contractive(&self) -> bool {
        self.k - 1.0 < self.alpha() * self.k * self.k
    }

    fn field(&self, alpha1: f64, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out[0] = self.g(x[n - 1]) - alpha1 * x[0];
        for i in 1..n {
            out[i] = x[i - 1] - self.alphas[i] * x[i];
        }
    }

    fn jacobian(&self, alpha1: f64, x: &[f64]) -> Matrix {
        let n = self.n;
        let mut j = Matrix::zeros(n);
        j[(0, 0)] = -alpha1;
        for i in 1..n {
            j[(i, i - 1)] = 1.0;
            j[(i, i)] = -self.alphas[i];
        }
        j[(0, n - 1)] += self.g_prime(x[n - 1]);
        j
    }

    /// Upper corner of `Ω_r`: `r / (α₁⋯αᵢ)` on axis `i`.
    fn omega_corner(&self, r: f64) -> Vec<f64> {
        self.alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(r / *acc)
            })
            .collect()
    }
}

/// The circuit on the nonnegative orthant, sampled over the window `Ω₂`, with
/// the family `Ω_ζ = {x ≥ ζ}` attached.
pub fn bio_circuit(p: BioParams) -> Result<SystemModel> {
    let p = p.validated()?;
    let domain = DomainSpec::positive_orthant(p.omega_corner(2.0))?.with_family(NestedFamily::LowerBound);
    let (pf, pj) = (Arc::new(p.clone()), Arc::new(p.clone()));
    let alpha1 = p.alphas[0];
    Ok(SystemModel::new(
        format!("bio(n={})", p.n),
        domain,
        move |_, x, out| pf.field(alpha1, x, out),
        move |_, x| pj.jacobian(alpha1, x),
    )
    .time_invariant(true))
}

/// The invariant box `Ω_r = r·([0, 1/α₁] × [0, 1/(α₁α₂)] × ⋯)`, `r ≥ 1`.
pub fn bio_omega_r(p: &BioParams, r: f64) -> Result<DomainSpec> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Parameter(format!("Ω_r needs r > 0, got {r}")));
    }
    let n = p.n;
    Ok(DomainSpec::closed_box(vec![0.0; n], p.omega_corner(r))?.with_family(NestedFamily::LowerBound))
}

/// `D_ε = diag(1, α₁ − ε, (α₁ − ε)(α₂ − ε), …)`.
pub fn bio_weight(p: &BioParams, eps: f64) -> Result<Matrix> {
    check_eps(p, eps)?;
    let diag: Vec<f64> = (0..p.n).map(|i| p.alphas[..i].iter().map(|a| a - eps).product()).collect();
    Ok(Matrix::from_diag(&diag))
}

fn check_eps(p: &BioParams, eps: f64) -> Result<()> {
    let min_alpha = p.alphas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(eps >= 0.0 && eps < min_alpha) {
        return Err(Error::Parameter(format!("ε must lie in [0, min αᵢ = {min_alpha}), got {eps}")));
    }
    Ok(())
}

/// `μ_{1,D_ε}(J(x))`, which depends on `x` only through `xₙ`.
pub fn bio_mu_closed_form(p: &BioParams, eps: f64, x_n: f64) -> Result<f64> {
    check_eps(p, eps)?;
    let prod: f64 = p.alphas[..p.n - 1].iter().map(|a| a - eps).product();
    let last = (p.g_prime(x_n) - p.alphas[p.n - 1] * prod) / prod;
    Ok(if p.n == 1 { last } else { last.max(-eps) })
}

/// First `ε` on the grid `min αᵢ · 2⁻ʲ` for which
/// `μ_{1,D_ε}(J(x)) ≤ −ε/2` for all `x` with `xₙ ≥ xn_floor`.
pub fn bio_contraction_eps(p: &BioParams, xn_floor: f64) -> Result<f64> {
    let min_alpha = p.alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let gp = p.g_prime(xn_floor.max(0.0));
    for j in 1..=60 {
        let eps = min_alpha * 0.5f64.powi(j);
        let prod: f64 = p.alphas[..p.n - 1].iter().map(|a| a - eps).product();
        if gp / prod - p.alphas[p.n - 1] <= -eps / 2.0 {
            return Ok(eps);
        }
    }
    Err(Error::Precondition(format!(
        "no ε > 0 gives μ_{{1,D_ε}} ≤ −ε/2 for xₙ ≥ {xn_floor} (k − 1 = {}, αk² = {})",
        p.k - 1.0,
        p.alpha() * p.k * p.k
    )))
}

/// The unique equilibrium in `Ω₁`: bisection on `α·u = g(u)`, then exact
/// back-substitution along the chain.
pub fn bio_equilibrium(p: &BioParams) -> Result<Vec<f64>> {
    if p.k - 1.0 > p.alpha() * p.k * p.k {
        return Err(Error::Precondition(format!(
            "equilibrium uniqueness needs k − 1 ≤ αk², got {} > {}",
            p.k - 1.0,
            p.alpha() * p.k * p.k
        )));
    }
    let alpha = p.alpha();
    let h = |u: f64| alpha * u - p.g(u);
    let (mut lo, mut hi) = (0.0, 1.0 / alpha);
    let mut grow = 0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::NoBracket("bio equilibrium"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xn = 0.5 * (lo + hi);
    let mut e = Vec::with_capacity(p.n);
    let mut x = p.g(xn) / p.alphas[0];
    e.push(x);
    for a in &p.alphas[1..] {
        x /= a;
        e.push(x);
    }
    Ok(e)
}

/// `α₁(t) = α₁ + amplitude·sin(2πt / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicForcing {
    pub amplitude: f64,
    pub period: f64,
}

/// The circuit with a periodically modulated first degradation rate. The
/// placement of the forcing on `α₁` is a modelling choice.
pub fn periodic_bio_circuit(p: BioParams, forcing: PeriodicForcing) -> Result<SystemModel> {
    let p = p.validated()?;
    let PeriodicForcing { amplitude, period } = forcing;
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Parameter(format!("forcing period must be positive, got {period}")));
    }
    if !amplitude.is_finite() || p.alphas[0] - amplitude.abs() <= 0.0 {
        return Err(Error::Parameter(format!(
            "α₁(t) = {} + {amplitude}·sin(2πt/{period}) must stay positive",
            p.alphas[0]
        )));
    }
    let base = p.alphas[0];
    let alpha1 = move |t: f64| base + amplitude * (2.0 * PI * t / period).sin();
    let mut window = p.clone();
    window.alphas[0] = base - amplitude.abs();
    let domain = DomainSpec::positive_orthant(window.omega_corner(2.0))?.with_family(NestedFamily::LowerBound);
    let (pf, pj) = (Arc::new(p.clone()), Arc::new(p.clone()));
    SystemModel::new(
        format!("periodic_bio(n={})", p.n),
        domain,
        move |t, x, out| pf.field(alpha1(t), x, out),
        move |t, x| pj.jacobian(alpha1(t), x),
    )
    .time_invariant(amplitude == 0.0)
    .with_remark("periodic forcing acts on α₁; this placement is a modelling choice")
    .with_period(period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{is_metzler, mu_weighted, BaseNorm, MeasureSpec};

    fn unit() -> BioParams {
        BioParams::new(vec![1.0, 1.0], 2.0).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BioParams::new(vec![1.0, 0.0], 2.0).is_err());
        assert!(BioParams::new(vec![1.0], 1.0).is_err());
        assert!(BioParams::new(vec![], 2.0).is_err());
        assert!(BioParams { n: 3, alphas: vec![1.0], k: 2.0 }.validated().is_err());
    }

    #[test]
    fn jacobian_at_origin() {
        let m = bio_circuit(unit()).unwrap();
        let j = m.jacobian(0.0, &[0.0, 0.0]);
        assert_eq!(j.rows(), vec![vec![-1.0, 0.25], vec![1.0, -1.0]]);
        for x in [[0.0, 0.0], [0.3, 1.7], [2.0, 0.1]] {
            assert!(is_metzler(&m.jacobian(0.0, &x)));
        }
    }

    #[test]
    fn equilibrium_golden_ratio() {
        let p = unit();
        let e = bio_equilibrium(&p).unwrap();
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        assert!((e[0] - phi).abs() < 1e-12 && (e[1] - phi).abs() < 1e-12);
        let m = bio_circuit(p.clone()).unwrap();
        assert!(m.eval(0.0, &e).iter().all(|v| v.abs() < 1e-10));
        assert!(bio_omega_r(&p, 1.0).unwrap().contains(&e));
    }

    #[test]
    fn equilibrium_three_stage() {
        let p = BioParams::new(vec![0.8, 1.3, 0.6], 3.0).unwrap();
        let e = bio_equilibrium(&p).unwrap();
        let m = bio_circuit(p).unwrap();
        assert!(m.eval(0.0, &e).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn mu_closed_form_examples() {
        let p = unit();
        assert!((bio_mu_closed_form(&p, 0.1, 0.0).unwrap() + 0.1).abs() < 1e-15);
        assert_eq!(bio_mu_closed_form(&p, 0.0, 0.4).unwrap(), 0.0);
        assert!(bio_mu_closed_form(&p, 1.0, 0.0).is_err());
        assert!(bio_mu_closed_form(&p, -0.1, 0.0).is_err());
    }

    #[test]
    fn mu_closed_form_matches_weighted_measure() {
        for p in [unit(), BioParams::new(vec![0.5, 0.5], 2.0).unwrap(), BioParams::new(vec![0.9, 1.2, 0.7], 1.5).unwrap()] {
            let m = bio_circuit(p.clone()).unwrap();
            let eps = 0.3;
            let spec = MeasureSpec::weighted(BaseNorm::L1, bio_weight(&p, eps).unwrap()).unwrap();
            for step in 0..20 {
                let xn = 0.25 * step as f64;
                let mut x = vec![0.5; p.n];
                x[p.n - 1] = xn;
                let direct = mu_weighted(&m.jacobian(0.0, &x), &spec).unwrap();
                let closed = bio_mu_closed_form(&p, eps, xn).unwrap();
                assert!((direct - closed).abs() < 1e-10, "{direct} vs {closed}");
            }
        }
    }

    #[test]
    fn contraction_eps_for_unit_rates() {
        let p = unit();
        let eps = bio_contraction_eps(&p, 0.0).unwrap();
        assert_eq!(eps, 0.5);
        assert!(bio_mu_closed_form(&p, eps, 0.0).unwrap() <= -eps / 2.0);
        let boundary = BioParams::new(vec![0.5, 0.5], 2.0).unwrap();
        assert!(bio_contraction_eps(&boundary, 0.0).is_err());
        assert!(bio_contraction_eps(&boundary, 0.1).is_ok());
    }

    #[test]
    fn periodic_variant() {
        let p = unit();
        assert!(periodic_bio_circuit(p.clone(), PeriodicForcing { amplitude: 1.0, period: 1.0 }).is_err());
        let m = periodic_bio_circuit(p.clone(), PeriodicForcing { amplitude: 0.5, period: 1.0 }).unwrap();
        assert_eq!(m.period(), Some(1.0));
        for t in [0.0, 0.13, 0.77] {
            let (a, b) = (m.eval(t, &[0.4, 0.9]), m.eval(t + 1.0, &[0.4, 0.9]));
            assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        }
        let flat = periodic_bio_circuit(p.clone(), PeriodicForcing { amplitude: 0.0, period: 2.0 }).unwrap();
        let base = bio_circuit(p).unwrap();
        assert_eq!(flat.eval(0.3, &[0.2, 0.5]), base.eval(0.3, &[0.2, 0.5]));
    }
}
