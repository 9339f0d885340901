//! Induced matrix measures (logarithmic norms) for the 1, 2 and ∞ norms and
//! their weighted variants `|z|_P := |P z|`, plus region-wide bounds of the
//! measure of a model Jacobian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, DEFAULT_OPEN_MARGIN};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, JACOBI_TOL};
use crate::models::SystemModel;

/// Weight matrices with a larger 1-norm condition number are rejected.
pub const MAX_WEIGHT_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseNorm {
    L1,
    L2,
    Linf,
}

impl BaseNorm {
    pub fn name(self) -> &'static str {
        match self {
            BaseNorm::L1 => "l1",
            BaseNorm::L2 => "l2",
            BaseNorm::Linf => "linf",
        }
    }

    pub fn vector_norm(self, v: &[f64]) -> f64 {
        match self {
            BaseNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            BaseNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            BaseNorm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// A vector norm `|z| = |P z|_base` and, through it, its induced matrix
/// measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasureSpec", into = "RawMeasureSpec")]
pub struct MeasureSpec {
    base: BaseNorm,
    weight: Option<Weight>,
}

#[derive(Debug, Clone, PartialEq)]
struct Weight {
    p: Matrix,
    p_inv: Matrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasureSpec {
    base: BaseNorm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<Matrix>,
}

impl TryFrom<RawMeasureSpec> for MeasureSpec {
    type Error = Error;

    fn try_from(raw: RawMeasureSpec) -> Result<Self> {
        match raw.weight {
            Some(p) => MeasureSpec::weighted(raw.base, p),
            None => Ok(MeasureSpec::plain(raw.base)),
        }
    }
}

impl From<MeasureSpec> for RawMeasureSpec {
    fn from(spec: MeasureSpec) -> Self {
        RawMeasureSpec { base: spec.base, weight: spec.weight.map(|w| w.p) }
    }
}

impl MeasureSpec {
    pub fn plain(base: BaseNorm) -> Self {
        Self { base, weight: None }
    }

    pub fn l1() -> Self {
        Self::plain(BaseNorm::L1)
    }

    pub fn l2() -> Self {
        Self::plain(BaseNorm::L2)
    }

    pub fn linf() -> Self {
        Self::plain(BaseNorm::Linf)
    }

    /// Weighted norm `|P z|_base`. Fails when `P` is singular or its
    /// condition number exceeds [`MAX_WEIGHT_CONDITION`].
    pub fn weighted(base: BaseNorm, p: Matrix) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidWeight("non-finite entries".into()));
        }
        let p_inv = p.inverse().ok_or_else(|| Error::InvalidWeight("matrix is singular".into()))?;
        let cond = p.norm_one() * p_inv.norm_one();
        if !cond.is_finite() || cond > MAX_WEIGHT_CONDITION {
            return Err(Error::InvalidWeight(format!(
                "condition number {cond:e} exceeds {MAX_WEIGHT_CONDITION:e}"
            )));
        }
        Ok(Self { base, weight: Some(Weight { p, p_inv }) })
    }

    pub fn base(&self) -> BaseNorm {
        self.base
    }

    pub fn weight(&self) -> Option<&Matrix> {
        self.weight.as_ref().map(|w| &w.p)
    }

    /// Dimension fixed by the weight, if any.
    pub fn dim(&self) -> Option<usize> {
        self.weight.as_ref().map(|w| w.p.dim())
    }

    /// Short label such as `l1` or `l1[P]`.
    pub fn label(&self) -> String {
        match &self.weight {
            None => self.base.name().to_string(),
            Some(_) => format!("{}[P]", self.base.name()),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(m) if m != n => Err(Error::Dimension { expected: m, got: n }),
            _ => Ok(()),
        }
    }

    /// `P A P⁻¹`, or `A` itself when unweighted.
    fn conjugate(&self, a: &Matrix) -> Result<Matrix> {
        self.check_dim(a.dim())?;
        match &self.weight {
            None => Ok(a.clone()),
            Some(w) => w.p.mul(a)?.mul(&w.p_inv),
        }
    }

    pub fn vector_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v.len())?;
        match &self.weight {
            None => Ok(self.base.vector_norm(v)),
            Some(w) => Ok(self.base.vector_norm(&w.p.mul_vec(v)?)),
        }
    }

    /// Distance `|a - b|` in this norm.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::Dimension { expected: a.len(), got: b.len() });
        }
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.vector_norm(&diff)
    }

    /// Induced matrix measure of `a`.
    pub fn mu(&self, a: &Matrix) -> Result<f64> {
        let c = self.conjugate(a)?;
        match self.base {
            BaseNorm::L1 => Ok(mu_one(&c)),
            BaseNorm::Linf => Ok(mu_inf(&c)),
            BaseNorm::L2 => mu_two(&c),
        }
    }

    /// Induced matrix norm of `a`.
    pub fn induced_norm(&self, a: &Matrix) -> Result<f64> {
        let c = self.conjugate(a)?;
        match self.base {
            BaseNorm::L1 => Ok(c.norm_one()),
            BaseNorm::Linf => Ok(c.norm_inf()),
            BaseNorm::L2 => c.norm_two(),
        }
    }
}

/// `μ₁(A) = max_j (A_jj + Σ_{i≠j} |A_ij|)`.
pub fn mu_one(a: &Matrix) -> f64 {
    let n = a.dim();
    (0..n)
        .map(|j| a[(j, j)] + (0..n).filter(|&i| i != j).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `μ∞(A) = max_i (A_ii + Σ_{j≠i} |A_ij|)`.
pub fn mu_inf(a: &Matrix) -> f64 {
    let n = a.dim();
    (0..n)
        .map(|i| a[(i, i)] + (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `μ₂(A) = λ_max((A + Aᵀ)/2)`, via Jacobi on the symmetric part.
pub fn mu_two(a: &Matrix) -> Result<f64> {
    let eig = a.symmetric_part().symmetric_eigenvalues(JACOBI_TOL)?;
    Ok(*eig.last().expect("matrix has at least one row"))
}

/// Measure of `a` under `spec`; an alias for [`MeasureSpec::mu`] that requires
/// a weight to be present.
pub fn mu_weighted(a: &Matrix, spec: &MeasureSpec) -> Result<f64> {
    if spec.weight.is_none() {
        return Err(Error::InvalidWeight("measure spec carries no weight".into()));
    }
    spec.mu(a)
}

/// Finite-`eps` quotient `(‖I + eps·A‖ - 1) / eps` from the limit definition.
/// Nonincreasing in `eps`, so it bounds the measure from above.
pub fn mu_limit_estimate(a: &Matrix, spec: &MeasureSpec, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let c = spec.conjugate(a)?;
    let n = c.dim();
    match spec.base {
        BaseNorm::L1 => {
            let best = (0..n)
                .map(|j| {
                    let col: f64 = (0..n)
                        .map(|i| {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            (delta + eps * c[(i, j)]).abs()
                        })
                        .sum();
                    col
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((best - 1.0) / eps)
        }
        BaseNorm::Linf => {
            let best = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            (delta + eps * c[(i, j)]).abs()
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((best - 1.0) / eps)
        }
        BaseNorm::L2 => {
            // ‖I + εC‖² - 1 = λ_max(ε(C + Cᵀ) + ε² CᵀC), formed without the
            // identity to avoid cancellation.
            let sym = c.add(&c.transpose())?.scale(eps);
            let gram = c.transpose().mul(&c)?.scale(eps * eps);
            let top = *sym.add(&gram)?.symmetric_eigenvalues(JACOBI_TOL)?.last().expect("nonempty");
            let norm_sq_minus_one = top.max(-1.0);
            let norm = (1.0 + norm_sq_minus_one).sqrt();
            Ok(norm_sq_minus_one / (eps * (norm + 1.0)))
        }
    }
}

/// True iff every off-diagonal entry is nonnegative.
pub fn is_metzler(a: &Matrix) -> bool {
    let n = a.dim();
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= 0.0))
}

/// Sampling controls for region-wide bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    /// Points per axis (each ≥ 2).
    pub counts: Vec<usize>,
    /// Times at which to evaluate time-varying Jacobians.
    pub t_samples: Vec<f64>,
    /// Rounds of random refinement around the current argmax.
    #[serde(default)]
    pub refine_rounds: usize,
    #[serde(default = "default_refine_points")]
    pub refine_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_open_margin")]
    pub open_margin: f64,
}

fn default_refine_points() -> usize {
    16
}

fn default_open_margin() -> f64 {
    DEFAULT_OPEN_MARGIN
}

impl RegionGrid {
    pub fn uniform(n: usize, per_axis: usize) -> Self {
        Self {
            counts: vec![per_axis; n],
            t_samples: vec![0.0],
            refine_rounds: 0,
            refine_points: default_refine_points(),
            seed: 0,
            open_margin: DEFAULT_OPEN_MARGIN,
        }
    }

    pub fn with_times(mut self, t_samples: Vec<f64>) -> Self {
        self.t_samples = t_samples;
        self
    }

    pub fn with_refinement(mut self, rounds: usize, points: usize, seed: u64) -> Self {
        self.refine_rounds = rounds;
        self.refine_points = points;
        self.seed = seed;
        self
    }
}

/// Largest value of a scalar field over a region grid and its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBound {
    pub region: DomainSpec,
    pub sup_measure: f64,
    pub argmax_point: Vec<f64>,
    pub argmax_time: f64,
    pub grid_resolution: Vec<usize>,
    pub t_samples: usize,
    pub evaluations: usize,
    pub refine_rounds: usize,
}

/// Maximum of `μ(J(t, x))` over `region × t_samples`, using the model's pair
/// Jacobian (clock coordinates removed). Time-invariant models are evaluated
/// at a single time.
pub fn sup_measure_over_region(
    model: &SystemModel,
    region: &DomainSpec,
    spec: &MeasureSpec,
    grid: &RegionGrid,
) -> Result<RegionBound> {
    sup_over_region(model, region, grid, |t, x| spec.mu(&model.pair_jacobian(t, x)))
}

/// Generic grid-plus-refinement maximisation of `value(t, x)`. Ties resolve
/// to the lowest grid index so the result does not depend on scheduling.
pub fn sup_over_region<F>(model: &SystemModel, region: &DomainSpec, grid: &RegionGrid, value: F) -> Result<RegionBound>
where
    F: Fn(f64, &[f64]) -> Result<f64> + Sync,
{
    if region.dim() != model.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: region.dim() });
    }
    if grid.counts.len() != region.dim() {
        return Err(Error::Dimension { expected: region.dim(), got: grid.counts.len() });
    }
    let points = region.grid(&grid.counts, grid.open_margin)?;
    if points.is_empty() {
        return Err(Error::Region("empty region".into()));
    }
    let times: Vec<f64> = if model.is_time_invariant() || grid.t_samples.is_empty() {
        vec![grid.t_samples.first().copied().unwrap_or(0.0)]
    } else {
        grid.t_samples.clone()
    };

    let values: Vec<f64> = (0..points.len() * times.len())
        .into_par_iter()
        .map(|k| {
            let (p, ti) = (k / times.len(), k % times.len());
            value(times[ti], &points[p])
        })
        .collect::<Result<_>>()?;

    let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
    for (k, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::NonFinite("region measure evaluation"));
        }
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let mut argmax = points[best_k / times.len()].clone();
    let argmax_time = times[best_k % times.len()];
    let mut evaluations = values.len();

    if grid.refine_rounds > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
        let mut radius: Vec<f64> = (0..region.dim())
            .map(|i| {
                let (lo, hi) = region.axis_range(i, grid.open_margin);
                (hi - lo) / (grid.counts[i] - 1) as f64
            })
            .collect();
        for _ in 0..grid.refine_rounds {
            let candidates: Vec<Vec<f64>> = (0..grid.refine_points)
                .map(|_| {
                    (0..region.dim())
                        .map(|i| {
                            let (lo, hi) = region.axis_range(i, grid.open_margin);
                            let r = radius[i];
                            let v = argmax[i] + if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
                            v.clamp(lo, hi)
                        })
                        .collect()
                })
                .collect();
            let vals: Vec<f64> =
                candidates.par_iter().map(|x| value(argmax_time, x)).collect::<Result<_>>()?;
            evaluations += vals.len();
            for (x, v) in candidates.into_iter().zip(vals) {
                if v > best {
                    best = v;
                    argmax = x;
                }
            }
            radius.iter_mut().for_each(|r| *r *= 0.5);
        }
    }

    Ok(RegionBound {
        region: region.clone(),
        sup_measure: best,
        argmax_point: argmax,
        argmax_time,
        grid_resolution: grid.counts.clone(),
        t_samples: times.len(),
        evaluations,
        refine_rounds: grid.refine_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mu_one_examples() {
        assert_eq!(mu_one(&Matrix::zeros(2)), 0.0);
        assert_eq!(mu_one(&Matrix::identity(3).scale(-1.0)), -1.0);
        assert_eq!(mu_one(&m(&[&[-2.0, 1.0], &[1.0, -2.0]])), -1.0);
    }

    #[test]
    fn mu_inf_examples() {
        assert_eq!(mu_inf(&Matrix::zeros(2)), 0.0);
        assert_eq!(mu_inf(&Matrix::from_diag(&[-1.0, -3.0])), -1.0);
        assert_eq!(mu_inf(&m(&[&[-2.0, 3.0], &[0.0, -2.0]])), 1.0);
        // column-sum view of the same matrix differs
        assert_eq!(mu_one(&m(&[&[-2.0, 3.0], &[0.0, -2.0]])), 1.0);
        assert_eq!(mu_inf(&m(&[&[-2.0, 0.0], &[3.0, -2.0]])), 1.0);
    }

    #[test]
    fn mu_two_examples() {
        assert!((mu_two(&Matrix::from_diag(&[-1.0, -3.0])).unwrap() + 1.0).abs() < 1e-14);
        assert!(mu_two(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap().abs() < 1e-15);
    }

    #[test]
    fn identity_weight_is_transparent() {
        let a = m(&[&[-2.0, 0.7, 0.1], &[1.5, -1.0, -0.3], &[0.0, 2.0, -4.0]]);
        for base in [BaseNorm::L1, BaseNorm::L2, BaseNorm::Linf] {
            let w = MeasureSpec::weighted(base, Matrix::identity(3)).unwrap();
            let p = MeasureSpec::plain(base);
            assert!((w.mu(&a).unwrap() - p.mu(&a).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn weight_validation() {
        let singular = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(MeasureSpec::weighted(BaseNorm::L1, singular), Err(Error::InvalidWeight(_))));
        let ill = Matrix::from_diag(&[1.0, 1e-13]);
        assert!(matches!(MeasureSpec::weighted(BaseNorm::L1, ill), Err(Error::InvalidWeight(_))));
        let ok = Matrix::from_diag(&[1.0, 1e-11]);
        assert!(MeasureSpec::weighted(BaseNorm::L1, ok).is_ok());
        assert!(mu_weighted(&Matrix::zeros(2), &MeasureSpec::l1()).is_err());
        let spec = MeasureSpec::weighted(BaseNorm::L1, Matrix::identity(3)).unwrap();
        assert!(matches!(spec.mu(&Matrix::zeros(2)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn limit_estimate_examples() {
        for base in [BaseNorm::L1, BaseNorm::L2, BaseNorm::Linf] {
            let spec = MeasureSpec::plain(base);
            for eps in [1e-6, 0.3, 2.0] {
                assert!(mu_limit_estimate(&Matrix::zeros(3), &spec, eps).unwrap().abs() < 1e-12);
            }
        }
        let neg_id = Matrix::identity(2).scale(-1.0);
        let v = mu_limit_estimate(&neg_id, &MeasureSpec::l1(), 0.5).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
        assert!(mu_limit_estimate(&neg_id, &MeasureSpec::l1(), 0.0).is_err());
        assert!(mu_limit_estimate(&neg_id, &MeasureSpec::l1(), -1.0).is_err());
    }

    #[test]
    fn metzler() {
        assert!(is_metzler(&Matrix::identity(3).scale(-1.0)));
        assert!(is_metzler(&m(&[&[-1.0, 2.0], &[3.0, -1.0]])));
        assert!(!is_metzler(&m(&[&[-1.0, -0.1], &[0.0, -1.0]])));
    }

    #[test]
    fn weighted_serde_roundtrip_validates() {
        let spec = MeasureSpec::weighted(BaseNorm::L1, Matrix::from_diag(&[1.0, 0.5])).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"base":"l1","weight":[[1.0,0.0],[0.0,0.5]]}"#);
        let back: MeasureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"base":"l1","weight":[[1,2],[2,4]]}"#).is_err());
        assert!(serde_json::from_str::<MeasureSpec>(r#"{"base":"l1","wieght":[[1]]}"#).is_err());
    }
}
