//! Sampled checks of the pairwise-distance inequalities.

use super::query::{Property, PropertyQuery, Sample, SamplePlan, Verdict, Witness, WitnessKind};
use super::sampling::{base_pairs, default_region_grid, refine_pairs, trace_pairs, Pair, Trace, Window, RATE_MIN_Z};
use crate::error::{Error, Result};
use crate::measures::{sup_over_region, MeasureSpec, RegionBound};
use crate::models::SystemModel;
use crate::simulate::integrate_with_stops;

/// `d(t₁ + e)/|a−b| ≤ factor · exp(−ℓ (e − shift))` for `e ≥ min_elapsed`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub shift: f64,
    pub min_elapsed: f64,
    pub max_elapsed: Option<f64>,
    pub factor: f64,
    pub strict: bool,
    /// Only defined for `e > 0` (the NE and WC quantifiers).
    pub positive_elapsed: bool,
}

impl Shape {
    fn plain(factor: f64) -> Self {
        Self { shift: 0.0, min_elapsed: 0.0, max_elapsed: None, factor, strict: false, positive_elapsed: false }
    }

    fn shifted(tau: f64, factor: f64) -> Self {
        Self { shift: tau, min_elapsed: tau, ..Self::plain(factor) }
    }

    pub(crate) fn of(property: &Property) -> Result<Self> {
        Ok(match *property {
            Property::Contraction { .. } => Self::plain(1.0),
            Property::St { tau, .. } => Self::shifted(tau, 1.0),
            Property::So { eps, .. } => Self::plain(1.0 + eps),
            Property::Sost { tau, eps, .. } => Self::shifted(tau, 1.0 + eps),
            Property::SostShiftOvershoot { tau, .. } => Self::shifted(tau, 1.0 + tau),
            Property::SostDelayed { tau, eps, .. } => Self { min_elapsed: tau, ..Self::plain(1.0 + eps) },
            Property::Ne => Self { positive_elapsed: true, ..Self::plain(1.0) },
            Property::Wc => Self { positive_elapsed: true, strict: true, ..Self::plain(1.0) },
            ref other => {
                return Err(Error::Query(format!(
                    "property `{}` has a dedicated checker and is not a sampled distance inequality",
                    other.kind().name()
                )))
            }
        })
    }

    pub(crate) fn swe(delta: f64, tau0: f64) -> Self {
        Self { max_elapsed: Some(tau0), ..Self::plain(1.0 + delta) }
    }

    fn window(&self, dense: bool) -> Window {
        Window {
            min_elapsed: self.min_elapsed,
            max_elapsed: self.max_elapsed,
            exclusive_min: self.positive_elapsed,
            dense_from: dense.then_some(self.shift + RATE_MIN_Z),
        }
    }

    /// Elapsed times `e` for the plan offsets.
    fn elapsed(&self, plan: &SamplePlan) -> Vec<f64> {
        let mut es: Vec<f64> = plan.t2_offsets.iter().map(|z| self.shift + z).collect();
        es.push(self.min_elapsed);
        if let Some(m) = self.max_elapsed {
            es.extend((1..=10).map(|k| m * k as f64 / 10.0));
        }
        es
    }

    fn margin(&self, ratio: f64, z: f64, rate: f64) -> f64 {
        ratio - self.factor * (-rate * z).exp()
    }

    fn violates(&self, margin: f64, slack: f64) -> bool {
        if self.strict {
            margin >= -slack
        } else {
            margin > slack
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PointRef {
    trace: usize,
    point: usize,
}

/// Aggregates over all traces in index order (deterministic tie-break).
struct Scan<'a> {
    traces: &'a [Trace],
    shape: Shape,
    /// Distances below this are integration noise and carry no rate
    /// information.
    noise_floor: f64,
}

impl Scan<'_> {
    fn z(&self, e: f64) -> f64 {
        (e - self.shape.shift).max(0.0)
    }

    fn points(&self) -> impl Iterator<Item = (PointRef, f64, f64)> + '_ {
        self.traces.iter().enumerate().flat_map(move |(ti, tr)| {
            tr.points.iter().enumerate().map(move |(pi, &(e, r))| (PointRef { trace: ti, point: pi }, e, r))
        })
    }

    fn count(&self) -> usize {
        self.traces.iter().map(|t| t.points.len()).sum()
    }

    /// Worst margin at the given rate.
    fn worst(&self, rate: f64) -> Option<(PointRef, f64)> {
        let mut best: Option<(PointRef, f64)> = None;
        for (p, e, r) in self.points() {
            let m = self.shape.margin(r, self.z(e), rate);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((p, m));
            }
        }
        best
    }

    /// Worst margin among the `z = 0` points, where no rate helps.
    fn worst_at_zero(&self) -> Option<(PointRef, f64)> {
        let mut best: Option<(PointRef, f64)> = None;
        for (p, e, r) in self.points() {
            if self.z(e) == 0.0 {
                let m = self.shape.margin(r, 0.0, 0.0);
                if best.is_none_or(|(_, b)| m > b) {
                    best = Some((p, m));
                }
            }
        }
        best
    }

    /// Lowest admissible rate over points with `z ≥ RATE_MIN_Z` whose end
    /// time `t1 + z` is at most `cap`.
    fn min_rate(&self, cap: f64) -> Option<(PointRef, f64)> {
        let mut best: Option<(PointRef, f64)> = None;
        for (p, e, r) in self.points() {
            let z = self.z(e);
            let tr = &self.traces[p.trace];
            if z < RATE_MIN_Z || tr.pair.t1 + z > cap * (1.0 + 1e-12) || r * tr.d0 < self.noise_floor {
                continue;
            }
            let rate = if r > 0.0 { (self.shape.factor.ln() - r.ln()) / z } else { f64::INFINITY };
            if best.is_none_or(|(_, b)| rate < b) {
                best = Some((p, rate));
            }
        }
        best
    }

    fn sample(&self, p: PointRef, margin: f64) -> Sample {
        let tr = &self.traces[p.trace];
        let (e, r) = tr.points[p.point];
        Sample {
            t1: tr.pair.t1,
            t2: tr.pair.t1 + self.z(e),
            a: tr.pair.a.clone(),
            b: tr.pair.b.clone(),
            ratio: r,
            margin,
        }
    }

    fn witness(&self, p: PointRef, margin: f64, kind: WitnessKind) -> Witness {
        let s = self.sample(p, margin);
        Witness { kind, t1: s.t1, t2: s.t2, a: s.a, b: s.b, margin }
    }

    fn pair(&self, p: PointRef) -> Pair {
        self.traces[p.trace].pair.clone()
    }
}

/// `−sup Re λ(J)` over the model's sampling box: no norm admits a uniform
/// contraction rate above this.
pub fn linearization_rate(model: &SystemModel, plan: &SamplePlan) -> Result<RegionBound> {
    let mut times = plan.start_times();
    if !model.is_time_invariant() {
        let t_max = times.iter().copied().fold(0.0, f64::max);
        let z_max = plan.t2_offsets.iter().copied().fold(0.0, f64::max);
        let mut extra: Vec<f64> = plan.t2_offsets.iter().map(|z| t_max + z).collect();
        extra.push(t_max + z_max);
        times.extend(extra);
        if let Some(h) = plan.horizon {
            times.retain(|&t| t <= h);
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
    }
    let grid = default_region_grid(model).with_times(times).with_refinement(2, 16, plan.seed);
    let mut grid = grid;
    grid.open_margin = plan.boundary_margin;
    let mut bound = sup_over_region(model, model.domain(), &grid, |t, x| model.pair_jacobian(t, x).spectral_abscissa())?;
    bound.sup_measure = -bound.sup_measure;
    Ok(bound)
}

/// Pairs started next to the point where the linearization is least stable,
/// displaced along its dominant eigenvector.
fn probe_pairs(model: &SystemModel, plan: &SamplePlan, lin: &RegionBound) -> Vec<Pair> {
    let j = model.pair_jacobian(lin.argmax_time, &lin.argmax_point);
    let Some(v) = j.dominant_real_eigenvector() else {
        return Vec::new();
    };
    let domain = model.domain();
    let axes: Vec<usize> = (0..model.dim()).filter(|&i| domain.clock_axis != Some(i)).collect();
    let t1 = if model.is_time_invariant() { 0.0 } else { lin.argmax_time.max(0.0) };
    let mut out = Vec::new();
    for scale in [1e-2, 1e-1] {
        for sign in [1.0, -1.0] {
            let mut a = lin.argmax_point.clone();
            let mut b = a.clone();
            for (k, &i) in axes.iter().enumerate() {
                let (lo, hi) = domain.axis_range(i, plan.boundary_margin);
                b[i] = (a[i] + sign * scale * (hi - lo) * v[k]).clamp(lo, hi);
                a[i] = a[i].clamp(lo, hi);
            }
            domain.anchor(&mut a, t1);
            domain.anchor(&mut b, t1);
            out.push(Pair { t1, a, b });
        }
    }
    out
}

pub(crate) fn check_norm(model: &SystemModel, norm: &MeasureSpec) -> Result<()> {
    match norm.dim() {
        Some(d) if d != model.pair_dim() => Err(Error::Query(format!(
            "weight is {d}x{d} but the model's pair dimension is {}",
            model.pair_dim()
        ))),
        _ => Ok(()),
    }
}

/// Evaluates the property inequality on the sampled quadruples
/// `(t₁, t₂, a, b)`. With a rate given, any violation beyond the slack
/// falsifies. Without one, the largest rate consistent with all samples is
/// estimated and a nonpositive estimate falsifies.
pub fn check_property(model: &SystemModel, q: &PropertyQuery) -> Result<Verdict> {
    q.property.validate()?;
    q.plan.validate()?;
    check_norm(model, &q.norm)?;
    let shape = Shape::of(&q.property)?;
    run_shape(model, &q.property, &q.norm, &q.plan, shape)
}

pub(crate) fn run_shape(
    model: &SystemModel,
    property: &Property,
    norm: &MeasureSpec,
    plan: &SamplePlan,
    shape: Shape,
) -> Result<Verdict> {
    let slack = plan.slack();
    let rate = property.rate();
    let estimate = rate.is_none() && !matches!(property, Property::Ne | Property::Wc | Property::Swe { .. });
    let is_contraction = matches!(property, Property::Contraction { .. });
    let mut verdict = Verdict::new(model.name(), property.clone(), norm.label(), slack);
    verdict.plan = Some(plan.clone());

    let lin = if is_contraction { Some(linearization_rate(model, plan)?) } else { None };
    let mut pairs = base_pairs(model, plan);
    if let Some(lin) = &lin {
        pairs.extend(probe_pairs(model, plan, lin));
    }
    let elapsed = shape.elapsed(plan);
    let window = shape.window(!matches!(property, Property::Wc));
    let mut traces = trace_pairs(model, norm, plan, pairs, &elapsed, window)?;

    // Refinement around the binding sample.
    let check_rate = rate.unwrap_or(0.0);
    for round in 0..plan.refine_rounds {
        let scan = Scan { traces: &traces, shape, noise_floor: 1e3 * plan.tol };
        let center = if estimate { scan.min_rate(f64::INFINITY) } else { scan.worst(check_rate) };
        let Some((p, _)) = center else { break };
        let fresh = refine_pairs(model, plan, &scan.pair(p), round);
        traces.extend(trace_pairs(model, norm, plan, fresh, &elapsed, window)?);
    }

    let scan = Scan { traces: &traces, shape, noise_floor: 1e3 * plan.tol };
    verdict.samples = scan.count();
    if verdict.samples == 0 {
        return Err(Error::Query("the sample plan produced no admissible evaluation times".into()));
    }

    if !estimate {
        let (p, m) = scan.worst(check_rate).expect("nonempty");
        verdict.worst_margin = m;
        verdict.binding = Some(scan.sample(p, m));
        verdict.rate = rate;
        if shape.violates(m, slack) {
            verdict.falsify(scan.witness(p, m, WitnessKind::Trajectory));
        }
        if let (Some(lin), Some(c)) = (&lin, rate) {
            verdict.detail("linearization_rate", lin.sup_measure);
            if lin.sup_measure < c - slack {
                verdict.falsify(linearization_witness(lin, c - lin.sup_measure));
                verdict.notes.push(format!(
                    "a Jacobian eigenvalue at t = {} has real part {} > −c",
                    lin.argmax_time, -lin.sup_measure
                ));
            }
        }
        return Ok(verdict);
    }

    // Estimate mode.
    if let Some((p, m)) = scan.worst_at_zero() {
        verdict.worst_margin = m;
        if shape.violates(m, slack) {
            verdict.binding = Some(scan.sample(p, m));
            verdict.falsify(scan.witness(p, m, WitnessKind::Trajectory));
            verdict.notes.push("the inequality fails before any decay can act".into());
            return Ok(verdict);
        }
    }
    let Some((p, min_rate)) = scan.min_rate(f64::INFINITY) else {
        return Err(Error::Query("no samples with positive offset; cannot estimate a rate".into()));
    };
    let margin = scan.shape.margin(scan.traces[p.trace].points[p.point].1, scan.z(scan.traces[p.trace].points[p.point].0), 0.0);
    verdict.binding = Some(scan.sample(p, margin));
    verdict.worst_margin = verdict.worst_margin.max(margin);
    let mut ell = min_rate.max(0.0);

    let decades: Vec<(f64, f64)> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .filter_map(|&cap| scan.min_rate(cap).map(|(_, r)| (cap, r.max(0.0))))
        .collect();
    verdict.detail("rate_by_horizon", &decades);
    let drift = decades.len() == 4
        && decades.windows(2).skip(1).all(|w| w[1].1 <= 0.5 * w[0].1)
        && plan.t2_offsets.iter().any(|&z| z >= 1000.0);
    if drift {
        verdict.notes.push("the admissible rate keeps halving with each decade of horizon: no uniform rate".into());
        verdict.rate = Some(ell);
        verdict.falsify(scan.witness(p, margin, WitnessKind::RateDrift));
        return Ok(verdict);
    }

    if let Some(lin) = &lin {
        verdict.detail("linearization_rate", lin.sup_measure);
        if lin.sup_measure < ell {
            ell = lin.sup_measure.max(0.0);
            if lin.sup_measure <= slack {
                verdict.rate = Some(ell);
                verdict.notes.push(format!(
                    "Jacobian at t = {}, x = {:?} has an eigenvalue with real part {} ≥ 0",
                    lin.argmax_time, lin.argmax_point, -lin.sup_measure
                ));
                verdict.falsify(linearization_witness(lin, -lin.sup_measure));
                return Ok(verdict);
            }
        }
    }
    verdict.rate = Some(ell);
    if ell <= slack {
        verdict.falsify(scan.witness(p, margin, WitnessKind::RateEstimate));
    }
    Ok(verdict)
}

fn linearization_witness(lin: &RegionBound, margin: f64) -> Witness {
    Witness {
        kind: WitnessKind::Linearization,
        t1: lin.argmax_time,
        t2: lin.argmax_time,
        a: lin.argmax_point.clone(),
        b: lin.argmax_point.clone(),
        margin,
    }
}

/// Re-simulates a trajectory witness from scratch and returns its margin.
pub fn reproduce_witness(model: &SystemModel, q: &PropertyQuery, w: &Witness) -> Result<f64> {
    let shape = Shape::of(&q.property)?;
    let e = w.t2 - w.t1 + shape.shift;
    let tr = |x: &[f64]| integrate_with_stops(model, w.t1, x, &[w.t1 + e], &q.plan.integrator());
    let (ta, tb) = (tr(&w.a)?, tr(&w.b)?);
    let pc = |x: &[f64]| model.pair_coords(x);
    let d = q.norm.distance(&pc(ta.final_state()), &pc(tb.final_state()))?;
    let d0 = q.norm.distance(&pc(&w.a), &pc(&w.b))?;
    Ok(shape.margin(d / d0, w.t2 - w.t1, q.property.rate().unwrap_or(0.0)))
}
