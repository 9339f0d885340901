//! Convex state-space regions: axis-aligned boxes, orthant-anchored boxes and
//! nested families `Ω_ζ` of shrinking subregions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default inset used when sampling next to an open facet.
pub const DEFAULT_OPEN_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Bounded on every axis.
    Box,
    /// The nonnegative orthant. The upper bounds only delimit the sampling
    /// window and are not facets of the domain.
    PositiveOrthantBox,
}

/// Generator for a monotone family of subregions `Ω_ζ`, `ζ ∈ (0, 1/2]`, with
/// `ζ₁ ≥ ζ₂ ⇒ Ω_{ζ₁} ⊆ Ω_{ζ₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NestedFamily {
    /// `{x ∈ Ω : x_i ≥ lower_i + ζ}` on every non-clock axis.
    LowerBound,
    /// Interior shrink: every facet moved inward by `ζ`.
    Shrink,
    /// `{x ∈ Ω : x_axis ≥ t₁ + ζ}` for a clock coordinate anchored at `t₁`.
    ClockOffset { axis: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub open_lower: Vec<bool>,
    pub open_upper: Vec<bool>,
    /// Coordinate that carries time; pinned to `t₁` for initial states and
    /// excluded from distance and containment tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested_family: Option<NestedFamily>,
}

impl DomainSpec {
    pub fn closed_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        Self {
            kind: DomainKind::Box,
            lower,
            upper,
            open_lower: vec![false; n],
            open_upper: vec![false; n],
            clock_axis: None,
            nested_family: None,
        }
        .validated()
    }

    pub fn open_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        Self {
            kind: DomainKind::Box,
            lower,
            upper,
            open_lower: vec![true; n],
            open_upper: vec![true; n],
            clock_axis: None,
            nested_family: None,
        }
        .validated()
    }

    /// Nonnegative orthant with the sampling window `[0, upper]`.
    pub fn positive_orthant(upper: Vec<f64>) -> Result<Self> {
        let n = upper.len();
        Self {
            kind: DomainKind::PositiveOrthantBox,
            lower: vec![0.0; n],
            upper,
            open_lower: vec![false; n],
            open_upper: vec![true; n],
            clock_axis: None,
            nested_family: None,
        }
        .validated()
    }

    pub fn with_family(mut self, family: NestedFamily) -> Self {
        self.nested_family = Some(family);
        self
    }

    pub fn with_clock_axis(mut self, axis: usize) -> Result<Self> {
        if axis >= self.dim() {
            return Err(Error::Region(format!("clock axis {axis} out of range for dimension {}", self.dim())));
        }
        self.clock_axis = Some(axis);
        Ok(self)
    }

    pub fn validated(self) -> Result<Self> {
        let n = self.lower.len();
        if n == 0 {
            return Err(Error::Region("domain must have at least one axis".into()));
        }
        for (len, what) in [
            (self.upper.len(), "upper"),
            (self.open_lower.len(), "open_lower"),
            (self.open_upper.len(), "open_upper"),
        ] {
            if len != n {
                return Err(Error::Region(format!("{what} has {len} entries, expected {n}")));
            }
        }
        for i in 0..n {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::Region(format!("axis {i}: need finite lower < upper, got [{lo}, {hi}]")));
            }
        }
        if self.kind == DomainKind::PositiveOrthantBox && self.lower.iter().any(|&l| l < 0.0) {
            return Err(Error::Region("orthant box must have nonnegative lower bounds".into()));
        }
        Ok(self)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    fn is_clock(&self, i: usize) -> bool {
        self.clock_axis == Some(i)
    }

    fn has_upper_facet(&self) -> bool {
        self.kind == DomainKind::Box
    }

    /// Sampling interval for axis `i`, inset by `margin` on open facets.
    pub fn axis_range(&self, i: usize, margin: f64) -> (f64, f64) {
        let lo = self.lower[i] + if self.open_lower[i] { margin } else { 0.0 };
        let hi = self.upper[i] - if self.open_upper[i] { margin } else { 0.0 };
        (lo, hi.max(lo))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).filter(|&i| !self.is_clock(i)).all(|i| {
            let lo_ok = if self.open_lower[i] { x[i] > self.lower[i] } else { x[i] >= self.lower[i] };
            let hi_ok = !self.has_upper_facet()
                || if self.open_upper[i] { x[i] < self.upper[i] } else { x[i] <= self.upper[i] };
            lo_ok && hi_ok
        })
    }

    /// Largest outward distance of `x` beyond any facet; zero inside.
    pub fn excursion(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .filter(|&i| !self.is_clock(i))
            .map(|i| {
                let below = self.lower[i] - x[i];
                let above = if self.has_upper_facet() { x[i] - self.upper[i] } else { f64::NEG_INFINITY };
                below.max(above)
            })
            .fold(0.0, f64::max)
    }

    /// Sup-norm distance from `x` to the boundary (negative outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .filter(|&i| !self.is_clock(i))
            .map(|i| {
                let below = x[i] - self.lower[i];
                if self.has_upper_facet() {
                    below.min(self.upper[i] - x[i])
                } else {
                    below
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Uniform random initial state; the clock axis (if any) is pinned to `t1`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64, t1: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                if self.is_clock(i) {
                    return t1;
                }
                let (lo, hi) = self.axis_range(i, margin);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            })
            .collect()
    }

    /// Pins the clock coordinate of `x` to `t1`.
    pub fn anchor(&self, x: &mut [f64], t1: f64) {
        if let Some(c) = self.clock_axis {
            x[c] = t1;
        }
    }

    /// Corners of the (inset) sampling box, clock axis pinned to `t1`.
    pub fn corners(&self, margin: f64, t1: f64) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                if self.is_clock(i) {
                    vec![t1]
                } else {
                    let (lo, hi) = self.axis_range(i, margin);
                    vec![lo, hi]
                }
            })
            .collect();
        cartesian(&axes)
    }

    /// Tensor grid with `counts[i]` evenly spaced points on axis `i`
    /// (endpoints included, inset on open facets). Ordered with the last axis
    /// varying fastest.
    pub fn grid(&self, counts: &[usize], margin: f64) -> Result<Vec<Vec<f64>>> {
        if counts.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: counts.len() });
        }
        if let Some((i, _)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::Parameter(format!("grid resolution on axis {i} must be at least 2")));
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let (lo, hi) = self.axis_range(i, margin);
                linspace(lo, hi, c)
            })
            .collect();
        Ok(cartesian(&axes))
    }

    /// Points on each closed facet (for orthant boxes only the lower facets),
    /// gridded over the remaining axes. Clock axes are skipped.
    pub fn facet_points(&self, per_axis: usize, margin: f64, t1: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for axis in (0..self.dim()).filter(|&i| !self.is_clock(i)) {
            let mut sides = Vec::new();
            if !self.open_lower[axis] {
                sides.push(self.lower[axis]);
            }
            if self.has_upper_facet() && !self.open_upper[axis] {
                sides.push(self.upper[axis]);
            }
            for side in sides {
                let axes: Vec<Vec<f64>> = (0..self.dim())
                    .map(|i| {
                        if i == axis {
                            vec![side]
                        } else if self.is_clock(i) {
                            vec![t1]
                        } else {
                            let (lo, hi) = self.axis_range(i, margin);
                            linspace(lo, hi, per_axis.max(2))
                        }
                    })
                    .collect();
                out.extend(cartesian(&axes));
            }
        }
        out
    }

    /// Closed box obtained by moving every facet inward by `depth`. Orthant
    /// boxes keep their upper window as is.
    pub fn shrink(&self, depth: f64) -> Result<Self> {
        let mut out = self.clone();
        out.nested_family = None;
        for i in (0..self.dim()).filter(|&i| !self.is_clock(i)) {
            out.lower[i] += depth;
            out.open_lower[i] = false;
            if self.has_upper_facet() {
                out.upper[i] -= depth;
                out.open_upper[i] = false;
            }
        }
        out.validated()
    }

    /// Member `Ω_ζ` of the attached nested family, anchored at `t1`.
    pub fn family_member(&self, zeta: f64, t1: f64) -> Result<Self> {
        let family = self
            .nested_family
            .ok_or_else(|| Error::Region("domain has no nested family".into()))?;
        if !(zeta > 0.0 && zeta <= 0.5) {
            return Err(Error::Parameter(format!("family parameter ζ must lie in (0, 1/2], got {zeta}")));
        }
        let mut out = match family {
            NestedFamily::Shrink => self.shrink(zeta)?,
            NestedFamily::LowerBound => {
                let mut m = self.clone();
                for i in (0..self.dim()).filter(|&i| !self.is_clock(i)) {
                    m.lower[i] = self.lower[i] + zeta;
                    m.open_lower[i] = false;
                }
                m.validated()?
            }
            NestedFamily::ClockOffset { axis } => {
                let mut m = self.clone();
                let span = self.upper[axis] - self.lower[axis];
                // The window end stays put so that members nest.
                m.lower[axis] = t1 + zeta;
                m.upper[axis] = t1 + span;
                m.open_lower[axis] = false;
                m.validated()?
            }
        };
        out.nested_family = None;
        Ok(out)
    }

    /// Largest `ζ` with `x ∈ Ω_ζ` (for the attached family), not capped.
    pub fn family_depth(&self, x: &[f64], t1: f64) -> Result<f64> {
        let family = self
            .nested_family
            .ok_or_else(|| Error::Region("domain has no nested family".into()))?;
        Ok(match family {
            NestedFamily::Shrink => self.boundary_distance(x),
            NestedFamily::LowerBound => (0..self.dim())
                .filter(|&i| !self.is_clock(i))
                .map(|i| x[i] - self.lower[i])
                .fold(f64::INFINITY, f64::min),
            NestedFamily::ClockOffset { axis } => x[axis] - t1,
        })
    }

    /// Box inclusion `self ⊆ other` on every axis (clock axes included).
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                let upper_ok = other.kind == DomainKind::PositiveOrthantBox && !other.is_clock(i)
                    || self.upper[i] <= other.upper[i];
                self.lower[i] >= other.lower[i] && upper_ok
            })
    }
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| {
                if k == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}
