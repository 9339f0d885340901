use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::{BaseNorm, MeasureSpec};
use crate::models::{bio_contraction_eps, bio_weight, BioParams};

/// A norm indexed by the nested-family parameter `ζ`, converging to a limit
/// norm as `ζ → 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NormFamily {
    /// The same norm for every `ζ`.
    Fixed { norm: MeasureSpec },
    /// `|D_{ε(ζ)} y|₁` for the bio chain, with `ε(ζ)` the largest grid value
    /// that makes `μ_{1,D_ε}(J) ≤ −ε/2` on `{xₙ ≥ ζ}`.
    BioDiagonal { params: BioParams },
}

impl NormFamily {
    pub fn fixed(norm: MeasureSpec) -> Self {
        Self::Fixed { norm }
    }

    pub fn bio(params: BioParams) -> Self {
        Self::BioDiagonal { params }
    }

    pub fn at(&self, zeta: f64) -> Result<MeasureSpec> {
        match self {
            Self::Fixed { norm } => Ok(norm.clone()),
            Self::BioDiagonal { params } => {
                let eps = bio_contraction_eps(params, zeta)?;
                MeasureSpec::weighted(BaseNorm::L1, bio_weight(params, eps)?)
            }
        }
    }

    pub fn limit(&self) -> Result<MeasureSpec> {
        match self {
            Self::Fixed { norm } => Ok(norm.clone()),
            Self::BioDiagonal { params } => MeasureSpec::weighted(BaseNorm::L1, bio_weight(params, 0.0)?),
        }
    }

    /// `max | |y|_ζ / |y| − 1 |` over the given vectors.
    pub fn deviation(&self, zeta: f64, vectors: &[Vec<f64>]) -> Result<f64> {
        let (at, lim) = (self.at(zeta)?, self.limit()?);
        let mut worst: f64 = 0.0;
        for y in vectors {
            let base = lim.vector_norm(y)?;
            if base > 0.0 {
                worst = worst.max((at.vector_norm(y)? / base - 1.0).abs());
            }
        }
        Ok(worst)
    }

    pub fn label(&self, zeta: f64) -> Result<String> {
        Ok(self.at(zeta)?.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bio_family_converges() {
        let p = BioParams::new(vec![0.5, 0.5], 2.0).unwrap();
        let fam = NormFamily::bio(p);
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, -1.0]];
        let devs: Vec<f64> = [0.5, 0.1, 0.01, 1e-3].iter().map(|&z| fam.deviation(z, &basis).unwrap()).collect();
        assert!(devs.windows(2).all(|w| w[1] <= w[0]), "{devs:?}");
        assert!(devs[3] < 1e-2);
        assert!(fam.at(0.0).is_err());
        let fixed = NormFamily::fixed(MeasureSpec::l1());
        assert_eq!(fixed.deviation(0.3, &basis).unwrap(), 0.0);
    }
}
