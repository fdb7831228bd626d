//! Regularizers, mirror maps, convex conjugates and the Fenchel coupling.

use crate::error::{Error, Result};
use crate::point::{DualVector, PrimalPoint};
use crate::region::{euclidean_argmax, FeasibleRegion, RegionKind};
use crate::vecops::{dot, norm_l1, norm_l2, norm_linf, sub};
use serde::{Deserialize, Serialize};

/// Norm pairing between the primal space and its dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L2,
    L1,
}

impl Norm {
    /// Primal norm.
    pub fn primal(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm_l2(v),
            Norm::L1 => norm_l1(v),
        }
    }

    /// Dual norm: `sup { <v, x> : ||x|| <= 1 }`. L2 is self-dual; the dual
    /// of L1 is the max-norm.
    pub fn dual(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm_l2(v),
            Norm::L1 => norm_linf(v),
        }
    }
}

/// Strongly convex penalty function inducing a mirror map.
///
/// `Euclidean` is `h(x) = ||x||^2 / 2`, 1-strongly convex w.r.t. L2, defined
/// on every region. `Entropic` is the negative Gibbs entropy
/// `h(x) = sum x_i log x_i`, 1-strongly convex w.r.t. L1, restricted to the
/// unit simplex (its natural domain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularizer {
    Euclidean,
    Entropic,
}

impl Regularizer {
    /// Strong-convexity modulus K with respect to the paired norm.
    pub fn strong_convexity(self) -> f64 {
        1.0
    }

    pub fn paired_norm(self) -> Norm {
        match self {
            Regularizer::Euclidean => Norm::L2,
            Regularizer::Entropic => Norm::L1,
        }
    }

    pub fn supports(self, region: &FeasibleRegion) -> bool {
        match self {
            Regularizer::Euclidean => true,
            Regularizer::Entropic => matches!(region.kind(), RegionKind::Simplex { .. }),
        }
    }

    fn require_support(self, region: &FeasibleRegion) -> Result<()> {
        if self.supports(region) {
            Ok(())
        } else {
            Err(Error::UnsupportedPairing(format!(
                "{self:?} regularizer is only defined on the simplex"
            )))
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regularizer::Euclidean => "euclidean",
            Regularizer::Entropic => "entropic",
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Regularizer::Euclidean),
            "entropic" | "entropy" => Ok(Regularizer::Entropic),
            other => Err(Error::UnsupportedPairing(format!(
                "unknown regularizer `{other}`"
            ))),
        }
    }
}

/// `h(x)`. The entropic value uses the `0 log 0 = 0` convention on the
/// simplex boundary.
pub fn regularizer_value(
    h: Regularizer,
    region: &FeasibleRegion,
    x: &PrimalPoint,
) -> Result<f64> {
    h.require_support(region)?;
    if !region.contains(x.coords()) {
        return Err(Error::Infeasible {
            detail: format!("{:?}", x.coords()),
        });
    }
    Ok(match h {
        Regularizer::Euclidean => 0.5 * dot(x.coords(), x.coords()),
        Regularizer::Entropic => x
            .coords()
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum(),
    })
}

/// Mirror map `Q(y) = argmax_{x in X} { <y, x> - h(x) }`.
///
/// Euclidean: the closest-point projection of `y` onto the region.
/// Entropic: the logit map, computed with max-subtraction and renormalized
/// to sum exactly one.
pub fn mirror_map(h: Regularizer, region: &FeasibleRegion, y: &DualVector) -> Result<PrimalPoint> {
    h.require_support(region)?;
    if y.dim() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: y.dim(),
        });
    }
    match h {
        Regularizer::Euclidean => euclidean_argmax(region, y),
        Regularizer::Entropic => {
            let max = y.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut w: Vec<f64> = y.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= total;
            }
            Ok(PrimalPoint::new_unchecked(w))
        }
    }
}

/// Convex conjugate `h*(y) = max_{x in X} { <y, x> - h(x) }`, evaluated as
/// `<y, Q(y)> - h(Q(y))`.
pub fn conjugate_value(h: Regularizer, region: &FeasibleRegion, y: &DualVector) -> Result<f64> {
    let q = mirror_map(h, region, y)?;
    Ok(dot(y.coords(), q.coords()) - regularizer_value(h, region, &q)?)
}

/// Fenchel coupling `F(p, y) = h(p) + h*(y) - <y, p>`.
///
/// Nonnegative, and zero exactly when `p = Q(y)`.
pub fn fenchel_coupling(
    h: Regularizer,
    region: &FeasibleRegion,
    p: &PrimalPoint,
    y: &DualVector,
) -> Result<f64> {
    let hp = regularizer_value(h, region, p)?;
    let hstar = conjugate_value(h, region, y)?;
    Ok(hp + hstar - dot(y.coords(), p.coords()))
}

/// Setwise coupling `F(S, y) = inf_{p in S} F(p, y)` over a finite generator
/// set of `S`. Exact when `S` itself is finite.
pub fn fenchel_to_set(
    h: Regularizer,
    region: &FeasibleRegion,
    generators: &[Vec<f64>],
    y: &DualVector,
) -> Result<f64> {
    if generators.is_empty() {
        return Err(Error::OutOfRange("empty generator set".into()));
    }
    // h*(y) is shared across generators; evaluate it once.
    let hstar = conjugate_value(h, region, y)?;
    let mut best = f64::INFINITY;
    for g in generators {
        let p = region.check_point(g.clone())?;
        let f = regularizer_value(h, region, &p)? + hstar - dot(y.coords(), p.coords());
        best = best.min(f);
    }
    Ok(best)
}

/// Dual norm of a gradient-space vector under the given pairing.
pub fn dual_norm(v: &DualVector, paired_norm: Norm) -> f64 {
    paired_norm.dual(v.coords())
}

/// Distance from `x` to the generator set in the paired primal norm.
pub fn set_distance(x: &[f64], generators: &[Vec<f64>], norm: Norm) -> f64 {
    generators
        .iter()
        .map(|g| norm.primal(&sub(x, g)))
        .fold(f64::INFINITY, f64::min)
}
