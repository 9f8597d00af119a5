//! The Catlin-type Finsler metric `K̃`, curve lengths and distance
//! upper bounds.

mod ball;
mod estimator;
mod frame;
mod graph;
mod quadrature;

pub use ball::{ball_kobayashi_distance, ball_kobayashi_metric};
pub use estimator::{DistanceEstimate, DistanceEstimator, DistanceMatrix, EstimatorConfig, Method};
pub use frame::{level_expr_direct, FieldFrame, FramePair, LevelCoeff, MEMBERSHIP, PATCH_EPS};
pub use quadrature::{curve_length, segment_length, QuadratureConfig};

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{split_with_nu, Domain, GeomError, TangentSplit};
use crate::point::C2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("frame conditioning: denominator excess power {excess} exceeds {limit}")]
    Conditioning { excess: u32, limit: u32 },
    #[error("near-singular frame denominator {modulus:e} at {point}; switch frames")]
    PatchBoundary { point: C2, modulus: f64 },
    #[error("no frame of the cover contains {0}")]
    NoFrame(C2),
    #[error("point {0} is not in the domain")]
    NotInterior(C2),
    #[error("curve exits the domain on segment {segment} near {point} (r-distance {rho:e})")]
    ExitsDomain { segment: usize, point: C2, rho: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl Domain {
    /// The two-frame cover, built on first use.
    pub fn frames(&self) -> Result<Arc<FramePair>, MetricError> {
        self.frames.get_or_init(|| FramePair::build(self).map(Arc::new)).clone()
    }
}

/// Everything `K̃(z, ·)` needs at a fixed base point.
#[derive(Clone, Debug, Serialize)]
pub struct MetricAt {
    pub point: C2,
    /// Distance to the boundary.
    pub delta: f64,
    /// `min(δ, ε₀)`.
    pub delta_hat: f64,
    pub foot: C2,
    /// Point at which the frame coefficients are evaluated.
    pub eval_point: C2,
    /// `∂̄r(π(z))`, spanning the complex normal line.
    pub nu: C2,
    /// `Σ_l (C_l/δ̂)^{1/l}`, maximised over the frames containing the
    /// evaluation point.
    pub tangential_weight: f64,
    /// `C_l` of the frame attaining the maximum, `l = 2..=m`.
    pub c_l: Vec<f64>,
    pub frame_swapped: bool,
}

impl MetricAt {
    pub fn new(dom: &Domain, z: &C2) -> Result<MetricAt, MetricError> {
        let f = dom.foot(z)?;
        if !f.inside || f.distance == 0.0 {
            return Err(MetricError::NotInterior(*z));
        }
        let eps0 = dom.eps0();
        let delta = f.distance;
        let delta_hat = delta.min(eps0);
        let jet = dom.jet(&f.point);
        let nu = jet.dbar();
        let eval_point = if delta < eps0 { *z } else { f.point - nu * (eps0 / nu.norm()) };
        let frames = dom.frames()?;
        let rz = dom.rz(&eval_point);
        let mut best: Option<(f64, Vec<f64>, bool)> = None;
        for fr in &frames.frames {
            if !fr.contains(&rz) {
                continue;
            }
            let cl = fr.c_l(&eval_point)?;
            let w: f64 = cl.iter().enumerate().map(|(i, c)| (c / delta_hat).powf(1.0 / (i + 2) as f64)).sum();
            if best.as_ref().map_or(true, |b| w > b.0) {
                best = Some((w, cl, fr.swapped));
            }
        }
        let (tangential_weight, c_l, frame_swapped) = best.ok_or(MetricError::NoFrame(eval_point))?;
        Ok(MetricAt { point: *z, delta, delta_hat, foot: f.point, eval_point, nu, tangential_weight, c_l, frame_swapped })
    }

    pub fn split(&self, x: &C2) -> Result<TangentSplit, MetricError> {
        Ok(split_with_nu(&self.foot, &self.nu, x)?)
    }

    /// `|X_N|/δ̂ + |X_H|·Σ_l (C_l/δ̂)^{1/l}`.
    pub fn value(&self, x: &C2) -> f64 {
        let n2 = self.nu.norm_sqr();
        let xn = self.nu.scale(x.hdot(self.nu) / n2);
        let xh = *x - xn;
        xn.norm() / self.delta_hat + xh.norm() * self.tangential_weight
    }
}

/// `K̃(z, X)`.
pub fn catlin_metric(dom: &Domain, z: &C2, x: &C2) -> Result<f64, MetricError> {
    Ok(MetricAt::new(dom, z)?.value(x))
}
