//! Adaptive Gauss–Legendre quadrature of `K̃`-lengths of polylines.

use serde::{Deserialize, Serialize};

use super::{MetricAt, MetricError};
use crate::geometry::Domain;
use crate::point::C2;

const GL8_X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL8_W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

/// Nodes closer to the boundary than this (in `r`) count as leaving `Ω`.
const EXIT_RHO: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// A piece is bisected while `max δ̂ / min δ̂` over its nodes exceeds this.
    pub depth_ratio: f64,
    /// Agreement between a piece and its two halves, relative to the first
    /// estimate of the whole segment.
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl QuadratureConfig {
    pub fn accurate() -> Self {
        QuadratureConfig { depth_ratio: 1.5, rel_tol: 1e-6, max_depth: 48 }
    }

    /// Cheap setting for ranking candidate curves.
    pub fn trial() -> Self {
        QuadratureConfig { depth_ratio: 4.0, rel_tol: 5e-3, max_depth: 30 }
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self::accurate()
    }
}

struct Piece {
    value: f64,
    dmin: f64,
    dmax: f64,
}

struct Segment<'a> {
    dom: &'a Domain,
    a: C2,
    v: C2,
    index: usize,
}

impl Segment<'_> {
    fn integrand(&self, t: f64) -> Result<(f64, f64), MetricError> {
        let z = self.a + self.v * t;
        let rho = self.dom.r(&z);
        if !(rho < EXIT_RHO) {
            return Err(MetricError::ExitsDomain { segment: self.index, point: z, rho });
        }
        let at = MetricAt::new(self.dom, &z).map_err(|e| match e {
            MetricError::NotInterior(p) => MetricError::ExitsDomain { segment: self.index, point: p, rho },
            e => e,
        })?;
        Ok((at.value(&self.v), at.delta_hat))
    }

    fn gl8(&self, t0: f64, t1: f64) -> Result<Piece, MetricError> {
        let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        let mut value = 0.0;
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for (x, w) in GL8_X.iter().zip(GL8_W) {
            for t in [mid - half * x, mid + half * x] {
                let (f, d) = self.integrand(t)?;
                value += w * f;
                dmin = dmin.min(d);
                dmax = dmax.max(d);
            }
        }
        Ok(Piece { value: value * half, dmin, dmax })
    }

    /// `tol` is absolute: a kink or seam in the integrand would never meet a
    /// tolerance relative to the local piece.
    fn adapt(&self, t0: f64, t1: f64, whole: Piece, depth: u32, tol: f64, cfg: &QuadratureConfig) -> Result<f64, MetricError> {
        if depth >= cfg.max_depth {
            return Ok(whole.value);
        }
        let tm = 0.5 * (t0 + t1);
        let left = self.gl8(t0, tm)?;
        let right = self.gl8(tm, t1)?;
        let sum = left.value + right.value;
        if whole.dmax <= cfg.depth_ratio * whole.dmin && (sum - whole.value).abs() <= tol {
            return Ok(sum);
        }
        Ok(self.adapt(t0, tm, left, depth + 1, tol, cfg)? + self.adapt(tm, t1, right, depth + 1, tol, cfg)?)
    }
}

/// `∫_0^1 K̃(a + t(b−a), b−a) dt`; `index` labels exit errors.
pub fn segment_length(dom: &Domain, a: &C2, b: &C2, cfg: &QuadratureConfig, index: usize) -> Result<f64, MetricError> {
    if a == b {
        return Ok(0.0);
    }
    let seg = Segment { dom, a: *a, v: *b - *a, index };
    let whole = seg.gl8(0.0, 1.0)?;
    // the first estimate is within a factor of a few even for curves that
    // hug the boundary, where 1/δ dominates
    let tol = cfg.rel_tol * whole.value;
    seg.adapt(0.0, 1.0, whole, 0, tol, cfg)
}

/// Sum of the segment lengths of a polyline.
pub fn curve_length(dom: &Domain, polyline: &[C2], cfg: &QuadratureConfig) -> Result<f64, MetricError> {
    let mut total = 0.0;
    for (i, w) in polyline.windows(2).enumerate() {
        total += segment_length(dom, &w[0], &w[1], cfg, i)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;
    use num_complex::Complex64;

    fn z2(x: f64) -> C2 {
        C2::new(Complex64::new(0.0, 0.0), Complex64::new(x, 0.0))
    }

    #[test]
    fn normal_segment_is_log_ratio() {
        let b = load_domain("ball").unwrap();
        let cfg = QuadratureConfig::accurate();
        let l = segment_length(&b, &z2(0.9), &z2(0.99), &cfg, 0).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-6 * 10f64.ln(), "{l}");
        let deep = segment_length(&b, &z2(0.5), &z2(0.9), &cfg, 0).unwrap();
        // δ̂ = 0.25 up to z2 = 0.75, then 1/δ
        let expect = 0.25 / 0.25 + (0.25f64 / 0.1).ln();
        assert!((deep - expect).abs() < 1e-6, "{deep} vs {expect}");
    }

    #[test]
    fn degenerate_and_additive() {
        let e = load_domain("egg2").unwrap();
        let cfg = QuadratureConfig::accurate();
        let a = C2::from_real([0.5, 0.1, 0.6, -0.1]);
        assert_eq!(curve_length(&e, &[a, a], &cfg).unwrap(), 0.0);
        assert_eq!(curve_length(&e, &[a], &cfg).unwrap(), 0.0);
        let b = C2::from_real([0.7, 0.0, 0.3, 0.2]);
        let c = C2::from_real([0.2, -0.4, 0.5, 0.5]);
        let whole = curve_length(&e, &[a, b, c], &cfg).unwrap();
        let parts = segment_length(&e, &a, &b, &cfg, 0).unwrap() + segment_length(&e, &b, &c, &cfg, 1).unwrap();
        assert_eq!(whole, parts);
        let reversed = curve_length(&e, &[c, b, a], &cfg).unwrap();
        assert!((whole - reversed).abs() < 1e-6 * whole);
    }

    #[test]
    fn leaving_the_domain_is_reported() {
        let b = load_domain("ball").unwrap();
        let err = curve_length(&b, &[z2(0.0), z2(0.5), z2(1.2)], &QuadratureConfig::accurate()).unwrap_err();
        assert!(matches!(err, MetricError::ExitsDomain { segment: 1, .. }), "{err:?}");
    }

    #[test]
    fn trial_is_close_to_accurate() {
        let b = load_domain("egg2").unwrap();
        let p = C2::from_real([0.9, 0.0, 0.2, 0.1]);
        let q = C2::from_real([0.1, 0.8, -0.3, 0.1]);
        let acc = segment_length(&b, &p, &q, &QuadratureConfig::accurate(), 0).unwrap();
        let tr = segment_length(&b, &p, &q, &QuadratureConfig::trial(), 0).unwrap();
        assert!((acc - tr).abs() < 0.02 * acc, "{acc} {tr}");
    }
}
