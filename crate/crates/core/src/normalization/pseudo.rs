use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::{BoundaryChart, ChartError};
use crate::geometry::Domain;
use crate::point::C2;

/// `‖P_l‖` at or below this is treated as an exact zero in `τ` and `d′`.
pub const NORM_ACTIVE: f64 = 1e-10;
/// `‖P_l‖` above this makes `l` a candidate for the point type.
pub const TYPE_THRESHOLD: f64 = 1e-8;

fn active(c: &BoundaryChart) -> Result<Vec<(usize, f64)>, ChartError> {
    let act: Vec<(usize, f64)> =
        (2..=c.m).map(|l| (l, c.norm(l))).filter(|(_, n)| *n > NORM_ACTIVE).collect();
    if act.is_empty() {
        return Err(ChartError::NotFiniteType { max_norm: c.norms.iter().cloned().fold(0.0, f64::max) });
    }
    Ok(act)
}

/// `τ(ζ, δ) = min_l (δ/‖P_l‖)^{1/l}` over the active `l`.
pub fn tau(c: &BoundaryChart, delta: f64) -> Result<f64, ChartError> {
    Ok(active(c)?.into_iter().map(|(l, n)| (delta / n).powf(1.0 / l as f64)).fold(f64::INFINITY, f64::min))
}

/// Smallest `l` with `‖P_l‖` above [`TYPE_THRESHOLD`].
pub fn point_type(c: &BoundaryChart) -> Result<usize, ChartError> {
    (2..=c.m).find(|&l| c.norm(l) > TYPE_THRESHOLD).ok_or(ChartError::NotFiniteType {
        max_norm: c.norms.iter().cloned().fold(0.0, f64::max),
    })
}

/// Membership of `y` in the polydisk `Q_δ(ζ)` of chart radius `radius`.
pub fn in_polydisk(c: &BoundaryChart, delta: f64, y: &C2, radius: f64) -> Result<bool, ChartError> {
    if y.dist(c.center) >= radius {
        return Ok(false);
    }
    let w = c.apply(y);
    Ok(w[0].norm() < delta && w[1].norm() < tau(c, delta)?)
}

/// `d′(x, y)` in closed form: `max(|w1|, max_l ‖P_l‖·|w2|^l)` with
/// `w = Φ_x(y)`, or `+∞` beyond the chart radius.
pub fn d_prime(c: &BoundaryChart, y: &C2, radius: f64) -> Result<f64, ChartError> {
    let act = active(c)?;
    if y.dist(c.center) > radius {
        return Ok(f64::INFINITY);
    }
    let w = c.apply(y);
    let w2 = w[1].norm();
    Ok(act.into_iter().map(|(l, n)| n * w2.powi(l as i32)).fold(w[0].norm(), f64::max))
}

/// `inf {δ : y ∈ Q_δ(x)}` by bisection on the membership predicate.
pub fn d_prime_bisection(c: &BoundaryChart, y: &C2, radius: f64) -> Result<f64, ChartError> {
    active(c)?;
    if y.dist(c.center) > radius {
        return Ok(f64::INFINITY);
    }
    if y.dist(c.center) == 0.0 {
        return Ok(0.0);
    }
    // bracket on a log scale: lo outside, hi inside
    let mut hi = 1.0;
    while !in_polydisk(c, hi, y, f64::INFINITY)? {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    let mut lo = hi;
    while in_polydisk(c, lo, y, f64::INFINITY)? {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(0.0);
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if in_polydisk(c, mid, y, f64::INFINITY)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `d′(x, y)`.
    Dprime,
    /// `|x − y|`.
    Euclid,
    /// One of the points is outside the collar.
    Unit,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoDistValue {
    pub value: f64,
    pub branch: Branch,
    /// `|x − y| ≤ R`.
    pub chart_valid: bool,
}

impl Domain {
    /// Distance to the boundary when `z` lies in the collar `|ρ(z)| < ε₀`.
    pub fn collar_depth(&self, z: &C2) -> Result<Option<f64>, ChartError> {
        let f = self.foot(z)?;
        Ok((f.distance < self.eps0()).then_some(f.distance))
    }
}

/// A point with the data `D` needs from it: depth, collar membership and
/// (built on first use as a first argument) its chart. Precomputing these
/// makes pairwise tables cheap.
#[derive(Clone, Debug)]
pub struct PseudoPoint {
    pub point: C2,
    /// Distance to the boundary.
    pub delta: f64,
    pub inside: bool,
    collar: bool,
    chart: OnceLock<Arc<BoundaryChart>>,
}

impl PseudoPoint {
    pub fn new(dom: &Domain, z: &C2) -> Result<PseudoPoint, ChartError> {
        let f = dom.foot(z)?;
        Ok(PseudoPoint { point: *z, delta: f.distance, inside: f.inside, collar: f.distance < dom.eps0(), chart: OnceLock::new() })
    }

    pub fn in_collar(&self) -> bool {
        self.collar
    }

    fn chart(&self, dom: &Domain) -> Result<&BoundaryChart, ChartError> {
        if let Some(c) = self.chart.get() {
            return Ok(c);
        }
        let c = dom.chart(&self.point)?;
        Ok(self.chart.get_or_init(|| c))
    }
}

/// The pseudodistance `D(x, y)`: `min(d′, |x−y|)` on the collar, and the
/// discrete metric elsewhere.
pub fn pseudodistance(dom: &Domain, x: &C2, y: &C2) -> Result<PseudoDistValue, ChartError> {
    if x == y {
        return Ok(PseudoDistValue { value: 0.0, branch: Branch::Zero, chart_valid: true });
    }
    pseudodistance_between(dom, &PseudoPoint::new(dom, x)?, &PseudoPoint::new(dom, y)?)
}

pub fn pseudodistance_between(dom: &Domain, x: &PseudoPoint, y: &PseudoPoint) -> Result<PseudoDistValue, ChartError> {
    let e = x.point.dist(y.point);
    let chart_valid = e <= dom.chart_radius();
    if e == 0.0 {
        return Ok(PseudoDistValue { value: 0.0, branch: Branch::Zero, chart_valid });
    }
    if !(x.in_collar() && y.in_collar()) {
        return Ok(PseudoDistValue { value: 1.0, branch: Branch::Unit, chart_valid });
    }
    let dp = d_prime(x.chart(dom)?, &y.point, dom.chart_radius())?;
    Ok(if dp <= e {
        PseudoDistValue { value: dp, branch: Branch::Dprime, chart_valid }
    } else {
        PseudoDistValue { value: e, branch: Branch::Euclid, chart_valid }
    })
}

/// `g(x, y) = 2 log((D(x,y) + δ(x)∨δ(y)) / √(δ(x)δ(y)))`.
pub fn g_function(dom: &Domain, x: &C2, y: &C2) -> Result<f64, ChartError> {
    let px = PseudoPoint::new(dom, x)?;
    let py = PseudoPoint::new(dom, y)?;
    g_between(dom, &px, &py)
}

pub fn g_between(dom: &Domain, x: &PseudoPoint, y: &PseudoPoint) -> Result<f64, ChartError> {
    for p in [x, y] {
        if !p.inside || p.delta == 0.0 {
            return Err(ChartError::NotInterior(p.point));
        }
    }
    let d = pseudodistance_between(dom, x, y)?.value;
    Ok(g_from_parts(d, x.delta, y.delta))
}

pub(crate) fn g_from_parts(d: f64, dx: f64, dy: f64) -> f64 {
    2.0 * ((d + dx.max(dy)) / (dx * dy).sqrt()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{load_domain, sample_collar};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tau_laws_and_types() {
        let b = load_domain("ball").unwrap();
        let ch = b.chart(&C2::new(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert!((tau(&ch, 0.01).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(point_type(&ch).unwrap(), 2);
        let e = load_domain("egg2").unwrap();
        let ch = e.chart(&C2::new(c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        assert!((tau(&ch, 1e-4).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(point_type(&ch).unwrap(), 4);
        let ch = e.chart(&C2::new(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert_eq!(point_type(&ch).unwrap(), 2);
    }

    #[test]
    fn polydisk_membership() {
        let b = load_domain("ball").unwrap();
        let ch = b.chart(&C2::new(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        let y = ch.invert(&C2::new(c(0.02, 0.0), c(0.05, 0.0)));
        assert!(!in_polydisk(&ch, 0.01, &y, 0.5).unwrap());
        assert!(in_polydisk(&ch, 0.04, &y, 0.5).unwrap());
        assert!(in_polydisk(&ch, 1e-9, &ch.center, 0.5).unwrap());
    }

    #[test]
    fn d_prime_examples() {
        let e = load_domain("egg2").unwrap();
        let ch = e.chart(&C2::new(c(1.0, 0.0), c(0.0, 0.0))).unwrap();
        let y = ch.invert(&C2::new(c(0.01, 0.0), c(0.1, 0.0)));
        assert!((d_prime(&ch, &y, 0.5).unwrap() - 0.01).abs() < 1e-15);
        let bis = d_prime_bisection(&ch, &y, 0.5).unwrap();
        assert!((bis - 0.01).abs() < 1e-8 * 0.01);
        assert_eq!(d_prime(&ch, &ch.center, 0.5).unwrap(), 0.0);
        let b = load_domain("ball").unwrap();
        let ch = b.chart(&C2::new(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        let y = ch.invert(&C2::new(c(0.0, 0.0), c(0.1, 0.0)));
        assert!((d_prime(&ch, &y, 0.5).unwrap() - 0.01).abs() < 1e-15);
        let far = C2::new(c(0.0, 0.0), c(0.0, 0.0));
        assert!(d_prime(&ch, &far, 0.5).unwrap().is_infinite());
    }

    #[test]
    fn pseudodistance_cases() {
        let b = load_domain("ball").unwrap();
        let x = C2::new(c(0.0, 0.0), c(0.9, 0.0));
        assert_eq!(pseudodistance(&b, &x, &x).unwrap().branch, Branch::Zero);
        let deep = C2::new(c(0.1, 0.0), c(0.2, 0.0));
        let v = pseudodistance(&b, &x, &deep).unwrap();
        assert_eq!((v.value, v.branch), (1.0, Branch::Unit));
        // a collar pair where d' wins: w = (0.05, 0) from x is at Euclidean distance 0.025
        let ch = b.chart(&x).unwrap();
        let y = ch.invert(&C2::new(c(0.05, 0.0), c(0.0, 0.0)));
        let v = pseudodistance(&b, &x, &y).unwrap();
        assert_eq!(v.branch, Branch::Euclid);
        let y = ch.invert(&C2::new(c(0.0, 0.0), c(0.3, 0.0)));
        let v = pseudodistance(&b, &x, &y).unwrap();
        assert_eq!(v.branch, Branch::Dprime);
        assert!((v.value - ch.norm(2) * 0.09).abs() < 1e-12);
    }

    #[test]
    fn g_examples() {
        let b = load_domain("ball").unwrap();
        let x = C2::new(c(0.0, 0.0), c(1.0 - 1e-2, 0.0));
        let y = C2::new(c(0.0, 0.0), c(1.0 - 1e-4, 0.0));
        assert_eq!(g_function(&b, &x, &x).unwrap(), 0.0);
        let d = pseudodistance(&b, &x, &y).unwrap();
        assert!((d.value - 0.0099).abs() < 1e-12);
        let g = g_function(&b, &x, &y).unwrap();
        assert!((g - 2.0 * (0.0199f64 / 1e-3).ln()).abs() < 1e-9);
        assert!((g - 5.98).abs() < 0.005);
    }

    #[test]
    fn closed_form_matches_bisection() {
        for name in ["egg2_perturbed", "egg3"] {
            let d = load_domain(name).unwrap();
            let pts = sample_collar(&d, 40, (1e-4, 0.2), 17);
            for w in pts.windows(2) {
                let ch = d.chart(&w[0].point).unwrap();
                let y = w[0].point + (w[1].point - w[0].point) * 0.05;
                let a = d_prime(&ch, &y, 0.5).unwrap();
                let b = d_prime_bisection(&ch, &y, 0.5).unwrap();
                assert!((a - b).abs() <= 1e-8 * a, "{a} {b}");
            }
        }
    }
}
