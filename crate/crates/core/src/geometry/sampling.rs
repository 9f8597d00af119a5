use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mesh::ray_crossing, normal_from_jet, BoundingBox, Domain};
use crate::point::C2;

/// Generator for the `i`-th sample of a seeded family. Sample `i` does not
/// depend on how many samples are drawn, so doubling a sample set keeps
/// the original samples as a prefix.
pub fn index_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

pub(crate) fn uniform_in_box(b: &BoundingBox, rng: &mut impl Rng) -> C2 {
    let mut r = [0.0; 4];
    for k in 0..4 {
        r[k] = rng.random_range(b.lo[k]..=b.hi[k]);
    }
    C2::from_real(r)
}

pub(crate) fn gaussian_direction(rng: &mut impl Rng) -> C2 {
    loop {
        let v: [f64; 4] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let d = C2::from_real(v);
        let n = d.norm();
        if n > 1e-6 {
            return d * (1.0 / n);
        }
    }
}

/// Boundary point hit by a random ray from the box centre.
pub(crate) fn boundary_point(dom: &Domain, rng: &mut impl Rng) -> C2 {
    let c = dom.spec.bbox.center();
    loop {
        let d = gaussian_direction(rng);
        if let Some(p) = ray_crossing(dom, &c, &d) {
            return p;
        }
    }
}

pub fn sample_boundary(dom: &Domain, n: usize, seed: u64) -> Vec<C2> {
    (0..n).map(|i| boundary_point(dom, &mut index_rng(seed, i as u64))).collect()
}

/// Interior point built on the inward normal fibre of a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarPoint {
    pub point: C2,
    pub foot: C2,
    pub normal: C2,
    pub delta: f64,
}

impl CollarPoint {
    pub fn at_depth(dom: &Domain, foot: C2, delta: f64) -> CollarPoint {
        let normal = normal_from_jet(&dom.jet(&foot)).expect("validated domain has a nondegenerate boundary");
        CollarPoint { point: foot - normal * delta, foot, normal, delta }
    }
}

/// `n` collar points `p − δ·n(p)` with `δ` log-uniform in `range`.
pub fn sample_collar(dom: &Domain, n: usize, range: (f64, f64), seed: u64) -> Vec<CollarPoint> {
    (0..n)
        .map(|i| {
            let mut rng = index_rng(seed, i as u64);
            let p = boundary_point(dom, &mut rng);
            let delta = log_uniform(&mut rng, range);
            CollarPoint::at_depth(dom, p, delta)
        })
        .collect()
}

pub(crate) fn log_uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return lo;
    }
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;

    #[test]
    fn collar_depths_are_exact() {
        let b = load_domain("ball").unwrap();
        let c = sample_collar(&b, 1, (0.1, 0.1), 42);
        assert!((b.signed_distance(&c[0].point).unwrap() + 0.1).abs() < 1e-9);
        let e = load_domain("egg2").unwrap();
        for c in sample_collar(&e, 100, (1e-3, 1e-1), 9) {
            assert!(c.delta >= 1e-3 && c.delta <= 1e-1);
            let d = -e.signed_distance(&c.point).unwrap();
            assert!((d - c.delta).abs() < 1e-8);
        }
    }

    #[test]
    fn seeded_and_prefix_stable() {
        let e = load_domain("egg2").unwrap();
        let a = sample_collar(&e, 10, (1e-3, 1e-1), 5);
        let b = sample_collar(&e, 20, (1e-3, 1e-1), 5);
        assert_eq!(a[..], b[..10]);
        assert_eq!(sample_boundary(&e, 5, 1), sample_boundary(&e, 5, 1));
        assert_ne!(sample_boundary(&e, 5, 1), sample_boundary(&e, 5, 2));
    }
}
