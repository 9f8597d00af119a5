use num_complex::Complex64;
use rand::Rng;

use crate::geometry::{boundary_point, gaussian_direction, index_rng, log_uniform, CollarPoint, Domain};
use crate::point::C2;

// stream offsets keep the families of one seed independent
const POOL_STREAM: u64 = 1 << 40;
const QUAD_STREAM: u64 = 2 << 40;

/// Boundary point near `base`: the foot of `base + ε·u` for a random unit
/// `u`, or `base` itself if that foot cannot be computed.
pub(crate) fn nearby_foot(dom: &Domain, base: &C2, eps: f64, rng: &mut impl Rng) -> C2 {
    let u = gaussian_direction(rng);
    dom.foot(&(*base + u * eps)).map(|f| f.point).unwrap_or(*base)
}

/// Levi form of `r` on the unit complex tangent at `p`, scaled by `|∂r|`
/// so that it does not depend on the normalisation of `r`.
pub(crate) fn levi_form(dom: &Domain, p: &C2) -> f64 {
    let rz = dom.rz(p);
    let g = (rz[0].norm_sqr() + rz[1].norm_sqr()).sqrt();
    let l = [-rz[1], rz[0]];
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..2 {
        for k in 0..2 {
            s += dom.rzzb_poly(j, k).eval(p) * l[j] * l[k].conj();
        }
    }
    s.re / (g * g * g)
}

/// The most weakly pseudoconvex of `k` random boundary points. Constants
/// that are uniform over the boundary tend to be attained near the
/// degenerate set, which uniform sampling rarely visits.
pub(crate) fn levi_biased_point(dom: &Domain, k: usize, rng: &mut impl Rng) -> C2 {
    (0..k.max(1))
        .map(|_| boundary_point(dom, rng))
        .map(|p| (levi_form(dom, &p).abs(), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .expect("k ≥ 1")
}

/// `clusters × per` collar points. Each cluster sits around a random
/// boundary point, with feet at log-uniform offsets in `[1e-3, 0.3]` and
/// depths log-uniform in `range`, so the pool mixes near-boundary clusters
/// with widely separated points.
pub fn clustered_pool(dom: &Domain, clusters: usize, per: usize, range: (f64, f64), seed: u64) -> Vec<CollarPoint> {
    let mut out = Vec::with_capacity(clusters * per);
    for c in 0..clusters {
        let centre = boundary_point(dom, &mut index_rng(seed, c as u64));
        for j in 0..per {
            let mut rng = index_rng(seed, POOL_STREAM + (c * per + j) as u64);
            let eps = log_uniform(&mut rng, (1e-3, 0.3));
            let foot = if j == 0 { centre } else { nearby_foot(dom, &centre, eps, &mut rng) };
            let delta = log_uniform(&mut rng, range);
            out.push(CollarPoint::at_depth(dom, foot, delta));
        }
    }
    out
}

/// `n` index quadruples into a pool of size `len`. Quadruple `i` depends
/// only on `(seed, i)`, so a doubled scan contains the smaller one.
pub fn quadruples(len: usize, n: usize, seed: u64) -> Vec<[usize; 4]> {
    (0..n)
        .map(|i| {
            let mut rng = index_rng(seed, QUAD_STREAM + i as u64);
            [0; 4].map(|_| rng.random_range(0..len))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;

    #[test]
    fn pool_is_seeded_and_in_range() {
        let b = load_domain("ball").unwrap();
        let p = clustered_pool(&b, 3, 4, (1e-3, 1e-1), 5);
        assert_eq!(p.len(), 12);
        assert_eq!(p, clustered_pool(&b, 3, 4, (1e-3, 1e-1), 5));
        for c in &p {
            assert!(c.delta >= 1e-3 && c.delta <= 1e-1);
            assert!((c.foot.norm() - 1.0).abs() < 1e-9);
        }
        let e = load_domain("egg2").unwrap();
        let w = levi_biased_point(&e, 64, &mut index_rng(1, 0));
        // the weakly pseudoconvex circle of egg2 is z2 = 0
        assert!(w.0[1].norm() < 0.3, "{w}");
        assert!(levi_form(&e, &w).abs() < levi_form(&e, &C2::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))));
        // members of a cluster stay near its centre
        assert!(p[1].foot.dist(p[0].foot) < 0.7);
        let q = quadruples(12, 20, 3);
        assert_eq!(q[..10], quadruples(12, 10, 3)[..]);
        assert!(q.iter().flatten().all(|&i| i < 12));
    }
}
