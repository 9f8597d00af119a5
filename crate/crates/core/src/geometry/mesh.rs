use num_complex::Complex64;

use super::Domain;
use crate::point::C2;

pub(crate) const MESH_POINTS: usize = 10_000;

/// Real root of `x⁴ = x + 1`, the generator of the three-dimensional R-sequence.
/// (The plastic number would give `1/g² + 1/g³ = 1` and collapse a coordinate.)
const GEN3: f64 = 1.220_744_084_605_759_5;

/// Quasi-uniform direction on S³ from the `i`-th term of the R-sequence
/// mapped through Hopf coordinates.
pub fn kronecker_sphere_direction(i: usize) -> C2 {
    let a = [1.0 / GEN3, 1.0 / (GEN3 * GEN3), 1.0 / (GEN3 * GEN3 * GEN3)];
    let u: Vec<f64> = a.iter().map(|ak| (0.5 + ak * i as f64).fract()).collect();
    let tau = std::f64::consts::TAU;
    let s = u[2].sqrt();
    let c = (1.0 - u[2]).sqrt();
    C2::new(Complex64::from_polar(c, tau * u[0]), Complex64::from_polar(s, tau * u[1]))
}

/// Dense sample of the boundary, one point per ray from the box centre.
pub struct Mesh {
    pub points: Vec<C2>,
    /// Rays that left the box without crossing the zero set.
    pub missed: usize,
    /// Largest nearest-neighbour gap, a proxy for the covering radius.
    pub spacing: f64,
    clusters: Vec<Cluster>,
}

/// One level of a ball tree: a centre, a radius and its members.
struct Cluster {
    center: C2,
    radius: f64,
    members: Vec<usize>,
}

impl Mesh {
    pub fn build(dom: &Domain, n: usize) -> Mesh {
        let c = dom.spec.bbox.center();
        let mut points = Vec::with_capacity(n);
        let mut missed = 0;
        for i in 0..n {
            let d = kronecker_sphere_direction(i);
            match ray_crossing(dom, &c, &d) {
                Some(p) => points.push(p),
                None => missed += 1,
            }
        }
        let n_centers = ((points.len() as f64).sqrt() as usize).max(1);
        let step = (points.len() / n_centers).max(1);
        let mut clusters: Vec<Cluster> = points
            .iter()
            .step_by(step)
            .map(|p| Cluster { center: *p, radius: 0.0, members: Vec::new() })
            .collect();
        for (i, p) in points.iter().enumerate() {
            let (j, d) = clusters
                .iter()
                .enumerate()
                .map(|(j, c)| (j, c.center.dist(*p)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one cluster");
            clusters[j].members.push(i);
            clusters[j].radius = clusters[j].radius.max(d);
        }
        clusters.retain(|c| !c.members.is_empty());
        let mut mesh = Mesh { points, missed, spacing: 0.0, clusters };
        mesh.spacing = (0..mesh.points.len())
            .map(|i| mesh.nearest_filtered(&mesh.points[i], 1, Some(i)).first().map_or(0.0, |b| b.1))
            .fold(0.0, f64::max);
        mesh
    }

    /// Indices of the `k` mesh points nearest to `x`, nearest first.
    pub fn nearest(&self, x: &C2, k: usize) -> Vec<(usize, f64)> {
        self.nearest_filtered(x, k, None)
    }

    fn nearest_filtered(&self, x: &C2, k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        let mut order: Vec<(f64, usize)> =
            self.clusters.iter().enumerate().map(|(j, c)| (c.center.dist(*x) - c.radius, j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        for (lower, j) in order {
            if best.len() == k && lower > 0.0 && lower * lower > best[k - 1].1 {
                break;
            }
            for &i in &self.clusters[j].members {
                if Some(i) == skip {
                    continue;
                }
                let d2 = (self.points[i] - *x).norm_sqr();
                if best.len() < k || d2 < best[best.len() - 1].1 {
                    let pos = best.partition_point(|(b, e)| *e < d2 || (*e == d2 && *b < i));
                    best.insert(pos, (i, d2));
                    best.truncate(k);
                }
            }
        }
        best.into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }
}

/// First zero of `r` along `c + t·d`, found by bisection; assumes the
/// domain is star-shaped about `c`.
pub(crate) fn ray_crossing(dom: &Domain, c: &C2, d: &C2) -> Option<C2> {
    let tmax = dom.spec.bbox.exit_time(c, d);
    if !tmax.is_finite() || dom.r(&(*c + *d * tmax)) <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, tmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dom.r(&(*c + *d * mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (plo, phi) = (*c + *d * lo, *c + *d * hi);
    Some(if dom.r(&plo).abs() <= dom.r(&phi).abs() { plo } else { phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;

    #[test]
    fn directions_are_unit_and_spread() {
        let mut mean = [0.0; 4];
        for i in 0..4000 {
            let d = kronecker_sphere_direction(i);
            assert!((d.norm() - 1.0).abs() < 1e-14);
            for (m, v) in mean.iter_mut().zip(d.to_real()) {
                *m += v / 4000.0;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");
    }

    #[test]
    fn mesh_points_lie_on_boundary() {
        let d = load_domain("egg3").unwrap();
        let m = d.mesh();
        assert_eq!(m.missed, 0);
        assert_eq!(m.points.len(), MESH_POINTS);
        for p in m.points.iter().step_by(97) {
            assert!(d.r(p).abs() < 1e-12);
        }
        assert!(m.spacing > 0.0 && m.spacing < 0.3, "{}", m.spacing);
    }

    #[test]
    fn clustered_search_matches_brute_force() {
        let d = load_domain("egg2").unwrap();
        let m = d.mesh();
        for i in 0..50 {
            let x = kronecker_sphere_direction(7919 + 13 * i) * (0.05 + 0.03 * i as f64);
            let fast = m.nearest(&x, 3);
            let mut brute: Vec<(usize, f64)> = m.points.iter().enumerate().map(|(j, p)| (j, p.dist(x))).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(fast.iter().map(|b| b.0).collect::<Vec<_>>(), brute[..3].iter().map(|b| b.0).collect::<Vec<_>>());
        }
    }
}
