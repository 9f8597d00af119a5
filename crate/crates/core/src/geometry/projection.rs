use serde::{Deserialize, Serialize};

use super::{normal_from_jet, Domain, GeomError};
use crate::point::C2;

const MAX_NEWTON: usize = 50;
const COORD_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Newton,
    Mesh,
}

/// Nearest boundary point of `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub point: C2,
    pub distance: f64,
    /// `r(x) < 0`.
    pub inside: bool,
    pub provenance: Provenance,
    /// A second, distinct boundary point lies at (almost) the same distance.
    pub ambiguous: bool,
}

impl Projection {
    pub fn signed_distance(&self) -> f64 {
        if self.inside {
            -self.distance
        } else {
            self.distance
        }
    }
}

impl Domain {
    /// Unique nearest boundary point of `x`.
    ///
    /// Newton is trusted inside the validated unique-projection width;
    /// deeper points go through the boundary mesh, and an ambiguous nearest
    /// point is an error.
    pub fn project_boundary(&self, x: &C2) -> Result<Projection, GeomError> {
        let f = self.foot(x)?;
        if f.ambiguous {
            let cands = self.mesh_candidates(x);
            let (a, b) = (cands[0].0, cands.get(1).map(|c| c.0).unwrap_or(cands[0].0));
            let gap = cands.get(1).map(|c| c.1 - cands[0].1).unwrap_or(0.0);
            return Err(GeomError::Ambiguous { a, b, gap });
        }
        Ok(f)
    }

    /// Signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, x: &C2) -> Result<f64, GeomError> {
        Ok(self.foot(x)?.signed_distance())
    }

    /// Like [`Domain::project_boundary`] but resolves ties to the first
    /// mesh candidate instead of failing.
    pub fn foot(&self, x: &C2) -> Result<Projection, GeomError> {
        if !self.spec.bbox.contains(x) {
            return Err(GeomError::OutOfBox(*x));
        }
        let inside = self.r(x) < 0.0;
        let mesh = self.mesh();
        let nearest = mesh.nearest(x, 3);
        // δ ≥ (nearest mesh distance) − spacing, so Newton from x cannot be
        // accepted when that bound already exceeds δ₀
        let shallow = nearest.first().map_or(true, |b| b.1 - 2.0 * mesh.spacing < self.delta0());
        if shallow {
            if let Ok((p, _)) = self.newton_from(x) {
                let d = x.dist(p);
                if d < self.delta0() {
                    return Ok(Projection { point: p, distance: d, inside, provenance: Provenance::Newton, ambiguous: false });
                }
            }
        }
        let cands = self.refine_candidates(x, &nearest);
        let (p, d) = cands[0];
        let ambiguous = cands[1..].iter().any(|(q, e)| q.dist(p) > TIE_TOL && (e - d).abs() < TIE_TOL);
        Ok(Projection { point: p, distance: d, inside, provenance: Provenance::Mesh, ambiguous })
    }

    /// Gradient-flow seed followed by damped Newton on the Lagrange system.
    pub(crate) fn newton_from(&self, x: &C2) -> Result<(C2, usize), GeomError> {
        let mut p = *x;
        for _ in 0..40 {
            let j = self.jet(&p);
            let g = j.grad();
            let g2: f64 = g.iter().map(|v| v * v).sum();
            if g2 < 1e-20 {
                return Err(GeomError::DegenerateGradient(g2.sqrt()));
            }
            let mut step = [0.0; 4];
            let mut sn = 0.0;
            for k in 0..4 {
                step[k] = j.r * g[k] / g2;
                sn += step[k] * step[k];
            }
            let sn = sn.sqrt();
            let s = if sn > 0.5 { 0.5 / sn } else { 1.0 };
            let mut pr = p.to_real();
            for k in 0..4 {
                pr[k] -= s * step[k];
            }
            p = C2::from_real(pr);
            if sn < 1e-13 {
                break;
            }
        }
        lagrange_newton(self, x, &p)
    }

    /// Nearest mesh points refined by Newton, sorted by distance.
    fn mesh_candidates(&self, x: &C2) -> Vec<(C2, f64)> {
        self.refine_candidates(x, &self.mesh().nearest(x, 3))
    }

    fn refine_candidates(&self, x: &C2, nearest: &[(usize, f64)]) -> Vec<(C2, f64)> {
        let mesh = self.mesh();
        let mut out: Vec<(C2, f64)> = nearest
            .iter()
            .map(|&(i, d)| {
                let seed = mesh.points[i];
                match lagrange_newton(self, x, &seed) {
                    Ok((p, _)) if x.dist(p) <= d + 1e-12 => (p, x.dist(p)),
                    _ => (seed, d),
                }
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.lex_cmp(&b.0)));
        out
    }
}

/// Damped Newton on `[p − x + λ∇r(p); r(p)] = 0` starting from `seed`.
fn lagrange_newton(dom: &Domain, x: &C2, seed: &C2) -> Result<(C2, usize), GeomError> {
    let xr = x.to_real();
    let mut p = seed.to_real();
    let j0 = dom.jet(seed);
    let g0 = j0.grad();
    let g2: f64 = g0.iter().map(|v| v * v).sum();
    if g2 < 1e-20 {
        return Err(GeomError::DegenerateGradient(g2.sqrt()));
    }
    let mut lam: f64 = (0..4).map(|k| (xr[k] - p[k]) * g0[k]).sum::<f64>() / g2;
    let residual = |p: &[f64; 4], lam: f64| -> ([f64; 5], f64) {
        let j = dom.jet(&C2::from_real(*p));
        let g = j.grad();
        let mut f = [0.0; 5];
        for k in 0..4 {
            f[k] = p[k] - xr[k] + lam * g[k];
        }
        f[4] = j.r;
        let n = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        (f, n)
    };
    let (_, mut fnorm) = residual(&p, lam);
    for iter in 0..MAX_NEWTON {
        let j = dom.jet(&C2::from_real(p));
        let g = j.grad();
        let h = j.hessian();
        let mut a = [[0.0; 6]; 5];
        for i in 0..4 {
            for k in 0..4 {
                a[i][k] = lam * h[i][k] + if i == k { 1.0 } else { 0.0 };
            }
            a[i][4] = g[i];
            a[4][i] = g[i];
            a[i][5] = -(p[i] - xr[i] + lam * g[i]);
        }
        a[4][5] = -j.r;
        let Some(delta) = solve5(a) else {
            return Err(GeomError::NewtonDiverged { iters: iter, residual: fnorm });
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut q = p;
            for k in 0..4 {
                q[k] += alpha * delta[k];
            }
            let l = lam + alpha * delta[4];
            let (_, n) = residual(&q, l);
            if n.is_finite() && n <= fnorm * (1.0 - 1e-4 * alpha) + 1e-15 {
                accepted = Some((q, l, n));
                break;
            }
            alpha *= 0.5;
        }
        let Some((q, l, n)) = accepted else {
            return Err(GeomError::NewtonDiverged { iters: iter, residual: fnorm });
        };
        let step = (0..4).map(|k| (q[k] - p[k]).abs()).fold(0.0, f64::max);
        p = q;
        lam = l;
        fnorm = n;
        if step < COORD_TOL || fnorm < 1e-15 {
            let pc = C2::from_real(p);
            if dom.r(&pc).abs() > 1e-10 {
                return Err(GeomError::NewtonDiverged { iters: iter + 1, residual: fnorm });
            }
            return Ok((pc, iter + 1));
        }
    }
    Err(GeomError::NewtonDiverged { iters: MAX_NEWTON, residual: fnorm })
}

/// Gaussian elimination with partial pivoting on an augmented 5×6 system.
fn solve5(mut a: [[f64; 6]; 5]) -> Option<[f64; 5]> {
    let scale = a.iter().flat_map(|row| row[..5].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..5 {
            let f = a[row][col] / a[col][col];
            for k in col..6 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 5];
    for i in (0..5).rev() {
        let mut s = a[i][5];
        for k in i + 1..5 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Checks that normal segments of length up to `width` project back to
/// their foot and that no two distinct nearest points tie.
pub(crate) fn validate_delta0(dom: &Domain, width: f64) -> Result<f64, GeomError> {
    let mesh = dom.mesh();
    let step = (mesh.points.len() / 48).max(1);
    for p in mesh.points.iter().step_by(step) {
        let n = normal_from_jet(&dom.jet(p))?;
        for frac in [0.3, 0.6, 0.95] {
            let t = frac * width;
            let x = *p - n * t;
            if !dom.spec.bbox.contains(&x) {
                continue;
            }
            let mut cands = dom.mesh_candidates(&x);
            cands.push((*p, t));
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, bd) = cands[0];
            if best.dist(*p) > TIE_TOL && bd < t - 1e-9 {
                return Err(GeomError::Validation(format!(
                    "unique-projection width is below {t}: {x} is closer to {best} ({bd}) than to {p}"
                )));
            }
            if let Some((q, e)) = cands.iter().find(|(q, _)| q.dist(*p) > TIE_TOL) {
                if (e - t).abs() < TIE_TOL {
                    return Err(GeomError::Validation(format!(
                        "ambiguous projection at depth {t}: {p} and {q} are equidistant from {x}"
                    )));
                }
            }
        }
    }
    Ok(width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{load_domain, sample_boundary, sample_collar};
    fn pt(a: f64, b: f64, c: f64, d: f64) -> C2 {
        C2::from_real([a, b, c, d])
    }

    #[test]
    fn ball_distances() {
        let b = load_domain("ball").unwrap();
        assert!((b.signed_distance(&C2::ZERO).unwrap() + 1.0).abs() < 1e-12);
        assert!((b.signed_distance(&pt(0.0, 0.0, 0.5, 0.0)).unwrap() + 0.5).abs() < 1e-12);
        let p = b.project_boundary(&pt(0.0, 0.0, 0.5, 0.0)).unwrap();
        assert!(p.point.dist(pt(0.0, 0.0, 1.0, 0.0)) < 1e-12);
        let p = b.project_boundary(&pt(0.3, 0.0, 0.4, 0.0)).unwrap();
        assert!(p.point.dist(pt(0.6, 0.0, 0.8, 0.0)) < 1e-12);
        assert!(matches!(b.project_boundary(&C2::ZERO), Err(GeomError::Ambiguous { .. })));
        assert!((b.signed_distance(&pt(0.0, 0.0, 1.2, 0.0)).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn egg_examples() {
        let e = load_domain("egg2").unwrap();
        assert!((e.signed_distance(&pt(0.5, 0.0, 0.0, 0.0)).unwrap() + 0.5).abs() < 1e-10);
        let p = e.project_boundary(&pt(0.0, 0.0, 0.9, 0.0)).unwrap();
        assert!(p.point.dist(pt(0.0, 0.0, 1.0, 0.0)) < 1e-10);
        // mesh oracle: no mesh point is closer than the Newton foot
        let x = pt(0.0, 0.0, 0.9, 0.0);
        let best = e.mesh().points.iter().map(|q| q.dist(x)).fold(f64::INFINITY, f64::min);
        assert!(best >= 0.1 - 1e-12);
    }

    #[test]
    fn projection_is_normal_and_on_boundary() {
        let e = load_domain("egg2_perturbed").unwrap();
        for c in sample_collar(&e, 40, (1e-4, 0.2), 11) {
            let p = e.project_boundary(&c.point).unwrap();
            assert!(e.r(&p.point).abs() < 1e-10);
            let n = e.outward_normal(&p.point).unwrap();
            let v = p.point - c.point;
            let cos = v.to_real().iter().zip(n.to_real()).map(|(a, b)| a * b).sum::<f64>() / v.norm();
            assert!((1.0 - cos).abs() < 1e-12, "angle {}", (1.0 - cos));
            assert!((p.distance - c.delta).abs() < 1e-8);
        }
    }

    #[test]
    fn fibre_and_idempotence() {
        let e = load_domain("egg3").unwrap();
        for p in sample_boundary(&e, 20, 5) {
            let n = e.outward_normal(&p).unwrap();
            for t in [1e-4, 1e-2, 0.2] {
                let x = p - n * t;
                let f = e.project_boundary(&x).unwrap();
                assert!((f.distance - t).abs() < 1e-8);
                assert!(f.point.dist(p) < 1e-8);
            }
        }
    }
}
