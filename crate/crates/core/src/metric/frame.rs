use std::collections::BTreeMap;

use num_complex::Complex64;

use super::MetricError;
use crate::geometry::Domain;
use crate::point::C2;
use crate::symbolic::{Poly, Powers, SymExpr, Var};

/// Smallest `|∂r/∂z_b|` (for the frame's variable `b`) accepted as inside
/// the frame's patch.
pub const PATCH_EPS: f64 = 1e-8;
/// A point belongs to a frame when `|∂r/∂z_b| ≥ MEMBERSHIP·|∂r|`.
pub const MEMBERSHIP: f64 = 0.1;

/// `ℒ_{j,k} = N / (q^p · q̄^s)` with a polynomial numerator.
#[derive(Clone, Debug)]
pub struct LevelCoeff {
    pub j: usize,
    pub k: usize,
    pub num: Poly,
    pub p: u32,
    pub s: u32,
}

/// The vector fields `L1 = ∂_a − (r_a/r_b)∂_b`, `L2 = ∂_b` for the split
/// `(a, b) = (1, 2)` or, when swapped, `(2, 1)`, together with the
/// coefficients `ℒ_{j,k}` for `2 ≤ j+k ≤ m`.
///
/// `L1 = T/q` with `q = ∂r/∂z_b` and the polynomial field
/// `T = q∂_a − r_a∂_b`, which keeps every `ℒ_{j,k}` a polynomial over a
/// monomial in `q, q̄`.
#[derive(Clone, Debug)]
pub struct FieldFrame {
    pub swapped: bool,
    pub m: usize,
    q: Poly,
    /// `∂r/∂z_a`.
    ra: Poly,
    coeffs: Vec<LevelCoeff>,
    max_exps: [u8; 4],
}

/// Both frames of the two-patch cover.
#[derive(Clone, Debug)]
pub struct FramePair {
    pub frames: [FieldFrame; 2],
}

fn idx(swapped: bool) -> (usize, usize) {
    if swapped {
        (1, 0)
    } else {
        (0, 1)
    }
}

impl FieldFrame {
    pub fn build(dom: &Domain, swapped: bool) -> Result<FieldFrame, MetricError> {
        let m = dom.m();
        let (a, b) = idx(swapped);
        let q = dom.rz_poly(b).clone();
        let ra = dom.rz_poly(a).clone();
        let qb = q.conj();
        let rab = ra.conj();
        let va = Var::holomorphic(a);
        let vb = Var::holomorphic(b);
        let vab = Var::antiholomorphic(a);
        let vbb = Var::antiholomorphic(b);
        let t = |n: &Poly| q.mul(&n.derivative(va)).sub(&ra.mul(&n.derivative(vb)));
        let tb = |n: &Poly| qb.mul(&n.derivative(vab)).sub(&rab.mul(&n.derivative(vbb)));

        // T as a vector in (z1, z2) order
        let mut tvec = [Poly::zero(), Poly::zero()];
        tvec[a] = q.clone();
        tvec[b] = ra.scale(Complex64::new(-1.0, 0.0));
        let mut n11 = Poly::zero();
        for i in 0..2 {
            for jj in 0..2 {
                n11 = n11.add(&dom.rzzb_poly(i, jj).mul(&tvec[i]).mul(&tvec[jj].conj()));
            }
        }
        let qqb = q.mul(&qb);
        let (tq, tqb, tbq, tbqb) = (t(&q), t(&qb), tb(&q), tb(&qb));
        let limit = 3 * (m as u32).saturating_sub(2);
        let step = |c: &LevelCoeff, bar: bool| -> Result<LevelCoeff, MetricError> {
            let (d, dq, dqb) = if bar { (tb(&c.num), &tbq, &tbqb) } else { (t(&c.num), &tq, &tqb) };
            let pf = Complex64::new(c.p as f64, 0.0);
            let sf = Complex64::new(c.s as f64, 0.0);
            let num = qqb
                .mul(&d)
                .sub(&qb.mul(&c.num).mul(dq).scale(pf))
                .sub(&q.mul(&c.num).mul(dqb).scale(sf));
            let tol = 1e-15 * num.max_abs_coeff();
            let (p, s, j, k) = if bar { (c.p + 1, c.s + 2, c.j, c.k + 1) } else { (c.p + 2, c.s + 1, c.j + 1, c.k) };
            let excess = p + s - 2;
            if excess > limit {
                return Err(MetricError::Conditioning { excess, limit });
            }
            Ok(LevelCoeff { j, k, num: num.prune(tol), p, s })
        };
        let mut map: BTreeMap<(usize, usize), LevelCoeff> = BTreeMap::new();
        map.insert((1, 1), LevelCoeff { j: 1, k: 1, num: n11, p: 1, s: 1 });
        for k in 2..m {
            let prev = map[&(1, k - 1)].clone();
            map.insert((1, k), step(&prev, true)?);
        }
        for k in 1..m {
            for j in 2..=(m - k) {
                let prev = map[&(j - 1, k)].clone();
                map.insert((j, k), step(&prev, false)?);
            }
        }
        let coeffs: Vec<LevelCoeff> = map.into_values().collect();
        let mut max_exps = q.max_exps();
        for c in &coeffs {
            let e = c.num.max_exps();
            for v in 0..4 {
                max_exps[v] = max_exps[v].max(e[v]);
            }
        }
        Ok(FieldFrame { swapped, m, q, ra, coeffs, max_exps })
    }

    pub fn coeffs(&self) -> &[LevelCoeff] {
        &self.coeffs
    }

    /// Symbolic components of `L1` in `(z1, z2)` order.
    pub fn l1_components(&self) -> [SymExpr; 2] {
        let (a, b) = idx(self.swapped);
        let mut out = [SymExpr::zero(), SymExpr::zero()];
        out[a] = SymExpr::one();
        out[b] = -(self.ra.to_expr().div(&self.q.to_expr()));
        out
    }

    /// `ℒ_{j,k}` as a symbolic expression.
    pub fn level_expr(&self, j: usize, k: usize) -> Option<SymExpr> {
        let c = self.coeffs.iter().find(|c| c.j == j && c.k == k)?;
        let q = self.q.to_expr();
        let den = SymExpr::mul_all([q.powi(c.p as i32), q.conj().powi(c.s as i32)]);
        Some(c.num.to_expr().div(&den))
    }

    /// `|∂r/∂z_b| ≥ MEMBERSHIP·|∂r|` at `z`.
    pub fn contains(&self, rz: &[Complex64; 2]) -> bool {
        let (_, b) = idx(self.swapped);
        let d = (rz[0].norm_sqr() + rz[1].norm_sqr()).sqrt();
        rz[b].norm() >= MEMBERSHIP * d
    }

    /// Values of `ℒ_{j,k}(z)` keyed by `(j, k)`.
    pub fn level_values(&self, z: &C2) -> Result<Vec<((usize, usize), Complex64)>, MetricError> {
        let pw = Powers::new(z, self.max_exps);
        let q = self.q.eval_with(&pw);
        let qa = q.norm();
        if qa < PATCH_EPS {
            return Err(MetricError::PatchBoundary { point: *z, modulus: qa });
        }
        let qi = q.inv();
        let qbi = qi.conj();
        Ok(self
            .coeffs
            .iter()
            .map(|c| ((c.j, c.k), c.num.eval_with(&pw) * qi.powi(c.p as i32) * qbi.powi(c.s as i32)))
            .collect())
    }

    /// `C_l(z) = max_{j+k=l, j,k≥1} |ℒ_{j,k}(z)|` for `l = 2..=m`.
    pub fn c_l(&self, z: &C2) -> Result<Vec<f64>, MetricError> {
        let pw = Powers::new(z, self.max_exps);
        let q = self.q.eval_with(&pw);
        let qa = q.norm();
        if qa < PATCH_EPS {
            return Err(MetricError::PatchBoundary { point: *z, modulus: qa });
        }
        let mut out = vec![0.0f64; self.m - 1];
        let mut pows = vec![1.0; 3 * self.m + 3];
        let inv = 1.0 / qa;
        for i in 1..pows.len() {
            pows[i] = pows[i - 1] * inv;
        }
        for c in &self.coeffs {
            let v = c.num.eval_with(&pw).norm() * pows[(c.p + c.s) as usize];
            let slot = &mut out[c.j + c.k - 2];
            *slot = slot.max(v);
        }
        Ok(out)
    }
}

impl FramePair {
    pub fn build(dom: &Domain) -> Result<FramePair, MetricError> {
        Ok(FramePair { frames: [FieldFrame::build(dom, false)?, FieldFrame::build(dom, true)?] })
    }
}

/// Computes `ℒ_{j,k}` by applying `L1` and `L̄1` to rational expressions
/// directly, without the polynomial-numerator bookkeeping.
pub fn level_expr_direct(dom: &Domain, swapped: bool, j: usize, k: usize) -> SymExpr {
    let (a, b) = idx(swapped);
    let cache = crate::symbolic::DerivCache::new();
    let r = &dom.spec.r;
    let rz: Vec<SymExpr> = (0..2).map(|i| cache.wirtinger(r, Var::holomorphic(i))).collect();
    let mut l1 = [SymExpr::zero(), SymExpr::zero()];
    l1[a] = SymExpr::one();
    l1[b] = -(rz[a].div(&rz[b]));
    let mut e = SymExpr::zero();
    for i in 0..2 {
        for jj in 0..2 {
            let rij = cache.wirtinger(&rz[i], Var::antiholomorphic(jj));
            e = e + SymExpr::mul_all([rij, l1[i].clone(), l1[jj].conj()]);
        }
    }
    let apply = |e: &SymExpr, bar: bool| -> SymExpr {
        SymExpr::add_all((0..2).map(|i| {
            if bar {
                &l1[i].conj() * &cache.wirtinger(e, Var::antiholomorphic(i))
            } else {
                &l1[i] * &cache.wirtinger(e, Var::holomorphic(i))
            }
        }).collect::<Vec<_>>())
    };
    for _ in 1..k {
        e = apply(&e, true);
    }
    for _ in 1..j {
        e = apply(&e, false);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{load_domain, sample_collar};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ball_frame() {
        let b = load_domain("ball").unwrap();
        let f = FieldFrame::build(&b, false).unwrap();
        let z = C2::new(c(0.3, 0.1), c(0.5, -0.2));
        let l = f.l1_components();
        let l2 = l[1].eval(&z).unwrap();
        assert!((l[0].eval(&z).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((l2 + z[0].conj() / z[1].conj()).norm() < 1e-15);
        let v = f.level_values(&z).unwrap();
        let expected = 1.0 + z[0].norm_sqr() / z[1].norm_sqr();
        assert!((v[0].1 - c(expected, 0.0)).norm() < 1e-13);
        let on_axis = f.c_l(&C2::new(c(0.0, 0.0), c(0.9, 0.0))).unwrap();
        assert!((on_axis[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn l1_annihilates_r() {
        for name in ["ball", "egg2", "egg3", "egg2_perturbed"] {
            let d = load_domain(name).unwrap();
            for swapped in [false, true] {
                let f = FieldFrame::build(&d, swapped).unwrap();
                let l = f.l1_components();
                for cp in sample_collar(&d, 30, (1e-3, 0.25), 1) {
                    let z = cp.point;
                    if !f.contains(&d.rz(&z)) {
                        continue;
                    }
                    let rz = d.rz(&z);
                    let s = l[0].eval(&z).unwrap() * rz[0] + l[1].eval(&z).unwrap() * rz[1];
                    assert!(s.norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn egg_type_four_frame() {
        let e = load_domain("egg2").unwrap();
        let f = FieldFrame::build(&e, true).unwrap();
        let cl = f.c_l(&C2::new(c(0.99, 0.0), c(0.0, 0.0))).unwrap();
        assert!(cl[0] < 1e-12);
        assert!(cl[2] > 0.1);
    }

    #[test]
    fn polynomial_numerators_match_direct_differentiation() {
        for (name, m) in [("egg2_perturbed", 4), ("egg3", 6)] {
            let d = load_domain(name).unwrap();
            for swapped in [false, true] {
                let f = FieldFrame::build(&d, swapped).unwrap();
                let pts = sample_collar(&d, 6, (1e-2, 0.2), 4);
                for (j, k) in [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (1, 3)] {
                    if j + k > m {
                        continue;
                    }
                    let direct = level_expr_direct(&d, swapped, j, k);
                    let via = f.level_expr(j, k).unwrap();
                    for cp in &pts {
                        if !f.contains(&d.rz(&cp.point)) {
                            continue;
                        }
                        let a = direct.eval(&cp.point).unwrap();
                        let b = via.eval(&cp.point).unwrap();
                        let v = f.level_values(&cp.point).unwrap();
                        let fast = v.iter().find(|(key, _)| *key == (j, k)).unwrap().1;
                        let scale = a.norm().max(1.0);
                        assert!((a - b).norm() < 1e-9 * scale, "{name} {j}{k}: {a} vs {b}");
                        assert!((a - fast).norm() < 1e-9 * scale, "{name} {j}{k}: {a} vs {fast}");
                    }
                }
            }
        }
    }

    #[test]
    fn levi_coefficient_is_real_and_nonnegative() {
        let d = load_domain("egg2_perturbed").unwrap();
        let f = FieldFrame::build(&d, false).unwrap();
        for cp in sample_collar(&d, 30, (1e-3, 0.2), 8) {
            if !f.contains(&d.rz(&cp.point)) {
                continue;
            }
            let v = f.level_values(&cp.point).unwrap()[0].1;
            assert!(v.im.abs() < 1e-10 * v.norm().max(1.0));
            assert!(v.re > -1e-12);
        }
    }
}
