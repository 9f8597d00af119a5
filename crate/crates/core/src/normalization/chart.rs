use std::sync::Arc;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use super::ChartError;
use crate::geometry::Domain;
use crate::point::C2;
use crate::symbolic::{AffineSubst, Poly, PolyInW};

const CZERO: Complex64 = Complex64::new(0.0, 0.0);
const MAX_COEFF: f64 = 1e12;

/// Polynomial shear chart `Φ_ζ` normalising `r` at `ζ`.
///
/// `Φ_ζ(z) = (u1 + f(u2), u2)` with `u1 = a·(z−ζ)` and
/// `u2 = ⟨z−ζ, L(ζ)⟩ = c·(z−ζ)`, `L = (−∂r/∂z2, ∂r/∂z1)`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryChart {
    pub center: C2,
    /// `r(ζ)`, the constant term of the normal form.
    pub r_center: f64,
    pub a: [Complex64; 2],
    pub c: [Complex64; 2],
    /// Coefficients of the shear `f`, index = degree (`f[0] = f[1] = 0`).
    pub shear: Vec<Complex64>,
    /// `P_2 .. P_m`.
    pub p: Vec<PolyInW>,
    pub norms: Vec<f64>,
    /// `|∂r/∂z1| > |∂r/∂z2|` at `ζ`: `z1` plays the nondegenerate role.
    pub swapped: bool,
    pub m: usize,
    #[serde(skip)]
    minv: [[Complex64; 2]; 2],
    /// `r(ζ + M⁻¹u)` in `(u1, u2, ū1, ū2)`.
    #[serde(serialize_with = "skip_poly")]
    local: Poly,
    /// Normal form `ρ_ζ` truncated at total degree `m`.
    #[serde(serialize_with = "skip_poly")]
    normal_form: Poly,
}

fn skip_poly<S: Serializer>(_: &Poly, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_none()
}

impl BoundaryChart {
    pub fn build(dom: &Domain, zeta: &C2) -> Result<BoundaryChart, ChartError> {
        let m = dom.m();
        let rz = dom.rz(zeta);
        let grad = 2.0 * (rz[0].norm_sqr() + rz[1].norm_sqr()).sqrt();
        if !(grad > 1e-8) {
            return Err(ChartError::DegenerateGradient(grad));
        }
        let a = [2.0 * rz[0], 2.0 * rz[1]];
        let c = [-rz[1].conj(), rz[0].conj()];
        let det = a[0] * c[1] - a[1] * c[0];
        let minv = [[c[1] / det, -a[1] / det], [-c[0] / det, a[0] / det]];
        let subst = AffineSubst { a: minv, b: zeta.0 };
        let local = dom.r_poly().compose(&subst.as_polys(), usize::MAX);

        let mut shear = vec![CZERO; m + 1];
        for k in 2..=m {
            let rho = local.compose(&shear_subst(&shear), k);
            let b = rho.coeff([0, k as u8, 0, 0]);
            shear[k] += 2.0 * b;
        }
        let normal_form = local.compose(&shear_subst(&shear), m);
        let worst = normal_form.max_abs_coeff().max(shear.iter().map(|c| c.norm()).fold(0.0, f64::max));
        if !(worst <= MAX_COEFF) {
            return Err(ChartError::IllConditioned { max_coeff: worst, center: *zeta });
        }
        let mut p = Vec::with_capacity(m - 1);
        let mut norms = Vec::with_capacity(m - 1);
        for k in 2..=m {
            let mut pk = PolyInW::from_chart_poly(&normal_form, k);
            pk.coeffs.retain(|((j, l), _)| *j != 0 && *l != 0);
            norms.push(pk.sup_norm());
            p.push(pk);
        }
        Ok(BoundaryChart {
            center: *zeta,
            r_center: dom.r(zeta),
            a,
            c,
            shear,
            p,
            norms,
            swapped: rz[0].norm() > rz[1].norm(),
            m,
            minv,
            local,
            normal_form,
        })
    }

    fn shear_at(&self, w2: Complex64) -> Complex64 {
        let mut s = CZERO;
        for k in (2..self.shear.len()).rev() {
            s = (s + self.shear[k]) * w2;
        }
        s * w2
    }

    pub fn apply(&self, z: &C2) -> C2 {
        let h = *z - self.center;
        let u1 = self.a[0] * h[0] + self.a[1] * h[1];
        let u2 = self.c[0] * h[0] + self.c[1] * h[1];
        C2::new(u1 + self.shear_at(u2), u2)
    }

    pub fn invert(&self, w: &C2) -> C2 {
        let u1 = w[0] - self.shear_at(w[1]);
        let u2 = w[1];
        let m = &self.minv;
        C2::new(m[0][0] * u1 + m[0][1] * u2, m[1][0] * u1 + m[1][1] * u2) + self.center
    }

    /// `‖P_k‖` for `2 ≤ k ≤ m`.
    pub fn norm(&self, k: usize) -> f64 {
        self.norms[k - 2]
    }

    /// Normal form truncated at total degree `m` in `(w, w̄)`.
    pub fn normal_form(&self) -> &Poly {
        &self.normal_form
    }

    /// Exact normal form `ρ_ζ = r ∘ Φ_ζ⁻¹` (no truncation).
    pub fn normal_form_full(&self) -> Poly {
        self.local.compose(&shear_subst(&self.shear), usize::MAX)
    }

    /// Largest modulus of a pure `w2^k` or `w̄2^k` coefficient, `1 ≤ k ≤ m`.
    pub fn max_pure_coeff(&self) -> f64 {
        (1..=self.m)
            .map(|k| {
                let k = k as u8;
                self.normal_form.coeff([0, k, 0, 0]).norm().max(self.normal_form.coeff([0, 0, 0, k]).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Coefficient of `Re w1`, read as the sum of the `w1` and `w̄1`
    /// coefficients (each should be one half).
    pub fn re_w1_coeff(&self) -> Complex64 {
        self.normal_form.coeff([1, 0, 0, 0]) + self.normal_form.coeff([0, 0, 1, 0])
    }

    /// Max deviation of the `w1`, `w̄1` coefficients from `1/2`.
    pub fn re_w1_defect(&self) -> f64 {
        let a = self.normal_form.coeff([1, 0, 0, 0]);
        let b = self.normal_form.coeff([0, 0, 1, 0]);
        (a - 0.5).norm().max((b - 0.5).norm())
    }

    /// Largest coefficient of the truncated normal form that is neither the
    /// constant, `Re w1`, a `P_k` term, nor a monomial containing `w1`.
    pub fn normal_form_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (e, c) in self.normal_form.terms() {
            let has_w1 = e[0] > 0 || e[2] > 0;
            let pure_w2 = !has_w1 && (e[1] == 0 || e[3] == 0) && (e[1] + e[3]) > 0;
            if pure_w2 {
                worst = worst.max(c.norm());
            }
        }
        worst
    }
}

fn shear_subst(shear: &[Complex64]) -> [Poly; 4] {
    let mut u1 = Poly::var(crate::symbolic::Var::Z1);
    for (k, f) in shear.iter().enumerate() {
        if *f != CZERO {
            u1.add_term([0, k as u8, 0, 0], -*f);
        }
    }
    let u2 = Poly::var(crate::symbolic::Var::Z2);
    let u1b = u1.conj();
    let u2b = u2.conj();
    [u1, u2, u1b, u2b]
}

impl Domain {
    /// Chart at `ζ`, cached by exact coordinates.
    pub fn chart(&self, zeta: &C2) -> Result<Arc<BoundaryChart>, ChartError> {
        let key = zeta.key();
        if let Some(c) = self.charts.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(BoundaryChart::build(self, zeta)?);
        let mut cache = self.charts.lock().unwrap();
        if cache.len() >= 200_000 {
            cache.clear();
        }
        cache.insert(key, c.clone());
        Ok(c)
    }
}
