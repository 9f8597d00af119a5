//! Domains `{r < 0}`: derivatives of the defining function, boundary
//! projection, signed distance, normals, tangent splitting and samplers.

mod mesh;
mod projection;
mod registry;
mod sampling;

pub use mesh::{kronecker_sphere_direction, Mesh};
pub use projection::{Projection, Provenance};
pub use registry::{
    load_domain, load_spec, parse_domain_file, registry_names, registry_spec, DEFAULT_BOX_HALF, DEFAULT_CHART_RADIUS,
    DEFAULT_EPS0,
};
pub use sampling::{index_rng, sample_boundary, sample_collar, CollarPoint};
pub(crate) use sampling::{boundary_point, gaussian_direction, log_uniform};

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalization::BoundaryChart;
use crate::point::C2;
use crate::symbolic::{Poly, Powers, SymExpr, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("degenerate boundary: gradient modulus {0:e}")]
    DegenerateGradient(f64),
    #[error("projection did not converge in {iters} iterations (residual {residual:e})")]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("ambiguous projection: candidates {a} and {b} at distances differing by {gap:e}")]
    Ambiguous { a: C2, b: C2, gap: f64 },
    #[error("point {0} is outside the bounding box")]
    OutOfBox(C2),
    #[error("point {point} is not on the boundary (r = {r:e})")]
    NotOnBoundary { point: C2, r: f64 },
    #[error("domain validation failed: {0}")]
    Validation(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("domain definition parse error: {0}")]
    Parse(String),
}

/// Axis-aligned box in the real coordinates `(x1, y1, x2, y2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl BoundingBox {
    pub fn cube(half: f64) -> BoundingBox {
        BoundingBox { lo: [-half; 4], hi: [half; 4] }
    }

    pub fn center(&self) -> C2 {
        let mut c = [0.0; 4];
        for k in 0..4 {
            c[k] = 0.5 * (self.lo[k] + self.hi[k]);
        }
        C2::from_real(c)
    }

    pub fn contains(&self, x: &C2) -> bool {
        let r = x.to_real();
        (0..4).all(|k| r[k] >= self.lo[k] && r[k] <= self.hi[k])
    }

    /// Largest `t ≥ 0` with `from + t·dir` inside the box.
    pub fn exit_time(&self, from: &C2, dir: &C2) -> f64 {
        let p = from.to_real();
        let d = dir.to_real();
        let mut t = f64::INFINITY;
        for k in 0..4 {
            if d[k] > 0.0 {
                t = t.min((self.hi[k] - p[k]) / d[k]);
            } else if d[k] < 0.0 {
                t = t.min((self.lo[k] - p[k]) / d[k]);
            }
        }
        t.max(0.0)
    }
}

/// Static description of a domain.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    pub name: String,
    /// Source text of the defining function.
    pub r_text: String,
    pub r: SymExpr,
    /// Upper bound on the type of boundary points.
    pub m: usize,
    /// Chart validity radius.
    pub chart_radius: f64,
    /// Collar width.
    pub eps0: f64,
    pub bbox: BoundingBox,
}

/// Values of `r` and its Wirtinger derivatives up to order two at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub r: f64,
    /// `∂r/∂z_j`.
    pub rz: [Complex64; 2],
    /// `∂²r/∂z_j∂z_k`.
    pub rzz: [[Complex64; 2]; 2],
    /// `∂²r/∂z_j∂conj(z_k)`.
    pub rzzb: [[Complex64; 2]; 2],
}

impl Jet {
    /// Real gradient in `(x1, y1, x2, y2)`.
    pub fn grad(&self) -> [f64; 4] {
        [2.0 * self.rz[0].re, -2.0 * self.rz[0].im, 2.0 * self.rz[1].re, -2.0 * self.rz[1].im]
    }

    /// `∂̄r = (∂r/∂z̄1, ∂r/∂z̄2)`, half the real gradient as a complex vector.
    pub fn dbar(&self) -> C2 {
        C2::new(self.rz[0].conj(), self.rz[1].conj())
    }

    pub fn grad_norm(&self) -> f64 {
        2.0 * (self.rz[0].norm_sqr() + self.rz[1].norm_sqr()).sqrt()
    }

    /// Real Hessian in `(x1, y1, x2, y2)`.
    pub fn hessian(&self) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        for j in 0..2 {
            for k in 0..2 {
                let a = self.rzz[j][k];
                let b = self.rzzb[j][k];
                h[2 * j][2 * k] = 2.0 * (a.re + b.re);
                h[2 * j][2 * k + 1] = -2.0 * a.im + 2.0 * b.im;
                h[2 * j + 1][2 * k + 1] = -2.0 * a.re + 2.0 * b.re;
            }
        }
        for j in 0..2 {
            for k in 0..2 {
                h[2 * k + 1][2 * j] = h[2 * j][2 * k + 1];
            }
        }
        h
    }
}

/// A loaded domain: compiled derivatives plus lazily built helpers.
pub struct Domain {
    pub spec: DomainSpec,
    r: Poly,
    rz: [Poly; 2],
    rzz: [[Poly; 2]; 2],
    rzzb: [[Poly; 2]; 2],
    max_exps: [u8; 4],
    delta0: f64,
    mesh: OnceLock<Mesh>,
    pub(crate) charts: Mutex<HashMap<[u64; 4], Arc<BoundaryChart>>>,
    pub(crate) frames: OnceLock<std::result::Result<Arc<crate::metric::FramePair>, crate::metric::MetricError>>,
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Domain {
    /// Compiles the defining function; performs no validation.
    pub fn from_spec(spec: DomainSpec) -> Result<Domain, crate::Error> {
        let r = Poly::from_expr(&spec.r)?;
        let d = |p: &Poly, v: Var| p.derivative(v);
        let rz = [d(&r, Var::Z1), d(&r, Var::Z2)];
        let rzz = [
            [d(&rz[0], Var::Z1), d(&rz[0], Var::Z2)],
            [d(&rz[1], Var::Z1), d(&rz[1], Var::Z2)],
        ];
        let rzzb = [
            [d(&rz[0], Var::Zbar1), d(&rz[0], Var::Zbar2)],
            [d(&rz[1], Var::Zbar1), d(&rz[1], Var::Zbar2)],
        ];
        let max_exps = r.max_exps();
        let delta0 = spec.eps0;
        Ok(Domain {
            spec,
            r,
            rz,
            rzz,
            rzzb,
            max_exps,
            delta0,
            mesh: OnceLock::new(),
            charts: Mutex::new(HashMap::new()),
            frames: OnceLock::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn eps0(&self) -> f64 {
        self.spec.eps0
    }

    pub fn chart_radius(&self) -> f64 {
        self.spec.chart_radius
    }

    /// Validated width of unique projection.
    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn r_poly(&self) -> &Poly {
        &self.r
    }

    pub fn rz_poly(&self, j: usize) -> &Poly {
        &self.rz[j]
    }

    pub fn rzzb_poly(&self, j: usize, k: usize) -> &Poly {
        &self.rzzb[j][k]
    }

    /// Value of the defining function (real part; `r` is real-valued).
    pub fn r(&self, z: &C2) -> f64 {
        self.r.eval_with(&Powers::new(z, self.max_exps)).re
    }

    /// Complex value of `r`, used to check real-valuedness.
    pub fn r_complex(&self, z: &C2) -> Complex64 {
        self.r.eval(z)
    }

    pub fn rz(&self, z: &C2) -> [Complex64; 2] {
        let pw = Powers::new(z, self.max_exps);
        [self.rz[0].eval_with(&pw), self.rz[1].eval_with(&pw)]
    }

    pub fn jet(&self, z: &C2) -> Jet {
        let pw = Powers::new(z, self.max_exps);
        let e = |p: &Poly| p.eval_with(&pw);
        Jet {
            r: e(&self.r).re,
            rz: [e(&self.rz[0]), e(&self.rz[1])],
            rzz: [[e(&self.rzz[0][0]), e(&self.rzz[0][1])], [e(&self.rzz[1][0]), e(&self.rzz[1][1])]],
            rzzb: [[e(&self.rzzb[0][0]), e(&self.rzzb[0][1])], [e(&self.rzzb[1][0]), e(&self.rzzb[1][1])]],
        }
    }

    pub fn is_inside(&self, z: &C2) -> bool {
        self.r(z) < 0.0
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh.get_or_init(|| Mesh::build(self, mesh::MESH_POINTS))
    }

    /// Unit outward normal `∂̄r/|∂̄r|` at a boundary point.
    pub fn outward_normal(&self, p: &C2) -> Result<C2, GeomError> {
        let j = self.jet(p);
        if j.r.abs() > 1e-8 {
            return Err(GeomError::NotOnBoundary { point: *p, r: j.r });
        }
        normal_from_jet(&j)
    }

    /// Orthogonal split of `x` at the boundary point `p` into the complex
    /// normal line and the complex tangent space `H_p`.
    pub fn tangent_split(&self, p: &C2, x: &C2) -> Result<TangentSplit, GeomError> {
        let j = self.jet(p);
        if j.r.abs() > 1e-8 {
            return Err(GeomError::NotOnBoundary { point: *p, r: j.r });
        }
        split_with_nu(p, &j.dbar(), x)
    }

    /// Checks the defining function on the box and the boundary mesh, and
    /// validates the unique-projection width.
    pub fn validate(&mut self) -> Result<(), GeomError> {
        let spec = &self.spec;
        if spec.m < 2 {
            return Err(GeomError::Validation(format!("m must be at least 2, got {}", spec.m)));
        }
        if !(spec.eps0 > 0.0) || !(spec.chart_radius > 0.0) {
            return Err(GeomError::Validation("eps0 and R must be positive".into()));
        }
        let c = spec.bbox.center();
        let mut rng = index_rng(0x5eed, 0);
        for i in 0..256 {
            let x = if i == 0 { c } else { sampling::uniform_in_box(&spec.bbox, &mut rng) };
            let v = self.r_complex(&x);
            if v.im.abs() > 1e-12 * v.re.abs().max(1.0) {
                return Err(GeomError::Validation(format!(
                    "defining function is not real-valued: r({x}) = {v}"
                )));
            }
        }
        let rc = self.r(&c);
        if !(rc < 0.0) {
            return Err(GeomError::Validation(format!(
                "box centre {c} is not inside the domain (r = {rc}); no zero level set enclosing it"
            )));
        }
        let mesh = self.mesh();
        if mesh.missed > 0 {
            return Err(GeomError::Validation(format!(
                "{} of {} rays from the box centre never reach the zero set inside the box",
                mesh.missed,
                mesh.points.len() + mesh.missed
            )));
        }
        let min_grad = mesh.points.iter().map(|p| self.jet(p).grad_norm()).fold(f64::INFINITY, f64::min);
        if !(min_grad > 1e-6) {
            return Err(GeomError::Validation(format!("gradient vanishes on the boundary (min {min_grad:e})")));
        }
        self.delta0 = projection::validate_delta0(self, self.spec.eps0)?;
        Ok(())
    }
}

pub(crate) fn normal_from_jet(j: &Jet) -> Result<C2, GeomError> {
    let g = j.grad_norm();
    if g < 1e-10 {
        return Err(GeomError::DegenerateGradient(g));
    }
    let nu = j.dbar();
    Ok(nu * (1.0 / nu.norm()))
}

/// Decomposition `X = X_N + X_H` at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentSplit {
    pub base: C2,
    pub normal: C2,
    pub tangential: C2,
}

pub(crate) fn split_with_nu(p: &C2, nu: &C2, x: &C2) -> Result<TangentSplit, GeomError> {
    let n2 = nu.norm_sqr();
    if n2.sqrt() < 0.5e-10 {
        return Err(GeomError::DegenerateGradient(2.0 * n2.sqrt()));
    }
    let xn = nu.scale(x.hdot(*nu) / n2);
    Ok(TangentSplit { base: *p, normal: xn, tangential: *x - xn })
}
