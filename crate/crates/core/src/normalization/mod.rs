//! Boundary charts `Φ_ζ`, the polydisk radius `τ`, the pseudodistance `D`
//! and the function `g`.

mod chart;
mod pseudo;

pub use chart::BoundaryChart;
pub use pseudo::{
    d_prime, d_prime_bisection, g_between, g_function, in_polydisk, point_type, pseudodistance, pseudodistance_between,
    tau, Branch, PseudoDistValue, PseudoPoint, NORM_ACTIVE, TYPE_THRESHOLD,
};

use thiserror::Error;

use crate::point::C2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("degenerate gradient at chart centre (|∇r| = {0:e})")]
    DegenerateGradient(f64),
    #[error("ill-conditioned chart at {center}: coefficient modulus {max_coeff:e} exceeds 1e12")]
    IllConditioned { max_coeff: f64, center: C2 },
    #[error("point is not of finite type up to m (largest ‖P_k‖ = {max_norm:e})")]
    NotFiniteType { max_norm: f64 },
    #[error("point {0} is not in the domain")]
    NotInterior(C2),
    #[error(transparent)]
    Geom(#[from] crate::geometry::GeomError),
}
