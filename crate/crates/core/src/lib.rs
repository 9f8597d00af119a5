//! Numerical laboratory for Catlin-type metrics and Gromov hyperbolicity
//! on finite-type pseudoconvex domains in C².
//!
//! The crate is organised bottom-up: [`symbolic`] expressions feed the
//! [`geometry`] of a domain, from which [`normalization`] builds boundary
//! charts and the pseudodistance, [`metric`] evaluates the Finsler metric
//! and estimates distances, and [`hyperbolicity`] runs the audits.

pub mod config;
pub mod error;
pub mod geometry;
pub mod hyperbolicity;
pub mod metric;
pub mod normalization;
pub mod point;
pub mod runner;
pub mod symbolic;

pub use error::{Error, Result};
pub use point::C2;
pub use num_complex::Complex64;
