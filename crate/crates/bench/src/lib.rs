//! Fixed inputs shared by the benchmarks.

use catlin_core::geometry::{load_domain, sample_collar, CollarPoint, Domain};

pub const SEED: u64 = 7;

pub fn domain(name: &str) -> Domain {
    load_domain(name).expect("registry domain")
}

/// Collar points at depths in `[1e-4, 0.1]`.
pub fn collar(dom: &Domain, n: usize) -> Vec<CollarPoint> {
    sample_collar(dom, n, (1e-4, 0.1), SEED)
}
