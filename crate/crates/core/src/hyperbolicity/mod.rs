//! Audits of the quantitative claims: each one draws a seeded sample,
//! fits the constants of an inequality, summarises residuals and checks
//! that the fits are finite and stable when the sample is doubled.
//!
//! Sample `i` of every family depends only on `(seed, i)`, so the first
//! half of a sample is the sample of half the size. Stability compares the
//! fit on that half with the fit on the whole.

mod distance;
mod gromov;
mod normal_form;
mod report;
mod samples;

pub use distance::{estimate_theorem_constant, kobayashi_audit, normal_line_audit, theorem_pairs, PairCase, TheoremPair};
pub use gromov::{hyperbolicity_scan, product_lemma_audit, visual_metric_audit, visual_pairs, DistMode, GSurrogate};
pub use normal_form::{chart_audit, lemma32_audit, quasimetric_audit, tau_scaling_audit};
pub use report::{AuditReport, Check, Relation, SampleInfo, Stability, Summary, Table, SCHEMA_VERSION};
pub use samples::{clustered_pool, quadruples};

use std::sync::OnceLock;

use crate::config::Tolerances;
use crate::geometry::Domain;
use crate::metric::{DistanceEstimator, EstimatorConfig};

/// `(x|y)_w = ½(d(x,w) + d(y,w) − d(x,y))`.
pub fn gromov_product<P>(d: impl Fn(&P, &P) -> f64, x: &P, y: &P, w: &P) -> f64 {
    0.5 * (d(x, w) + d(y, w) - d(x, y))
}

/// `d(x,w) + d(y,z) − max{d(x,z) + d(y,w), d(x,y) + d(z,w)}`.
pub fn four_point_defect<P>(d: impl Fn(&P, &P) -> f64, x: &P, w: &P, y: &P, z: &P) -> f64 {
    d(x, w) + d(y, z) - (d(x, z) + d(y, w)).max(d(x, y) + d(z, w))
}

/// Largest defect over the three pairings of a quadruple; twice the
/// hyperbolicity constant it certifies.
pub fn max_defect<P>(d: impl Fn(&P, &P) -> f64, q: [&P; 4]) -> f64 {
    let [a, b, c, e] = q;
    four_point_defect(&d, a, b, c, e).max(four_point_defect(&d, a, c, b, e)).max(four_point_defect(&d, a, e, b, c))
}

/// What every audit needs: the domain, the seed, the depth range, the
/// tolerances and a distance estimator shared between suites.
pub struct AuditContext<'a> {
    pub dom: &'a Domain,
    pub seed: u64,
    pub delta_range: (f64, f64),
    pub tol: Tolerances,
    estimator_cfg: EstimatorConfig,
    estimator: OnceLock<DistanceEstimator<'a>>,
}

impl<'a> AuditContext<'a> {
    pub fn new(dom: &'a Domain, seed: u64) -> Self {
        AuditContext {
            dom,
            seed,
            delta_range: (1e-4, dom.eps0()),
            tol: Tolerances::default(),
            estimator_cfg: EstimatorConfig::default(),
            estimator: OnceLock::new(),
        }
    }

    pub fn with_delta_range(mut self, range: (f64, f64)) -> Self {
        self.delta_range = range;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_estimator(mut self, cfg: EstimatorConfig) -> Self {
        self.estimator_cfg = cfg;
        self.estimator = OnceLock::new();
        self
    }

    pub fn estimator(&self) -> &DistanceEstimator<'a> {
        self.estimator.get_or_init(|| DistanceEstimator::new(self.dom, self.estimator_cfg.clone()))
    }

    /// The configured depth range cut to the open collar `δ < ε₀`.
    pub fn collar_range(&self) -> (f64, f64) {
        let top = self.dom.eps0() * (1.0 - 1e-9);
        (self.delta_range.0.min(top), self.delta_range.1.min(top))
    }

    pub(crate) fn report(&self, audit: &str, range: (f64, f64), description: &str) -> AuditReport {
        AuditReport::new(audit, self.dom.name(), self.seed, range, description)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_identities() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        assert_eq!(gromov_product(d, &1.0, &1.0, &4.0), 3.0);
        assert_eq!(gromov_product(d, &1.0, &4.0, &4.0), 0.0);
        assert_eq!(four_point_defect(d, &2.0, &2.0, &2.0, &2.0), 0.0);
        assert!(four_point_defect(d, &0.0, &3.0, &0.0, &3.0) <= 0.0);
        // the real line is 0-hyperbolic
        assert!(max_defect(d, [&0.0, &1.5, &-2.0, &7.0]) <= 0.0);
    }
}
