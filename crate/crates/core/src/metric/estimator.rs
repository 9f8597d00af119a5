//! Upper bounds for `d_K̃` with certificate curves.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::quadrature::{segment_length, QuadratureConfig};
use super::MetricError;
use crate::geometry::Domain;
use crate::point::C2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Answer same-normal pairs by the exact `|log(δ(y)/δ(x))|`. Turning it
    /// off sends them through the curve family, an independent route.
    pub normal_shortcut: bool,
    /// Size of the log-grid of crossing heights in `[δ(x)∨δ(y), ε₀]`.
    pub heights: usize,
    pub use_graph: bool,
    pub graph_nodes: usize,
    pub graph_levels: usize,
    /// Neighbours per cloud node.
    pub graph_k: usize,
    /// Links from each endpoint into the cloud.
    pub graph_links: usize,
    pub descent_rounds: usize,
    /// Vertex cap for midpoint insertion.
    pub max_vertices: usize,
    pub quadrature: QuadratureConfig,
    pub trial: QuadratureConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            normal_shortcut: true,
            heights: 12,
            use_graph: true,
            graph_nodes: 2000,
            graph_levels: 12,
            graph_k: 12,
            graph_links: 4,
            descent_rounds: 20,
            max_vertices: 8,
            quadrature: QuadratureConfig::accurate(),
            trial: QuadratureConfig::trial(),
        }
    }
}

impl EstimatorConfig {
    /// Lift/cross candidates and descent only.
    pub fn without_graph() -> Self {
        EstimatorConfig { use_graph: false, ..Self::default() }
    }

    /// Best lift/cross candidate without descent: the cheapest setting,
    /// for scans that need thousands of estimates.
    pub fn light() -> Self {
        EstimatorConfig { use_graph: false, descent_rounds: 0, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NormalExact,
    CurveFamily,
    Graph,
    ConcatenationMin,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Upper bound on `d_K̃(x, y)`.
    pub value: f64,
    /// Polyline from `x` to `y` whose `K̃`-length is `value`.
    pub certificate: Vec<C2>,
    pub method: Method,
    /// The graph candidate was requested but the cloud was disconnected.
    pub graph_fallback: bool,
}

#[derive(Clone, Copy)]
struct Vertex {
    foot: C2,
    normal: C2,
    delta: f64,
}

type SegKey = ([u64; 4], [u64; 4], bool);

const SEGMENT_CACHE_CAP: usize = 1 << 18;

pub struct DistanceEstimator<'a> {
    dom: &'a Domain,
    cfg: EstimatorConfig,
    graph: OnceLock<Graph>,
    /// Segment lengths by exact endpoints; crossings at the top height
    /// recur across pairs that share a boundary foot.
    segments: Mutex<HashMap<SegKey, Result<f64, MetricError>>>,
}

impl<'a> DistanceEstimator<'a> {
    pub fn new(dom: &'a Domain, cfg: EstimatorConfig) -> Self {
        DistanceEstimator { dom, cfg, graph: OnceLock::new(), segments: Mutex::new(HashMap::new()) }
    }

    fn segment(&self, a: &C2, b: &C2, accurate: bool) -> Result<f64, MetricError> {
        let key = (a.key(), b.key(), accurate);
        if let Some(v) = self.segments.lock().unwrap().get(&key) {
            return v.clone();
        }
        let q = if accurate { &self.cfg.quadrature } else { &self.cfg.trial };
        let v = segment_length(self.dom, a, b, q, 0);
        let mut cache = self.segments.lock().unwrap();
        if cache.len() >= SEGMENT_CACHE_CAP {
            cache.clear();
        }
        cache.insert(key, v.clone());
        v
    }

    /// Accurate `K̃`-length of a polyline through the segment cache.
    fn length(&self, poly: &[C2]) -> Result<f64, MetricError> {
        let mut total = 0.0;
        for (i, w) in poly.windows(2).enumerate() {
            total += self.segment(&w[0], &w[1], true).map_err(|e| match e {
                MetricError::ExitsDomain { point, rho, .. } => MetricError::ExitsDomain { segment: i, point, rho },
                e => e,
            })?;
        }
        Ok(total)
    }

    pub fn domain(&self) -> &Domain {
        self.dom
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    fn graph(&self) -> &Graph {
        self.graph.get_or_init(|| {
            Graph::build(self.dom, self.cfg.graph_nodes, self.cfg.graph_levels, self.cfg.graph_k, &self.cfg.trial)
        })
    }

    fn vertex(&self, x: &C2) -> Result<Vertex, MetricError> {
        let f = self.dom.foot(x)?;
        if !f.inside || f.distance == 0.0 {
            return Err(MetricError::NotInterior(*x));
        }
        let normal = self.dom.outward_normal(&f.point)?;
        Ok(Vertex { foot: f.point, normal, delta: f.distance })
    }

    pub fn estimate(&self, x: &C2, y: &C2) -> Result<DistanceEstimate, MetricError> {
        if x == y {
            self.vertex(x)?;
            return Ok(DistanceEstimate { value: 0.0, certificate: vec![*x], method: Method::CurveFamily, graph_fallback: false });
        }
        // one orientation for both argument orders keeps the estimate symmetric
        let flipped = x.lex_cmp(y).is_gt();
        let (p, q) = if flipped { (*y, *x) } else { (*x, *y) };
        let mut est = self.estimate_ordered(&p, &q)?;
        if flipped {
            est.certificate.reverse();
        }
        Ok(est)
    }

    fn estimate_ordered(&self, p: &C2, q: &C2) -> Result<DistanceEstimate, MetricError> {
        let eps0 = self.dom.eps0();
        let vp = self.vertex(p)?;
        let vq = self.vertex(q)?;
        if self.cfg.normal_shortcut && vp.foot.dist(vq.foot) < 1e-8 && vp.delta < eps0 && vq.delta < eps0 {
            return Ok(DistanceEstimate {
                value: (vq.delta / vp.delta).ln().abs(),
                certificate: vec![*p, *q],
                method: Method::NormalExact,
                graph_fallback: false,
            });
        }

        let trial = &self.cfg.trial;
        let mut candidates: Vec<(Vec<C2>, f64, Method)> = Vec::new();
        let mut first_err = None;
        let mut push = |c: Result<(Vec<C2>, f64), MetricError>, m: Method| match c {
            Ok((poly, len)) => candidates.push((poly, len, m)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        };

        push(self.segment(p, q, false).map(|l| (vec![*p, *q], l)), Method::CurveFamily);

        let lo = vp.delta.max(vq.delta).min(eps0);
        let n = self.cfg.heights.max(1);
        for i in 0..n {
            let h = if n == 1 || lo >= eps0 { eps0 } else { lo * (eps0 / lo).powf(i as f64 / (n - 1) as f64) };
            push(self.lifted(p, &vp, q, &vq, h), Method::CurveFamily);
            if lo >= eps0 {
                break;
            }
        }

        let mut graph_fallback = false;
        if self.cfg.use_graph {
            match self.graph().shortest(self.dom, p, q, self.cfg.graph_links, trial) {
                Some(c) => push(Ok(c), Method::Graph),
                None => graph_fallback = true,
            }
        }

        let Some(best) = candidates.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
            return Err(first_err.unwrap_or(MetricError::NotInterior(*p)));
        };
        let (start, _, method) = best;
        let descended = self.descend(start.clone());
        let mut value = self.length(&start)?;
        let mut certificate = start;
        // trial lengths only rank curves; keep descent only if it really helped
        if descended != certificate {
            if let Ok(l) = self.length(&descended) {
                if l < value {
                    value = l;
                    certificate = descended;
                }
            }
        }
        Ok(DistanceEstimate { value, certificate, method, graph_fallback })
    }

    /// `p ↑ h`, straight across, `↓ q`. Endpoints already at height `≥ h`
    /// are not moved.
    fn lifted(&self, p: &C2, vp: &Vertex, q: &C2, vq: &Vertex, h: f64) -> Result<(Vec<C2>, f64), MetricError> {
        let mut poly = vec![*p];
        let mut len = 0.0;
        let lift = |v: &Vertex| if v.delta < h { Some(v.foot - v.normal * h) } else { None };
        let pl = lift(vp);
        let ql = lift(vq);
        if let Some(a) = pl {
            poly.push(a);
            len += (h / vp.delta).ln();
        }
        let a = pl.unwrap_or(*p);
        let b = ql.unwrap_or(*q);
        len += self.segment(&a, &b, false)?;
        if let Some(b) = ql {
            poly.push(b);
            len += (h / vq.delta).ln();
        }
        poly.push(*q);
        poly.dedup();
        Ok((poly, len))
    }

    /// Midpoint insertion plus coordinate descent on the interior vertices.
    fn descend(&self, mut poly: Vec<C2>) -> Vec<C2> {
        let seg = |a: &C2, b: &C2| self.segment(a, b, false).unwrap_or(f64::INFINITY);
        let mut lens: Vec<f64> = poly.windows(2).map(|w| seg(&w[0], &w[1])).collect();
        for round in 0..self.cfg.descent_rounds {
            let before: f64 = lens.iter().sum();

            if poly.len() < self.cfg.max_vertices {
                let mut order: Vec<usize> = (0..lens.len()).collect();
                order.sort_by(|a, b| lens[*b].total_cmp(&lens[*a]));
                for i in order {
                    let (a, b) = (poly[i], poly[i + 1]);
                    let same_normal = match (self.vertex(&a), self.vertex(&b)) {
                        (Ok(va), Ok(vb)) => va.foot.dist(vb.foot) < 1e-8,
                        _ => true,
                    };
                    if same_normal || !lens[i].is_finite() {
                        continue;
                    }
                    let mid = (a + b) * 0.5;
                    poly.insert(i + 1, mid);
                    let (l1, l2) = (seg(&a, &mid), seg(&mid, &b));
                    lens.splice(i..=i, [l1, l2]);
                    break;
                }
            }
            let s = 0.5 * 0.85f64.powi(round as i32);
            for i in 1..poly.len().saturating_sub(1) {
                let (prev, next) = (poly[i - 1], poly[i + 1]);
                let current = lens[i - 1] + lens[i];
                let mut moves = vec![poly[i] + ((prev + next) * 0.5 - poly[i]) * s];
                if let Ok(v) = self.vertex(&poly[i]) {
                    if v.delta < self.dom.eps0() {
                        moves.push(v.foot - v.normal * (v.delta * s.exp()).min(self.dom.eps0()));
                        moves.push(v.foot - v.normal * (v.delta * (-s).exp()));
                    }
                }
                let mut best: Option<(C2, f64, f64)> = None;
                for cand in moves {
                    if !self.dom.is_inside(&cand) {
                        continue;
                    }
                    let (l1, l2) = (seg(&prev, &cand), seg(&cand, &next));
                    let total = l1 + l2;
                    if total < current * (1.0 - 1e-9) && best.as_ref().map_or(true, |b| total < b.1 + b.2) {
                        best = Some((cand, l1, l2));
                    }
                }
                if let Some((cand, l1, l2)) = best {
                    poly[i] = cand;
                    lens[i - 1] = l1;
                    lens[i] = l2;
                }
            }
            let after: f64 = lens.iter().sum();
            if after > before * (1.0 - 1e-4) {
                break;
            }
        }
        poly
    }
}

/// Pairwise estimates over a point set, repaired to satisfy the triangle
/// inequality by minimising over concatenations (Floyd–Warshall).
#[derive(Clone, Debug, Serialize)]
pub struct DistanceMatrix {
    pub points: Vec<C2>,
    values: Vec<f64>,
    methods: Vec<Method>,
    /// Intermediate point index for repaired entries.
    via: Vec<Option<usize>>,
    certificates: Vec<Vec<C2>>,
    /// Pairs whose estimate failed; their entries come from repair only.
    pub failures: usize,
    /// Largest amount by which repair lowered an entry.
    pub max_repair: f64,
}

impl DistanceMatrix {
    pub fn compute(est: &DistanceEstimator, points: &[C2]) -> DistanceMatrix {
        let n = points.len();
        let mut values = vec![f64::INFINITY; n * n];
        let mut methods = vec![Method::CurveFamily; n * n];
        let mut certificates = vec![Vec::new(); n * n];
        let mut failures = 0;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let estimates: Vec<_> = pairs.par_iter().map(|&(i, j)| est.estimate(&points[i], &points[j])).collect();
        for i in 0..n {
            values[i * n + i] = 0.0;
            certificates[i * n + i] = vec![points[i]];
        }
        for (&(i, j), e) in pairs.iter().zip(estimates) {
            match e {
                Ok(e) => {
                    values[i * n + j] = e.value;
                    values[j * n + i] = e.value;
                    methods[i * n + j] = e.method;
                    methods[j * n + i] = e.method;
                    let mut back = e.certificate.clone();
                    back.reverse();
                    certificates[i * n + j] = e.certificate;
                    certificates[j * n + i] = back;
                }
                Err(_) => failures += 1,
            }
        }
        let mut via = vec![None; n * n];
        let mut max_repair = 0.0f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let through = values[i * n + k] + values[k * n + j];
                    let cur = values[i * n + j];
                    if through < cur - 1e-12 {
                        if cur.is_finite() {
                            max_repair = max_repair.max(cur - through);
                        }
                        values[i * n + j] = through;
                        methods[i * n + j] = Method::ConcatenationMin;
                        via[i * n + j] = Some(k);
                    }
                }
            }
        }
        DistanceMatrix { points: points.to_vec(), values, methods, via, certificates, failures, max_repair }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn method(&self, i: usize, j: usize) -> Method {
        self.methods[i * self.len() + j]
    }

    /// Certificate polyline for the (possibly repaired) entry.
    pub fn certificate(&self, i: usize, j: usize) -> Vec<C2> {
        let n = self.len();
        match self.via[i * n + j] {
            None => self.certificates[i * n + j].clone(),
            Some(k) => {
                let mut a = self.certificate(i, k);
                let b = self.certificate(k, j);
                a.pop();
                a.extend(b);
                a
            }
        }
    }

    /// `max(d(i,j) − d(i,k) − d(k,j))` over all triples (≤ 0 after repair).
    pub fn triangle_residual(&self) -> f64 {
        let n = self.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = self.get(i, j) - self.get(i, k) - self.get(k, j);
                    if r.is_finite() {
                        worst = worst.max(r);
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::curve_length;
    use crate::geometry::{load_domain, sample_collar, CollarPoint};

    fn light() -> EstimatorConfig {
        EstimatorConfig { use_graph: false, descent_rounds: 4, max_vertices: 6, ..EstimatorConfig::default() }
    }

    #[test]
    fn equal_points_and_normal_pairs() {
        let b = load_domain("ball").unwrap();
        let est = DistanceEstimator::new(&b, light());
        let x = C2::from_real([0.0, 0.0, 0.9, 0.0]);
        assert_eq!(est.estimate(&x, &x).unwrap().value, 0.0);
        let y = C2::from_real([0.0, 0.0, 0.99, 0.0]);
        let e = est.estimate(&x, &y).unwrap();
        assert_eq!(e.method, Method::NormalExact);
        assert!((e.value - 10f64.ln()).abs() < 1e-10);
        let len = curve_length(&b, &e.certificate, &QuadratureConfig::accurate()).unwrap();
        assert!((len - e.value).abs() < 1e-3 * e.value);
        assert!(est.estimate(&x, &C2::from_real([0.0, 0.0, 1.1, 0.0])).is_err());
    }

    #[test]
    fn symmetric_with_certificates_and_lower_bound() {
        let e2 = load_domain("egg2").unwrap();
        let est = DistanceEstimator::new(&e2, light());
        let pts: Vec<CollarPoint> = sample_collar(&e2, 6, (1e-3, 0.2), 5);
        for w in pts.windows(2) {
            let (x, y) = (w[0].point, w[1].point);
            let a = est.estimate(&x, &y).unwrap();
            let b = est.estimate(&y, &x).unwrap();
            assert_eq!(a.value, b.value);
            assert_eq!(a.certificate[0], x);
            assert_eq!(*a.certificate.last().unwrap(), y);
            let len = curve_length(&e2, &a.certificate, &QuadratureConfig::accurate()).unwrap();
            assert!((len - a.value).abs() <= 1e-3 * a.value);
            assert!(a.value >= (w[0].delta / w[1].delta).ln().abs() - 1e-6);
        }
    }

    #[test]
    fn repaired_matrix_is_a_metric() {
        let b = load_domain("ball").unwrap();
        let est = DistanceEstimator::new(&b, light());
        let pts: Vec<C2> = sample_collar(&b, 5, (1e-3, 0.2), 9).into_iter().map(|c| c.point).collect();
        let m = DistanceMatrix::compute(&est, &pts);
        assert_eq!(m.failures, 0);
        assert!(m.triangle_residual() <= 1e-9);
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert_eq!(m.get(i, j), m.get(j, i));
                let c = m.certificate(i, j);
                assert_eq!(c[0], pts[i]);
                assert_eq!(*c.last().unwrap(), pts[j]);
            }
        }
    }
}
