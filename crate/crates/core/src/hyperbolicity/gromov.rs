use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{max_of, min_of, Table};
use super::samples::{clustered_pool, nearby_foot, quadruples};
use super::{max_defect, AuditContext, AuditReport, Stability};
use crate::geometry::{boundary_point, index_rng, log_uniform, CollarPoint, Domain};
use crate::metric::DistanceMatrix;
use crate::normalization::{pseudodistance, pseudodistance_between, ChartError, PseudoPoint};
use crate::point::C2;

/// Pool shape for the g-surrogate scans: 20 clusters of 10 points.
const VISUAL_STREAM: u64 = 9 << 40;
const G_CLUSTERS: usize = 20;
const G_PER: usize = 10;
/// Cluster size for the estimator-mode pool.
const EST_PER: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistMode {
    /// Repaired pairwise estimates over a small pool.
    Estimator,
    /// `g` symmetrised, over a larger pool.
    GSurrogate,
}

/// `D`, `g` and `r_ij = D(x_i,x_j) + δ_i∨δ_j` tabulated over a pool.
pub struct GSurrogate {
    pub deltas: Vec<f64>,
    /// `D(x_i, x_j)`, row major.
    pub d: Vec<f64>,
    n: usize,
}

impl GSurrogate {
    pub fn new(dom: &Domain, pool: &[CollarPoint]) -> Result<GSurrogate, ChartError> {
        let pts: Vec<PseudoPoint> =
            pool.par_iter().map(|c| PseudoPoint::new(dom, &c.point)).collect::<Result<_, _>>()?;
        let n = pts.len();
        let d: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| pseudodistance_between(dom, &pts[k / n], &pts[k % n]).map(|v| v.value))
            .collect::<Result<_, _>>()?;
        Ok(GSurrogate { deltas: pts.iter().map(|p| p.delta).collect(), d, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j] + self.deltas[i].max(self.deltas[j])
    }

    /// `g(x_i, x_j) = 2 log r_ij − log δ_i − log δ_j`.
    pub fn g(&self, i: usize, j: usize) -> f64 {
        2.0 * self.r(i, j).ln() - self.deltas[i].ln() - self.deltas[j].ln()
    }

    pub fn g_sym(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.g(i, j) + self.g(j, i))
    }

    /// `max |g_sym − g| = ½ max |g(x,y) − g(y,x)|` over the pool.
    pub fn c_sym(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * (self.g(i, j) - self.g(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// `r_ab r_ce / max(r_ac r_be, r_ae r_bc)`, the ratio whose log bounds
    /// the defect of `g` on the ordering `(a, b, c, e)`.
    pub fn product_ratio(&self, [a, b, c, e]: [usize; 4]) -> f64 {
        self.r(a, b) * self.r(c, e) / (self.r(a, c) * self.r(b, e)).max(self.r(a, e) * self.r(b, c))
    }

    /// Smallest `C₁ ≥ 1` with `r_ij ≤ C₁ r_ji` and `r_ij ≤ C₁(r_ik + r_kj)`
    /// over the labels of the quadruple.
    pub fn quasi_constant(&self, q: [usize; 4]) -> f64 {
        let mut c = 1.0f64;
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let rij = self.r(q[i], q[j]);
                c = c.max(rij / self.r(q[j], q[i]));
                for k in (0..4).filter(|&k| k != i && k != j) {
                    c = c.max(rij / (self.r(q[i], q[k]) + self.r(q[k], q[j])));
                }
            }
        }
        c
    }
}

fn g_pool(ctx: &AuditContext) -> Vec<CollarPoint> {
    clustered_pool(ctx.dom, G_CLUSTERS, G_PER, ctx.collar_range(), ctx.seed)
}

/// The three orderings whose defects [`max_defect`] compares.
fn orderings([a, b, c, e]: [usize; 4]) -> [[usize; 4]; 3] {
    [[a, b, c, e], [a, c, b, e], [a, e, b, c]]
}

/// Four-point scan. In g-surrogate mode `n` is the number of quadruples
/// drawn from a 200-point clustered pool; in estimator mode `n` is the
/// pool size and every 4-subset is scanned.
pub fn hyperbolicity_scan(ctx: &AuditContext, n: usize, mode: DistMode) -> AuditReport {
    match mode {
        DistMode::GSurrogate => g_scan(ctx, n),
        DistMode::Estimator => estimator_scan(ctx, n),
    }
}

fn g_scan(ctx: &AuditContext, n: usize) -> AuditReport {
    let range = ctx.collar_range();
    let mut rep = ctx.report(
        "fourpoint-g-surrogate",
        range,
        "quadruples from 20 boundary clusters of 10 collar points; distance ½(g(x,y) + g(y,x))",
    );
    rep.count("pool", G_CLUSTERS * G_PER);
    rep.count("quadruples", n);
    let g = match GSurrogate::new(ctx.dom, &g_pool(ctx)) {
        Ok(g) => g,
        Err(_) => {
            rep.exclude("chart error", G_CLUSTERS * G_PER);
            rep.check_le("pool built", 1.0, 0.0);
            return rep;
        }
    };
    let quads = quadruples(g.len(), n, ctx.seed);
    let defects: Vec<f64> =
        quads.par_iter().map(|q| max_defect(|i: &usize, j: &usize| g.g_sym(*i, *j), [&q[0], &q[1], &q[2], &q[3]])).collect();
    rep.table = Table::new(&["index", "i", "j", "k", "l", "max_defect"]);
    for (i, (q, d)) in quads.iter().zip(&defects).enumerate() {
        rep.table.push(vec![i as f64, q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64, *d]);
    }
    rep.residuals("max_defect", &defects);
    let delta = |d: &[f64]| 0.5 * max_of(d.iter().copied()).max(0.0);
    rep.fitted("delta_hat", delta(&defects[..n.div_ceil(2)]), delta(&defects), ctx.tol.drift);
    rep.constant("c_sym", g.c_sym());
    rep
}

fn estimator_scan(ctx: &AuditContext, n: usize) -> AuditReport {
    let range = ctx.collar_range();
    let pool: Vec<CollarPoint> =
        clustered_pool(ctx.dom, n.div_ceil(EST_PER), EST_PER, range, ctx.seed).into_iter().take(n).collect();
    let pts: Vec<C2> = pool.iter().map(|c| c.point).collect();
    let m = DistanceMatrix::compute(ctx.estimator(), &pts);
    let mut rep = ctx.report(
        "fourpoint-estimator",
        range,
        "all 4-subsets of a clustered collar pool; repaired pairwise estimates",
    );
    rep.count("points", n);
    rep.count("pairs", n * n.saturating_sub(1) / 2);
    rep.exclude("estimator error", m.failures);
    let d = |i: &usize, j: &usize| m.get(*i, *j);
    let subsets: Vec<[usize; 4]> = (0..n)
        .flat_map(|a| (a + 1..n).flat_map(move |b| (b + 1..n).flat_map(move |c| (c + 1..n).map(move |e| [a, b, c, e]))))
        .collect();
    let defects: Vec<f64> = subsets.par_iter().map(|q| max_defect(d, [&q[0], &q[1], &q[2], &q[3]])).collect();
    rep.count("quadruples", subsets.len());
    rep.table = Table::new(&["i", "j", "delta_i", "delta_j", "d_hat", "collar_lower_violation"]);
    let mut lower = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = (pool[i].delta / pool[j].delta).ln().abs() - m.get(i, j);
            lower.push(v);
            rep.table.push(vec![i as f64, j as f64, pool[i].delta, pool[j].delta, m.get(i, j), v]);
        }
    }
    rep.residuals("max_defect", &defects);
    let half = n / 2;
    let half_defect = max_of(subsets.iter().zip(&defects).filter(|(q, _)| q[3] < half).map(|(_, d)| *d));
    let full = 0.5 * max_of(defects.iter().copied()).max(0.0);
    rep.constant("delta_hat", full);
    rep.stability.insert("delta_hat".into(), Stability::new(0.5 * half_defect.max(0.0), full, ctx.tol.drift));
    rep.check_le("delta_hat finite", full, f64::MAX);
    rep.constant("max_repair", m.max_repair);
    rep.check_le("repaired triangle inequality", m.triangle_residual(), ctx.tol.triangle);
    rep.residuals("collar_lower_violation", &lower);
    rep.check_le("collar lower bound", max_of(lower), ctx.tol.collar_lower);
    rep
}

/// Fitted `K` with `r₁₂r₃₄ ≤ K·max(r₁₃r₂₄, r₁₄r₂₃)` against `4C₁⁴`, on
/// the quadruples of the g-surrogate scan with the same seed; also checks
/// the chain `defect ≤ 2 log K + 4 C_sym` linking the two.
pub fn product_lemma_audit(ctx: &AuditContext, n: usize) -> AuditReport {
    let range = ctx.collar_range();
    let mut rep = ctx.report(
        "productlemma",
        range,
        "quadruples shared with the g-surrogate four-point scan; r_ij = D(x_i,x_j) + max depth",
    );
    rep.count("pool", G_CLUSTERS * G_PER);
    rep.count("quadruples", n);
    let g = match GSurrogate::new(ctx.dom, &g_pool(ctx)) {
        Ok(g) => g,
        Err(_) => {
            rep.exclude("chart error", G_CLUSTERS * G_PER);
            rep.check_le("pool built", 1.0, 0.0);
            return rep;
        }
    };
    let quads = quadruples(g.len(), n, ctx.seed);
    // (K_q over the three orderings, C₁ of q, defect of g_sym)
    let rows: Vec<(f64, f64, f64)> = quads
        .par_iter()
        .map(|q| {
            let k = orderings(*q).iter().map(|o| g.product_ratio(*o)).fold(0.0, f64::max);
            let defect = max_defect(|i: &usize, j: &usize| g.g_sym(*i, *j), [&q[0], &q[1], &q[2], &q[3]]);
            (k, g.quasi_constant(*q), defect)
        })
        .collect();
    rep.table = Table::new(&["index", "i", "j", "k", "l", "K", "C1", "defect"]);
    for (i, (q, r)) in quads.iter().zip(&rows).enumerate() {
        rep.table.push(vec![i as f64, q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64, r.0, r.1, r.2]);
    }
    let h = n.div_ceil(2);
    let col = |f: fn(&(f64, f64, f64)) -> f64, upto: usize| max_of(rows[..upto].iter().map(f));
    let k_fit = col(|r| r.0, rows.len());
    let c1 = col(|r| r.1, rows.len()).max(1.0);
    rep.fitted("K", col(|r| r.0, h), k_fit, ctx.tol.drift);
    rep.fitted("C1", col(|r| r.1, h).max(1.0), c1, ctx.tol.drift);
    let bound = 4.0 * c1.powi(4);
    rep.constant("four_C1_pow4", bound);
    rep.check_le("K <= 4 C1^4 (1 + slack)", k_fit, bound * (1.0 + ctx.tol.product_slack));

    let c_sym = g.c_sym();
    rep.constant("c_sym", c_sym);
    let chain = 2.0 * k_fit.ln() + 4.0 * c_sym;
    rep.constant("chain_bound", chain);
    let defects: Vec<f64> = rows.iter().map(|r| r.2).collect();
    rep.residuals("max_defect", &defects);
    let excess = max_of(defects.iter().map(|d| d - chain));
    rep.check_le("defect <= 2 log K + 4 C_sym", excess, ctx.tol.triangle * chain.abs().max(1.0));
    rep
}

/// `n` boundary pairs `(a, b)`, `b` the foot of `a + ε·u` with `ε`
/// log-uniform in `[0.03, 1.5]`, so the pseudodistances span several
/// decades. Pair `i` depends only on `(seed, i)`.
pub fn visual_pairs(dom: &Domain, n: usize, seed: u64) -> Vec<(C2, C2)> {
    (0..n)
        .map(|i| {
            let mut rng = index_rng(seed, VISUAL_STREAM + i as u64);
            let a = boundary_point(dom, &mut rng);
            let eps = log_uniform(&mut rng, (0.03, 1.5));
            (a, nearby_foot(dom, &a, eps, &mut rng))
        })
        .collect()
}

/// Heights `2^{-k}` of the normal approach sequences.
const VISUAL_K: std::ops::RangeInclusive<i32> = 4..=12;
/// Levels at which consecutive ratios must agree.
const VISUAL_CAUCHY_FROM: i32 = 10;

/// `D(a,b)·exp((a_k|b_k)_w)` along `a_k = a − 2^{-k} n(a)`. The ratio
/// must settle as `k` grows and stay in a bounded band over the pairs.
pub fn visual_metric_audit(ctx: &AuditContext, pairs: &[(C2, C2)], w: &C2) -> AuditReport {
    let dom = ctx.dom;
    let est = ctx.estimator();
    let ks: Vec<i32> = VISUAL_K.collect();
    let mut rep = ctx.report(
        "visual",
        (2f64.powi(-*VISUAL_K.end()), 2f64.powi(-*VISUAL_K.start())),
        "seeded boundary pairs at separations 0.03 to 1.5; normal approach at heights 2^-k, k = 4..12; epsilon = 1; distances repaired by concatenation along the normals and through w",
    );
    rep.count("pairs", pairs.len());

    // distances to the base point, once per boundary point
    let mut index: HashMap<[u64; 4], usize> = HashMap::new();
    let mut points: Vec<C2> = Vec::new();
    for p in pairs.iter().flat_map(|(a, b)| [a, b]) {
        index.entry(p.key()).or_insert_with(|| {
            points.push(*p);
            points.len() - 1
        });
    }
    let approach = |p: &C2| -> Option<Vec<C2>> {
        let n = dom.outward_normal(p).ok()?;
        Some(ks.iter().map(|&k| *p - n * 2f64.powi(-k)).collect())
    };
    let seqs: Vec<Option<Vec<C2>>> = points.par_iter().map(approach).collect();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..ks.len()).map(move |k| (i, k))).collect();
    let to_w: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(i, k)| est.estimate(&seqs[i].as_ref()?[k], w).ok().map(|e| e.value))
        .collect();
    let pair_jobs: Vec<(usize, usize)> = (0..pairs.len()).flat_map(|j| (0..ks.len()).map(move |k| (j, k))).collect();
    let between: Vec<Option<f64>> = pair_jobs
        .par_iter()
        .map(|&(j, k)| {
            let (a, b) = pairs[j];
            if a == b {
                return None;
            }
            let sa = seqs[index[&a.key()]].as_ref()?;
            let sb = seqs[index[&b.key()]].as_ref()?;
            est.estimate(&sa[k], &sb[k]).ok().map(|e| e.value)
        })
        .collect();

    let nk = ks.len();
    let heights: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-k)).collect();
    // concatenation repair: a_k → a_j runs along the normal, with length
    // exactly |log(h_k/h_j)| inside the collar, and a_k → b_k may pass
    // through w
    let chain = |vals: &[Option<f64>], legs: f64| -> Vec<Option<f64>> {
        (0..nk)
            .map(|k| {
                (0..nk)
                    .filter_map(|j| vals[j].map(|v| v + legs * (heights[k] / heights[j]).ln().abs()))
                    .reduce(f64::min)
            })
            .collect()
    };
    let to_w: Vec<Option<f64>> = to_w.chunks(nk).flat_map(|c| chain(c, 1.0)).collect();
    let between: Vec<Option<f64>> = (0..pairs.len())
        .flat_map(|j| {
            let (a, b) = pairs[j];
            let direct = chain(&between[j * nk..(j + 1) * nk], 2.0);
            let (ia, ib) = (index[&a.key()], index[&b.key()]);
            let to_w = &to_w;
            (0..nk).map(move |k| match (direct[k], to_w[ia * nk + k], to_w[ib * nk + k]) {
                (Some(d), Some(x), Some(y)) => Some(d.min(x + y)),
                (d, _, _) => d,
            })
        })
        .collect();
    let first_cauchy = (VISUAL_CAUCHY_FROM - ks[0]) as usize;
    let mut cols = vec!["index".to_string(), "pseudo_distance".into(), "stable".into()];
    cols.extend(ks.iter().map(|k| format!("ratio_k{k}")));
    rep.table = Table { columns: cols, rows: Vec::new() };
    let mut finals: Vec<(usize, f64)> = Vec::new();
    let mut worst_step = Vec::new();
    for (j, (a, b)) in pairs.iter().enumerate() {
        if a == b {
            rep.exclude("identical endpoints", 1);
            continue;
        }
        let (ia, ib) = (index[&a.key()], index[&b.key()]);
        let ratios: Option<Vec<f64>> = (0..nk)
            .map(|k| {
                let dab = between[j * nk + k]?;
                let gp = 0.5 * (to_w[ia * nk + k]? + to_w[ib * nk + k]? - dab);
                Some(gp)
            })
            .collect();
        let d = pseudodistance(dom, a, b).ok().map(|v| v.value);
        let (Some(products), Some(d)) = (ratios, d) else {
            rep.exclude("estimator error", 1);
            continue;
        };
        let ratios: Vec<f64> = products.iter().map(|gp| d * gp.exp()).collect();
        let step = (first_cauchy..nk).map(|k| (ratios[k] / ratios[k - 1] - 1.0).abs()).fold(0.0, f64::max);
        worst_step.push(step);
        let stable = step <= ctx.tol.visual_cauchy;
        let mut row = vec![j as f64, d, if stable { 1.0 } else { 0.0 }];
        row.extend_from_slice(&ratios);
        rep.table.push(row);
        if stable {
            finals.push((j, ratios[nk - 1]));
        } else {
            rep.exclude("not stabilised", 1);
        }
    }
    rep.residuals("cauchy_step", &worst_step);
    let values: Vec<f64> = finals.iter().map(|f| f.1).collect();
    rep.residuals("stabilised_ratio", &values);
    let band = |v: &[f64]| if v.is_empty() { f64::NAN } else { max_of(v.iter().copied()) / min_of(v.iter().copied()) };
    let half: Vec<f64> = finals.iter().filter(|f| f.0 < pairs.len().div_ceil(2)).map(|f| f.1).collect();
    rep.constant("ratio_min", min_of(values.iter().copied()));
    rep.constant("ratio_max", max_of(values.iter().copied()));
    rep.fitted("band", band(&half), band(&values), ctx.tol.drift);
    rep.check_le("band", band(&values), ctx.tol.visual_band);
    let kept = finals.len() as f64 / pairs.len().max(1) as f64;
    rep.constant("kept_fraction", kept);
    rep.check_ge("stabilised fraction", kept, ctx.tol.visual_keep);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::load_domain;

    #[test]
    fn product_ratio_permutes_with_labels() {
        let b = load_domain("ball").unwrap();
        let pool = clustered_pool(&b, 2, 3, (1e-3, 0.1), 4);
        let g = GSurrogate::new(&b, &pool).unwrap();
        assert_eq!(g.product_ratio([0, 0, 0, 0]), 1.0);
        let q = [0, 2, 4, 5];
        let k = g.product_ratio(q);
        assert!(k > 0.0 && k.is_finite());
        assert!(g.quasi_constant(q) >= 1.0);
        assert!(g.c_sym() >= 0.0);
        assert_eq!(g.g_sym(1, 3), g.g_sym(3, 1));
        assert_eq!(g.g(2, 2), 0.0);
    }
}
