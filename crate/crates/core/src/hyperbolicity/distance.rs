use rayon::prelude::*;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::{ls_slope, max_of, min_of, Table};
use super::samples::nearby_foot;
use super::{AuditContext, AuditReport};
use crate::geometry::{boundary_point, gaussian_direction, index_rng, log_uniform, sample_collar, CollarPoint, Domain};
use crate::metric::{
    ball_kobayashi_distance, ball_kobayashi_metric, catlin_metric, curve_length, DistanceEstimate, DistanceEstimator,
    EstimatorConfig,
};
use crate::normalization::{g_between, pseudodistance_between, tau, PseudoPoint};
use crate::point::C2;
use crate::{Complex64, Error};

const KOB_STREAM: u64 = 6 << 40;
const KOB_PAIR_STREAM: u64 = 7 << 40;
const THEOREM_DEPTH_STREAM: u64 = 8 << 40;

fn half(n: usize) -> usize {
    n.div_ceil(2)
}

fn rel_err(v: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        v.abs()
    } else {
        (v - exact).abs() / exact.abs()
    }
}

struct NormalRow {
    exact: f64,
    shortcut: f64,
    family: f64,
    certificate: f64,
}

/// Same-normal pairs: the estimate must reproduce `|log(δ(y)/δ(x))|`,
/// both through the exact shortcut and through the curve family alone.
pub fn normal_line_audit(ctx: &AuditContext, n: usize) -> AuditReport {
    let dom = ctx.dom;
    let range = ctx.collar_range();
    let quad = ctx.estimator().config().quadrature.clone();
    let family_cfg = EstimatorConfig { normal_shortcut: false, use_graph: false, ..ctx.estimator().config().clone() };
    let family = DistanceEstimator::new(dom, family_cfg);
    let rows: Vec<Option<NormalRow>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = index_rng(ctx.seed, i as u64);
            let foot = boundary_point(dom, &mut rng);
            let x = CollarPoint::at_depth(dom, foot, log_uniform(&mut rng, range));
            let y = CollarPoint::at_depth(dom, foot, log_uniform(&mut rng, range));
            let a = ctx.estimator().estimate(&x.point, &y.point).ok()?;
            let b = family.estimate(&x.point, &y.point).ok()?;
            let cert = |e: &DistanceEstimate| curve_length(dom, &e.certificate, &quad).map(|l| rel_err(l, e.value)).ok();
            Some(NormalRow {
                exact: (y.delta / x.delta).ln().abs(),
                shortcut: a.value,
                family: b.value,
                certificate: cert(&a)?.max(cert(&b)?),
            })
        })
        .collect();

    let mut rep = ctx.report("normalline", range, "pairs on one inward normal; shortcut and curve-family routes");
    rep.count("pairs", n);
    rep.table = Table::new(&["index", "exact", "shortcut", "family", "shortcut_rel", "family_rel", "certificate_rel"]);
    let (mut ea, mut eb, mut ec) = (vec![], vec![], vec![]);
    for (i, r) in rows.iter().enumerate() {
        let Some(r) = r else {
            rep.exclude("estimator error", 1);
            continue;
        };
        let (a, b) = (rel_err(r.shortcut, r.exact), rel_err(r.family, r.exact));
        rep.table.push(vec![i as f64, r.exact, r.shortcut, r.family, a, b, r.certificate]);
        ea.push(a);
        eb.push(b);
        ec.push(r.certificate);
    }
    rep.residuals("shortcut_rel", &ea);
    rep.residuals("family_rel", &eb);
    rep.residuals("certificate_rel", &ec);
    rep.check_le("shortcut matches log ratio", max_of(ea), ctx.tol.normal_line_rel);
    rep.check_le("curve family matches log ratio", max_of(eb), ctx.tol.normal_line_rel);
    rep.check_le("certificates re-integrate", max_of(ec), ctx.tol.certificate_rel);
    rep.check_le("estimates succeeded", rep.excluded.values().sum::<usize>() as f64, 0.0);
    rep
}

/// Which branch of the two-sided estimate a pair was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCase {
    /// `π(x) = π(y)`.
    SameProjection,
    /// `D(x,y) ≤ δ(x)∨δ(y)`.
    Near,
    /// `D(x,y) > δ(x)∨δ(y)`.
    Far,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremPair {
    pub x: CollarPoint,
    pub y: CollarPoint,
    pub case: PairCase,
}

/// Number of depth strata in [`theorem_pairs`].
pub const THEOREM_STRATA: usize = 10;
/// Largest depth and crossing scale of a pair, in multiples of its
/// smaller depth: depth ratio up to 2.5 times `λ` up to 10 (far pairs).
pub const THEOREM_SPAN: f64 = 25.0;
/// Crossing scales stay below this fraction of the collar width, away
/// from the clamp at `ε₀`.
const THEOREM_HEADROOM: f64 = 0.25;

/// The smaller depth of [`theorem_pairs`] ranges over
/// `[range.0, headroom·range.1 / span]`.
pub fn theorem_depths(range: (f64, f64)) -> (f64, f64) {
    (range.0, (THEOREM_HEADROOM * range.1 / THEOREM_SPAN).max(range.0))
}

/// Pairs cycling through the three cases, in a stratified design: pair
/// `i` has shape `i / THEOREM_STRATA` and lies in depth stratum
/// `i % THEOREM_STRATA`. A shape (base point, case, depth ratio, `λ`,
/// angle) is built at the scale of the pair's own depths, tangential
/// offsets being polydisk radii at `λ·δ(x)∨δ(y)`, and every stratum holds
/// the same shapes. So any trend of the residuals in depth is the
/// estimate's and not the sample's.
pub fn theorem_pairs(dom: &Domain, n: usize, range: (f64, f64), seed: u64) -> Vec<TheoremPair> {
    let (lo, hi) = theorem_depths(range);
    let width = (hi / lo).ln() / THEOREM_STRATA as f64;
    (0..n)
        .map(|i| {
            let (shape, stratum) = (i / THEOREM_STRATA, i % THEOREM_STRATA);
            let mut rng = index_rng(seed, shape as u64);
            let u: f64 = index_rng(seed, THEOREM_DEPTH_STREAM + i as u64).random();
            let dmin = lo * (width * (stratum as f64 + u)).exp();
            let fx = boundary_point(dom, &mut rng);
            let case = [PairCase::SameProjection, PairCase::Near, PairCase::Far][shape % 3];
            let other = dmin * log_uniform(&mut rng, (1.0, 2.5));
            let (dx, dy) = if rng.random::<bool>() { (dmin, other) } else { (other, dmin) };
            let x = CollarPoint::at_depth(dom, fx, dx);
            if case == PairCase::SameProjection {
                return TheoremPair { x, y: CollarPoint::at_depth(dom, fx, dy), case };
            }
            let lambda = match case {
                PairCase::Near => log_uniform(&mut rng, (0.02, 0.5)),
                _ => log_uniform(&mut rng, (2.0, 10.0)),
            };
            let scale = lambda * dx.max(dy);
            let theta: f64 = rng.random_range(0.0..TAU);
            let fy = dom
                .chart(&fx)
                .ok()
                .and_then(|ch| {
                    let t = tau(&ch, scale).ok()?.min(0.4);
                    let q = ch.invert(&C2::new(Complex64::new(0.0, 0.0), Complex64::from_polar(t, theta)));
                    dom.foot(&q).ok().map(|f| f.point)
                })
                .unwrap_or_else(|| nearby_foot(dom, &fx, scale.sqrt(), &mut rng));
            TheoremPair { x, y: CollarPoint::at_depth(dom, fy, dy), case }
        })
        .collect()
}

struct TheoremRow {
    d_hat: f64,
    g: f64,
    pseudo: f64,
}

/// Residuals `d̂ − g` of the two-sided estimate `g − C ≤ d ≤ g + C`.
/// `d̂` is an upper bound for the distance, so `max(d̂ − g)` bounds the
/// upper constant from above and `max(g − d̂)` bounds the lower one from
/// below.
pub fn estimate_theorem_constant(ctx: &AuditContext, pairs: &[TheoremPair]) -> AuditReport {
    let dom = ctx.dom;
    let rows: Vec<Option<TheoremRow>> = pairs
        .par_iter()
        .map(|p| {
            let px = PseudoPoint::new(dom, &p.x.point).ok()?;
            let py = PseudoPoint::new(dom, &p.y.point).ok()?;
            let g = g_between(dom, &px, &py).ok()?;
            let pseudo = pseudodistance_between(dom, &px, &py).ok()?.value;
            let d_hat = ctx.estimator().estimate(&p.x.point, &p.y.point).ok()?.value;
            Some(TheoremRow { d_hat, g, pseudo })
        })
        .collect();

    let lo = pairs.iter().map(|p| p.x.delta.min(p.y.delta)).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.x.delta.max(p.y.delta)).fold(0.0, f64::max);
    let mut rep = ctx.report(
        "theorem12",
        (lo, hi),
        "collar pairs cycling same-projection, D <= max depth, D > max depth; scale-invariant shapes repeated in each of 10 depth strata",
    );
    rep.count("pairs", pairs.len());
    for (case, name) in [(PairCase::SameProjection, "same_projection"), (PairCase::Near, "near"), (PairCase::Far, "far")] {
        rep.count(name, pairs.iter().filter(|p| p.case == case).count());
    }
    rep.table = Table::new(&[
        "index", "case", "delta_x", "delta_y", "D", "g", "d_hat", "residual", "collar_lower_violation",
    ]);
    // (log 1/δmin, d̂ − g, index)
    let mut res: Vec<(f64, f64, usize)> = Vec::new();
    let mut lower_violation = Vec::new();
    for (i, (p, r)) in pairs.iter().zip(&rows).enumerate() {
        let Some(r) = r else {
            rep.exclude("estimator error", 1);
            continue;
        };
        let v = (p.y.delta / p.x.delta).ln().abs() - r.d_hat;
        lower_violation.push(v);
        let residual = r.d_hat - r.g;
        res.push(((1.0 / p.x.delta.min(p.y.delta)).ln(), residual, i));
        rep.table.push(vec![
            i as f64,
            p.case as u8 as f64,
            p.x.delta,
            p.y.delta,
            r.pseudo,
            r.g,
            r.d_hat,
            residual,
            v,
        ]);
    }
    let h = half(pairs.len());
    let upper: Vec<f64> = res.iter().map(|r| r.1).collect();
    let lower: Vec<f64> = res.iter().map(|r| -r.1).collect();
    let abs: Vec<f64> = res.iter().map(|r| r.1.abs()).collect();
    rep.residuals("d_hat_minus_g", &upper);
    for (name, col) in [("upper_constant", &upper), ("lower_constant", &lower), ("abs_residual", &abs)] {
        let first: Vec<f64> = res.iter().zip(col.iter()).filter(|(r, _)| r.2 < h).map(|(_, v)| *v).collect();
        rep.fitted(name, max_of(first), max_of(col.iter().copied()), ctx.tol.drift);
    }

    // per-decile maxima against log(1/δ)
    let mut order: Vec<usize> = (0..res.len()).collect();
    order.sort_by(|a, b| res[*a].0.total_cmp(&res[*b].0).then(res[*a].2.cmp(&res[*b].2)));
    let groups = 10.min(res.len());
    let (mut xs, mut ys_abs, mut ys_up, mut ys_low) = (vec![], vec![], vec![], vec![]);
    for k in 0..groups {
        let idx = &order[k * res.len() / groups..(k + 1) * res.len() / groups];
        xs.push(idx.iter().map(|&j| res[j].0).sum::<f64>() / idx.len() as f64);
        ys_abs.push(max_of(idx.iter().map(|&j| res[j].1.abs())));
        ys_up.push(max_of(idx.iter().map(|&j| res[j].1)));
        ys_low.push(max_of(idx.iter().map(|&j| -res[j].1)));
    }
    rep.check_le("decile slope of max |residual|", ls_slope(&xs, &ys_abs), ctx.tol.decile_slope);
    rep.check_le("decile slope of max upper residual", ls_slope(&xs, &ys_up), ctx.tol.decile_slope);
    rep.check_le("decile slope of max lower residual", ls_slope(&xs, &ys_low), ctx.tol.decile_slope);
    rep.constant("log_inv_delta_min", min_of(xs.iter().copied()));
    rep.constant("log_inv_delta_max", max_of(xs.iter().copied()));
    rep.residuals("collar_lower_violation", &lower_violation);
    rep.check_le("collar lower bound", max_of(lower_violation), ctx.tol.collar_lower);
    rep
}

/// `true` when `r` agrees with `|z|² − 1` at a few test points.
fn is_unit_ball(dom: &Domain) -> bool {
    (0..8).all(|i| {
        let z = gaussian_direction(&mut index_rng(99, i)) * (0.3 + 0.2 * i as f64);
        (dom.r(&z) - (z.norm_sqr() - 1.0)).abs() <= 1e-12
    })
}

const KOB_CANDIDATES: usize = 64;

/// Boundary point of the ball and unit complex tangent there maximising
/// `K̃/K_ball` at depth `delta` over [`KOB_CANDIDATES`] random draws.
fn worst_horizontal(dom: &Domain, delta: f64, rng: &mut impl Rng) -> (C2, C2) {
    let mut best = (f64::NEG_INFINITY, C2::default(), C2::default());
    for _ in 0..KOB_CANDIDATES {
        let f = boundary_point(dom, rng);
        let phase = Complex64::from_polar(1.0, rng.random_range(0.0..TAU));
        let v = C2::new(-f.0[1].conj() * phase, f.0[0].conj() * phase);
        let z = f * (1.0 - delta);
        let r = catlin_metric(dom, &z, &v).map(|k| k / ball_kobayashi_metric(&z, &v)).unwrap_or(f64::NAN);
        if r > best.0 {
            best = (r, f, v);
        }
    }
    (best.1, best.2)
}

/// Comparison with the Kobayashi metric of the unit ball, pointwise and at
/// the level of distances. Only defined on the ball.
pub fn kobayashi_audit(ctx: &AuditContext, n: usize) -> Result<AuditReport, Error> {
    let dom = ctx.dom;
    if !is_unit_ball(dom) {
        return Err(Error::Config(format!("the kobayashi audit needs the unit ball, got {}", dom.name())));
    }
    let metric_range = ctx.collar_range();
    let pts = sample_collar(dom, n, metric_range, ctx.seed);
    let metric: Vec<Option<f64>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, cp)| {
            let mut rng = index_rng(ctx.seed, KOB_STREAM + i as u64);
            // odd samples are horizontal at the worst base point of their depth
            let (z, x) = if i % 2 == 1 {
                let (f, v) = worst_horizontal(dom, cp.delta, &mut rng);
                (f * (1.0 - cp.delta), v)
            } else {
                (cp.point, gaussian_direction(&mut rng))
            };
            let k = catlin_metric(dom, &z, &x).ok()?;
            Some(k / ball_kobayashi_metric(&z, &x))
        })
        .collect();

    let n_pairs = (n / 5).max(1);
    let range = ctx.collar_range();
    let dist: Vec<Option<[f64; 4]>> = (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = index_rng(ctx.seed, KOB_PAIR_STREAM + i as u64);
            let dx = log_uniform(&mut rng, range);
            // odd pairs are horizontal: similar depths, feet moved along the
            // complex tangent by s·sqrt(δ) with s near 1, from the worst of
            // KOB_CANDIDATES base points by metric ratio. There the ratio to
            // the ball distance peaks.
            let (fx, fy, dy) = if i % 2 == 1 {
                let (fx, v) = worst_horizontal(dom, dx, &mut rng);
                let dy = (dx * log_uniform(&mut rng, (0.8, 1.25))).clamp(range.0, range.1);
                let t = dx.sqrt() * log_uniform(&mut rng, (0.3, 1.5));
                (fx, fx * t.cos() + v * t.sin(), dy)
            } else {
                let fx = boundary_point(dom, &mut rng);
                let eps = log_uniform(&mut rng, (1e-3, 2.0));
                (fx, nearby_foot(dom, &fx, eps, &mut rng), log_uniform(&mut rng, range))
            };
            let x = CollarPoint::at_depth(dom, fx, dx);
            let y = CollarPoint::at_depth(dom, fy, dy);
            let d_hat = ctx.estimator().estimate(&x.point, &y.point).ok()?.value;
            let exact = ball_kobayashi_distance(&x.point, &y.point);
            Some([x.delta, y.delta, d_hat, exact])
        })
        .collect();

    let mut rep = ctx.report(
        "kobayashi",
        metric_range,
        "metric ratio at collar points, random unit directions for even samples and the worst horizontal direction of 64 base points for odd ones; distance ratio on collar pairs, odd pairs complex-tangential at similar depths from the worst of 64 base points, separation 0.3 to 1.5 sqrt(delta)",
    );
    rep.count("metric_samples", n);
    rep.count("distance_pairs", n_pairs);
    rep.table = Table::new(&["index", "kind", "delta_x", "delta_y", "value", "exact", "ratio"]);
    let band = |r: &[f64]| max_of(r.iter().copied()).max(1.0 / min_of(r.iter().copied()));
    let mut ratios = vec![f64::NAN; n];
    for (i, (cp, r)) in pts.iter().zip(&metric).enumerate() {
        match r {
            Some(r) => {
                ratios[i] = *r;
                rep.table.push(vec![i as f64, 0.0, cp.delta, f64::NAN, f64::NAN, f64::NAN, *r]);
            }
            None => rep.exclude("metric error", 1),
        }
    }
    let finite: Vec<f64> = ratios.iter().copied().filter(|v| v.is_finite()).collect();
    rep.residuals("metric_ratio", &finite);
    let first: Vec<f64> = ratios[..half(n)].iter().copied().filter(|v| v.is_finite()).collect();
    rep.fitted("c_metric", band(&first), band(&finite), ctx.tol.drift);

    let mut dr = vec![f64::NAN; n_pairs];
    for (i, r) in dist.iter().enumerate() {
        match r {
            Some([a, b, v, e]) => {
                dr[i] = v / e;
                rep.table.push(vec![i as f64, 1.0, *a, *b, *v, *e, v / e]);
            }
            None => rep.exclude("estimator error", 1),
        }
    }
    let finite: Vec<f64> = dr.iter().copied().filter(|v| v.is_finite()).collect();
    rep.residuals("distance_ratio", &finite);
    let first: Vec<f64> = dr[..half(n_pairs)].iter().copied().filter(|v| v.is_finite()).collect();
    rep.fitted("c_distance", band(&first), band(&finite), ctx.tol.drift);
    Ok(rep)
}
