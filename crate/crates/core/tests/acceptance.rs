//! Desk-scale acceptance run: one PASS/FAIL line per criterion.
//!
//! Every tolerance and runtime limit is pinned below. The run is a single
//! test so the criteria execute one after another and their timings are
//! not inflated by each other. Criteria that fail for understood reasons
//! are listed in `KNOWN_FAILURES`; they still print FAIL, and the test
//! only fails on a failure that is not on that list.

use std::time::{Duration, Instant};

use catlin_core::config::{Suite, Tolerances};
use catlin_core::geometry::{load_domain, Domain};
use catlin_core::hyperbolicity::{tau_scaling_audit, AuditContext, AuditReport, DistMode};
use catlin_core::runner::run_suite;

const ALL_DOMAINS: [&str; 4] = ["ball", "egg2", "egg3", "egg2_perturbed"];
const SEED: u64 = 1;

fn pinned() -> Tolerances {
    Tolerances {
        drift: 0.10,
        pure_term: 1e-10,
        re_w1: 1e-12,
        reproduce: 1e-8,
        tau_scaling: 1e-12,
        dprime_rel: 1e-8,
        power_ratio: 2.0,
        normal_line_rel: 0.05,
        certificate_rel: 1e-3,
        collar_lower: 1e-6,
        triangle: 1e-9,
        decile_slope: 0.05,
        product_slack: 0.01,
        visual_cauchy: 0.20,
        visual_band: 1e3,
        visual_keep: 0.5,
    }
}

/// `(criterion, domain)` pairs that fail at desk scale for reasons
/// recorded with the project notes: the theorem residual on the ball
/// crosses between two additive regimes inside the sampled depth window,
/// and the visual band on egg2 is dominated by the frame seam of `K̃`.
const KNOWN_FAILURES: [(u32, &str); 2] = [(6, "ball"), (9, "egg2")];

struct Outcome {
    domain: &'static str,
    reports: Vec<AuditReport>,
}

impl Outcome {
    fn pass(&self, keep: &dyn Fn(&str) -> bool) -> bool {
        self.reports.iter().flat_map(|r| &r.checks).filter(|c| keep(&c.name)).all(|c| c.pass)
    }

    fn failures(&self, keep: &dyn Fn(&str) -> bool) -> Vec<String> {
        self.reports
            .iter()
            .flat_map(|r| r.checks.iter().map(move |c| (r, c)))
            .filter(|(_, c)| keep(&c.name) && !c.pass)
            .map(|(r, c)| format!("{}: {} = {:.4e} vs {:.4e}", r.audit, c.name, c.value, c.bound))
            .collect()
    }
}

#[derive(Default)]
struct Tally {
    unexpected: Vec<String>,
}

impl Tally {
    /// Prints the line for one criterion and its per-domain details.
    fn criterion(
        &mut self,
        id: u32,
        title: &str,
        outcomes: &[Outcome],
        keep: &dyn Fn(&str) -> bool,
        elapsed: Duration,
        limit: Duration,
    ) {
        let in_time = elapsed <= limit;
        let pass = in_time && outcomes.iter().all(|o| o.pass(keep));
        println!(
            "criterion {id} {title}: {} ({:.1} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !in_time {
            self.unexpected.push(format!("criterion {id}: runtime {:.1} s over {} s", elapsed.as_secs_f64(), limit.as_secs()));
        }
        for o in outcomes {
            let fails = o.failures(keep);
            let known = KNOWN_FAILURES.contains(&(id, o.domain));
            let constants: Vec<String> = o
                .reports
                .iter()
                .flat_map(|r| r.constants.iter().map(move |(k, v)| format!("{}.{k}={v:.4}", r.audit)))
                .collect();
            let status = match (fails.is_empty(), known) {
                (true, false) => "pass",
                (true, true) => "pass (listed as a known failure)",
                (false, true) => "FAIL (known)",
                (false, false) => "FAIL",
            };
            println!("    {:<15} {status}  {}", o.domain, constants.join(" "));
            for f in &fails {
                println!("        {f}");
            }
            if !fails.is_empty() && !known {
                self.unexpected.push(format!("criterion {id} on {}: {}", o.domain, fails.join("; ")));
            }
        }
    }
}

fn context(dom: &Domain) -> AuditContext<'_> {
    AuditContext::new(dom, SEED).with_tolerances(pinned())
}

fn run(domains: &[&'static str], f: impl Fn(&AuditContext) -> Vec<AuditReport>) -> (Vec<Outcome>, Duration) {
    let t = Instant::now();
    let outcomes = domains
        .iter()
        .map(|&name| {
            let dom = load_domain(name).expect("registry domain");
            Outcome { domain: name, reports: f(&context(&dom)) }
        })
        .collect();
    (outcomes, t.elapsed())
}

/// Per-domain runs, each against its own runtime limit.
fn run_each(domains: &[&'static str], f: impl Fn(&AuditContext) -> Vec<AuditReport>) -> (Vec<Outcome>, Duration) {
    let mut slowest = Duration::ZERO;
    let mut outcomes = Vec::new();
    for &d in domains {
        let (mut o, t) = run(&[d], &f);
        slowest = slowest.max(t);
        outcomes.append(&mut o);
    }
    (outcomes, slowest)
}

fn suite(s: Suite, n: usize) -> impl Fn(&AuditContext) -> Vec<AuditReport> {
    move |ctx| run_suite(ctx, s, n).expect("suite runs")
}

fn any(_: &str) -> bool {
    true
}

#[test]
fn acceptance() {
    assert_eq!(Tolerances::default(), pinned(), "library defaults must match the acceptance thresholds");
    let secs = Duration::from_secs;
    let mut tally = Tally::default();

    let (o, t) = run(&ALL_DOMAINS, suite(Suite::Chart, 50));
    tally.criterion(1, "chart normal form", &o, &any, t, secs(30));

    let (o, t) = run(&ALL_DOMAINS, |ctx| vec![tau_scaling_audit(ctx, 1000)]);
    tally.criterion(2, "tau scaling", &o, &any, t, secs(10));

    // the lemma32 suite repeats the scaling part; only its engulfing fits
    // belong to this criterion, its runtime bounds both parts together
    let (o, t) = run(&ALL_DOMAINS, suite(Suite::Lemma32, 1000));
    tally.criterion(3, "engulfing constants", &o, &|c| c.starts_with("C_"), t, secs(60));

    let (o, t) = run_each(&ALL_DOMAINS, suite(Suite::Quasimetric, 10_000));
    tally.criterion(4, "quasi-metric constants (slowest domain)", &o, &any, t, secs(120));

    let (o, t) = run(&["ball", "egg2"], suite(Suite::Normalline, 100));
    tally.criterion(5, "normal-line distance", &o, &any, t, secs(120));

    let (o, t) = run(&["ball", "egg2"], suite(Suite::Theorem12, 500));
    tally.criterion(6, "two-sided estimate residuals", &o, &any, t, secs(600));

    let (o, t) = run(&["ball"], suite(Suite::Kobayashi, 1000));
    tally.criterion(7, "ball oracle comparability", &o, &any, t, secs(300));

    // g-surrogate and product lemma everywhere, the estimator scan on two
    // domains: it costs minutes per domain
    let (mut o, t1) = run(&ALL_DOMAINS, |ctx| {
        vec![
            catlin_core::hyperbolicity::hyperbolicity_scan(ctx, 10_000, DistMode::GSurrogate),
            catlin_core::hyperbolicity::product_lemma_audit(ctx, 10_000),
        ]
    });
    let (est, t2) = run(&["ball", "egg2"], |ctx| {
        vec![catlin_core::hyperbolicity::hyperbolicity_scan(ctx, catlin_core::runner::ESTIMATOR_SCAN_POINTS, DistMode::Estimator)]
    });
    for e in est {
        let slot = o.iter_mut().find(|x| x.domain == e.domain).expect("domain ran");
        slot.reports.extend(e.reports);
    }
    tally.criterion(8, "hyperbolicity scans and product lemma", &o, &any, t1 + t2, secs(600));

    let (o, t) = run(&["ball", "egg2"], suite(Suite::Visual, 100));
    tally.criterion(9, "visual metric band", &o, &any, t, secs(600));

    assert!(tally.unexpected.is_empty(), "unexpected failures:\n{}", tally.unexpected.join("\n"));
}
