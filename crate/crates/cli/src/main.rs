//! `catlin`: command line driver for the laboratory.
//!
//! Every subcommand prints JSON on stdout. Exit status is 0 on success,
//! 1 when an audit or run misses its thresholds and 2 on configuration,
//! input or IO errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catlin_core::config::{ExperimentConfig, Suite};
use catlin_core::geometry::{load_domain, Domain};
use catlin_core::hyperbolicity::AuditReport;
use catlin_core::metric::{DistanceEstimator, EstimatorConfig, MetricAt};
use catlin_core::normalization::{g_function, point_type, pseudodistance};
use catlin_core::runner::{context, run_suite, run_suites, EXIT_ERROR, EXIT_PASS, EXIT_THRESHOLD};
use catlin_core::{Error, C2};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "catlin", version, about = "Catlin-type metrics and Gromov hyperbolicity on finite type domains in C²")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Chart summary at a point: coefficients, shear, ‖P_k‖ and type.
    Normalize {
        #[arg(long)]
        domain: String,
        /// `x1r,x1i,x2r,x2i`
        #[arg(long, allow_hyphen_values = true)]
        at: C2,
    },
    /// The pseudodistance D(x, y) with its branch, and g(x, y).
    Pseudodist {
        #[arg(long)]
        domain: String,
        #[arg(long, allow_hyphen_values = true)]
        from: C2,
        #[arg(long, allow_hyphen_values = true)]
        to: C2,
    },
    /// The metric K̃(z, X).
    Metric {
        #[arg(long)]
        domain: String,
        #[arg(long, allow_hyphen_values = true)]
        at: C2,
        #[arg(long, allow_hyphen_values = true)]
        dir: C2,
    },
    /// Upper estimate of the distance with its certificate polyline.
    Dist {
        #[arg(long)]
        domain: String,
        #[arg(long, allow_hyphen_values = true)]
        from: C2,
        #[arg(long, allow_hyphen_values = true)]
        to: C2,
        #[arg(long, value_enum, default_value_t = MethodArg::Curves)]
        method: MethodArg,
    },
    /// One audit suite.
    Audit {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample size; the suite default when omitted.
        #[arg(long)]
        n: Option<usize>,
        /// Per-sample rows. Suites with several reports add the audit name
        /// to the file stem of the later ones.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// A full experiment from a `key = value` config file.
    Run { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Best lift/cross candidate, no descent.
    Light,
    /// Lift/cross candidates with descent.
    Curves,
    /// Adds the graph cloud.
    All,
}

impl MethodArg {
    fn config(self) -> EstimatorConfig {
        match self {
            MethodArg::Light => EstimatorConfig::light(),
            MethodArg::Curves => EstimatorConfig::without_graph(),
            MethodArg::All => EstimatorConfig::default(),
        }
    }
}

fn domain(name: &str) -> Result<Domain, Error> {
    load_domain(name)
}

fn normalize(dom: &Domain, at: &C2) -> Result<Value, Error> {
    let c = dom.chart(at)?;
    Ok(json!({
        "domain": dom.name(),
        "center": c.center,
        "r_center": c.r_center,
        "a": c.a,
        "shear": c.shear,
        "p_norms": c.norms,
        "type": point_type(&c)?,
        "swapped": c.swapped,
        "m": c.m,
    }))
}

fn pseudodist(dom: &Domain, x: &C2, y: &C2) -> Result<Value, Error> {
    let d = pseudodistance(dom, x, y)?;
    // g needs interior points; D does not
    let g = g_function(dom, x, y).ok();
    Ok(json!({ "domain": dom.name(), "D": d, "g": g }))
}

fn metric(dom: &Domain, z: &C2, x: &C2) -> Result<Value, Error> {
    let m = MetricAt::new(dom, z)?;
    Ok(json!({
        "domain": dom.name(),
        "value": m.value(x),
        "delta": m.delta,
        "tangential_weight": m.tangential_weight,
        "c_l": m.c_l,
        "frame_swapped": m.frame_swapped,
    }))
}

fn csv_path(base: &Path, i: usize, audit: &str) -> PathBuf {
    if i == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("audit");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{audit}.{ext}"),
        None => format!("{stem}.{audit}"),
    };
    base.with_file_name(name)
}

fn audit(dom: &Domain, suite: Suite, seed: u64, n: Option<usize>, csv: Option<&Path>) -> Result<(Value, bool), Error> {
    let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
    let ctx = context(dom, &cfg);
    let reports = run_suite(&ctx, suite, n.unwrap_or(suite.default_n()))?;
    if let Some(base) = csv {
        for (i, r) in reports.iter().enumerate() {
            r.table.write_csv(&csv_path(base, i, &r.audit))?;
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut values: Vec<Value> = reports.iter().map(report_value).collect();
    let out = if values.len() == 1 { values.remove(0) } else { Value::Array(values) };
    Ok((out, pass))
}

fn report_value(r: &AuditReport) -> Value {
    serde_json::to_value(r).expect("reports serialise")
}

fn execute(cmd: Cmd) -> Result<(Value, bool), Error> {
    Ok(match cmd {
        Cmd::Normalize { domain: d, at } => (normalize(&domain(&d)?, &at)?, true),
        Cmd::Pseudodist { domain: d, from, to } => (pseudodist(&domain(&d)?, &from, &to)?, true),
        Cmd::Metric { domain: d, at, dir } => (metric(&domain(&d)?, &at, &dir)?, true),
        Cmd::Dist { domain: d, from, to, method } => {
            let dom = domain(&d)?;
            let est = DistanceEstimator::new(&dom, method.config()).estimate(&from, &to)?;
            (serde_json::to_value(est).expect("estimates serialise"), true)
        }
        Cmd::Audit { domain: d, suite, seed, n, csv } => audit(&domain(&d)?, suite, seed, n, csv.as_deref())?,
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)?;
            let m = run_suites(&ExperimentConfig::from_text(&text)?)?;
            let pass = m.pass;
            (serde_json::to_value(m).expect("manifests serialise"), pass)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok((v, pass)) => {
            // a closed pipe downstream is not an error of the command
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&v).expect("values serialise"));
            ExitCode::from(if pass { EXIT_PASS } else { EXIT_THRESHOLD } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
