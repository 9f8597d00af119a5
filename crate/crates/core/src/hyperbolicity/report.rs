use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Order statistics of a residual column. Non-finite entries are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Summary { count: 0, min: f64::NAN, median: f64::NAN, max: f64::NAN };
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Summary { count: n, min: v[0], median, max: v[n - 1] }
    }
}

/// A fitted constant on the first half of the sample and on all of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub half: f64,
    pub full: f64,
    /// `|full − half| / max(|half|, |full|)`.
    pub drift: f64,
    pub stable: bool,
}

impl Stability {
    pub fn new(half: f64, full: f64, tol: f64) -> Stability {
        let scale = half.abs().max(full.abs());
        let drift = if scale == 0.0 { 0.0 } else { (full - half).abs() / scale };
        let stable = half.is_finite() && full.is_finite() && drift <= tol;
        Stability { half, full, drift, stable }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub seed: u64,
    pub counts: BTreeMap<String, usize>,
    pub delta_range: (f64, f64),
    pub description: String,
}

/// Per-sample rows, written as CSV next to the JSON report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Table {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            // shortest round-trip formatting keeps the files byte-stable
            out.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f)).map_err(std::io::Error::other)
    }
}

/// JSON has no infinities: non-finite numbers serialise as `null`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema: u32,
    pub audit: String,
    pub domain: String,
    pub sample: SampleInfo,
    pub constants: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, Summary>,
    pub stability: BTreeMap<String, Stability>,
    pub checks: Vec<Check>,
    /// Samples dropped, by reason.
    pub excluded: BTreeMap<String, usize>,
    pub pass: bool,
    #[serde(skip)]
    pub table: Table,
}

impl AuditReport {
    pub fn new(audit: &str, domain: &str, seed: u64, delta_range: (f64, f64), description: &str) -> AuditReport {
        AuditReport {
            schema: SCHEMA_VERSION,
            audit: audit.to_string(),
            domain: domain.to_string(),
            sample: SampleInfo { seed, counts: BTreeMap::new(), delta_range, description: description.to_string() },
            constants: BTreeMap::new(),
            residuals: BTreeMap::new(),
            stability: BTreeMap::new(),
            checks: Vec::new(),
            excluded: BTreeMap::new(),
            pass: true,
            table: Table::default(),
        }
    }

    pub fn count(&mut self, name: &str, n: usize) {
        self.sample.counts.insert(name.to_string(), n);
    }

    pub fn constant(&mut self, name: &str, v: f64) {
        self.constants.insert(name.to_string(), v);
    }

    pub fn residuals(&mut self, name: &str, values: &[f64]) {
        self.residuals.insert(name.to_string(), Summary::of(values));
    }

    pub fn exclude(&mut self, reason: &str, n: usize) {
        if n > 0 {
            *self.excluded.entry(reason.to_string()).or_default() += n;
        }
    }

    fn check(&mut self, name: &str, value: f64, bound: f64, relation: Relation) {
        let pass = match relation {
            Relation::Le => value <= bound,
            Relation::Ge => value >= bound,
        };
        self.pass &= pass;
        self.checks.push(Check { name: name.to_string(), value, bound, relation, pass });
    }

    /// Passes iff `value ≤ bound` (so NaN fails).
    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, bound, Relation::Le);
    }

    pub fn check_ge(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value, bound, Relation::Ge);
    }

    /// Records the constant, its half/full stability, and checks that it is
    /// finite and drifts at most `tol`.
    pub fn fitted(&mut self, name: &str, half: f64, full: f64, tol: f64) {
        self.constant(name, full);
        let s = Stability::new(half, full, tol);
        self.check_le(&format!("{name} finite"), full.abs(), f64::MAX);
        self.check_le(&format!("{name} drift"), if s.half.is_finite() { s.drift } else { f64::INFINITY }, tol);
        self.stability.insert(name.to_string(), s);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise")
    }
}

/// Largest finite value, `−∞` for none.
pub(crate) fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min)
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_and_slope() {
        let s = Summary::of(&[3.0, f64::NAN, 1.0, 2.0, 10.0]);
        assert_eq!((s.count, s.min, s.median, s.max), (4, 1.0, 2.5, 10.0));
        assert_eq!(Summary::of(&[]).count, 0);
        assert!((ls_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-14);
        assert_eq!(max_of([1.0, f64::NAN, 4.0]), 4.0);
    }

    #[test]
    fn checks_and_json() {
        let mut r = AuditReport::new("demo", "ball", 7, (1e-4, 0.25), "d");
        r.fitted("c", 1.0, 1.05, 0.1);
        assert!(r.pass);
        r.check_le("nan", f64::NAN, 1.0);
        assert!(!r.pass);
        r.table = Table::new(&["a", "b"]);
        r.table.push(vec![0.1, 2.0]);
        assert_eq!(r.table.to_csv_string(), "a,b\n0.1,2.0\n");
        let back: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back["schema"], 1);
        assert_eq!(back["checks"].as_array().unwrap().len(), r.checks.len());
        assert!(back["checks"][2]["value"].is_null());
        assert!(back.get("table").is_none());
        assert!(r.to_json().contains("\"<=\""));
    }
}
