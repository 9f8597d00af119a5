//! Experiment configuration and the single home of every numerical
//! threshold used by the audits.
//!
//! The file format is plain `key = value` lines; `#` starts a comment.
//! [`ExperimentConfig::to_text`] writes every key in a fixed order, so the
//! text is canonical and its SHA-256 identifies the run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Thresholds for every audit. Override with `tol.<name> = value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest relative change of a fitted constant under sample doubling.
    pub drift: f64,
    /// Pure `w2`-monomials of a normal form.
    pub pure_term: f64,
    /// `Re w1` coefficient of a normal form.
    pub re_w1: f64,
    /// Normal form against `r` at points near the centre.
    pub reproduce: f64,
    /// Additive slack in `τ(cδ) ≤ c^{1/l} τ(δ)`.
    pub tau_scaling: f64,
    /// Closed-form `d′` against its bisection oracle, relative.
    pub dprime_rel: f64,
    /// Power quasi-triangle ratio bound.
    pub power_ratio: f64,
    /// Same-normal distances against `|log(δ(y)/δ(x))|`, relative.
    pub normal_line_rel: f64,
    /// Certificate re-quadrature against the reported value, relative.
    pub certificate_rel: f64,
    /// Slack in the collar lower bound `d ≥ |log(δ(y)/δ(x))|`.
    pub collar_lower: f64,
    /// Slack in the repaired triangle inequality.
    pub triangle: f64,
    /// Per-decile residual maxima against `log(1/δ)`.
    pub decile_slope: f64,
    /// Relative slack in `K ≤ 4 C₁⁴`.
    pub product_slack: f64,
    /// Consecutive-`k` change of the visual ratio.
    pub visual_cauchy: f64,
    /// Largest admissible `max/min` of the stabilised visual ratio.
    pub visual_band: f64,
    /// Smallest fraction of visual pairs that must stabilise.
    pub visual_keep: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
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
}

impl Tolerances {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 16] {
        [
            ("drift", &mut self.drift),
            ("pure_term", &mut self.pure_term),
            ("re_w1", &mut self.re_w1),
            ("reproduce", &mut self.reproduce),
            ("tau_scaling", &mut self.tau_scaling),
            ("dprime_rel", &mut self.dprime_rel),
            ("power_ratio", &mut self.power_ratio),
            ("normal_line_rel", &mut self.normal_line_rel),
            ("certificate_rel", &mut self.certificate_rel),
            ("collar_lower", &mut self.collar_lower),
            ("triangle", &mut self.triangle),
            ("decile_slope", &mut self.decile_slope),
            ("product_slack", &mut self.product_slack),
            ("visual_cauchy", &mut self.visual_cauchy),
            ("visual_band", &mut self.visual_band),
            ("visual_keep", &mut self.visual_keep),
        ]
    }

    /// `(name, value)` in declaration order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut copy = self.clone();
        copy.fields_mut().into_iter().map(|(k, v)| (k, *v)).collect()
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        for (k, v) in self.fields_mut() {
            if k == name {
                *v = value;
                return Ok(());
            }
        }
        Err(Error::Config(format!("unknown tolerance `{name}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Chart,
    Lemma32,
    Quasimetric,
    Normalline,
    Theorem12,
    Kobayashi,
    Fourpoint,
    Productlemma,
    Visual,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Chart,
        Suite::Lemma32,
        Suite::Quasimetric,
        Suite::Normalline,
        Suite::Theorem12,
        Suite::Kobayashi,
        Suite::Fourpoint,
        Suite::Productlemma,
        Suite::Visual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Chart => "chart",
            Suite::Lemma32 => "lemma32",
            Suite::Quasimetric => "quasimetric",
            Suite::Normalline => "normalline",
            Suite::Theorem12 => "theorem12",
            Suite::Kobayashi => "kobayashi",
            Suite::Fourpoint => "fourpoint",
            Suite::Productlemma => "productlemma",
            Suite::Visual => "visual",
        }
    }

    /// Sample size used when the configuration gives none.
    pub fn default_n(self) -> usize {
        match self {
            Suite::Chart => 50,
            Suite::Lemma32 => 1000,
            Suite::Quasimetric => 10_000,
            Suite::Normalline => 100,
            Suite::Theorem12 => 500,
            Suite::Kobayashi => 1000,
            Suite::Fourpoint => 10_000,
            Suite::Productlemma => 10_000,
            Suite::Visual => 100,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Registry name or path of a definition file.
    pub domain: String,
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Per-suite sample sizes; missing suites use [`Suite::default_n`].
    pub sizes: BTreeMap<Suite, usize>,
    /// Collar depths drawn for the audits.
    pub delta_range: (f64, f64),
    /// Directory for the manifest, reports and CSVs.
    pub out: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: "ball".into(),
            suites: Vec::new(),
            seed: 1,
            sizes: BTreeMap::new(),
            delta_range: (1e-4, 0.25),
            out: PathBuf::from("catlin-out"),
            tolerances: Tolerances::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}")))
}

impl ExperimentConfig {
    pub fn n(&self, suite: Suite) -> usize {
        self.sizes.get(&suite).copied().unwrap_or_else(|| suite.default_n())
    }

    pub fn from_text(text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "domain" => cfg.domain = value.to_string(),
                "suites" => {
                    cfg.suites = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(Suite::from_str)
                        .collect::<Result<_>>()?
                }
                "seed" => cfg.seed = parse_num(key, value)?,
                "delta_lo" => cfg.delta_range.0 = parse_num(key, value)?,
                "delta_hi" => cfg.delta_range.1 = parse_num(key, value)?,
                "out" => cfg.out = PathBuf::from(value),
                _ => {
                    if let Some(s) = key.strip_prefix("n.") {
                        cfg.sizes.insert(s.parse()?, parse_num(key, value)?);
                    } else if let Some(t) = key.strip_prefix("tol.") {
                        cfg.tolerances.set(t, parse_num(key, value)?)?;
                    } else {
                        return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.delta_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!("delta range ({lo}, {hi}) must satisfy 0 < lo < hi")));
        }
        if self.domain.is_empty() {
            return Err(Error::Config("domain is empty".into()));
        }
        if let Some((s, _)) = self.sizes.iter().find(|(_, n)| **n == 0) {
            return Err(Error::Config(format!("n.{s} must be positive")));
        }
        Ok(())
    }

    /// Canonical text: every key, fixed order, shortest round-trip numbers.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("domain = {}\n", self.domain));
        let suites: Vec<&str> = self.suites.iter().map(|x| x.name()).collect();
        s.push_str(&format!("suites = {}\n", suites.join(", ")));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("delta_lo = {:?}\n", self.delta_range.0));
        s.push_str(&format!("delta_hi = {:?}\n", self.delta_range.1));
        s.push_str(&format!("out = {}\n", self.out.display()));
        for (suite, n) in &self.sizes {
            s.push_str(&format!("n.{suite} = {n}\n"));
        }
        for (k, v) in self.tolerances.entries() {
            s.push_str(&format!("tol.{k} = {v:?}\n"));
        }
        s
    }

    /// Hex SHA-256 of [`ExperimentConfig::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash() {
        let text = "domain = egg2\nsuites = lemma32, fourpoint\nseed = 9 # comment\nn.fourpoint = 200\ntol.drift = 0.2\ndelta_lo = 1e-5\n";
        let cfg = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(cfg.suites, vec![Suite::Lemma32, Suite::Fourpoint]);
        assert_eq!(cfg.n(Suite::Fourpoint), 200);
        assert_eq!(cfg.n(Suite::Lemma32), 1000);
        assert_eq!(cfg.tolerances.drift, 0.2);
        assert_eq!(cfg.delta_range, (1e-5, 0.25));
        let again = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_text(), cfg.to_text());
        assert_eq!(again.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut other = cfg.clone();
        other.seed = 10;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for bad in ["suites = nope", "tol.nope = 1", "seed = x", "frobnicate = 1", "delta_lo = 1", "n.visual = 0", "just text"] {
            assert!(matches!(ExperimentConfig::from_text(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn tolerance_entries_cover_every_field() {
        let mut t = Tolerances::default();
        for (name, value) in Tolerances::default().entries() {
            t.set(name, value * 2.0).unwrap();
        }
        for ((_, a), (_, b)) in t.entries().into_iter().zip(Tolerances::default().entries()) {
            assert_eq!(a, 2.0 * b);
        }
    }
}
