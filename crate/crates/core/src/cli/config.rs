//! Run configuration for sensitivity sweeps: a TOML file merged with
//! command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::delta::Departure;
use crate::error::{Error, Result};
use crate::glm::GlmFamily;

/// Where the departure δ applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pattern {
    /// `Δ = δ z`.
    InterventionOnly,
    /// `Δ = δ`.
    BothArms,
    /// `Δ = δ (1 - z)`.
    ControlOnly,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::InterventionOnly, Pattern::BothArms, Pattern::ControlOnly];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::InterventionOnly => "intervention-only",
            Pattern::BothArms => "both-arms",
            Pattern::ControlOnly => "control-only",
        }
    }

    /// `(control, treated)` multipliers of δ.
    pub fn arm_weights(self) -> (f64, f64) {
        match self {
            Pattern::InterventionOnly => (0.0, 1.0),
            Pattern::BothArms => (1.0, 1.0),
            Pattern::ControlOnly => (1.0, 0.0),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `--pattern` choice: one pattern or all three.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternSelection {
    One(Pattern),
    All,
}

impl PatternSelection {
    pub fn patterns(self) -> Vec<Pattern> {
        match self {
            PatternSelection::One(p) => vec![p],
            PatternSelection::All => Pattern::ALL.to_vec(),
        }
    }
}

impl FromStr for PatternSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "both" | "both-arms" => Ok(PatternSelection::One(Pattern::BothArms)),
            "arm1" | "intervention" | "intervention-only" => Ok(PatternSelection::One(Pattern::InterventionOnly)),
            "arm0" | "control" | "control-only" => Ok(PatternSelection::One(Pattern::ControlOnly)),
            "all" => Ok(PatternSelection::All),
            other => Err(Error::Config(format!(
                "unknown pattern '{other}' (expected both, arm1, arm0 or all)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Two-regression path when eligible, full sandwich otherwise.
    Auto,
    Full,
    TwoReg,
}

impl FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Engine::Auto),
            "full" => Ok(Engine::Full),
            "tworeg" | "two-reg" | "twolinreg" => Ok(Engine::TwoReg),
            other => Err(Error::Config(format!(
                "unknown engine '{other}' (expected auto, full or tworeg)"
            ))),
        }
    }
}

/// Grid of δ values: `steps` equally spaced points from `min` to `max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl DeltaGrid {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Config("delta grid bounds must be finite".into()));
        }
        if min > max {
            return Err(Error::Config(format!("delta grid min {min} exceeds max {max}")));
        }
        if steps == 0 {
            return Err(Error::Config("delta grid needs at least one step".into()));
        }
        if steps == 1 && min != max {
            return Err(Error::Config("a one-point delta grid needs min = max".into()));
        }
        Ok(DeltaGrid { min, max, steps })
    }

    /// Ascending grid values; the end points are exact.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let k = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.max
                } else {
                    self.min + (self.max - self.min) * (i as f64 / k)
                }
            })
            .collect()
    }
}

impl FromStr for DeltaGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("delta grid '{s}' is not MIN:MAX:STEPS")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("delta grid bound '{t}' is not a number")))
        };
        let steps = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("delta grid steps '{}' is not a count", parts[2])))?;
        DeltaGrid::new(num(parts[0])?, num(parts[1])?, steps)
    }
}

/// Departure attached to a reason for missingness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReasonDeparture {
    /// Follows the swept δ (and the pattern's arm restriction).
    Sweep,
    /// A fixed departure regardless of δ and pattern.
    Fixed(Departure),
}

impl FromStr for ReasonDeparture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("delta") {
            Ok(ReasonDeparture::Sweep)
        } else {
            t.parse::<Departure>()
                .map(ReasonDeparture::Fixed)
                .map_err(|_| Error::Config(format!("reason departure '{s}' is not a number, 'delta' or '-inf'")))
        }
    }
}

impl<'de> Deserialize<'de> for ReasonDeparture {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Departure::from_value(v)
                .map(ReasonDeparture::Fixed)
                .map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Configuration file contents; every field may be overridden on the
/// command line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub outcome: Option<String>,
    pub arm: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub auxiliaries: Vec<String>,
    pub reason: Option<String>,
    pub cluster: Option<String>,
    pub family: Option<String>,
    pub delta_grid: Option<String>,
    pub pattern: Option<String>,
    pub level: Option<f64>,
    pub engine: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub impute_mean: Vec<String>,
    #[serde(default)]
    pub factors: Vec<String>,
    pub na_tokens: Option<Vec<String>>,
    #[serde(default)]
    pub reasons: BTreeMap<String, ReasonDeparture>,
}

impl ConfigFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub outcome: String,
    pub arm: String,
    pub covariates: Vec<String>,
    pub auxiliaries: Vec<String>,
    pub reason: Option<String>,
    pub cluster: Option<String>,
    pub family: GlmFamily,
    pub grid: DeltaGrid,
    pub patterns: PatternSelection,
    pub level: f64,
    pub engine: Engine,
    pub out: Option<PathBuf>,
    /// Baseline covariates whose missing entries are replaced by the observed mean.
    pub impute_mean: Vec<String>,
    /// Categorical covariates expanded to indicator columns.
    pub factors: Vec<String>,
    pub na_tokens: Vec<String>,
    pub reasons: BTreeMap<String, ReasonDeparture>,
}

impl RunConfig {
    /// Builds a validated configuration from a parsed file; required fields
    /// missing from the file are configuration errors.
    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let required = |v: Option<String>, what: &str| v.ok_or_else(|| Error::Config(format!("no {what} column given")));
        let cfg = RunConfig {
            outcome: required(file.outcome, "outcome")?,
            arm: required(file.arm, "arm")?,
            covariates: file.covariates,
            auxiliaries: file.auxiliaries,
            reason: file.reason,
            cluster: file.cluster,
            family: match file.family {
                Some(f) => f.parse()?,
                None => GlmFamily::Identity,
            },
            grid: match file.delta_grid {
                Some(g) => g.parse()?,
                None => DeltaGrid::new(0.0, 0.0, 1)?,
            },
            patterns: match file.pattern {
                Some(p) => p.parse()?,
                None => PatternSelection::All,
            },
            level: file.level.unwrap_or(0.95),
            engine: match file.engine {
                Some(e) => e.parse()?,
                None => Engine::Auto,
            },
            out: file.out,
            impute_mean: file.impute_mean,
            factors: file.factors,
            na_tokens: file.na_tokens.unwrap_or_else(|| vec![String::new(), "NA".into()]),
            reasons: file.reasons,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("confidence level {} outside (0, 1)", self.level)));
        }
        if !self.reasons.is_empty() && self.reason.is_none() {
            return Err(Error::Config("reason departures given without a reason column".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in std::iter::once(&self.outcome)
            .chain(std::iter::once(&self.arm))
            .chain(&self.covariates)
            .chain(&self.auxiliaries)
        {
            if !seen.insert(c) {
                return Err(Error::Config(format!("column '{c}' is used more than once")));
            }
        }
        for c in self.impute_mean.iter().chain(&self.factors) {
            if !self.covariates.contains(c) && !self.auxiliaries.contains(c) {
                return Err(Error::Config(format!(
                    "column '{c}' is not a covariate or auxiliary variable"
                )));
            }
        }
        if let Some(c) = self.impute_mean.iter().find(|c| self.factors.contains(c)) {
            return Err(Error::Config(format!("factor column '{c}' cannot be mean-imputed")));
        }
        Ok(())
    }
}
