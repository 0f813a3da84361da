//! Sensitivity parameters: the departure Δ(xᵢ) from missing at random,
//! applied on the linear-predictor scale of the pattern-mixture model.

use std::collections::BTreeMap;
use std::fmt;

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::glm::GlmFamily;

/// Departure for one individual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Departure {
    Finite(f64),
    /// "Missing = failure" for binary outcomes.
    MinusInfinity,
}

impl Departure {
    pub const ZERO: Departure = Departure::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, Departure::Finite(_))
    }

    /// Adds the departure to a finite linear predictor; `-inf` stays a sentinel.
    pub fn shift(self, eta: f64) -> f64 {
        match self {
            Departure::Finite(d) => eta + d,
            Departure::MinusInfinity => f64::NEG_INFINITY,
        }
    }

    /// The departure as a float (`-inf` for the sentinel).
    pub fn value(self) -> f64 {
        match self {
            Departure::Finite(d) => d,
            Departure::MinusInfinity => f64::NEG_INFINITY,
        }
    }

    /// Builds from a float, mapping `-inf` to the sentinel.
    pub fn from_value(v: f64) -> Result<Self> {
        if v == f64::NEG_INFINITY {
            Ok(Departure::MinusInfinity)
        } else if v.is_finite() {
            Ok(Departure::Finite(v))
        } else {
            Err(Error::InvalidDelta(format!("departure {v} is neither finite nor -inf")))
        }
    }
}

impl fmt::Display for Departure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Departure::Finite(d) => write!(f, "{d}"),
            Departure::MinusInfinity => f.write_str("-inf"),
        }
    }
}

impl std::str::FromStr for Departure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("-inf") || t.eq_ignore_ascii_case("-infinity") {
            return Ok(Departure::MinusInfinity);
        }
        t.parse::<f64>()
            .map_err(|_| Error::InvalidDelta(format!("cannot parse departure '{s}'")))
            .and_then(Departure::from_value)
    }
}

/// Departures for the control (z = 0) and intervention (z = 1) arms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmDeparture {
    pub control: Departure,
    pub treated: Departure,
}

impl ArmDeparture {
    pub fn both(d: Departure) -> Self {
        ArmDeparture {
            control: d,
            treated: d,
        }
    }

    fn for_arm(&self, arm: u8) -> Departure {
        if arm == 1 {
            self.treated
        } else {
            self.control
        }
    }
}

/// User specification of Δ(xᵢ) for the individuals with missing outcomes.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaSpec {
    Constant(Departure),
    PerArm(ArmDeparture),
    /// Departure by reason for missingness, optionally arm-specific.
    /// Rows whose reason is absent from the map, or unrecorded, use
    /// `fallback`, or are an error if none.
    PerReason {
        by_reason: BTreeMap<String, ArmDeparture>,
        fallback: Option<ArmDeparture>,
    },
    /// One departure per row; entries for observed rows are ignored.
    PerIndividual(Vec<Departure>),
}

impl DeltaSpec {
    /// Missing at random.
    pub fn mar() -> Self {
        DeltaSpec::Constant(Departure::ZERO)
    }

    pub fn constant(delta: f64) -> Self {
        DeltaSpec::Constant(Departure::Finite(delta))
    }

    pub fn per_arm(control: f64, treated: f64) -> Self {
        DeltaSpec::PerArm(ArmDeparture {
            control: Departure::Finite(control),
            treated: Departure::Finite(treated),
        })
    }

    /// All missing outcomes are failures.
    pub fn missing_failure() -> Self {
        DeltaSpec::Constant(Departure::MinusInfinity)
    }

    /// Evaluates Δ for every row: `None` for observed rows.
    pub fn resolve(&self, data: &TrialDataset, family: GlmFamily) -> Result<Vec<Option<Departure>>> {
        let n = data.n();
        if let DeltaSpec::PerIndividual(v) = self {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "per-individual departures have {} entries, data has {n} rows",
                    v.len()
                )));
            }
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if data.is_observed(i) {
                out.push(None);
                continue;
            }
            let arm = data.arm(i);
            let d = match self {
                DeltaSpec::Constant(d) => *d,
                DeltaSpec::PerArm(a) => a.for_arm(arm),
                DeltaSpec::PerIndividual(v) => v[i],
                DeltaSpec::PerReason { by_reason, fallback } => {
                    let reason = data.reasons().and_then(|r| r[i].as_deref());
                    match reason.and_then(|r| by_reason.get(r)).or(fallback.as_ref()) {
                        Some(a) => a.for_arm(arm),
                        None => {
                            return Err(Error::InvalidDelta(match reason {
                                Some(r) => format!("no departure configured for reason '{r}'"),
                                None => format!("row {i} is missing but has no reason"),
                            }))
                        }
                    }
                }
            };
            if d == Departure::MinusInfinity && family != GlmFamily::Logit {
                return Err(Error::InvalidDelta(
                    "a -inf departure requires a binary outcome with logit link".into(),
                ));
            }
            if let Departure::Finite(v) = d {
                if !v.is_finite() {
                    return Err(Error::InvalidDelta(format!("departure {v} at row {i}")));
                }
            }
            out.push(Some(d));
        }
        Ok(out)
    }

    /// True when every missing row gets Δ = 0.
    pub fn is_mar(&self, data: &TrialDataset, family: GlmFamily) -> Result<bool> {
        Ok(self
            .resolve(data, family)?
            .iter()
            .flatten()
            .all(|d| *d == Departure::ZERO))
    }
}
