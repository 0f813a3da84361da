//! Data-generating mechanisms and scenario parameters.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::TrialDataset;
use crate::error::{Error, Result};
use crate::glm::expit;

/// DGMs 1-3 are pattern-mixture models (missingness first, then the
/// outcome with a shift for non-responders); DGM 4 is a selection model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dgm {
    /// No baseline covariate; `x_S = x_P = (1, z)`.
    One,
    /// Baseline `x` used as an auxiliary: `x_S = (1, z)`, `x_A = x`.
    Two,
    /// Baseline `x` in the (mis-specified) substantive model: `x_S = (1, z, x)`.
    Three,
    /// Selection model; `x_S = (1, z, x)`, no auxiliaries.
    Four,
}

impl Dgm {
    pub const ALL: [Dgm; 4] = [Dgm::One, Dgm::Two, Dgm::Three, Dgm::Four];

    pub fn number(self) -> u8 {
        match self {
            Dgm::One => 1,
            Dgm::Two => 2,
            Dgm::Three => 3,
            Dgm::Four => 4,
        }
    }

    pub fn has_x(self) -> bool {
        self != Dgm::One
    }

    pub fn is_selection(self) -> bool {
        self == Dgm::Four
    }

    /// Whether `x` enters the substantive model.
    pub fn x_in_substantive(self) -> bool {
        matches!(self, Dgm::Three | Dgm::Four)
    }
}

impl fmt::Display for Dgm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Dgm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Dgm::One),
            "2" => Ok(Dgm::Two),
            "3" => Ok(Dgm::Three),
            "4" => Ok(Dgm::Four),
            other => Err(Error::Config(format!("unknown DGM '{other}' (expected 1-4)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Base case.
    A,
    /// Larger sample size.
    B,
    /// More missing data.
    C,
    /// Larger departure from MAR.
    D,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::A, Scenario::B, Scenario::C, Scenario::D];

    pub fn letter(self) -> char {
        match self {
            Scenario::A => 'a',
            Scenario::B => 'b',
            Scenario::C => 'c',
            Scenario::D => 'd',
        }
    }

    fn index(self) -> u64 {
        match self {
            Scenario::A => 0,
            Scenario::B => 1,
            Scenario::C => 2,
            Scenario::D => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            "c" => Ok(Scenario::C),
            "d" => Ok(Scenario::D),
            other => Err(Error::Config(format!("unknown scenario '{other}' (expected a-d)"))),
        }
    }
}

/// Response-model coefficients; `a1` is calibrated to hit `pi_obs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alphas {
    pub a1: f64,
    pub ax: f64,
    pub az: f64,
    pub ay: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DgmSpec {
    pub dgm: Dgm,
    pub scenario: Scenario,
    /// Total sample size per replicate (before deletion).
    pub n: usize,
    /// Target `P(r = 1)`.
    pub pi_obs: f64,
    pub alpha: Alphas,
    /// `(β_P1, β_Px, β_Pz, β_Pr)` for DGMs 1-3.
    pub beta_p: [f64; 4],
    /// `(β_S1, β_Sx, β_Sz)` for DGM 4.
    pub beta_s: [f64; 3],
    pub seed: u64,
}

impl DgmSpec {
    pub fn new(dgm: Dgm, scenario: Scenario, seed: u64) -> Self {
        let mut spec = DgmSpec {
            dgm,
            scenario,
            n: 500,
            pi_obs: 0.75,
            alpha: Alphas {
                a1: 0.0,
                ax: 1.0,
                az: 1.0,
                ay: 1.0,
            },
            beta_p: [0.0, 1.0, 1.0, -1.0],
            beta_s: [0.0, 1.0, 1.0],
            seed,
        };
        match scenario {
            Scenario::A => {}
            Scenario::B => spec.n = 2000,
            Scenario::C => spec.pi_obs = 0.5,
            Scenario::D => spec.beta_p[3] = -2.0,
        }
        spec
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.dgm, self.scenario)
    }

    /// Stream id for replicate-level randomness; distinct per (DGM, scenario).
    pub(crate) fn stream_base(&self) -> u64 {
        ((self.dgm.number() as u64) << 40) | (self.scenario.index() << 36)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi_obs > 0.0 && self.pi_obs < 1.0) {
            return Err(Error::Config(format!("pi_obs {} outside (0, 1)", self.pi_obs)));
        }
        if self.n < 10 {
            return Err(Error::Config(format!("sample size {} too small", self.n)));
        }
        Ok(())
    }

    fn response_eta(&self, a1: f64, z: f64, x: f64, y: f64) -> f64 {
        let a = &self.alpha;
        let mut eta = a1 + a.az * z;
        if self.dgm.has_x() {
            eta += a.ax * x;
        }
        if self.dgm.is_selection() {
            eta += a.ay * y;
        }
        eta
    }

    fn pattern_eta(&self, z: f64, x: f64, r: f64) -> f64 {
        let b = &self.beta_p;
        let mut eta = b[0] + b[2] * z + b[3] * (1.0 - r);
        if self.dgm.has_x() {
            eta += b[1] * x;
        }
        eta
    }

    fn substantive_eta(&self, z: f64, x: f64) -> f64 {
        let b = &self.beta_s;
        b[0] + b[1] * x + b[2] * z
    }

    /// `P(r = 1 | z, x)`, integrating over `y` for the selection model.
    pub(crate) fn response_prob(&self, a1: f64, z: f64, x: f64) -> f64 {
        if self.dgm.is_selection() {
            let py = expit(self.substantive_eta(z, x));
            py * expit(self.response_eta(a1, z, x, 1.0)) + (1.0 - py) * expit(self.response_eta(a1, z, x, 0.0))
        } else {
            expit(self.response_eta(a1, z, x, 0.0))
        }
    }
}

/// One simulated data set before deletion.
#[derive(Clone, Debug)]
pub struct SimDraw {
    pub z: Vec<f64>,
    /// All zeros for DGM 1.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: Vec<bool>,
}

impl SimDraw {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn response_rate(&self) -> f64 {
        self.r.iter().filter(|&&b| b).count() as f64 / self.len() as f64
    }
}

/// Draws `(z, x)` only.
pub(crate) fn draw_covariates<R: Rng>(dgm: Dgm, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut z = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        z.push(if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 });
        x.push(if dgm.has_x() { StandardNormal.sample(rng) } else { 0.0 });
    }
    (z, x)
}

/// Generates `n` rows under `spec` with intercept `a1` in the response model.
pub fn generate_rows<R: Rng>(spec: &DgmSpec, a1: f64, n: usize, rng: &mut R) -> SimDraw {
    let (z, x) = draw_covariates(spec.dgm, n, rng);
    let mut y = Vec::with_capacity(n);
    let mut r = Vec::with_capacity(n);
    for i in 0..n {
        if spec.dgm.is_selection() {
            let yi = f64::from(u8::from(rng.random::<f64>() < expit(spec.substantive_eta(z[i], x[i]))));
            let ri = rng.random::<f64>() < expit(spec.response_eta(a1, z[i], x[i], yi));
            y.push(yi);
            r.push(ri);
        } else {
            let ri = rng.random::<f64>() < expit(spec.response_eta(a1, z[i], x[i], 0.0));
            let eta = spec.pattern_eta(z[i], x[i], f64::from(u8::from(ri)));
            y.push(f64::from(u8::from(rng.random::<f64>() < expit(eta))));
            r.push(ri);
        }
    }
    SimDraw { z, x, y, r }
}

/// Generates one replicate of size `spec.n`.
pub fn generate<R: Rng>(spec: &DgmSpec, a1: f64, rng: &mut R) -> SimDraw {
    generate_rows(spec, a1, spec.n, rng)
}

/// Substantive design `(1, z)` or `(1, z, x)`.
pub fn substantive_design(dgm: Dgm, draw: &SimDraw) -> DMatrix<f64> {
    let n = draw.len();
    let p = if dgm.x_in_substantive() { 3 } else { 2 };
    DMatrix::from_fn(n, p, |i, j| match j {
        0 => 1.0,
        1 => draw.z[i],
        _ => draw.x[i],
    })
}

/// The analysis data set: `x_S` per the DGM, `x` as auxiliary in DGM 2.
pub fn analysis_dataset(dgm: Dgm, draw: &SimDraw) -> Result<TrialDataset> {
    let n = draw.len();
    let xs = substantive_design(dgm, draw);
    let xa = if dgm == Dgm::Two {
        DMatrix::from_fn(n, 1, |i, _| draw.x[i])
    } else {
        DMatrix::zeros(n, 0)
    };
    let y = (0..n).map(|i| draw.r[i].then_some(draw.y[i])).collect();
    TrialDataset::new(y, xs, 1, xa)
}
