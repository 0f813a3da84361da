use thiserror::Error;

/// Errors raised by estimation, inference, data loading and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular design: column {column} is linearly dependent on earlier columns")]
    SingularDesign { column: usize },

    #[error("GLM fit did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        last_beta: Vec<f64>,
    },

    #[error("perfect separation detected: max |beta| reached {max_abs_beta:.2}")]
    Separation { max_abs_beta: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid sensitivity parameter: {0}")]
    InvalidDelta(String),

    #[error("sandwich bread matrix is singular")]
    VarianceSingular,

    #[error("degenerate influence: I_mis = {i_mis} but full-data influence is zero")]
    DegenerateInfluence { i_mis: f64 },

    #[error("ill-conditioned variance matrix: {0}")]
    IllConditionedVariance(String),

    #[error("unsupported family for this engine: {0}")]
    UnsupportedFamily(String),

    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    #[error("insufficient clusters: {m_obs} cluster(s) with observed outcomes, need at least 2")]
    InsufficientClusters { m_obs: usize },

    #[error("degenerate small-sample correction: n_eff = {n_eff} <= p* = {p_star}")]
    DegenerateCorrection { n_eff: f64, p_star: usize },

    #[error("non-positive degrees of freedom: {0}")]
    DegreesOfFreedom(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("multiple imputation failed: {0}")]
    MultipleImputation(String),

    #[error("selection model estimating equation did not converge after {iterations} iterations")]
    SelectionConvergence { iterations: usize },

    #[error("extreme inverse-probability weight {max_weight:.3e}")]
    ExtremeWeight { max_weight: f64 },

    #[error("simulation study failed: {0}")]
    Study(String),

    #[error("data error at row {row}, column '{column}': {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
