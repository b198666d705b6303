use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("conflicting values for ({entity}, {year}, {variable}): {first} vs {second}")]
    ConflictingCell {
        entity: String,
        year: i32,
        variable: String,
        first: f64,
        second: f64,
    },

    #[error("non-finite value for ({entity}, {year}, {variable})")]
    NonFiniteCell {
        entity: String,
        year: i32,
        variable: String,
    },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty estimation sample: {0}")]
    EmptySample(String),

    #[error("too few observations: n = {n} with k = {k} parameters")]
    TooFewObservations { n: usize, k: usize },

    #[error("matrix is not positive definite (pivot {index} = {value:e})")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("covariance matrix is near-singular: smallest eigenvalue {min:e}, largest {max:e}")]
    NearSingular { min: f64, max: f64 },

    #[error("rank-deficient regressors: column `{column}` is collinear with earlier columns")]
    RankDeficient { column: String },

    #[error("regressor `{0}` has no within-entity variation")]
    NoWithinVariation(String),

    #[error("not estimable: {0}")]
    NotEstimable(String),

    #[error("periods {0} and {1} are never observed for a common cross-section")]
    EmptyPeriodPair(i32, i32),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{cluster} cluster, {stage}: {source}")]
    Cluster {
        cluster: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True for failures caused by the supplied files or configuration rather
    /// than by the estimation itself.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::ConflictingCell { .. }
            | Error::NonFiniteCell { .. }
            | Error::UnknownVariable(_)
            | Error::UnknownCountry(_)
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Config { .. }
            | Error::Io { .. } => true,
            Error::Stage { source, .. } | Error::Cluster { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
