use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pathway graph: {0}")]
    InvalidGraph(String),

    #[error("unknown state label `{0}`")]
    UnknownState(String),

    #[error("unknown transition `{0}`")]
    UnknownTransition(String),

    #[error("patient {patient}: {reason}")]
    InvalidPathway { patient: String, reason: String },

    #[error(
        "patient {patient}: covariate `{field}` is not observable before transition `{transition}`"
    )]
    HistoryOrdering {
        patient: String,
        transition: String,
        field: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite after nugget escalation")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("optimizer did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("scale estimate collapsed to zero (degenerate input)")]
    DegenerateScale,

    #[error("complete separation detected in logistic regression")]
    Separation,

    #[error("sampler produced a non-finite value at iteration {iteration} ({what})")]
    SamplerNan {
        iteration: usize,
        what: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no fitted model for transition `{0}`")]
    MissingModel(String),

    #[error("zero total weight: no regime-consistent uncensored patients")]
    ZeroWeight,

    #[error("censoring survival estimate is zero at time {0}")]
    ZeroCensoringSurvival(f64),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "invalid_graph",
            Error::UnknownState(_) => "unknown_state",
            Error::UnknownTransition(_) => "unknown_transition",
            Error::InvalidPathway { .. } => "invalid_pathway",
            Error::HistoryOrdering { .. } => "history_ordering",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::RankDeficient => "rank_deficient",
            Error::NoConvergence(_) => "no_convergence",
            Error::DegenerateScale => "degenerate_scale",
            Error::Separation => "separation",
            Error::SamplerNan { .. } => "sampler_nan",
            Error::Empty(_) => "empty",
            Error::MissingModel(_) => "missing_model",
            Error::ZeroWeight => "zero_weight",
            Error::ZeroCensoringSurvival(_) => "zero_censoring_survival",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Parse { .. } => "parse",
            Error::MissingColumn(_) => "missing_column",
        }
    }

    pub(crate) fn pathway(patient: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidPathway {
            patient: patient.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
