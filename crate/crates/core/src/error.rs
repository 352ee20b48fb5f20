use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("integrand not finite at {at}")]
    IntegrandNotFinite { at: String },

    #[error("recession required: integrand `{0}` has no recession function")]
    RecessionRequired(String),

    #[error("decomposition requires null limit: last L1 norm {norm:.3e} exceeds {tol:.3e}")]
    NotNullLimit { norm: f64, tol: f64 },

    #[error("mismatched domains: {0}")]
    MismatchedDomains(String),

    #[error("sequence does not generate at this resolution: {0}")]
    NotGenerating(String),

    #[error("orthogonality violation in {location}: {detail}")]
    Orthogonality { location: String, detail: String },

    #[error("inversion error: {0}")]
    Inversion(String),

    #[error("not a gradient GYM: {0}")]
    NotGradient(String),

    #[error("inconsistent pair: Green residual {residual:.3e} above tolerance {tol:.3e}")]
    InconsistentPair { residual: f64, tol: f64 },

    #[error("admissibility violation: {0}")]
    Admissibility(String),

    #[error("hypothesis `{name}` refused: {detail}")]
    HypothesisRefused { name: String, detail: String },

    #[error("infeasible bound: {0}")]
    Infeasible(String),

    #[error("unknown integrand `{0}`")]
    UnknownIntegrand(String),

    #[error("characterization failed: {0}")]
    Characterization(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
