use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed shape: non-square input, asymmetry, dimension mismatch.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::matrix::MAX_DIM)]
    DimensionCap(usize),

    #[error("matrix is not positive semidefinite (witness direction {witness:?}, vᵀΣv = {value})")]
    NotPsd { witness: Vec<f64>, value: f64 },

    #[error("matrix is singular: zero pivot in column {pivot}")]
    Singular { pivot: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("divergent moment: {0}")]
    Divergent(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("cannot parse {0:?} as a number")]
    Parse(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(text: &str) -> Self {
        Error::Parse(text.to_owned())
    }

    /// Stable machine-readable tag for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::DimensionCap(_) => "dimension_cap",
            Error::NotPsd { .. } => "not_psd",
            Error::Singular { .. } => "singular",
            Error::Unsupported(_) => "unsupported",
            Error::Resource(_) => "resource",
            Error::Divergent(_) => "divergent",
            Error::Contract(_) => "contract",
            Error::Parse(_) => "parse",
            Error::Json(_) => "json",
        }
    }
}
