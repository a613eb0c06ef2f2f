use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("domain error: {0}")]
    Domain(String),

    /// Positive load on a link whose rate is zero.
    #[error("infeasible rate: {0}")]
    InfeasibleRate(String),

    /// Positive load on a CPU share of zero.
    #[error("infeasible share: {0}")]
    InfeasibleShare(String),

    /// A budget or capacity set is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration guard exceeded: {required} assignments required, guard is {guard}")]
    GuardExceeded { required: f64, guard: f64 },

    #[error("missing scheme: {0}")]
    MissingScheme(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that stem from an infeasible instance rather than bad input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleRate(_) | Error::InfeasibleShare(_) | Error::Infeasible(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
