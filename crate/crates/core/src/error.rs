use thiserror::Error;

/// Errors produced by the planning library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient covariate history: need month {needed}, series covers {first}..={last}")]
    InsufficientHistory { needed: i64, first: u32, last: u32 },

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("cost grid too short: minimum of q_t sits at t_max = {t_max}")]
    GridTooShort { t_max: u32 },

    #[error("instance too large for exhaustive enumeration ({components} components, {horizon} months)")]
    InstanceTooLarge { components: usize, horizon: u32 },

    #[error("unknown component id `{0}`")]
    UnknownComponent(String),

    #[error("missing covariate series for component `{0}`")]
    MissingCovariates(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
