use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty data set")]
    EmptyData,

    #[error("trace too short: {len} draws cannot form {batches} batches of at least {min_per_batch}")]
    TraceTooShort {
        len: usize,
        batches: usize,
        min_per_batch: usize,
    },

    #[error(
        "Bayes factor for k = {k} is undefined: the estimated probability that components 1..{km1} \
         are not all that is occupied is zero; run a longer chain or use the pooled estimators",
        km1 = k - 1
    )]
    DegenerateBayesFactor { k: usize },

    #[error("no pattern frequencies are positive; cannot anchor the marginal-likelihood sequence")]
    NoVisits,

    #[error("summaries must cover k = 1..{kmax} in order; found k = {found} at position {position}")]
    MissingSummary {
        kmax: usize,
        found: usize,
        position: usize,
    },

    #[error("instance too large for enumeration: {terms} allocation vectors (limit {limit})")]
    InstanceTooLarge { terms: f64, limit: f64 },

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {target:e}")]
    Quadrature { achieved: f64, target: f64 },

    #[error("{0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
