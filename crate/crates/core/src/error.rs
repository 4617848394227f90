use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: at least one value set is required")]
    EmptyInput,

    #[error("size mismatch: {outputs} value sets for {participants} participants")]
    SizeMismatch { outputs: usize, participants: usize },

    #[error("group census is only defined for K = 2 (got K = {0})")]
    CensusNeedsBinary(usize),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no connected Erdős–Rényi sample in {attempts} attempts (n = {n}, p = {p})")]
    Disconnected { n: usize, p: f64, attempts: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
