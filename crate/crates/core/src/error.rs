use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The design matrix does not have full column rank.
    #[error("rank-deficient design: numerical rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("series is constant")]
    ConstantSeries,

    /// Gini index requested on a vector whose l1 norm is zero.
    #[error("sparsity undefined for an all-zero vector ({len} entries, {n_active} active)")]
    UndefinedSparsity { len: usize, n_active: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
