use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An experience's state length does not match the memory's configured width.
    #[error("state length {got} does not match configured width {expected}")]
    StateLength { expected: usize, got: usize },

    /// A cache index refers to an experience that has been evicted.
    #[error("stale index {index}: evicted (oldest resolvable is {oldest})")]
    Stale { index: u64, oldest: u64 },

    /// An index past the newest written experience.
    #[error("index {index} not yet written (write count is {write_count})")]
    Future { index: u64, write_count: u64 },

    /// Mutation attempted while the replay memory is frozen for a training burst.
    #[error("replay memory is frozen during a training burst")]
    Frozen,

    /// The requested cache size exceeds the number of distinct eligible indices.
    #[error("cache size {requested} exceeds the {available} distinct eligible indices")]
    Capacity { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Non-finite target or parameter encountered; the run must abort.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
