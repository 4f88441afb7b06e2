//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Transitive closure of a cyclic graph would put a vertex strictly
    /// before itself, so cyclic inputs are rejected outright.
    #[error("graph contains a cycle")]
    CyclicGraph,

    #[error("graph is not transitively closed: ({0},{1}) and ({1},{2}) present but ({0},{2}) missing")]
    NotClosed(u32, u32, u32),

    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty evaluation set")]
    EmptySet,

    #[error("vectors are parallel within tolerance; the separating construction is undefined")]
    ParallelVectors,

    #[error("denominator vanished; proportionality factor undefined at this probe point")]
    UndefinedFactor,

    #[error("matrix is symmetric within tolerance; no transitivity violation exists")]
    SymmetricInput,

    #[error("witness search budget exhausted without a verified violation")]
    WitnessSearchExhausted,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
