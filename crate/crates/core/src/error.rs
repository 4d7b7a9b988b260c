use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("connectivity unreachable: no connected graph with n={n_nodes}, p={edge_prob} after {attempts} draws")]
    ConnectivityUnreachable {
        n_nodes: usize,
        edge_prob: f64,
        attempts: usize,
    },

    #[error("graph is not connected")]
    Disconnected,

    #[error("node index {index} out of range for {n_nodes} nodes")]
    NodeOutOfRange { index: usize, n_nodes: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("warm start not converged after {iters} iterations (G-distance {distance:e} > eps0 {eps0:e})")]
    WarmStartNotConverged { iters: u64, distance: f64, eps0: f64 },

    #[error("degenerate decay: fitted gamma {gamma_hat} is not below 1")]
    DegenerateDecay { gamma_hat: f64 },

    #[error("track with seed {seed} failed: {source}")]
    Track {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("invalid value for `{key}`: {constraint}")]
    ConfigValue { key: &'static str, constraint: String },

    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::WarmStartNotConverged { .. }
            | Error::DegenerateDecay { .. }
            | Error::LinearSolve(_)
            | Error::ConnectivityUnreachable { .. } => true,
            Error::Track { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
