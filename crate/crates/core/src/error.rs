use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("a ring needs at least 3 vertices, got {0}")]
    DegenerateRing(usize),

    #[error("invalid adjacency matrix: {0}")]
    InvalidAdjacency(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown interaction regime `{0}`")]
    UnknownRegime(String),

    #[error("matrix is not Hermitian (‖A − A†‖ = {0:.3e})")]
    NotHermitian(f64),

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:.3e} below −{tolerance:.1e}")]
    PositivityViolated { min_eigenvalue: f64, tolerance: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Errors raised while integrating, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::PositivityViolated { .. } | Error::NonFinite(_) | Error::Numerical(_))
    }
}
