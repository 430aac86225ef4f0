use thiserror::Error;

/// Errors raised by field construction, projection, meshing and metrics.
#[derive(Debug, Error)]
pub enum MdfError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("could not allocate {requested} values for grid storage")]
    Allocation { requested: usize },

    #[error("QP projection did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        /// Best feasible iterate reached before the cap.
        best: Vec<f64>,
    },

    #[error("projection failed at lattice point ({i}, {j}, {k}): {source}")]
    AtLattice {
        i: usize,
        j: usize,
        k: usize,
        #[source]
        source: Box<MdfError>,
    },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("mesh {0} is not watertight")]
    OpenMesh(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MdfError>;

pub(crate) fn invalid(msg: impl Into<String>) -> MdfError {
    MdfError::Validation(msg.into())
}
