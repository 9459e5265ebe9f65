use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("Hermite function order {order} exceeds the supported maximum {max}")]
    BasisOverflow { order: usize, max: usize },

    #[error(
        "quadrature with {nodes} nodes is not converged: doubling the node count moved a matrix element by {delta:.3e}"
    )]
    QuadratureConvergence { nodes: usize, delta: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// Integration drift exceeded its limit; the step size must be refined.
    #[error("{quantity} drift {drift:.3e} exceeds {limit:.3e}; reduce dtau (currently {dtau})")]
    StepSize {
        quantity: &'static str,
        drift: f64,
        limit: f64,
        dtau: f64,
    },

    #[error("{operation} produced an invalid density operator: {reason}")]
    Channel { operation: &'static str, reason: String },

    #[error("{}top Fock-state population {population:.3e} exceeds the cutoff limit {limit:.3e}", cycle.map(|c| format!("cycle {c}: ")).unwrap_or_default())]
    CutoffExceeded {
        population: f64,
        limit: f64,
        cycle: Option<usize>,
    },

    #[error("efficiency is undefined: {0}")]
    UndefinedEfficiency(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument { .. } | Error::DimensionMismatch { .. })
    }
}
