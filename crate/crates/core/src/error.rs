use thiserror::Error;

/// Errors surfaced by the simulation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input parameter (constellation spec, config field, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Fewer satellites visible from the service center than requested.
    #[error("coverage error: only {visible} satellites visible, {required} required")]
    Coverage { visible: usize, required: usize },

    /// A pre-fixed scheduling rule cannot cover every user.
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    /// Numerical failure (factorization, solver breakdown).
    #[error("numerical error: {0}")]
    Numeric(String),

    /// Inconsistent dimensions while assembling a cone program.
    #[error("program build error: {0}")]
    Build(String),

    /// Configuration file problems.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
