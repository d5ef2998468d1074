use thiserror::Error;

/// Failures reported by the numerical kernels and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is numerically singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { pivot: f64, column: usize },

    #[error("control weight is not coercive: smallest eigenvalue of K*K is {min_eigenvalue:e}")]
    NotCoercive { min_eigenvalue: f64 },

    #[error("non-finite entries in {0}")]
    NonFiniteInput(&'static str),

    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("state became non-finite at t = {time}; last finite sample at t = {last_finite_time}")]
    NonFiniteState { time: f64, last_finite_time: f64 },

    #[error("steady-state KKT system is singular and inconsistent (residual {residual:e})")]
    KktSingular { residual: f64 },

    #[error("eigen decomposition residual {residual:e} exceeds the reliability bound")]
    SpectralUnreliable { residual: f64 },

    #[error("eigenvalue with real part {real:e} lies too close to the classification boundary")]
    GapViolation { real: f64 },

    #[error("pair (A, B) is not stabilizable: uncontrollable eigenvalue {re} + {im}i")]
    Unstabilizable { re: f64, im: f64 },

    #[error("Riccati flow did not settle before t = {t_max} (last increment {increment:e})")]
    NotConverged { t_max: f64, increment: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
