//! Error type shared by all modules of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

/// Everything that can go wrong while meshing, solving or verifying.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// Domain description rejected before any numerics run.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// A caller-visible precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// NaN or infinity found in an input array.
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    /// Iterative eigensolver ran out of iterations.
    #[error("eigensolver stalled after {iterations} iterations (worst relative residual {residual:.3e})")]
    EigNonConvergence { iterations: usize, residual: f64 },

    /// Linear solver (CG / MINRES) ran out of iterations.
    #[error("linear solver stalled after {iterations} iterations (relative residual {residual:.3e})")]
    SolveNonConvergence { iterations: usize, residual: f64 },

    /// Resolvent shift too close to the discrete spectrum.
    #[error("shift lambda = {lambda} is within {tol:.3e} of the discrete eigenvalue {nearest}")]
    NearSpectrum { lambda: f64, nearest: f64, tol: f64 },

    /// Probe point violates the boundary margin.
    #[error("probe too close to the boundary: distance {distance:.3e} < required {required:.3e}")]
    ProbeTooClose { distance: f64, required: f64 },

    /// Scalar root find (Euler-Lagrange inversion) failed for one node.
    #[error("Euler-Lagrange inversion failed at node {node} (t = {t:.6e})")]
    ElInversion { node: usize, t: f64 },

    /// Damping and line search both failed to decrease the relaxed functional.
    #[error("relaxed minimization stalled at iteration {iteration}: {detail}")]
    RelaxationStalled { iteration: usize, detail: String },

    /// One continuation stage did not converge.
    #[error("continuation stage epsilon = {eps:.3e} did not converge within {iterations} iterations")]
    StageNonConvergence { eps: f64, iterations: usize },

    /// The mass never changes sign on the probed interval.
    #[error("threshold not bracketed: {0}")]
    ThresholdNotBracketed(String),
}
