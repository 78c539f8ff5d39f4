use crate::continuation::PathTrace;

/// Errors raised by the relaxation solver, the continuation driver and the
/// branch-and-bound engine.
#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    /// A point left the strict interior of the variable box.
    #[error("domain error: {0}")]
    Domain(String),

    /// Newton ran out of iterations or the residual blew up.
    #[error("newton diverged after {iterations} iterations, residual {residual:.3e}")]
    Diverged { iterations: usize, residual: f64 },

    /// The KKT matrix is numerically singular (pivot ratio below threshold,
    /// or the sparse factorization failed).
    #[error("singular KKT system (pivot ratio {ratio:.3e})")]
    SingularPoint { ratio: f64 },

    /// Phase one could not find an interior point with small constraint
    /// violation.
    #[error("no interior feasible point found, constraint violation {violation:.3e}")]
    Infeasible { violation: f64 },

    /// The continuation step underflowed its minimum before reaching
    /// `theta = 1`. The partial trace is attached for diagnosis.
    #[error("continuation step underflow at theta = {theta:.6}")]
    PathFailure { theta: f64, trace: PathTrace },

    /// A caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Branch-and-bound exhausted the tree without an integer-feasible leaf.
    #[error("no integer-feasible solution exists")]
    NoSolution,

    /// Exhaustive enumeration was asked for more binaries than the guard
    /// allows.
    #[error("enumeration guard: {0}")]
    Guard(String),

    /// Invalid model or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),
}
