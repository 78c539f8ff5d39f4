use serde::{Deserialize, Serialize};

/// Terminal status of a relaxation or branch-and-bound solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    SingularPoint,
    Diverged,
}

/// Newton iteration counts per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    /// Phase-one feasibility iterations at `theta = 0`.
    pub phase1_newton: usize,
    /// Iterations of the solve of the zero problem at `mu_0`.
    pub zero_newton: usize,
    /// Accepted continuation steps in `theta`.
    pub path_steps: usize,
    /// Corrector iterations over all accepted and rejected steps.
    pub path_newton: usize,
    /// Iterations of the barrier-reduction phase at `theta = 1`.
    pub mu_newton: usize,
}

impl IterationCounts {
    pub fn total_newton(&self) -> usize {
        self.phase1_newton + self.zero_newton + self.path_newton + self.mu_newton
    }
}

/// Result of a relaxation solve or a branch-and-bound run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective in minimization form; `+inf` for infeasible relaxations.
    pub objective: f64,
    /// Continuous primal solution.
    pub x: Vec<f64>,
    /// Binary values: integral for branch-and-bound incumbents, relaxed
    /// values for interior-node relaxations.
    pub delta: Vec<f64>,
    /// Equality-constraint multipliers at the final iterate.
    pub lambda: Vec<f64>,
    /// Final infinity norm of the barrier KKT residual.
    pub kkt_residual: f64,
    pub counts: IterationCounts,
    /// Nodes processed (1 for a plain relaxation solve).
    pub visited_nodes: usize,
    /// Nodes whose relaxation solve failed numerically (singular point,
    /// divergence or path failure); nonzero means the optimality
    /// certificate is incomplete.
    pub failed_nodes: usize,
    /// Objective of the all-free root relaxation: a global lower bound.
    pub root_bound: Option<f64>,
}

impl SolveReport {
    pub(crate) fn infeasible(n_cont: usize, n_bin: usize) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            x: vec![f64::NAN; n_cont],
            delta: vec![f64::NAN; n_bin],
            lambda: Vec::new(),
            kkt_residual: f64::NAN,
            counts: IterationCounts::default(),
            visited_nodes: 1,
            failed_nodes: 0,
            root_bound: None,
        }
    }

    pub(crate) fn failed(status: SolveStatus, n_cont: usize, n_bin: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: vec![f64::NAN; n_cont],
            delta: vec![f64::NAN; n_bin],
            lambda: Vec::new(),
            kkt_residual: f64::NAN,
            counts: IterationCounts::default(),
            visited_nodes: 1,
            failed_nodes: 1,
            root_bound: None,
        }
    }

    /// Binary solution as a `0`/`1` string (values rounded).
    pub fn delta_bitstring(&self) -> String {
        self.delta
            .iter()
            .map(|&v| if v >= 0.5 { '1' } else { '0' })
            .collect()
    }
}
