//! Problem representation in standard form and the relaxation operator.
//!
//! A [`ParametricMinlp`] is
//!
//! ```text
//!     min  f(x, d, theta)
//!     s.t. c(x, d, theta) = 0
//!          d_int(d)       = 0        (linear, integer variables only)
//!          l <= x <= u
//!          d_i in {0, 1}
//! ```
//!
//! with a homotopy parameter `theta` in `[0, 1]`. Maximization problems are
//! negated at construction. Branch-and-bound nodes are partial assignments
//! of the binaries ([`NodeAssignment`]); [`relax`] turns a node into the
//! continuous [`Relaxation`] the barrier solver consumes: fixed binaries
//! become point values, free binaries become variables boxed to `[0, 1]`.

use std::sync::Arc;

use crate::error::SolveError;

/// COO matrix entry `(row, col, value)`. Duplicate entries are summed.
pub type Triplet = (usize, usize, f64);

/// Objective sense. Stored problems are always in minimization form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Analytic callbacks for a problem in standard form.
///
/// Index space: gradients, Hessians and Jacobian columns run over the
/// concatenated vector `(x, d)`, continuous variables first. All callbacks
/// must be pure; they are shared across threads.
pub trait ProblemFunctions: Send + Sync {
    fn objective(&self, x: &[f64], delta: &[f64], theta: f64) -> f64;

    /// Gradient of the objective over `(x, d)`, length `n_cont + n_bin`.
    fn gradient(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<f64>;

    /// Hessian of the objective over `(x, d)` as symmetric COO triplets.
    fn objective_hessian(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<Triplet>;

    /// Equality constraint residuals `c(x, d, theta)`.
    fn constraints(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<f64>;

    /// Jacobian of `c`, rows = constraints, cols = `(x, d)`.
    fn constraint_jacobian(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<Triplet>;

    /// Weighted constraint Hessian `sum_k lambda_k * hess(c_k)` over `(x, d)`.
    fn constraint_hessian(
        &self,
        x: &[f64],
        delta: &[f64],
        theta: f64,
        lambda: &[f64],
    ) -> Vec<Triplet>;
}

/// Negates the objective of an inner set of callbacks. Applied once at
/// construction when the caller hands in a maximization problem.
struct Negated<F: ProblemFunctions>(F);

impl<F: ProblemFunctions> ProblemFunctions for Negated<F> {
    fn objective(&self, x: &[f64], delta: &[f64], theta: f64) -> f64 {
        -self.0.objective(x, delta, theta)
    }
    fn gradient(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<f64> {
        let mut g = self.0.gradient(x, delta, theta);
        for v in &mut g {
            *v = -*v;
        }
        g
    }
    fn objective_hessian(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<Triplet> {
        let mut h = self.0.objective_hessian(x, delta, theta);
        for t in &mut h {
            t.2 = -t.2;
        }
        h
    }
    fn constraints(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<f64> {
        self.0.constraints(x, delta, theta)
    }
    fn constraint_jacobian(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<Triplet> {
        self.0.constraint_jacobian(x, delta, theta)
    }
    fn constraint_hessian(
        &self,
        x: &[f64],
        delta: &[f64],
        theta: f64,
        lambda: &[f64],
    ) -> Vec<Triplet> {
        self.0.constraint_hessian(x, delta, theta, lambda)
    }
}

/// A linear integer-only constraint `sum_i coeffs[i] * d_i = rhs`.
///
/// Integer constraints are stored as data rather than callbacks, which
/// restricts them to linear form by construction and makes interval
/// propagation in [`check_integer_feasible`] exact.
#[derive(Debug, Clone)]
pub struct IntConstraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl IntConstraint {
    pub fn residual(&self, delta: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(delta.iter())
            .map(|(c, d)| c * d)
            .sum::<f64>()
            - self.rhs
    }

    fn touches_free(&self, node: &NodeAssignment) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .any(|(i, &c)| c != 0.0 && node.state(i) == BinState::Free)
    }
}

/// A mixed-integer nonlinear program in standard form, immutable after
/// construction and shareable across workers.
pub struct ParametricMinlp {
    n_cont: usize,
    n_bin: usize,
    n_eq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    sense: Sense,
    int_constraints: Vec<IntConstraint>,
    functions: Arc<dyn ProblemFunctions>,
}

impl ParametricMinlp {
    /// Builds a problem. `lower`/`upper` are per-continuous-variable box
    /// bounds; either side may be infinite. `sense == Maximize` negates the
    /// objective callbacks so the stored problem minimizes.
    pub fn new<F: ProblemFunctions + 'static>(
        n_cont: usize,
        n_bin: usize,
        n_eq: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        sense: Sense,
        functions: F,
    ) -> Result<Self, SolveError> {
        if lower.len() != n_cont || upper.len() != n_cont {
            return Err(SolveError::Config(format!(
                "bounds must have length n_cont = {n_cont}"
            )));
        }
        for i in 0..n_cont {
            if !(lower[i] < upper[i]) {
                return Err(SolveError::Config(format!(
                    "variable {i}: lower bound {} is not below upper bound {}",
                    lower[i], upper[i]
                )));
            }
        }
        let functions: Arc<dyn ProblemFunctions> = match sense {
            Sense::Minimize => Arc::new(functions),
            Sense::Maximize => Arc::new(Negated(functions)),
        };
        Ok(Self {
            n_cont,
            n_bin,
            n_eq,
            lower,
            upper,
            sense,
            int_constraints: Vec::new(),
            functions,
        })
    }

    /// Adds a linear integer-only constraint row.
    pub fn with_int_constraint(mut self, row: IntConstraint) -> Result<Self, SolveError> {
        if row.coeffs.len() != self.n_bin {
            return Err(SolveError::Config(format!(
                "integer constraint must have {} coefficients",
                self.n_bin
            )));
        }
        self.int_constraints.push(row);
        Ok(self)
    }

    pub fn n_cont(&self) -> usize {
        self.n_cont
    }
    pub fn n_bin(&self) -> usize {
        self.n_bin
    }
    pub fn n_eq(&self) -> usize {
        self.n_eq
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn sense(&self) -> Sense {
        self.sense
    }
    pub fn int_constraints(&self) -> &[IntConstraint] {
        &self.int_constraints
    }
    pub fn functions(&self) -> &Arc<dyn ProblemFunctions> {
        &self.functions
    }

    /// Objective in the stored minimization form.
    pub fn objective(&self, x: &[f64], delta: &[f64], theta: f64) -> f64 {
        self.functions.objective(x, delta, theta)
    }
}

/// Status of one binary in a branch-and-bound node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinState {
    Fixed(bool),
    Free,
}

/// A partial assignment of the binaries: the branch-and-bound tree node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeAssignment(Vec<BinState>);

impl NodeAssignment {
    /// The root node: every binary free.
    pub fn root(n_bin: usize) -> Self {
        Self(vec![BinState::Free; n_bin])
    }

    /// A leaf built from bits of `mask`: bit `i` is the value of binary `i`.
    pub fn leaf_from_bits(n_bin: usize, mask: u64) -> Self {
        Self(
            (0..n_bin)
                .map(|i| BinState::Fixed((mask >> i) & 1 == 1))
                .collect(),
        )
    }

    /// Parses a mask string with one character per binary: `0`, `1` or `*`.
    pub fn from_mask(s: &str) -> Result<Self, SolveError> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(BinState::Fixed(false)),
                '1' => Ok(BinState::Fixed(true)),
                '*' => Ok(BinState::Free),
                other => Err(SolveError::Config(format!(
                    "invalid mask character {other:?}, expected 0, 1 or *"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn mask(&self) -> String {
        self.0
            .iter()
            .map(|s| match s {
                BinState::Fixed(false) => '0',
                BinState::Fixed(true) => '1',
                BinState::Free => '*',
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn state(&self, i: usize) -> BinState {
        self.0[i]
    }

    /// A leaf has no free entries left.
    pub fn is_leaf(&self) -> bool {
        self.0.iter().all(|s| *s != BinState::Free)
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == BinState::Free)
            .map(|(i, _)| i)
    }

    pub fn num_fixed(&self) -> usize {
        self.0.iter().filter(|s| **s != BinState::Free).count()
    }

    /// Copy of this node with binary `index` fixed to `value`.
    pub fn with_fixed(&self, index: usize, value: bool) -> Self {
        let mut v = self.0.clone();
        v[index] = BinState::Fixed(value);
        Self(v)
    }
}

/// Domain of one binary inside a relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinDomain {
    Point(f64),
    Interval(f64, f64),
}

/// A continuous problem obtained from a node: integrality dropped, fixed
/// binaries substituted, free binaries boxed. Only [`relax`] constructs one.
///
/// Each free binary is carried in the paper's standard form as a
/// nonnegative pair: the value `d >= 0`, a complement slack `1 - d >= 0`,
/// and the pairing row `d + (1 - d) = 1`. The feasible set is exactly
/// `d` in `[0, 1]`, but a binary pushed against either end of its interval
/// is then always a variable approaching zero, which the log barrier
/// evaluates at full relative precision. A two-sided `[0, 1]` box would
/// lose the residual near `d = 1`: the distance `1 - d` shrinks to
/// `mu / dual`, far below the absolute spacing of doubles around one.
pub struct Relaxation {
    problem: Arc<ParametricMinlp>,
    node: NodeAssignment,
    domains: Vec<BinDomain>,
    /// Binaries that remain solver variables, ascending.
    free: Vec<usize>,
    /// Map from full `(x, d)` index to reduced variable index.
    full_to_reduced: Vec<Option<usize>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Integer-constraint rows kept in the reduced constraint set (those
    /// touching at least one free binary).
    active_int_rows: Vec<usize>,
}

/// Relaxes `problem` at `node`: `Fixed(v)` binaries become the point value
/// `v`, free binaries become interval variables over `[0, 1]` (carried in
/// complement-slack form, see [`Relaxation`]).
pub fn relax(problem: &Arc<ParametricMinlp>, node: &NodeAssignment) -> Relaxation {
    assert_eq!(
        node.len(),
        problem.n_bin(),
        "node length must equal the binary count"
    );
    let domains: Vec<BinDomain> = (0..problem.n_bin())
        .map(|i| match node.state(i) {
            BinState::Fixed(v) => BinDomain::Point(if v { 1.0 } else { 0.0 }),
            BinState::Free => BinDomain::Interval(0.0, 1.0),
        })
        .collect();
    let free: Vec<usize> = node.free_indices().collect();

    let n_cont = problem.n_cont();
    let mut full_to_reduced = vec![None; n_cont + problem.n_bin()];
    #[allow(clippy::needless_range_loop)]
    for i in 0..n_cont {
        full_to_reduced[i] = Some(i);
    }
    for (k, &b) in free.iter().enumerate() {
        full_to_reduced[n_cont + b] = Some(n_cont + k);
    }

    let mut lower = problem.lower().to_vec();
    let mut upper = problem.upper().to_vec();
    // free binaries, then their complement slacks
    for _ in 0..2 * free.len() {
        lower.push(0.0);
        upper.push(f64::INFINITY);
    }

    let active_int_rows = problem
        .int_constraints()
        .iter()
        .enumerate()
        .filter(|(_, row)| row.touches_free(node))
        .map(|(i, _)| i)
        .collect();

    Relaxation {
        problem: Arc::clone(problem),
        node: node.clone(),
        domains,
        free,
        full_to_reduced,
        lower,
        upper,
        active_int_rows,
    }
}

impl Relaxation {
    pub fn problem(&self) -> &Arc<ParametricMinlp> {
        &self.problem
    }
    pub fn node(&self) -> &NodeAssignment {
        &self.node
    }
    pub fn domains(&self) -> &[BinDomain] {
        &self.domains
    }
    pub fn free_binaries(&self) -> &[usize] {
        &self.free
    }

    /// Number of solver variables: continuous, free binaries, and their
    /// complement slacks.
    pub fn n_vars(&self) -> usize {
        self.problem.n_cont() + 2 * self.free.len()
    }

    /// Number of equality constraints: `c` rows, retained integer rows,
    /// and one pairing row per free binary.
    pub fn n_constraints(&self) -> usize {
        self.problem.n_eq() + self.active_int_rows.len() + self.free.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Splits a reduced variable vector into `(x, d)` with fixed binaries
    /// substituted.
    pub fn split(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_cont = self.problem.n_cont();
        let x = z[..n_cont].to_vec();
        let mut delta: Vec<f64> = self
            .domains
            .iter()
            .map(|d| match d {
                BinDomain::Point(v) => *v,
                BinDomain::Interval(..) => f64::NAN,
            })
            .collect();
        for (k, &b) in self.free.iter().enumerate() {
            delta[b] = z[n_cont + k];
        }
        (x, delta)
    }

    /// Integer-constraint rows whose binaries are all fixed, evaluated at
    /// the node's values. Nonzero residuals mean the node is infeasible
    /// before any continuous solve.
    pub fn fixed_int_violation(&self) -> f64 {
        let delta: Vec<f64> = self
            .domains
            .iter()
            .map(|d| match d {
                BinDomain::Point(v) => *v,
                BinDomain::Interval(..) => 0.0,
            })
            .collect();
        self.problem
            .int_constraints()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.active_int_rows.contains(i))
            .map(|(_, row)| row.residual(&delta).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, z: &[f64], theta: f64) -> f64 {
        let (x, d) = self.split(z);
        self.problem.functions().objective(&x, &d, theta)
    }

    /// Objective gradient over the reduced variables.
    pub fn gradient(&self, z: &[f64], theta: f64) -> Vec<f64> {
        let (x, d) = self.split(z);
        let full = self.problem.functions().gradient(&x, &d, theta);
        let mut g = vec![0.0; self.n_vars()];
        for (i, v) in full.into_iter().enumerate() {
            if let Some(j) = self.full_to_reduced[i] {
                g[j] = v;
            }
        }
        g
    }

    /// Constraint residuals: `c` rows, retained integer rows, pairing rows.
    pub fn constraints(&self, z: &[f64], theta: f64) -> Vec<f64> {
        let (x, d) = self.split(z);
        let mut c = self.problem.functions().constraints(&x, &d, theta);
        debug_assert_eq!(c.len(), self.problem.n_eq());
        for &row in &self.active_int_rows {
            c.push(self.problem.int_constraints()[row].residual(&d));
        }
        let n_cont = self.problem.n_cont();
        let n_free = self.free.len();
        for k in 0..n_free {
            c.push(z[n_cont + k] + z[n_cont + n_free + k] - 1.0);
        }
        c
    }

    /// Constraint Jacobian over the reduced variables, COO.
    pub fn jacobian(&self, z: &[f64], theta: f64) -> Vec<Triplet> {
        let (x, d) = self.split(z);
        let mut out = Vec::new();
        for (r, c, v) in self.problem.functions().constraint_jacobian(&x, &d, theta) {
            if let Some(j) = self.full_to_reduced[c] {
                out.push((r, j, v));
            }
        }
        let n_cont = self.problem.n_cont();
        for (k, &row) in self.active_int_rows.iter().enumerate() {
            let r = self.problem.n_eq() + k;
            let coeffs = &self.problem.int_constraints()[row].coeffs;
            for (b, &coef) in coeffs.iter().enumerate() {
                if coef != 0.0 {
                    if let Some(j) = self.full_to_reduced[n_cont + b] {
                        out.push((r, j, coef));
                    }
                }
            }
        }
        let n_free = self.free.len();
        let pair_base = self.problem.n_eq() + self.active_int_rows.len();
        for k in 0..n_free {
            out.push((pair_base + k, n_cont + k, 1.0));
            out.push((pair_base + k, n_cont + n_free + k, 1.0));
        }
        out
    }

    /// Hessian of the Lagrangian terms `f + lambda' c` over the reduced
    /// variables (barrier terms excluded). `lambda` covers the reduced
    /// constraint rows; retained integer rows are linear and contribute
    /// nothing.
    pub fn lagrangian_hessian(&self, z: &[f64], theta: f64, lambda: &[f64]) -> Vec<Triplet> {
        let (x, d) = self.split(z);
        let funcs = self.problem.functions();
        let mut out = Vec::new();
        for (r, c, v) in funcs.objective_hessian(&x, &d, theta) {
            if let (Some(i), Some(j)) = (self.full_to_reduced[r], self.full_to_reduced[c]) {
                out.push((i, j, v));
            }
        }
        let lam_c = &lambda[..self.problem.n_eq()];
        for (r, c, v) in funcs.constraint_hessian(&x, &d, theta, lam_c) {
            if let (Some(i), Some(j)) = (self.full_to_reduced[r], self.full_to_reduced[c]) {
                out.push((i, j, v));
            }
        }
        out
    }
}

/// Verdict of the integer-only feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntFeasibility {
    /// The fixed part already violates some integer constraint.
    Infeasible,
    /// No violation detected; free entries may still complete the row.
    Unknown,
}

/// Interval propagation of the integer constraints over a partial
/// assignment. Free entries range over `[0, 1]`; a row whose reachable
/// interval excludes zero is a proof of infeasibility.
pub fn check_integer_feasible(problem: &ParametricMinlp, node: &NodeAssignment) -> IntFeasibility {
    const TOL: f64 = 1e-9;
    for row in problem.int_constraints() {
        let mut lo = -row.rhs;
        let mut hi = -row.rhs;
        for (i, &c) in row.coeffs.iter().enumerate() {
            match node.state(i) {
                BinState::Fixed(v) => {
                    let term = c * if v { 1.0 } else { 0.0 };
                    lo += term;
                    hi += term;
                }
                BinState::Free => {
                    lo += c.min(0.0);
                    hi += c.max(0.0);
                }
            }
        }
        if lo > TOL || hi < -TOL {
            return IntFeasibility::Infeasible;
        }
    }
    IntFeasibility::Unknown
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;
    impl ProblemFunctions for Quadratic {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            x[0] * x[0]
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * x[0], 0.0]
        }
        fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 2.0)]
        }
        fn constraints(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![]
        }
        fn constraint_jacobian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![]
        }
        fn constraint_hessian(&self, _x: &[f64], _d: &[f64], _t: f64, _l: &[f64]) -> Vec<Triplet> {
            vec![]
        }
    }

    fn toy() -> Arc<ParametricMinlp> {
        Arc::new(
            ParametricMinlp::new(
                1,
                1,
                0,
                vec![0.0],
                vec![10.0],
                Sense::Minimize,
                Quadratic,
            )
            .unwrap(),
        )
    }

    #[test]
    fn relax_all_free_boxes_every_binary() {
        let p = toy();
        let r = relax(&p, &NodeAssignment::root(1));
        assert_eq!(r.domains(), &[BinDomain::Interval(0.0, 1.0)]);
        // complement-slack form: the binary, its slack, one pairing row
        assert_eq!(r.n_vars(), 3);
        assert_eq!(r.n_constraints(), 1);
        assert_eq!(r.lower(), &[0.0, 0.0, 0.0]);
        assert_eq!(r.upper(), &[10.0, f64::INFINITY, f64::INFINITY]);
        // the pairing row encodes d in [0, 1]
        let c = r.constraints(&[5.0, 0.3, 0.7], 0.0);
        assert_eq!(c, vec![0.0]);
        let c = r.constraints(&[5.0, 0.3, 0.2], 0.0);
        assert!((c[0] + 0.5).abs() < 1e-15);
        // the binary value itself is reported
        let (_, d) = r.split(&[5.0, 0.3, 0.7]);
        assert_eq!(d, vec![0.3]);
    }

    #[test]
    fn relax_all_fixed_leaves_no_free_binaries() {
        let p = toy();
        let node = NodeAssignment::root(1).with_fixed(0, true);
        let r = relax(&p, &node);
        assert_eq!(r.domains(), &[BinDomain::Point(1.0)]);
        assert_eq!(r.n_vars(), 1);
        let (x, d) = r.split(&[3.0]);
        assert_eq!(x, vec![3.0]);
        assert_eq!(d, vec![1.0]);
    }

    #[test]
    fn maximization_is_negated_at_construction() {
        let p = ParametricMinlp::new(
            1,
            0,
            0,
            vec![0.0],
            vec![10.0],
            Sense::Maximize,
            Quadratic,
        )
        .unwrap();
        assert_eq!(p.objective(&[2.0], &[], 0.0), -4.0);
        assert_eq!(p.sense(), Sense::Maximize);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let r = ParametricMinlp::new(
            1,
            0,
            0,
            vec![1.0],
            vec![1.0],
            Sense::Minimize,
            Quadratic,
        );
        assert!(matches!(r, Err(SolveError::Config(_))));
    }

    fn two_bin_problem(rows: Vec<IntConstraint>) -> ParametricMinlp {
        let mut p = ParametricMinlp::new(
            1,
            2,
            0,
            vec![0.0],
            vec![1.0],
            Sense::Minimize,
            Quadratic,
        )
        .unwrap();
        for row in rows {
            p = p.with_int_constraint(row).unwrap();
        }
        p
    }

    #[test]
    fn empty_int_constraints_are_unknown() {
        let p = two_bin_problem(vec![]);
        assert_eq!(
            check_integer_feasible(&p, &NodeAssignment::root(2)),
            IntFeasibility::Unknown
        );
    }

    #[test]
    fn violated_fixed_row_is_infeasible() {
        // d0 + d1 - 1 = 0 with both fixed to 1: residual 1
        let p = two_bin_problem(vec![IntConstraint {
            coeffs: vec![1.0, 1.0],
            rhs: 1.0,
        }]);
        let node = NodeAssignment::root(2)
            .with_fixed(0, true)
            .with_fixed(1, true);
        assert_eq!(check_integer_feasible(&p, &node), IntFeasibility::Infeasible);
    }

    #[test]
    fn completable_row_is_unknown() {
        let p = two_bin_problem(vec![IntConstraint {
            coeffs: vec![1.0, 1.0],
            rhs: 1.0,
        }]);
        let node = NodeAssignment::root(2).with_fixed(0, true);
        assert_eq!(check_integer_feasible(&p, &node), IntFeasibility::Unknown);
    }

    #[test]
    fn mask_round_trip() {
        let node = NodeAssignment::from_mask("01*").unwrap();
        assert_eq!(node.mask(), "01*");
        assert!(!node.is_leaf());
        assert_eq!(node.free_indices().collect::<Vec<_>>(), vec![2]);
        assert!(NodeAssignment::from_mask("0x1").is_err());
    }

    #[test]
    fn nested_node_feasible_set_shrinks() {
        // relax(p, n') bounds are a subset of relax(p, n) bounds when n'
        // extends n
        let p = Arc::new(two_bin_problem(vec![]));
        let outer = relax(&p, &NodeAssignment::root(2));
        let inner_node = NodeAssignment::root(2).with_fixed(1, false);
        let inner = relax(&p, &inner_node);
        // the remaining free binary keeps its box
        assert_eq!(inner.lower()[1], outer.lower()[1]);
        // the fixed one is a point inside the outer interval
        match (inner.domains()[1], outer.domains()[1]) {
            (BinDomain::Point(v), BinDomain::Interval(lo, hi)) => {
                assert!(lo <= v && v <= hi);
            }
            other => panic!("unexpected domains {other:?}"),
        }
    }
}
