//! Branch-and-bound over the binary assignments, with the continuation
//! solver providing the node values `C(n)`, plus an exhaustive-enumeration
//! oracle for small instances.
//!
//! The loop is deliberately bare-bones: pop a node, discard it if its fixed
//! binaries already violate an integer constraint, otherwise solve its
//! relaxation. Leaves compete for the incumbent; interior nodes are pruned
//! when their relaxation value exceeds the incumbent (plus a tolerance that
//! biases toward exploring) and branched otherwise. Relaxation values are
//! lower bounds on every extension, which is what makes pruning sound.
//!
//! Nodes whose relaxation solve fails numerically are treated
//! conservatively: never pruned on (their bound counts as `-inf`), never
//! accepted as incumbents, and surfaced through a failure counter in the
//! report.

use std::collections::{BinaryHeap, VecDeque};
use std::sync::{Condvar, Mutex};

use serde::Serialize;

use crate::continuation::{solve_relaxation, ContinuationSchedule};
use crate::error::SolveError;
use crate::problem::{
    check_integer_feasible, relax, IntFeasibility, NodeAssignment, ParametricMinlp,
};
use crate::report::{IterationCounts, SolveReport, SolveStatus};
use std::sync::Arc;

/// Order in which open nodes are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueueDiscipline {
    /// Depth-first; finds leaves early. The default.
    Lifo,
    /// Breadth-first.
    Fifo,
    /// Lowest parent bound first.
    BestBound,
}

/// Choice of the binary to branch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchRule {
    /// Lowest-index free binary.
    LowestIndex,
    /// Free binary whose relaxed value is closest to 1/2 in the node's own
    /// relaxation, ties broken by lowest index.
    MostFractional,
}

/// Branch-and-bound controls.
#[derive(Clone)]
pub struct BnbConfig {
    pub queue: QueueDiscipline,
    pub branch_rule: BranchRule,
    /// Pruning uses `C(n) > B + prune_tol`; a strictly positive tolerance
    /// keeps floating-point noise from pruning an optimal branch.
    pub prune_tol: f64,
    pub workers: usize,
    pub schedule: ContinuationSchedule,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            queue: QueueDiscipline::Lifo,
            branch_rule: BranchRule::MostFractional,
            prune_tol: 1e-9,
            workers: 1,
            schedule: ContinuationSchedule::default(),
        }
    }
}

/// Best integer-feasible solution found so far.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub objective: f64,
    pub delta: Vec<f64>,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kkt_residual: f64,
}

/// Outcome recorded for one processed node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeOutcome {
    Optimal,
    Infeasible,
    IntegerInfeasible,
    SingularPoint,
    Diverged,
}

/// One line of the node log.
#[derive(Debug, Clone, Serialize)]
pub struct NodeRecord {
    pub node_id: u64,
    pub parent_id: Option<u64>,
    pub depth: usize,
    /// Assignment mask, one of `0`, `1`, `*` per binary.
    pub mask: String,
    pub outcome: NodeOutcome,
    /// Relaxation value `C(n)`; `+inf` for infeasible nodes, NaN when the
    /// solve failed.
    pub value: f64,
    pub pruned: bool,
}

/// Writes the node log as CSV with a header row.
pub fn write_node_log_csv<W: std::io::Write>(log: &[NodeRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "node_id,parent_id,depth,assignment,status,c_value,pruned")?;
    for r in log {
        let parent = r
            .parent_id
            .map(|p| p.to_string())
            .unwrap_or_else(String::new);
        writeln!(
            w,
            "{},{},{},{},{:?},{},{}",
            r.node_id, parent, r.depth, r.mask, r.outcome, r.value, r.pruned
        )?;
    }
    Ok(())
}

/// Splits a node on a free binary: two children, the entry fixed to 0 and
/// to 1, everything else copied.
pub fn branch(
    node: &NodeAssignment,
    index: usize,
) -> Result<(NodeAssignment, NodeAssignment), SolveError> {
    if index >= node.len() || node.state(index) != crate::problem::BinState::Free {
        return Err(SolveError::Contract(format!(
            "branch index {index} is not a free binary in {}",
            node.mask()
        )));
    }
    Ok((node.with_fixed(index, false), node.with_fixed(index, true)))
}

struct WorkItem {
    id: u64,
    parent: Option<u64>,
    depth: usize,
    node: NodeAssignment,
    /// Parent relaxation value, the best-bound priority. `-inf` at the root
    /// and under failed parents.
    bound: f64,
}

struct HeapEntry(WorkItem);

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.bound == other.0.bound && self.0.id == other.0.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert so the smallest bound pops first,
        // ties resolved by insertion id for determinism.
        other
            .0
            .bound
            .partial_cmp(&self.0.bound)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

enum NodeQueue {
    Deque(VecDeque<WorkItem>),
    Heap(BinaryHeap<HeapEntry>),
}

impl NodeQueue {
    fn new(discipline: QueueDiscipline) -> Self {
        match discipline {
            QueueDiscipline::Lifo | QueueDiscipline::Fifo => Self::Deque(VecDeque::new()),
            QueueDiscipline::BestBound => Self::Heap(BinaryHeap::new()),
        }
    }
    fn push(&mut self, item: WorkItem) {
        match self {
            Self::Deque(d) => d.push_back(item),
            Self::Heap(h) => h.push(HeapEntry(item)),
        }
    }
    fn pop(&mut self, discipline: QueueDiscipline) -> Option<WorkItem> {
        match self {
            Self::Deque(d) => match discipline {
                QueueDiscipline::Lifo => d.pop_back(),
                QueueDiscipline::Fifo => d.pop_front(),
                QueueDiscipline::BestBound => unreachable!(),
            },
            Self::Heap(h) => h.pop().map(|e| e.0),
        }
    }
    fn is_empty(&self) -> bool {
        match self {
            Self::Deque(d) => d.is_empty(),
            Self::Heap(h) => h.is_empty(),
        }
    }
}

struct SearchState {
    queue: NodeQueue,
    active: usize,
    next_id: u64,
    incumbent: Option<Incumbent>,
    bound_b: f64,
    visited: usize,
    failed: usize,
    root_bound: Option<f64>,
    counts: IterationCounts,
    log: Vec<NodeRecord>,
}

struct Search {
    state: Mutex<SearchState>,
    ready: Condvar,
}

fn run_worker(problem: &Arc<ParametricMinlp>, config: &BnbConfig, search: &Search) {
    loop {
        let item = {
            let mut st = search.state.lock().unwrap();
            loop {
                if let Some(item) = st.queue.pop(config.queue) {
                    st.active += 1;
                    break item;
                }
                if st.active == 0 {
                    search.ready.notify_all();
                    return;
                }
                st = search.ready.wait(st).unwrap();
            }
        };

        let is_leaf = item.node.is_leaf();
        let int_feasible = check_integer_feasible(problem, &item.node);
        let report = if int_feasible == IntFeasibility::Infeasible {
            None
        } else {
            let relaxation = relax(problem, &item.node);
            Some(solve_relaxation(&relaxation, &config.schedule))
        };

        let mut st = search.state.lock().unwrap();
        st.visited += 1;
        let mut pushed = false;

        let (outcome, value, pruned) = match &report {
            None => {
                // every extension violates the same integer row, so cutting
                // the subtree is sound
                (NodeOutcome::IntegerInfeasible, f64::INFINITY, !is_leaf)
            }
            Some(rep) => {
                st.counts.phase1_newton += rep.counts.phase1_newton;
                st.counts.zero_newton += rep.counts.zero_newton;
                st.counts.path_steps += rep.counts.path_steps;
                st.counts.path_newton += rep.counts.path_newton;
                st.counts.mu_newton += rep.counts.mu_newton;
                match rep.status {
                    SolveStatus::Optimal => {
                        let c = rep.objective;
                        if item.id == 0 {
                            st.root_bound = Some(c);
                        }
                        if is_leaf {
                            if c < st.bound_b {
                                st.bound_b = c;
                                st.incumbent = Some(Incumbent {
                                    objective: c,
                                    delta: rep.delta.clone(),
                                    x: rep.x.clone(),
                                    lambda: rep.lambda.clone(),
                                    kkt_residual: rep.kkt_residual,
                                });
                            }
                            (NodeOutcome::Optimal, c, false)
                        } else if c > st.bound_b + config.prune_tol {
                            (NodeOutcome::Optimal, c, true)
                        } else {
                            let index = pick_branch_index(&item.node, rep, config.branch_rule);
                            let (zero, one) = branch(&item.node, index).expect("free index");
                            for child in [zero, one] {
                                let id = st.next_id;
                                st.next_id += 1;
                                st.queue.push(WorkItem {
                                    id,
                                    parent: Some(item.id),
                                    depth: item.depth + 1,
                                    node: child,
                                    bound: c,
                                });
                            }
                            pushed = true;
                            (NodeOutcome::Optimal, c, false)
                        }
                    }
                    SolveStatus::Infeasible => {
                        // infeasible relaxation: no extension is feasible
                        (NodeOutcome::Infeasible, f64::INFINITY, !is_leaf)
                    }
                    SolveStatus::SingularPoint | SolveStatus::Diverged => {
                        st.failed += 1;
                        let outcome = if rep.status == SolveStatus::SingularPoint {
                            NodeOutcome::SingularPoint
                        } else {
                            NodeOutcome::Diverged
                        };
                        if is_leaf {
                            // unknown value: never accept as incumbent
                            (outcome, f64::NAN, false)
                        } else {
                            // unknown bound: never prune, keep exploring
                            let index =
                                pick_branch_index(&item.node, rep, BranchRule::LowestIndex);
                            let (zero, one) = branch(&item.node, index).expect("free index");
                            for child in [zero, one] {
                                let id = st.next_id;
                                st.next_id += 1;
                                st.queue.push(WorkItem {
                                    id,
                                    parent: Some(item.id),
                                    depth: item.depth + 1,
                                    node: child,
                                    bound: f64::NEG_INFINITY,
                                });
                            }
                            pushed = true;
                            (outcome, f64::NAN, false)
                        }
                    }
                }
            }
        };

        st.log.push(NodeRecord {
            node_id: item.id,
            parent_id: item.parent,
            depth: item.depth,
            mask: item.node.mask(),
            outcome,
            value,
            pruned,
        });

        st.active -= 1;
        if pushed || (st.active == 0 && st.queue.is_empty()) {
            search.ready.notify_all();
        }
    }
}

fn pick_branch_index(node: &NodeAssignment, report: &SolveReport, rule: BranchRule) -> usize {
    let free: Vec<usize> = node.free_indices().collect();
    debug_assert!(!free.is_empty());
    match rule {
        BranchRule::LowestIndex => free[0],
        BranchRule::MostFractional => {
            let mut best = free[0];
            let mut best_frac = -1.0f64;
            for &i in &free {
                let v = report.delta[i];
                let frac = if v.is_finite() { v.min(1.0 - v) } else { -1.0 };
                if frac > best_frac {
                    best_frac = frac;
                    best = i;
                }
            }
            best
        }
    }
}

/// Runs branch-and-bound and returns the incumbent report.
///
/// Implements the plain loop: incumbent `B` starts at `+inf`, the root has
/// every binary free, leaves update the incumbent when strictly better,
/// interior nodes are evaluated and either pruned or branched. Returns
/// [`SolveError::NoSolution`] when every leaf is infeasible.
pub fn solve_bnb(
    problem: &Arc<ParametricMinlp>,
    config: &BnbConfig,
) -> Result<SolveReport, SolveError> {
    solve_bnb_logged(problem, config).map(|(report, _)| report)
}

/// As [`solve_bnb`], also returning the per-node log.
pub fn solve_bnb_logged(
    problem: &Arc<ParametricMinlp>,
    config: &BnbConfig,
) -> Result<(SolveReport, Vec<NodeRecord>), SolveError> {
    config.schedule.validate()?;
    if config.workers == 0 {
        return Err(SolveError::Config("worker count must be at least 1".into()));
    }

    let mut queue = NodeQueue::new(config.queue);
    queue.push(WorkItem {
        id: 0,
        parent: None,
        depth: 0,
        node: NodeAssignment::root(problem.n_bin()),
        bound: f64::NEG_INFINITY,
    });
    let search = Search {
        state: Mutex::new(SearchState {
            queue,
            active: 0,
            next_id: 1,
            incumbent: None,
            bound_b: f64::INFINITY,
            visited: 0,
            failed: 0,
            root_bound: None,
            counts: IterationCounts::default(),
            log: Vec::new(),
        }),
        ready: Condvar::new(),
    };

    if config.workers == 1 {
        run_worker(problem, config, &search);
    } else {
        std::thread::scope(|scope| {
            for _ in 0..config.workers {
                scope.spawn(|| run_worker(problem, config, &search));
            }
        });
    }

    let state = search.state.into_inner().unwrap();
    let incumbent = state.incumbent.ok_or(SolveError::NoSolution)?;
    let report = SolveReport {
        status: SolveStatus::Optimal,
        objective: incumbent.objective,
        x: incumbent.x,
        delta: incumbent.delta,
        lambda: incumbent.lambda,
        kkt_residual: incumbent.kkt_residual,
        counts: state.counts,
        visited_nodes: state.visited,
        failed_nodes: state.failed,
        root_bound: state.root_bound,
    };
    Ok((report, state.log))
}

/// One row of the exhaustive leaf table.
#[derive(Debug, Clone, Serialize)]
pub struct LeafEntry {
    /// Bit string, character `i` is the value of binary `i`.
    pub mask: String,
    pub outcome: NodeOutcome,
    pub objective: f64,
}

const ENUMERATION_GUARD: usize = 20;

/// Solves every one of the `2^n_bin` leaf relaxations (skipping
/// integer-infeasible assignments) and returns the best report together
/// with the full leaf table. Guarded to at most 2^20 leaves.
pub fn enumerate_exhaustive(
    problem: &Arc<ParametricMinlp>,
    schedule: &ContinuationSchedule,
) -> Result<(SolveReport, Vec<LeafEntry>), SolveError> {
    schedule.validate()?;
    let n_bin = problem.n_bin();
    if n_bin > ENUMERATION_GUARD {
        return Err(SolveError::Guard(format!(
            "{n_bin} binaries exceed the enumeration guard of {ENUMERATION_GUARD}"
        )));
    }

    let mut table = Vec::with_capacity(1usize << n_bin);
    let mut best: Option<SolveReport> = None;
    let mut solves = 0usize;
    let mut counts = IterationCounts::default();
    let mut failed = 0usize;

    for mask in 0..(1u64 << n_bin) {
        let node = NodeAssignment::leaf_from_bits(n_bin, mask);
        if check_integer_feasible(problem, &node) == IntFeasibility::Infeasible {
            table.push(LeafEntry {
                mask: node.mask(),
                outcome: NodeOutcome::IntegerInfeasible,
                objective: f64::INFINITY,
            });
            continue;
        }
        let relaxation = relax(problem, &node);
        let report = solve_relaxation(&relaxation, schedule);
        solves += 1;
        counts.phase1_newton += report.counts.phase1_newton;
        counts.zero_newton += report.counts.zero_newton;
        counts.path_steps += report.counts.path_steps;
        counts.path_newton += report.counts.path_newton;
        counts.mu_newton += report.counts.mu_newton;
        let (outcome, objective) = match report.status {
            SolveStatus::Optimal => (NodeOutcome::Optimal, report.objective),
            SolveStatus::Infeasible => (NodeOutcome::Infeasible, f64::INFINITY),
            SolveStatus::SingularPoint => {
                failed += 1;
                (NodeOutcome::SingularPoint, f64::NAN)
            }
            SolveStatus::Diverged => {
                failed += 1;
                (NodeOutcome::Diverged, f64::NAN)
            }
        };
        table.push(LeafEntry {
            mask: node.mask(),
            outcome,
            objective,
        });
        if report.status == SolveStatus::Optimal {
            let better = match &best {
                None => true,
                Some(b) => report.objective < b.objective,
            };
            if better {
                best = Some(report);
            }
        }
    }

    let mut report = best.ok_or(SolveError::NoSolution)?;
    report.visited_nodes = solves;
    report.counts = counts;
    report.failed_nodes = failed;
    Ok((report, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BinState, ProblemFunctions, Sense, Triplet};

    #[test]
    fn branch_splits_a_free_entry() {
        let node = NodeAssignment::root(2);
        let (zero, one) = branch(&node, 0).unwrap();
        assert_eq!(zero.state(0), BinState::Fixed(false));
        assert_eq!(one.state(0), BinState::Fixed(true));
        assert_eq!(zero.state(1), BinState::Free);
        assert_eq!(one.state(1), BinState::Free);
    }

    #[test]
    fn branch_preserves_existing_fixings() {
        let node = NodeAssignment::root(2).with_fixed(0, true);
        let (zero, one) = branch(&node, 1).unwrap();
        assert_eq!(zero.mask(), "10");
        assert_eq!(one.mask(), "11");
    }

    #[test]
    fn branch_on_fixed_entry_is_a_contract_violation() {
        let node = NodeAssignment::root(2).with_fixed(0, true);
        assert!(matches!(
            branch(&node, 0),
            Err(SolveError::Contract(_))
        ));
    }

    struct BinCost;
    impl ProblemFunctions for BinCost {
        // min x0^2 + sum_i (2 - i) * d_i  -- prefers d = (0, 1) under
        // d0 + d1 = 1
        fn objective(&self, x: &[f64], d: &[f64], _t: f64) -> f64 {
            x[0] * x[0] + 2.0 * d[0] + 1.0 * d[1]
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * x[0], 2.0, 1.0]
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

    fn bin_cost_problem() -> Arc<ParametricMinlp> {
        Arc::new(
            ParametricMinlp::new(
                1,
                2,
                0,
                vec![-1.0],
                vec![1.0],
                Sense::Minimize,
                BinCost,
            )
            .unwrap()
            .with_int_constraint(crate::problem::IntConstraint {
                coeffs: vec![1.0, 1.0],
                rhs: 1.0,
            })
            .unwrap(),
        )
    }

    #[test]
    fn bnb_respects_integer_constraints() {
        let p = bin_cost_problem();
        let report = solve_bnb(&p, &BnbConfig::default()).unwrap();
        assert_eq!(report.delta_bitstring(), "01");
        assert!((report.objective - 1.0).abs() < 1e-6, "{}", report.objective);
        assert!(report.visited_nodes <= 7);
    }

    #[test]
    fn enumerate_matches_bnb_and_counts_leaves() {
        let p = bin_cost_problem();
        let (rep, table) = enumerate_exhaustive(&p, &ContinuationSchedule::default()).unwrap();
        assert_eq!(table.len(), 4);
        // the two assignments violating d0 + d1 = 1 are skipped unsolved
        let skipped = table
            .iter()
            .filter(|e| e.outcome == NodeOutcome::IntegerInfeasible)
            .count();
        assert_eq!(skipped, 2);
        assert_eq!(rep.visited_nodes, 2);
        let bnb = solve_bnb(&p, &BnbConfig::default()).unwrap();
        assert_eq!(rep.delta_bitstring(), bnb.delta_bitstring());
        assert!((rep.objective - bnb.objective).abs() < 1e-9);
    }

    #[test]
    fn all_leaves_infeasible_is_no_solution() {
        let p = Arc::new(
            ParametricMinlp::new(1, 1, 0, vec![-1.0], vec![1.0], Sense::Minimize, BinCost2)
                .unwrap()
                .with_int_constraint(crate::problem::IntConstraint {
                    coeffs: vec![2.0],
                    rhs: 1.0,
                })
                .unwrap(),
        );
        assert!(matches!(
            solve_bnb(&p, &BnbConfig::default()),
            Err(SolveError::NoSolution)
        ));
        assert!(matches!(
            enumerate_exhaustive(&p, &ContinuationSchedule::default()),
            Err(SolveError::NoSolution)
        ));
    }

    struct BinCost2;
    impl ProblemFunctions for BinCost2 {
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

    #[test]
    fn guard_rejects_oversized_enumeration() {
        let p = Arc::new(
            ParametricMinlp::new(
                1,
                21,
                0,
                vec![-1.0],
                vec![1.0],
                Sense::Minimize,
                BinCost2,
            )
            .unwrap(),
        );
        assert!(matches!(
            enumerate_exhaustive(&p, &ContinuationSchedule::default()),
            Err(SolveError::Guard(_))
        ));
    }

    #[test]
    fn incumbent_updates_are_monotone() {
        let p = bin_cost_problem();
        let (_, log) = solve_bnb_logged(&p, &BnbConfig::default()).unwrap();
        let mut best = f64::INFINITY;
        for rec in &log {
            if rec.mask.chars().all(|c| c != '*') && rec.outcome == NodeOutcome::Optimal {
                // leaf values drive B down only
                if rec.value < best {
                    best = rec.value;
                }
            }
        }
        assert!(best < f64::INFINITY);
    }

    #[test]
    fn node_log_csv_shape() {
        let p = bin_cost_problem();
        let (_, log) = solve_bnb_logged(&p, &BnbConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_node_log_csv(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("node_id,parent_id,depth,assignment,status,c_value,pruned"));
        assert_eq!(text.lines().count(), log.len() + 1);
    }
}
