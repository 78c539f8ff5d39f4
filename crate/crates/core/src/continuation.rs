//! Homotopy continuation: from the convex zero problem to `theta = 1`,
//! then barrier reduction.
//!
//! The pipeline for one relaxation is
//!
//! 1. [`solve_zero_problem`]: a phase-one search for an interior point with
//!    small constraint violation at `theta = 0` (the constraints there are
//!    linear for the problem class this solver targets), followed by a
//!    Newton solve of the barrier KKT system at `(theta = 0, mu_0)`;
//! 2. [`trace_path`]: predictor-corrector advance of `theta` at fixed
//!    `mu_0` — the predictor holds `(x, lambda)`, the corrector is a plain
//!    Newton solve, the step doubles on success and halves on failure;
//! 3. barrier reduction at `theta = 1`: `mu <- max(sigma mu, mu_min)`
//!    with a Newton re-solve per stage, terminating at `mu = mu_min`.
//!
//! `theta` and `mu` are deliberately not moved at the same time; any
//! rectangular path through `(theta, mu)` space is valid for a path-stable
//! problem, and separating the phases keeps step control one-dimensional.

use serde::{Deserialize, Serialize};

use crate::barrier::{kkt_residual, newton_solve, BarrierIterate, NewtonOptions};
use crate::error::SolveError;
use crate::linalg::KktSolver;
use crate::problem::Relaxation;
use crate::report::{IterationCounts, SolveReport, SolveStatus};

/// Step-control parameters for the continuation pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    /// Barrier parameter during path tracing.
    pub mu0: f64,
    /// Barrier floor; the final solve happens at exactly this value.
    pub mu_min: f64,
    /// Barrier reduction factor in `(0, 1)`.
    pub sigma: f64,
    /// Initial (and maximum) `theta` step.
    pub dtheta0: f64,
    /// Step underflow bound: below this the trace gives up.
    pub dtheta_min: f64,
    /// Step growth factor after an accepted step.
    pub growth: f64,
    /// Step shrink factor after a rejected step.
    pub shrink: f64,
    /// Newton controls shared by every phase.
    pub newton: NewtonOptions,
    /// Constraint-violation threshold for phase-one acceptance.
    pub phase1_tol: f64,
}

/// Terminal phase-one violations above this bound prove infeasibility;
/// smaller nonzero ones are treated as singular geometry.
const INFEASIBLE_VIOLATION: f64 = 1e-4;

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            mu0: 1e-2,
            mu_min: 1e-9,
            sigma: 0.2,
            dtheta0: 0.1,
            dtheta_min: 1e-6,
            growth: 2.0,
            shrink: 0.5,
            newton: NewtonOptions::default(),
            phase1_tol: 1e-8,
        }
    }
}

impl ContinuationSchedule {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(0.0 < self.mu_min && self.mu_min < self.mu0) {
            return Err(SolveError::Config(format!(
                "need 0 < mu_min < mu0, got mu_min = {}, mu0 = {}",
                self.mu_min, self.mu0
            )));
        }
        if !(0.0 < self.sigma && self.sigma < 1.0) {
            return Err(SolveError::Config(format!("sigma must be in (0,1), got {}", self.sigma)));
        }
        if !(0.0 < self.dtheta_min && self.dtheta_min <= self.dtheta0 && self.dtheta0 <= 1.0) {
            return Err(SolveError::Config(format!(
                "need 0 < dtheta_min <= dtheta0 <= 1, got {} and {}",
                self.dtheta_min, self.dtheta0
            )));
        }
        Ok(())
    }
}

/// One accepted stage of the pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PathRecord {
    pub step: usize,
    pub theta: f64,
    pub mu: f64,
    pub objective: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
}

/// Ordered records of accepted stages: `theta` is non-decreasing, and `mu`
/// is non-increasing within fixed `theta`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PathTrace {
    pub records: Vec<PathRecord>,
}

impl PathTrace {
    fn push(&mut self, theta: f64, mu: f64, objective: f64, residual_norm: f64, iters: usize) {
        self.records.push(PathRecord {
            step: self.records.len(),
            theta,
            mu,
            objective,
            residual_norm,
            newton_iters: iters,
        });
    }

    /// Writes the trace as CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,theta,mu,objective,residual_norm,newton_iters")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.step, r.theta, r.mu, r.objective, r.residual_norm, r.newton_iters
            )?;
        }
        Ok(())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Interior starting point: box midpoint where both bounds are finite,
/// unit offset from a single finite bound, zero when unbounded.
fn interior_start(relax: &Relaxation) -> Vec<f64> {
    relax
        .lower()
        .iter()
        .zip(relax.upper().iter())
        .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
            (true, true) => 0.5 * (l + u),
            (true, false) => l + 1.0,
            (false, true) => u - 1.0,
            (false, false) => 0.0,
        })
        .collect()
}

/// Phase one: Gauss-Newton on `0.5 ||c(z, 0)||^2` plus a vanishing barrier
/// weight, from the box midpoint. Instead of forming the normal equations
/// the step solves the augmented system
///
/// ```text
///     [ I   A    ] [ u  ]   [ -c      ]
///     [ A'  -v D ] [ dz ] = [ -v b(z) ]
/// ```
///
/// which keeps the conditioning of `A` rather than `A'A`. Returns the
/// interior point and the iteration count, or the terminal violation.
fn phase_one(
    relax: &Relaxation,
    schedule: &ContinuationSchedule,
    solver: &mut KktSolver,
) -> Result<(Vec<f64>, usize), (f64, usize)> {
    let n = relax.n_vars();
    let l = relax.n_constraints();
    let mut z = interior_start(relax);
    let mut iters = 0usize;
    if l == 0 {
        return Ok((z, iters));
    }

    let (lo, up) = (relax.lower(), relax.upper());
    let mut best_violation = inf_norm(&relax.constraints(&z, 0.0));
    let mut nu = schedule.mu0;
    while nu >= 1e-12 {
        let mut round_prev = f64::INFINITY;
        for _ in 0..30 {
            let c = relax.constraints(&z, 0.0);
            let violation = inf_norm(&c);
            best_violation = best_violation.min(violation);
            if violation <= 0.01 * schedule.phase1_tol {
                return Ok((z, iters));
            }
            // feasibility has stagnated at this barrier weight; move on
            if violation > 0.9 * round_prev {
                break;
            }
            round_prev = violation;

            let mut trips = relax.jacobian(&z, 0.0);
            // augmented layout: residual block first, then dz block
            let mut sys: Vec<(usize, usize, f64)> =
                (0..l).map(|i| (i, i, 1.0)).collect();
            for &(r, cidx, v) in &trips {
                sys.push((r, l + cidx, v));
                sys.push((l + cidx, r, v));
            }
            trips.clear();
            let mut rhs = vec![0.0; l + n];
            for i in 0..l {
                rhs[i] = -c[i];
            }
            for i in 0..n {
                let mut b = 0.0;
                let mut d = 0.0;
                if lo[i].is_finite() {
                    b += 1.0 / (z[i] - lo[i]);
                    d += 1.0 / ((z[i] - lo[i]) * (z[i] - lo[i]));
                }
                if up[i].is_finite() {
                    b -= 1.0 / (up[i] - z[i]);
                    d += 1.0 / ((up[i] - z[i]) * (up[i] - z[i]));
                }
                rhs[l + i] = -nu * b;
                // tiny ridge keeps the block invertible for variables that
                // are unbounded and absent from the constraints
                sys.push((l + i, l + i, -nu * d - 1e-12));
            }
            let step = match solver.solve(l + n, &sys, &rhs) {
                Ok(s) => s,
                Err(_) => return Err((best_violation, iters)),
            };
            let dz = &step[l..];
            let alpha = crate::barrier::fraction_to_boundary(relax, &z, dz, 0.995);
            let mut moved = 0.0f64;
            for i in 0..n {
                z[i] += alpha * dz[i];
                moved = moved.max((alpha * dz[i]).abs());
            }
            iters += 1;
            if moved <= 1e-14 * (1.0 + inf_norm(&z)) {
                break;
            }
        }
        let violation = inf_norm(&relax.constraints(&z, 0.0));
        if violation <= schedule.phase1_tol {
            return Ok((z, iters));
        }
        nu *= 1e-2;
    }
    let violation = inf_norm(&relax.constraints(&z, 0.0));
    if violation <= schedule.phase1_tol {
        Ok((z, iters))
    } else {
        Err((violation, iters))
    }
}

/// One accepted stage of a barrier descent.
struct MuStage {
    mu: f64,
    objective: f64,
    iterations: usize,
    residual_norm: f64,
}

/// Descends the barrier parameter from `start.mu` to `target` with warm
/// starts, shrinking the reduction geometrically (toward no reduction)
/// when a stage diverges and recovering toward `base_factor` on success.
fn mu_descend(
    relax: &Relaxation,
    start: &BarrierIterate,
    target: f64,
    base_factor: f64,
    newton: &NewtonOptions,
    solver: &mut KktSolver,
) -> Result<(BarrierIterate, Vec<MuStage>), SolveError> {
    let mut it = start.clone();
    let mut factor = base_factor;
    let mut stages = Vec::new();
    while it.mu > target {
        let mu_next = (it.mu * factor).max(target);
        let predictor = BarrierIterate::new(it.x.clone(), it.lambda.clone(), mu_next, it.theta);
        match newton_solve(relax, &predictor, newton, solver) {
            Ok(out) => {
                it = out.iterate;
                stages.push(MuStage {
                    mu: it.mu,
                    objective: relax.objective(&it.x, it.theta),
                    iterations: out.iterations,
                    residual_norm: out.residual_norm,
                });
                factor = (factor * factor).max(base_factor);
            }
            Err(e @ (SolveError::Diverged { .. } | SolveError::SingularPoint { .. })) => {
                factor = factor.sqrt();
                if factor > 0.98 {
                    return Err(e);
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok((it, stages))
}

/// Barrier value the cold start descends from: large enough that the
/// analytic-center term dominates and plain Newton is reliable.
const MU_COLD_START: f64 = 1e3;

/// Solves the zero problem `(theta = 0, mu_0)` from a phase-one interior
/// start: an analytic-center-flavored descent takes `mu` from a large
/// cold-start value down to `mu_0` with zero multipliers at the first
/// stage.
pub fn solve_zero_problem(
    relax: &Relaxation,
    schedule: &ContinuationSchedule,
) -> Result<(BarrierIterate, IterationCounts), SolveError> {
    schedule.validate()?;
    let mut solver = KktSolver::new();
    solve_zero_problem_with(relax, schedule, &mut solver)
}

fn solve_zero_problem_with(
    relax: &Relaxation,
    schedule: &ContinuationSchedule,
    solver: &mut KktSolver,
) -> Result<(BarrierIterate, IterationCounts), SolveError> {
    let mut counts = IterationCounts::default();
    let (z, phase1_iters) = match phase_one(relax, schedule, solver) {
        Ok(pair) => pair,
        Err((violation, _iters)) => return Err(SolveError::Infeasible { violation }),
    };
    counts.phase1_newton = phase1_iters;

    let mut mu_big = schedule.mu0.max(MU_COLD_START);
    let lambda0 = vec![0.0; relax.n_constraints()];
    let first = loop {
        let start = BarrierIterate::new(z.clone(), lambda0.clone(), mu_big, 0.0);
        match newton_solve(relax, &start, &schedule.newton, solver) {
            Ok(out) => break out,
            Err(SolveError::Diverged { .. }) if mu_big < 1e9 => {
                mu_big *= 100.0;
            }
            Err(e) => return Err(e),
        }
    };
    counts.zero_newton = first.iterations;

    let (it, stages) = mu_descend(relax, &first.iterate, schedule.mu0, 0.1, &schedule.newton, solver)?;
    counts.zero_newton += stages.iter().map(|s| s.iterations).sum::<usize>();
    Ok((it, counts))
}

/// Traces the solution path from the zero-problem iterate to `theta = 1`
/// at fixed `mu_0`. Returns the endpoint iterate and the accepted-step
/// trace; step underflow raises [`SolveError::PathFailure`] carrying the
/// partial trace.
pub fn trace_path(
    relax: &Relaxation,
    start: &BarrierIterate,
    schedule: &ContinuationSchedule,
) -> Result<(BarrierIterate, PathTrace), SolveError> {
    schedule.validate()?;
    let mut solver = KktSolver::new();
    let mut counts = IterationCounts::default();
    trace_path_with(relax, start, schedule, &mut solver, &mut counts)
}

fn trace_path_with(
    relax: &Relaxation,
    start: &BarrierIterate,
    schedule: &ContinuationSchedule,
    solver: &mut KktSolver,
    counts: &mut IterationCounts,
) -> Result<(BarrierIterate, PathTrace), SolveError> {
    let mut trace = PathTrace::default();
    let mut it = start.clone();
    let mut step = schedule.dtheta0;

    while it.theta < 1.0 {
        // snap to the endpoint so float drift cannot add a vestigial step
        let theta_try = if it.theta + step >= 1.0 - 1e-12 {
            1.0
        } else {
            it.theta + step
        };
        let predictor = BarrierIterate::new(it.x.clone(), it.lambda.clone(), it.mu, theta_try);
        match newton_solve(relax, &predictor, &schedule.newton, solver) {
            Ok(out) => {
                counts.path_newton += out.iterations;
                counts.path_steps += 1;
                it = out.iterate;
                trace.push(
                    it.theta,
                    it.mu,
                    relax.objective(&it.x, it.theta),
                    out.residual_norm,
                    out.iterations,
                );
                step = (step * schedule.growth).min(schedule.dtheta0);
            }
            Err(SolveError::Diverged { iterations, .. }) => {
                counts.path_newton += iterations;
                step *= schedule.shrink;
                if step < schedule.dtheta_min {
                    return Err(SolveError::PathFailure {
                        theta: it.theta,
                        trace,
                    });
                }
            }
            Err(SolveError::SingularPoint { .. }) => {
                step *= schedule.shrink;
                if step < schedule.dtheta_min {
                    return Err(SolveError::PathFailure {
                        theta: it.theta,
                        trace,
                    });
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok((it, trace))
}

/// Runs the full pipeline on one relaxation and reports the outcome. All
/// failures are encoded in the report status: infeasibility maps to
/// `Infeasible` with objective `+inf`, path failure to `SingularPoint`.
pub fn solve_relaxation(relax: &Relaxation, schedule: &ContinuationSchedule) -> SolveReport {
    solve_relaxation_traced(relax, schedule).0
}

/// As [`solve_relaxation`], additionally returning the accepted-stage
/// trace (the `theta` sweep followed by the `mu` reduction).
pub fn solve_relaxation_traced(
    relax: &Relaxation,
    schedule: &ContinuationSchedule,
) -> (SolveReport, PathTrace) {
    let n_cont = relax.problem().n_cont();
    let n_bin = relax.problem().n_bin();
    if let Err(e) = schedule.validate() {
        debug_assert!(false, "invalid schedule: {e}");
        return (
            SolveReport::failed(SolveStatus::Diverged, n_cont, n_bin),
            PathTrace::default(),
        );
    }

    // integer rows fully determined by the node are checked up front
    if relax.fixed_int_violation() > 1e-9 {
        return (
            SolveReport::infeasible(n_cont, n_bin),
            PathTrace::default(),
        );
    }

    let mut solver = KktSolver::new();
    let mut counts = IterationCounts::default();

    let zero = match solve_zero_problem_with(relax, schedule, &mut solver) {
        Ok((it, c)) => {
            counts.phase1_newton = c.phase1_newton;
            counts.zero_newton = c.zero_newton;
            it
        }
        // A large terminal violation is a proof of infeasibility. A small
        // one is ambiguous: a feasible set touching the variable box only
        // on its boundary (no strict interior) stalls phase one at a
        // violation of roughly sqrt(barrier weight). Such nodes are
        // reported as singular so branch-and-bound explores them instead
        // of pruning a subtree that may contain feasible leaves.
        Err(SolveError::Infeasible { violation }) => {
            if violation > INFEASIBLE_VIOLATION {
                return (
                    SolveReport::infeasible(n_cont, n_bin),
                    PathTrace::default(),
                );
            }
            return (
                SolveReport::failed(SolveStatus::SingularPoint, n_cont, n_bin),
                PathTrace::default(),
            );
        }
        Err(SolveError::SingularPoint { .. }) => {
            return (
                SolveReport::failed(SolveStatus::SingularPoint, n_cont, n_bin),
                PathTrace::default(),
            );
        }
        Err(_) => {
            return (
                SolveReport::failed(SolveStatus::Diverged, n_cont, n_bin),
                PathTrace::default(),
            );
        }
    };

    let mut trace = PathTrace::default();
    trace.push(
        zero.theta,
        zero.mu,
        relax.objective(&zero.x, zero.theta),
        0.0,
        counts.zero_newton,
    );

    let (mut it, theta_trace) =
        match trace_path_with(relax, &zero, schedule, &mut solver, &mut counts) {
            Ok(pair) => pair,
            Err(SolveError::PathFailure { trace: t, .. }) => {
                for r in t.records {
                    trace.push(r.theta, r.mu, r.objective, r.residual_norm, r.newton_iters);
                }
                let mut rep = SolveReport::failed(SolveStatus::SingularPoint, n_cont, n_bin);
                rep.counts = counts;
                return (rep, trace);
            }
            Err(_) => {
                let mut rep = SolveReport::failed(SolveStatus::Diverged, n_cont, n_bin);
                rep.counts = counts;
                return (rep, trace);
            }
        };
    for r in theta_trace.records {
        trace.push(r.theta, r.mu, r.objective, r.residual_norm, r.newton_iters);
    }

    // barrier reduction at theta = 1 down to exactly mu_min
    match mu_descend(
        relax,
        &it,
        schedule.mu_min,
        schedule.sigma,
        &schedule.newton,
        &mut solver,
    ) {
        Ok((end, stages)) => {
            for s in &stages {
                counts.mu_newton += s.iterations;
                trace.push(1.0, s.mu, s.objective, s.residual_norm, s.iterations);
            }
            it = end;
        }
        Err(SolveError::SingularPoint { .. }) => {
            let mut rep = SolveReport::failed(SolveStatus::SingularPoint, n_cont, n_bin);
            rep.counts = counts;
            return (rep, trace);
        }
        Err(_) => {
            let mut rep = SolveReport::failed(SolveStatus::Diverged, n_cont, n_bin);
            rep.counts = counts;
            return (rep, trace);
        }
    }

    let residual = kkt_residual(relax, &it)
        .map(|r| inf_norm(&r))
        .unwrap_or(f64::NAN);
    let (x, delta) = relax.split(&it.x);
    let report = SolveReport {
        status: SolveStatus::Optimal,
        objective: relax.objective(&it.x, 1.0),
        x,
        delta,
        lambda: it.lambda.clone(),
        kkt_residual: residual,
        counts,
        visited_nodes: 1,
        failed_nodes: 0,
        root_bound: None,
    };
    (report, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{relax, NodeAssignment, ParametricMinlp, ProblemFunctions, Sense, Triplet};
    use std::sync::Arc;

    /// min (x - 2)^2 over [0, 10], no constraints: unique barrier
    /// stationary point.
    struct ShiftedQuadratic;
    impl ProblemFunctions for ShiftedQuadratic {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            (x[0] - 2.0) * (x[0] - 2.0)
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * (x[0] - 2.0)]
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

    fn shifted_quadratic() -> Arc<ParametricMinlp> {
        Arc::new(
            ParametricMinlp::new(
                1,
                0,
                0,
                vec![0.0],
                vec![10.0],
                Sense::Minimize,
                ShiftedQuadratic,
            )
            .unwrap(),
        )
    }

    #[test]
    fn zero_problem_solves_unconstrained_barrier() {
        let p = shifted_quadratic();
        let r = relax(&p, &NodeAssignment::root(0));
        let schedule = ContinuationSchedule::default();
        let (it, _) = solve_zero_problem(&r, &schedule).unwrap();
        // stationarity of (x-2)^2 - mu ln(x) - mu ln(10 - x)
        let res = kkt_residual(&r, &it).unwrap();
        assert!(res[0].abs() <= schedule.newton.tol);
        assert!(it.x[0] > 0.0 && it.x[0] < 10.0);
    }

    #[test]
    fn constant_path_takes_one_step_with_zero_correctors() {
        let p = shifted_quadratic();
        let r = relax(&p, &NodeAssignment::root(0));
        let schedule = ContinuationSchedule {
            dtheta0: 1.0,
            ..Default::default()
        };
        let (start, _) = solve_zero_problem(&r, &schedule).unwrap();
        let (end, trace) = trace_path(&r, &start, &schedule).unwrap();
        assert_eq!(end.theta, 1.0);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].newton_iters, 0);
        assert_eq!(trace.records[0].theta, 1.0);
    }

    #[test]
    fn theta_is_strictly_increasing_along_the_trace() {
        let p = shifted_quadratic();
        let r = relax(&p, &NodeAssignment::root(0));
        let schedule = ContinuationSchedule::default();
        let (start, _) = solve_zero_problem(&r, &schedule).unwrap();
        let (_, trace) = trace_path(&r, &start, &schedule).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].theta > w[0].theta);
        }
        assert_eq!(trace.records.last().unwrap().theta, 1.0);
    }

    #[test]
    fn pipeline_report_is_deterministic() {
        let p = shifted_quadratic();
        let r = relax(&p, &NodeAssignment::root(0));
        let schedule = ContinuationSchedule::default();
        let (rep1, trace1) = solve_relaxation_traced(&r, &schedule);
        let (rep2, trace2) = solve_relaxation_traced(&r, &schedule);
        assert_eq!(rep1.objective.to_bits(), rep2.objective.to_bits());
        assert_eq!(rep1.x[0].to_bits(), rep2.x[0].to_bits());
        assert_eq!(trace1.records.len(), trace2.records.len());
        // mu is non-increasing within theta = 1
        for w in trace1.records.windows(2) {
            if w[0].theta == 1.0 && w[1].theta == 1.0 {
                assert!(w[1].mu <= w[0].mu);
            }
        }
        assert_eq!(trace1.records.last().unwrap().mu, schedule.mu_min);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let p = shifted_quadratic();
        let r = relax(&p, &NodeAssignment::root(0));
        let schedule = ContinuationSchedule::default();
        let (_, trace) = solve_relaxation_traced(&r, &schedule);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,theta,mu,objective,residual_norm,newton_iters"
        );
        assert_eq!(lines.count(), trace.records.len());
    }
}
