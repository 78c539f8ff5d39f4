//! Newton's method on the barrier KKT system at fixed `(theta, mu)`.
//!
//! The barrier problem replaces the box `l <= z <= u` with logarithmic
//! terms `-mu * (ln(z - l) + ln(u - z))` per finite bound, so a solution of
//! the barrier problem is a root of the residual
//!
//! ```text
//!     F_mu(z, lambda; theta) = [ grad f + J_c' lambda - mu * b(z) ]
//!                              [ c(z, theta)                      ]
//! ```
//!
//! with `b_i = 1/(z_i - l_i) - 1/(u_i - z_i)`. Iterates stay strictly
//! interior through a fraction-to-the-boundary cap; there is no line
//! search, the continuation driver supplies starting points close enough
//! for plain Newton steps.

use crate::error::SolveError;
use crate::linalg::KktSolver;
use crate::problem::{Relaxation, Triplet};

/// One interior-point iterate: primal variables of the relaxation (the
/// continuous variables followed by the free binaries), equality
/// multipliers, and the two scalar parameters.
#[derive(Debug, Clone)]
pub struct BarrierIterate {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub theta: f64,
}

impl BarrierIterate {
    pub fn new(x: Vec<f64>, lambda: Vec<f64>, mu: f64, theta: f64) -> Self {
        debug_assert!(mu > 0.0);
        debug_assert!((0.0..=1.0).contains(&theta));
        Self {
            x,
            lambda,
            mu,
            theta,
        }
    }
}

/// Residual and Jacobian of the KKT system at one iterate.
pub struct KktSystem {
    /// Stationarity rows followed by feasibility rows, length `n + l`.
    pub residual: Vec<f64>,
    /// Jacobian of the residual with respect to `(z, lambda)`, COO.
    pub jacobian: Vec<Triplet>,
    pub dim: usize,
}

/// Newton controls.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on the residual infinity norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction-to-the-boundary parameter.
    pub ftb: f64,
    /// Divergence is declared when the residual exceeds this factor times
    /// the best residual seen.
    pub safeguard: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            ftb: 0.995,
            safeguard: 1e4,
        }
    }
}

fn check_interior(relax: &Relaxation, z: &[f64]) -> Result<(), SolveError> {
    let (l, u) = (relax.lower(), relax.upper());
    for i in 0..z.len() {
        if (l[i].is_finite() && z[i] <= l[i]) || (u[i].is_finite() && z[i] >= u[i]) {
            return Err(SolveError::Domain(format!(
                "variable {i} = {} not strictly inside ({}, {})",
                z[i], l[i], u[i]
            )));
        }
    }
    Ok(())
}

/// Gradient of the barrier terms: `b_i = 1/(z_i - l_i) - 1/(u_i - z_i)`,
/// with infinite bounds contributing nothing.
fn barrier_gradient(relax: &Relaxation, z: &[f64]) -> Vec<f64> {
    let (l, u) = (relax.lower(), relax.upper());
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            let mut b = 0.0;
            if l[i].is_finite() {
                b += 1.0 / (zi - l[i]);
            }
            if u[i].is_finite() {
                b -= 1.0 / (u[i] - zi);
            }
            b
        })
        .collect()
}

fn barrier_curvature(relax: &Relaxation, z: &[f64]) -> Vec<f64> {
    let (l, u) = (relax.lower(), relax.upper());
    z.iter()
        .enumerate()
        .map(|(i, &zi)| {
            let mut d = 0.0;
            if l[i].is_finite() {
                d += 1.0 / ((zi - l[i]) * (zi - l[i]));
            }
            if u[i].is_finite() {
                d += 1.0 / ((u[i] - zi) * (u[i] - zi));
            }
            d
        })
        .collect()
}

/// KKT residual `F_mu` at `iterate`: stationarity over feasibility.
pub fn kkt_residual(relax: &Relaxation, iterate: &BarrierIterate) -> Result<Vec<f64>, SolveError> {
    check_interior(relax, &iterate.x)?;
    let n = relax.n_vars();
    let l = relax.n_constraints();
    debug_assert_eq!(iterate.x.len(), n);
    debug_assert_eq!(iterate.lambda.len(), l);

    let mut res = vec![0.0; n + l];
    let grad = relax.gradient(&iterate.x, iterate.theta);
    let bg = barrier_gradient(relax, &iterate.x);
    for i in 0..n {
        res[i] = grad[i] - iterate.mu * bg[i];
    }
    for (r, c, v) in relax.jacobian(&iterate.x, iterate.theta) {
        res[c] += v * iterate.lambda[r];
    }
    let cons = relax.constraints(&iterate.x, iterate.theta);
    res[n..].copy_from_slice(&cons);
    Ok(res)
}

/// Jacobian of the KKT residual with respect to `(z, lambda)`:
///
/// ```text
///     [ H + mu D   J' ]
///     [ J          0  ]
/// ```
///
/// with `H` the Hessian of the Lagrangian in `z` and `D` the barrier
/// curvature diagonal `1/(z - l)^2 + 1/(u - z)^2`.
pub fn kkt_jacobian(relax: &Relaxation, iterate: &BarrierIterate) -> Result<Vec<Triplet>, SolveError> {
    check_interior(relax, &iterate.x)?;
    let n = relax.n_vars();
    let mut trips = relax.lagrangian_hessian(&iterate.x, iterate.theta, &iterate.lambda);
    let curv = barrier_curvature(relax, &iterate.x);
    for (i, &d) in curv.iter().enumerate() {
        if d != 0.0 {
            trips.push((i, i, iterate.mu * d));
        }
    }
    for (r, c, v) in relax.jacobian(&iterate.x, iterate.theta) {
        trips.push((n + r, c, v));
        trips.push((c, n + r, v));
    }
    Ok(trips)
}

/// Residual and Jacobian together.
pub fn kkt_system(relax: &Relaxation, iterate: &BarrierIterate) -> Result<KktSystem, SolveError> {
    Ok(KktSystem {
        residual: kkt_residual(relax, iterate)?,
        jacobian: kkt_jacobian(relax, iterate)?,
        dim: relax.n_vars() + relax.n_constraints(),
    })
}

/// Largest step fraction in `(0, 1]` keeping `z + alpha dz` at least the
/// fraction `1 - ftb` away from each finite bound, relative to the current
/// distance.
pub(crate) fn fraction_to_boundary(relax: &Relaxation, z: &[f64], dz: &[f64], ftb: f64) -> f64 {
    let (l, u) = (relax.lower(), relax.upper());
    let mut alpha: f64 = 1.0;
    for i in 0..z.len() {
        if dz[i] < 0.0 && l[i].is_finite() {
            alpha = alpha.min(ftb * (z[i] - l[i]) / -dz[i]);
        }
        if dz[i] > 0.0 && u[i].is_finite() {
            alpha = alpha.min(ftb * (u[i] - z[i]) / dz[i]);
        }
    }
    alpha
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Result of a Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub iterate: BarrierIterate,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solves `F_mu = 0` at the iterate's fixed `(theta, mu)` by Newton steps
/// with a fraction-to-the-boundary cap.
pub fn newton_solve(
    relax: &Relaxation,
    start: &BarrierIterate,
    opts: &NewtonOptions,
    solver: &mut KktSolver,
) -> Result<NewtonOutcome, SolveError> {
    let n = relax.n_vars();
    let dim = n + relax.n_constraints();
    let mut it = start.clone();

    let mut res = kkt_residual(relax, &it)?;
    let mut norm = inf_norm(&res);
    if norm <= opts.tol {
        return Ok(NewtonOutcome {
            iterate: it,
            iterations: 0,
            residual_norm: norm,
        });
    }
    // divergence is judged against the starting residual: transient
    // residual growth is normal for plain Newton steps near stiff regions,
    // and max_iter bounds the work either way
    let reference = norm.max(opts.tol);

    for k in 1..=opts.max_iter {
        let jac = kkt_jacobian(relax, &it)?;
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let step = solver.solve(dim, &jac, &rhs)?;

        // the safeguard retries the same direction at reduced length a few
        // times before giving up: overshooting into a barrier wall spikes
        // the residual even when a shorter step is perfectly good
        let mut alpha = fraction_to_boundary(relax, &it.x, &step[..n], opts.ftb);
        let mut accepted = false;
        for _attempt in 0..6 {
            let mut trial = it.clone();
            for i in 0..n {
                trial.x[i] += alpha * step[i];
            }
            for (i, lam) in trial.lambda.iter_mut().enumerate() {
                *lam += alpha * step[n + i];
            }
            let trial_res = kkt_residual(relax, &trial)?;
            let trial_norm = inf_norm(&trial_res);
            if trial_norm.is_finite() && trial_norm <= opts.safeguard * reference {
                it = trial;
                res = trial_res;
                norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.25;
        }
        if !accepted {
            return Err(SolveError::Diverged {
                iterations: k,
                residual: norm,
            });
        }
        if norm <= opts.tol {
            return Ok(NewtonOutcome {
                iterate: it,
                iterations: k,
                residual_norm: norm,
            });
        }
    }
    Err(SolveError::Diverged {
        iterations: opts.max_iter,
        residual: norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{relax, NodeAssignment, ParametricMinlp, ProblemFunctions, Sense};
    use std::sync::Arc;

    /// min x^2 with x >= 0 (upper side unbounded).
    struct HalfQuadratic;
    impl ProblemFunctions for HalfQuadratic {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            x[0] * x[0]
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * x[0]]
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

    fn half_quadratic() -> Relaxation {
        let p = Arc::new(
            ParametricMinlp::new(
                1,
                0,
                0,
                vec![0.0],
                vec![f64::INFINITY],
                Sense::Minimize,
                HalfQuadratic,
            )
            .unwrap(),
        );
        relax(&p, &NodeAssignment::root(0))
    }

    #[test]
    fn stationarity_vanishes_at_barrier_solution() {
        // 2x - mu/x = 0 at x = sqrt(mu/2); mu = 0.02 gives x = 0.1
        let r = half_quadratic();
        let it = BarrierIterate::new(vec![0.1], vec![], 0.02, 0.0);
        let res = kkt_residual(&r, &it).unwrap();
        assert_eq!(res.len(), 1);
        assert!(res[0].abs() < 1e-15, "residual {}", res[0]);
    }

    #[test]
    fn residual_rejects_boundary_point() {
        let r = half_quadratic();
        let it = BarrierIterate::new(vec![0.0], vec![], 0.02, 0.0);
        assert!(matches!(
            kkt_residual(&r, &it),
            Err(SolveError::Domain(_))
        ));
    }

    #[test]
    fn newton_finds_barrier_minimizer_from_far_start() {
        let r = half_quadratic();
        let start = BarrierIterate::new(vec![1.0], vec![], 0.02, 0.0);
        let mut solver = KktSolver::new();
        let out = newton_solve(&r, &start, &NewtonOptions::default(), &mut solver).unwrap();
        assert!((out.iterate.x[0] - 0.1).abs() < 1e-9, "x = {}", out.iterate.x[0]);
        assert!(out.residual_norm <= 1e-10);
    }

    #[test]
    fn newton_returns_immediately_at_solution() {
        let r = half_quadratic();
        let start = BarrierIterate::new(vec![0.1], vec![], 0.02, 0.0);
        let mut solver = KktSolver::new();
        let out = newton_solve(&r, &start, &NewtonOptions::default(), &mut solver).unwrap();
        assert_eq!(out.iterations, 0);
    }

    /// min 0.5 (x0^2 + x1^2) s.t. x0 + x1 = 1, no finite bounds: affine KKT.
    struct EqualityQp;
    impl ProblemFunctions for EqualityQp {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            0.5 * (x[0] * x[0] + x[1] * x[1])
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![x[0], x[1]]
        }
        fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 1.0), (1, 1, 1.0)]
        }
        fn constraints(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![x[0] + x[1] - 1.0]
        }
        fn constraint_jacobian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 1.0), (0, 1, 1.0)]
        }
        fn constraint_hessian(&self, _x: &[f64], _d: &[f64], _t: f64, _l: &[f64]) -> Vec<Triplet> {
            vec![]
        }
    }

    #[test]
    fn newton_is_exact_on_affine_systems() {
        let p = Arc::new(
            ParametricMinlp::new(
                2,
                0,
                1,
                vec![f64::NEG_INFINITY; 2],
                vec![f64::INFINITY; 2],
                Sense::Minimize,
                EqualityQp,
            )
            .unwrap(),
        );
        let r = relax(&p, &NodeAssignment::root(0));
        let start = BarrierIterate::new(vec![3.0, -2.0], vec![0.5], 1e-2, 0.0);
        let mut solver = KktSolver::new();
        let out = newton_solve(&r, &start, &NewtonOptions::default(), &mut solver).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residual_norm < 1e-12);
        assert!((out.iterate.x[0] - 0.5).abs() < 1e-12);
        assert!((out.iterate.x[1] - 0.5).abs() < 1e-12);
    }

    /// Quadratic with no finite bounds: KKT Jacobian equals the Hessian.
    #[test]
    fn jacobian_reduces_to_hessian_without_bounds() {
        let p = Arc::new(
            ParametricMinlp::new(
                2,
                0,
                0,
                vec![f64::NEG_INFINITY; 2],
                vec![f64::INFINITY; 2],
                Sense::Minimize,
                EqualityQpNoCon,
            )
            .unwrap(),
        );
        let r = relax(&p, &NodeAssignment::root(0));
        let it = BarrierIterate::new(vec![0.3, -0.7], vec![], 1e-6, 0.0);
        let mut dense = [[0.0f64; 2]; 2];
        for (i, j, v) in kkt_jacobian(&r, &it).unwrap() {
            dense[i][j] += v;
        }
        assert_eq!(dense, [[2.0, 0.5], [0.5, 4.0]]);
    }

    struct EqualityQpNoCon;
    impl ProblemFunctions for EqualityQpNoCon {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[0] * x[1]
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * x[0] + 0.5 * x[1], 4.0 * x[1] + 0.5 * x[0]]
        }
        fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 4.0)]
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

    /// Duplicated constraint rows make the KKT matrix singular; the solver
    /// must refuse to step.
    struct DuplicateRows;
    impl ProblemFunctions for DuplicateRows {
        fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
            x[0] * x[0] + x[1] * x[1]
        }
        fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![2.0 * x[0], 2.0 * x[1]]
        }
        fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 2.0), (1, 1, 2.0)]
        }
        fn constraints(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
            vec![x[0] + x[1] - 1.0, x[0] + x[1] - 1.0]
        }
        fn constraint_jacobian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]
        }
        fn constraint_hessian(&self, _x: &[f64], _d: &[f64], _t: f64, _l: &[f64]) -> Vec<Triplet> {
            vec![]
        }
    }

    #[test]
    fn duplicate_rows_trigger_singularity_detector() {
        let p = Arc::new(
            ParametricMinlp::new(
                2,
                0,
                2,
                vec![f64::NEG_INFINITY; 2],
                vec![f64::INFINITY; 2],
                Sense::Minimize,
                DuplicateRows,
            )
            .unwrap(),
        );
        let r = relax(&p, &NodeAssignment::root(0));
        let start = BarrierIterate::new(vec![0.2, 0.3], vec![0.0, 0.0], 1e-2, 0.0);
        let mut solver = KktSolver::new();
        match newton_solve(&r, &start, &NewtonOptions::default(), &mut solver) {
            Err(SolveError::SingularPoint { .. }) => {}
            other => panic!("expected singular point, got {other:?}"),
        }
    }
}
