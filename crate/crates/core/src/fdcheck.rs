//! Central finite-difference verification of analytic derivatives.
//!
//! Test-only machinery: nothing in the solve path calls into this module.
//! It provides an independent check that the hand-written gradients,
//! Jacobians and Hessians of the problem library and of the KKT assembly
//! agree with difference quotients of the underlying values.

use crate::barrier::{kkt_residual, BarrierIterate};
use crate::problem::{Relaxation, Triplet};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_RTOL: f64 = 1e-6;

/// Central-difference gradient of a scalar function.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function, dense row-major.
pub fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Accumulates COO triplets into a dense matrix.
pub fn triplets_to_dense(rows: usize, cols: usize, trips: &[Triplet]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; cols]; rows];
    for &(r, c, v) in trips {
        m[r][c] += v;
    }
    m
}

/// Largest relative entry difference `|a - b| / max(1, |a|, |b|)`.
pub fn max_rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b.iter()) {
        for (&va, &vb) in ra.iter().zip(rb.iter()) {
            let scale = 1.0f64.max(va.abs()).max(vb.abs());
            worst = worst.max((va - vb).abs() / scale);
        }
    }
    worst
}

/// Compares the analytic KKT Jacobian against central differences of
/// [`kkt_residual`] at `iterate`. Returns the largest relative entry error.
pub fn kkt_jacobian_error(relax: &Relaxation, iterate: &BarrierIterate, h: f64) -> f64 {
    let n = relax.n_vars();
    let l = relax.n_constraints();
    let dim = n + l;

    let eval = |w: &[f64]| -> Vec<f64> {
        let it = BarrierIterate::new(w[..n].to_vec(), w[n..].to_vec(), iterate.mu, iterate.theta);
        kkt_residual(relax, &it).expect("interior point required for FD check")
    };
    let mut w = iterate.x.clone();
    w.extend_from_slice(&iterate.lambda);
    let fd = jacobian(eval, &w, h);

    let analytic = triplets_to_dense(
        dim,
        dim,
        &crate::barrier::kkt_jacobian(relax, iterate).expect("interior point required"),
    );
    max_rel_diff(&fd, &analytic)
}

/// Compares a relaxation's analytic constraint Jacobian against central
/// differences of the residuals.
pub fn constraint_jacobian_error(relax: &Relaxation, z: &[f64], theta: f64, h: f64) -> f64 {
    let fd = jacobian(|w| relax.constraints(w, theta), z, h);
    let analytic = triplets_to_dense(
        relax.n_constraints(),
        relax.n_vars(),
        &relax.jacobian(z, theta),
    );
    max_rel_diff(&fd, &analytic)
}

/// Compares the analytic objective gradient against central differences.
pub fn objective_gradient_error(relax: &Relaxation, z: &[f64], theta: f64, h: f64) -> f64 {
    let fd = gradient(|w| relax.objective(w, theta), z, h);
    let analytic = relax.gradient(z, theta);
    max_rel_diff(&[fd], &[analytic])
}

/// Compares the analytic Lagrangian Hessian (objective plus weighted
/// constraints, barrier excluded) against central differences of the
/// corresponding gradient.
pub fn lagrangian_hessian_error(
    relax: &Relaxation,
    z: &[f64],
    theta: f64,
    lambda: &[f64],
    h: f64,
) -> f64 {
    let lag_grad = |w: &[f64]| -> Vec<f64> {
        let mut g = relax.gradient(w, theta);
        for (r, c, v) in relax.jacobian(w, theta) {
            g[c] += v * lambda[r];
        }
        g
    };
    let fd = jacobian(lag_grad, z, h);
    let analytic = triplets_to_dense(
        relax.n_vars(),
        relax.n_vars(),
        &relax.lagrangian_hessian(z, theta, lambda),
    );
    max_rel_diff(&fd, &analytic)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_of_quadratic() {
        let g = gradient(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 1.0], 1e-6);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn fd_jacobian_of_linear_map() {
        let j = jacobian(|x| vec![2.0 * x[0] + x[1], x[1]], &[1.0, 5.0], 1e-6);
        assert!((j[0][0] - 2.0).abs() < 1e-8);
        assert!((j[0][1] - 1.0).abs() < 1e-8);
        assert!((j[1][0]).abs() < 1e-8);
        assert!((j[1][1] - 1.0).abs() < 1e-8);
    }
}
