//! Linear solves for the KKT systems.
//!
//! Systems up to [`KktSolver::dense_limit`] unknowns go through a dense LU
//! with partial pivoting; the pivot ratio `min |u_ii| / max |u_ii|` doubles
//! as the singular-point detector. Larger systems (the river cascade KKT
//! matrices have a few thousand unknowns but only ~10 entries per row) go
//! through a sparse LU whose symbolic factorization is reused while the
//! sparsity pattern stays fixed, which it does across the Newton iterations
//! of one relaxation solve.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet as FaerTriplet};
use nalgebra::{DMatrix, DVector};

use crate::error::SolveError;
use crate::problem::Triplet;

/// Relative pivot-magnitude floor below which a dense factorization is
/// declared singular.
pub const PIVOT_RATIO_MIN: f64 = 1e-12;

const DEFAULT_DENSE_LIMIT: usize = 512;

/// Reusable KKT solver. Keep one per solve pipeline; it caches the sparse
/// symbolic factorization between calls with an identical pattern.
pub struct KktSolver {
    dense_limit: usize,
    cached_pattern: Vec<(usize, usize)>,
    cached_dim: usize,
    symbolic: Option<SymbolicLu<usize>>,
}

impl Default for KktSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl KktSolver {
    pub fn new() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
            cached_pattern: Vec::new(),
            cached_dim: 0,
            symbolic: None,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_dense_limit(limit: usize) -> Self {
        let mut s = Self::new();
        s.dense_limit = limit;
        s
    }

    /// Solves the square system given by COO `triplets` (duplicates are
    /// summed) for the right-hand side `rhs`.
    pub fn solve(
        &mut self,
        dim: usize,
        triplets: &[Triplet],
        rhs: &[f64],
    ) -> Result<Vec<f64>, SolveError> {
        assert_eq!(rhs.len(), dim, "rhs length must match system dimension");
        if dim <= self.dense_limit {
            solve_dense(dim, triplets, rhs)
        } else {
            self.solve_sparse(dim, triplets, rhs)
        }
    }

    fn solve_sparse(
        &mut self,
        dim: usize,
        triplets: &[Triplet],
        rhs: &[f64],
    ) -> Result<Vec<f64>, SolveError> {
        let faer_trips: Vec<FaerTriplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(r, c, v)| FaerTriplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &faer_trips)
            .map_err(|e| SolveError::Config(format!("bad triplets: {e:?}")))?;

        let pattern_matches = self.cached_dim == dim
            && self.cached_pattern.len() == triplets.len()
            && self
                .cached_pattern
                .iter()
                .zip(triplets.iter())
                .all(|(&(r, c), &(tr, tc, _))| r == tr && c == tc);
        if !pattern_matches || self.symbolic.is_none() {
            let symbolic = SymbolicLu::try_new(mat.symbolic())
                .map_err(|_| SolveError::SingularPoint { ratio: 0.0 })?;
            self.symbolic = Some(symbolic);
            self.cached_dim = dim;
            self.cached_pattern = triplets.iter().map(|&(r, c, _)| (r, c)).collect();
        }
        let symbolic = self.symbolic.as_ref().unwrap().clone();

        // faer's simplicial LU panics on an exactly zero pivot instead of
        // returning an error; map that to a singular point as well.
        let factor = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            Lu::try_new_with_symbolic(symbolic, mat.as_ref())
        }));
        let lu = match factor {
            Ok(Ok(lu)) => lu,
            Ok(Err(_)) | Err(_) => return Err(SolveError::SingularPoint { ratio: 0.0 }),
        };

        let mut b = faer::Mat::<f64>::zeros(dim, 1);
        for (i, &v) in rhs.iter().enumerate() {
            b[(i, 0)] = v;
        }
        let sol = lu.solve(&b);
        let x: Vec<f64> = (0..dim).map(|i| sol[(i, 0)]).collect();

        // Near-singular factorizations succeed but return garbage; verify
        // the solution by its linear residual before handing it back.
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SolveError::SingularPoint { ratio: 0.0 });
        }
        let mut residual = rhs.to_vec();
        let mut a_max: f64 = 0.0;
        for &(r, c, v) in triplets {
            residual[r] -= v * x[c];
            a_max = a_max.max(v.abs());
        }
        let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b_max = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r_max = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-8 * (a_max * x_max + b_max).max(1.0);
        if r_max > tol {
            return Err(SolveError::SingularPoint { ratio: 0.0 });
        }
        Ok(x)
    }
}

fn solve_dense(dim: usize, triplets: &[Triplet], rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    for &(r, c, v) in triplets {
        mat[(r, c)] += v;
    }
    // Row equilibration before the pivot-ratio test: barrier KKT systems
    // mix diagonals of order 1/mu with Schur pivots of order mu, so the
    // raw ratio would flag regular systems as singular. Rank deficiency
    // survives scaling; stiffness does not.
    let mut row_scale = vec![0.0f64; dim];
    for i in 0..dim {
        let mut m: f64 = 0.0;
        for j in 0..dim {
            m = m.max(mat[(i, j)].abs());
        }
        if m == 0.0 {
            return Err(SolveError::SingularPoint { ratio: 0.0 });
        }
        row_scale[i] = 1.0 / m;
        for j in 0..dim {
            mat[(i, j)] *= row_scale[i];
        }
    }
    let lu = mat.lu();
    let u = lu.u();
    let mut min_piv = f64::INFINITY;
    let mut max_piv: f64 = 0.0;
    for i in 0..dim {
        let p = u[(i, i)].abs();
        min_piv = min_piv.min(p);
        max_piv = max_piv.max(p);
    }
    if dim > 0 {
        let ratio = if max_piv > 0.0 { min_piv / max_piv } else { 0.0 };
        if ratio < PIVOT_RATIO_MIN {
            return Err(SolveError::SingularPoint { ratio });
        }
    }
    let b = DVector::from_iterator(dim, rhs.iter().zip(row_scale.iter()).map(|(v, s)| v * s));
    let x = lu
        .solve(&b)
        .ok_or(SolveError::SingularPoint { ratio: 0.0 })?;
    Ok(x.data.into())
}
