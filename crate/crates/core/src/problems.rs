//! Analytic problem library: the unit-circle and parabola-branch toys, and
//! the building blocks they share (interval slack transformation, big-M
//! switching blocks).

use std::sync::Arc;

use crate::error::SolveError;
use crate::problem::{ParametricMinlp, ProblemFunctions, Sense, Triplet};

/// An interval inequality `lower <= e <= upper` rewritten as two equality
/// rows with nonnegative slacks:
///
/// ```text
///     e - lower - s1 = 0,    upper - e - s2 = 0,    s1, s2 >= 0
/// ```
#[derive(Debug, Clone, Copy)]
pub struct Slackified {
    pub lower: f64,
    pub upper: f64,
}

/// Builds the slack form of `lower <= e <= upper`.
pub fn slackify(lower: f64, upper: f64) -> Slackified {
    Slackified { lower, upper }
}

impl Slackified {
    /// Residuals of the two equality rows.
    pub fn residuals(&self, value: f64, s_lower: f64, s_upper: f64) -> (f64, f64) {
        (value - self.lower - s_lower, self.upper - value - s_upper)
    }

    /// The slack values that satisfy both rows at `value`.
    pub fn slacks(&self, value: f64) -> (f64, f64) {
        (value - self.lower, self.upper - value)
    }
}

/// A big-M disjunction on one continuous variable: the binary switches the
/// variable between a lower piece (binary = 0) and an upper piece
/// (binary = 1) of its box,
///
/// ```text
///     on_lower - M (1 - d)  <=  x  <=  off_upper + M d,
/// ```
///
/// written as two slack equality rows. The pieces are
/// `(box_lower, off_upper)` and `(on_lower, box_upper)`.
#[derive(Debug, Clone, Copy)]
pub struct BigMBlock {
    pub var: usize,
    pub binary: usize,
    pub big_m: f64,
    /// Piece selected by binary = 0.
    pub lower_piece: (f64, f64),
    /// Piece selected by binary = 1.
    pub upper_piece: (f64, f64),
}

impl BigMBlock {
    /// Checks that `big_m` is large enough for the relaxed disjunction to
    /// cover the variable's full box `(lower_piece.0, upper_piece.1)`.
    pub fn new(
        var: usize,
        binary: usize,
        big_m: f64,
        lower_piece: (f64, f64),
        upper_piece: (f64, f64),
    ) -> Result<Self, SolveError> {
        let need_low = upper_piece.0 - lower_piece.0;
        let need_high = upper_piece.1 - lower_piece.1;
        if big_m < need_low || big_m < need_high {
            return Err(SolveError::Config(format!(
                "big-M {} does not cover the box: needs at least {}",
                big_m,
                need_low.max(need_high)
            )));
        }
        Ok(Self {
            var,
            binary,
            big_m,
            lower_piece,
            upper_piece,
        })
    }

    /// Residuals of the two switching rows given the variable value, the
    /// binary value and the two slacks.
    pub fn residuals(&self, x: f64, delta: f64, s_lower: f64, s_upper: f64) -> (f64, f64) {
        let low_bound = self.upper_piece.0 - self.big_m * (1.0 - delta);
        let high_bound = self.lower_piece.1 + self.big_m * delta;
        (x - low_bound - s_lower, high_bound - x - s_upper)
    }
}

/// Example: maximize `x1` on a homotopy from the line `x1 + d1 = 1` to the
/// unit circle `x1^2 + d1^2 = 1`, with `x1 >= 0.5` and one binary.
///
/// The global optimum at `theta = 1` is `x1 = 1`, `d1 = 0`. The one-sided
/// bound is capped above at a configurable value for barrier
/// well-posedness; the circle constraint keeps the cap inactive for any
/// `theta > 0`.
struct UnitCircle;

impl ProblemFunctions for UnitCircle {
    fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
        x[0]
    }
    fn gradient(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
        vec![1.0, 0.0]
    }
    fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
        vec![]
    }
    fn constraints(&self, x: &[f64], d: &[f64], theta: f64) -> Vec<f64> {
        vec![(1.0 - theta) * (x[0] + d[0]) + theta * (x[0] * x[0] + d[0] * d[0]) - 1.0]
    }
    fn constraint_jacobian(&self, x: &[f64], d: &[f64], theta: f64) -> Vec<Triplet> {
        vec![
            (0, 0, (1.0 - theta) + 2.0 * theta * x[0]),
            (0, 1, (1.0 - theta) + 2.0 * theta * d[0]),
        ]
    }
    fn constraint_hessian(&self, _x: &[f64], _d: &[f64], theta: f64, l: &[f64]) -> Vec<Triplet> {
        vec![(0, 0, 2.0 * theta * l[0]), (1, 1, 2.0 * theta * l[0])]
    }
}

pub const UNIT_CIRCLE_DEFAULT_CAP: f64 = 10.0;

/// Builds the unit-circle problem with the default upper cap.
pub fn build_unit_circle() -> Arc<ParametricMinlp> {
    build_unit_circle_capped(UNIT_CIRCLE_DEFAULT_CAP).expect("default cap is valid")
}

/// Builds the unit-circle problem with an explicit upper cap on `x1`.
pub fn build_unit_circle_capped(cap: f64) -> Result<Arc<ParametricMinlp>, SolveError> {
    if cap <= 1.0 {
        return Err(SolveError::Config(format!(
            "cap {cap} would cut off the optimum at x1 = 1"
        )));
    }
    Ok(Arc::new(ParametricMinlp::new(
        1,
        1,
        1,
        vec![0.5],
        vec![cap],
        Sense::Maximize,
        UnitCircle,
    )?))
}

/// Example: two branches of a parabola. Minimize `0.001 x2 + x3^2` subject
/// to the blended constraint `(1-theta) x1 + theta x1^2 - x2 - x3 = 0` and
/// a big-M disjunction that puts `x1` left of -1 (binary 0) or right of 2
/// (binary 1) inside the box `[-2, 3]`. The big-M rows are carried in
/// slack form with two extra nonnegative variables.
struct Parabola {
    block: BigMBlock,
}

// variable layout: x = [x1, x2, x3, s1, s2], d = [d1]
const P_X1: usize = 0;
const P_X2: usize = 1;
const P_X3: usize = 2;
const P_S1: usize = 3;
const P_S2: usize = 4;
const P_D1: usize = 5;

impl ProblemFunctions for Parabola {
    fn objective(&self, x: &[f64], _d: &[f64], _t: f64) -> f64 {
        0.001 * x[P_X2] + x[P_X3] * x[P_X3]
    }
    fn gradient(&self, x: &[f64], _d: &[f64], _t: f64) -> Vec<f64> {
        vec![0.0, 0.001, 2.0 * x[P_X3], 0.0, 0.0, 0.0]
    }
    fn objective_hessian(&self, _x: &[f64], _d: &[f64], _t: f64) -> Vec<Triplet> {
        vec![(P_X3, P_X3, 2.0)]
    }
    fn constraints(&self, x: &[f64], d: &[f64], theta: f64) -> Vec<f64> {
        let parabola =
            (1.0 - theta) * x[P_X1] + theta * x[P_X1] * x[P_X1] - x[P_X2] - x[P_X3];
        let (low, high) = self
            .block
            .residuals(x[P_X1], d[0], x[P_S1], x[P_S2]);
        vec![parabola, low, high]
    }
    fn constraint_jacobian(&self, x: &[f64], _d: &[f64], theta: f64) -> Vec<Triplet> {
        let m = self.block.big_m;
        vec![
            (0, P_X1, (1.0 - theta) + 2.0 * theta * x[P_X1]),
            (0, P_X2, -1.0),
            (0, P_X3, -1.0),
            (1, P_X1, 1.0),
            (1, P_S1, -1.0),
            (1, P_D1, -m),
            (2, P_X1, -1.0),
            (2, P_S2, -1.0),
            (2, P_D1, m),
        ]
    }
    fn constraint_hessian(&self, _x: &[f64], _d: &[f64], theta: f64, l: &[f64]) -> Vec<Triplet> {
        vec![(P_X1, P_X1, 2.0 * theta * l[0])]
    }
}

pub const PARABOLA_DEFAULT_M: f64 = 5.0;

/// Builds the parabola problem; `m` must be at least 5 so the relaxed
/// disjunction covers the full box.
pub fn build_parabola(m: f64) -> Result<Arc<ParametricMinlp>, SolveError> {
    if m < 5.0 {
        return Err(SolveError::Config(format!(
            "big-M {m} is below the required minimum of 5"
        )));
    }
    let block = BigMBlock::new(P_X1, 0, m, (-2.0, -1.0), (2.0, 3.0))?;
    let inf = f64::INFINITY;
    Ok(Arc::new(ParametricMinlp::new(
        5,
        1,
        3,
        vec![-2.0, -inf, -1.0, 0.0, 0.0],
        vec![3.0, inf, 1.0, inf, inf],
        Sense::Minimize,
        Parabola { block },
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slackify_examples() {
        let s = slackify(-1.0, 2.0);
        assert_eq!(s.slacks(0.0), (1.0, 2.0));
        assert_eq!(s.slacks(-1.0).0, 0.0);
        assert_eq!(s.slacks(2.0).1, 0.0);
        let (r1, r2) = s.residuals(0.0, 1.0, 2.0);
        assert_eq!((r1, r2), (0.0, 0.0));
    }

    #[test]
    fn unit_circle_constraint_residuals() {
        let p = build_unit_circle();
        // x1 = 1, d1 = 0 solves every blend
        let f = p.functions();
        assert_eq!(f.constraints(&[1.0], &[0.0], 0.5)[0], 0.0);
        // x1 = 0.5, d1 = 1 at theta = 0: 0.5 + 1 - 1 = 0.5
        assert_eq!(f.constraints(&[0.5], &[1.0], 0.0)[0], 0.5);
    }

    #[test]
    fn unit_circle_is_stored_negated() {
        let p = build_unit_circle();
        assert_eq!(p.objective(&[1.0], &[0.0], 1.0), -1.0);
        assert_eq!(p.sense(), Sense::Maximize);
    }

    #[test]
    fn unit_circle_cap_must_clear_the_optimum() {
        assert!(build_unit_circle_capped(0.9).is_err());
    }

    #[test]
    fn parabola_rejects_small_m() {
        assert!(build_parabola(4.9).is_err());
        assert!(build_parabola(5.0).is_ok());
    }

    #[test]
    fn parabola_switching_rows() {
        let p = build_parabola(5.0).unwrap();
        let f = p.functions();
        // left branch: d = 0, x1 = -1.5, s1 = x1 + 3 = 1.5, s2 = -1 - x1 = 0.5
        let x = [-1.5, 0.0, 0.0, 1.5, 0.5];
        let c = f.constraints(&x, &[0.0], 0.0);
        assert!((c[1]).abs() < 1e-12);
        assert!((c[2]).abs() < 1e-12);
        // right branch: d = 1, x1 = 2.5, s1 = x1 - 2 = 0.5, s2 = 4 - x1 = 1.5
        let x = [2.5, 0.0, 0.0, 0.5, 1.5];
        let c = f.constraints(&x, &[1.0], 0.0);
        assert!((c[1]).abs() < 1e-12);
        assert!((c[2]).abs() < 1e-12);
    }

    #[test]
    fn big_m_cover_check() {
        assert!(BigMBlock::new(0, 0, 3.9, (-2.0, -1.0), (2.0, 3.0)).is_err());
        assert!(BigMBlock::new(0, 0, 4.0, (-2.0, -1.0), (2.0, 3.0)).is_ok());
    }

    #[test]
    fn parabola_zero_theta_objective_is_convex_quadratic() {
        // at theta = 0 the only curvature is the x3^2 term
        let p = build_parabola(5.0).unwrap();
        let h = p.functions().objective_hessian(&[0.0; 5], &[0.0], 0.0);
        assert_eq!(h, vec![(P_X3, P_X3, 2.0)]);
        // and the constraints are linear: jacobian is state-independent
        let j1 = p.functions().constraint_jacobian(&[0.0; 5], &[0.0], 0.0);
        let j2 = p.functions().constraint_jacobian(&[1.0; 5], &[1.0], 0.0);
        assert_eq!(j1, j2);
    }

    /// With x3 eliminated through the parabola row, the objective at theta
    /// = 1 is not quasiconvex: its sublevel sets are bands around the
    /// parabola. Exhibit two points in a sublevel set whose midpoint lies
    /// outside it.
    #[test]
    fn parabola_reduced_objective_is_nonconvex() {
        let g = |x1: f64, x2: f64| {
            let x3 = x1 * x1 - x2; // theta = 1 constraint
            0.001 * x2 + x3 * x3
        };
        // points on the parabola (x3 = 0) on both branches
        let a = g(-1.0, 1.0);
        let b = g(1.0, 1.0);
        let mid = g(0.0, 1.0);
        assert!(a <= 0.0011 && b <= 0.0011);
        assert!(mid > a.max(b) + 0.5, "midpoint {mid} inside the band");
    }
}
