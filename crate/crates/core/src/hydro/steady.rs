//! Steady-state initialization and forward simulation.

use super::residuals::{face_slots, momentum_face, FaceParams};
use super::{CascadeModel, HydraulicState, LevelState};
use crate::error::SolveError;
use crate::linalg::KktSolver;

/// Total stored volume of a state, `sum_k A_k * dx_k`.
pub fn total_volume(model: &CascadeModel, state: &LevelState) -> f64 {
    (0..model.num_cells())
        .map(|cell| {
            let reach = &model.reaches[model.reach_of_cell(cell)];
            reach.area(state.h[cell], model.bottom(cell)) * reach.dx()
        })
        .sum()
}

/// Face discharges for given boundary flows, uniform per reach: reach 0
/// carries `inflow`, reach `r > 0` carries `weir_flows[r - 1]`.
fn steady_face_flows(model: &CascadeModel, inflow: f64, weir_flows: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; model.num_faces()];
    let mut reach_flow = inflow;
    let mut face = 0;
    for (r, reach) in model.reaches.iter().enumerate() {
        for _ in 0..reach.cells {
            q[face] = reach_flow;
            face += 1;
        }
        // the reach-terminating weir
        q[face] = weir_flows[r];
        reach_flow = weir_flows[r];
    }
    q
}

/// Solves the time-invariant momentum balance per reach: uniform discharge,
/// the first level of each reach pinned to its configured initial value,
/// the remaining levels from Newton on the steady equations with the
/// configured profile as the initial guess.
pub fn solve_steady_state(
    model: &CascadeModel,
    inflow: f64,
    weir_flows: &[f64],
) -> Result<LevelState, SolveError> {
    if inflow <= 0.0 {
        return Err(SolveError::Config("steady inflow must be positive".into()));
    }
    if weir_flows.len() != model.num_weirs() {
        return Err(SolveError::Config(format!(
            "expected {} weir flows, got {}",
            model.num_weirs(),
            weir_flows.len()
        )));
    }
    let q = steady_face_flows(model, inflow, weir_flows);
    let mut h = model.initial_levels.clone();
    let mut solver = KktSolver::new();

    for (r, reach) in model.reaches.iter().enumerate() {
        let offset = model.reach_offset(r);
        let n_un = reach.cells - 1; // H at cells offset+1 .. offset+N-1
        if n_un == 0 {
            continue;
        }
        let mut converged = false;
        for _iter in 0..50 {
            // steady residual: momentum with prev = next = state
            let state = LevelState {
                h: h.clone(),
                q: q.clone(),
            };
            let mut residual = vec![0.0; n_un];
            let mut trips: Vec<(usize, usize, f64)> = Vec::new();
            for (row, face) in (offset + 1..offset + reach.cells).enumerate() {
                let p = FaceParams::new(model, face);
                let s = face_slots(&state, &state, face);
                let eval = momentum_face(&p, &s, 1.0)?;
                residual[row] = eval.value;
                // steady sensitivity: new- and old-level entries collapse
                let dl = eval.grad[super::residuals::S_HL_NEXT]
                    + eval.grad[super::residuals::S_HL_PREV];
                let dr = eval.grad[super::residuals::S_HR_NEXT]
                    + eval.grad[super::residuals::S_HR_PREV];
                let (cell_l, cell_r) = (face - 1, face);
                if cell_l > offset {
                    trips.push((row, cell_l - offset - 1, dl));
                }
                if cell_r > offset {
                    trips.push((row, cell_r - offset - 1, dr));
                }
            }
            let norm = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm <= 1e-12 {
                converged = true;
                break;
            }
            let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
            let step = solver.solve(n_un, &trips, &rhs)?;
            for (k, dh) in step.iter().enumerate() {
                h[offset + 1 + k] += dh;
            }
        }
        if !converged {
            let state = LevelState {
                h: h.clone(),
                q: q.clone(),
            };
            let res = super::residuals::momentum_residual(model, &state, &state, 1.0)?;
            return Err(SolveError::Diverged {
                iterations: 50,
                residual: res.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            });
        }
    }
    Ok(LevelState { h, q })
}

/// Steps the model forward from `initial` with prescribed boundary series.
///
/// `inflow[j]` and `weir_flows[w][j]` give the boundary discharges at
/// hydraulic level `j = 0..=steps`. Each step solves the implicit system
/// (linear in the new unknowns) by Newton. `theta` selects the dynamics:
/// 1 is the full model, 0 the linearized one.
pub fn simulate(
    model: &CascadeModel,
    initial: &LevelState,
    inflow: &[f64],
    weir_flows: &[Vec<f64>],
    steps: usize,
    theta: f64,
) -> Result<HydraulicState, SolveError> {
    let n_cells = model.num_cells();
    let n_faces = model.num_faces();
    if inflow.len() < steps + 1 || weir_flows.iter().any(|w| w.len() < steps + 1) {
        return Err(SolveError::Config(
            "boundary series must cover steps + 1 levels".into(),
        ));
    }
    if weir_flows.len() != model.num_weirs() {
        return Err(SolveError::Config(format!(
            "expected {} weir series, got {}",
            model.num_weirs(),
            weir_flows.len()
        )));
    }

    let interior = model.interior_faces();
    let n_un = n_cells + interior.len();
    // unknown order per step: all H, then interior Q
    let qcol: std::collections::HashMap<usize, usize> = interior
        .iter()
        .enumerate()
        .map(|(k, &f)| (f, n_cells + k))
        .collect();

    let mut solver = KktSolver::new();
    let mut levels = vec![initial.clone()];
    let mut times = vec![0.0];

    for j in 0..steps {
        let prev = levels[j].clone();
        let mut next = prev.clone();
        // boundary flows at the new level
        next.q[0] = inflow[j + 1];
        for (w, series) in weir_flows.iter().enumerate() {
            let mut boundary = 0;
            for (r, reach) in model.reaches.iter().enumerate() {
                boundary += reach.cells;
                if r == w {
                    next.q[boundary] = series[j + 1];
                    break;
                }
            }
        }

        // Newton on the per-step system; it is linear in the unknowns, so
        // two iterations reach machine precision
        let mut converged = false;
        for _ in 0..5 {
            let mut residual = vec![0.0; n_un];
            let mut trips: Vec<(usize, usize, f64)> = Vec::new();
            let cont = super::residuals::continuity_residual(model, &prev, &next);
            for (cell, value) in cont.into_iter().enumerate() {
                residual[cell] = value;
                let reach = &model.reaches[model.reach_of_cell(cell)];
                trips.push((cell, cell, reach.width / model.grid.dt_hydraulic));
                for (face, sign) in [(cell + 1, 1.0), (cell, -1.0)] {
                    if let Some(&col) = qcol.get(&face) {
                        trips.push((cell, col, sign / reach.dx()));
                    }
                }
            }
            for (k, &face) in interior.iter().enumerate() {
                let p = FaceParams::new(model, face);
                let s = face_slots(&prev, &next, face);
                let eval = momentum_face(&p, &s, theta)?;
                let row = n_cells + k;
                residual[row] = eval.value;
                trips.push((row, qcol[&face], eval.grad[super::residuals::S_Q_NEXT]));
                trips.push((row, face - 1, eval.grad[super::residuals::S_HL_NEXT]));
                trips.push((row, face, eval.grad[super::residuals::S_HR_NEXT]));
            }
            let norm = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm <= 1e-11 {
                converged = true;
                break;
            }
            let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
            let step = solver.solve(n_un, &trips, &rhs)?;
            for cell in 0..n_cells {
                next.h[cell] += step[cell];
            }
            for (k, &face) in interior.iter().enumerate() {
                next.q[face] += step[n_cells + k];
            }
        }
        if !converged {
            return Err(SolveError::Diverged {
                iterations: 5,
                residual: f64::NAN,
            });
        }
        times.push((j + 1) as f64 * model.grid.dt_hydraulic);
        levels.push(next);
    }
    debug_assert_eq!(n_faces, initial.q.len());
    Ok(HydraulicState { times, levels })
}
