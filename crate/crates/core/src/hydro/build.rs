//! Direct transcription of the cascade into a `ParametricMinlp`.
//!
//! Unknowns, level-major for levels `1..=J`: all water levels, then the
//! interior-face discharges. Binaries: one gate decision per weir per
//! control instant `t = dtc, 2 dtc, ..., T`; the value at `t = 0` is
//! pinned to the low flow, matching the steady initial state. Weir
//! discharges at hydraulic levels are affine in the binaries through
//! linear interpolation between control instants.
//!
//! Constraints, step-major for steps `0..J`: the continuity rows of every
//! cell, then the momentum rows of every interior face. Row counts equal
//! unknown counts; at a leaf the dynamics pin the whole trajectory.

use std::sync::Arc;

use super::residuals::{momentum_face, FaceParams};
use super::steady::solve_steady_state;
use super::{CascadeModel, FaceKind, LevelState, LEVEL_MARGIN};
use crate::error::SolveError;
use crate::problem::{ParametricMinlp, ProblemFunctions, Sense, Triplet};

/// Weir discharge at one hydraulic level as an affine function of the
/// binaries: `constant + sum coef * delta[idx]`.
#[derive(Debug, Clone)]
struct WeirFlow {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl WeirFlow {
    fn eval(&self, delta: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(i, c)| c * delta[i])
                .sum::<f64>()
    }
}

/// Builds the interpolation table `[level][weir]`. Integer arithmetic on
/// step indices keeps control instants exact.
fn weir_interpolation(model: &CascadeModel) -> Vec<Vec<WeirFlow>> {
    let j_steps = model.grid.hydraulic_steps();
    let n_ctrl = model.grid.control_steps();
    let per_ctrl = (model.grid.dt_control / model.grid.dt_hydraulic).round() as usize;
    let span = model.weir.high_flow - model.weir.low_flow;
    let low = model.weir.low_flow;
    let weirs = model.num_weirs();

    let mut table = Vec::with_capacity(j_steps + 1);
    for j in 0..=j_steps {
        let c0 = j / per_ctrl;
        let rem = j % per_ctrl;
        let alpha = rem as f64 / per_ctrl as f64;
        let mut row = Vec::with_capacity(weirs);
        for w in 0..weirs {
            let mut terms = Vec::new();
            // control value at instant c: low for c = 0, low + span * delta
            // for c >= 1
            if c0 >= 1 {
                terms.push((w * n_ctrl + (c0 - 1), (1.0 - alpha) * span));
            }
            if rem != 0 {
                debug_assert!(c0 + 1 <= n_ctrl);
                terms.push((w * n_ctrl + c0, alpha * span));
            }
            terms.retain(|&(_, c)| c != 0.0);
            row.push(WeirFlow {
                constant: low,
                terms,
            });
        }
        table.push(row);
    }
    table
}

/// Per-level weir discharges for fixed binary values; row `w`, column
/// `j = 0..=J`. The same interpolation the optimizer sees, for baselines
/// and result extraction.
pub fn weir_flow_table(model: &CascadeModel, delta: &[f64]) -> Vec<Vec<f64>> {
    let table = weir_interpolation(model);
    let j_steps = model.grid.hydraulic_steps();
    (0..model.num_weirs())
        .map(|w| (0..=j_steps).map(|j| table[j][w].eval(delta)).collect())
        .collect()
}

/// How a stencil slot maps into the reduced variable space.
enum SlotRef<'a> {
    Var(usize),
    Affine(&'a [(usize, f64)]),
    Fixed,
}

struct Layout {
    n_cells: usize,
    n_int: usize,
    j_steps: usize,
    per_level: usize,
    n_cont: usize,
    interior: Vec<usize>,
    /// Interior-face list index of each face, `None` for boundaries.
    q_index: Vec<Option<usize>>,
}

impl Layout {
    fn new(model: &CascadeModel) -> Self {
        let n_cells = model.num_cells();
        let interior = model.interior_faces();
        let n_int = interior.len();
        let mut q_index = vec![None; model.num_faces()];
        for (k, &f) in interior.iter().enumerate() {
            q_index[f] = Some(k);
        }
        let j_steps = model.grid.hydraulic_steps();
        let per_level = n_cells + n_int;
        Self {
            n_cells,
            n_int,
            j_steps,
            per_level,
            n_cont: j_steps * per_level,
            interior,
            q_index,
        }
    }

    /// Column of `H[cell]` at level `j >= 1`.
    fn h_var(&self, level: usize, cell: usize) -> usize {
        debug_assert!(level >= 1);
        (level - 1) * self.per_level + cell
    }

    /// Column of the discharge at interior-face list index `k`, level
    /// `j >= 1`.
    fn q_var(&self, level: usize, k: usize) -> usize {
        debug_assert!(level >= 1);
        (level - 1) * self.per_level + self.n_cells + k
    }

    fn cont_row(&self, step: usize, cell: usize) -> usize {
        step * self.per_level + cell
    }

    fn mom_row(&self, step: usize, k: usize) -> usize {
        step * self.per_level + self.n_cells + k
    }
}

struct RiverFunctions {
    model: CascadeModel,
    layout: Layout,
    steady: LevelState,
    /// Inflow at every hydraulic level.
    inflow: Vec<f64>,
    /// Affine weir flows, `[level][weir]`.
    weirs: Vec<Vec<WeirFlow>>,
    face_params: Vec<FaceParams>,
    /// Level-0 contribution to the objective.
    objective_offset: f64,
    /// Datum per cell: the level unknown is the depth above
    /// `bottom + LEVEL_MARGIN`, so an active dry bound is hugged at zero
    /// and keeps full relative precision. `H = z + level_datum[cell]`.
    level_datum: Vec<f64>,
}

impl RiverFunctions {
    fn face_ref(&self, level: usize, face: usize) -> SlotRef<'_> {
        match self.model.face_kind(face) {
            FaceKind::Inflow => SlotRef::Fixed,
            FaceKind::Weir(w) => {
                if level == 0 {
                    SlotRef::Fixed
                } else {
                    SlotRef::Affine(&self.weirs[level][w].terms)
                }
            }
            FaceKind::Interior => {
                if level == 0 {
                    SlotRef::Fixed
                } else {
                    let k = self.layout.q_index[face].expect("interior face");
                    SlotRef::Var(self.layout.q_var(level, k))
                }
            }
        }
    }

    fn h_ref(&self, level: usize, cell: usize) -> SlotRef<'static> {
        if level == 0 {
            SlotRef::Fixed
        } else {
            SlotRef::Var(self.layout.h_var(level, cell))
        }
    }

    fn assemble_levels(&self, x: &[f64], delta: &[f64]) -> Vec<LevelState> {
        let lay = &self.layout;
        let mut levels = Vec::with_capacity(lay.j_steps + 1);
        levels.push(self.steady.clone());
        for j in 1..=lay.j_steps {
            let base = (j - 1) * lay.per_level;
            let h: Vec<f64> = (0..lay.n_cells)
                .map(|cell| x[base + cell] + self.level_datum[cell])
                .collect();
            let mut q = vec![0.0; self.model.num_faces()];
            q[0] = self.inflow[j];
            for (k, &f) in lay.interior.iter().enumerate() {
                q[f] = x[base + lay.n_cells + k];
            }
            let mut boundary = 0;
            for (w, reach) in self.model.reaches.iter().enumerate() {
                boundary += reach.cells;
                q[boundary] = self.weirs[j][w].eval(delta);
            }
            levels.push(LevelState { h, q });
        }
        levels
    }

    /// Expands one stencil slot derivative into reduced-space entries.
    fn expand_slot(
        &self,
        slot_ref: &SlotRef<'_>,
        row: usize,
        g: f64,
        out: &mut Vec<Triplet>,
    ) {
        match slot_ref {
            SlotRef::Var(col) => out.push((row, *col, g)),
            SlotRef::Affine(terms) => {
                for &(d, coef) in terms.iter() {
                    out.push((row, self.layout.n_cont + d, g * coef));
                }
            }
            SlotRef::Fixed => {}
        }
    }

    /// References of the eight momentum slots at `(step, face)`.
    fn slot_refs(&self, step: usize, face: usize) -> [SlotRef<'_>; 8] {
        let (cell_l, cell_r) = (face - 1, face);
        let k = self.layout.q_index[face].expect("interior face");
        [
            SlotRef::Var(self.layout.q_var(step + 1, k)),
            self.face_ref(step, face),
            SlotRef::Var(self.layout.h_var(step + 1, cell_l)),
            SlotRef::Var(self.layout.h_var(step + 1, cell_r)),
            self.h_ref(step, cell_l),
            self.h_ref(step, cell_r),
            self.face_ref(step, face - 1),
            self.face_ref(step, face + 1),
        ]
    }
}

impl ProblemFunctions for RiverFunctions {
    fn objective(&self, x: &[f64], _delta: &[f64], _theta: f64) -> f64 {
        let lay = &self.layout;
        let mut total = self.objective_offset;
        for j in 1..=lay.j_steps {
            let base = (j - 1) * lay.per_level;
            for cell in 0..lay.n_cells {
                let h = x[base + cell] + self.level_datum[cell];
                total += h * h;
            }
        }
        total
    }

    fn gradient(&self, x: &[f64], _delta: &[f64], _theta: f64) -> Vec<f64> {
        let lay = &self.layout;
        let mut g = vec![0.0; lay.n_cont + self.model.num_weirs() * self.model.grid.control_steps()];
        for j in 1..=lay.j_steps {
            let base = (j - 1) * lay.per_level;
            for cell in 0..lay.n_cells {
                g[base + cell] = 2.0 * (x[base + cell] + self.level_datum[cell]);
            }
        }
        g
    }

    fn objective_hessian(&self, _x: &[f64], _delta: &[f64], _theta: f64) -> Vec<Triplet> {
        let lay = &self.layout;
        let mut h = Vec::with_capacity(lay.j_steps * lay.n_cells);
        for j in 1..=lay.j_steps {
            for cell in 0..lay.n_cells {
                let col = lay.h_var(j, cell);
                h.push((col, col, 2.0));
            }
        }
        h
    }

    fn constraints(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<f64> {
        let lay = &self.layout;
        let levels = self.assemble_levels(x, delta);
        let mut out = vec![0.0; lay.j_steps * lay.per_level];
        for step in 0..lay.j_steps {
            let (prev, next) = (&levels[step], &levels[step + 1]);
            let cont = super::residuals::continuity_residual(&self.model, prev, next);
            for (cell, v) in cont.into_iter().enumerate() {
                out[lay.cont_row(step, cell)] = v;
            }
            for (k, &face) in lay.interior.iter().enumerate() {
                let s = super::residuals::face_slots(prev, next, face);
                let eval = momentum_face(&self.face_params[k], &s, theta)
                    .expect("levels stay above the bottom inside the box");
                out[lay.mom_row(step, k)] = eval.value;
            }
        }
        out
    }

    fn constraint_jacobian(&self, x: &[f64], delta: &[f64], theta: f64) -> Vec<Triplet> {
        let lay = &self.layout;
        let levels = self.assemble_levels(x, delta);
        let dt = self.model.grid.dt_hydraulic;
        let mut out: Vec<Triplet> = Vec::with_capacity(lay.j_steps * lay.per_level * 8);

        for step in 0..lay.j_steps {
            let (prev, next) = (&levels[step], &levels[step + 1]);
            // continuity rows are linear with constant coefficients
            for cell in 0..lay.n_cells {
                let row = lay.cont_row(step, cell);
                let reach = &self.model.reaches[self.model.reach_of_cell(cell)];
                out.push((row, lay.h_var(step + 1, cell), reach.width / dt));
                if step >= 1 {
                    out.push((row, lay.h_var(step, cell), -reach.width / dt));
                }
                for (face, sign) in [(cell + 1, 1.0), (cell, -1.0)] {
                    let slot = self.face_ref(step + 1, face);
                    self.expand_slot(&slot, row, sign / reach.dx(), &mut out);
                }
            }
            for (k, &face) in lay.interior.iter().enumerate() {
                let row = lay.mom_row(step, k);
                let s = super::residuals::face_slots(prev, next, face);
                let eval = momentum_face(&self.face_params[k], &s, theta)
                    .expect("levels stay above the bottom inside the box");
                let refs = self.slot_refs(step, face);
                for (slot, g) in eval.grad.iter().enumerate() {
                    if *g != 0.0 {
                        self.expand_slot(&refs[slot], row, *g, &mut out);
                    }
                }
            }
        }
        out
    }

    fn constraint_hessian(
        &self,
        x: &[f64],
        delta: &[f64],
        theta: f64,
        lambda: &[f64],
    ) -> Vec<Triplet> {
        let lay = &self.layout;
        let levels = self.assemble_levels(x, delta);
        let mut out: Vec<Triplet> = Vec::new();
        let expand = |slot: &SlotRef<'_>| -> Vec<(usize, f64)> {
            match slot {
                SlotRef::Var(col) => vec![(*col, 1.0)],
                SlotRef::Affine(terms) => terms
                    .iter()
                    .map(|&(d, c)| (lay.n_cont + d, c))
                    .collect(),
                SlotRef::Fixed => vec![],
            }
        };

        for step in 0..lay.j_steps {
            let (prev, next) = (&levels[step], &levels[step + 1]);
            for (k, &face) in lay.interior.iter().enumerate() {
                let lam = lambda[lay.mom_row(step, k)];
                if lam == 0.0 {
                    continue;
                }
                let s = super::residuals::face_slots(prev, next, face);
                let eval = momentum_face(&self.face_params[k], &s, theta)
                    .expect("levels stay above the bottom inside the box");
                let refs = self.slot_refs(step, face);
                for &(si, sj, v) in &eval.hess {
                    let left = expand(&refs[si]);
                    let right = expand(&refs[sj]);
                    for &(ci, wi) in &left {
                        for &(cj, wj) in &right {
                            let val = lam * v * wi * wj;
                            out.push((ci, cj, val));
                            if si != sj {
                                out.push((cj, ci, val));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Builds the cascade optimal-control problem. `num_weirs` must match the
/// model's reach count; the initial state is the computed steady state at
/// the configured initial discharge.
pub fn build_river_problem(
    num_weirs: usize,
    model: &CascadeModel,
) -> Result<Arc<ParametricMinlp>, SolveError> {
    model.validate()?;
    if num_weirs != model.num_weirs() {
        return Err(SolveError::Config(format!(
            "model has {} weirs, requested {}",
            model.num_weirs(),
            num_weirs
        )));
    }
    let layout = Layout::new(model);
    if layout.j_steps == 0 {
        return Err(SolveError::Config("horizon shorter than one step".into()));
    }

    let steady = solve_steady_state(
        model,
        model.initial_discharge,
        &vec![model.initial_discharge; model.num_weirs()],
    )?;
    let inflow: Vec<f64> = (0..=layout.j_steps)
        .map(|j| model.inflow.value_at(j as f64 * model.grid.dt_hydraulic))
        .collect();
    let weirs = weir_interpolation(model);
    let face_params: Vec<FaceParams> = layout
        .interior
        .iter()
        .map(|&f| FaceParams::new(model, f))
        .collect();
    let objective_offset: f64 = steady.h.iter().map(|h| h * h).sum();
    let level_datum: Vec<f64> = (0..layout.n_cells)
        .map(|cell| model.bottom(cell) + LEVEL_MARGIN)
        .collect();

    let n_bin = model.num_weirs() * model.grid.control_steps();
    let n_eq = layout.j_steps * layout.per_level;
    let mut lower = Vec::with_capacity(layout.n_cont);
    let mut upper = Vec::with_capacity(layout.n_cont);
    for _j in 1..=layout.j_steps {
        for _cell in 0..layout.n_cells {
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        for _ in 0..layout.n_int {
            lower.push(f64::NEG_INFINITY);
            upper.push(f64::INFINITY);
        }
    }

    let functions = RiverFunctions {
        model: model.clone(),
        layout,
        steady,
        inflow,
        weirs,
        face_params,
        objective_offset,
        level_datum,
    };
    Ok(Arc::new(ParametricMinlp::new(
        functions.layout.n_cont,
        n_bin,
        n_eq,
        lower,
        upper,
        Sense::Minimize,
        functions,
    )?))
}

/// Reconstructs the full hydraulic trajectory (level 0 = the steady
/// initial state) from a solve's primal vector and binary values. Inverse
/// of the builder's variable packing, datum shift included.
pub fn trajectory_from_primal(
    model: &CascadeModel,
    x: &[f64],
    delta: &[f64],
) -> Result<super::HydraulicState, SolveError> {
    let layout = Layout::new(model);
    if x.len() != layout.n_cont {
        return Err(SolveError::Config(format!(
            "primal has {} entries, expected {}",
            x.len(),
            layout.n_cont
        )));
    }
    let steady = solve_steady_state(
        model,
        model.initial_discharge,
        &vec![model.initial_discharge; model.num_weirs()],
    )?;
    let weirs = weir_interpolation(model);
    let dt = model.grid.dt_hydraulic;
    let mut times = vec![0.0];
    let mut levels = vec![steady];
    for j in 1..=layout.j_steps {
        let base = (j - 1) * layout.per_level;
        let h: Vec<f64> = (0..layout.n_cells)
            .map(|cell| x[base + cell] + model.bottom(cell) + LEVEL_MARGIN)
            .collect();
        let mut q = vec![0.0; model.num_faces()];
        q[0] = model.inflow.value_at(j as f64 * dt);
        for (k, &f) in layout.interior.iter().enumerate() {
            q[f] = x[base + layout.n_cells + k];
        }
        let mut boundary = 0;
        for (w, reach) in model.reaches.iter().enumerate() {
            boundary += reach.cells;
            q[boundary] = weirs[j][w].eval(delta);
        }
        times.push(j as f64 * dt);
        levels.push(LevelState { h, q });
    }
    Ok(super::HydraulicState { times, levels })
}
