//! Shallow-water residuals on the staggered grid.
//!
//! The semi-implicit split: the water-level gradient and the friction
//! numerator `Q` sit at the new time level, while cross sections, hydraulic
//! radii, the friction `|Q|` and the whole convective term are evaluated at
//! the old level. Each step's residual is therefore linear in the new
//! unknowns while remaining smooth in all of them, which is what the
//! barrier Newton solver differentiates through.
//!
//! The momentum residual at an interior face blends the full discretization
//! (weight `theta`) with a model linearized about the nominal state
//! (weight `1 - theta`); the continuity residual is linear and carries no
//! blend.

use super::{CascadeModel, FaceKind, LevelState};
use crate::error::SolveError;

/// Twice-differentiable absolute value: `sqrt(q^2 + eps)`.
pub fn smooth_abs(q: f64, eps: f64) -> f64 {
    debug_assert!(eps > 0.0);
    (q * q + eps).sqrt()
}

pub(crate) fn smooth_abs_d1(q: f64, eps: f64) -> f64 {
    q / smooth_abs(q, eps)
}

pub(crate) fn smooth_abs_d2(q: f64, eps: f64) -> f64 {
    let s = smooth_abs(q, eps);
    eps / (s * s * s)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-face constants of the momentum stencil.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FaceParams {
    pub dt: f64,
    pub dx: f64,
    pub width: f64,
    /// Chezy coefficient squared.
    pub c2: f64,
    pub g: f64,
    pub eps: f64,
    /// Upwind sigmoid scale `K / (2 Q_nominal)`.
    pub sig: f64,
    /// Bottom levels of the left and right cells.
    pub b_l: f64,
    pub b_r: f64,
    /// Linear-model pressure coefficient `g * A_nom / dx`.
    pub press_lin: f64,
    /// Linear-model friction coefficient `g |Q_nom| / (A_nom R_nom C^2)`.
    pub fric_lin: f64,
}

impl FaceParams {
    /// Builds the constants for an interior `face` of `model`.
    pub fn new(model: &CascadeModel, face: usize) -> Self {
        debug_assert_eq!(model.face_kind(face), FaceKind::Interior);
        let cell_l = face - 1;
        let cell_r = face;
        let reach = &model.reaches[model.reach_of_cell(cell_l)];
        let (b_l, b_r) = (model.bottom(cell_l), model.bottom(cell_r));
        let g = model.gravity;
        let c2 = reach.chezy * reach.chezy;
        let h_nom = model.nominal_level;
        let a_nom = 0.5 * (reach.area(h_nom, b_l) + reach.area(h_nom, b_r));
        let p_nom = reach.width + (h_nom - b_l) + (h_nom - b_r);
        let r_nom = a_nom / p_nom;
        let q_nom = model.nominal_discharge;
        Self {
            dt: model.grid.dt_hydraulic,
            dx: reach.dx(),
            width: reach.width,
            c2,
            g,
            eps: model.epsilon,
            sig: model.steepness / (2.0 * q_nom),
            b_l,
            b_r,
            press_lin: g * a_nom / reach.dx(),
            fric_lin: g * smooth_abs(q_nom, model.epsilon) / (a_nom * r_nom * c2),
        }
    }
}

/// Stencil slots of one momentum row. Old-level values are explicit data;
/// new-level values are the implicit unknowns.
pub(crate) const S_Q_NEXT: usize = 0;
pub(crate) const S_Q_PREV: usize = 1;
pub(crate) const S_HL_NEXT: usize = 2;
pub(crate) const S_HR_NEXT: usize = 3;
pub(crate) const S_HL_PREV: usize = 4;
pub(crate) const S_HR_PREV: usize = 5;
pub(crate) const S_QL_PREV: usize = 6;
pub(crate) const S_QR_PREV: usize = 7;

/// Momentum residual value and derivatives over the eight stencil slots.
pub(crate) struct FaceEval {
    pub value: f64,
    pub grad: [f64; 8],
    /// Upper-triangle `(i <= j)` Hessian entries, theta scaling included.
    pub hess: Vec<(usize, usize, f64)>,
}

/// Cell-centered convective flux `F = Qhat^2 / A` with upwind-weighted
/// `Qhat` from the two face discharges. Returns the value, the gradient
/// over `(qa, qb, h)` and the upper-triangle Hessian over the same order.
fn cell_flux(qa: f64, qb: f64, area: f64, width: f64, sig: f64) -> (f64, [f64; 3], [f64; 6]) {
    let w = sigmoid(sig * (qa + qb));
    let s1 = sig * w * (1.0 - w);
    let s2 = sig * sig * w * (1.0 - w) * (1.0 - 2.0 * w);
    let diff = qa - qb;
    let qh = w * qa + (1.0 - w) * qb;
    let qh_a = w + diff * s1;
    let qh_b = (1.0 - w) + diff * s1;
    let qh_aa = 2.0 * s1 + diff * s2;
    let qh_ab = diff * s2;
    let qh_bb = -2.0 * s1 + diff * s2;

    let f = qh * qh / area;
    let f_qh = 2.0 * qh / area;
    let da = width; // dA/dh for the cell's own level
    let grad = [f_qh * qh_a, f_qh * qh_b, -qh * qh / (area * area) * da];
    // order: (a,a), (a,b), (b,b), (a,h), (b,h), (h,h)
    let hess = [
        (2.0 / area) * qh_a * qh_a + f_qh * qh_aa,
        (2.0 / area) * qh_a * qh_b + f_qh * qh_ab,
        (2.0 / area) * qh_b * qh_b + f_qh * qh_bb,
        -f_qh / area * da * qh_a,
        -f_qh / area * da * qh_b,
        2.0 * qh * qh / (area * area * area) * da * da,
    ];
    (f, grad, hess)
}

/// Evaluates the blended momentum residual of one interior face.
pub(crate) fn momentum_face(p: &FaceParams, s: &[f64; 8], theta: f64) -> Result<FaceEval, SolveError> {
    let a_l = p.width * (s[S_HL_PREV] - p.b_l);
    let a_r = p.width * (s[S_HR_PREV] - p.b_r);
    if a_l <= 0.0 || a_r <= 0.0 {
        return Err(SolveError::Domain(format!(
            "dry cell: cross sections {a_l:.3}, {a_r:.3} m^2"
        )));
    }
    let a_f = 0.5 * (a_l + a_r);
    let p_f = p.width + (s[S_HL_PREV] - p.b_l) + (s[S_HR_PREV] - p.b_r);
    // friction denominator 1/(A R) = P / A^2 and its level derivatives
    let u = p_f / (a_f * a_f);
    let u_h = (a_f - p.width * p_f) / (a_f * a_f * a_f);
    let u_hh = (-0.5 * p.width) / (a_f * a_f * a_f)
        - 1.5 * p.width * (a_f - p.width * p_f) / (a_f * a_f * a_f * a_f);

    let sab = smooth_abs(s[S_Q_PREV], p.eps);
    let sab1 = smooth_abs_d1(s[S_Q_PREV], p.eps);
    let sab2 = smooth_abs_d2(s[S_Q_PREV], p.eps);
    let gc = p.g / p.c2;
    let fric = gc * sab * u;
    let press = p.g * a_f / p.dx;
    let dh_next = s[S_HR_NEXT] - s[S_HL_NEXT];

    // convective flux of the left and right cells, old level
    let (f_l, gl, hl) = cell_flux(s[S_QL_PREV], s[S_Q_PREV], a_l, p.width, p.sig);
    let (f_r, gr, hr) = cell_flux(s[S_Q_PREV], s[S_QR_PREV], a_r, p.width, p.sig);
    let conv = (f_r - f_l) / p.dx;

    let ddt = (s[S_Q_NEXT] - s[S_Q_PREV]) / p.dt;
    let full = ddt + conv + press * dh_next + fric * s[S_Q_NEXT];
    let lin = ddt + p.press_lin * dh_next + p.fric_lin * s[S_Q_NEXT];
    let value = theta * full + (1.0 - theta) * lin;

    let mut gf = [0.0f64; 8]; // gradient of the full residual
    gf[S_Q_NEXT] = 1.0 / p.dt + fric;
    gf[S_Q_PREV] = -1.0 / p.dt + (gr[0] - gl[1]) / p.dx + s[S_Q_NEXT] * gc * sab1 * u;
    gf[S_HL_NEXT] = -press;
    gf[S_HR_NEXT] = press;
    let press_h = p.g * (0.5 * p.width) / p.dx; // d press / d h_prev
    gf[S_HL_PREV] = -gl[2] / p.dx + press_h * dh_next + s[S_Q_NEXT] * gc * sab * u_h;
    gf[S_HR_PREV] = gr[2] / p.dx + press_h * dh_next + s[S_Q_NEXT] * gc * sab * u_h;
    gf[S_QL_PREV] = -gl[0] / p.dx;
    gf[S_QR_PREV] = gr[1] / p.dx;

    let mut grad = [0.0f64; 8];
    for i in 0..8 {
        grad[i] = theta * gf[i];
    }
    grad[S_Q_NEXT] += (1.0 - theta) * (1.0 / p.dt + p.fric_lin);
    grad[S_Q_PREV] += (1.0 - theta) * (-1.0 / p.dt);
    grad[S_HL_NEXT] += (1.0 - theta) * (-p.press_lin);
    grad[S_HR_NEXT] += (1.0 - theta) * p.press_lin;

    // Hessian of the full residual, scaled by theta. Upper triangle only.
    let mut hess: Vec<(usize, usize, f64)> = Vec::with_capacity(20);
    let mut push = |i: usize, j: usize, v: f64| {
        if v != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            hess.push((i, j, theta * v));
        }
    };
    // friction: (g/C^2) * q_next * sab(q_prev) * u(h_prev)
    push(S_Q_NEXT, S_Q_PREV, gc * sab1 * u);
    push(S_Q_NEXT, S_HL_PREV, gc * sab * u_h);
    push(S_Q_NEXT, S_HR_PREV, gc * sab * u_h);
    push(S_Q_PREV, S_Q_PREV, s[S_Q_NEXT] * gc * sab2 * u);
    push(S_Q_PREV, S_HL_PREV, s[S_Q_NEXT] * gc * sab1 * u_h);
    push(S_Q_PREV, S_HR_PREV, s[S_Q_NEXT] * gc * sab1 * u_h);
    push(S_HL_PREV, S_HL_PREV, s[S_Q_NEXT] * gc * sab * u_hh);
    push(S_HL_PREV, S_HR_PREV, s[S_Q_NEXT] * gc * sab * u_hh);
    push(S_HR_PREV, S_HR_PREV, s[S_Q_NEXT] * gc * sab * u_hh);
    // pressure: g * a_f(h_prev) * (h_next_r - h_next_l) / dx
    push(S_HL_NEXT, S_HL_PREV, -press_h);
    push(S_HL_NEXT, S_HR_PREV, -press_h);
    push(S_HR_NEXT, S_HL_PREV, press_h);
    push(S_HR_NEXT, S_HR_PREV, press_h);
    // convective term: -f_l/dx over (q_ll, q_f, h_l), +f_r/dx over
    // (q_f, q_rr, h_r)
    let cl = -1.0 / p.dx;
    push(S_QL_PREV, S_QL_PREV, cl * hl[0]);
    push(S_QL_PREV, S_Q_PREV, cl * hl[1]);
    push(S_Q_PREV, S_Q_PREV, cl * hl[2]);
    push(S_QL_PREV, S_HL_PREV, cl * hl[3]);
    push(S_Q_PREV, S_HL_PREV, cl * hl[4]);
    push(S_HL_PREV, S_HL_PREV, cl * hl[5]);
    let cr = 1.0 / p.dx;
    push(S_Q_PREV, S_Q_PREV, cr * hr[0]);
    push(S_Q_PREV, S_QR_PREV, cr * hr[1]);
    push(S_QR_PREV, S_QR_PREV, cr * hr[2]);
    push(S_Q_PREV, S_HR_PREV, cr * hr[3]);
    push(S_QR_PREV, S_HR_PREV, cr * hr[4]);
    push(S_HR_PREV, S_HR_PREV, cr * hr[5]);

    Ok(FaceEval { value, grad, hess })
}

pub(crate) fn face_slots(prev: &LevelState, next: &LevelState, face: usize) -> [f64; 8] {
    let (cell_l, cell_r) = (face - 1, face);
    [
        next.q[face],
        prev.q[face],
        next.h[cell_l],
        next.h[cell_r],
        prev.h[cell_l],
        prev.h[cell_r],
        prev.q[face - 1],
        prev.q[face + 1],
    ]
}

/// Continuity residuals, one per H node, for the step from `prev` to
/// `next`: `(A_next - A_prev)/dt + (Q_right - Q_left)/dx` with implicit
/// flows.
pub fn continuity_residual(model: &CascadeModel, prev: &LevelState, next: &LevelState) -> Vec<f64> {
    let dt = model.grid.dt_hydraulic;
    let mut out = Vec::with_capacity(model.num_cells());
    for cell in 0..model.num_cells() {
        let reach = &model.reaches[model.reach_of_cell(cell)];
        let da = reach.width * (next.h[cell] - prev.h[cell]);
        out.push(da / dt + (next.q[cell + 1] - next.q[cell]) / reach.dx());
    }
    out
}

/// Momentum residuals, one per interior face, blending the full
/// discretization (`theta`) with the linearized model (`1 - theta`).
/// Fails if any old-level cross section is not positive.
pub fn momentum_residual(
    model: &CascadeModel,
    prev: &LevelState,
    next: &LevelState,
    theta: f64,
) -> Result<Vec<f64>, SolveError> {
    let faces = model.interior_faces();
    let mut out = Vec::with_capacity(faces.len());
    for face in faces {
        let p = FaceParams::new(model, face);
        let s = face_slots(prev, next, face);
        out.push(momentum_face(&p, &s, theta)?.value);
    }
    Ok(out)
}
