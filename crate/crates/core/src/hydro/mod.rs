//! Cascaded-river optimal control: semi-implicit staggered-grid
//! shallow-water dynamics with homotopy blending to a linearized model,
//! binary weir flows, and a water-level objective.
//!
//! Geometry follows the staggered convention: water levels `H` live at
//! cell centers, discharges `Q` at cell faces. Face `f` is the left face
//! of cell `f`; a reach with `N` cells contributes `H_1..H_N` and
//! `Q_0..Q_N`, the last face being the reach's weir. Weir discharges are
//! the binary controls: `low + (high - low) * delta`, chosen per control
//! instant and interpolated linearly onto the hydraulic steps.

mod build;
mod residuals;
mod steady;

pub use build::{build_river_problem, trajectory_from_primal, weir_flow_table};
pub use residuals::{continuity_residual, momentum_residual, smooth_abs};
pub use steady::{simulate, solve_steady_state, total_volume};

use serde::Deserialize;

use crate::error::SolveError;

pub const GRAVITY: f64 = 9.81;

/// Water levels stay at least this far above the channel bottom, as a
/// lower variable bound in the optimization problem.
pub const LEVEL_MARGIN: f64 = 0.01;

/// One channel reach between control structures.
#[derive(Debug, Clone)]
pub struct ReachGeometry {
    /// Reach length in meters.
    pub length: f64,
    /// Number of grid cells.
    pub cells: usize,
    /// Channel width in meters; cross section `A(H) = width * (H - Hb)`,
    /// wetted perimeter `P(H) = width + 2 * (H - Hb)`.
    pub width: f64,
    /// Chezy friction coefficient in m^(1/2)/s.
    pub chezy: f64,
    /// Bottom level at each H node, length `cells`, meters.
    pub bottom: Vec<f64>,
}

impl ReachGeometry {
    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn area(&self, h: f64, bottom: f64) -> f64 {
        self.width * (h - bottom)
    }

    pub fn wetted_perimeter(&self, h: f64, bottom: f64) -> f64 {
        self.width + 2.0 * (h - bottom)
    }

    fn validate(&self) -> Result<(), SolveError> {
        if self.cells < 2 {
            return Err(SolveError::Config("a reach needs at least 2 cells".into()));
        }
        if self.bottom.len() != self.cells {
            return Err(SolveError::Config(format!(
                "bottom profile has {} samples, expected {}",
                self.bottom.len(),
                self.cells
            )));
        }
        if self.length <= 0.0 || self.width <= 0.0 || self.chezy <= 0.0 {
            return Err(SolveError::Config(
                "reach length, width and chezy must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Hydraulic and control time grids.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    /// Horizon in seconds.
    pub horizon: f64,
    /// Hydraulic step in seconds.
    pub dt_hydraulic: f64,
    /// Control step in seconds; must be an integer multiple of the
    /// hydraulic step, and the horizon an integer multiple of it.
    pub dt_control: f64,
}

impl TimeGrid {
    pub fn hydraulic_steps(&self) -> usize {
        (self.horizon / self.dt_hydraulic).round() as usize
    }

    pub fn control_steps(&self) -> usize {
        (self.horizon / self.dt_control).round() as usize
    }

    fn validate(&self) -> Result<(), SolveError> {
        let almost_int = |x: f64| (x - x.round()).abs() < 1e-9 && x.round() >= 1.0;
        if !almost_int(self.dt_control / self.dt_hydraulic) {
            return Err(SolveError::Config(format!(
                "control step {} is not an integer multiple of hydraulic step {}",
                self.dt_control, self.dt_hydraulic
            )));
        }
        if !almost_int(self.horizon / self.dt_control) {
            return Err(SolveError::Config(format!(
                "horizon {} is not an integer multiple of control step {}",
                self.horizon, self.dt_control
            )));
        }
        Ok(())
    }
}

/// Inflow boundary condition: linear interpolation between samples,
/// constant extrapolation beyond the ends.
#[derive(Debug, Clone)]
pub struct Hydrograph {
    samples: Vec<(f64, f64)>,
}

impl Hydrograph {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SolveError> {
        if samples.is_empty() {
            return Err(SolveError::Config("hydrograph needs at least one sample".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SolveError::Config(
                "hydrograph sample times must be strictly increasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    /// Ramp from `q_start` at `t = 0` to `q_end` at `t_ramp`, constant
    /// afterwards.
    pub fn ramp(q_start: f64, q_end: f64, t_ramp: f64) -> Self {
        Self {
            samples: vec![(0.0, q_start), (t_ramp, q_end)],
        }
    }

    pub fn constant(q: f64) -> Self {
        Self {
            samples: vec![(0.0, q)],
        }
    }

    /// Parses CSV with a `time_s,inflow_m3s` header.
    pub fn from_csv_str(text: &str) -> Result<Self, SolveError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "time_s,inflow_m3s" => {}
            other => {
                return Err(SolveError::Config(format!(
                    "hydrograph CSV must start with 'time_s,inflow_m3s', got {other:?}"
                )))
            }
        }
        let mut samples = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| SolveError::Config(format!("bad time on CSV line {}", idx + 2)))?;
            let q: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| SolveError::Config(format!("bad inflow on CSV line {}", idx + 2)))?;
            samples.push((t, q));
        }
        Self::new(samples)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= s[0].0 {
            return s[0].1;
        }
        for w in s.windows(2) {
            if t <= w[1].0 {
                let alpha = (t - w[0].0) / (w[1].0 - w[0].0);
                return (1.0 - alpha) * w[0].1 + alpha * w[1].1;
            }
        }
        s[s.len() - 1].1
    }
}

/// Binary weir flow levels.
#[derive(Debug, Clone, Copy)]
pub struct WeirSpec {
    /// Discharge when the gate binary is 0, m^3/s.
    pub low_flow: f64,
    /// Discharge when the gate binary is 1, m^3/s.
    pub high_flow: f64,
}

/// Kind of a grid face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Face 0: the upstream inflow boundary.
    Inflow,
    /// A reach-terminating adjustable weir, by weir index.
    Weir(usize),
    /// A face interior to a reach.
    Interior,
}

/// The full cascade: geometry, time grids, linearization point, smoothing
/// parameters, boundary data and initial profiles.
#[derive(Debug, Clone)]
pub struct CascadeModel {
    pub reaches: Vec<ReachGeometry>,
    pub grid: TimeGrid,
    /// Nominal level for the linearized momentum model, meters.
    pub nominal_level: f64,
    /// Nominal discharge for the linearized model and the upwind sigmoid,
    /// m^3/s.
    pub nominal_discharge: f64,
    /// Smoothing width of the friction absolute value.
    pub epsilon: f64,
    /// Steepness factor of the convective upwind sigmoid.
    pub steepness: f64,
    pub inflow: Hydrograph,
    /// Initial water level at each global H node (used to pin the steady
    /// state and as its Newton guess).
    pub initial_levels: Vec<f64>,
    /// Uniform initial discharge, m^3/s.
    pub initial_discharge: f64,
    pub weir: WeirSpec,
    pub gravity: f64,
}

impl CascadeModel {
    /// Total number of H nodes.
    pub fn num_cells(&self) -> usize {
        self.reaches.iter().map(|r| r.cells).sum()
    }

    /// Total number of faces, boundaries included.
    pub fn num_faces(&self) -> usize {
        self.num_cells() + 1
    }

    pub fn num_weirs(&self) -> usize {
        self.reaches.len()
    }

    /// Reach index of a global cell.
    pub fn reach_of_cell(&self, cell: usize) -> usize {
        let mut offset = 0;
        for (r, reach) in self.reaches.iter().enumerate() {
            if cell < offset + reach.cells {
                return r;
            }
            offset += reach.cells;
        }
        panic!("cell {cell} out of range");
    }

    /// First global cell of a reach.
    pub fn reach_offset(&self, reach: usize) -> usize {
        self.reaches[..reach].iter().map(|r| r.cells).sum()
    }

    pub fn face_kind(&self, face: usize) -> FaceKind {
        if face == 0 {
            return FaceKind::Inflow;
        }
        let mut boundary = 0;
        for (w, reach) in self.reaches.iter().enumerate() {
            boundary += reach.cells;
            if face == boundary {
                return FaceKind::Weir(w);
            }
        }
        FaceKind::Interior
    }

    /// Global bottom level at an H node.
    pub fn bottom(&self, cell: usize) -> f64 {
        let r = self.reach_of_cell(cell);
        self.reaches[r].bottom[cell - self.reach_offset(r)]
    }

    /// Interior faces in ascending order.
    pub fn interior_faces(&self) -> Vec<usize> {
        (1..self.num_faces() - 1)
            .filter(|&f| self.face_kind(f) == FaceKind::Interior)
            .collect()
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.reaches.is_empty() {
            return Err(SolveError::Config("model needs at least one reach".into()));
        }
        for r in &self.reaches {
            r.validate()?;
        }
        self.grid.validate()?;
        if self.initial_levels.len() != self.num_cells() {
            return Err(SolveError::Config(format!(
                "initial level profile has {} samples, expected {}",
                self.initial_levels.len(),
                self.num_cells()
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(SolveError::Config("epsilon must be positive".into()));
        }
        if self.weir.low_flow >= self.weir.high_flow {
            return Err(SolveError::Config(
                "weir low flow must be below high flow".into(),
            ));
        }
        for (cell, &h0) in self.initial_levels.iter().enumerate() {
            if h0 <= self.bottom(cell) {
                return Err(SolveError::Config(format!(
                    "initial level at cell {cell} is below the bottom"
                )));
            }
        }
        Ok(())
    }

    /// The reference cascade: `num_weirs` identical reaches of 5 cells over
    /// 10 km, 24 h horizon, 10 min hydraulic and 4 h control steps,
    /// inflow ramping 100 to 300 m^3/s over 12 h, weir gates switching
    /// between 100 and 200 m^3/s.
    pub fn reference(num_weirs: usize) -> Result<Self, SolveError> {
        Self::reference_with_horizon(num_weirs, 24.0 * 3600.0)
    }

    /// Reference cascade with a shortened horizon (still a multiple of the
    /// 4 h control step).
    pub fn reference_with_horizon(num_weirs: usize, horizon_s: f64) -> Result<Self, SolveError> {
        if num_weirs == 0 {
            return Err(SolveError::Config("need at least one weir".into()));
        }
        let cells = 5usize;
        let bottom = linear_profile(-4.90, -5.10, cells);
        let levels0 = linear_profile(0.000, -0.222, cells);
        let reach = ReachGeometry {
            length: 10_000.0,
            cells,
            width: 50.0,
            chezy: 40.0,
            bottom,
        };
        let model = Self {
            reaches: vec![reach; num_weirs],
            grid: TimeGrid {
                horizon: horizon_s,
                dt_hydraulic: 600.0,
                dt_control: 4.0 * 3600.0,
            },
            nominal_level: 0.0,
            nominal_discharge: 100.0,
            epsilon: 1e-12,
            steepness: 10.0,
            inflow: Hydrograph::ramp(100.0, 300.0, 12.0 * 3600.0),
            initial_levels: levels0
                .iter()
                .cycle()
                .take(cells * num_weirs)
                .copied()
                .collect(),
            initial_discharge: 100.0,
            weir: WeirSpec {
                low_flow: 100.0,
                high_flow: 200.0,
            },
            gravity: GRAVITY,
        };
        model.validate()?;
        Ok(model)
    }

    /// Parses a model from the TOML configuration format.
    pub fn from_toml_str(text: &str) -> Result<Self, SolveError> {
        let cfg: ModelConfig = toml::from_str(text)
            .map_err(|e| SolveError::Config(format!("bad model config: {e}")))?;
        cfg.into_model()
    }
}

/// Linear profile from `start` to `end` sampled at `n` nodes, both
/// endpoints included.
pub fn linear_profile(start: f64, end: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}

/// State of one hydraulic time level: levels at all H nodes, discharges at
/// all faces, boundaries included.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub h: Vec<f64>,
    pub q: Vec<f64>,
}

/// A trajectory over hydraulic time levels.
#[derive(Debug, Clone)]
pub struct HydraulicState {
    pub times: Vec<f64>,
    pub levels: Vec<LevelState>,
}

impl HydraulicState {
    /// Writes the trajectory as result CSV rows, H nodes then Q nodes per
    /// time level. Location ids follow the staggered numbering: `H1..` at
    /// cell centers (1-based), `Q0..` at faces.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,location_id,H_m,Q_m3s")?;
        for (t, level) in self.times.iter().zip(self.levels.iter()) {
            for (k, h) in level.h.iter().enumerate() {
                writeln!(w, "{},H{},{},", t, k + 1, h)?;
            }
            for (f, q) in level.q.iter().enumerate() {
                writeln!(w, "{},Q{},,{}", t, f, q)?;
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ModelConfig {
    time: TimeConfig,
    geometry: GeometryConfig,
    linearization: LinearizationConfig,
    smoothing: SmoothingConfig,
    initial: InitialConfig,
    inflow: InflowConfig,
    weirs: WeirConfig,
}

#[derive(Deserialize)]
struct TimeConfig {
    horizon_s: f64,
    hydraulic_dt_s: f64,
    control_dt_s: f64,
}

#[derive(Deserialize)]
struct GeometryConfig {
    reaches: usize,
    cells_per_reach: usize,
    reach_length_m: f64,
    width_m: f64,
    chezy: f64,
    bottom_start_m: f64,
    bottom_end_m: f64,
}

#[derive(Deserialize)]
struct LinearizationConfig {
    h_nominal_m: f64,
    q_nominal_m3s: f64,
}

#[derive(Deserialize)]
struct SmoothingConfig {
    epsilon: f64,
    steepness: f64,
}

#[derive(Deserialize)]
struct InitialConfig {
    level_start_m: f64,
    level_end_m: f64,
    discharge_m3s: f64,
}

#[derive(Deserialize)]
struct InflowConfig {
    hydrograph_csv: Option<String>,
    ramp_start_m3s: Option<f64>,
    ramp_end_m3s: Option<f64>,
    ramp_hours: Option<f64>,
}

#[derive(Deserialize)]
struct WeirConfig {
    low_flow_m3s: f64,
    high_flow_m3s: f64,
}

impl ModelConfig {
    fn into_model(self) -> Result<CascadeModel, SolveError> {
        let cells = self.geometry.cells_per_reach;
        let reach = ReachGeometry {
            length: self.geometry.reach_length_m,
            cells,
            width: self.geometry.width_m,
            chezy: self.geometry.chezy,
            bottom: linear_profile(self.geometry.bottom_start_m, self.geometry.bottom_end_m, cells),
        };
        let inflow = if let Some(path) = &self.inflow.hydrograph_csv {
            let text = std::fs::read_to_string(path).map_err(|e| {
                SolveError::Config(format!("cannot read hydrograph {path}: {e}"))
            })?;
            Hydrograph::from_csv_str(&text)?
        } else {
            let start = self.inflow.ramp_start_m3s.unwrap_or(100.0);
            let end = self.inflow.ramp_end_m3s.unwrap_or(start);
            let hours = self.inflow.ramp_hours.unwrap_or(12.0);
            Hydrograph::ramp(start, end, hours * 3600.0)
        };
        let levels0 = linear_profile(self.initial.level_start_m, self.initial.level_end_m, cells);
        let model = CascadeModel {
            reaches: vec![reach; self.geometry.reaches],
            grid: TimeGrid {
                horizon: self.time.horizon_s,
                dt_hydraulic: self.time.hydraulic_dt_s,
                dt_control: self.time.control_dt_s,
            },
            nominal_level: self.linearization.h_nominal_m,
            nominal_discharge: self.linearization.q_nominal_m3s,
            epsilon: self.smoothing.epsilon,
            steepness: self.smoothing.steepness,
            inflow,
            initial_levels: levels0
                .iter()
                .cycle()
                .take(cells * self.geometry.reaches)
                .copied()
                .collect(),
            initial_discharge: self.initial.discharge_m3s,
            weir: WeirSpec {
                low_flow: self.weirs.low_flow_m3s,
                high_flow: self.weirs.high_flow_m3s,
            },
            gravity: GRAVITY,
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_shape() {
        let m = CascadeModel::reference(1).unwrap();
        assert_eq!(m.num_cells(), 5);
        assert_eq!(m.num_faces(), 6);
        assert_eq!(m.grid.hydraulic_steps(), 144);
        assert_eq!(m.grid.control_steps(), 6);
        assert_eq!(m.face_kind(0), FaceKind::Inflow);
        assert_eq!(m.face_kind(5), FaceKind::Weir(0));
        assert_eq!(m.interior_faces(), vec![1, 2, 3, 4]);

        let m2 = CascadeModel::reference(2).unwrap();
        assert_eq!(m2.num_cells(), 10);
        assert_eq!(m2.face_kind(5), FaceKind::Weir(0));
        assert_eq!(m2.face_kind(10), FaceKind::Weir(1));
        assert_eq!(m2.interior_faces().len(), 8);
    }

    #[test]
    fn profiles_hit_both_endpoints() {
        let p = linear_profile(0.0, -0.222, 5);
        assert_eq!(p[0], 0.0);
        assert!((p[4] + 0.222).abs() < 1e-15);
        assert!((p[2] + 0.111).abs() < 1e-15);
    }

    #[test]
    fn hydrograph_interpolates_and_clamps() {
        let h = Hydrograph::ramp(100.0, 300.0, 12.0 * 3600.0);
        assert_eq!(h.value_at(0.0), 100.0);
        assert_eq!(h.value_at(6.0 * 3600.0), 200.0);
        assert_eq!(h.value_at(24.0 * 3600.0), 300.0);
    }

    #[test]
    fn hydrograph_csv_parses() {
        let h = Hydrograph::from_csv_str("time_s,inflow_m3s\n0,100\n3600,150\n").unwrap();
        assert_eq!(h.value_at(1800.0), 125.0);
        assert!(Hydrograph::from_csv_str("wrong,header\n0,1\n").is_err());
    }

    #[test]
    fn time_grid_divisibility_enforced() {
        let m = CascadeModel::reference_with_horizon(1, 5.0 * 3600.0);
        assert!(m.is_err(), "5 h is not a multiple of the 4 h control step");
    }

    #[test]
    fn toml_config_round_trips_reference_shape() {
        let text = r#"
[time]
horizon_s = 86400.0
hydraulic_dt_s = 600.0
control_dt_s = 14400.0

[geometry]
reaches = 1
cells_per_reach = 5
reach_length_m = 10000.0
width_m = 50.0
chezy = 40.0
bottom_start_m = -4.90
bottom_end_m = -5.10

[linearization]
h_nominal_m = 0.0
q_nominal_m3s = 100.0

[smoothing]
epsilon = 1e-12
steepness = 10.0

[initial]
level_start_m = 0.0
level_end_m = -0.222
discharge_m3s = 100.0

[inflow]
ramp_start_m3s = 100.0
ramp_end_m3s = 300.0
ramp_hours = 12.0

[weirs]
low_flow_m3s = 100.0
high_flow_m3s = 200.0
"#;
        let m = CascadeModel::from_toml_str(text).unwrap();
        let r = CascadeModel::reference(1).unwrap();
        assert_eq!(m.num_cells(), r.num_cells());
        assert_eq!(m.grid.hydraulic_steps(), r.grid.hydraulic_steps());
        assert_eq!(m.reaches[0].bottom, r.reaches[0].bottom);
    }
}
