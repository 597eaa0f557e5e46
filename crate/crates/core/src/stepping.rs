//! Time-step controllers and convergence monitoring.
//!
//! A controller turns the local signal speeds reported by a problem into the
//! next step size: a fixed CFL number, a geometric ramp of the CFL number, a
//! residual-driven step `dt = alpha0 * min_dx / |residual|_inf`, or per-cell
//! local steps (residual smoothing) for steady-state marches. The diffusive
//! stability bound is `dt <= dx^2/(2 nu)`, so the reported diffusive CFL
//! number `2 nu dt / dx^2` hits 1.0 exactly at the analytic boundary; the
//! unnormalized `nu dt / dx^2` is recorded alongside it as `cfl_raw`.

use crate::mesh::Grid;
use crate::scheme::{Field, Problem};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ControllerMode {
    FixedCfl { target: f64 },
    Ramp { start: f64, factor: f64, cap: f64 },
    ResidualDriven { alpha0: f64 },
    ResidualSmoothing { target: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SteppingError {
    #[error("no cell carries a wave speed or diffusivity; the CFL step is unbounded")]
    NoConstrainingPhysics,
    #[error("residual is zero; the run is already converged")]
    ZeroResidual,
    #[error("invalid controller parameter: {0}")]
    InvalidParameter(String),
}

/// Per-cell stable step at unit CFL: min(dx/ws, dx^2/(2 nu)), or None when
/// the cell has neither advection nor diffusion.
fn cell_stable_dt(problem: &dyn Problem, q: &Field, grid: &Grid, j: usize) -> Option<f64> {
    let dx = grid.cell_width(j);
    let ws = problem.wave_speed(grid, q, j);
    let nu = problem.diffusivity(j);
    let mut dt = f64::INFINITY;
    if ws > 0.0 {
        dt = dt.min(dx / ws);
    }
    if nu > 0.0 {
        dt = dt.min(dx * dx / (2.0 * nu));
    }
    dt.is_finite().then_some(dt)
}

/// Global CFL step: `target_cfl` times the most restrictive per-cell bound.
pub fn advective_cfl_dt(
    problem: &dyn Problem,
    q: &Field,
    grid: &Grid,
    target_cfl: f64,
) -> Result<f64, SteppingError> {
    if !(target_cfl > 0.0) {
        return Err(SteppingError::InvalidParameter(format!(
            "target_cfl must be positive, got {target_cfl}"
        )));
    }
    let dt_min = (0..grid.n_cells())
        .filter_map(|j| cell_stable_dt(problem, q, grid, j))
        .fold(f64::INFINITY, f64::min);
    if !dt_min.is_finite() {
        return Err(SteppingError::NoConstrainingPhysics);
    }
    Ok(target_cfl * dt_min)
}

/// Per-cell local steps at a common CFL number (residual smoothing).
pub fn residual_smoothing_dts(
    problem: &dyn Problem,
    q: &Field,
    grid: &Grid,
    target_cfl: f64,
) -> Result<Vec<f64>, SteppingError> {
    let global = advective_cfl_dt(problem, q, grid, target_cfl)?;
    Ok((0..grid.n_cells())
        .map(|j| {
            cell_stable_dt(problem, q, grid, j)
                .map(|dt| target_cfl * dt)
                .unwrap_or(global)
        })
        .collect())
}

/// Residual-driven step `dt = alpha0 * min_dx / residual_inf`.
pub fn residual_driven_dt(
    residual_inf: f64,
    grid: &Grid,
    alpha0: f64,
) -> Result<f64, SteppingError> {
    if residual_inf == 0.0 {
        return Err(SteppingError::ZeroResidual);
    }
    Ok(alpha0 * grid.min_cell_width() / residual_inf)
}

/// CFL numbers realized by `dt` at the most restrictive cell:
/// `(advective + diffusive(2 nu dt/dx^2), diffusive nu dt/dx^2 unnormalized)`.
pub fn cfl_numbers(problem: &dyn Problem, q: &Field, grid: &Grid, dt: f64) -> (f64, f64) {
    let mut cfl: f64 = 0.0;
    let mut cfl_raw: f64 = 0.0;
    for j in 0..grid.n_cells() {
        let dx = grid.cell_width(j);
        let ws = problem.wave_speed(grid, q, j);
        let nu = problem.diffusivity(j);
        let c = dt * (ws / dx + 2.0 * nu / (dx * dx));
        if c > cfl {
            cfl = c;
            cfl_raw = dt * (ws / dx + nu / (dx * dx));
        }
    }
    (cfl, cfl_raw)
}

#[derive(Clone, Debug)]
pub struct CflController {
    pub mode: ControllerMode,
    steps_taken: usize,
}

/// Step size for the next time step: one global value or per-cell values.
#[derive(Clone, Debug)]
pub enum ControllerStep {
    Global(f64),
    PerCell(Vec<f64>),
}

impl CflController {
    pub fn new(mode: ControllerMode) -> Self {
        CflController {
            mode,
            steps_taken: 0,
        }
    }

    /// Next step size. `last_residual_inf` feeds the residual-driven mode and
    /// is ignored by the others; pass the initial residual before step one.
    pub fn next_step(
        &mut self,
        problem: &dyn Problem,
        q: &Field,
        grid: &Grid,
        last_residual_inf: f64,
    ) -> Result<ControllerStep, SteppingError> {
        let step = match self.mode {
            ControllerMode::FixedCfl { target } => {
                ControllerStep::Global(advective_cfl_dt(problem, q, grid, target)?)
            }
            ControllerMode::Ramp { start, factor, cap } => {
                if !(factor > 1.0) {
                    return Err(SteppingError::InvalidParameter(format!(
                        "ramp factor must exceed 1, got {factor}"
                    )));
                }
                let cfl = (start * factor.powi(self.steps_taken as i32)).min(cap);
                ControllerStep::Global(advective_cfl_dt(problem, q, grid, cfl)?)
            }
            ControllerMode::ResidualDriven { alpha0 } => {
                ControllerStep::Global(residual_driven_dt(last_residual_inf, grid, alpha0)?)
            }
            ControllerMode::ResidualSmoothing { target } => {
                ControllerStep::PerCell(residual_smoothing_dts(problem, q, grid, target)?)
            }
        };
        self.steps_taken += 1;
        Ok(step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    Stagnated,
    Diverged,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub time: f64,
    pub dt: f64,
    pub cfl: f64,
    pub cfl_raw: f64,
    pub residual_inf: f64,
    pub inner_iters: usize,
}

/// Convergence history of one run, serializable to CSV.
#[derive(Clone, Debug, Default)]
pub struct History {
    pub records: Vec<HistoryRecord>,
    pub outcome: Option<Outcome>,
    /// prefix_best[i] = min residual over records[0..=i]; kept incrementally
    /// so the stagnation check stays O(1) per step.
    prefix_best: Vec<f64>,
}

impl History {
    pub fn push(&mut self, record: HistoryRecord) {
        debug_assert!(self
            .records
            .last()
            .is_none_or(|last| record.iteration > last.iteration));
        let best = self
            .prefix_best
            .last()
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(record.residual_inf);
        self.prefix_best.push(best);
        self.records.push(record);
    }

    /// Best (smallest) residual among the first `i + 1` records.
    pub fn best_residual_up_to(&self, i: usize) -> f64 {
        self.prefix_best[i]
    }

    pub fn last_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual_inf)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,time,dt,cfl,cfl_raw,residual_inf,inner_iters\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration, r.time, r.dt, r.cfl, r.cfl_raw, r.residual_inf, r.inner_iters
            )
            .expect("string write cannot fail");
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub divergence_factor: f64,
    pub stagnation_window: usize,
    /// Minimum relative improvement of the best residual over the trailing
    /// window; less than this and the run is declared stagnated.
    pub stagnation_improvement: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            abs_tol: 0.0,
            rel_tol: 1e-8,
            divergence_factor: 1e8,
            stagnation_window: 2000,
            stagnation_improvement: 0.01,
        }
    }
}

/// Classify the run after the latest record; `None` means keep going.
pub fn monitor(history: &History, config: &MonitorConfig) -> Option<Outcome> {
    let records = &history.records;
    let last = records.last()?;
    let initial = records[0].residual_inf;
    let res = last.residual_inf;
    if !res.is_finite() || res >= config.divergence_factor * initial {
        return Some(Outcome::Diverged);
    }
    if res <= config.abs_tol || res <= config.rel_tol * initial {
        return Some(Outcome::Converged);
    }
    if records.len() > config.stagnation_window {
        let window_start = records.len() - 1 - config.stagnation_window;
        let best_before = history.best_residual_up_to(window_start);
        let best_now = history.best_residual_up_to(records.len() - 1);
        if best_now > best_before * (1.0 - config.stagnation_improvement) {
            return Some(Outcome::Stagnated);
        }
    }
    None
}
