//! The theta-scheme defect-correction stepping engine.
//!
//! One time step runs an inner loop of
//!
//! ```text
//! RHS = -(q_iter - q_old)/dt + theta*H(q_iter) + (1-theta)*H(q_old)
//! (I/dt + theta*A~) dq = RHS,    q_iter += dq
//! ```
//!
//! where `A~` is the configured truncation of the Jacobian A = -dH/dq. The
//! residual uses the problem's full discretization, so inner iterations drive
//! every matrix level toward the same update; the truncation only changes how
//! fast they get there and how large a step survives.

use crate::linalg::{BlockTriDiagonal, DiagonalApprox, LinalgError, TriDiagonal};
use crate::mesh::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficient-matrix truncation level, ordered from fully explicit to fully
/// implicit (in one spatial dimension).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixLevel {
    Identity,
    Diagonal,
    BlockDiagonal,
    Tridiagonal,
    BlockTridiagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRule {
    Fixed,
    /// theta_eff = min(1, (1 + alpha*dt)/2): Crank-Nicolson for small steps,
    /// fully implicit as dt grows.
    DampedCn {
        alpha: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub theta: f64,
    pub matrix_level: MatrixLevel,
    pub inner_iterations: usize,
    pub inner_tolerance: f64,
    pub theta_rule: ThetaRule,
    /// Implicitness of the assembled matrix when it should differ from the
    /// RHS blend: a Crank-Nicolson residual driven through a fully implicit
    /// (theta = 1) matrix keeps second-order accuracy while the stronger
    /// diagonal keeps the inner iteration contractive at large CFL numbers.
    /// `None` reuses the RHS theta.
    pub matrix_theta: Option<f64>,
    /// Rebuild the Jacobian from the current iterate each inner iteration
    /// (Newton-like) unless frozen.
    pub frozen_jacobian: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            theta: 1.0,
            matrix_level: MatrixLevel::Diagonal,
            inner_iterations: 1,
            inner_tolerance: 1e-3,
            theta_rule: ThetaRule::Fixed,
            matrix_theta: None,
            frozen_jacobian: false,
        }
    }
}

impl SchemeConfig {
    pub fn effective_theta(&self, dt: f64) -> f64 {
        match self.theta_rule {
            ThetaRule::Fixed => self.theta,
            ThetaRule::DampedCn { alpha } => (0.5 * (1.0 + alpha * dt)).min(1.0),
        }
    }
}

/// Per-cell vector of M variables, cell-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    n_cells: usize,
    n_vars: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n_cells: usize, n_vars: usize) -> Self {
        Field {
            n_cells,
            n_vars,
            data: vec![0.0; n_cells * n_vars],
        }
    }

    pub fn from_fn(n_cells: usize, n_vars: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut field = Field::zeros(n_cells, n_vars);
        for j in 0..n_cells {
            for v in 0..n_vars {
                field.set(j, v, f(j, v));
            }
        }
        field
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    #[inline]
    pub fn get(&self, cell: usize, var: usize) -> f64 {
        self.data[cell * self.n_vars + var]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, var: usize, value: f64) {
        self.data[cell * self.n_vars + var] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &[f64]) {
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }
}

/// Solution state: committed time level plus the working iterate.
#[derive(Clone, Debug)]
pub struct State {
    pub q_old: Field,
    pub q_iter: Field,
    pub time: f64,
    pub step_index: usize,
}

impl State {
    pub fn new(initial: Field) -> Self {
        State {
            q_iter: initial.clone(),
            q_old: initial,
            time: 0.0,
            step_index: 0,
        }
    }
}

/// Global or per-cell (local pseudo-time) step size.
#[derive(Clone, Debug)]
pub enum TimeStep {
    Global(f64),
    PerCell(Vec<f64>),
}

impl TimeStep {
    pub fn inv(&self, cell: usize) -> f64 {
        match self {
            TimeStep::Global(dt) => 1.0 / dt,
            TimeStep::PerCell(dts) => 1.0 / dts[cell],
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            TimeStep::Global(dt) => *dt,
            TimeStep::PerCell(dts) => dts.iter().fold(0.0f64, |a, &b| a.max(b)),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            TimeStep::Global(dt) => *dt,
            TimeStep::PerCell(dts) => dts.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        }
    }
}

/// Jacobian stencil contributions of one cell: the coupling blocks to the
/// lower neighbor, itself, and the upper neighbor, each `m x m` row-major
/// (length-1 for scalar problems). Entries belong to A = -dH/dq; conservative
/// upwind/diffusive discretizations produce non-negative diagonal entries.
#[derive(Clone, Debug)]
pub struct JacobianBlocks {
    pub m: usize,
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

/// A test problem: spatial operator H = -Lq V + f, its approximate Jacobian
/// stencil, and the local signal speeds that bound the stable time step.
pub trait Problem {
    fn n_vars(&self) -> usize;

    /// H(q) at simulation time `time` per cell, boundary conditions included.
    fn spatial_operator(&self, grid: &Grid, q: &Field, time: f64) -> Field;

    /// Stencil blocks of A = -dH/dq for cell `j`. Couplings to Dirichlet
    /// boundary values are constants and must be reported as zero blocks.
    fn jacobian_contributions(&self, grid: &Grid, q: &Field, j: usize) -> JacobianBlocks;

    /// Local advective signal speed |V| + V_s.
    fn wave_speed(&self, grid: &Grid, q: &Field, j: usize) -> f64;

    fn diffusivity(&self, j: usize) -> f64;

    /// Enforce boundary values / floors directly on the iterate. Problems
    /// whose boundaries enter purely through ghost fluxes leave this empty.
    fn apply_boundary_conditions(&self, _grid: &Grid, _q: &mut Field, _time: f64) {}

    /// Physical admissibility of a candidate committed state.
    fn validate_state(&self, q: &Field) -> bool {
        q.is_finite()
    }
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("non-finite values encountered at inner iteration {inner} (divergence)")]
    NonFinite { inner: usize },
    #[error("negative Jacobian diagonal {value} at cell {cell}, variable {var}; the truncated matrix assumes non-negative diagonal contributions")]
    NegativeDiagonal { cell: usize, var: usize, value: f64 },
    #[error("candidate state rejected by problem validation (positivity floor)")]
    StateRejected,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Assembled linear system of one inner iteration.
#[derive(Clone, Debug)]
pub enum AssembledSystem {
    Identity {
        inv_dt: Vec<f64>,
        n_vars: usize,
    },
    Diagonal(DiagonalApprox),
    /// One scalar tridiagonal system per variable (cross-variable couplings
    /// truncated away).
    Tridiagonal(Vec<TriDiagonal>),
    BlockTridiagonal(BlockTriDiagonal),
}

impl AssembledSystem {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match self {
            AssembledSystem::Identity { inv_dt, n_vars } => {
                let m = *n_vars;
                let mut x = vec![0.0; rhs.len()];
                for j in 0..inv_dt.len() {
                    for v in 0..m {
                        x[j * m + v] = rhs[j * m + v] / inv_dt[j];
                    }
                }
                Ok(x)
            }
            AssembledSystem::Diagonal(d) => d.solve(rhs),
            AssembledSystem::Tridiagonal(systems) => {
                let m = systems.len();
                let n = systems[0].n();
                let mut x = vec![0.0; rhs.len()];
                for (v, sys) in systems.iter().enumerate() {
                    let rv: Vec<f64> = (0..n).map(|j| rhs[j * m + v]).collect();
                    let xv = sys.solve(&rv)?;
                    for j in 0..n {
                        x[j * m + v] = xv[j];
                    }
                }
                Ok(x)
            }
            AssembledSystem::BlockTridiagonal(b) => b.solve(rhs),
        }
    }
}

/// RHS of the theta-scheme at the current iterate.
pub fn evaluate_rhs(
    problem: &dyn Problem,
    state: &State,
    grid: &Grid,
    dt: &TimeStep,
    theta_eff: f64,
) -> Result<Field, SchemeError> {
    let h_old = problem.spatial_operator(grid, &state.q_old, state.time);
    let h_new = problem.spatial_operator(grid, &state.q_iter, state.time + dt.max());
    let rhs = compose_rhs(state, dt, theta_eff, &h_new, &h_old);
    if !rhs.is_finite() {
        return Err(SchemeError::NonFinite { inner: 0 });
    }
    Ok(rhs)
}

fn compose_rhs(
    state: &State,
    dt: &TimeStep,
    theta_eff: f64,
    h_new: &Field,
    h_old: &Field,
) -> Field {
    let m = state.q_old.n_vars();
    Field::from_fn(state.q_old.n_cells(), m, |j, v| {
        -(state.q_iter.get(j, v) - state.q_old.get(j, v)) * dt.inv(j)
            + theta_eff * h_new.get(j, v)
            + (1.0 - theta_eff) * h_old.get(j, v)
    })
}

/// Build `I/dt + theta*A~` at the requested truncation level from the current
/// iterate `q`.
pub fn assemble(
    problem: &dyn Problem,
    q: &Field,
    grid: &Grid,
    dt: &TimeStep,
    theta_eff: f64,
    level: MatrixLevel,
) -> Result<AssembledSystem, SchemeError> {
    let n = grid.n_cells();
    let m = problem.n_vars();
    let inv_dt: Vec<f64> = (0..n).map(|j| dt.inv(j)).collect();

    if level == MatrixLevel::Identity {
        return Ok(AssembledSystem::Identity { inv_dt, n_vars: m });
    }

    let blocks: Vec<JacobianBlocks> = (0..n)
        .map(|j| problem.jacobian_contributions(grid, q, j))
        .collect();
    if theta_eff > 0.0 {
        for (j, b) in blocks.iter().enumerate() {
            for v in 0..m {
                let d = b.diag[v * m + v];
                if d < 0.0 {
                    return Err(SchemeError::NegativeDiagonal {
                        cell: j,
                        var: v,
                        value: d,
                    });
                }
            }
        }
    }

    match level {
        MatrixLevel::Identity => unreachable!(),
        MatrixLevel::Diagonal => {
            let diag: Vec<f64> = (0..n * m)
                .map(|k| {
                    let (j, v) = (k / m, k % m);
                    inv_dt[j] + theta_eff * blocks[j].diag[v * m + v]
                })
                .collect();
            Ok(AssembledSystem::Diagonal(DiagonalApprox::Scalar(diag)))
        }
        MatrixLevel::BlockDiagonal => {
            let dmod: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut b: Vec<f64> = blocks[j].diag.iter().map(|x| theta_eff * x).collect();
                    for v in 0..m {
                        b[v * m + v] += inv_dt[j];
                    }
                    b
                })
                .collect();
            Ok(AssembledSystem::Diagonal(DiagonalApprox::Block {
                m,
                blocks: dmod,
            }))
        }
        MatrixLevel::Tridiagonal => {
            let systems = (0..m)
                .map(|v| TriDiagonal {
                    sub: (1..n)
                        .map(|j| theta_eff * blocks[j].sub[v * m + v])
                        .collect(),
                    diag: (0..n)
                        .map(|j| inv_dt[j] + theta_eff * blocks[j].diag[v * m + v])
                        .collect(),
                    sup: (0..n - 1)
                        .map(|j| theta_eff * blocks[j].sup[v * m + v])
                        .collect(),
                })
                .collect();
            Ok(AssembledSystem::Tridiagonal(systems))
        }
        MatrixLevel::BlockTridiagonal => {
            let scale = |b: &[f64]| -> Vec<f64> { b.iter().map(|x| theta_eff * x).collect() };
            let sys = BlockTriDiagonal {
                m,
                sub: (1..n).map(|j| scale(&blocks[j].sub)).collect(),
                diag: (0..n)
                    .map(|j| {
                        let mut b = scale(&blocks[j].diag);
                        for v in 0..m {
                            b[v * m + v] += inv_dt[j];
                        }
                        b
                    })
                    .collect(),
                sup: (0..n - 1).map(|j| scale(&blocks[j].sup)).collect(),
            };
            Ok(AssembledSystem::BlockTridiagonal(sys))
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepReport {
    pub inner_iterations_used: usize,
    /// Residual norm of the first inner iteration; with q_iter = q_old at
    /// step start this is the steady-state residual |H(q_old)|_inf.
    pub initial_residual: f64,
    pub final_residual: f64,
}

/// Advance one time step. On error the committed state is untouched (the
/// working iterate is reset to `q_old`), so divergence leaves `q_old`
/// bit-identical to its pre-step value.
pub fn step(
    problem: &dyn Problem,
    state: &mut State,
    grid: &Grid,
    config: &SchemeConfig,
    dt: &TimeStep,
) -> Result<StepReport, SchemeError> {
    let t_new = state.time + dt.max();
    let theta_eff = config.effective_theta(dt.max());
    let theta_matrix = config.matrix_theta.unwrap_or(theta_eff);

    state.q_iter = state.q_old.clone();
    problem.apply_boundary_conditions(grid, &mut state.q_iter, t_new);

    let h_old = problem.spatial_operator(grid, &state.q_old, state.time);

    let mut initial_residual = 0.0;
    let mut final_residual = 0.0;
    let mut iterations_used = 0;
    let mut frozen_system: Option<AssembledSystem> = None;

    let result = (|| -> Result<(), SchemeError> {
        for inner in 0..config.inner_iterations {
            let h_new = problem.spatial_operator(grid, &state.q_iter, t_new);
            let rhs = compose_rhs(state, dt, theta_eff, &h_new, &h_old);
            if !rhs.is_finite() {
                return Err(SchemeError::NonFinite { inner });
            }
            let res = rhs.norm_inf();
            if inner == 0 {
                initial_residual = res;
            }
            final_residual = res;
            if res <= config.inner_tolerance * initial_residual && inner > 0 {
                break;
            }
            if initial_residual == 0.0 {
                break;
            }

            let system = if config.frozen_jacobian {
                if frozen_system.is_none() {
                    frozen_system = Some(assemble(
                        problem,
                        &state.q_iter,
                        grid,
                        dt,
                        theta_matrix,
                        config.matrix_level,
                    )?);
                }
                frozen_system.as_ref().unwrap().clone()
            } else {
                assemble(
                    problem,
                    &state.q_iter,
                    grid,
                    dt,
                    theta_matrix,
                    config.matrix_level,
                )?
            };
            let dq = system.solve(rhs.as_slice())?;
            state.q_iter.add_assign(&dq);
            problem.apply_boundary_conditions(grid, &mut state.q_iter, t_new);
            iterations_used = inner + 1;
        }
        if !state.q_iter.is_finite() {
            return Err(SchemeError::NonFinite {
                inner: iterations_used,
            });
        }
        if !problem.validate_state(&state.q_iter) {
            return Err(SchemeError::StateRejected);
        }
        Ok(())
    })();

    if let Err(e) = result {
        state.q_iter = state.q_old.clone();
        return Err(e);
    }

    state.q_old = state.q_iter.clone();
    state.time += dt.min();
    state.step_index += 1;
    Ok(StepReport {
        inner_iterations_used: iterations_used,
        initial_residual,
        final_residual,
    })
}
