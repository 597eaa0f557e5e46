//! Run execution: march a configured problem to steady state or to a target
//! time, record the convergence history, and write CSV artifacts. The sweep
//! driver re-runs a base configuration with one key overridden per value and
//! tabulates the outcomes.

use crate::config::{ConfigError, ProblemKind, RawConfig, RunConfig};
use crate::mesh::{build_grid, Grid, MeshError};
use crate::scheme::{step, Field, SchemeError, State, TimeStep};
use crate::stepping::{
    cfl_numbers, monitor, CflController, ControllerStep, History, HistoryRecord, Outcome,
    SteppingError,
};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Step-halving retries after a rejected or non-finite step before the run is
/// declared diverged.
const MAX_STEP_RETRIES: usize = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Stepping(#[from] SteppingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub iterations: usize,
    pub final_residual: f64,
    pub history: History,
    pub grid: Grid,
    pub state: State,
}

impl ProblemKind {
    pub fn initial_profile(&self, grid: &Grid) -> Field {
        match self {
            ProblemKind::Diffusion(p) => p.initial_profile(grid),
            ProblemKind::Wave(p) => p.initial_profile(grid),
            ProblemKind::FreeFall(p) => p.initial_profile(grid),
        }
    }

    pub fn variable_names(&self) -> &'static [&'static str] {
        match self {
            ProblemKind::Diffusion(_) => &["temperature"],
            ProblemKind::Wave(_) => &["density"],
            ProblemKind::FreeFall(_) => &["density", "momentum", "energy"],
        }
    }
}

pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let grid = build_grid(
        config.grid.geometry,
        config.grid.r_in,
        config.grid.r_out,
        config.grid.n_cells,
        config.grid.stretch,
    )?;
    let problem = config.problem.as_problem();
    let mut state = State::new(config.problem.initial_profile(&grid));
    let mut controller = CflController::new(config.controller);
    let mut history = History::default();
    let transient = config.end_time.is_some();

    let mut residual = residual_norm(problem, &state, &grid);
    let outcome = loop {
        if state.step_index >= config.max_iterations {
            break Outcome::BudgetExhausted;
        }
        if let Some(end_time) = config.end_time {
            if state.time >= end_time * (1.0 - 1e-12) {
                break Outcome::Converged;
            }
        }

        let mut dt = match controller.next_step(problem, &state.q_old, &grid, residual) {
            Ok(ControllerStep::Global(dt)) => TimeStep::Global(dt),
            Ok(ControllerStep::PerCell(dts)) => TimeStep::PerCell(dts),
            Err(SteppingError::ZeroResidual) => break Outcome::Converged,
            Err(e) => return Err(e.into()),
        };
        if let Some(end_time) = config.end_time {
            let remaining = end_time - state.time;
            dt = clamp_step(dt, remaining);
        }

        let mut stepped = false;
        for _attempt in 0..=MAX_STEP_RETRIES {
            match step(problem, &mut state, &grid, &config.scheme, &dt) {
                Ok(report) => {
                    residual = residual_norm(problem, &state, &grid);
                    let dt_recorded = dt.min();
                    let (cfl, cfl_raw) = cfl_numbers(problem, &state.q_old, &grid, dt_recorded);
                    history.push(HistoryRecord {
                        iteration: state.step_index,
                        time: state.time,
                        dt: dt_recorded,
                        cfl,
                        cfl_raw,
                        residual_inf: residual,
                        inner_iters: report.inner_iterations_used,
                    });
                    stepped = true;
                    break;
                }
                Err(SchemeError::NonFinite { .. }) | Err(SchemeError::StateRejected) => {
                    dt = halve(dt);
                }
                Err(e) => return Err(e.into()),
            }
        }
        if !stepped {
            history.push(HistoryRecord {
                iteration: state.step_index + 1,
                time: state.time,
                dt: dt.min(),
                cfl: 0.0,
                cfl_raw: 0.0,
                residual_inf: f64::INFINITY,
                inner_iters: 0,
            });
            break Outcome::Diverged;
        }

        if transient {
            // Transient runs only watch for blow-up; the residual does not
            // shrink while the solution is in motion.
            let initial = history.records[0].residual_inf;
            if !residual.is_finite()
                || residual >= config.monitor.divergence_factor * initial.max(f64::MIN_POSITIVE)
            {
                break Outcome::Diverged;
            }
        } else if let Some(outcome) = monitor(&history, &config.monitor) {
            break outcome;
        }
    };

    history.outcome = Some(outcome);
    Ok(RunReport {
        outcome,
        iterations: state.step_index,
        final_residual: history.last_residual().unwrap_or(residual),
        history,
        grid,
        state,
    })
}

/// Steady-state residual |H(q)|_inf of the committed state.
fn residual_norm(problem: &dyn crate::scheme::Problem, state: &State, grid: &Grid) -> f64 {
    problem
        .spatial_operator(grid, &state.q_old, state.time)
        .norm_inf()
}

fn clamp_step(dt: TimeStep, remaining: f64) -> TimeStep {
    match dt {
        TimeStep::Global(v) => TimeStep::Global(v.min(remaining)),
        TimeStep::PerCell(vs) => {
            TimeStep::PerCell(vs.into_iter().map(|v| v.min(remaining)).collect())
        }
    }
}

fn halve(dt: TimeStep) -> TimeStep {
    match dt {
        TimeStep::Global(v) => TimeStep::Global(0.5 * v),
        TimeStep::PerCell(vs) => TimeStep::PerCell(vs.into_iter().map(|v| 0.5 * v).collect()),
    }
}

/// Final-profile CSV: cell_index, r_center, one column per variable.
pub fn profile_csv(problem: &ProblemKind, grid: &Grid, q: &Field) -> String {
    let mut out = String::from("cell_index,r_center");
    for name in problem.variable_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..grid.n_cells() {
        write!(out, "{},{}", j, grid.centers[j]).expect("string write cannot fail");
        for v in 0..q.n_vars() {
            write!(out, ",{}", q.get(j, v)).expect("string write cannot fail");
        }
        out.push('\n');
    }
    out
}

/// Execute a run and write `history.csv` and `profile.csv` into `out_dir`.
pub fn run_and_write(config: &RunConfig, out_dir: &Path) -> Result<RunReport, RunError> {
    let report = run(config)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("history.csv"), report.history.to_csv())?;
    std::fs::write(
        out_dir.join("profile.csv"),
        profile_csv(&config.problem, &report.grid, &report.state.q_old),
    )?;
    Ok(report)
}

#[derive(Debug)]
pub struct SweepEntry {
    pub value: serde_json::Value,
    pub outcome: Outcome,
    pub iterations: usize,
    pub final_residual: f64,
}

fn outcome_name(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Converged => "converged",
        Outcome::Stagnated => "stagnated",
        Outcome::Diverged => "diverged",
        Outcome::BudgetExhausted => "budget_exhausted",
    }
}

/// One run per value of `param`, each in its own subdirectory of `out_dir`,
/// plus a `summary.csv` table.
pub fn sweep(
    base: &RawConfig,
    param: &str,
    values: &[serde_json::Value],
    out_dir: &Path,
) -> Result<Vec<SweepEntry>, RunError> {
    std::fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(values.len());
    for (i, value) in values.iter().enumerate() {
        let config = base.with_value(param, value.clone()).build()?;
        let label = match value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let sub = out_dir.join(format!("{i:03}_{label}"));
        let report = run_and_write(&config, &sub)?;
        entries.push(SweepEntry {
            value: value.clone(),
            outcome: report.outcome,
            iterations: report.iterations,
            final_residual: report.final_residual,
        });
    }
    let mut summary = String::from("value,outcome,iterations,final_residual\n");
    for e in &entries {
        let value = match &e.value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        writeln!(
            summary,
            "{},{},{},{}",
            value,
            outcome_name(e.outcome),
            e.iterations,
            e.final_residual
        )
        .expect("string write cannot fail");
    }
    std::fs::write(out_dir.join("summary.csv"), summary)?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn build(json: &str) -> RunConfig {
        RawConfig::from_json(json).unwrap().build().unwrap()
    }

    #[test]
    fn implicit_diffusion_converges_quickly() {
        let cfg = build(
            r#"{
                "problem": "diffusion",
                "grid.n_cells": 30,
                "scheme.theta": 1.0,
                "scheme.matrix_level": "tridiagonal",
                "scheme.inner_iterations": 4,
                "controller.mode": "ramp",
                "controller.start": 1.0,
                "controller.factor": 2.0,
                "controller.cap": 1000000.0,
                "run.rel_tol": 1e-8,
                "run.max_iterations": 500
            }"#,
        );
        let report = run(&cfg).unwrap();
        assert_eq!(report.outcome, Outcome::Converged);
        assert!(report.iterations < 200, "took {}", report.iterations);
    }

    #[test]
    fn explicit_unstable_cfl_diverges() {
        let cfg = build(
            r#"{
                "problem": "diffusion",
                "grid.n_cells": 30,
                "scheme.theta": 0.0,
                "scheme.matrix_level": "identity",
                "controller.mode": "fixed_cfl",
                "controller.target": 1.75,
                "run.max_iterations": 100000
            }"#,
        );
        let report = run(&cfg).unwrap();
        assert_eq!(report.outcome, Outcome::Diverged);
    }

    #[test]
    fn transient_run_stops_at_end_time() {
        let cfg = build(
            r#"{
                "problem": "wave",
                "grid.n_cells": 50,
                "scheme.theta": 0.5,
                "scheme.matrix_level": "tridiagonal",
                "scheme.inner_iterations": 2,
                "controller.mode": "fixed_cfl",
                "controller.target": 1.0,
                "run.end_time": 0.5,
                "run.max_iterations": 10000
            }"#,
        );
        let report = run(&cfg).unwrap();
        assert_eq!(report.outcome, Outcome::Converged);
        assert!((report.state.time - 0.5).abs() < 1e-9);
        let last = report.history.records.last().unwrap();
        assert!(last.time <= 0.5 + 1e-12);
    }

    #[test]
    fn history_cfl_is_consistent_with_dt() {
        let cfg = build(
            r#"{
                "problem": "diffusion",
                "grid.n_cells": 20,
                "controller.mode": "fixed_cfl",
                "controller.target": 0.8,
                "run.max_iterations": 50,
                "run.rel_tol": 1e-30
            }"#,
        );
        let report = run(&cfg).unwrap();
        for r in &report.history.records {
            assert!((r.cfl - 0.8).abs() < 1e-9, "cfl {}", r.cfl);
            assert!((r.cfl_raw - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn outputs_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let json = r#"{
            "problem": "diffusion",
            "grid.n_cells": 20,
            "run.max_iterations": 200,
            "controller.mode": "ramp"
        }"#;
        let a_dir = dir.path().join("a");
        let b_dir = dir.path().join("b");
        run_and_write(&build(json), &a_dir).unwrap();
        run_and_write(&build(json), &b_dir).unwrap();
        for file in ["history.csv", "profile.csv"] {
            let a = std::fs::read(a_dir.join(file)).unwrap();
            let b = std::fs::read(b_dir.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }

    #[test]
    fn sweep_writes_summary_and_isolated_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let raw = RawConfig::from_json(
            r#"{
                "problem": "diffusion",
                "grid.n_cells": 20,
                "scheme.theta": 0.0,
                "scheme.matrix_level": "identity",
                "controller.mode": "fixed_cfl",
                "run.max_iterations": 30000
            }"#,
        )
        .unwrap();
        let values = vec![serde_json::json!(0.5), serde_json::json!(1.75)];
        let entries = sweep(&raw, "controller.target", &values, dir.path()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_ne!(entries[0].outcome, Outcome::Diverged);
        assert_eq!(entries[1].outcome, Outcome::Diverged);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("value,outcome,iterations,final_residual\n"));
        assert!(summary.contains("1.75,diverged"));
        assert!(dir.path().join("000_0.5/history.csv").exists());
    }
}
