//! Slow numerical invariants: steady-state path independence across matrix
//! levels and the spatial order of the high-order advection scheme.

use thetafvm::config::RawConfig;
use thetafvm::problems::{DiffusionProblem, PulseShape, WaveProblem};
use thetafvm::runner::{run, RunReport};
use thetafvm::stepping::Outcome;

fn run_json(json: &str) -> RunReport {
    let report = run(&RawConfig::from_json(json).unwrap().build().unwrap()).unwrap();
    assert_eq!(report.outcome, Outcome::Converged, "run did not converge");
    report
}

/// The residual is always the full discretization, so every matrix level must
/// land on the same steady state - the one the direct stationary solve gives.
#[test]
fn diffusion_steady_state_is_independent_of_matrix_level() {
    let configs = [
        // explicit
        r#"{
            "problem": "diffusion",
            "scheme.theta": 0.0,
            "scheme.matrix_level": "identity",
            "controller.mode": "fixed_cfl",
            "controller.target": 0.9,
            "run.abs_tol": 1e-10,
            "run.rel_tol": 1e-14,
            "run.max_iterations": 800000,
            "run.stagnation_window": 50000
        }"#,
        // semi-explicit
        r#"{
            "problem": "diffusion",
            "scheme.theta": 1.0,
            "scheme.matrix_level": "diagonal",
            "scheme.inner_iterations": 10,
            "scheme.inner_tolerance": 1e-10,
            "controller.mode": "ramp",
            "controller.start": 1.0,
            "controller.factor": 1.05,
            "controller.cap": 1000.0,
            "run.abs_tol": 1e-10,
            "run.rel_tol": 1e-14,
            "run.max_iterations": 800000,
            "run.stagnation_window": 50000
        }"#,
        // implicit
        r#"{
            "problem": "diffusion",
            "scheme.theta": 1.0,
            "scheme.matrix_level": "tridiagonal",
            "scheme.inner_iterations": 10,
            "scheme.inner_tolerance": 1e-10,
            "controller.mode": "ramp",
            "controller.start": 1.0,
            "controller.factor": 1.05,
            "controller.cap": 1000.0,
            "run.abs_tol": 1e-10,
            "run.rel_tol": 1e-14,
            "run.max_iterations": 800000,
            "run.stagnation_window": 50000
        }"#,
    ];
    let problem = DiffusionProblem::default();
    for json in configs {
        let report = run_json(json);
        let oracle = problem.stationary_solution(&report.grid).unwrap();
        let diff = (0..report.grid.n_cells())
            .map(|j| (report.state.q_old.get(j, 0) - oracle.get(j, 0)).abs())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-8, "level deviates from the oracle by {diff:.3e}");
    }
}

/// Grid refinement {100, 200, 400} at a tiny CFL on a smooth pulse: the
/// third-order upwind-biased reconstruction shows observed order >= 2.5.
#[test]
fn wave_refinement_shows_third_order() {
    let t_end = 1.0;
    let wave = WaveProblem {
        pulse: PulseShape::Gaussian {
            center: 101.0,
            width: 0.25,
            amplitude: 0.5,
        },
        ..WaveProblem::default()
    };
    let mut errors = Vec::new();
    for n in [100usize, 200, 400] {
        let report = run_json(&format!(
            r#"{{
                "problem": "wave",
                "grid.n_cells": {n},
                "problem.pulse": "gaussian",
                "scheme.theta": 0.5,
                "scheme.matrix_level": "tridiagonal",
                "scheme.inner_iterations": 3,
                "scheme.inner_tolerance": 1e-13,
                "controller.mode": "fixed_cfl",
                "controller.target": 0.05,
                "run.end_time": {t_end},
                "run.max_iterations": 1000000
            }}"#
        ));
        errors.push(wave.l2_error(&report.grid, &report.state.q_old, t_end));
    }
    let order_coarse = (errors[0] / errors[1]).log2();
    let order_fine = (errors[1] / errors[2]).log2();
    assert!(
        order_coarse >= 2.5 && order_fine >= 2.5,
        "observed orders {order_coarse:.2}, {order_fine:.2} from errors {errors:?}"
    );
}
