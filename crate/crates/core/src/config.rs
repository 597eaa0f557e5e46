//! Run configuration: a single flat JSON object whose keys use dotted
//! namespaces, e.g.
//!
//! ```json
//! {
//!   "problem": "diffusion",
//!   "grid.n_cells": 180,
//!   "scheme.theta": 1.0,
//!   "scheme.matrix_level": "diagonal",
//!   "controller.mode": "fixed_cfl",
//!   "controller.target": 0.9,
//!   "run.max_iterations": 200000
//! }
//! ```
//!
//! Unknown keys are rejected, and every key is individually overridable, which
//! is what the sweep mode exploits. Each problem carries its own grid
//! defaults so a one-line config is a complete run.

use crate::mesh::Geometry;
use crate::problems::{AdvectionOrder, DiffusionProblem, FreeFallProblem, PulseShape, WaveProblem};
use crate::scheme::{MatrixLevel, Problem, SchemeConfig, ThetaRule};
use crate::stepping::{ControllerMode, MonitorConfig};
use serde_json::{Map, Value};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config root must be a JSON object")]
    NotAnObject,
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("key {key:?}: expected {expected}, got {got}")]
    WrongType {
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("key {key:?}: {message}")]
    BadValue { key: String, message: String },
    #[error("unknown config keys: {0:?}")]
    UnknownKeys(Vec<String>),
    #[error("missing required key {0:?}")]
    Missing(String),
}

/// The raw key/value map, kept around so sweeps can override single keys.
#[derive(Clone, Debug)]
pub struct RawConfig {
    map: Map<String, Value>,
}

#[derive(Clone, Debug)]
pub struct GridConfig {
    pub geometry: Geometry,
    pub r_in: f64,
    pub r_out: f64,
    pub n_cells: usize,
    pub stretch: f64,
}

#[derive(Clone, Debug)]
pub enum ProblemKind {
    Diffusion(DiffusionProblem),
    Wave(WaveProblem),
    FreeFall(FreeFallProblem),
}

impl ProblemKind {
    pub fn as_problem(&self) -> &dyn Problem {
        match self {
            ProblemKind::Diffusion(p) => p,
            ProblemKind::Wave(p) => p,
            ProblemKind::FreeFall(p) => p,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub grid: GridConfig,
    pub scheme: SchemeConfig,
    pub controller: ControllerMode,
    pub monitor: MonitorConfig,
    pub max_iterations: usize,
    /// Transient runs stop at this simulation time; steady-state marches when
    /// absent.
    pub end_time: Option<f64>,
}

struct Reader<'a> {
    map: &'a Map<String, Value>,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        let v = self.map.get(key);
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Number(n)) => n.as_f64().ok_or_else(|| ConfigError::BadValue {
                key: key.into(),
                message: "not representable as f64".into(),
            }),
            Some(v) => Err(wrong(key, "number", v)),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Number(n)) => {
                n.as_u64()
                    .map(|u| u as usize)
                    .ok_or_else(|| ConfigError::BadValue {
                        key: key.into(),
                        message: "expected a non-negative integer".into(),
                    })
            }
            Some(v) => Err(wrong(key, "integer", v)),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(wrong(key, "boolean", v)),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String, ConfigError> {
        match self.raw(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(v) => Err(wrong(key, "string", v)),
        }
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(n.as_f64()),
            Some(v) => Err(wrong(key, "number", v)),
        }
    }
}

fn wrong(key: &str, expected: &'static str, got: &Value) -> ConfigError {
    ConfigError::WrongType {
        key: key.into(),
        expected,
        got: format!("{got}"),
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        message: message.into(),
    }
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text)?;
        match value {
            Value::Object(map) => Ok(RawConfig { map }),
            _ => Err(ConfigError::NotAnObject),
        }
    }

    /// Copy with one key replaced; the sweep driver's override primitive.
    pub fn with_value(&self, key: &str, value: Value) -> RawConfig {
        let mut map = self.map.clone();
        map.insert(key.to_string(), value);
        RawConfig { map }
    }

    pub fn build(&self) -> Result<RunConfig, ConfigError> {
        let mut r = Reader {
            map: &self.map,
            used: BTreeSet::new(),
        };

        let problem_name = match r.raw("problem") {
            Some(Value::String(s)) => s.clone(),
            Some(v) => return Err(wrong("problem", "string", v)),
            None => return Err(ConfigError::Missing("problem".into())),
        };

        let (problem, grid_defaults) = match problem_name.as_str() {
            "diffusion" => {
                let p = DiffusionProblem {
                    nu: r.f64("problem.nu", 1e-2)?,
                    source: r.f64("problem.source", 1.0)?,
                    boundary_value: r.f64("problem.boundary_value", 1.0)?,
                    initial_amplitude: r.f64("problem.initial_amplitude", 10.0)?,
                    initial_decay: r.f64("problem.initial_decay", 10.0)?,
                };
                if !(p.nu > 0.0) {
                    return Err(bad("problem.nu", "diffusivity must be positive"));
                }
                (
                    ProblemKind::Diffusion(p),
                    (Geometry::Spherical, 1000.0, 1003.0, 180, 1.0),
                )
            }
            "wave" => {
                let order = match r
                    .string("problem.order", "third_order_upwind_biased")?
                    .as_str()
                {
                    "first_order_upwind" => AdvectionOrder::FirstOrderUpwind,
                    "third_order_upwind_biased" => AdvectionOrder::ThirdOrderUpwindBiased,
                    other => return Err(bad("problem.order", format!("unknown order {other:?}"))),
                };
                let pulse = match r.string("problem.pulse", "sine")?.as_str() {
                    "sine" => PulseShape::Sine {
                        left: r.f64("problem.pulse.left", 100.5)?,
                        width: r.f64("problem.pulse.width", 1.0)?,
                        amplitude: r.f64("problem.pulse.amplitude", 0.5)?,
                    },
                    "gaussian" => PulseShape::Gaussian {
                        center: r.f64("problem.pulse.center", 101.0)?,
                        width: r.f64("problem.pulse.width", 0.25)?,
                        amplitude: r.f64("problem.pulse.amplitude", 0.5)?,
                    },
                    other => return Err(bad("problem.pulse", format!("unknown pulse {other:?}"))),
                };
                let p = WaveProblem {
                    velocity: r.f64("problem.velocity", 1.0)?,
                    order,
                    pulse,
                };
                if !(p.velocity > 0.0) {
                    return Err(bad("problem.velocity", "velocity must be positive"));
                }
                (
                    ProblemKind::Wave(p),
                    (Geometry::Spherical, 100.0, 104.0, 200, 1.0),
                )
            }
            "freefall" => {
                let p = FreeFallProblem {
                    gamma: r.f64("problem.gamma", 5.0 / 3.0)?,
                    gm: r.f64("problem.gm", 1.0)?,
                    rho_out: r.f64("problem.rho_out", 1.0)?,
                    e_out: r.f64("problem.e_out", 3e-5)?,
                };
                (
                    ProblemKind::FreeFall(p),
                    (Geometry::Spherical, 1.0, 100.0, 200, 1.02),
                )
            }
            other => return Err(bad("problem", format!("unknown problem {other:?}"))),
        };

        let geometry = match r
            .string(
                "grid.geometry",
                match grid_defaults.0 {
                    Geometry::Planar => "planar",
                    Geometry::Spherical => "spherical",
                },
            )?
            .as_str()
        {
            "planar" => Geometry::Planar,
            "spherical" => Geometry::Spherical,
            other => return Err(bad("grid.geometry", format!("unknown geometry {other:?}"))),
        };
        let grid = GridConfig {
            geometry,
            r_in: r.f64("grid.r_in", grid_defaults.1)?,
            r_out: r.f64("grid.r_out", grid_defaults.2)?,
            n_cells: r.usize("grid.n_cells", grid_defaults.3)?,
            stretch: r.f64("grid.stretch", grid_defaults.4)?,
        };

        let matrix_level = match r.string("scheme.matrix_level", "diagonal")?.as_str() {
            "identity" => MatrixLevel::Identity,
            "diagonal" => MatrixLevel::Diagonal,
            "block_diagonal" => MatrixLevel::BlockDiagonal,
            "tridiagonal" => MatrixLevel::Tridiagonal,
            "block_tridiagonal" => MatrixLevel::BlockTridiagonal,
            other => {
                return Err(bad(
                    "scheme.matrix_level",
                    format!("unknown matrix level {other:?}"),
                ))
            }
        };
        let theta_rule = match r.string("scheme.theta_rule", "fixed")?.as_str() {
            "fixed" => ThetaRule::Fixed,
            "damped_cn" => ThetaRule::DampedCn {
                alpha: r.f64("scheme.alpha", 1.0)?,
            },
            other => {
                return Err(bad(
                    "scheme.theta_rule",
                    format!("unknown theta rule {other:?}"),
                ))
            }
        };
        let scheme = SchemeConfig {
            theta: r.f64("scheme.theta", 1.0)?,
            matrix_level,
            inner_iterations: r.usize("scheme.inner_iterations", 1)?,
            inner_tolerance: r.f64("scheme.inner_tolerance", 1e-3)?,
            theta_rule,
            matrix_theta: r.opt_f64("scheme.matrix_theta")?,
            frozen_jacobian: r.bool("scheme.frozen_jacobian", false)?,
        };
        if !(0.0..=1.0).contains(&scheme.theta) {
            return Err(bad("scheme.theta", "theta must lie in [0, 1]"));
        }
        if scheme.inner_iterations == 0 {
            return Err(bad("scheme.inner_iterations", "need at least 1"));
        }

        let controller = match r.string("controller.mode", "fixed_cfl")?.as_str() {
            "fixed_cfl" => ControllerMode::FixedCfl {
                target: r.f64("controller.target", 0.9)?,
            },
            "ramp" => ControllerMode::Ramp {
                start: r.f64("controller.start", 0.5)?,
                factor: r.f64("controller.factor", 1.05)?,
                cap: r.f64("controller.cap", 100.0)?,
            },
            "residual_driven" => ControllerMode::ResidualDriven {
                alpha0: r.f64("controller.alpha0", 1.0)?,
            },
            "residual_smoothing" => ControllerMode::ResidualSmoothing {
                target: r.f64("controller.target", 0.9)?,
            },
            other => {
                return Err(bad(
                    "controller.mode",
                    format!("unknown controller mode {other:?}"),
                ))
            }
        };

        let monitor = MonitorConfig {
            abs_tol: r.f64("run.abs_tol", 0.0)?,
            rel_tol: r.f64("run.rel_tol", 1e-8)?,
            divergence_factor: r.f64("run.divergence_factor", 1e8)?,
            stagnation_window: r.usize("run.stagnation_window", 2000)?,
            stagnation_improvement: r.f64("run.stagnation_improvement", 0.01)?,
        };
        let max_iterations = r.usize("run.max_iterations", 200_000)?;
        if max_iterations == 0 {
            return Err(bad("run.max_iterations", "need at least 1"));
        }
        let end_time = r.opt_f64("run.end_time")?;
        // Reserved for test fixtures; the physics pipeline is deterministic.
        let _ = r.usize("run.seed", 0)?;

        let used = r.used;
        let unknown: Vec<String> = self
            .map
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }

        Ok(RunConfig {
            problem,
            grid,
            scheme,
            controller,
            monitor,
            max_iterations,
            end_time,
        })
    }
}
