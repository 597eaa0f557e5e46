//! The bundled test problems: spherical heat diffusion with a unit source,
//! linear wave (density) advection, and spherically-symmetric free-fall
//! accretion onto a point mass.

pub mod diffusion;
pub mod freefall;
pub mod wave;

pub use diffusion::DiffusionProblem;
pub use freefall::FreeFallProblem;
pub use wave::{AdvectionOrder, PulseShape, WaveProblem};

/// Least-squares slope of `log10(y)` vs `log10(x)` over points with
/// `x` in `[x_lo, x_hi]`; used to check power-law profiles.
pub fn log_log_slope(xs: &[f64], ys: &[f64], x_lo: f64, x_hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x >= x_lo && **x <= x_hi && **y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
