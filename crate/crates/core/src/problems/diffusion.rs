//! Heat diffusion in a thin spherical shell with a unit source,
//!
//! ```text
//! dT/dt = (nu/vol_j) [ r_{j+1}^2 (T_{j+1}-T_j)/dr_{j+1} - r_j^2 (T_j-T_{j-1})/dr_j ] + source
//! ```
//!
//! with Dirichlet values `T = boundary_value` held at both domain interfaces.
//! The linear steady state is available two ways: a direct tridiagonal solve
//! of `H(T) = 0` and, in the planar limit, the parabola
//! `T = boundary_value - source/(2 nu) * (r - r_in)(r - r_out)`.

use crate::linalg::{LinalgError, TriDiagonal};
use crate::mesh::Grid;
use crate::scheme::{Field, JacobianBlocks, Problem};

#[derive(Clone, Debug)]
pub struct DiffusionProblem {
    pub nu: f64,
    pub source: f64,
    pub boundary_value: f64,
    /// Gaussian initial bump `amplitude * exp(-decay (r - r0)^2)` centered on
    /// the domain midpoint.
    pub initial_amplitude: f64,
    pub initial_decay: f64,
}

impl Default for DiffusionProblem {
    fn default() -> Self {
        DiffusionProblem {
            nu: 1e-2,
            source: 1.0,
            boundary_value: 1.0,
            initial_amplitude: 10.0,
            initial_decay: 10.0,
        }
    }
}

impl DiffusionProblem {
    pub fn initial_profile(&self, grid: &Grid) -> Field {
        let r0 = 0.5 * (grid.interfaces[0] + grid.interfaces[grid.n_cells()]);
        Field::from_fn(grid.n_cells(), 1, |j, _| {
            let dr = grid.centers[j] - r0;
            self.initial_amplitude * (-self.initial_decay * dr * dr).exp()
        })
    }

    /// Diffusive flux through face `f` (0..=N), `nu * A_f * dT/dr`, with the
    /// Dirichlet boundary value standing in for the missing neighbor across
    /// the half-cell spacing.
    pub fn face_flux(&self, grid: &Grid, q: &Field, f: usize) -> f64 {
        let n = grid.n_cells();
        let t_lower = if f == 0 {
            self.boundary_value
        } else {
            q.get(f - 1, 0)
        };
        let t_upper = if f == n {
            self.boundary_value
        } else {
            q.get(f, 0)
        };
        self.nu * grid.face_area(f) * (t_upper - t_lower) / grid.center_spacings[f]
    }

    /// Stencil coefficients of the coefficient matrix A = -dH/dT for cell `j`:
    /// `(sub, diag, sup)` with `diag = -sub_flux - sup_flux` built from the
    /// same geometric factors as the operator.
    fn stencil(&self, grid: &Grid, j: usize) -> (f64, f64, f64) {
        let vol = grid.volumes[j];
        let s_lower = -(self.nu / vol) * grid.face_area(j) / grid.center_spacings[j];
        let s_upper = -(self.nu / vol) * grid.face_area(j + 1) / grid.center_spacings[j + 1];
        (s_lower, -s_lower - s_upper, s_upper)
    }

    /// Steady solution from a direct tridiagonal solve of `H(T) = 0`.
    pub fn stationary_solution(&self, grid: &Grid) -> Result<Field, LinalgError> {
        let n = grid.n_cells();
        let mut sys = TriDiagonal {
            sub: Vec::with_capacity(n - 1),
            diag: Vec::with_capacity(n),
            sup: Vec::with_capacity(n - 1),
        };
        for j in 0..n {
            let (s_lower, d, s_upper) = self.stencil(grid, j);
            if j > 0 {
                sys.sub.push(s_lower);
            }
            sys.diag.push(d);
            if j < n - 1 {
                sys.sup.push(s_upper);
            }
        }
        // H is affine: H(T) = H(0) - A T, so H(T) = 0  <=>  A T = H(0).
        let h0 = self.spatial_operator(grid, &Field::zeros(n, 1), 0.0);
        let x = sys.solve(h0.as_slice())?;
        let mut out = Field::zeros(n, 1);
        out.as_mut_slice().copy_from_slice(&x);
        Ok(out)
    }

    /// Planar-limit analytic steady state evaluated at the cell centers.
    pub fn steady_parabola(&self, grid: &Grid) -> Field {
        let a = grid.interfaces[0];
        let b = grid.interfaces[grid.n_cells()];
        Field::from_fn(grid.n_cells(), 1, |j, _| {
            let r = grid.centers[j];
            self.boundary_value - self.source / (2.0 * self.nu) * (r - a) * (r - b)
        })
    }
}

impl Problem for DiffusionProblem {
    fn n_vars(&self) -> usize {
        1
    }

    fn spatial_operator(&self, grid: &Grid, q: &Field, _time: f64) -> Field {
        let n = grid.n_cells();
        let fluxes: Vec<f64> = (0..=n).map(|f| self.face_flux(grid, q, f)).collect();
        Field::from_fn(n, 1, |j, _| {
            (fluxes[j + 1] - fluxes[j]) / grid.volumes[j] + self.source
        })
    }

    fn jacobian_contributions(&self, grid: &Grid, _q: &Field, j: usize) -> JacobianBlocks {
        let (s_lower, d, s_upper) = self.stencil(grid, j);
        let n = grid.n_cells();
        JacobianBlocks {
            m: 1,
            // Boundary couplings address Dirichlet constants, not unknowns.
            sub: vec![if j == 0 { 0.0 } else { s_lower }],
            diag: vec![d],
            sup: vec![if j == n - 1 { 0.0 } else { s_upper }],
        }
    }

    fn wave_speed(&self, _grid: &Grid, _q: &Field, _j: usize) -> f64 {
        0.0
    }

    fn diffusivity(&self, _j: usize) -> f64 {
        self.nu
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, Geometry};

    fn default_grid() -> Grid {
        build_grid(Geometry::Spherical, 1000.0, 1003.0, 180, 1.0).unwrap()
    }

    #[test]
    fn constant_temperature_leaves_pure_source() {
        let p = DiffusionProblem::default();
        let grid = default_grid();
        let q = Field::from_fn(180, 1, |_, _| 1.0);
        let h = p.spatial_operator(&grid, &q, 0.0);
        for j in 0..180 {
            assert!(
                (h.get(j, 0) - 1.0).abs() < 1e-9,
                "cell {j}: {}",
                h.get(j, 0)
            );
        }
    }

    #[test]
    fn steady_parabola_annihilates_interior_operator() {
        // Planar uniform grid: second differences of a quadratic are exact, so
        // interior cells must vanish to rounding. The half-cell Dirichlet
        // closure makes the two boundary cells first-order; they are excluded.
        let p = DiffusionProblem::default();
        let grid = build_grid(Geometry::Planar, 0.0, 3.0, 180, 1.0).unwrap();
        let q = p.steady_parabola(&grid);
        let h = p.spatial_operator(&grid, &q, 0.0);
        for j in 1..179 {
            assert!(h.get(j, 0).abs() < 1e-6, "cell {j}: {}", h.get(j, 0));
        }
    }

    #[test]
    fn hot_cell_flux_is_conservative() {
        let p = DiffusionProblem {
            source: 0.0,
            boundary_value: 0.0,
            ..DiffusionProblem::default()
        };
        let grid = build_grid(Geometry::Planar, 0.0, 1.0, 5, 1.0).unwrap();
        let mut q = Field::zeros(5, 1);
        q.set(2, 0, 1.0);
        let h = p.spatial_operator(&grid, &q, 0.0);
        assert!(h.get(2, 0) < 0.0);
        assert!(h.get(1, 0) > 0.0 && h.get(3, 0) > 0.0);
        // Volume-weighted sum reduces to the (zero) boundary fluxes.
        let total: f64 = (0..5).map(|j| h.get(j, 0) * grid.volumes[j]).sum();
        let boundary = p.face_flux(&grid, &q, 5) - p.face_flux(&grid, &q, 0);
        assert!((total - boundary).abs() < 1e-12);
    }

    #[test]
    fn jacobian_planar_uniform_values() {
        let p = DiffusionProblem::default();
        let n = 60;
        let grid = build_grid(Geometry::Planar, 0.0, 1.0, n, 1.0).unwrap();
        let q = Field::zeros(n, 1);
        let dx = 1.0 / n as f64;
        let b = p.jacobian_contributions(&grid, &q, n / 2);
        assert!((b.sub[0] + p.nu / (dx * dx)).abs() < 1e-9);
        assert!((b.sup[0] + p.nu / (dx * dx)).abs() < 1e-9);
        assert!((b.diag[0] - 2.0 * p.nu / (dx * dx)).abs() < 1e-9);
    }

    #[test]
    fn jacobian_row_sum_identity() {
        // diag = -(sub + sup) built from the interior stencil, including at
        // boundary cells where the reported couplings are zeroed but the
        // diagonal keeps the full boundary-face contribution.
        let p = DiffusionProblem::default();
        let grid = default_grid();
        let q = Field::zeros(180, 1);
        for j in 1..179 {
            let b = p.jacobian_contributions(&grid, &q, j);
            assert!(
                (b.diag[0] + b.sub[0] + b.sup[0]).abs() <= 1e-13 * b.diag[0].abs(),
                "cell {j}"
            );
        }
        let b0 = p.jacobian_contributions(&grid, &q, 0);
        assert!(b0.diag[0] > -b0.sup[0]); // extra dominance from the Dirichlet face
    }

    #[test]
    fn stationary_solve_matches_parabola_in_planar_limit() {
        let p = DiffusionProblem::default();
        let grid = build_grid(Geometry::Planar, 0.0, 3.0, 180, 1.0).unwrap();
        let direct = p.stationary_solution(&grid).unwrap();
        let parabola = p.steady_parabola(&grid);
        let peak = 1.0 + 1.5 * 1.5 / (2.0 * p.nu);
        assert!((peak - 113.5).abs() < 1e-12);
        for j in 0..180 {
            assert!(
                (direct.get(j, 0) - parabola.get(j, 0)).abs() < 0.01 * peak,
                "cell {j}: {} vs {}",
                direct.get(j, 0),
                parabola.get(j, 0)
            );
        }
    }

    #[test]
    fn stationary_solution_zeroes_the_operator() {
        let p = DiffusionProblem::default();
        let grid = default_grid();
        let steady = p.stationary_solution(&grid).unwrap();
        let h = p.spatial_operator(&grid, &steady, 0.0);
        let scale = steady.norm_inf();
        for j in 0..180 {
            assert!(
                h.get(j, 0).abs() < 1e-7 * scale,
                "cell {j}: {}",
                h.get(j, 0)
            );
        }
    }

    #[test]
    fn initial_profile_peaks_at_midpoint() {
        let p = DiffusionProblem::default();
        let grid = default_grid();
        let q = p.initial_profile(&grid);
        let peak = (0..180).map(|j| q.get(j, 0)).fold(0.0f64, f64::max);
        assert!(peak > 9.9 && peak <= 10.0);
        assert!(q.get(0, 0) < 1e-3);
    }
}
