//! Spherically-symmetric adiabatic free-fall onto a point mass.
//!
//! Conserved variables per cell: density rho, radial momentum m = rho u, and
//! internal energy density e, with pressure p = (gamma - 1) e. The equations
//!
//! ```text
//! d(rho)/dt + div(rho u) = 0
//! d(m)/dt   + div(m u)   = -dp/dr - rho GM/r^2
//! d(e)/dt   + div(e u)   = -p div(u)
//! ```
//!
//! are discretized with first-order donor-cell upwind fluxes in spherical
//! geometry. Matter falls in supersonically; the steady state obeys
//! rho ~ r^{-3/2} and |u| ~ r^{-1/2} with constant mass flux r^2 rho u.
//!
//! Boundaries: the outer ghost holds a fixed cold inflow state at the local
//! free-fall speed; the inner ghost copies the innermost cell so matter
//! leaves without reflection.

use crate::mesh::Grid;
use crate::scheme::{Field, JacobianBlocks, Problem};

pub const N_VARS: usize = 3;

#[derive(Clone, Debug)]
pub struct FreeFallProblem {
    pub gamma: f64,
    /// Gravitational parameter GM in units where the inner radius is 1.
    pub gm: f64,
    /// Outer-boundary inflow density.
    pub rho_out: f64,
    /// Outer-boundary internal energy density (cold inflow).
    pub e_out: f64,
}

impl Default for FreeFallProblem {
    fn default() -> Self {
        FreeFallProblem {
            gamma: 5.0 / 3.0,
            gm: 1.0,
            rho_out: 1.0,
            e_out: 3e-5,
        }
    }
}

/// Primitive state (rho, u, e) extended by one ghost value on each side.
struct Extended {
    rho: Vec<f64>,
    u: Vec<f64>,
    e: Vec<f64>,
}

impl Extended {
    /// Index shift: ghost below the domain is 0, cell j is j+1.
    fn at(&self, j: isize) -> (f64, f64, f64) {
        let i = (j + 1) as usize;
        (self.rho[i], self.u[i], self.e[i])
    }
}

impl FreeFallProblem {
    pub fn energy_floor(&self) -> f64 {
        1e-10 * self.e_out
    }

    pub fn density_floor(&self) -> f64 {
        1e-10 * self.rho_out
    }

    pub fn free_fall_speed(&self, r: f64) -> f64 {
        (2.0 * self.gm / r).sqrt()
    }

    /// Uniform gas at rest with the outer-boundary density and temperature.
    pub fn initial_profile(&self, grid: &Grid) -> Field {
        Field::from_fn(grid.n_cells(), N_VARS, |_, v| match v {
            0 => self.rho_out,
            1 => 0.0,
            _ => self.e_out,
        })
    }

    fn extend(&self, grid: &Grid, q: &Field) -> Extended {
        let n = grid.n_cells();
        let mut rho = Vec::with_capacity(n + 2);
        let mut u = Vec::with_capacity(n + 2);
        let mut e = Vec::with_capacity(n + 2);
        // Inner ghost: copy of the first cell (free outflow).
        rho.push(q.get(0, 0).max(self.density_floor()));
        u.push(q.get(0, 1) / q.get(0, 0).max(self.density_floor()));
        e.push(q.get(0, 2).max(self.energy_floor()));
        for j in 0..n {
            let r = q.get(j, 0).max(self.density_floor());
            rho.push(r);
            u.push(q.get(j, 1) / r);
            e.push(q.get(j, 2).max(self.energy_floor()));
        }
        // Outer ghost: fixed cold inflow at the free-fall speed.
        let r_out = grid.interfaces[n];
        rho.push(self.rho_out);
        u.push(-self.free_fall_speed(r_out));
        e.push(self.e_out);
        Extended { rho, u, e }
    }

    fn pressure(&self, e: f64) -> f64 {
        (self.gamma - 1.0) * e
    }

    /// Donor-cell advective fluxes (mass, momentum, energy) through face `f`
    /// (0..=N), area factors included.
    pub fn face_fluxes(&self, grid: &Grid, q: &Field, f: usize) -> [f64; 3] {
        let ext = self.extend(grid, q);
        self.face_fluxes_ext(grid, &ext, f)
    }

    fn face_fluxes_ext(&self, grid: &Grid, ext: &Extended, f: usize) -> [f64; 3] {
        let (rho_lo, u_lo, e_lo) = ext.at(f as isize - 1);
        let (rho_hi, u_hi, e_hi) = ext.at(f as isize);
        let u_f = 0.5 * (u_lo + u_hi);
        let (rho, u, e) = if u_f >= 0.0 {
            (rho_lo, u_lo, e_lo)
        } else {
            (rho_hi, u_hi, e_hi)
        };
        let a = grid.face_area(f);
        [a * rho * u_f, a * rho * u * u_f, a * e * u_f]
    }

    fn face_velocity(&self, ext: &Extended, f: usize) -> f64 {
        let (_, u_lo, _) = ext.at(f as isize - 1);
        let (_, u_hi, _) = ext.at(f as isize);
        0.5 * (u_lo + u_hi)
    }

    /// Mass flux `r^2 rho u` at face `f`, for steady-accretion checks.
    pub fn mass_flux(&self, grid: &Grid, q: &Field, f: usize) -> f64 {
        self.face_fluxes(grid, q, f)[0]
    }

    /// Non-advective sources of cell `j`: gravity and the pressure gradient in
    /// the momentum equation, compression work in the energy equation.
    pub fn sources(&self, grid: &Grid, q: &Field, j: usize) -> [f64; 3] {
        let ext = self.extend(grid, q);
        self.sources_ext(grid, &ext, j)
    }

    fn sources_ext(&self, grid: &Grid, ext: &Extended, j: usize) -> [f64; 3] {
        let ji = j as isize;
        let (rho, _, e) = ext.at(ji);
        let (_, _, e_lo) = ext.at(ji - 1);
        let (_, _, e_hi) = ext.at(ji + 1);
        let r_c = grid.centers[j];
        let dx = grid.cell_width(j);
        // Face pressures by central average, gradient over the cell width.
        let p_lo = 0.5 * (self.pressure(e_lo) + self.pressure(e));
        let p_hi = 0.5 * (self.pressure(e) + self.pressure(e_hi));
        let gravity = -rho * self.gm / (r_c * r_c);
        let pressure_gradient = -(p_hi - p_lo) / dx;
        let div_u = (grid.face_area(j + 1) * self.face_velocity(ext, j + 1)
            - grid.face_area(j) * self.face_velocity(ext, j))
            / grid.volumes[j];
        let work = -self.pressure(e) * div_u;
        [0.0, gravity + pressure_gradient, work]
    }
}

impl Problem for FreeFallProblem {
    fn n_vars(&self) -> usize {
        N_VARS
    }

    fn spatial_operator(&self, grid: &Grid, q: &Field, _time: f64) -> Field {
        let n = grid.n_cells();
        let ext = self.extend(grid, q);
        let fluxes: Vec<[f64; 3]> = (0..=n)
            .map(|f| self.face_fluxes_ext(grid, &ext, f))
            .collect();
        Field::from_fn(n, N_VARS, |j, v| {
            let divergence = (fluxes[j + 1][v] - fluxes[j][v]) / grid.volumes[j];
            -divergence + self.sources_ext(grid, &ext, j)[v]
        })
    }

    // Block entries are written as `row * 3 + col` even when the row index is
    // 0 or 1, so the layout stays visible.
    #[allow(clippy::identity_op)]
    fn jacobian_contributions(&self, grid: &Grid, q: &Field, j: usize) -> JacobianBlocks {
        let n = grid.n_cells();
        let ext = self.extend(grid, q);
        let vol = grid.volumes[j];
        let mut sub = vec![0.0; 9];
        let mut diag = vec![0.0; 9];
        let mut sup = vec![0.0; 9];

        // Donor-cell advection with frozen face velocities: each conserved
        // variable couples to its own donor value.
        let u_lo = self.face_velocity(&ext, j);
        let u_hi = self.face_velocity(&ext, j + 1);
        let a_lo = grid.face_area(j);
        let a_hi = grid.face_area(j + 1);
        for v in 0..3 {
            if u_hi >= 0.0 {
                diag[v * 3 + v] += a_hi * u_hi / vol;
            } else if j + 1 < n {
                sup[v * 3 + v] += a_hi * u_hi / vol;
            }
            if u_lo >= 0.0 {
                if j > 0 {
                    sub[v * 3 + v] -= a_lo * u_lo / vol;
                }
            } else {
                diag[v * 3 + v] -= a_lo * u_lo / vol;
            }
        }

        // Pressure gradient: central face pressures couple the momentum row
        // to the neighbors' internal energy.
        let dp = 0.5 * (self.gamma - 1.0) / grid.cell_width(j);
        if j > 0 {
            sub[1 * 3 + 2] -= dp;
        }
        if j + 1 < n {
            sup[1 * 3 + 2] += dp;
        }

        // Gravity ties the momentum row to the local density.
        let r_c = grid.centers[j];
        diag[1 * 3 + 0] += self.gm / (r_c * r_c);

        // Compression work: only the stabilizing (expansion) part enters the
        // diagonal so it stays non-negative.
        let div_u = (a_hi * u_hi - a_lo * u_lo) / vol;
        diag[2 * 3 + 2] += (self.gamma - 1.0) * div_u.max(0.0);

        JacobianBlocks {
            m: 3,
            sub,
            diag,
            sup,
        }
    }

    fn wave_speed(&self, _grid: &Grid, q: &Field, j: usize) -> f64 {
        let rho = q.get(j, 0).max(self.density_floor());
        let e = q.get(j, 2).max(self.energy_floor());
        let u = q.get(j, 1) / rho;
        let sound = (self.gamma * self.pressure(e) / rho).sqrt();
        u.abs() + sound
    }

    fn diffusivity(&self, _j: usize) -> f64 {
        0.0
    }

    fn apply_boundary_conditions(&self, _grid: &Grid, q: &mut Field, _time: f64) {
        // Positivity floors keep transients physical; boundary values proper
        // enter through the ghost states of the flux evaluation.
        for j in 0..q.n_cells() {
            let rho = q.get(j, 0);
            if rho < self.density_floor() {
                q.set(j, 0, self.density_floor());
                q.set(j, 1, 0.0);
            }
            if q.get(j, 2) < self.energy_floor() {
                q.set(j, 2, self.energy_floor());
            }
        }
    }

    fn validate_state(&self, q: &Field) -> bool {
        if !q.is_finite() {
            return false;
        }
        (0..q.n_cells()).all(|j| q.get(j, 0) > 0.0 && q.get(j, 2) > 0.0)
    }
}
