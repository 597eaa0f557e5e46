//! 1D finite-volume grids in planar or spherical geometry.
//!
//! Cells are ordered with increasing coordinate. Cell `j` spans the interfaces
//! `r_j .. r_{j+1}`; the unknown lives at the cell center, taken as the
//! arithmetic mean of the bounding interfaces. `center_spacings[j]` is the
//! distance between the centers of cells `j-1` and `j`; at the two domain
//! boundaries it degenerates to the half-cell distance from the first/last
//! center to the boundary interface, which is the spacing a Dirichlet ghost
//! value at the interface sees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Planar,
    Spherical,
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("domain length must be positive, got [{r_in}, {r_out}]")]
    NonPositiveLength { r_in: f64, r_out: f64 },
    #[error("spherical grids require r_in > 0, got {0}")]
    NonPositiveInnerRadius(f64),
    #[error("need at least 3 cells, got {0}")]
    TooFewCells(usize),
    #[error("stretch factor must be >= 1, got {0}")]
    StretchTooSmall(f64),
    #[error("cell index {index} out of range for {n_cells} cells")]
    IndexOutOfRange { index: usize, n_cells: usize },
}

/// Immutable 1D finite-volume mesh. Safe to share between workers.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub geometry: Geometry,
    /// N+1 strictly increasing interface coordinates.
    pub interfaces: Vec<f64>,
    /// N cell centers, arithmetic means of the bounding interfaces.
    pub centers: Vec<f64>,
    /// N cell volumes: interface spacing (planar) or (r_{j+1}^3 - r_j^3)/3.
    pub volumes: Vec<f64>,
    /// N+1 center-to-center distances, half-cell at the boundaries.
    pub center_spacings: Vec<f64>,
}

/// Geometric factors of one cell, in the order the coefficient assembly
/// consumes them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellMetrics {
    pub volume: f64,
    /// Center spacing across the lower face.
    pub dr_lower: f64,
    /// Center spacing across the upper face.
    pub dr_upper: f64,
    /// Lower interface coordinate.
    pub r_lower: f64,
    /// Upper interface coordinate.
    pub r_upper: f64,
}

impl Grid {
    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }

    /// Width of cell `j` between its interfaces.
    pub fn cell_width(&self, j: usize) -> f64 {
        self.interfaces[j + 1] - self.interfaces[j]
    }

    pub fn min_cell_width(&self) -> f64 {
        (0..self.n_cells())
            .map(|j| self.cell_width(j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Area factor of interface `j`: 1 in planar geometry, r^2 in spherical.
    pub fn face_area(&self, j: usize) -> f64 {
        match self.geometry {
            Geometry::Planar => 1.0,
            Geometry::Spherical => self.interfaces[j] * self.interfaces[j],
        }
    }

    pub fn cell_metrics(&self, j: usize) -> Result<CellMetrics, MeshError> {
        if j >= self.n_cells() {
            return Err(MeshError::IndexOutOfRange {
                index: j,
                n_cells: self.n_cells(),
            });
        }
        Ok(CellMetrics {
            volume: self.volumes[j],
            dr_lower: self.center_spacings[j],
            dr_upper: self.center_spacings[j + 1],
            r_lower: self.interfaces[j],
            r_upper: self.interfaces[j + 1],
        })
    }

    /// Total volume of the domain in the grid's geometry.
    pub fn domain_volume(&self) -> f64 {
        let a = self.interfaces[0];
        let b = self.interfaces[self.n_cells()];
        match self.geometry {
            Geometry::Planar => b - a,
            Geometry::Spherical => (b * b * b - a * a * a) / 3.0,
        }
    }
}

/// Build a grid over `[r_in, r_out]` with `n_cells` cells. `stretch = 1`
/// gives uniform interface spacing, `stretch > 1` a geometric progression
/// with that ratio between consecutive widths.
pub fn build_grid(
    geometry: Geometry,
    r_in: f64,
    r_out: f64,
    n_cells: usize,
    stretch: f64,
) -> Result<Grid, MeshError> {
    if !(r_out > r_in) {
        return Err(MeshError::NonPositiveLength { r_in, r_out });
    }
    if geometry == Geometry::Spherical && !(r_in > 0.0) {
        return Err(MeshError::NonPositiveInnerRadius(r_in));
    }
    if n_cells < 3 {
        return Err(MeshError::TooFewCells(n_cells));
    }
    if !(stretch >= 1.0) {
        return Err(MeshError::StretchTooSmall(stretch));
    }

    let length = r_out - r_in;
    let n = n_cells;
    let mut interfaces = Vec::with_capacity(n + 1);
    if stretch == 1.0 {
        for i in 0..=n {
            interfaces.push(r_in + length * (i as f64) / (n as f64));
        }
    } else {
        // First width of the geometric series summing to the domain length.
        let mut dx = length * (stretch - 1.0) / (stretch.powi(n as i32) - 1.0);
        let mut r = r_in;
        interfaces.push(r);
        for _ in 0..n {
            r += dx;
            interfaces.push(r);
            dx *= stretch;
        }
    }
    // Pin the last interface so the grid covers the domain exactly.
    interfaces[n] = r_out;

    let centers: Vec<f64> = (0..n)
        .map(|j| 0.5 * (interfaces[j] + interfaces[j + 1]))
        .collect();
    let volumes: Vec<f64> = (0..n)
        .map(|j| match geometry {
            Geometry::Planar => interfaces[j + 1] - interfaces[j],
            Geometry::Spherical => {
                let a = interfaces[j];
                let b = interfaces[j + 1];
                (b * b * b - a * a * a) / 3.0
            }
        })
        .collect();
    let mut center_spacings = Vec::with_capacity(n + 1);
    center_spacings.push(centers[0] - interfaces[0]);
    for j in 1..n {
        center_spacings.push(centers[j] - centers[j - 1]);
    }
    center_spacings.push(interfaces[n] - centers[n - 1]);

    Ok(Grid {
        geometry,
        interfaces,
        centers,
        volumes,
        center_spacings,
    })
}
