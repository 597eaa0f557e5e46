//! Direct solvers for the coefficient-matrix hierarchy: scalar and block
//! tridiagonal systems via Thomas elimination, (block-)diagonal truncations,
//! and the row-sum dominance criterion that decides which truncation is safe.
//!
//! Thomas elimination runs without pivoting; the assembled diffusion and
//! upwind systems are diagonally dominant, and the pivot magnitude is checked
//! against the row scale at every step so a non-dominant system fails loudly
//! instead of silently.

use thiserror::Error;

/// Largest supported block size. The framework targets small coupled systems.
pub const MAX_BLOCK_SIZE: usize = 8;

const PIVOT_REL_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("zero pivot at row {row} (system singular or not diagonally dominant)")]
    ZeroPivot { row: usize },
    #[error("non-positive diagonal entry {value} at cell {cell}")]
    NonPositiveDiagonal { cell: usize, value: f64 },
    #[error("singular {m}x{m} block at cell {cell}")]
    SingularBlock { cell: usize, m: usize },
    #[error("block size {0} exceeds the supported maximum {MAX_BLOCK_SIZE}")]
    BlockTooLarge(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Scalar tridiagonal system. `sub` and `sup` have length N-1.
#[derive(Clone, Debug)]
pub struct TriDiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Solve `A x = rhs` by Thomas elimination.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n();
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut w = vec![0.0; n]; // eliminated super-diagonal
        let mut x = rhs.to_vec();

        let scale0 = self.diag[0].abs() + self.sup.first().map_or(0.0, |s| s.abs());
        let mut pivot = self.diag[0];
        if pivot.abs() <= PIVOT_REL_FLOOR * scale0 {
            return Err(LinalgError::ZeroPivot { row: 0 });
        }
        if n > 1 {
            w[0] = self.sup[0] / pivot;
        }
        x[0] /= pivot;

        for i in 1..n {
            let scale = self.sub[i - 1].abs()
                + self.diag[i].abs()
                + if i < n - 1 { self.sup[i].abs() } else { 0.0 };
            pivot = self.diag[i] - self.sub[i - 1] * w[i - 1];
            if pivot.abs() <= PIVOT_REL_FLOOR * scale {
                return Err(LinalgError::ZeroPivot { row: i });
            }
            if i < n - 1 {
                w[i] = self.sup[i] / pivot;
            }
            x[i] = (x[i] - self.sub[i - 1] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] -= w[i] * x[i + 1];
        }
        Ok(x)
    }

    /// `A x`, for residual checks.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.sub[i - 1] * x[i - 1];
                }
                if i < n - 1 {
                    v += self.sup[i] * x[i + 1];
                }
                v
            })
            .collect()
    }
}

/// Block tridiagonal system with uniform dense `m x m` blocks (row-major).
#[derive(Clone, Debug)]
pub struct BlockTriDiagonal {
    pub m: usize,
    pub sub: Vec<Vec<f64>>,
    pub diag: Vec<Vec<f64>>,
    pub sup: Vec<Vec<f64>>,
}

impl BlockTriDiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Block Thomas elimination; `rhs` is cell-major of length `n * m`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let (n, m) = (self.n(), self.m);
        if m > MAX_BLOCK_SIZE {
            return Err(LinalgError::BlockTooLarge(m));
        }
        if rhs.len() != n * m {
            return Err(LinalgError::DimensionMismatch {
                expected: n * m,
                got: rhs.len(),
            });
        }
        // Forward sweep: d_i' = d_i - sub_i * inv(d_{i-1}') * sup_{i-1},
        // with the matching right-hand-side update.
        let mut dmod: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut inv: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut r: Vec<f64> = rhs.to_vec();
        dmod.push(self.diag[0].clone());
        inv.push(invert_dense(&dmod[0], m).ok_or(LinalgError::SingularBlock { cell: 0, m })?);
        for i in 1..n {
            let coupling = mat_mul(&self.sub[i - 1], &inv[i - 1], m);
            let mut d = self.diag[i].clone();
            let correction = mat_mul(&coupling, &self.sup[i - 1], m);
            for k in 0..m * m {
                d[k] -= correction[k];
            }
            let (lo, hi) = r.split_at_mut(i * m);
            mat_vec_sub(&coupling, &lo[(i - 1) * m..i * m], &mut hi[..m], m);
            inv.push(invert_dense(&d, m).ok_or(LinalgError::SingularBlock { cell: i, m })?);
            dmod.push(d);
        }
        // Back substitution.
        let mut x = vec![0.0; n * m];
        let xn = mat_vec(&inv[n - 1], &r[(n - 1) * m..], m);
        x[(n - 1) * m..].copy_from_slice(&xn);
        for i in (0..n - 1).rev() {
            let mut t = r[i * m..(i + 1) * m].to_vec();
            let coupled = mat_vec(&self.sup[i], &x[(i + 1) * m..(i + 2) * m], m);
            for k in 0..m {
                t[k] -= coupled[k];
            }
            let xi = mat_vec(&inv[i], &t, m);
            x[i * m..(i + 1) * m].copy_from_slice(&xi);
        }
        Ok(x)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n(), self.m);
        let mut y = vec![0.0; n * m];
        for i in 0..n {
            let mut acc = mat_vec(&self.diag[i], &x[i * m..(i + 1) * m], m);
            if i > 0 {
                let t = mat_vec(&self.sub[i - 1], &x[(i - 1) * m..i * m], m);
                for k in 0..m {
                    acc[k] += t[k];
                }
            }
            if i < n - 1 {
                let t = mat_vec(&self.sup[i], &x[(i + 1) * m..(i + 2) * m], m);
                for k in 0..m {
                    acc[k] += t[k];
                }
            }
            y[i * m..(i + 1) * m].copy_from_slice(&acc);
        }
        y
    }
}

/// Diagonal truncation of the coefficient matrix: one positive scalar or one
/// invertible `m x m` block per cell. Solves decouple cell by cell.
#[derive(Clone, Debug)]
pub enum DiagonalApprox {
    Scalar(Vec<f64>),
    Block { m: usize, blocks: Vec<Vec<f64>> },
}

impl DiagonalApprox {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match self {
            DiagonalApprox::Scalar(diag) => {
                if rhs.len() != diag.len() {
                    return Err(LinalgError::DimensionMismatch {
                        expected: diag.len(),
                        got: rhs.len(),
                    });
                }
                let mut x = Vec::with_capacity(rhs.len());
                for (cell, (&d, &r)) in diag.iter().zip(rhs).enumerate() {
                    if !(d > 0.0) {
                        return Err(LinalgError::NonPositiveDiagonal { cell, value: d });
                    }
                    x.push(r / d);
                }
                Ok(x)
            }
            DiagonalApprox::Block { m, blocks } => {
                let m = *m;
                if m > MAX_BLOCK_SIZE {
                    return Err(LinalgError::BlockTooLarge(m));
                }
                if rhs.len() != blocks.len() * m {
                    return Err(LinalgError::DimensionMismatch {
                        expected: blocks.len() * m,
                        got: rhs.len(),
                    });
                }
                let mut x = vec![0.0; rhs.len()];
                for (cell, block) in blocks.iter().enumerate() {
                    let mut a = block.clone();
                    let mut b = rhs[cell * m..(cell + 1) * m].to_vec();
                    lu_solve_in_place(&mut a, &mut b, m)
                        .ok_or(LinalgError::SingularBlock { cell, m })?;
                    x[cell * m..(cell + 1) * m].copy_from_slice(&b);
                }
                Ok(x)
            }
        }
    }
}

/// Which entries of the assembled system a truncated solve retains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Retained {
    /// Full stencil kept; nothing is dropped.
    All,
    /// Diagonal kept, sub/super-diagonals dropped.
    DiagonalOnly,
    /// Only the 1/dt identity contribution kept.
    IdentityOnly,
}

/// Row-sum dominance check for a truncated solve of the scalar system.
///
/// `identity_part[j]` is the 1/dt contribution sitting inside `full.diag[j]`.
/// Returns `(satisfied, margin)` where `margin` is the minimum over rows of
/// (kept diagonal − row sum of the moduli of dropped entries); the truncation
/// is spectrally safe when the margin is positive. With `IdentityOnly` this
/// reduces to the classical 1/dt > |sub| + |sup| time-step restriction.
#[allow(clippy::needless_range_loop)] // indexing three parallel arrays by row
pub fn row_sum_criterion(
    full: &TriDiagonal,
    identity_part: &[f64],
    retained: Retained,
) -> (bool, f64) {
    let n = full.n();
    let mut margin = f64::INFINITY;
    for j in 0..n {
        let off = if j > 0 { full.sub[j - 1].abs() } else { 0.0 }
            + if j < n - 1 { full.sup[j].abs() } else { 0.0 };
        let (kept, dropped) = match retained {
            Retained::All => (full.diag[j], 0.0),
            Retained::DiagonalOnly => (full.diag[j], off),
            Retained::IdentityOnly => (identity_part[j], off),
        };
        margin = margin.min(kept - dropped);
    }
    (margin > 0.0, margin)
}

/// Block generalization of [`row_sum_criterion`]: each off-diagonal block is
/// measured by its infinity norm and the kept diagonal block by its minimum
/// row dominance (|d_ii| − sum of |d_ik|, k != i).
#[allow(clippy::needless_range_loop)] // indexing three parallel arrays by row
pub fn row_sum_criterion_block(
    full: &BlockTriDiagonal,
    identity_part: &[f64],
    retained: Retained,
) -> (bool, f64) {
    let (n, m) = (full.n(), full.m);
    let mut margin = f64::INFINITY;
    for j in 0..n {
        let off = if j > 0 {
            inf_norm(&full.sub[j - 1], m)
        } else {
            0.0
        } + if j < n - 1 {
            inf_norm(&full.sup[j], m)
        } else {
            0.0
        };
        let (kept, dropped) = match retained {
            Retained::All => (min_row_dominance(&full.diag[j], m), 0.0),
            Retained::DiagonalOnly => (min_row_dominance(&full.diag[j], m), off),
            Retained::IdentityOnly => (identity_part[j], off),
        };
        margin = margin.min(kept - dropped);
    }
    (margin > 0.0, margin)
}

fn inf_norm(a: &[f64], m: usize) -> f64 {
    (0..m)
        .map(|i| a[i * m..(i + 1) * m].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn min_row_dominance(a: &[f64], m: usize) -> f64 {
    (0..m)
        .map(|i| {
            let row = &a[i * m..(i + 1) * m];
            let off: f64 = row
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, v)| v.abs())
                .sum();
            row[i].abs() - off
        })
        .fold(f64::INFINITY, f64::min)
}

// -------- dense m x m kernels (row-major, partial pivoting) --------

/// Solve `a x = b` in place, destroying `a`. Returns `None` when singular.
pub fn lu_solve_in_place(a: &mut [f64], b: &mut [f64], m: usize) -> Option<()> {
    for col in 0..m {
        let mut pivot_row = col;
        let mut pivot_mag = a[col * m + col].abs();
        for row in col + 1..m {
            let mag = a[row * m + col].abs();
            if mag > pivot_mag {
                pivot_row = row;
                pivot_mag = mag;
            }
        }
        if pivot_mag == 0.0 || !pivot_mag.is_finite() {
            return None;
        }
        if pivot_row != col {
            for k in 0..m {
                a.swap(col * m + k, pivot_row * m + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * m + col];
        for row in col + 1..m {
            let factor = a[row * m + col] / pivot;
            if factor != 0.0 {
                for k in col..m {
                    a[row * m + k] -= factor * a[col * m + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in row + 1..m {
            acc -= a[row * m + k] * b[k];
        }
        b[row] = acc / a[row * m + row];
    }
    Some(())
}

fn invert_dense(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for col in 0..m {
        let mut work = a.to_vec();
        let mut e = vec![0.0; m];
        e[col] = 1.0;
        lu_solve_in_place(&mut work, &mut e, m)?;
        for row in 0..m {
            inv[row * m + col] = e[row];
        }
    }
    Some(inv)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik != 0.0 {
                for j in 0..m {
                    c[i * m + j] += aik * b[k * m + j];
                }
            }
        }
    }
    c
}

fn mat_vec(a: &[f64], x: &[f64], m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| (0..m).map(|k| a[i * m + k] * x[k]).sum())
        .collect()
}

/// `out -= a * x`
fn mat_vec_sub(a: &[f64], x: &[f64], out: &mut [f64], m: usize) {
    for i in 0..m {
        for k in 0..m {
            out[i] -= a[i * m + k] * x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent dense Gaussian-elimination oracle with partial pivoting.
    #[allow(clippy::needless_range_loop)] // textbook index form
    fn dense_solve_oracle(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut aug: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut r = row.clone();
                r.push(bi);
                r
            })
            .collect();
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&p, &q| aug[p][col].abs().partial_cmp(&aug[q][col].abs()).unwrap())
                .unwrap();
            aug.swap(col, pivot_row);
            let pivot = aug[col][col];
            assert!(pivot.abs() > 0.0, "oracle hit singular matrix");
            for row in col + 1..n {
                let f = aug[row][col] / pivot;
                for k in col..=n {
                    let v = aug[col][k];
                    aug[row][k] -= f * v;
                }
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut acc = aug[row][n];
            for k in row + 1..n {
                acc -= aug[row][k] * x[k];
            }
            x[row] = acc / aug[row][row];
        }
        x
    }

    fn tri_to_dense(t: &TriDiagonal) -> Vec<Vec<f64>> {
        let n = t.n();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = t.diag[i];
            if i > 0 {
                a[i][i - 1] = t.sub[i - 1];
            }
            if i < n - 1 {
                a[i][i + 1] = t.sup[i];
            }
        }
        a
    }

    #[test]
    fn identity_solve() {
        let t = TriDiagonal {
            sub: vec![0.0; 4],
            diag: vec![1.0; 5],
            sup: vec![0.0; 4],
        };
        let rhs = [3.0, -1.0, 0.5, 2.0, 7.0];
        assert_eq!(t.solve(&rhs).unwrap(), rhs.to_vec());
    }

    #[test]
    fn two_by_two_by_hand() {
        let t = TriDiagonal {
            sub: vec![1.0],
            diag: vec![2.0, 2.0],
            sup: vec![1.0],
        };
        let x = t.solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        // verify by substitution
        let r = t.mul_vec(&x);
        assert!((r[0] - 3.0).abs() < 1e-15 && (r[1] - 3.0).abs() < 1e-15);
    }

    fn random_dominant_tridiag(rng: &mut ChaCha8Rng, n: usize) -> TriDiagonal {
        let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let off = if i > 0 { sub[i - 1].abs() } else { 0.0 }
                    + if i < n - 1 { sup[i].abs() } else { 0.0 };
                off + rng.gen_range(0.1..2.0)
            })
            .collect();
        TriDiagonal { sub, diag, sup }
    }

    #[test]
    fn random_tridiagonal_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.gen_range(3..=50);
            let t = random_dominant_tridiag(&mut rng, n);
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = t.solve(&rhs).unwrap();
            let expect = dense_solve_oracle(&tri_to_dense(&t), &rhs);
            let scale = expect.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            for i in 0..n {
                assert!((x[i] - expect[i]).abs() <= 1e-12 * scale, "row {i}");
            }
        }
    }

    #[test]
    fn zero_pivot_detected() {
        let t = TriDiagonal {
            sub: vec![1.0, 1.0],
            diag: vec![1.0, 1.0, 1.0],
            sup: vec![1.0, 1.0],
        };
        // row 1 pivot: 1 - 1*1 = 0
        assert!(matches!(
            t.solve(&[1.0, 1.0, 1.0]),
            Err(LinalgError::ZeroPivot { row: 1 })
        ));
    }

    #[test]
    fn diagonal_scalar_solve() {
        let d = DiagonalApprox::Scalar(vec![2.0, 4.0]);
        assert_eq!(d.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        // pure explicit limit: diag = 1/dt
        let dt = 0.25;
        let d = DiagonalApprox::Scalar(vec![1.0 / dt; 3]);
        let x = d.solve(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![0.25, 0.5, 0.75]);
        let bad = DiagonalApprox::Scalar(vec![1.0, -0.5]);
        assert!(matches!(
            bad.solve(&[1.0, 1.0]),
            Err(LinalgError::NonPositiveDiagonal { cell: 1, .. })
        ));
    }

    #[test]
    fn diagonal_block_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 3;
        for cell in 0..20 {
            let block: Vec<f64> = (0..m * m)
                .map(|k| rng.gen_range(-1.0..1.0) + if k % (m + 1) == 0 { 4.0 } else { 0.0 })
                .collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let d = DiagonalApprox::Block {
                m,
                blocks: vec![block.clone()],
            };
            let x = d.solve(&rhs).unwrap();
            let dense: Vec<Vec<f64>> = (0..m).map(|i| block[i * m..(i + 1) * m].to_vec()).collect();
            let expect = dense_solve_oracle(&dense, &rhs);
            for i in 0..m {
                assert!((x[i] - expect[i]).abs() < 1e-12, "cell {cell} row {i}");
            }
        }
    }

    #[test]
    fn block_tridiagonal_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, m) = (12, 3);
        let mk_block = |rng: &mut ChaCha8Rng, boost: f64| -> Vec<f64> {
            (0..m * m)
                .map(|k| rng.gen_range(-0.5..0.5) + if k % (m + 1) == 0 { boost } else { 0.0 })
                .collect()
        };
        let sys = BlockTriDiagonal {
            m,
            sub: (0..n - 1).map(|_| mk_block(&mut rng, 0.0)).collect(),
            diag: (0..n).map(|_| mk_block(&mut rng, 6.0)).collect(),
            sup: (0..n - 1).map(|_| mk_block(&mut rng, 0.0)).collect(),
        };
        let rhs: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = sys.solve(&rhs).unwrap();
        // assemble dense and compare
        let mut dense = vec![vec![0.0; n * m]; n * m];
        for i in 0..n {
            for r in 0..m {
                for c in 0..m {
                    dense[i * m + r][i * m + c] = sys.diag[i][r * m + c];
                    if i > 0 {
                        dense[i * m + r][(i - 1) * m + c] = sys.sub[i - 1][r * m + c];
                    }
                    if i < n - 1 {
                        dense[i * m + r][(i + 1) * m + c] = sys.sup[i][r * m + c];
                    }
                }
            }
        }
        let expect = dense_solve_oracle(&dense, &rhs);
        let scale = expect.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..n * m {
            assert!((x[i] - expect[i]).abs() <= 1e-10 * scale, "entry {i}");
        }
        // residual check through mul_vec as well
        let r = sys.mul_vec(&x);
        for i in 0..n * m {
            assert!((r[i] - rhs[i]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn row_sum_criterion_cases() {
        // Uniform planar diffusion row: sub = sup = -nu/dx^2, D = 2 nu/dx^2.
        let (nu, dx) = (0.01, 0.05f64);
        let s = -nu / (dx * dx);
        let n = 10;
        let build = |dt: f64| {
            let inv_dt = 1.0 / dt;
            let tri = TriDiagonal {
                sub: vec![s; n - 1],
                diag: vec![inv_dt + 2.0 * nu / (dx * dx); n],
                sup: vec![s; n - 1],
            };
            (tri, vec![inv_dt; n])
        };
        // All entries kept: dominant for every dt.
        for &dt in &[1e-6, 1.0, 1e6] {
            let (tri, idt) = build(dt);
            assert!(row_sum_criterion(&tri, &idt, Retained::All).0, "dt={dt}");
            assert!(row_sum_criterion(&tri, &idt, Retained::DiagonalOnly).0);
        }
        // Identity-only: stable side of dt < dx^2/(2 nu).
        let (tri, idt) = build(0.49 * dx * dx / nu);
        let (ok, margin) = row_sum_criterion(&tri, &idt, Retained::IdentityOnly);
        assert!(ok && margin > 0.0);
        let (tri, idt) = build(0.51 * dx * dx / nu);
        let (ok, margin) = row_sum_criterion(&tri, &idt, Retained::IdentityOnly);
        assert!(!ok && margin < 0.0);
    }
}
