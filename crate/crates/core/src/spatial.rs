//! Spatial discretization: tensor grids on the unit interval/square with
//! homogeneous Dirichlet boundary, finite-difference stiffness assembly,
//! diagonal (potential) terms, and smallest-eigenpair solves by inverse
//! iteration on a banded Cholesky factorization.
//!
//! The discrete L2 structure is mass-lumped: `<u, v>_h = h^d sum u_i v_i`.

// banded and CSR kernels index parallel arrays throughout
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("diffusion coefficient must be positive (node {node}: {value})")]
    NonPositiveDiffusion { node: usize, value: f64 },
    #[error("potential must be nonnegative (node {node}: {value})")]
    NegativePotential { node: usize, value: f64 },
    #[error("field length {got} does not match grid size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error(
        "eigensolve did not reach tol {tol:e} in {iters} iterations (best residual {residual:e})"
    )]
    EigNotConverged {
        iters: usize,
        tol: f64,
        residual: f64,
    },
}

/// Uniform tensor grid on the unit interval (d = 1) or unit square (d = 2).
/// Only interior nodes are unknowns; ordering is lexicographic with the
/// x index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells: [usize; 2],
    h: [f64; 2],
    n: usize,
}

impl Grid {
    pub fn unit_interval(cells: usize) -> Self {
        assert!(cells >= 2, "need at least two cells");
        Grid {
            dim: 1,
            cells: [cells, 1],
            h: [1.0 / cells as f64, 1.0],
            n: cells - 1,
        }
    }

    pub fn unit_square(cells_x: usize, cells_y: usize) -> Self {
        assert!(
            cells_x >= 2 && cells_y >= 2,
            "need at least two cells per axis"
        );
        Grid {
            dim: 2,
            cells: [cells_x, cells_y],
            h: [1.0 / cells_x as f64, 1.0 / cells_y as f64],
            n: (cells_x - 1) * (cells_y - 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of interior nodes (= unknowns).
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mesh_width(&self) -> [f64; 2] {
        self.h
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    /// Coordinates of interior node `idx`.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        debug_assert!(idx < self.n);
        if self.dim == 1 {
            [(idx + 1) as f64 * self.h[0], 0.0]
        } else {
            let nx = self.cells[0] - 1;
            let ix = idx % nx;
            let iy = idx / nx;
            [(ix + 1) as f64 * self.h[0], (iy + 1) as f64 * self.h[1]]
        }
    }

    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        let s: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
        s * self.cell_volume()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.dot(u, u).sqrt()
    }

    /// Scales `u` to unit discrete L2 norm.
    pub fn normalize(&self, u: &mut [f64]) {
        let nrm = self.norm(u);
        assert!(nrm > 0.0, "cannot normalize the zero vector");
        for x in u.iter_mut() {
            *x /= nrm;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRole {
    Diffusion,
    Potential,
    State,
}

/// Scalar samples at the interior nodes of a grid, tagged by what they mean.
#[derive(Clone, Debug)]
pub struct FieldOnGrid {
    role: FieldRole,
    values: Vec<f64>,
}

impl FieldOnGrid {
    pub fn new(grid: &Grid, role: FieldRole, values: Vec<f64>) -> Result<Self, SpatialError> {
        if values.len() != grid.len() {
            return Err(SpatialError::SizeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let field = FieldOnGrid { role, values };
        field.validate()?;
        Ok(field)
    }

    pub fn from_fn(
        grid: &Grid,
        role: FieldRole,
        f: impl Fn(&[f64; 2]) -> f64,
    ) -> Result<Self, SpatialError> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        FieldOnGrid::new(grid, role, values)
    }

    pub fn constant(grid: &Grid, role: FieldRole, value: f64) -> Result<Self, SpatialError> {
        FieldOnGrid::new(grid, role, vec![value; grid.len()])
    }

    fn validate(&self) -> Result<(), SpatialError> {
        match self.role {
            FieldRole::Diffusion => {
                for (node, &v) in self.values.iter().enumerate() {
                    if v <= 0.0 {
                        return Err(SpatialError::NonPositiveDiffusion { node, value: v });
                    }
                }
            }
            FieldRole::Potential => {
                for (node, &v) in self.values.iter().enumerate() {
                    if v < 0.0 {
                        return Err(SpatialError::NegativePotential { node, value: v });
                    }
                }
            }
            FieldRole::State => {}
        }
        Ok(())
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Symmetric sparse matrix; only the lower triangle is stored (CSR) and the
/// upper half is mirrored on apply.
#[derive(Clone, Debug)]
pub struct SparseSymmetricOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    bandwidth: usize,
}

impl SparseSymmetricOperator {
    /// Builds from lower-triangle triplets (`i >= j`), one entry per position.
    fn from_lower_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        let mut bandwidth = 0;
        for &(i, j, v) in &triplets {
            debug_assert!(i >= j && i < n);
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
            bandwidth = bandwidth.max(i - j);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSymmetricOperator {
            n,
            row_ptr,
            col_idx,
            vals,
            bandwidth,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn identity(n: usize) -> Self {
        let triplets = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_lower_triplets(n, triplets)
    }

    /// `y = A x` with the upper triangle mirrored from the stored lower half.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.vals[k];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// Returns `A + diag(w)`; the operand is unchanged.
    pub fn add_diagonal(&self, w: &[f64]) -> Result<Self, SpatialError> {
        if w.len() != self.n {
            return Err(SpatialError::SizeMismatch {
                expected: self.n,
                got: w.len(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.n {
            let mut found = false;
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.col_idx[k] == i {
                    out.vals[k] += w[i];
                    found = true;
                    break;
                }
            }
            debug_assert!(found, "assembled operators always carry a diagonal");
        }
        Ok(out)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }
}

/// Second-order finite-difference stiffness matrix for `-div(a grad u)` with
/// Dirichlet rows eliminated. Edge coefficients take the mean of the adjacent
/// nodal samples (one-sided at boundary edges), which preserves second order
/// for a in C1.
pub fn assemble_stiffness(
    grid: &Grid,
    a: &FieldOnGrid,
) -> Result<SparseSymmetricOperator, SpatialError> {
    if a.role() != FieldRole::Diffusion {
        // validation happens on construction, but role misuse is a logic bug
        panic!("assemble_stiffness expects a diffusion field");
    }
    if a.values().len() != grid.len() {
        return Err(SpatialError::SizeMismatch {
            expected: grid.len(),
            got: a.values().len(),
        });
    }
    let av = a.values();
    let n = grid.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    match grid.dim() {
        1 => {
            let inv_h2 = 1.0 / (grid.mesh_width()[0] * grid.mesh_width()[0]);
            let mut diag = vec![0.0; n];
            for i in 0..n {
                // left edge of node i
                let a_left = if i == 0 {
                    av[0]
                } else {
                    0.5 * (av[i - 1] + av[i])
                };
                // right edge of node i
                let a_right = if i + 1 == n {
                    av[n - 1]
                } else {
                    0.5 * (av[i] + av[i + 1])
                };
                diag[i] = (a_left + a_right) * inv_h2;
                if i + 1 < n {
                    triplets.push((i + 1, i, -a_right * inv_h2));
                }
            }
            for (i, d) in diag.into_iter().enumerate() {
                triplets.push((i, i, d));
            }
        }
        2 => {
            let nx = grid.cells[0] - 1;
            let inv_hx2 = 1.0 / (grid.mesh_width()[0] * grid.mesh_width()[0]);
            let inv_hy2 = 1.0 / (grid.mesh_width()[1] * grid.mesh_width()[1]);
            let mut diag = vec![0.0; n];
            for idx in 0..n {
                let ix = idx % nx;
                let iy = idx / nx;
                let a_here = av[idx];
                // x direction
                let a_left = if ix == 0 {
                    a_here
                } else {
                    0.5 * (av[idx - 1] + a_here)
                };
                let a_right = if ix + 1 == nx {
                    a_here
                } else {
                    0.5 * (a_here + av[idx + 1])
                };
                diag[idx] += (a_left + a_right) * inv_hx2;
                if ix + 1 < nx {
                    triplets.push((idx + 1, idx, -a_right * inv_hx2));
                }
                // y direction
                let a_down = if iy == 0 {
                    a_here
                } else {
                    0.5 * (av[idx - nx] + a_here)
                };
                let a_up = if idx + nx >= n {
                    a_here
                } else {
                    0.5 * (a_here + av[idx + nx])
                };
                diag[idx] += (a_down + a_up) * inv_hy2;
                if idx + nx < n {
                    triplets.push((idx + nx, idx, -a_up * inv_hy2));
                }
            }
            for (i, d) in diag.into_iter().enumerate() {
                triplets.push((i, i, d));
            }
        }
        _ => unreachable!("grids are one- or two-dimensional"),
    }
    Ok(SparseSymmetricOperator::from_lower_triplets(n, triplets))
}

/// Adds a pointwise potential/diagonal field to an assembled operator.
pub fn add_diagonal(
    opr: &SparseSymmetricOperator,
    w: &FieldOnGrid,
) -> Result<SparseSymmetricOperator, SpatialError> {
    opr.add_diagonal(w.values())
}

/// Banded Cholesky factorization `A = L L^T`; reused across inverse-iteration
/// steps on the same operator.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // row-major band storage: row i holds columns [i - bw, i]
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn new(opr: &SparseSymmetricOperator) -> Result<Self, SpatialError> {
        let n = opr.n;
        let bw = opr.bandwidth;
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for k in opr.row_ptr[i]..opr.row_ptr[i + 1] {
                let j = opr.col_idx[k];
                band[i * w + (j + bw - i)] = opr.vals[k];
            }
        }
        // in-place factorization
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            for j in j_lo..=i {
                let k_lo = j_lo.max(j.saturating_sub(bw));
                let mut sum = band[i * w + (j + bw - i)];
                for k in k_lo..j {
                    sum -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if sum <= 0.0 {
                        return Err(SpatialError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    band[i * w + bw] = sum.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = sum / band[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let w = self.bw + 1;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let j_lo = i.saturating_sub(self.bw);
            let mut sum = x[i];
            for j in j_lo..i {
                sum -= self.band[i * w + (j + self.bw - i)] * x[j];
            }
            x[i] = sum / self.band[i * w + self.bw];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let mut sum = x[i];
            let j_hi = (i + self.bw).min(self.n - 1);
            for j in i + 1..=j_hi {
                sum -= self.band[j * w + (i + self.bw - j)] * x[j];
            }
            x[i] = sum / self.band[i * w + self.bw];
        }
        x
    }
}

/// Converged eigenpair of a discrete operator: unit discrete-L2 eigenvector
/// with nonnegative mean, eigenvalue, and the final residual norm.
#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    pub vector: FieldOnGrid,
    pub residual_norm: f64,
    pub iterations: usize,
}

// Plain inverse iteration contracts like lambda1/lambda2 per step; strongly
// nonlinear operators cluster the low spectrum, so allow many cheap steps
// rather than re-factoring with shifts.
const EIG_MAX_ITERS: usize = 50_000;

/// Smallest eigenpair of a symmetric positive-definite operator by inverse
/// iteration with one banded Cholesky factorization. Stops when
/// `||A v - lambda v||_h <= tol * |lambda|`; the sign is fixed so the mean of
/// the eigenvector is positive.
pub fn smallest_eigpair(
    opr: &SparseSymmetricOperator,
    grid: &Grid,
    tol: f64,
    v0: Option<&FieldOnGrid>,
) -> Result<EigPair, SpatialError> {
    let chol = BandedCholesky::new(opr)?;
    let mut v: Vec<f64> = match v0 {
        Some(f) if f.values().len() == grid.len() => f.values().to_vec(),
        Some(f) => {
            return Err(SpatialError::SizeMismatch {
                expected: grid.len(),
                got: f.values().len(),
            })
        }
        None => vec![1.0; grid.len()],
    };
    grid.normalize(&mut v);
    let mut best_residual = f64::INFINITY;
    let mut lambda = 0.0;
    for iter in 0..EIG_MAX_ITERS {
        let av = opr.apply(&v);
        lambda = grid.dot(&av, &v);
        let residual: f64 = {
            let diff: Vec<f64> = av.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
            grid.norm(&diff)
        };
        best_residual = best_residual.min(residual);
        if residual <= tol * lambda.abs() {
            fix_sign(grid, &mut v);
            let vector = FieldOnGrid {
                role: FieldRole::State,
                values: v,
            };
            return Ok(EigPair {
                value: lambda,
                vector,
                residual_norm: residual,
                iterations: iter,
            });
        }
        v = chol.solve(&v);
        grid.normalize(&mut v);
    }
    let _ = lambda;
    Err(SpatialError::EigNotConverged {
        iters: EIG_MAX_ITERS,
        tol,
        residual: best_residual,
    })
}

/// Smallest eigenvalue on the discrete-L2 orthogonal complement of a
/// converged ground vector, by deflated inverse iteration.
pub fn second_eigvalue(
    opr: &SparseSymmetricOperator,
    grid: &Grid,
    ground: &EigPair,
    tol: f64,
) -> Result<f64, SpatialError> {
    let chol = BandedCholesky::new(opr)?;
    let u1 = ground.vector.values();
    let deflate = |v: &mut Vec<f64>| {
        let c = grid.dot(v, u1);
        for (x, &u) in v.iter_mut().zip(u1) {
            *x -= c * u;
        }
    };
    // start orthogonal to the ground vector with a deterministic profile
    let mut v: Vec<f64> = (0..grid.len())
        .map(|i| ((i + 1) as f64 * 2.399963).sin())
        .collect();
    deflate(&mut v);
    grid.normalize(&mut v);
    let mut best_residual = f64::INFINITY;
    for _ in 0..EIG_MAX_ITERS {
        let mut av = opr.apply(&v);
        deflate(&mut av);
        let lambda = grid.dot(&av, &v);
        let diff: Vec<f64> = av.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
        let residual = grid.norm(&diff);
        best_residual = best_residual.min(residual);
        if residual <= tol * lambda.abs() {
            return Ok(lambda);
        }
        v = chol.solve(&v);
        deflate(&mut v);
        grid.normalize(&mut v);
    }
    Err(SpatialError::EigNotConverged {
        iters: EIG_MAX_ITERS,
        tol,
        residual: best_residual,
    })
}

fn fix_sign(grid: &Grid, v: &mut [f64]) {
    let mean: f64 = v.iter().sum::<f64>() * grid.cell_volume();
    if mean < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::stream_rng;
    use rand::Rng;
    use std::f64::consts::PI;

    fn laplacian_1d(cells: usize) -> (Grid, SparseSymmetricOperator) {
        let grid = Grid::unit_interval(cells);
        let a = FieldOnGrid::constant(&grid, FieldRole::Diffusion, 1.0).unwrap();
        let opr = assemble_stiffness(&grid, &a).unwrap();
        (grid, opr)
    }

    #[test]
    fn tridiagonal_entries_quarter_mesh() {
        let (_, opr) = laplacian_1d(4);
        let d = opr.diagonal();
        assert_eq!(d, vec![32.0, 32.0, 32.0]);
        // off-diagonal via apply on a unit vector
        let y = opr.apply(&[1.0, 0.0, 0.0]);
        assert_eq!(y, vec![32.0, -16.0, 0.0]);
    }

    #[test]
    fn single_interior_node_square() {
        let grid = Grid::unit_square(2, 2);
        let a = FieldOnGrid::constant(&grid, FieldRole::Diffusion, 1.0).unwrap();
        let opr = assemble_stiffness(&grid, &a).unwrap();
        assert_eq!(opr.size(), 1);
        assert_eq!(opr.diagonal(), vec![16.0]);
    }

    #[test]
    fn smallest_eig_closed_form_quarter_mesh() {
        let (grid, opr) = laplacian_1d(4);
        let pair = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        let h = 0.25;
        let expected = (4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        assert!(
            (pair.value - expected).abs() < 1e-9,
            "{} vs {}",
            pair.value,
            expected
        );
        assert!((pair.value - 9.3726).abs() < 1e-3);
    }

    #[test]
    fn smallest_eig_near_continuum() {
        let (grid, opr) = laplacian_1d(100);
        let pair = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        assert!((pair.value - PI * PI).abs() < 1e-3);
        // the discrete eigenvector is the sampled sine, normalized
        let h = grid.mesh_width()[0];
        let exact: Vec<f64> = (0..grid.len())
            .map(|i| (PI * (i + 1) as f64 * h).sin() * 2.0_f64.sqrt())
            .collect();
        let diff: Vec<f64> = pair
            .vector
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| a - b)
            .collect();
        assert!(grid.norm(&diff) < 1e-8);
        assert!(grid.norm(pair.vector.values()) - 1.0 < 1e-12);
    }

    #[test]
    fn identity_eigpair() {
        let grid = Grid::unit_interval(10);
        let opr = SparseSymmetricOperator::identity(grid.len());
        let pair = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        assert!((pair.value - 1.0).abs() < 1e-14);
        assert!(pair.vector.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn constant_shift_moves_spectrum_exactly() {
        let (grid, opr) = laplacian_1d(50);
        let base = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        let c = 3.75;
        let shifted_op = opr.add_diagonal(&vec![c; grid.len()]).unwrap();
        let shifted = smallest_eigpair(&shifted_op, &grid, 1e-12, None).unwrap();
        assert!((shifted.value - base.value - c).abs() < 1e-9);
        let diff: Vec<f64> = shifted
            .vector
            .values()
            .iter()
            .zip(base.vector.values())
            .map(|(a, b)| a - b)
            .collect();
        assert!(grid.norm(&diff) < 1e-9);
    }

    #[test]
    fn zero_diagonal_add_is_identity() {
        let (grid, opr) = laplacian_1d(16);
        let w = FieldOnGrid::constant(&grid, FieldRole::Potential, 0.0).unwrap();
        let same = add_diagonal(&opr, &w).unwrap();
        let x: Vec<f64> = (0..grid.len()).map(|i| (i as f64 + 0.5).cos()).collect();
        let y0 = opr.apply(&x);
        let y1 = same.apply(&x);
        for (a, b) in y0.iter().zip(&y1) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn second_eigvalue_laplacian() {
        let (grid, opr) = laplacian_1d(200);
        let ground = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        let second = second_eigvalue(&opr, &grid, &ground, 1e-11).unwrap();
        let h = grid.mesh_width()[0];
        let expected = (4.0 / (h * h)) * (PI * h).sin().powi(2);
        assert!(
            (second - expected).abs() < 1e-6,
            "{} vs {}",
            second,
            expected
        );
        assert!((second - 4.0 * PI * PI).abs() < 0.01);
    }

    #[test]
    fn second_eigvalue_identity_and_shift() {
        let grid = Grid::unit_interval(10);
        let opr = SparseSymmetricOperator::identity(grid.len());
        let ground = smallest_eigpair(&opr, &grid, 1e-12, None).unwrap();
        let second = second_eigvalue(&opr, &grid, &ground, 1e-10).unwrap();
        assert!((second - 1.0).abs() < 1e-12);

        let (grid, lap) = laplacian_1d(60);
        let ground = smallest_eigpair(&lap, &grid, 1e-12, None).unwrap();
        let s0 = second_eigvalue(&lap, &grid, &ground, 1e-11).unwrap();
        let c = 2.5;
        let shifted = lap.add_diagonal(&vec![c; grid.len()]).unwrap();
        let ground_s = smallest_eigpair(&shifted, &grid, 1e-12, None).unwrap();
        let s1 = second_eigvalue(&shifted, &grid, &ground_s, 1e-11).unwrap();
        assert!((s1 - s0 - c).abs() < 1e-7);
    }

    #[test]
    fn apply_is_symmetric() {
        let grid = Grid::unit_square(9, 7);
        let a =
            FieldOnGrid::from_fn(&grid, FieldRole::Diffusion, |x| 1.0 + 0.5 * x[0] + x[1]).unwrap();
        let opr = assemble_stiffness(&grid, &a).unwrap();
        let mut rng = stream_rng(7, "symmetry", 0);
        for _ in 0..5 {
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let w: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let avw = grid.dot(&opr.apply(&v), &w);
            let vaw = grid.dot(&v, &opr.apply(&w));
            assert!((avw - vaw).abs() <= 1e-12 * avw.abs().max(vaw.abs()).max(1.0));
        }
    }

    #[test]
    fn coercivity_lower_bound() {
        let grid = Grid::unit_interval(40);
        let a = FieldOnGrid::from_fn(&grid, FieldRole::Diffusion, |x| 2.0 + (6.0 * x[0]).sin())
            .unwrap();
        let a_min = a.min();
        let b = FieldOnGrid::from_fn(&grid, FieldRole::Potential, |x| x[0] * x[0]).unwrap();
        let opr = add_diagonal(&assemble_stiffness(&grid, &a).unwrap(), &b).unwrap();
        let ones = FieldOnGrid::constant(&grid, FieldRole::Diffusion, 1.0).unwrap();
        let ref_opr = assemble_stiffness(&grid, &ones).unwrap();
        let mut rng = stream_rng(11, "coercivity", 0);
        for _ in 0..20 {
            let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let quad = grid.dot(&opr.apply(&v), &v);
            let ref_quad = grid.dot(&ref_opr.apply(&v), &v);
            assert!(quad >= a_min * ref_quad - 1e-10);
        }
    }

    #[test]
    fn refinement_slope_is_second_order() {
        let mut points = Vec::new();
        for k in [32usize, 64, 128, 256, 512] {
            let (grid, opr) = laplacian_1d(k);
            let pair = smallest_eigpair(&opr, &grid, 1e-11, None).unwrap();
            let err = (pair.value - PI * PI).abs();
            points.push(((1.0 / k as f64).ln(), err.ln()));
        }
        // least-squares slope of log err against log h
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope - 2.0).abs() < 0.2, "slope {}", slope);
    }

    #[test]
    fn rejects_nonpositive_diffusion() {
        let grid = Grid::unit_interval(8);
        let err = FieldOnGrid::new(&grid, FieldRole::Diffusion, vec![0.0; grid.len()]);
        assert!(matches!(
            err,
            Err(SpatialError::NonPositiveDiffusion { node: 0, .. })
        ));
    }
}
