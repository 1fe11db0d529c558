//! Dense linear-algebra helpers: the cyclic Jacobi symmetric eigensolver,
//! `svec` packing of symmetric matrices, and orthonormal bases.

use nalgebra::{DMatrix, DVector};

use std::f64::consts::SQRT_2;

/// Convergence threshold on the off-diagonal Frobenius mass, relative to ‖A‖.
pub const JACOBI_TOL: f64 = 1e-13;
/// Hard cap on cyclic sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations on a symmetric matrix.
///
/// Only the symmetric part of `a` is used. Stops once the off-diagonal
/// Frobenius mass falls below `JACOBI_TOL * ‖a‖_F` or after
/// `JACOBI_MAX_SWEEPS` full sweeps.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    let mut sweeps = 0;
    if scale > 0.0 {
        let target = JACOBI_TOL * scale;
        while sweeps < JACOBI_MAX_SWEEPS {
            if off_diagonal_norm(&m) <= target {
                break;
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymEigen {
        values,
        vectors,
        sweeps,
    }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Number of `svec` coordinates of an `n × n` symmetric matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` in the packed lower triangle, column by column.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // columns before j hold Σ_{c<j} (n - c) entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Unpack canonical `svec` coordinates into a dense symmetric matrix.
pub fn svec_to_mat(coords: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, i)] = coords[k];
            } else {
                let v = coords[k] / SQRT_2;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            k += 1;
        }
    }
    m
}

/// Pack the symmetric part of `m` into canonical `svec` coordinates.
pub fn mat_to_svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            if i == j {
                out.push(m[(i, i)]);
            } else {
                out.push(0.5 * (m[(i, j)] + m[(j, i)]) * SQRT_2);
            }
        }
    }
    out
}

/// `svec(v vᵀ)` for a column vector.
pub fn svec_outer(v: &DVector<f64>) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            if i == j {
                out.push(v[i] * v[i]);
            } else {
                out.push(v[i] * v[j] * SQRT_2);
            }
        }
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`, with rank
/// decided at `rel_tol * σ_max`.
pub fn column_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
