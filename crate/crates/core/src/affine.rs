//! The affine set `L + a = {x : A x = b}` and the reducing subspace
//! `W = L^⊥ ∩ {a}^⊥` in which facial reduction directions live.

use nalgebra::{DMatrix, DVector};

use crate::algebra::Element;
use crate::error::{Error, Result};
use crate::linalg::column_space;

/// Relative rank threshold for the singular values of `A`.
pub const TAU_LIN: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct AffineSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
    anchor: DVector<f64>,
    /// Orthonormal basis of `L^⊥ = rowspace(A)`.
    row_basis: DMatrix<f64>,
    /// Orthonormal basis of `W`.
    w_basis: DMatrix<f64>,
}

impl AffineSet {
    /// Build from `m × n` rows and `b`. `n` is the ambient dimension.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if let Some(index) = a.iter().chain(b.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let n = a.ncols();
        if a.nrows() == 0 {
            return Ok(AffineSet {
                a,
                b,
                anchor: DVector::zeros(n),
                row_basis: DMatrix::zeros(n, 0),
                w_basis: DMatrix::zeros(n, 0),
            });
        }

        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().expect("left singular vectors requested");
        let vt = svd.v_t.as_ref().expect("right singular vectors requested");
        let s = &svd.singular_values;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..s.len())
            .filter(|&i| smax > 0.0 && s[i] > TAU_LIN * smax)
            .collect();

        let mut anchor = DVector::zeros(n);
        for &i in &keep {
            let coef = u.column(i).dot(&b) / s[i];
            anchor += vt.row(i).transpose() * coef;
        }
        let residual = (&a * &anchor - &b).norm();
        if residual > TAU_LIN * (1.0 + b.norm()) * smax.max(1.0) {
            return Err(Error::InfeasibleAffine { residual });
        }

        let row_basis = DMatrix::from_fn(n, keep.len(), |r, c| vt[(keep[c], r)]);
        let w_basis = remove_direction(&row_basis, &anchor);
        Ok(AffineSet {
            a,
            b,
            anchor,
            row_basis,
            w_basis,
        })
    }

    /// Build from rows given as slices.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(b))
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    /// Least-norm solution of `A x = b`.
    pub fn anchor(&self) -> Element {
        Element::new(self.anchor.as_slice().to_vec())
    }

    pub fn rank(&self) -> usize {
        self.row_basis.ncols()
    }

    pub fn row_basis(&self) -> &DMatrix<f64> {
        &self.row_basis
    }

    pub fn w_basis(&self) -> &DMatrix<f64> {
        &self.w_basis
    }

    pub fn dim_w(&self) -> usize {
        self.w_basis.ncols()
    }

    /// Orthonormal basis of `L = null(A)`.
    pub fn null_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let p = DMatrix::identity(n, n) - &self.row_basis * self.row_basis.transpose();
        column_space(&p, 0.5)
    }

    /// Metric projection onto `L + a` and the distance.
    pub fn project(&self, x: &Element) -> (Element, f64) {
        let xv = DVector::from_column_slice(x);
        let diff = &xv - &self.anchor;
        let correction = &self.row_basis * (self.row_basis.transpose() * diff);
        let dist = correction.norm();
        let proj = xv - correction;
        (Element::new(proj.as_slice().to_vec()), dist)
    }

    pub fn dist(&self, x: &Element) -> f64 {
        self.project(x).1
    }

    /// Orthogonal projection onto `W`.
    pub fn project_w(&self, z: &Element) -> Element {
        let zv = DVector::from_column_slice(z);
        let p = &self.w_basis * (self.w_basis.transpose() * zv);
        Element::new(p.as_slice().to_vec())
    }

    /// `A x − b`.
    pub fn residual(&self, x: &Element) -> DVector<f64> {
        &self.a * DVector::from_column_slice(x) - &self.b
    }
}

/// Orthonormal basis of `{v ∈ span(basis) : ⟨v, a⟩ = 0}`, for `a` in the span.
fn remove_direction(basis: &DMatrix<f64>, a: &DVector<f64>) -> DMatrix<f64> {
    let k = basis.ncols();
    let alpha = basis.transpose() * a;
    let norm = alpha.norm();
    if norm <= f64::EPSILON * a.norm().max(f64::MIN_POSITIVE) || norm == 0.0 {
        return basis.clone();
    }
    let alpha = alpha / norm;
    let p = DMatrix::identity(k, k) - &alpha * alpha.transpose();
    basis * column_space(&p, 0.5)
}
