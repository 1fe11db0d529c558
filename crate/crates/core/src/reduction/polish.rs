//! Exact-structure refinement of an approximate reducing direction.
//!
//! Dykstra's method reaches the right neighbourhood quickly but creeps
//! towards the boundary of the cone when the feasible directions are
//! tangential to it. Given a guess for how many eigenvalues of `Q_c z` are
//! positive in each block, the conditions on `z` become a small system of
//! polynomial equations in a basis of `W` and Burer–Monteiro factors, which
//! Levenberg–Marquardt solves to machine precision.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::algebra::{AlgebraSpec, BlockKind, Element, FaceDescriptor, FrameView};
use crate::linalg::{mat_to_svec, svec_len, svec_to_mat, symmetric_eigen};

const LM_MAX_ITER: usize = 200;
const LM_TOL: f64 = 1e-13;
const ZERO_EIG_TOL: f64 = 1e-10;
const POSITIVE_EIG_REL: f64 = 1e-3;

enum Piece {
    /// `svec(Uᵀ Z U) − svec(G Gᵀ)` with `G` of shape `k × r` stored at `offset`.
    Sym {
        map: DMatrix<f64>,
        k: usize,
        r: usize,
        offset: usize,
    },
    /// `x₀ − ‖x̄‖` on a whole spin block.
    SpinBoundary { range: Range<usize> },
}

struct System<'a> {
    basis: &'a DMatrix<f64>,
    /// `Bᵀ c_sel`
    normal: DVector<f64>,
    /// Linear functionals (in `y`) that must vanish.
    zeros: DMatrix<f64>,
    pieces: Vec<Piece>,
    n_params: usize,
}

impl System<'_> {
    fn z(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.basis * theta.rows(0, self.basis.ncols())
    }

    fn n_residuals(&self) -> usize {
        1 + self.zeros.nrows()
            + self
                .pieces
                .iter()
                .map(|p| match p {
                    Piece::Sym { k, .. } => svec_len(*k),
                    Piece::SpinBoundary { .. } => 1,
                })
                .sum::<usize>()
    }

    fn eval(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let dw = self.basis.ncols();
        let y = theta.rows(0, dw);
        let m = self.n_residuals();
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, self.n_params);

        r[0] = self.normal.dot(&y) - 1.0;
        j.view_mut((0, 0), (1, dw)).copy_from(&self.normal.transpose());
        let mut row = 1;

        let nz = self.zeros.nrows();
        if nz > 0 {
            r.rows_mut(1, nz).copy_from(&(&self.zeros * y));
            j.view_mut((1, 0), (nz, dw)).copy_from(&self.zeros);
            row += nz;
        }

        let z = self.z(theta);
        for piece in &self.pieces {
            match piece {
                Piece::Sym { map, k, r: rank, offset } => {
                    let (k, rank, offset) = (*k, *rank, *offset);
                    let s = svec_len(k);
                    let g = DMatrix::from_column_slice(k, rank, &theta.as_slice()[offset..offset + k * rank]);
                    let ggt = mat_to_svec(&(&g * g.transpose()));
                    let lin = map * y;
                    for t in 0..s {
                        r[row + t] = lin[t] - ggt[t];
                    }
                    j.view_mut((row, 0), (s, dw)).copy_from(map);
                    // ∂(G Gᵀ)_{ab} / ∂G_{pl} = δ_ap G_bl + δ_bp G_al
                    let mut t = 0;
                    for b in 0..k {
                        for a in b..k {
                            let w = if a == b { 1.0 } else { std::f64::consts::SQRT_2 };
                            for l in 0..rank {
                                j[(row + t, offset + a + l * k)] -= w * g[(b, l)];
                                j[(row + t, offset + b + l * k)] -= w * g[(a, l)];
                            }
                            t += 1;
                        }
                    }
                    row += s;
                }
                Piece::SpinBoundary { range } => {
                    let xb = z.rows(range.start, range.len());
                    let bar = xb.rows(1, range.len() - 1);
                    let nb = bar.norm();
                    r[row] = xb[0] - nb;
                    let mut grad = DVector::zeros(range.len());
                    grad[0] = 1.0;
                    if nb > 0.0 {
                        for i in 1..range.len() {
                            grad[i] = -xb[i] / nb;
                        }
                    }
                    let bslice = self.basis.rows(range.start, range.len());
                    j.view_mut((row, 0), (1, dw))
                        .copy_from(&(grad.transpose() * bslice));
                    row += 1;
                }
            }
        }
        (r, j)
    }
}

/// Per-block count of eigenvalues of `Q_c z` that are meant to be positive.
pub(crate) type RankGuess = Vec<usize>;

/// Candidate rank profiles read off a spectrum: for each distinct positive
/// level, the eigenvalues at or above it are positive. Largest total first.
pub(crate) fn candidate_profiles(block_eigs: &[Vec<f64>]) -> Vec<RankGuess> {
    let mut levels: Vec<f64> = block_eigs
        .iter()
        .flatten()
        .copied()
        .filter(|&l| l > 0.0)
        .collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    levels
        .into_iter()
        .map(|t| {
            block_eigs
                .iter()
                .map(|e| e.iter().filter(|&&l| l >= t).count())
                .collect()
        })
        .collect()
}

/// Try to turn the approximate direction `guess` into an exact one.
///
/// Returns `z ∈ W` with `⟨z, c_sel⟩ = 1` and `Q_c z ∈ F`, not normalised.
pub(crate) fn polish(
    spec: &AlgebraSpec,
    face: &FaceDescriptor,
    basis: &DMatrix<f64>,
    c_sel: &Element,
    guess: &Element,
) -> Option<Element> {
    let inside = face.compress(spec, guess);
    let sp = face.spectral_within(spec, &inside);
    let block_eigs: Vec<Vec<f64>> = sp.blocks().iter().map(|b| b.eigenvalues.clone()).collect();
    let y0 = basis.transpose() * DVector::from_column_slice(guess);
    for profile in candidate_profiles(&block_eigs) {
        if let Some(z) = solve_profile(spec, face, basis, c_sel, guess, &y0, &profile) {
            return Some(z);
        }
    }
    None
}

fn solve_profile(
    spec: &AlgebraSpec,
    face: &FaceDescriptor,
    basis: &DMatrix<f64>,
    c_sel: &Element,
    guess: &Element,
    y0: &DVector<f64>,
    profile: &[usize],
) -> Option<Element> {
    let dw = basis.ncols();
    let normal = basis.transpose() * DVector::from_column_slice(c_sel);
    let mut zero_rows: Vec<DVector<f64>> = Vec::new();
    let mut pieces = Vec::new();
    let mut theta0: Vec<f64> = y0.iter().copied().collect();

    for (b, kind) in spec.blocks().iter().enumerate() {
        let range = spec.block_range(b);
        let rank = profile[b];
        let ambient_row = |local: &[f64]| {
            let mut v = DVector::zeros(spec.dim());
            v.rows_mut(range.start, range.len()).copy_from_slice(local);
            basis.transpose() * v
        };
        match (face.frame_view(b), *kind) {
            (FrameView::Empty, _) => {}
            (FrameView::Full, BlockKind::SymMatrix(n)) => {
                let u = DMatrix::identity(n, n);
                add_sym_piece(spec, basis, guess, b, &u, rank, &mut pieces, &mut theta0);
            }
            (FrameView::Sym(u), _) => {
                add_sym_piece(spec, basis, guess, b, &u, rank, &mut pieces, &mut theta0);
            }
            (FrameView::Full, BlockKind::SpinFactor(n)) => match rank {
                2 => {}
                1 => pieces.push(Piece::SpinBoundary { range: range.clone() }),
                _ => {
                    for i in 0..n {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        zero_rows.push(ambient_row(&e));
                    }
                }
            },
            (FrameView::Spin(p), _) => {
                if rank == 0 {
                    zero_rows.push(ambient_row(p));
                }
            }
            (FrameView::Full, BlockKind::Orthant(n)) => {
                let xb = &guess[range.clone()];
                zero_orthant(&(0..n).collect::<Vec<_>>(), xb, rank, n, &mut zero_rows, &ambient_row);
            }
            (FrameView::Orth(support), BlockKind::Orthant(n)) => {
                let xb = &guess[range.clone()];
                zero_orthant(&support, xb, rank, n, &mut zero_rows, &ambient_row);
            }
            _ => return None,
        }
    }

    let zeros = if zero_rows.is_empty() {
        DMatrix::zeros(0, dw)
    } else {
        DMatrix::from_fn(zero_rows.len(), dw, |i, j| zero_rows[i][j])
    };
    let system = System {
        basis,
        normal,
        zeros,
        n_params: theta0.len(),
        pieces,
    };
    let theta = levenberg_marquardt(&system, DVector::from_vec(theta0))?;
    let z = Element::new(system.z(&theta).as_slice().to_vec());
    verify(spec, face, &z, profile).then_some(z)
}

#[allow(clippy::too_many_arguments)]
fn add_sym_piece(
    spec: &AlgebraSpec,
    basis: &DMatrix<f64>,
    guess: &Element,
    block: usize,
    u: &DMatrix<f64>,
    rank: usize,
    pieces: &mut Vec<Piece>,
    theta0: &mut Vec<f64>,
) {
    let range = spec.block_range(block);
    let n = u.nrows();
    let k = u.ncols();
    let compress = |coords: &[f64]| mat_to_svec(&(u.transpose() * svec_to_mat(coords, n) * u));
    let mut map = DMatrix::zeros(svec_len(k), basis.ncols());
    for c in 0..basis.ncols() {
        let col: Vec<f64> = basis.column(c).rows(range.start, range.len()).iter().copied().collect();
        map.set_column(c, &DVector::from_vec(compress(&col)));
    }
    // initial factor from the top eigenpairs of the compressed guess
    let eig = symmetric_eigen(&svec_to_mat(&compress(&guess[range]), k));
    let offset = theta0.len();
    let mut g = DMatrix::zeros(k, rank);
    for l in 0..rank {
        let s = eig.values[l].max(0.0).sqrt();
        g.set_column(l, &(eig.vectors.column(l) * s));
    }
    theta0.extend(g.iter());
    pieces.push(Piece::Sym { map, k, r: rank, offset });
}

fn zero_orthant(
    support: &[usize],
    xb: &[f64],
    rank: usize,
    n: usize,
    zero_rows: &mut Vec<DVector<f64>>,
    ambient_row: &dyn Fn(&[f64]) -> DVector<f64>,
) {
    let mut order = support.to_vec();
    order.sort_by(|&a, &b| xb[b].total_cmp(&xb[a]));
    for &i in &order[rank.min(order.len())..] {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        zero_rows.push(ambient_row(&e));
    }
}

fn levenberg_marquardt(sys: &System<'_>, mut theta: DVector<f64>) -> Option<DVector<f64>> {
    let (mut r, mut j) = sys.eval(&theta);
    let mut cost = r.norm_squared();
    let mut mu = 1e-6;
    for _ in 0..LM_MAX_ITER {
        if cost.sqrt() <= LM_TOL {
            return Some(theta);
        }
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        let scale = a.diagonal().max().max(1.0);
        let mut improved = false;
        while mu < 1e10 {
            let mut damped = a.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += mu * scale;
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let cand = &theta + &step;
            let (rc, jc) = sys.eval(&cand);
            let cc = rc.norm_squared();
            if cc < cost {
                let tiny = step.norm() <= 1e-16 * (1.0 + theta.norm());
                theta = cand;
                r = rc;
                j = jc;
                cost = cc;
                mu = (mu / 3.0).max(1e-15);
                improved = !tiny;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (cost.sqrt() <= LM_TOL * 100.0).then_some(theta)
}

/// Check that `Q_c z` lies in `F` and has the guessed positive counts.
fn verify(spec: &AlgebraSpec, face: &FaceDescriptor, z: &Element, profile: &[usize]) -> bool {
    let inside = face.compress(spec, z);
    let sp = face.spectral_within(spec, &inside);
    let lmax = sp.max_eigenvalue().unwrap_or(0.0);
    if lmax <= 0.0 {
        return false;
    }
    let zero_tol = ZERO_EIG_TOL * lmax.max(1.0);
    for (blk, &want) in sp.blocks().iter().zip(profile) {
        // eigenvalues are sorted descending
        for (i, &l) in blk.eigenvalues.iter().enumerate() {
            let ok = if i < want {
                l >= POSITIVE_EIG_REL * lmax
            } else {
                l.abs() <= zero_tol
            };
            if !ok {
                return false;
            }
        }
    }
    true
}
