//! Instance families with known facial structure.

use std::f64::consts::SQRT_2;

use nalgebra::DVector;
use rand::Rng;

use crate::affine::AffineSet;
use crate::algebra::{AlgebraSpec, BlockKind, Element, FaceDescriptor};
use crate::bounds::doubly_nonnegative_problem;
use crate::conegeom::ConeHandle;
use crate::error::{Error, Result};
use crate::harness::random::{self, random_orthogonal, unit_vec};
use crate::linalg::{svec_index, svec_len, svec_outer};

/// A feasibility problem `find x ∈ (L+a) ∩ K`.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub cone: ConeHandle,
    pub affine: AffineSet,
    /// A face known to contain every feasible point.
    pub face_hint: Option<FaceDescriptor>,
    pub seed: u64,
}

impl Problem {
    pub fn new(name: impl Into<String>, cone: ConeHandle, affine: AffineSet) -> Self {
        Problem {
            name: name.into(),
            cone,
            affine,
            face_hint: None,
            seed: 0,
        }
    }

    pub fn spec(&self) -> &AlgebraSpec {
        self.cone.spec()
    }
}

fn sturm_rows(n: usize) -> Vec<Vec<f64>> {
    let dim = svec_len(n);
    let mut rows = Vec::with_capacity(n - 1);
    let mut first = vec![0.0; dim];
    first[svec_index(n, 0, 0)] = 1.0;
    rows.push(first);
    // X_kk = X_{k-1,k+1}, 1-based k = 2..n-1
    for k in 1..n - 1 {
        let mut row = vec![0.0; dim];
        row[svec_index(n, k, k)] = 1.0;
        row[svec_index(n, k + 1, k - 1)] = -1.0 / SQRT_2;
        rows.push(row);
    }
    rows
}

fn corner(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; svec_len(n)];
    c[svec_index(n, n - 1, n - 1)] = 1.0;
    c
}

/// Sturm-type staircase on `S^n_+`: `X₁₁ = 0` and `X_kk = X_{k−1,k+1}` for
/// `k = 2..n−1`, with `b = 0`.
///
/// Each reduction step kills one more row and column, so `n − 1` steps are
/// needed to reach the minimal face `{t E_nn : t ≥ 0}`.
pub fn sturm_family(n: usize) -> Result<Problem> {
    if n < 2 {
        return Err(Error::InvalidParameter("sturm family needs n ≥ 2".into()));
    }
    let cone = ConeHandle::from_blocks(vec![BlockKind::SymMatrix(n)])?;
    let rows = sturm_rows(n);
    let affine = AffineSet::from_rows(svec_len(n), &rows, &vec![0.0; rows.len()])?;
    let hint = FaceDescriptor::from_idempotent(cone.spec(), &Element::new(corner(n)))?;
    Ok(Problem {
        name: format!("sturm-{n}"),
        cone,
        affine,
        face_hint: Some(hint),
        seed: 0,
    })
}

/// The Sturm staircase over the doubly nonnegative cone, as a lift into
/// `S^n_+ × R^{n(n+1)/2}_+`.
pub fn dnn_sturm(n: usize) -> Result<Problem> {
    if n < 2 {
        return Err(Error::InvalidParameter("dnn family needs n ≥ 2".into()));
    }
    let rows = sturm_rows(n);
    let s = AffineSet::from_rows(svec_len(n), &rows, &vec![0.0; rows.len()])?;
    let lifted = doubly_nonnegative_problem(n, &s)?;
    let mut c = corner(n);
    c.extend(corner(n));
    let hint = FaceDescriptor::from_idempotent(lifted.cone.spec(), &Element::new(c))?;
    Ok(Problem {
        name: format!("dnn-sturm-{n}"),
        cone: lifted.cone,
        affine: lifted.affine,
        face_hint: Some(hint),
        seed: 0,
    })
}

/// Random primitive frames, one per block.
enum Frame {
    Sym(nalgebra::DMatrix<f64>),
    Spin(Vec<f64>),
    Orth(Vec<usize>),
}

impl Frame {
    fn random(kind: BlockKind, rng: &mut impl Rng) -> Frame {
        match kind {
            BlockKind::SymMatrix(n) => Frame::Sym(random_orthogonal(rng, n)),
            BlockKind::SpinFactor(n) => Frame::Spin(unit_vec(rng, n - 1)),
            BlockKind::Orthant(n) => {
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.random_range(0..=i));
                }
                Frame::Orth(perm)
            }
        }
    }

    /// Block-local coordinates of primitive `j`.
    fn primitive(&self, j: usize) -> Vec<f64> {
        match self {
            Frame::Sym(q) => svec_outer(&q.column(j).into_owned()),
            Frame::Spin(u) => {
                let sign = if j == 0 { 1.0 } else { -1.0 };
                let mut p = vec![1.0 / SQRT_2];
                p.extend(u.iter().map(|v| sign * v / SQRT_2));
                p
            }
            Frame::Orth(perm) => {
                let mut p = vec![0.0; perm.len()];
                p[perm[j]] = 1.0;
                p
            }
        }
    }

    /// A Peirce-½ element coupling primitive `j` with primitive `k`.
    fn coupling(&self, j: usize, k: usize, rng: &mut impl Rng) -> Option<Vec<f64>> {
        match self {
            Frame::Sym(q) => {
                let u = q.column(j);
                let v = q.column(k);
                let m = (u * v.transpose() + v * u.transpose()) * -0.5;
                Some(crate::linalg::mat_to_svec(&m))
            }
            Frame::Spin(u) if u.len() >= 2 => {
                // a unit vector orthogonal to the frame axis
                let mut v = unit_vec(rng, u.len());
                let proj = crate::linalg::dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= proj * b);
                let nv = crate::linalg::norm(&v);
                let mut s = vec![0.0];
                s.extend(v.iter().map(|a| a / nv));
                Some(s)
            }
            _ => None,
        }
    }
}

fn embed(spec: &AlgebraSpec, block: usize, local: &[f64]) -> Element {
    let mut e = spec.zero();
    e.coords_mut()[spec.block_range(block)].copy_from_slice(local);
    e
}

/// Largest depth [`designed_singularity`] accepts for `spec`.
pub fn max_designed_depth(spec: &AlgebraSpec) -> usize {
    let cone = ConeHandle::new(spec.clone());
    if cone.is_polyhedral() {
        spec.blocks().iter().map(|b| b.rank() - 1).sum()
    } else {
        cone.pps_cap()
    }
}

/// An instance whose facial reduction chain has exactly `depth` steps.
///
/// Draws random frames, removes one primitive per step from a
/// non-polyhedral block (orthant coordinates when the cone is polyhedral),
/// and builds `z_i = w_i e_i + s_i` where `e_i` is the removed primitive and
/// `s_i` couples the previously removed primitive to the final face, so
/// `z_i` is only a valid direction once the previous step has been taken.
/// Two random rows inside the span of the final face are added, orthogonal
/// to an anchor in its relative interior, plus a trace row that fixes the
/// scale.
pub fn designed_singularity(spec: &AlgebraSpec, depth: usize, seed: u64) -> Result<Problem> {
    designed_singularity_with(spec, depth, seed, 2)
}

pub fn designed_singularity_with(
    spec: &AlgebraSpec,
    depth: usize,
    seed: u64,
    extra_rows: usize,
) -> Result<Problem> {
    let max = max_designed_depth(spec);
    if depth > max {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} exceeds the maximum {max} for this cone"
        )));
    }
    let cone = ConeHandle::new(spec.clone());
    let polyhedral = cone.is_polyhedral();
    let mut rng = random::rng(seed);
    let frames: Vec<Frame> = spec
        .blocks()
        .iter()
        .map(|&k| Frame::random(k, &mut rng))
        .collect();

    // which block loses a primitive at each step
    let mut remaining: Vec<usize> = spec.blocks().iter().map(|b| b.rank()).collect();
    let mut removed: Vec<(usize, usize)> = Vec::with_capacity(depth);
    for step in 0..depth {
        let last = step + 1 == depth;
        let candidates: Vec<usize> = (0..spec.blocks().len())
            .filter(|&b| {
                let kind = spec.blocks()[b];
                kind.is_polyhedral() == polyhedral
                    && remaining[b] >= 2
                    && (last || polyhedral || kind != BlockKind::SpinFactor(2))
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "cannot build a chain of depth {depth} on this cone"
            )));
        }
        let b = candidates[rng.random_range(0..candidates.len())];
        let j = spec.blocks()[b].rank() - remaining[b];
        remaining[b] -= 1;
        removed.push((b, j));
    }

    // final face: the primitives that were never removed
    let mut c_final = spec.zero();
    let mut anchor = spec.zero();
    for (b, kind) in spec.blocks().iter().enumerate() {
        let r = kind.rank();
        for j in (r - remaining[b])..r {
            let p = embed(spec, b, &frames[b].primitive(j));
            c_final.axpy(1.0, &p);
            anchor.axpy(rng.random_range(0.5..1.5), &p);
        }
    }
    let final_face = FaceDescriptor::from_idempotent(spec, &c_final)?;

    let mut rows: Vec<Element> = Vec::new();
    for (i, &(b, j)) in removed.iter().enumerate() {
        let mut z = embed(spec, b, &frames[b].primitive(j)).scaled(rng.random_range(0.5..1.5));
        if i > 0 && !polyhedral {
            let (pb, pj) = removed[i - 1];
            let partner = spec.blocks()[pb].rank() - 1;
            let s = frames[pb]
                .coupling(pj, partner, &mut rng)
                .ok_or_else(|| Error::InvalidParameter("no coupling available".into()))?;
            z.axpy(rng.random_range(0.5..1.5), &embed(spec, pb, &s));
        }
        rows.push(z);
    }
    let aa = anchor.dot(&anchor);
    for _ in 0..extra_rows {
        let mut r = random::random_in_span(spec, &final_face, &mut rng);
        r.axpy(-r.dot(&anchor) / aa, &anchor);
        if r.norm() > 1e-8 {
            rows.push(r.scaled(1.0 / r.norm()));
        }
    }
    rows.push(spec.identity());

    let dim = spec.dim();
    let a = nalgebra::DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let b = &a * DVector::from_column_slice(&anchor);
    let affine = AffineSet::new(a, b)?;
    Ok(Problem {
        name: format!("designed-d{depth}-s{seed}"),
        cone,
        affine,
        face_hint: Some(final_face),
        seed,
    })
}

/// `L ∩ K = {0}` by construction: one row is an interior point of `K`, so
/// every `x ∈ K` with `A x = 0` has zero trace against it.
pub fn trivial_intersection_instance(spec: &AlgebraSpec, seed: u64) -> Result<Problem> {
    let cone = ConeHandle::new(spec.clone());
    let mut rng = random::rng(seed);
    let dim = spec.dim();
    let mut interior = random::random_cone_point(spec, &mut rng);
    interior.axpy(0.25, &spec.identity());
    let extra = (dim / 3).clamp(1, dim.saturating_sub(1).max(1));
    let mut rows = vec![interior];
    for _ in 0..extra {
        rows.push(random::random_element(spec, &mut rng));
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let affine = AffineSet::new(a, DVector::zeros(rows.len()))?;
    Ok(Problem {
        name: format!("trivial-s{seed}"),
        cone,
        affine,
        face_hint: Some(FaceDescriptor::zero(spec)),
        seed,
    })
}

/// A random polyhedral instance `A x = b, x ≥ 0` whose anchor has a third
/// of its coordinates at zero.
pub fn orthant_instance(n: usize, m: usize, seed: u64) -> Result<Problem> {
    if m >= n {
        return Err(Error::InvalidParameter("need fewer rows than columns".into()));
    }
    let cone = ConeHandle::from_blocks(vec![BlockKind::Orthant(n)])?;
    let mut rng = random::rng(seed);
    let a = nalgebra::DMatrix::from_vec(m, n, random::gaussian_vec(&mut rng, m * n));
    let anchor: Vec<f64> = (0..n)
        .map(|i| if i % 3 == 0 { 0.0 } else { rng.random_range(0.5..1.5) })
        .collect();
    let b = &a * DVector::from_vec(anchor);
    Ok(Problem {
        name: format!("orthant-{n}x{m}-s{seed}"),
        cone,
        affine: AffineSet::new(a, b)?,
        face_hint: None,
        seed,
    })
}
