//! Euclidean Jordan algebra kernel for direct products of symmetric-matrix,
//! spin-factor and orthant blocks.
//!
//! Elements live in *canonical coordinates*: the flat Euclidean dot product
//! of two coordinate vectors equals the trace inner product `tr(x ∘ y)`.
//!
//! * `SymMatrix(n)`: the packed lower triangle (column by column) with
//!   off-diagonal entries scaled by √2 (`svec`).
//! * `SpinFactor(n)`: the natural coordinates `(x₀, x̄)` scaled by √2, so the
//!   identity is `(√2, 0, …, 0)`.
//! * `Orthant(n)`: plain coordinates.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::ops::{Add, Deref, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, svec_len, svec_outer, svec_to_mat, mat_to_svec};

/// Relative tolerance for structural identities (idempotency, membership in
/// a Peirce space, reconstruction).
pub const TAU_SPEC: f64 = 1e-9;

/// Eigenvalue-zero threshold relative to the largest eigenvalue.
pub fn tau_rank(lambda_max: f64) -> f64 {
    1e-8 * lambda_max.abs().max(1.0)
}

/// One factor of the product algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Real symmetric `n × n` matrices; cone of squares is the PSD cone.
    SymMatrix(usize),
    /// Spin factor of ambient dimension `n ≥ 2`; cone of squares is the
    /// second-order cone.
    SpinFactor(usize),
    /// `R^n` with the componentwise product; cone of squares is `R^n_+`.
    Orthant(usize),
}

impl BlockKind {
    pub fn dim(self) -> usize {
        match self {
            BlockKind::SymMatrix(n) => svec_len(n),
            BlockKind::SpinFactor(n) | BlockKind::Orthant(n) => n,
        }
    }

    pub fn rank(self) -> usize {
        match self {
            BlockKind::SymMatrix(n) | BlockKind::Orthant(n) => n,
            BlockKind::SpinFactor(_) => 2,
        }
    }

    pub fn is_polyhedral(self) -> bool {
        matches!(self, BlockKind::Orthant(_))
    }

    fn validate(self) -> Result<()> {
        match self {
            BlockKind::SymMatrix(n) | BlockKind::Orthant(n) if n >= 1 => Ok(()),
            BlockKind::SpinFactor(n) if n >= 2 => Ok(()),
            other => Err(Error::InvalidParameter(format!("degenerate block {other:?}"))),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::SymMatrix(n) => write!(f, "psd:{n}"),
            BlockKind::SpinFactor(n) => write!(f, "soc:{n}"),
            BlockKind::Orthant(n) => write!(f, "orthant:{n}"),
        }
    }
}

impl std::str::FromStr for BlockKind {
    type Err = Error;

    /// Parses `psd:n`, `soc:n` or `orthant:n`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("block `{s}` is not kind:n")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("block size `{n}` is not an integer")))?;
        match kind.trim() {
            "psd" => Ok(BlockKind::SymMatrix(n)),
            "soc" => Ok(BlockKind::SpinFactor(n)),
            "orthant" => Ok(BlockKind::Orthant(n)),
            other => Err(Error::InvalidParameter(format!(
                "unknown block kind `{other}` (expected psd, soc or orthant)"
            ))),
        }
    }
}

/// A point of the ambient algebra in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Element(Vec<f64>);

impl Element {
    pub fn new(coords: Vec<f64>) -> Self {
        Element(coords)
    }

    pub fn zeros(n: usize) -> Self {
        Element(vec![0.0; n])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Element) -> f64 {
        linalg::dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Element {
        Element(self.0.iter().map(|v| v * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Element) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Element {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Element {
    fn from(v: Vec<f64>) -> Self {
        Element(v)
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        Element(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        Element(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, rhs: f64) -> Element {
        self.scaled(rhs)
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scaled(-1.0)
    }
}

/// Canonical coordinates of a symmetric matrix given by its rows.
pub fn sym_coords(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    mat_to_svec(&m)
}

/// Canonical coordinates of a spin-factor element given naturally as `(x₀, x̄)`.
pub fn spin_coords(natural: &[f64]) -> Vec<f64> {
    natural.iter().map(|v| v * SQRT_2).collect()
}

/// Primitive idempotent or orthant coordinate, stored block-locally.
#[derive(Clone, Debug)]
pub(crate) enum Atom {
    /// Unit vector `v`; the idempotent is `v vᵀ`.
    Sym(DVector<f64>),
    /// Canonical coordinates of `½(1, ±u)`.
    Spin(Vec<f64>),
    /// Coordinate index.
    Orth(usize),
}

impl Atom {
    fn add_to(&self, scale: f64, out: &mut [f64]) {
        match self {
            Atom::Sym(v) => {
                for (o, a) in out.iter_mut().zip(svec_outer(v)) {
                    *o += scale * a;
                }
            }
            Atom::Spin(p) => {
                for (o, a) in out.iter_mut().zip(p) {
                    *o += scale * a;
                }
            }
            Atom::Orth(i) => out[*i] += scale,
        }
    }
}

/// Block layout of a product algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraSpec {
    blocks: Vec<BlockKind>,
    offsets: Vec<usize>,
    dim: usize,
}

impl AlgebraSpec {
    pub fn new(blocks: Vec<BlockKind>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            b.validate()?;
            offsets.push(dim);
            dim += b.dim();
        }
        Ok(AlgebraSpec {
            blocks,
            offsets,
            dim,
        })
    }

    pub fn blocks(&self) -> &[BlockKind] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.blocks.iter().map(|b| b.rank()).sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        let o = self.offsets[block];
        o..o + self.blocks[block].dim()
    }

    /// Assemble an element from block-local canonical coordinates.
    pub fn element(&self, parts: Vec<Vec<f64>>) -> Result<Element> {
        if parts.len() != self.blocks.len() {
            return Err(Error::Dimension {
                expected: self.blocks.len(),
                got: parts.len(),
            });
        }
        let mut coords = Vec::with_capacity(self.dim);
        for (b, p) in self.blocks.iter().zip(parts) {
            if p.len() != b.dim() {
                return Err(Error::Dimension {
                    expected: b.dim(),
                    got: p.len(),
                });
            }
            coords.extend(p);
        }
        let x = Element(coords);
        self.check(&x)?;
        Ok(x)
    }

    /// Dense matrix of a `SymMatrix` block.
    pub fn block_matrix(&self, x: &Element, block: usize) -> Option<DMatrix<f64>> {
        match self.blocks[block] {
            BlockKind::SymMatrix(n) => Some(svec_to_mat(&x[self.block_range(block)], n)),
            _ => None,
        }
    }

    pub fn check(&self, x: &Element) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(())
    }

    pub fn zero(&self) -> Element {
        Element::zeros(self.dim)
    }

    pub fn identity(&self) -> Element {
        let mut e = self.zero();
        for (b, kind) in self.blocks.iter().enumerate() {
            let o = self.offsets[b];
            match *kind {
                BlockKind::SymMatrix(n) => {
                    for i in 0..n {
                        e.0[o + linalg::svec_index(n, i, i)] = 1.0;
                    }
                }
                BlockKind::SpinFactor(_) => e.0[o] = SQRT_2,
                BlockKind::Orthant(n) => e.0[o..o + n].iter_mut().for_each(|v| *v = 1.0),
            }
        }
        e
    }

    /// Trace inner product; equals the flat dot product in canonical coordinates.
    pub fn inner(&self, x: &Element, y: &Element) -> f64 {
        x.dot(y)
    }

    pub fn trace(&self, x: &Element) -> f64 {
        let mut t = 0.0;
        for (b, kind) in self.blocks.iter().enumerate() {
            let xb = &x[self.block_range(b)];
            t += match *kind {
                BlockKind::SymMatrix(n) => (0..n).map(|i| xb[linalg::svec_index(n, i, i)]).sum(),
                BlockKind::SpinFactor(_) => SQRT_2 * xb[0],
                BlockKind::Orthant(_) => xb.iter().sum(),
            };
        }
        t
    }

    /// Jordan product `x ∘ y`.
    pub fn jordan(&self, x: &Element, y: &Element) -> Result<Element> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.jordan_unchecked(x, y))
    }

    pub(crate) fn jordan_unchecked(&self, x: &Element, y: &Element) -> Element {
        let mut out = self.zero();
        for (b, kind) in self.blocks.iter().enumerate() {
            let r = self.block_range(b);
            let (xb, yb) = (&x[r.clone()], &y[r.clone()]);
            let ob = &mut out.0[r];
            match *kind {
                BlockKind::SymMatrix(n) => {
                    let xm = svec_to_mat(xb, n);
                    let ym = svec_to_mat(yb, n);
                    let p = (&xm * &ym + &ym * &xm) * 0.5;
                    ob.copy_from_slice(&mat_to_svec(&p));
                }
                BlockKind::SpinFactor(_) => {
                    let (x0, xbar) = (xb[0], &xb[1..]);
                    let (y0, ybar) = (yb[0], &yb[1..]);
                    ob[0] = (x0 * y0 + linalg::dot(xbar, ybar)) / SQRT_2;
                    for i in 1..xb.len() {
                        ob[i] = (x0 * yb[i] + y0 * xb[i]) / SQRT_2;
                    }
                }
                BlockKind::Orthant(_) => {
                    for i in 0..xb.len() {
                        ob[i] = xb[i] * yb[i];
                    }
                }
            }
        }
        out
    }

    pub fn square(&self, x: &Element) -> Result<Element> {
        self.jordan(x, x)
    }

    /// Quadratic representation `Q_x(y) = 2 x∘(x∘y) − (x∘x)∘y`.
    pub fn quadratic(&self, x: &Element, y: &Element) -> Result<Element> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.quadratic_unchecked(x, y))
    }

    pub(crate) fn quadratic_unchecked(&self, x: &Element, y: &Element) -> Element {
        let xy = self.jordan_unchecked(x, y);
        let x_xy = self.jordan_unchecked(x, &xy);
        let xx = self.jordan_unchecked(x, x);
        let xx_y = self.jordan_unchecked(&xx, y);
        let mut out = x_xy.scaled(2.0);
        out.axpy(-1.0, &xx_y);
        out
    }

    /// Spectral decomposition, eigenvalues descending within each block.
    pub fn spectral(&self, x: &Element) -> Result<SpectralDecomposition> {
        self.check(x)?;
        Ok(FaceDescriptor::whole(self).spectral_within(self, x))
    }

    /// Smallest eigenvalue over all blocks.
    pub fn lambda_min(&self, x: &Element) -> Result<f64> {
        Ok(self
            .spectral(x)?
            .min_eigenvalue()
            .expect("a nonempty algebra has eigenvalues"))
    }

    /// Peirce split of `x` relative to the idempotent of `face`:
    /// `(Q_c x, x − Q_c x − Q_{e−c} x, Q_{e−c} x)`.
    pub fn peirce_split(
        &self,
        face: &FaceDescriptor,
        x: &Element,
    ) -> Result<(Element, Element, Element)> {
        self.check(x)?;
        face.check_spec(self)?;
        let c = face.c();
        let ec = &self.identity() - c;
        let x1 = self.quadratic_unchecked(c, x);
        let x3 = self.quadratic_unchecked(&ec, x);
        let mut x2 = x.clone();
        x2.axpy(-1.0, &x1);
        x2.axpy(-1.0, &x3);
        Ok((x1, x2, x3))
    }

    /// Inverse of `x` inside the subalgebra `V(c, 1)`.
    pub fn inverse_in_face(&self, face: &FaceDescriptor, x: &Element) -> Result<Element> {
        self.check(x)?;
        face.check_spec(self)?;
        let inside = face.compress(self, x);
        let residual = (x - &inside).norm();
        if residual > TAU_SPEC * x.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "element is not in V(c,1): residual {residual:e}"
            )));
        }
        let spec = face.spectral_within(self, &inside);
        let lmax = spec.max_abs_eigenvalue();
        let tol = tau_rank(lmax);
        if let Some(&small) = spec
            .eigenvalues()
            .iter()
            .find(|l| l.abs() <= tol)
        {
            return Err(Error::SingularElement { eigenvalue: small });
        }
        Ok(spec.map(|l| 1.0 / l))
    }

    /// `x₁ − Q_{x₂}(x₃⁻¹)` for the Peirce parts of `x` relative to `c`, with
    /// the inverse taken in `V(c, 0)`.
    pub fn schur_complement(&self, face: &FaceDescriptor, x: &Element) -> Result<Element> {
        let (x1, x2, x3) = self.peirce_split(face, x)?;
        let comp = face.complement(self)?;
        let sp = comp.spectral_within(self, &x3);
        let tol = tau_rank(sp.max_abs_eigenvalue());
        if let Some(&bad) = sp.eigenvalues().iter().find(|&&l| l <= tol) {
            return Err(Error::SingularElement { eigenvalue: bad });
        }
        let inv = sp.map(|l| 1.0 / l);
        let q = self.quadratic_unchecked(&x2, &inv);
        Ok(&x1 - &q)
    }

    /// `Σ f(λᵢ) cᵢ` over the spectral decomposition of `x`.
    pub fn spectral_map(&self, x: &Element, f: impl Fn(f64) -> f64) -> Result<Element> {
        Ok(self.spectral(x)?.map(f))
    }
}

/// Eigenvalues and primitive idempotents of one block.
#[derive(Clone, Debug)]
pub struct BlockSpectrum {
    pub block: usize,
    pub eigenvalues: Vec<f64>,
    kind: BlockKind,
    offset: usize,
    atoms: Vec<Atom>,
}

impl BlockSpectrum {
    pub fn kind(&self) -> BlockKind {
        self.kind
    }
}

/// Spectral decomposition `x = Σ λᵢ cᵢ`, possibly restricted to a subalgebra
/// `V(c, 1)`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    blocks: Vec<BlockSpectrum>,
    dim: usize,
}

impl SpectralDecomposition {
    pub fn blocks(&self) -> &[BlockSpectrum] {
        &self.blocks
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.eigenvalues.iter().copied())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues().into_iter().reduce(f64::min)
    }

    pub fn max_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues().into_iter().reduce(f64::max)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(0.0, |a, l| a.max(l.abs()))
    }

    /// Primitive idempotents with their eigenvalues and block index.
    pub fn idempotents(&self) -> Vec<(usize, f64, Element)> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for (l, atom) in b.eigenvalues.iter().zip(&b.atoms) {
                let mut e = Element::zeros(self.dim);
                atom.add_to(1.0, &mut e.0[b.offset..b.offset + b.kind.dim()]);
                out.push((b.block, *l, e));
            }
        }
        out
    }

    /// `Σ f(λᵢ) cᵢ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Element {
        let mut out = Element::zeros(self.dim);
        for b in &self.blocks {
            let slot = &mut out.0[b.offset..b.offset + b.kind.dim()];
            match b.kind {
                BlockKind::SymMatrix(n) if !b.atoms.is_empty() => {
                    let mut m = DMatrix::zeros(n, n);
                    for (l, atom) in b.eigenvalues.iter().zip(&b.atoms) {
                        if let Atom::Sym(v) = atom {
                            let w = f(*l);
                            if w != 0.0 {
                                m += v * v.transpose() * w;
                            }
                        }
                    }
                    slot.copy_from_slice(&mat_to_svec(&m));
                }
                _ => {
                    for (l, atom) in b.eigenvalues.iter().zip(&b.atoms) {
                        let w = f(*l);
                        if w != 0.0 {
                            atom.add_to(w, slot);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Element {
        self.map(|l| l)
    }

    /// Face spanned by the idempotents whose eigenvalue satisfies `keep`.
    pub fn select(&self, spec: &AlgebraSpec, keep: impl Fn(f64) -> bool) -> FaceDescriptor {
        let mut frames: Vec<Vec<Atom>> = vec![Vec::new(); spec.blocks().len()];
        for b in &self.blocks {
            for (l, atom) in b.eigenvalues.iter().zip(&b.atoms) {
                if keep(*l) {
                    frames[b.block].push(atom.clone());
                }
            }
        }
        FaceDescriptor::from_frames(spec, frames)
    }
}

#[derive(Clone, Debug)]
struct BlockFrame {
    kind: BlockKind,
    offset: usize,
    atoms: Vec<Atom>,
    full: bool,
}

/// A face `F` of the cone of squares, encoded by an idempotent `c` with
/// `F` the cone of squares of `V(c, 1)`.
#[derive(Clone, Debug)]
pub struct FaceDescriptor {
    c: Element,
    frames: Vec<BlockFrame>,
}

impl FaceDescriptor {
    /// The whole cone (`c = e`).
    pub fn whole(spec: &AlgebraSpec) -> Self {
        let frames = spec
            .blocks()
            .iter()
            .enumerate()
            .map(|(b, kind)| BlockFrame {
                kind: *kind,
                offset: spec.offset(b),
                atoms: Vec::new(),
                full: true,
            })
            .collect();
        FaceDescriptor {
            c: spec.identity(),
            frames,
        }
    }

    /// The trivial face `{0}`.
    pub fn zero(spec: &AlgebraSpec) -> Self {
        Self::from_frames(spec, vec![Vec::new(); spec.blocks().len()])
    }

    pub(crate) fn from_frames(spec: &AlgebraSpec, frames: Vec<Vec<Atom>>) -> Self {
        let mut c = spec.zero();
        let mut out = Vec::with_capacity(frames.len());
        for (b, atoms) in frames.into_iter().enumerate() {
            let kind = spec.blocks()[b];
            let offset = spec.offset(b);
            let full = atoms.len() == kind.rank();
            if full {
                let e = spec.identity();
                c.0[spec.block_range(b)].copy_from_slice(&e[spec.block_range(b)]);
            } else {
                for a in &atoms {
                    a.add_to(1.0, &mut c.0[spec.block_range(b)]);
                }
            }
            out.push(BlockFrame {
                kind,
                offset,
                atoms: if full { Vec::new() } else { atoms },
                full,
            });
        }
        FaceDescriptor { c, frames: out }
    }

    /// Validate `c` as an idempotent and build its face.
    pub fn from_idempotent(spec: &AlgebraSpec, c: &Element) -> Result<Self> {
        spec.check(c)?;
        let scale = c.norm().max(1.0);
        let cc = spec.jordan_unchecked(c, c);
        let defect = (&cc - c).norm();
        if defect > TAU_SPEC * scale {
            return Err(Error::InvalidFace(format!(
                "c∘c differs from c by {defect:e}"
            )));
        }
        let sp = spec.spectral(c)?;
        for l in sp.eigenvalues() {
            if l.abs() > TAU_SPEC * scale && (l - 1.0).abs() > TAU_SPEC * scale {
                return Err(Error::InvalidFace(format!("eigenvalue {l} not in {{0, 1}}")));
            }
        }
        Ok(sp.select(spec, |l| l > 0.5))
    }

    pub fn c(&self) -> &Element {
        &self.c
    }

    /// Face rank per block.
    pub fn ranks(&self) -> Vec<usize> {
        self.frames
            .iter()
            .map(|f| if f.full { f.kind.rank() } else { f.atoms.len() })
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.ranks().iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    fn check_spec(&self, spec: &AlgebraSpec) -> Result<()> {
        if self.c.len() != spec.dim() || self.frames.len() != spec.blocks().len() {
            return Err(Error::InvalidFace("face belongs to a different algebra".into()));
        }
        Ok(())
    }

    /// `e − c`.
    pub fn complement(&self, spec: &AlgebraSpec) -> Result<FaceDescriptor> {
        let ec = &spec.identity() - &self.c;
        FaceDescriptor::from_idempotent(spec, &ec)
    }

    /// The face restricted to the blocks where `mask` is true (other blocks
    /// get the zero idempotent).
    pub fn restrict_blocks(&self, spec: &AlgebraSpec, mask: &[bool]) -> FaceDescriptor {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(b, f)| {
                if !mask[b] {
                    Vec::new()
                } else if f.full {
                    full_atoms(spec, b)
                } else {
                    f.atoms.clone()
                }
            })
            .collect();
        FaceDescriptor::from_frames(spec, frames)
    }

    pub(crate) fn frame_view(&self, block: usize) -> FrameView<'_> {
        let f = &self.frames[block];
        if f.full {
            return FrameView::Full;
        }
        if f.atoms.is_empty() {
            return FrameView::Empty;
        }
        match (f.kind, &f.atoms[0]) {
            (BlockKind::SymMatrix(n), _) => FrameView::Sym(sym_basis(&f.atoms, n)),
            (_, Atom::Spin(p)) => FrameView::Spin(p),
            _ => FrameView::Orth(
                f.atoms
                    .iter()
                    .filter_map(|a| match a {
                        Atom::Orth(i) => Some(*i),
                        _ => None,
                    })
                    .collect(),
            ),
        }
    }

    /// Orthogonal projection `Q_c x` onto `V(c, 1)`.
    pub fn compress(&self, spec: &AlgebraSpec, x: &Element) -> Element {
        let mut out = spec.zero();
        for (b, frame) in self.frames.iter().enumerate() {
            let r = spec.block_range(b);
            let xb = &x[r.clone()];
            let ob = &mut out.0[r];
            if frame.full {
                ob.copy_from_slice(xb);
                continue;
            }
            if frame.atoms.is_empty() {
                continue;
            }
            match frame.kind {
                BlockKind::SymMatrix(n) => {
                    let u = sym_basis(&frame.atoms, n);
                    let xm = svec_to_mat(xb, n);
                    let inner = u.transpose() * xm * &u;
                    let p = &u * inner * u.transpose();
                    ob.copy_from_slice(&mat_to_svec(&p));
                }
                BlockKind::SpinFactor(_) => {
                    for atom in &frame.atoms {
                        if let Atom::Spin(p) = atom {
                            let s = linalg::dot(xb, p);
                            for (o, pi) in ob.iter_mut().zip(p) {
                                *o += s * pi;
                            }
                        }
                    }
                }
                BlockKind::Orthant(_) => {
                    for atom in &frame.atoms {
                        if let Atom::Orth(i) = atom {
                            ob[*i] = xb[*i];
                        }
                    }
                }
            }
        }
        out
    }

    /// Spectral decomposition of `x` inside the subalgebra `V(c, 1)`.
    ///
    /// `x` is assumed to lie in `V(c, 1)`; components outside are ignored.
    pub fn spectral_within(&self, spec: &AlgebraSpec, x: &Element) -> SpectralDecomposition {
        let mut blocks = Vec::with_capacity(self.frames.len());
        for (b, frame) in self.frames.iter().enumerate() {
            let xb = &x[spec.block_range(b)];
            let (eigenvalues, atoms) = if frame.full {
                block_spectrum(frame.kind, xb)
            } else if frame.atoms.is_empty() {
                (Vec::new(), Vec::new())
            } else {
                match frame.kind {
                    BlockKind::SymMatrix(n) => {
                        let u = sym_basis(&frame.atoms, n);
                        let xm = svec_to_mat(xb, n);
                        let inner = u.transpose() * xm * &u;
                        let eig = linalg::symmetric_eigen(&inner);
                        let atoms = (0..eig.values.len())
                            .map(|j| Atom::Sym(&u * eig.vectors.column(j)))
                            .collect();
                        (eig.values, atoms)
                    }
                    _ => {
                        let mut pairs: Vec<(f64, Atom)> = frame
                            .atoms
                            .iter()
                            .map(|a| {
                                let l = match a {
                                    Atom::Spin(p) => linalg::dot(xb, p),
                                    Atom::Orth(i) => xb[*i],
                                    Atom::Sym(_) => unreachable!("symmetric atom in a non-matrix block"),
                                };
                                (l, a.clone())
                            })
                            .collect();
                        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
                        pairs.into_iter().unzip()
                    }
                }
            };
            blocks.push(BlockSpectrum {
                block: b,
                eigenvalues,
                kind: frame.kind,
                offset: frame.offset,
                atoms,
            });
        }
        SpectralDecomposition {
            blocks,
            dim: spec.dim(),
        }
    }

    /// Metric projection of `x` onto the face: clamp the spectrum of `Q_c x`.
    pub fn project(&self, spec: &AlgebraSpec, x: &Element) -> Element {
        let inside = self.compress(spec, x);
        self.spectral_within(spec, &inside).map(|l| l.max(0.0))
    }
}

/// How a face sits inside one block.
pub(crate) enum FrameView<'a> {
    Full,
    Empty,
    /// Orthonormal columns spanning the range of the block idempotent.
    Sym(DMatrix<f64>),
    /// The single primitive idempotent of a rank-one spin face.
    Spin(&'a [f64]),
    /// Supporting coordinates of an orthant face.
    Orth(Vec<usize>),
}

fn sym_basis(atoms: &[Atom], n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, atoms.len());
    for (j, a) in atoms.iter().enumerate() {
        if let Atom::Sym(v) = a {
            u.set_column(j, v);
        }
    }
    u
}

fn full_atoms(spec: &AlgebraSpec, b: usize) -> Vec<Atom> {
    let e = spec.identity();
    block_spectrum(spec.blocks()[b], &e[spec.block_range(b)]).1
}

/// Whole-block spectral decomposition, eigenvalues descending.
fn block_spectrum(kind: BlockKind, xb: &[f64]) -> (Vec<f64>, Vec<Atom>) {
    match kind {
        BlockKind::SymMatrix(n) => {
            let eig = linalg::symmetric_eigen(&svec_to_mat(xb, n));
            let atoms = (0..n)
                .map(|j| Atom::Sym(eig.vectors.column(j).into_owned()))
                .collect();
            (eig.values, atoms)
        }
        BlockKind::SpinFactor(n) => {
            let x0 = xb[0] / SQRT_2;
            let bar: Vec<f64> = xb[1..].iter().map(|v| v / SQRT_2).collect();
            let r = linalg::norm(&bar);
            let u: Vec<f64> = if r > 0.0 {
                bar.iter().map(|v| v / r).collect()
            } else {
                let mut u = vec![0.0; n - 1];
                u[0] = 1.0;
                u
            };
            let idem = |sign: f64| {
                let mut p = Vec::with_capacity(n);
                p.push(1.0 / SQRT_2);
                p.extend(u.iter().map(|v| sign * v / SQRT_2));
                Atom::Spin(p)
            };
            (vec![x0 + r, x0 - r], vec![idem(1.0), idem(-1.0)])
        }
        BlockKind::Orthant(n) => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| xb[b].total_cmp(&xb[a]));
            (
                idx.iter().map(|&i| xb[i]).collect(),
                idx.into_iter().map(Atom::Orth).collect(),
            )
        }
    }
}
