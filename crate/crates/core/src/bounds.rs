//! Facial residual functions, their `◇` composition, and the Hölderian
//! error-bound certificates assembled from a facial reduction chain.
//!
//! A residual function is a finite sum `ψ(ε, t) = Σ κ ε^p t^q`. For a face
//! of a symmetric cone cut by a direction `z`, the residual function is
//! `κ ε + κ √(ε t)`; for a polyhedral block it is the Hoffman-type `κ ε`.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::affine::AffineSet;
use crate::algebra::{BlockKind, Element};
use crate::conegeom::ConeHandle;
use crate::error::{Error, Result};
use crate::reduction::{Mode, ReductionChain, Termination};

/// One term `κ ε^p t^q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub kappa: f64,
    pub p: f64,
    pub q: f64,
}

impl Term {
    pub fn eval(&self, eps: f64, t: f64) -> f64 {
        // 0^0 = 1 so that t-free terms stay finite at t = 0
        let tq = if self.q == 0.0 { 1.0 } else { t.powf(self.q) };
        self.kappa * eps.powf(self.p) * tq
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ResidualFunction {
    terms: Vec<Term>,
}

impl ResidualFunction {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !(t.kappa >= 0.0 && t.kappa.is_finite()) {
                return Err(Error::Domain(format!("term constant {} is not ≥ 0", t.kappa)));
            }
            if !(t.p > 0.0 && t.p <= 1.0) || !(t.q >= 0.0) {
                return Err(Error::Domain(format!(
                    "term exponents ({}, {}) out of range",
                    t.p, t.q
                )));
            }
        }
        Ok(ResidualFunction { terms }.grouped())
    }

    /// The function that is identically zero.
    pub fn zero() -> Self {
        ResidualFunction::default()
    }

    /// `ψ(ε, t) = ε`, the residual function of a chain with no steps.
    pub fn linear() -> Self {
        ResidualFunction {
            terms: vec![Term {
                kappa: 1.0,
                p: 1.0,
                q: 0.0,
            }],
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, eps: f64, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(eps, t)).sum()
    }

    /// Smallest exponent of `ε`; the Hölder exponent for `ε ≤ 1`.
    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.p).reduce(f64::min)
    }

    /// Merge terms with identical exponents; order by decreasing `p`.
    fn grouped(mut self) -> Self {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        self.terms.sort_by(|a, b| b.p.total_cmp(&a.p).then(a.q.total_cmp(&b.q)));
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.p == t.p && last.q == t.q => last.kappa += t.kappa,
                _ => out.push(t),
            }
        }
        ResidualFunction { terms: out }
    }
}

impl fmt::Display for ResidualFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}·ε^{}", t.kappa, t.p)?;
            if t.q != 0.0 {
                write!(f, "·t^{}", t.q)?;
            }
        }
        Ok(())
    }
}

fn positive(kappa: f64) -> Result<f64> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(kappa)
    } else {
        Err(Error::Domain(format!("κ must be positive, got {kappa}")))
    }
}

/// `κ ε + κ √(ε t)`.
pub fn frf_symmetric(kappa: f64) -> Result<ResidualFunction> {
    let kappa = positive(kappa)?;
    ResidualFunction::new(vec![
        Term { kappa, p: 1.0, q: 0.0 },
        Term { kappa, p: 0.5, q: 0.5 },
    ])
}

/// `κ ε`.
pub fn frf_polyhedral(kappa: f64) -> Result<ResidualFunction> {
    let kappa = positive(kappa)?;
    ResidualFunction::new(vec![Term { kappa, p: 1.0, q: 0.0 }])
}

pub fn frf_sum(a: &ResidualFunction, b: &ResidualFunction) -> ResidualFunction {
    let mut terms = a.terms.clone();
    terms.extend_from_slice(&b.terms);
    ResidualFunction { terms }.grouped()
}

/// `(ψ ◇ φ)(ε, t) = ψ(ε + φ(ε, t), t)`.
pub fn diamond_eval(
    psi: &ResidualFunction,
    phi: impl Fn(f64, f64) -> f64,
    eps: f64,
    t: f64,
) -> Result<f64> {
    if eps < 0.0 || t < 0.0 {
        return Err(Error::Domain("ε and t must be nonnegative".into()));
    }
    Ok(psi.eval(eps + phi(eps, t), t))
}

/// `ψ_ℓ ◇ ⋯ ◇ ψ₁` evaluated at `(ε, t)`, with `frfs[0] = ψ₁`.
pub fn diamond_chain(frfs: &[ResidualFunction], eps: f64, t: f64) -> Result<f64> {
    let mut value = 0.0;
    for (i, psi) in frfs.iter().enumerate() {
        value = if i == 0 {
            diamond_eval(psi, |_, _| 0.0, eps, t)?
        } else {
            let prev = value;
            diamond_eval(psi, |_, _| prev, eps, t)?
        };
    }
    Ok(value)
}

/// Shape of a residual function accepted by [`closed_form_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Symmetric(f64),
    Polyhedral(f64),
}

fn shape(psi: &ResidualFunction) -> Result<Shape> {
    let mut lin = None;
    let mut root = None;
    for t in psi.terms() {
        match (t.p, t.q) {
            (p, q) if p == 1.0 && q == 0.0 => lin = Some(t.kappa),
            (p, q) if p == 0.5 && q == 0.5 => root = Some(t.kappa),
            _ => {
                return Err(Error::Domain(format!(
                    "unsupported term ε^{} t^{} in a residual function",
                    t.p, t.q
                )))
            }
        }
    }
    match (lin, root) {
        (Some(a), Some(b)) => Ok(Shape::Symmetric(a.max(b))),
        (Some(a), None) => Ok(Shape::Polyhedral(a)),
        (None, Some(b)) => Ok(Shape::Symmetric(b)),
        (None, None) => Err(Error::Domain("empty residual function".into())),
    }
}

/// Single-constant closed form `κ Σ_{j=0..D} ε^{2^{-j}} t^{1-2^{-j}}` that
/// dominates `ψ_ℓ ◇ ⋯ ◇ ψ₁` for all `ε, t ≥ 0`.
///
/// A symmetric step with constant `κ_ℓ` maps the running constant `κ̃` to
/// `κ_ℓ + κ_ℓ κ̃ + κ_ℓ √κ̃` and adds one level of square root; a polyhedral
/// step maps it to `κ_ℓ + κ_ℓ κ̃` and adds none.
pub fn closed_form_bound(frfs: &[ResidualFunction]) -> Result<ResidualFunction> {
    let Some((first, rest)) = frfs.split_first() else {
        return Err(Error::InvalidParameter(
            "closed form needs at least one residual function".into(),
        ));
    };
    let (mut kappa, mut depth) = match shape(first)? {
        Shape::Symmetric(k) => (k, 1),
        Shape::Polyhedral(k) => (k, 0),
    };
    for psi in rest {
        match shape(psi)? {
            Shape::Symmetric(k) => {
                kappa = k + k * kappa + k * kappa.sqrt();
                depth += 1;
            }
            Shape::Polyhedral(k) => kappa = k + k * kappa,
        }
    }
    Ok(hoelder_terms(kappa, depth))
}

fn hoelder_terms(kappa: f64, depth: usize) -> ResidualFunction {
    let terms = (0..=depth)
        .map(|j| {
            let p = 0.5f64.powi(j as i32);
            Term { kappa, p, q: 1.0 - p }
        })
        .collect();
    ResidualFunction { terms }
}

/// A Hölderian error bound
/// `dist(x, (L+a) ∩ K) ≤ κ (‖x‖ + 1) φ(ε, ‖x‖)` for every `x` with
/// `dist(x, K) ≤ ε` and `dist(x, L+a) ≤ ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBoundCertificate {
    pub mode: Mode,
    /// Reduction steps to the constraint qualification.
    pub d: usize,
    /// `2^{-d}`
    pub gamma: f64,
    pub phi: ResidualFunction,
    pub dim_w: usize,
    pub rank_cap: usize,
    /// Per-block face ranks along the chain.
    pub face_ranks: Vec<Vec<usize>>,
    /// Empirical constant from calibration, when available.
    pub fitted_kappa: Option<f64>,
}

impl ErrorBoundCertificate {
    /// `(‖x‖ + 1) φ(ε, ‖x‖)`, without any fitted constant.
    pub fn shape_value(&self, eps: f64, norm_x: f64) -> f64 {
        (norm_x + 1.0) * self.phi.eval(eps, norm_x)
    }

    /// The bound with the fitted constant (or 1).
    pub fn bound(&self, eps: f64, norm_x: f64) -> f64 {
        self.fitted_kappa.unwrap_or(1.0) * self.shape_value(eps, norm_x)
    }

    /// Flat text record, one `key=value` per line.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("certificate.mode={}\n", self.mode));
        out.push_str(&format!("certificate.d={}\n", self.d));
        out.push_str(&format!("certificate.gamma={}\n", self.gamma));
        for t in self.phi.terms() {
            out.push_str(&format!("certificate.term={} {} {}\n", t.kappa, t.p, t.q));
        }
        out.push_str(&format!("certificate.cap.dim_w={}\n", self.dim_w));
        out.push_str(&format!("certificate.cap.rank={}\n", self.rank_cap));
        out.push_str(&format!("certificate.cap.observed_d={}\n", self.d));
        for (i, r) in self.face_ranks.iter().enumerate() {
            let ranks: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("certificate.face.{i}={}\n", ranks.join(" ")));
        }
        if let Some(k) = self.fitted_kappa {
            out.push_str(&format!("certificate.kappa={k}\n"));
        }
        out
    }
}

/// Turn a regularised chain into a certificate.
///
/// Step `i` uses `frf_symmetric(kappas[i])` when its direction cut a
/// non-polyhedral block and `frf_polyhedral(kappas[i])` otherwise.
pub fn make_certificate(
    cone: &ConeHandle,
    chain: &ReductionChain,
    kappas: &[f64],
) -> Result<ErrorBoundCertificate> {
    if chain.termination == Termination::StepCapHit {
        return Err(Error::CertificateUnavailable);
    }
    let d = chain.steps();
    if kappas.len() != d {
        return Err(Error::InvalidParameter(format!(
            "{d} steps need {d} constants, got {}",
            kappas.len()
        )));
    }
    let face_ranks: Vec<Vec<usize>> = chain.faces.iter().map(|f| f.ranks()).collect();
    let phi = if d == 0 {
        ResidualFunction::linear()
    } else {
        let mut frfs = Vec::with_capacity(d);
        for (i, &k) in kappas.iter().enumerate() {
            let cut_nonpoly = face_ranks[i]
                .iter()
                .zip(&face_ranks[i + 1])
                .zip(cone.polyhedral_mask())
                .any(|((a, b), &poly)| !poly && a != b);
            frfs.push(if cut_nonpoly {
                frf_symmetric(k)?
            } else {
                frf_polyhedral(k)?
            });
        }
        closed_form_bound(&frfs)?
    };
    Ok(ErrorBoundCertificate {
        mode: chain.mode,
        d,
        gamma: 0.5f64.powi(d as i32),
        phi,
        dim_w: chain.dim_w,
        rank_cap: chain.rank_cap,
        face_ranks,
        fitted_kappa: None,
    })
}

/// The product-space reformulation of `(L+a) ∩ K¹ ∩ K²`.
#[derive(Clone, Debug)]
pub struct LiftedProblem {
    pub cone: ConeHandle,
    pub affine: AffineSet,
    /// Residuals of `x` inflate by at most this factor when `x` is lifted to `(x, x)`.
    pub input_inflation: f64,
    /// Distances in the lift deflate by this factor back on the original space.
    pub output_deflation: f64,
}

impl LiftedProblem {
    pub fn lift(&self, x: &Element) -> Element {
        let mut v = x.coords().to_vec();
        v.extend_from_slice(x);
        Element::new(v)
    }

    /// Average of the two copies: the projection onto the diagonal.
    pub fn deflate(&self, xx: &Element) -> Element {
        let n = xx.len() / 2;
        Element::new((0..n).map(|i| 0.5 * (xx[i] + xx[n + i])).collect())
    }
}

/// `{(x, x) : x ∈ L+a}` inside `K¹ × K²`: the original equations on the
/// first copy plus `x₁ − x₂ = 0`.
pub fn intersection_lift(
    cone1: &ConeHandle,
    cone2: &ConeHandle,
    s: &AffineSet,
) -> Result<LiftedProblem> {
    let n = cone1.dim();
    if cone2.dim() != n || s.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: if cone2.dim() != n { cone2.dim() } else { s.dim() },
        });
    }
    let mut blocks: Vec<BlockKind> = cone1.spec().blocks().to_vec();
    blocks.extend_from_slice(cone2.spec().blocks());
    let cone = ConeHandle::from_blocks(blocks)?;
    let a = s.matrix();
    let m = a.nrows();
    let mut big = DMatrix::zeros(m + n, 2 * n);
    big.view_mut((0, 0), (m, n)).copy_from(a);
    for i in 0..n {
        big[(m + i, i)] = 1.0;
        big[(m + i, n + i)] = -1.0;
    }
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(s.rhs());
    Ok(LiftedProblem {
        cone,
        affine: AffineSet::new(big, rhs)?,
        input_inflation: SQRT_2,
        output_deflation: 1.0 / SQRT_2,
    })
}

/// The doubly nonnegative cone `S^n_+ ∩ R^{n(n+1)/2}_+` as a lift. Entrywise
/// nonnegativity is read on canonical coordinates, which is unaffected by
/// the positive off-diagonal scaling.
pub fn doubly_nonnegative_problem(n: usize, s: &AffineSet) -> Result<LiftedProblem> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let psd = ConeHandle::from_blocks(vec![BlockKind::SymMatrix(n)])?;
    let nonneg = ConeHandle::from_blocks(vec![BlockKind::Orthant(n * (n + 1) / 2)])?;
    intersection_lift(&psd, &nonneg, s)
}
