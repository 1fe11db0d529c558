//! Geometry of the cone of squares `K` and its faces.

use crate::algebra::{tau_rank, AlgebraSpec, BlockKind, Element, FaceDescriptor, TAU_SPEC};
use crate::error::{Error, Result};

/// Slack allowed when testing dual-face membership of a direction that came
/// out of an iterative solver.
pub const TAU_FACE: f64 = 1e-7;

/// The cone of squares of an algebra, with its polyhedral blocks marked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConeHandle {
    spec: AlgebraSpec,
    polyhedral_mask: Vec<bool>,
}

impl ConeHandle {
    pub fn new(spec: AlgebraSpec) -> Self {
        let polyhedral_mask = spec.blocks().iter().map(|b| b.is_polyhedral()).collect();
        ConeHandle {
            spec,
            polyhedral_mask,
        }
    }

    pub fn from_blocks(blocks: Vec<BlockKind>) -> Result<Self> {
        Ok(Self::new(AlgebraSpec::new(blocks)?))
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn polyhedral_mask(&self) -> &[bool] {
        &self.polyhedral_mask
    }

    pub fn nonpolyhedral_mask(&self) -> Vec<bool> {
        self.polyhedral_mask.iter().map(|p| !p).collect()
    }

    /// True when every block is an orthant.
    pub fn is_polyhedral(&self) -> bool {
        self.polyhedral_mask.iter().all(|&p| p)
    }

    /// Largest number of facial reduction steps that can be needed before
    /// the partial polyhedral Slater condition holds.
    pub fn pps_cap(&self) -> usize {
        self.spec
            .blocks()
            .iter()
            .filter(|b| !b.is_polyhedral())
            .map(|b| b.rank() - 1)
            .sum()
    }

    /// Largest number of steps before Slater's condition holds.
    pub fn slater_cap(&self) -> usize {
        self.spec.rank()
    }

    pub fn lambda_min(&self, x: &Element) -> Result<f64> {
        self.spec.lambda_min(x)
    }

    /// Metric projection onto `K` by clamping the spectrum, and the distance.
    pub fn project(&self, x: &Element) -> Result<(Element, f64)> {
        let sp = self.spec.spectral(x)?;
        let dist = sp
            .eigenvalues()
            .iter()
            .map(|l| l.min(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok((sp.map(|l| l.max(0.0)), dist))
    }

    pub fn dist(&self, x: &Element) -> Result<f64> {
        Ok(self.project(x)?.1)
    }

    /// `inf { t : x − t d ∉ K }` for `d` in the interior of `K`, computed as
    /// `λ_min(Q_{d^{-1/2}} x)`.
    pub fn generalized_eigenvalue(&self, d: &Element, x: &Element) -> Result<f64> {
        self.spec.check(x)?;
        let sp = self.spec.spectral(d)?;
        let lmax = sp.max_eigenvalue().unwrap_or(0.0);
        let lmin = sp.min_eigenvalue().unwrap_or(0.0);
        if lmin <= tau_rank(lmax) {
            return Err(Error::Domain(format!(
                "d is not in the interior of the cone (λ_min = {lmin:e})"
            )));
        }
        let root = sp.map(|l| 1.0 / l.sqrt());
        let q = self.spec.quadratic(&root, x)?;
        self.spec.lambda_min(&q)
    }

    /// The face `F ∩ {z}^⊥` for `z` in the dual of the face `F` encoded by `c`.
    pub fn expose_face(&self, c: &FaceDescriptor, z: &Element) -> Result<FaceDescriptor> {
        self.spec.check(z)?;
        let w = c.compress(&self.spec, z);
        let sp = c.spectral_within(&self.spec, &w);
        if let Some(lmin) = sp.min_eigenvalue() {
            if lmin < -TAU_FACE {
                return Err(Error::NotInDual {
                    min_eigenvalue: lmin,
                });
            }
        }
        let tol = tau_rank(sp.max_eigenvalue().unwrap_or(0.0));
        Ok(sp.select(&self.spec, |l| l <= tol))
    }

    /// `F^Δ = K ∩ F^⊥`, the cone of squares of `V(c, 0)`.
    pub fn conjugate_face(&self, c: &FaceDescriptor) -> Result<FaceDescriptor> {
        c.complement(&self.spec)
    }

    /// Distance from `x` to `span F = V(c, 1)`.
    pub fn dist_span_face(&self, c: &FaceDescriptor, x: &Element) -> f64 {
        (x - &c.compress(&self.spec, x)).norm()
    }

    /// Distance from `x ∈ V(c, 1)` to `F`, computed by clamping the spectrum
    /// inside the subalgebra.
    pub fn dist_to_face_within_span(&self, c: &FaceDescriptor, x: &Element) -> Result<f64> {
        self.spec.check(x)?;
        let inside = c.compress(&self.spec, x);
        let off = (x - &inside).norm();
        if off > TAU_SPEC * x.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Domain(format!(
                "element is not in span F: residual {off:e}"
            )));
        }
        Ok(neg_mass(&c.spectral_within(&self.spec, &inside).eigenvalues()))
    }

    /// Distance from an arbitrary `x` to the face `F`.
    pub fn dist_to_face(&self, c: &FaceDescriptor, x: &Element) -> f64 {
        (x - &c.project(&self.spec, x)).norm()
    }

    /// Projection onto `{z : Q_c z ∈ F}`: clamp the `V(c, 1)` part onto `F`
    /// and pass the other Peirce parts through.
    pub fn project_dual_face(&self, c: &FaceDescriptor, z: &Element) -> Element {
        let w = c.compress(&self.spec, z);
        let clamped = c.spectral_within(&self.spec, &w).map(|l| l.max(0.0));
        let mut out = z - &w;
        out.axpy(1.0, &clamped);
        out
    }
}

fn neg_mass(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|l| l.min(0.0).powi(2))
        .sum::<f64>()
        .sqrt()
}
