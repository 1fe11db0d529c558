//! Distance to the feasible set `(L+a) ∩ K` by Dykstra's method.
//!
//! The oracle is independent of the certificate it checks: it only uses the
//! metric projections onto the cone (or onto a face known to contain the
//! feasible set) and onto the affine set.

use crate::affine::AffineSet;
use crate::algebra::{Element, FaceDescriptor};
use crate::conegeom::ConeHandle;
use crate::error::{Error, Result};

/// Gap above which a stalled feasibility probe declares the problem infeasible.
pub const DELTA_INFEAS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOptions {
    /// Stop once successive iterates move less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration budget of the feasibility probe run from the origin.
    pub probe_iter: usize,
    pub window: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-10,
            max_iter: 200_000,
            probe_iter: 50_000,
            window: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    /// Approximate metric projection of the input onto the feasible set.
    pub point: Element,
    pub dist: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out first.
    pub converged: bool,
}

/// Dykstra-based projection onto `(L+a) ∩ F` where `F ⊆ K` is a face known
/// to contain every feasible point (the whole cone when nothing is known).
#[derive(Clone, Debug)]
pub struct FeasibilityOracle {
    cone: ConeHandle,
    affine: AffineSet,
    face: FaceDescriptor,
    opts: OracleOptions,
}

impl FeasibilityOracle {
    /// Build the oracle and check feasibility with a run from the origin.
    pub fn new(
        cone: ConeHandle,
        affine: AffineSet,
        hint: Option<FaceDescriptor>,
        opts: OracleOptions,
    ) -> Result<Self> {
        if affine.dim() != cone.dim() {
            return Err(Error::Dimension {
                expected: cone.dim(),
                got: affine.dim(),
            });
        }
        let face = hint.unwrap_or_else(|| FaceDescriptor::whole(cone.spec()));
        let oracle = FeasibilityOracle {
            cone,
            affine,
            face,
            opts,
        };
        oracle.probe()?;
        Ok(oracle)
    }

    pub fn cone(&self) -> &ConeHandle {
        &self.cone
    }

    pub fn affine(&self) -> &AffineSet {
        &self.affine
    }

    pub fn face(&self) -> &FaceDescriptor {
        &self.face
    }

    fn probe(&self) -> Result<()> {
        let spec = self.cone.spec();
        let mut a = spec.zero();
        let mut p = spec.zero();
        let mut window_gap = f64::INFINITY;
        let mut gap = f64::INFINITY;
        for k in 1..=self.opts.probe_iter {
            let ap = &a + &p;
            let f = self.face.project(spec, &ap);
            p = &ap - &f;
            a = self.affine.project(&f).0;
            gap = (&a - &f).norm();
            if gap <= self.opts.tol {
                return Ok(());
            }
            if k % self.opts.window == 0 {
                if gap >= DELTA_INFEAS && window_gap - gap < 1e-6 * window_gap {
                    return Err(Error::InfeasibleProblem { gap });
                }
                window_gap = gap;
            }
        }
        if gap > DELTA_INFEAS {
            return Err(Error::InfeasibleProblem { gap });
        }
        Ok(())
    }

    /// Metric projection of `x` onto the feasible set.
    pub fn project(&self, x: &Element) -> Projection {
        let spec = self.cone.spec();
        let mut a = x.clone();
        let mut p = spec.zero();
        let mut f = x.clone();
        for k in 1..=self.opts.max_iter {
            let ap = &a + &p;
            f = self.face.project(spec, &ap);
            p = &ap - &f;
            let a_new = self.affine.project(&f).0;
            let change = (&a_new - &a).norm();
            a = a_new;
            if change <= self.opts.tol * a.norm().max(1.0) {
                let dist = (x - &f).norm();
                return Projection {
                    point: f,
                    dist,
                    iterations: k,
                    converged: true,
                };
            }
        }
        let dist = (x - &f).norm();
        Projection {
            point: f,
            dist,
            iterations: self.opts.max_iter,
            converged: false,
        }
    }

    pub fn dist_to_feasible(&self, x: &Element) -> f64 {
        self.project(x).dist
    }

    /// The projection of the identity: a deterministic feasible point.
    pub fn feasible_point(&self) -> Element {
        self.project(&self.cone.spec().identity()).point
    }

    pub fn dist_cone(&self, x: &Element) -> f64 {
        self.cone.dist(x).expect("dimension checked at construction")
    }

    pub fn dist_affine(&self, x: &Element) -> f64 {
        self.affine.dist(x)
    }
}

/// `dist(x, (L+a) ∩ K)` with no face information.
pub fn dist_to_feasible(
    x: &Element,
    cone: &ConeHandle,
    s: &AffineSet,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    cone.spec().check(x)?;
    let opts = OracleOptions {
        tol,
        max_iter,
        ..OracleOptions::default()
    };
    let oracle = FeasibilityOracle::new(cone.clone(), s.clone(), None, opts)?;
    Ok(oracle.dist_to_feasible(x))
}
