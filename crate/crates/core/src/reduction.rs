//! Facial reduction: reducing directions, face chains, the partial
//! polyhedral Slater (PPS) test and trivial-intersection certificates.
//!
//! A reducing direction for the face `F` (idempotent `c`) is a
//! `z ∈ F* ∩ W` with `⟨z, c_sel⟩ = 1`, where `W = L^⊥ ∩ {a}^⊥`. Every feasible
//! point is orthogonal to such a `z`, so the feasible set lives in the
//! smaller face `F ∩ {z}^⊥`.

mod polish;

use std::fmt;
use std::str::FromStr;

use crate::affine::AffineSet;
use crate::algebra::{tau_rank, Element, FaceDescriptor};
use crate::conegeom::{ConeHandle, TAU_FACE};
use crate::error::{Error, Result};

/// Which constraint qualification the chain is driven towards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Slater's condition on the non-polyhedral blocks only.
    Pps,
    /// Slater's condition on every block.
    Slater,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pps => "pps",
            Mode::Slater => "slater",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pps" => Ok(Mode::Pps),
            "slater" => Ok(Mode::Slater),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Iteration limits and thresholds for the direction search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBudget {
    pub max_iter: usize,
    /// Gap below which the Dykstra iterates count as converged.
    pub delta_gap: f64,
    /// Gap above which a stalled run counts as infeasible.
    pub delta_infeas: f64,
    pub window: usize,
    /// Iterate norm treated as divergence.
    pub r_max: f64,
    /// Iterations at which the structured refinement is attempted.
    pub polish_at: Vec<usize>,
    /// Supergradient steps for the trivial-intersection certificate.
    pub ascent_iter: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_iter: 50_000,
            delta_gap: 1e-9,
            delta_infeas: 1e-6,
            window: 500,
            r_max: 1e6,
            polish_at: vec![200, 1_000, 5_000, 20_000, 50_000],
            ascent_iter: 5_000,
        }
    }
}

impl SearchBudget {
    pub fn with_max_iter(max_iter: usize) -> Self {
        SearchBudget {
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    /// A unit-norm reducing direction.
    Found(Element),
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSearchReport {
    pub outcome: SearchOutcome,
    pub iterations: usize,
    /// Distance between the two Dykstra iterates when the search stopped.
    pub gap: f64,
}

impl DirectionSearchReport {
    pub fn direction(&self) -> Option<&Element> {
        match &self.outcome {
            SearchOutcome::Found(z) => Some(z),
            SearchOutcome::Infeasible => None,
        }
    }

    fn infeasible(iterations: usize, gap: f64) -> Self {
        DirectionSearchReport {
            outcome: SearchOutcome::Infeasible,
            iterations,
            gap,
        }
    }
}

/// Search for a reducing direction of the face `c`.
///
/// Runs Dykstra's method between `C = {z : Q_c z ∈ F}` and
/// `A' = W ∩ {⟨z, c_sel⟩ = 1}`, with `c_sel = c` in Slater mode and `c`
/// restricted to the non-polyhedral blocks in PPS mode. At a few checkpoints
/// the current iterate is handed to a Levenberg–Marquardt refinement that
/// fixes the rank profile of `Q_c z` and solves for an exact direction.
pub fn find_reducing_direction(
    cone: &ConeHandle,
    c: &FaceDescriptor,
    s: &AffineSet,
    mode: Mode,
    budget: &SearchBudget,
) -> Result<DirectionSearchReport> {
    let spec = cone.spec();
    if c.c().len() != spec.dim() || s.dim() != spec.dim() {
        return Err(Error::InvalidFace(
            "face and affine set must match the cone dimension".into(),
        ));
    }
    let sel = match mode {
        Mode::Slater => c.clone(),
        Mode::Pps => c.restrict_blocks(spec, &cone.nonpolyhedral_mask()),
    };
    if sel.is_zero() {
        return Ok(DirectionSearchReport::infeasible(0, f64::INFINITY));
    }
    let c_sel = sel.c();
    let g = s.project_w(c_sel);
    let gg = g.dot(&g);
    if gg.sqrt() <= 1e-12 * c_sel.norm() {
        return Ok(DirectionSearchReport::infeasible(0, f64::INFINITY));
    }

    let project_a = |z: &Element| {
        let mut p = s.project_w(z);
        let shift = (1.0 - p.dot(&g)) / gg;
        p.axpy(shift, &g);
        p
    };

    let n = spec.dim();
    let mut x = project_a(&spec.zero());
    let mut p = Element::zeros(n);
    let mut q = Element::zeros(n);
    let mut gap = f64::INFINITY;
    let mut window_start_gap = f64::INFINITY;
    let mut last_polish = 0usize;

    let found = |z: Element, iterations: usize, gap: f64| {
        let norm = z.norm();
        DirectionSearchReport {
            outcome: SearchOutcome::Found(z.scaled(1.0 / norm)),
            iterations,
            gap,
        }
    };

    for k in 1..=budget.max_iter {
        let xp = &x + &p;
        let y = cone.project_dual_face(c, &xp);
        p = &xp - &y;
        let yq = &y + &q;
        let x_new = project_a(&yq);
        q = &yq - &x_new;
        x = x_new;
        gap = (&x - &y).norm();

        if !x.is_finite() || x.norm() > budget.r_max {
            return Ok(DirectionSearchReport::infeasible(k, gap));
        }

        let converged = gap <= budget.delta_gap;
        let checkpoint = budget.polish_at.contains(&k);
        if checkpoint || (converged && k >= last_polish + budget.window) {
            last_polish = k;
            if let Some(z) = polish::polish(spec, c, s.w_basis(), c_sel, &y) {
                return Ok(found(z, k, gap));
            }
            if converged && is_direction(cone, c, &x) {
                return Ok(found(x, k, gap));
            }
        }

        if k % budget.window == 0 {
            if gap >= budget.delta_infeas && window_start_gap - gap < 1e-6 * window_start_gap {
                return Ok(DirectionSearchReport::infeasible(k, gap));
            }
            window_start_gap = gap;
        }
    }

    if gap > budget.delta_infeas {
        // stalled over the last full window: infeasible; still shrinking: out of budget
        if window_start_gap.is_finite() && window_start_gap - gap < 1e-6 * window_start_gap {
            return Ok(DirectionSearchReport::infeasible(budget.max_iter, gap));
        }
        return Err(Error::BudgetExhausted { gap });
    }
    if let Some(z) = polish::polish(spec, c, s.w_basis(), c_sel, &x) {
        return Ok(found(z, budget.max_iter, gap));
    }
    if gap <= budget.delta_gap && is_direction(cone, c, &x) {
        return Ok(found(x, budget.max_iter, gap));
    }
    Err(Error::BudgetExhausted { gap })
}

/// The chain invariants for a direction: `Q_c z` is in `F` up to `τ_face`
/// and is not numerically zero.
fn is_direction(cone: &ConeHandle, c: &FaceDescriptor, z: &Element) -> bool {
    let spec = cone.spec();
    let unit = z.scaled(1.0 / z.norm());
    let w = c.compress(spec, &unit);
    let sp = c.spectral_within(spec, &w);
    let lmin = sp.min_eigenvalue().unwrap_or(0.0);
    lmin >= -TAU_FACE && w.norm() > tau_rank(sp.max_abs_eigenvalue())
}

/// Try `z + t·extra` for a decreasing sequence of `t`, accepting the first
/// combination that stays in the dual face of `c` and exposes a face of rank
/// below `rank`.
fn fold_direction(
    cone: &ConeHandle,
    c: &FaceDescriptor,
    z: &Element,
    extra: &Element,
    rank: usize,
) -> Result<Option<(Element, FaceDescriptor)>> {
    let spec = cone.spec();
    let scale = z.norm() / extra.norm();
    for t in [1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3] {
        let mut merged = z.clone();
        merged.axpy(t * scale, extra);
        let unit = merged.scaled(1.0 / merged.norm());
        let sp = c.spectral_within(spec, &c.compress(spec, &unit));
        let lmin = sp.min_eigenvalue().unwrap_or(0.0);
        if lmin < -FOLD_TOL {
            continue;
        }
        let face = cone.expose_face(c, &unit)?;
        if face.rank() < rank {
            return Ok(Some((unit, face)));
        }
    }
    Ok(None)
}

/// Slack on `λ_min` allowed for a folded direction; far below `TAU_FACE`
/// so that folding never manufactures a direction out of rounding.
const FOLD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The last search found no direction: the constraint qualification holds.
    CqReached,
    /// A direction still existed after the maximal number of steps.
    StepCapHit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::CqReached => "cq_reached",
            Termination::StepCapHit => "step_cap_hit",
        })
    }
}

/// Faces `F₁ = K ⊋ F₂ ⊋ … ⊋ F_ℓ` with the directions that cut them.
#[derive(Clone, Debug)]
pub struct ReductionChain {
    pub mode: Mode,
    pub faces: Vec<FaceDescriptor>,
    pub directions: Vec<Element>,
    pub termination: Termination,
    pub reports: Vec<DirectionSearchReport>,
    /// `min(dim W, cap(mode))`
    pub cap: usize,
    pub dim_w: usize,
    pub rank_cap: usize,
}

impl ReductionChain {
    /// Number of reduction steps `d = ℓ − 1`.
    pub fn steps(&self) -> usize {
        self.directions.len()
    }

    pub fn final_face(&self) -> &FaceDescriptor {
        self.faces.last().expect("a chain starts with the whole cone")
    }

    pub fn face_ranks(&self) -> Vec<usize> {
        self.faces.iter().map(|f| f.rank()).collect()
    }

    pub fn cq_reached(&self) -> bool {
        self.termination == Termination::CqReached
    }
}

/// Build a facial reduction chain from `K` until the search reports no
/// direction or the step cap for `mode` is reached.
pub fn run_facial_reduction(
    cone: &ConeHandle,
    s: &AffineSet,
    mode: Mode,
    budget: &SearchBudget,
) -> Result<ReductionChain> {
    let rank_cap = match mode {
        Mode::Pps => cone.pps_cap(),
        Mode::Slater => cone.slater_cap(),
    };
    let dim_w = s.dim_w();
    let cap = rank_cap.min(dim_w);
    let mut faces = vec![FaceDescriptor::whole(cone.spec())];
    let mut directions = Vec::new();
    let mut reports = Vec::new();
    let mut pending = None;
    let termination = loop {
        let c = faces.last().expect("nonempty").clone();
        let report = match pending.take() {
            Some(r) => r,
            None => find_reducing_direction(cone, &c, s, mode, budget)?,
        };
        let z = report.direction().cloned();
        reports.push(report);
        let Some(mut z) = z else {
            break Termination::CqReached;
        };
        if directions.len() >= cap {
            break Termination::StepCapHit;
        }
        let mut next = cone.expose_face(&c, &z)?;
        if next.rank() >= c.rank() {
            return Err(Error::InvalidFace(format!(
                "direction did not shrink the face (rank {})",
                c.rank()
            )));
        }
        // A direction of the smaller face can often be folded into `z`,
        // which cuts deeper in one step. Without this the chain may spend
        // several steps on what one maximal-rank direction does at once.
        loop {
            let report = find_reducing_direction(cone, &next, s, mode, budget)?;
            let Some(extra) = report.direction() else {
                pending = Some(report);
                break;
            };
            match fold_direction(cone, &c, &z, extra, next.rank())? {
                Some((merged, face)) => {
                    z = merged;
                    next = face;
                }
                None => {
                    pending = Some(report);
                    break;
                }
            }
        }
        faces.push(next);
        directions.push(z);
    };
    Ok(ReductionChain {
        mode,
        faces,
        directions,
        termination,
        reports,
        cap,
        dim_w,
        rank_cap,
    })
}

/// Whether the partial polyhedral Slater condition holds, decided by one
/// PPS-mode direction search. A search that runs out of budget counts as
/// "not established".
pub fn pps_holds(cone: &ConeHandle, s: &AffineSet, budget: &SearchBudget) -> bool {
    let whole = FaceDescriptor::whole(cone.spec());
    matches!(
        find_reducing_direction(cone, &whole, s, Mode::Pps, budget),
        Ok(DirectionSearchReport {
            outcome: SearchOutcome::Infeasible,
            ..
        })
    )
}

/// Threshold on `λ_min(z)` for accepting an interior dual certificate.
pub const TAU_INT: f64 = 1e-6;

/// Look for `z ∈ int K ∩ L^⊥`, which certifies `L ∩ K = {0}`.
///
/// Projected supergradient ascent on `λ_min` over the unit ball of `L^⊥`;
/// the supergradient is the first primitive idempotent of the smallest
/// eigenvalue and the step is `1/√k`.
pub fn trivial_intersection_certificate(
    cone: &ConeHandle,
    s: &AffineSet,
    budget: &SearchBudget,
) -> Result<Option<Element>> {
    if s.rhs().iter().any(|&v| v != 0.0) {
        return Err(Error::Domain(
            "trivial-intersection certificates need b = 0".into(),
        ));
    }
    let spec = cone.spec();
    let basis = s.row_basis();
    if basis.ncols() == 0 {
        return Ok(None);
    }
    let project = |z: &Element| {
        let zv = nalgebra::DVector::from_column_slice(z);
        let p = basis * (basis.transpose() * zv);
        Element::new(p.as_slice().to_vec())
    };
    let mut z = project(&spec.identity());
    if z.norm() == 0.0 {
        z = Element::new(basis.column(0).as_slice().to_vec());
    }
    z = z.scaled(1.0 / z.norm());
    let mut best = (spec.lambda_min(&z)?, z.clone());
    for k in 1..=budget.ascent_iter {
        let sp = spec.spectral(&z)?;
        let lmin = sp.min_eigenvalue().expect("nonempty spectrum");
        if lmin > best.0 {
            best = (lmin, z.clone());
        }
        let (_, _, sub) = sp
            .idempotents()
            .into_iter()
            .find(|(_, l, _)| *l == lmin)
            .expect("the minimum is attained");
        z.axpy(1.0 / (k as f64).sqrt(), &project(&sub));
        let nz = z.norm();
        if nz > 1.0 {
            z = z.scaled(1.0 / nz);
        }
    }
    let lmin = spec.lambda_min(&z)?;
    if lmin > best.0 {
        best = (lmin, z);
    }
    Ok((best.0 > TAU_INT).then_some(best.1))
}
