//! Independent verification of error-bound certificates: a projection
//! oracle, instance generators, ε-feasible probe points, exponent fits and
//! the held-out bound check.

pub mod generators;
pub mod oracle;
pub mod random;

use rayon::prelude::*;

use crate::algebra::{Element, FaceDescriptor};
use crate::bounds::{make_certificate, ErrorBoundCertificate};
use crate::error::{Error, Result};
use crate::reduction::{run_facial_reduction, Mode, ReductionChain, SearchBudget};

pub use generators::{
    designed_singularity, designed_singularity_with, dnn_sturm, orthant_instance, sturm_family,
    trivial_intersection_instance, Problem,
};
pub use oracle::{dist_to_feasible, FeasibilityOracle, OracleOptions, Projection};

/// Independent ascents per adversarial trial; the trial keeps the best.
pub const ADVERSARIAL_STARTS: usize = 12;

/// Default ε grid, one point per decade.
pub const DEFAULT_EPS_GRID: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Random,
    Adversarial,
}

impl std::fmt::Display for Stream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stream::Random => "random",
            Stream::Adversarial => "adversarial",
        })
    }
}

/// An ε-feasible point with its three distances.
#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub eps: f64,
    pub stream: Stream,
    pub trial: usize,
    pub x: Element,
    pub dist_k: f64,
    pub dist_affine: f64,
    pub dist_feasible: f64,
    pub norm_x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeOptions {
    /// Descending.
    pub eps_grid: Vec<f64>,
    pub random_trials: usize,
    pub adversarial_trials: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    /// Norm cap `ρ`; defaults to `2 max(1, ‖x*‖)`.
    pub rho: Option<f64>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            random_trials: 64,
            adversarial_trials: 8,
            ascent_steps: 200,
            seed: 0,
            rho: None,
        }
    }
}

struct Slab<'a> {
    oracle: &'a FeasibilityOracle,
    eps: f64,
    rho: f64,
}

impl Slab<'_> {
    fn holds(&self, x: &Element) -> bool {
        let slack = self.eps * (1.0 + 1e-9);
        x.norm() <= self.rho * (1.0 + 1e-12)
            && self.oracle.dist_affine(x) <= slack
            && self.oracle.dist_cone(x) <= slack
    }

    /// Move `x` back into `{dist_K ≤ ε, dist_{L+a} ≤ ε, ‖x‖ ≤ ρ}` by pulling it
    /// towards each set until it sits at distance ε.
    fn pull(&self, x: &Element) -> Option<Element> {
        let cone = self.oracle.cone();
        let affine = self.oracle.affine();
        let mut x = x.clone();
        for _ in 0..60 {
            let (pk, dk) = cone.project(&x).ok()?;
            if dk > self.eps {
                x = &pk + &(&x - &pk).scaled(self.eps / dk);
            }
            let (pa, da) = affine.project(&x);
            if da > self.eps {
                x = &pa + &(&x - &pa).scaled(self.eps / da);
            }
            let nx = x.norm();
            if nx > self.rho {
                x = x.scaled(self.rho / nx);
            }
            if self.holds(&x) {
                return Some(x);
            }
        }
        None
    }

    /// Outward unit normals of the slab constraints active at `x`.
    fn active_normals(&self, x: &Element) -> Vec<Element> {
        let mut normals = Vec::new();
        if let Ok((pk, dk)) = self.oracle.cone().project(x) {
            if dk >= 0.99 * self.eps {
                normals.push((x - &pk).scaled(1.0 / dk));
            }
        }
        let (pa, da) = self.oracle.affine().project(x);
        if da >= 0.99 * self.eps {
            normals.push((x - &pa).scaled(1.0 / da));
        }
        let nx = x.norm();
        if nx >= 0.999 * self.rho {
            normals.push(x.scaled(1.0 / nx));
        }
        normals
    }

    /// Remove from `g` the components that push through active constraints.
    fn tangent(&self, x: &Element, g: Element) -> Element {
        let mut normals = self.active_normals(x);
        loop {
            let k = normals.len();
            if k == 0 {
                return g;
            }
            let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| normals[i].dot(&normals[j]));
            let rhs = nalgebra::DVector::from_fn(k, |i, _| normals[i].dot(&g));
            let Some(coef) = gram.clone().lu().solve(&rhs) else {
                normals.pop();
                continue;
            };
            if let Some(i) = coef.iter().position(|&c| c < 0.0) {
                normals.remove(i);
                continue;
            }
            let mut t = g.clone();
            for (n, c) in normals.iter().zip(coef.iter()) {
                t.axpy(-c, n);
            }
            let nt = t.norm();
            return if nt > 1e-12 { t.scaled(1.0 / nt) } else { g };
        }
    }

    fn sample(&self, x: Element, stream: Stream, trial: usize, dist_feasible: f64) -> ProbeSample {
        ProbeSample {
            eps: self.eps,
            stream,
            trial,
            dist_k: self.oracle.dist_cone(&x),
            dist_affine: self.oracle.dist_affine(&x),
            dist_feasible,
            norm_x: x.norm(),
            x,
        }
    }
}

/// `x = Π_{L+a}(x* + ε g) + ε h`, shrunk towards `x*` until the slab
/// conditions hold.
fn random_probe(slab: &Slab<'_>, x_star: &Element, seed: u64, trial: usize) -> ProbeSample {
    let spec = slab.oracle.cone().spec();
    let mut rng = random::substream(seed, 2 * trial as u64);
    let g = random::unit_element(spec, &mut rng);
    let h = random::unit_element(spec, &mut rng);
    let moved = slab.oracle.affine().project(&(x_star + &g.scaled(slab.eps))).0;
    let full = &moved + &h.scaled(slab.eps);
    let at = |t: f64| x_star + &(&full - x_star).scaled(t);
    let x = if slab.holds(&full) {
        full.clone()
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if slab.holds(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(lo)
    };
    let d = slab.oracle.dist_to_feasible(&x);
    slab.sample(x, Stream::Random, trial, d)
}

/// Best of several local maximisers of `dist_feasible` over the slab,
/// each found by projected ascent along `x − P(x)` with an adaptive step.
fn adversarial_probe(
    slab: &Slab<'_>,
    x_star: &Element,
    seed: u64,
    trial: usize,
    steps: usize,
) -> ProbeSample {
    let mut rng = random::substream(seed, 2 * trial as u64 + 1);
    let mut best: Option<(Element, f64)> = None;
    for _ in 0..ADVERSARIAL_STARTS {
        let (x, d) = ascend(slab, x_star, &mut rng, steps);
        if best.as_ref().is_none_or(|b| d > b.1) {
            best = Some((x, d));
        }
    }
    let (x, d) = best.expect("at least one start");
    slab.sample(x, Stream::Adversarial, trial, d)
}

fn ascend(
    slab: &Slab<'_>,
    x_star: &Element,
    rng: &mut random::TestRng,
    steps: usize,
) -> (Element, f64) {
    let spec = slab.oracle.cone().spec();
    let start = x_star + &random::unit_element(spec, rng).scaled(slab.eps);
    let mut x = slab.pull(&start).unwrap_or_else(|| x_star.clone());
    let mut proj = slab.oracle.project(&x);
    let mut alpha = slab.eps;
    for _ in 0..steps {
        let dir = if proj.dist > 0.0 {
            slab.tangent(&x, (&x - &proj.point).scaled(1.0 / proj.dist))
        } else {
            random::unit_element(spec, rng)
        };
        let accepted = slab.pull(&(&x + &dir.scaled(alpha))).and_then(|cand| {
            let p = slab.oracle.project(&cand);
            (p.dist > proj.dist).then_some((cand, p))
        });
        match accepted {
            Some((cand, p)) => {
                x = cand;
                proj = p;
                alpha *= 1.5;
            }
            None => {
                alpha *= 0.5;
                if alpha < 1e-6 * slab.eps {
                    break;
                }
            }
        }
    }
    (x, proj.dist)
}

/// The norm cap used when `ProbeOptions::rho` is unset.
pub fn default_rho(x_star: &Element) -> f64 {
    2.0 * x_star.norm().max(1.0)
}

/// Random and adversarial ε-feasible samples for every ε of the grid.
///
/// Random directions depend on the trial index and not on ε, so that on
/// conic (scale-free) geometry the samples at different ε are rescalings
/// of each other.
pub fn make_probe_samples(
    oracle: &FeasibilityOracle,
    opts: &ProbeOptions,
) -> Result<Vec<ProbeSample>> {
    let x_star = oracle.feasible_point();
    let rho = opts.rho.unwrap_or_else(|| default_rho(&x_star));
    let mut jobs = Vec::new();
    for &eps in &opts.eps_grid {
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("ε = {eps} is negative")));
        }
        for t in 0..opts.random_trials {
            jobs.push((eps, Stream::Random, t));
        }
        for t in 0..opts.adversarial_trials {
            jobs.push((eps, Stream::Adversarial, t));
        }
    }
    let samples = jobs
        .into_par_iter()
        .map(|(eps, stream, trial)| {
            let slab = Slab { oracle, eps, rho };
            if eps == 0.0 {
                return slab.sample(x_star.clone(), stream, trial, 0.0);
            }
            match stream {
                Stream::Random => random_probe(&slab, &x_star, opts.seed, trial),
                Stream::Adversarial => {
                    adversarial_probe(&slab, &x_star, opts.seed, trial, opts.ascent_steps)
                }
            }
        })
        .collect();
    Ok(samples)
}

/// Least-squares fit of `log(max dist) = slope · log(ε) + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub count: usize,
    /// Set when every distance vanished and the slope is reported as 1.
    pub exact: bool,
}

/// Fit the Hölder exponent from `(ε, max dist)` pairs.
pub fn estimate_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 ε values, got {}",
            points.len()
        )));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
    if !(lo > 0.0) || (hi / lo).log10() < 3.0 - 1e-9 {
        return Err(Error::InvalidParameter(
            "ε values must be positive and span at least 3 decades".into(),
        ));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, d)| d > 1e-12)
        .map(|&(e, d)| (e.ln(), d.ln()))
        .collect();
    if usable.len() < 2 {
        return Ok(ExponentFit {
            slope: 1.0,
            intercept: 0.0,
            residual: 0.0,
            count: points.len(),
            exact: true,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (usable
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        residual,
        count: usable.len(),
        exact: false,
    })
}

/// `(ε, max dist_feasible)` per ε, optionally restricted to one stream,
/// in the order of first appearance.
pub fn max_dist_by_eps(samples: &[ProbeSample], stream: Option<Stream>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in samples.iter().filter(|s| stream.is_none_or(|st| s.stream == st)) {
        match out.iter_mut().find(|(e, _)| *e == s.eps) {
            Some(entry) => entry.1 = entry.1.max(s.dist_feasible),
            None => out.push((s.eps, s.dist_feasible)),
        }
    }
    out
}

/// One row of the verification table.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub eps: f64,
    pub stream: Stream,
    pub count: usize,
    pub max_dist: f64,
    pub mean_dist: f64,
    /// Largest fitted bound value over the group.
    pub bound: f64,
    /// `min(bound − dist)` over the group.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    /// Max of `dist / ((‖x‖+1) φ(ε, ‖x‖))` over the calibration half.
    pub kappa_star: f64,
    /// The same constant fitted without the smallest ε.
    pub kappa_coarse: f64,
    /// `kappa_star ≤ 2 · kappa_coarse`.
    pub stable: bool,
    pub violations: usize,
    pub calibration: usize,
    pub held_out: usize,
    pub rows: Vec<BoundRow>,
}

/// Calibrate `κ*` on half the samples and count held-out samples above
/// `1.1 κ* (‖x‖+1) φ(ε, ‖x‖)`.
///
/// Samples are split alternately within each `(ε, stream)` group.
pub fn bound_check(
    cert: &ErrorBoundCertificate,
    samples: &[ProbeSample],
    rho: f64,
) -> Result<BoundReport> {
    for s in samples {
        if s.eps > 1.0 || s.norm_x > rho * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "sample outside ε ≤ 1, ‖x‖ ≤ ρ (ε = {}, ‖x‖ = {})",
                s.eps, s.norm_x
            )));
        }
    }
    let mut groups: Vec<((u64, Stream), Vec<&ProbeSample>)> = Vec::new();
    for s in samples {
        let key = (s.eps.to_bits(), s.stream);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(s),
            None => groups.push((key, vec![s])),
        }
    }
    let ratio = |s: &ProbeSample| {
        let shape = cert.shape_value(s.eps, s.norm_x);
        if shape > 0.0 {
            s.dist_feasible / shape
        } else if s.dist_feasible > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let smallest = samples.iter().map(|s| s.eps).fold(f64::INFINITY, f64::min);
    let mut calibration = Vec::new();
    let mut held_out = Vec::new();
    for (_, g) in &groups {
        for (i, s) in g.iter().enumerate() {
            if i % 2 == 0 {
                calibration.push(*s);
            } else {
                held_out.push(*s);
            }
        }
    }
    if calibration.is_empty() {
        return Err(Error::InvalidParameter("empty calibration set".into()));
    }
    let kappa_star = calibration.iter().map(|s| ratio(s)).fold(0.0, f64::max);
    let kappa_coarse = calibration
        .iter()
        .filter(|s| s.eps > smallest)
        .map(|s| ratio(s))
        .fold(0.0, f64::max);
    let limit = |s: &ProbeSample| 1.1 * kappa_star * cert.shape_value(s.eps, s.norm_x);
    let violations = held_out.iter().filter(|s| s.dist_feasible > limit(s)).count();

    let rows = groups
        .iter()
        .map(|((_, stream), g)| {
            let count = g.len();
            let max_dist = g.iter().map(|s| s.dist_feasible).fold(0.0, f64::max);
            let mean_dist = g.iter().map(|s| s.dist_feasible).sum::<f64>() / count as f64;
            let bound = g
                .iter()
                .map(|s| kappa_star * cert.shape_value(s.eps, s.norm_x))
                .fold(0.0, f64::max);
            let margin = g
                .iter()
                .map(|s| kappa_star * cert.shape_value(s.eps, s.norm_x) - s.dist_feasible)
                .fold(f64::INFINITY, f64::min);
            BoundRow {
                eps: g[0].eps,
                stream: *stream,
                count,
                max_dist,
                mean_dist,
                bound,
                margin,
            }
        })
        .collect();
    Ok(BoundReport {
        kappa_star,
        kappa_coarse,
        stable: kappa_star <= 2.0 * kappa_coarse || kappa_star == 0.0,
        violations,
        calibration: calibration.len(),
        held_out: held_out.len(),
        rows,
    })
}

/// Facial reduction, feasibility probe and certificate for one problem.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub chain: ReductionChain,
    pub certificate: Option<ErrorBoundCertificate>,
    /// Face handed to the oracle; contains every feasible point.
    pub oracle_face: FaceDescriptor,
    pub oracle: FeasibilityOracle,
}

/// Reduce in `mode`, build the oracle on a face that contains the feasible
/// set (the generator's hint, else the end of a Slater-mode chain) and
/// attach a unit-constant certificate when the chain regularised.
pub fn analyze(problem: &Problem, mode: Mode, budget: &SearchBudget) -> Result<Analysis> {
    let chain = run_facial_reduction(&problem.cone, &problem.affine, mode, budget)?;
    let oracle_face = match &problem.face_hint {
        Some(f) => f.clone(),
        None if mode == Mode::Slater => chain.final_face().clone(),
        None => run_facial_reduction(&problem.cone, &problem.affine, Mode::Slater, budget)?
            .final_face()
            .clone(),
    };
    let oracle = FeasibilityOracle::new(
        problem.cone.clone(),
        problem.affine.clone(),
        Some(oracle_face.clone()),
        OracleOptions::default(),
    )?;
    let certificate = match make_certificate(&problem.cone, &chain, &vec![1.0; chain.steps()]) {
        Ok(c) => Some(c),
        Err(Error::CertificateUnavailable) => None,
        Err(e) => return Err(e),
    };
    Ok(Analysis {
        chain,
        certificate,
        oracle_face,
        oracle,
    })
}

/// Everything `verify` reports.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub certificate: ErrorBoundCertificate,
    pub samples: Vec<ProbeSample>,
    pub rho: f64,
    pub fit_all: ExponentFit,
    pub fit_adversarial: Option<ExponentFit>,
    pub bound: BoundReport,
}

/// Sample, fit and check a certificate.
pub fn verify(analysis: &Analysis, opts: &ProbeOptions) -> Result<VerifyReport> {
    let mut certificate = analysis
        .certificate
        .clone()
        .ok_or(Error::CertificateUnavailable)?;
    let x_star = analysis.oracle.feasible_point();
    let rho = opts.rho.unwrap_or_else(|| default_rho(&x_star));
    let opts = ProbeOptions {
        rho: Some(rho),
        ..opts.clone()
    };
    let positive: Vec<f64> = opts.eps_grid.iter().copied().filter(|&e| e > 0.0).collect();
    estimate_exponent(&positive.iter().map(|&e| (e, 1.0)).collect::<Vec<_>>())?;
    let samples = make_probe_samples(&analysis.oracle, &opts)?;
    let positive_samples: Vec<ProbeSample> =
        samples.iter().filter(|s| s.eps > 0.0).cloned().collect();
    let fit_all = estimate_exponent(&max_dist_by_eps(&positive_samples, None))?;
    let fit_adversarial = if opts.adversarial_trials > 0 {
        Some(estimate_exponent(&max_dist_by_eps(
            &positive_samples,
            Some(Stream::Adversarial),
        ))?)
    } else {
        None
    };
    let bound = bound_check(&certificate, &samples, rho)?;
    certificate.fitted_kappa = Some(bound.kappa_star);
    Ok(VerifyReport {
        certificate,
        samples,
        rho,
        fit_all,
        fit_adversarial,
        bound,
    })
}
