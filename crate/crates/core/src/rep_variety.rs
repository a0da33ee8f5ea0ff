//! Points of `Hom(pi_1 M, U(n))`: relator residual, gradient flow to flat
//! representations, block sum, the nonorientable component obstruction,
//! path connection between flat points and spectral fingerprints.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RepFlowFailure, Result};
use crate::flow::{self, Progress};
use crate::presentation::{evaluate_word, Letter, SurfacePresentation, Word};
use crate::unitary::{
    branch_midpoint, dist_frob, geodesic, haar_random_with, project_unitary, skew_hermitian_part, CMatrix,
    Unitary, C64,
};

pub use crate::flow::{FlowOptions, FlowReport};

/// Residual screen for [`obstruction`].
pub const OBSTRUCTION_RESIDUAL_TOL: f64 = 1e-6;
/// Determinant products farther than this from +-1 are refused.
pub const OBSTRUCTION_ROUNDING_TOL: f64 = 1e-4;

/// A homomorphism candidate: one unitary per generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RepresentationJson", into = "RepresentationJson")]
pub struct Representation {
    presentation: SurfacePresentation,
    n: usize,
    images: Vec<Unitary>,
}

#[derive(Serialize, Deserialize)]
struct RepresentationJson {
    presentation: SurfacePresentation,
    n: usize,
    images: Vec<Unitary>,
}

impl From<Representation> for RepresentationJson {
    fn from(r: Representation) -> Self {
        Self {
            presentation: r.presentation,
            n: r.n,
            images: r.images,
        }
    }
}

impl TryFrom<RepresentationJson> for Representation {
    type Error = Error;

    fn try_from(j: RepresentationJson) -> Result<Self> {
        let rep = Representation::new(j.presentation, j.images)?;
        if rep.n != j.n {
            return Err(Error::DimensionMismatch {
                expected: j.n,
                found: rep.n,
            });
        }
        Ok(rep)
    }
}

impl Representation {
    pub fn new(presentation: SurfacePresentation, images: Vec<Unitary>) -> Result<Self> {
        let m = presentation.generator_count();
        if images.len() != m {
            return Err(Error::Precondition(format!(
                "expected {m} generator images, got {}",
                images.len()
            )));
        }
        let n = images[0].dim();
        if let Some(bad) = images.iter().find(|u| u.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self {
            presentation,
            n,
            images,
        })
    }

    /// Every generator sent to the identity of U(n).
    pub fn trivial(presentation: SurfacePresentation, n: usize) -> Self {
        let images = vec![Unitary::identity(n); presentation.generator_count()];
        Self {
            presentation,
            n,
            images,
        }
    }

    /// Independent Haar-random generator images (not flat in general).
    pub fn haar(presentation: SurfacePresentation, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = (0..presentation.generator_count())
            .map(|_| haar_random_with(n, &mut rng))
            .collect();
        Self {
            presentation,
            n,
            images,
        }
    }

    pub fn presentation(&self) -> &SurfacePresentation {
        &self.presentation
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn images(&self) -> &[Unitary] {
        &self.images
    }

    pub fn into_images(self) -> Vec<Unitary> {
        self.images
    }

    pub(crate) fn with_images(&self, images: Vec<Unitary>) -> Self {
        Self {
            presentation: self.presentation.clone(),
            n: self.n,
            images,
        }
    }

    pub fn evaluate(&self, w: &Word) -> Result<Unitary> {
        self.presentation.check_word(w)?;
        evaluate_word(w, &self.images)
    }

    /// `||relator(images) - I||_F`; zero exactly on homomorphisms.
    pub fn residual(&self) -> f64 {
        let w = self
            .evaluate(self.presentation.relator())
            .expect("relator is valid for its own presentation");
        let n = self.n;
        (w.into_matrix() - CMatrix::identity(n, n)).norm()
    }

    /// Simultaneous conjugation `g rho g^{-1}`.
    pub fn conjugate(&self, g: &Unitary) -> Result<Self> {
        if g.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: g.dim(),
            });
        }
        Ok(self.with_images(self.images.iter().map(|x| x.conjugate_by(g)).collect()))
    }

    /// Largest per-generator Frobenius distance to `other`.
    pub fn distance(&self, other: &Representation) -> Result<f64> {
        check_compatible(self, other)?;
        let mut d: f64 = 0.0;
        for (a, b) in self.images.iter().zip(&other.images) {
            d = d.max(dist_frob(a, b)?);
        }
        Ok(d)
    }

    pub fn max_entry_diff(&self, other: &Representation) -> f64 {
        self.images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| a.max_entry_diff(b))
            .fold(0.0, f64::max)
    }
}

fn check_compatible(a: &Representation, b: &Representation) -> Result<()> {
    if a.presentation != b.presentation {
        return Err(Error::PresentationMismatch);
    }
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    Ok(())
}

pub fn residual(rho: &Representation) -> f64 {
    rho.residual()
}

/// Riemannian gradient of `residual^2` at `rho`: the skew-Hermitian
/// projection of the Euclidean word gradient, left-translated to each image.
pub fn riemannian_gradient(rho: &Representation) -> Vec<CMatrix> {
    flow::riemannian_gradient(std::slice::from_ref(rho.presentation.relator()), &rho.images)
        .expect("representation images match its presentation")
}

/// Flows `rho0` to a flat representation with the default optimizer settings
/// at tolerance `tol`.
pub fn flow_to_flat(
    rho0: &Representation,
    tol: f64,
    max_iter: usize,
) -> Result<(Representation, FlowReport)> {
    flow_to_flat_with(rho0, &FlowOptions::new(tol, max_iter), None)
}

pub fn flow_to_flat_with(
    rho0: &Representation,
    opts: &FlowOptions,
    progress: Progress<'_>,
) -> Result<(Representation, FlowReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tol must be positive, got {}", opts.tol)));
    }
    let words = [rho0.presentation.relator().clone()];
    let frozen = vec![false; rho0.images.len()];
    let run = flow::minimize(&words, rho0.images.clone(), &frozen, opts, progress)?;
    let out = rho0.with_images(run.images);
    if run.converged {
        Ok((out, run.report))
    } else {
        Err(Error::RepNotConverged(Box::new(RepFlowFailure {
            best: out,
            report: run.report,
        })))
    }
}

/// Generator-wise block-diagonal sum.
pub fn block_sum(rho: &Representation, psi: &Representation) -> Result<Representation> {
    if rho.presentation != psi.presentation {
        return Err(Error::PresentationMismatch);
    }
    let images = rho
        .images
        .iter()
        .zip(&psi.images)
        .map(|(a, b)| a.block_sum(b))
        .collect();
    Ok(Representation {
        presentation: rho.presentation.clone(),
        n: rho.n + psi.n,
        images,
    })
}

/// Sign of `prod_i det rho(x_i)` for a flat representation of a
/// nonorientable surface group. The relator forces the square of the
/// product to be 1, so the sign labels the connected component.
pub fn obstruction(rho: &Representation) -> Result<i8> {
    if rho.presentation.is_orientable() {
        return Err(Error::Precondition(
            "the component obstruction is defined for nonorientable surfaces".into(),
        ));
    }
    if rho.n == 0 {
        return Ok(1);
    }
    let res = rho.residual();
    if res > OBSTRUCTION_RESIDUAL_TOL {
        return Err(Error::Precondition(format!(
            "residual {res:e} exceeds {OBSTRUCTION_RESIDUAL_TOL:e}"
        )));
    }
    let prod = rho
        .images
        .iter()
        .fold(C64::new(1.0, 0.0), |acc, u| acc * u.determinant());
    let (d_plus, d_minus) = ((prod - 1.0).norm(), (prod + 1.0).norm());
    if d_plus.min(d_minus) > OBSTRUCTION_ROUNDING_TOL {
        return Err(Error::Precondition(format!(
            "determinant product {prod} is not within {OBSTRUCTION_ROUNDING_TOL:e} of +-1"
        )));
    }
    Ok(if d_plus <= d_minus { 1 } else { -1 })
}

/// Haar-random start flowed to residual `<= tol`.
pub fn sample_flat(
    presentation: &SurfacePresentation,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<Representation> {
    sample_flat_with(presentation, n, seed, &FlowOptions::new(tol, FlowOptions::default().max_iter))
}

pub fn sample_flat_with(
    presentation: &SurfacePresentation,
    n: usize,
    seed: u64,
    opts: &FlowOptions,
) -> Result<Representation> {
    if n == 0 {
        return Err(Error::Precondition("sample_flat needs n >= 1".into()));
    }
    let start = Representation::haar(presentation.clone(), n, seed);
    flow_to_flat_with(&start, opts, None).map(|(rho, _)| rho)
}

/// Eigenvalues of each probe word's image, sorted by principal argument and
/// then by real part. Invariant under simultaneous conjugation.
pub fn fingerprint(rho: &Representation, probe_words: &[Word]) -> Result<Vec<Vec<C64>>> {
    probe_words
        .iter()
        .map(|w| {
            let u = rho.evaluate(w)?;
            let mut eig = crate::unitary::normal_eigenvalues(u.matrix());
            eig.sort_by(|a, b| {
                a.arg()
                    .partial_cmp(&b.arg())
                    .unwrap_or(Ordering::Equal)
                    .then(a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal))
            });
            Ok(eig)
        })
        .collect()
}

/// Generator probes plus the pairwise products of generators.
pub fn default_probe_words(presentation: &SurfacePresentation) -> Vec<Word> {
    let m = presentation.generator_count();
    let mut probes: Vec<Word> = (0..m).map(Word::generator).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            probes.push(Word::from_pairs(&[(i, 1), (j, 1)]));
        }
    }
    probes
}

/// Largest entrywise gap between two fingerprints of equal shape.
pub fn fingerprint_distance(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut d: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        for (p, q) in x.iter().zip(y) {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// A discrete path of representations between two flat endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepPath {
    pub waypoints: Vec<Representation>,
    /// Residual of every waypoint.
    pub residuals: Vec<f64>,
    /// Largest per-generator Frobenius distance of each consecutive pair.
    pub steps: Vec<f64>,
    pub max_residual: f64,
    pub max_step: f64,
}

impl RepPath {
    fn from_waypoints(waypoints: Vec<Representation>) -> Self {
        let residuals: Vec<f64> = waypoints.iter().map(Representation::residual).collect();
        let steps: Vec<f64> = waypoints
            .windows(2)
            .map(|w| w[0].distance(&w[1]).expect("waypoints share presentation and rank"))
            .collect();
        Self {
            max_residual: residuals.iter().cloned().fold(0.0, f64::max),
            max_step: steps.iter().cloned().fold(0.0, f64::max),
            waypoints,
            residuals,
            steps,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectOptions {
    pub flow: FlowOptions,
    /// Segments longer than this (per generator, Frobenius) are refined.
    pub step_limit: f64,
    /// Number of midpoint insertions allowed during refinement.
    pub max_insertions: usize,
    /// How many times a branch-cut segment may be split through an anchor,
    /// each split doubling the waypoint count.
    pub max_doublings: usize,
}

impl ConnectOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            flow: FlowOptions::new(tol, FlowOptions::default().max_iter),
            step_limit: 0.5,
            max_insertions: 512,
            max_doublings: 4,
        }
    }
}

/// Connects two flat representations by geodesically seeded waypoints, each
/// flowed back toward flatness with the endpoints pinned.
///
/// The returned path reports its worst residual; reaching `tol` is not
/// asserted. Refinement splits the segment with the largest endpoint
/// residual (lowest index on ties) among those longer than the step limit.
pub fn connect_flat(
    rho0: &Representation,
    rho1: &Representation,
    waypoints: usize,
    tol: f64,
) -> Result<RepPath> {
    connect_flat_with(rho0, rho1, waypoints, &ConnectOptions::new(tol))
}

pub fn connect_flat_with(
    rho0: &Representation,
    rho1: &Representation,
    waypoints: usize,
    opts: &ConnectOptions,
) -> Result<RepPath> {
    check_compatible(rho0, rho1)?;
    let tol = opts.flow.tol;
    for (name, r) in [("start", rho0), ("end", rho1)] {
        let res = r.residual();
        if res > tol {
            return Err(Error::Precondition(format!(
                "{name} representation has residual {res:e} > tol {tol:e}"
            )));
        }
    }
    if rho0 == rho1 {
        return Ok(RepPath::from_waypoints(vec![rho0.clone()]));
    }
    // Flat representations of a nonorientable surface group fall into two
    // components labelled by the obstruction; paths must stay in one.
    let class = match (obstruction(rho0), obstruction(rho1)) {
        (Ok(s0), Ok(s1)) if s0 != s1 => {
            return Err(Error::Precondition(format!(
                "endpoints lie in different components (obstruction {s0} and {s1})"
            )))
        }
        (Ok(s0), Ok(_)) => Some(s0),
        _ => None,
    };
    match refine_between(rho0, rho1, waypoints.max(2), opts, class, 0) {
        // A direct route that meanders past the insertion budget may still
        // have a short detour.
        Err(Error::RefinementExhausted(direct)) => match via_detour(rho0, rho1, opts, class, 0) {
            Some(points) => {
                let mut all = Vec::with_capacity(points.len() + 2);
                all.push(rho0.clone());
                all.extend(points);
                all.push(rho1.clone());
                Ok(RepPath::from_waypoints(all))
            }
            None => Err(Error::RefinementExhausted(direct)),
        },
        other => other,
    }
}

/// Seeds, flows and refines a path from `rho0` to `rho1`.
fn refine_between(
    rho0: &Representation,
    rho1: &Representation,
    count: usize,
    opts: &ConnectOptions,
    class: Option<i8>,
    depth: usize,
) -> Result<RepPath> {
    let mut path = match seed_path(rho0, rho1, count, opts, class, 0) {
        Ok(p) => p,
        Err(SeedFailure) => {
            return Err(Error::RefinementExhausted(Box::new(RepPath::from_waypoints(vec![
                rho0.clone(),
                rho1.clone(),
            ]))))
        }
    };
    // Interior waypoints are flowed independently; order is preserved.
    let last = path.len() - 1;
    let flowed: Vec<Representation> = path[1..last]
        .par_iter()
        .map(|w| flow_best(w, &opts.flow, class))
        .collect();
    path.splice(1..last, flowed);

    let mut insertions = 0;
    loop {
        let current = RepPath::from_waypoints(path);
        let worst = current
            .steps
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > opts.step_limit)
            .map(|(k, _)| (k, current.residuals[k].max(current.residuals[k + 1])))
            .fold(None::<(usize, f64)>, |best, (k, r)| match best {
                Some((_, br)) if br >= r => best,
                _ => Some((k, r)),
            });
        let Some((k, _)) = worst else {
            return Ok(current);
        };
        if insertions >= opts.max_insertions {
            return Err(Error::RefinementExhausted(Box::new(current)));
        }
        let (a, b) = (&current.waypoints[k], &current.waypoints[k + 1]);
        let mid_images = a
            .images
            .iter()
            .zip(&b.images)
            .map(|(x, y)| branch_midpoint(x, y))
            .collect::<Result<Vec<_>>>()?;
        let mid = flow_best(&a.with_images(mid_images), &opts.flow, class);
        let span = current.steps[k];
        let collapsed = gap(a, &mid).min(gap(&mid, b)) < STUCK_FRACTION * span;
        let inserted = if collapsed {
            // The midpoint fell back onto an endpoint: bisection cannot make
            // progress here, so walk across in short re-flowed steps instead.
            let detour = || {
                (depth < VIA_DEPTH)
                    .then(|| via_detour(a, b, opts, class, depth))
                    .flatten()
            };
            match walk(a, b, opts, class)
                .or_else(|| band(a, b, opts, class))
                .or_else(detour)
            {
                Some(points) => points,
                None => return Err(Error::RefinementExhausted(Box::new(current))),
            }
        } else {
            vec![mid]
        };
        insertions += inserted.len();
        path = current.waypoints;
        path.splice(k + 1..k + 1, inserted);
    }
}

const VIA_DEPTH: usize = 1;
const VIA_ATTEMPTS: u64 = 8;
const VIA_SEED: u64 = 0x7669_6100;

/// Routes `a -> c -> b` through flat points `c` of the same class. Walls
/// between sheets of the flat set can lie far from the straight segment,
/// and a generic third point often sees each endpoint across a gentler one.
fn via_detour(
    a: &Representation,
    b: &Representation,
    opts: &ConnectOptions,
    class: Option<i8>,
    depth: usize,
) -> Option<Vec<Representation>> {
    let tol = opts.flow.tol;
    (0..VIA_ATTEMPTS).find_map(|attempt| {
        let seed = Representation::haar(a.presentation.clone(), a.n, VIA_SEED + attempt);
        let c = flow_best(&seed, &opts.flow, class);
        if c.residual() > tol {
            return None;
        }
        let first = refine_between(a, &c, 2, opts, class, depth + 1).ok()?;
        let second = refine_between(&c, b, 2, opts, class, depth + 1).ok()?;
        let mut points = first.waypoints;
        points.remove(0);
        let mut rest = second.waypoints;
        rest.pop();
        points.extend(rest.into_iter().skip(1));
        Some(points)
    })
}

fn gap(p: &Representation, q: &Representation) -> f64 {
    p.distance(q).unwrap_or(f64::INFINITY)
}

const STUCK_FRACTION: f64 = 1e-3;
const WALK_MAX_STEPS: usize = 400;
const WALK_HALVINGS: usize = 8;

/// Flat points leading from `a` toward `b`, each within the step limit of the
/// previous one and strictly closer to `b`. `None` when the walk stalls.
fn walk(
    a: &Representation,
    b: &Representation,
    opts: &ConnectOptions,
    class: Option<i8>,
) -> Option<Vec<Representation>> {
    let mut points = Vec::new();
    let mut x = a.clone();
    for _ in 0..WALK_MAX_STEPS {
        let d = gap(&x, b);
        if d <= opts.step_limit {
            return Some(points);
        }
        let mut s = (0.5 * opts.step_limit / d).min(1.0);
        let mut next = None;
        for _ in 0..WALK_HALVINGS {
            let seed: Option<Vec<Unitary>> = x
                .images
                .iter()
                .zip(&b.images)
                .map(|(u, v)| geodesic(u, v, s).ok())
                .collect();
            if let Some(seed) = seed {
                let y = flow_best(&x.with_images(seed), &opts.flow, class);
                if y.residual() <= opts.flow.tol.max(1e-6)
                    && gap(&x, &y) <= opts.step_limit
                    && gap(&y, b) < d * (1.0 - 0.1 * s)
                {
                    next = Some(y);
                    break;
                }
            }
            s *= 0.5;
        }
        let y = next?;
        points.push(y.clone());
        x = y;
    }
    None
}

const BAND_LEVELS: u32 = 4;
const BAND_WEIGHTS: [f64; 6] = [1.0, 4.0, 16.0, 64.0, 256.0, 1024.0];

/// Elastic band between `a` and `b`: interior waypoints minimize the
/// discrete path energy `sum ||w_{k+1} - w_k||^2` plus a growing multiple of
/// their relator energies, which drags the whole chain onto the flat set and
/// lets it pass through degenerate points that single-point flows never
/// land on. Waypoints are flowed individually at the end.
fn band(
    a: &Representation,
    b: &Representation,
    opts: &ConnectOptions,
    class: Option<i8>,
) -> Option<Vec<Representation>> {
    let g = a.images.len();
    // Dyadic midpoints, endpoints included.
    let mut chain = vec![a.images.clone(), b.images.clone()];
    for _ in 0..BAND_LEVELS {
        let mut next = Vec::with_capacity(2 * chain.len() - 1);
        for pair in chain.windows(2) {
            next.push(pair[0].clone());
            let mid: Vec<Unitary> = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(x, y)| branch_midpoint(x, y))
                .collect::<Result<_>>()
                .ok()?;
            next.push(mid);
        }
        next.push(chain.last()?.clone());
        chain = next;
    }
    let points = chain.len();
    let shift = |w: &Word, k: usize| {
        Word::from_letters(
            w.letters()
                .iter()
                .map(|l| Letter { generator: k * g + l.generator, ..*l })
                .collect(),
        )
    };
    let relator = a.presentation.relator();
    let mut words = Vec::new();
    let mut kinds = Vec::new();
    for k in 1..points - 1 {
        words.push(shift(relator, k));
        kinds.push(true);
    }
    for k in 0..points - 1 {
        for i in 0..g {
            words.push(Word::from_pairs(&[(k * g + i, -1), ((k + 1) * g + i, 1)]));
            kinds.push(false);
        }
    }
    let mut frozen = vec![false; points * g];
    frozen[..g].fill(true);
    frozen[(points - 1) * g..].fill(true);
    let mut images: Vec<Unitary> = chain.into_iter().flatten().collect();
    let band_opts = FlowOptions::new(0.0, 2_000);
    for weight in BAND_WEIGHTS {
        let weights: Vec<f64> = kinds.iter().map(|&rel| if rel { weight } else { 1.0 }).collect();
        images = flow::minimize_weighted(&words, Some(&weights), images, &frozen, &band_opts, None)
            .ok()?
            .images;
    }
    let interior: Vec<Representation> = images[g..(points - 1) * g]
        .par_chunks(g)
        .map(|chunk| flow_best(&a.with_images(chunk.to_vec()), &opts.flow, class))
        .collect();
    let mut previous = a;
    for p in interior.iter().chain(std::iter::once(b)) {
        if p.residual() > opts.flow.tol.max(1e-6) || gap(previous, p) > 0.5 * gap(a, b) {
            return None;
        }
        previous = p;
    }
    Some(interior)
}

struct SeedFailure;

/// `count` geodesically interpolated waypoints (endpoints included). A
/// branch cut on any generator routes the segment through an anchor at the
/// branch-chosen midpoint, doubling the waypoint count.
fn seed_path(
    a: &Representation,
    b: &Representation,
    count: usize,
    opts: &ConnectOptions,
    class: Option<i8>,
    depth: usize,
) -> std::result::Result<Vec<Representation>, SeedFailure> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let t = k as f64 / (count - 1) as f64;
        let imgs: Result<Vec<Unitary>> = a
            .images
            .iter()
            .zip(&b.images)
            .map(|(x, y)| geodesic(x, y, t))
            .collect();
        match imgs {
            Ok(imgs) => out.push(a.with_images(imgs)),
            Err(Error::BranchCut { .. }) => {
                if depth >= opts.max_doublings {
                    return Err(SeedFailure);
                }
                let anchor_images: Vec<Unitary> = a
                    .images
                    .iter()
                    .zip(&b.images)
                    .map(|(x, y)| branch_midpoint(x, y).map_err(|_| SeedFailure))
                    .collect::<std::result::Result<_, _>>()?;
                let anchor = flow_best(&a.with_images(anchor_images), &opts.flow, class);
                let mut left = seed_path(a, &anchor, count, opts, class, depth + 1)?;
                let right = seed_path(&anchor, b, count, opts, class, depth + 1)?;
                left.pop();
                left.extend(right);
                return Ok(left);
            }
            Err(_) => return Err(SeedFailure),
        }
    }
    // Endpoints exactly, free of geodesic rounding.
    out[0] = a.clone();
    out[count - 1] = b.clone();
    Ok(out)
}

/// Flow result, or the best iterate when the flow stalls. Stationary
/// non-flat points (e.g. a relator evaluating to `-I`) are left by a few
/// small, deterministically seeded perturbations. With a component `class`
/// the start is phase-aligned to it and results outside it are rejected.
fn flow_best(rho: &Representation, opts: &FlowOptions, class: Option<i8>) -> Representation {
    let run = |start: &Representation| {
        let start = match class {
            Some(sign) => align_determinant(start, sign),
            None => start.clone(),
        };
        let out = match flow_to_flat_with(&start, opts, None) {
            Ok((r, _)) => r,
            Err(Error::RepNotConverged(f)) => f.best,
            Err(_) => start,
        };
        let score = match (class, obstruction(&out)) {
            (Some(sign), Ok(s)) if s != sign => f64::INFINITY,
            _ => out.residual(),
        };
        (out, score)
    };
    let (mut best, mut best_score) = run(rho);
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURB_SEED);
    for _ in 0..PERTURB_ATTEMPTS {
        if best_score <= opts.tol {
            break;
        }
        let kicked: Vec<Unitary> = rho
            .images
            .iter()
            .map(|x| {
                let n = x.dim();
                let a = CMatrix::from_fn(n, n, |_, _| {
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let skew = skew_hermitian_part(&a).scale(PERTURB_SCALE);
                project_unitary(&(x.matrix() + x.matrix() * skew)).unwrap_or_else(|_| x.clone())
            })
            .collect();
        let (candidate, score) = run(&rho.with_images(kicked));
        if score < best_score {
            best = candidate;
            best_score = score;
        }
    }
    best
}

/// Rescales the first image by a phase so that the product of the
/// determinants equals `sign`.
fn align_determinant(rho: &Representation, sign: i8) -> Representation {
    if rho.n == 0 || rho.images.is_empty() {
        return rho.clone();
    }
    let d = rho.images.iter().fold(C64::new(1.0, 0.0), |acc, u| acc * u.determinant());
    let phase = (C64::new(sign as f64, 0.0) / d).arg() / rho.n as f64;
    let mut images = rho.images.clone();
    images[0] = Unitary::from_matrix_unchecked(images[0].matrix() * C64::from_polar(1.0, phase));
    rho.with_images(images)
}

const PERTURB_SEED: u64 = 0x6b69636b;
const PERTURB_ATTEMPTS: usize = 4;
const PERTURB_SCALE: f64 = 1e-3;
