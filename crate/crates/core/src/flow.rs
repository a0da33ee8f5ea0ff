//! Riemannian gradient descent on products of unitary groups for energies of
//! the form `sum_w ||w(X) - I||_F^2`, with Armijo backtracking and polar
//! retraction. Shared by the representation flow and the lattice flow.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::presentation::{evaluate_word, word_gradient, Word};
use crate::unitary::{project_unitary, skew_hermitian_part, CMatrix, Unitary};

/// Iteration record of a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// Energy at the start and after every accepted step.
    pub energy_trace: Vec<f64>,
}

impl FlowReport {
    pub fn is_monotone(&self) -> bool {
        self.energy_trace.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Stop once `sqrt(energy) <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

impl FlowOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

/// Backtracking gives up below this step length.
const MIN_STEP: f64 = 1e-30;

pub(crate) struct FlowRun {
    pub images: Vec<Unitary>,
    pub report: FlowReport,
    pub converged: bool,
}

pub(crate) type Progress<'a> = Option<&'a mut dyn FnMut(usize, f64)>;

pub(crate) fn energy(words: &[Word], images: &[Unitary]) -> Result<f64> {
    weighted_energy(words, None, images)
}

fn weighted_energy(words: &[Word], weights: Option<&[f64]>, images: &[Unitary]) -> Result<f64> {
    let mut e = 0.0;
    for (k, w) in words.iter().enumerate() {
        let m = evaluate_word(w, images)?.into_matrix();
        let n = m.nrows();
        e += weights.map_or(1.0, |ws| ws[k]) * (m - CMatrix::identity(n, n)).norm_squared();
    }
    Ok(e)
}

/// Riemannian gradient `X skew(X^H G)` for every unknown.
pub(crate) fn riemannian_gradient(words: &[Word], images: &[Unitary]) -> Result<Vec<CMatrix>> {
    weighted_gradient(words, None, images)
}

fn weighted_gradient(
    words: &[Word],
    weights: Option<&[f64]>,
    images: &[Unitary],
) -> Result<Vec<CMatrix>> {
    let n = images.first().map_or(0, Unitary::dim);
    let mut total = vec![CMatrix::zeros(n, n); images.len()];
    for (k, w) in words.iter().enumerate() {
        let c = weights.map_or(1.0, |ws| ws[k]);
        for (acc, g) in total.iter_mut().zip(word_gradient(w, images)?) {
            *acc += g.scale(c);
        }
    }
    Ok(images
        .iter()
        .zip(total)
        .map(|(x, g)| x.matrix() * skew_hermitian_part(&(x.matrix().adjoint() * g)))
        .collect())
}

fn step(images: &[Unitary], dirs: &[CMatrix], frozen: &[bool], t: f64) -> Option<Vec<Unitary>> {
    images
        .iter()
        .zip(dirs)
        .zip(frozen)
        .map(|((x, d), &fixed)| {
            if fixed {
                Some(x.clone())
            } else {
                project_unitary(&(x.matrix() - d.scale(t))).ok()
            }
        })
        .collect()
}

/// Descends from `images` until `sqrt(energy) <= tol`, the iteration cap,
/// or a stationary non-flat point. Unknowns with `frozen[i]` never move.
pub(crate) fn minimize(
    words: &[Word],
    images: Vec<Unitary>,
    frozen: &[bool],
    opts: &FlowOptions,
    progress: Progress<'_>,
) -> Result<FlowRun> {
    minimize_weighted(words, None, images, frozen, opts, progress)
}

/// [`minimize`] for `sum_w c_w ||w(X) - I||_F^2`.
pub(crate) fn minimize_weighted(
    words: &[Word],
    weights: Option<&[f64]>,
    mut images: Vec<Unitary>,
    frozen: &[bool],
    opts: &FlowOptions,
    mut progress: Progress<'_>,
) -> Result<FlowRun> {
    debug_assert_eq!(frozen.len(), images.len());
    let energy = |w: &[Word], x: &[Unitary]| weighted_energy(w, weights, x);
    let mut e = energy(words, &images)?;
    let mut trace = vec![e];
    let mut iterations = 0;
    let mut converged = e.sqrt() <= opts.tol;
    while !converged && iterations < opts.max_iter {
        let mut dirs = weighted_gradient(words, weights, &images)?;
        for (d, &fixed) in dirs.iter_mut().zip(frozen) {
            if fixed {
                d.fill(num_traits::Zero::zero());
            }
        }
        let gnorm2: f64 = dirs.iter().map(CMatrix::norm_squared).sum();
        if gnorm2 == 0.0 {
            break;
        }
        let mut t = opts.initial_step;
        let mut accepted = None;
        while t >= MIN_STEP {
            if let Some(cand) = step(&images, &dirs, frozen, t) {
                let e_new = energy(words, &cand)?;
                if e_new <= e - opts.armijo_c * t * gnorm2 {
                    accepted = Some((cand, e_new));
                    break;
                }
            }
            t *= opts.shrink;
        }
        let Some((mut cand, mut e_new)) = accepted else {
            break;
        };
        // The first acceptable step often overshoots across a valley and
        // lands near its mirror point; keep shrinking while that still
        // lowers the energy, or the iterates zigzag and stall.
        loop {
            t *= opts.shrink;
            if t < MIN_STEP {
                break;
            }
            match step(&images, &dirs, frozen, t) {
                Some(next) => {
                    let e_next = energy(words, &next)?;
                    if e_next < e_new {
                        cand = next;
                        e_new = e_next;
                    } else {
                        break;
                    }
                }
                None => break,
            }
        }
        images = cand;
        e = e_new;
        trace.push(e);
        iterations += 1;
        if let Some(cb) = progress.as_deref_mut() {
            cb(iterations, e);
        }
        converged = e.sqrt() <= opts.tol;
    }
    Ok(FlowRun {
        images,
        report: FlowReport {
            iterations,
            final_residual: e.sqrt(),
            energy_trace: trace,
        },
        converged,
    })
}
