//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use defk_core::presentation::{Letter, Word};
use defk_core::unitary::{haar_random_with, CMatrix, Unitary, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Product of plain matrices, left to right, adjoints for inverse letters.
pub fn ambient_eval(w: &Word, mats: &[CMatrix]) -> CMatrix {
    let n = mats[0].nrows();
    let mut acc = CMatrix::identity(n, n);
    for l in w.letters() {
        let m = &mats[l.generator];
        acc = if l.inverted { acc * m.adjoint() } else { acc * m };
    }
    acc
}

pub fn ambient_energy(w: &Word, mats: &[CMatrix]) -> f64 {
    let n = mats[0].nrows();
    (ambient_eval(w, mats) - CMatrix::identity(n, n)).norm_squared()
}

/// Central differences in every real coordinate: entry `(r, c)` of the
/// result is `dE/dRe + i dE/dIm`.
pub fn fd_euclidean_gradient(w: &Word, mats: &[CMatrix], h: f64) -> Vec<CMatrix> {
    let n = mats[0].nrows();
    let mut out = vec![CMatrix::zeros(n, n); mats.len()];
    for (i, grad) in out.iter_mut().enumerate() {
        for r in 0..n {
            for c in 0..n {
                let mut parts = [0.0; 2];
                for (p, dir) in [C64::new(h, 0.0), C64::new(0.0, h)].into_iter().enumerate() {
                    let mut plus = mats.to_vec();
                    let mut minus = mats.to_vec();
                    plus[i][(r, c)] += dir;
                    minus[i][(r, c)] -= dir;
                    parts[p] = (ambient_energy(w, &plus) - ambient_energy(w, &minus)) / (2.0 * h);
                }
                grad[(r, c)] = C64::new(parts[0], parts[1]);
            }
        }
    }
    out
}

pub fn relative_error(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let scale: f64 = b.iter().map(CMatrix::norm_squared).sum();
    if scale == 0.0 {
        diff.sqrt()
    } else {
        (diff / scale).sqrt()
    }
}

pub fn gaussian_matrix<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_skew<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let a = gaussian_matrix(n, rng);
    (&a - a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn haar_images<R: Rng>(m: usize, n: usize, rng: &mut R) -> Vec<Unitary> {
    (0..m).map(|_| haar_random_with(n, rng)).collect()
}

pub fn random_word<R: Rng>(m: usize, len: usize, rng: &mut R) -> Word {
    Word::from_letters(
        (0..len)
            .map(|_| Letter::new(rng.random_range(0..m), if rng.random_bool(0.5) { 1 } else { -1 }))
            .collect(),
    )
}

/// Directional derivative of the ambient energy along `dirs` by central
/// differences.
pub fn fd_directional(w: &Word, mats: &[CMatrix], dirs: &[CMatrix], h: f64) -> f64 {
    let plus: Vec<CMatrix> = mats.iter().zip(dirs).map(|(x, d)| x + d * C64::new(h, 0.0)).collect();
    let minus: Vec<CMatrix> = mats.iter().zip(dirs).map(|(x, d)| x - d * C64::new(h, 0.0)).collect();
    (ambient_energy(w, &plus) - ambient_energy(w, &minus)) / (2.0 * h)
}

/// `Re tr(A^H B)` summed over the list.
pub fn real_inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.adjoint() * y).trace().re).sum()
}
