//! Dense complex unitary matrices: Haar sampling, polar projection,
//! geodesics through the principal logarithm and tangent-space projection.
//!
//! Dimension zero is allowed everywhere and denotes the empty matrix, the
//! unit for block sum.

use nalgebra::{Complex, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Frobenius bound on `U U^H - I` accepted for a stored unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Looser screen used on inputs arriving from outside (JSON, Python).
pub const SCREEN_TOL: f64 = 1e-8;
/// Eigenvalues of `U^H V` closer than this to -1 are refused by [`geodesic`].
pub const BRANCH_TOL: f64 = 1e-8;
/// Polar projection refuses matrices with a smaller singular value.
pub const SINGULAR_TOL: f64 = 1e-12;

const SCHUR_MAX_ITER: usize = 10_000;

/// An element of U(n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct Unitary {
    m: CMatrix,
}

impl Unitary {
    /// Wraps `m` after checking the unitarity invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, UNITARY_TOL)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let defect = unitarity_defect(&m);
        if defect > tol {
            return Err(Error::NotUnitary { defect });
        }
        let det = if m.nrows() == 0 { 1.0 } else { m.determinant().norm() };
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnitary {
                defect: (det - 1.0).abs(),
            });
        }
        Ok(Self { m })
    }

    /// Caller guarantees unitarity (products and adjoints of unitaries, polar factors).
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMatrix::identity(n, n) }
    }

    /// Diagonal unitary from phases `e^{i theta_k}`.
    pub fn from_phases(thetas: &[f64]) -> Self {
        let d: Vec<C64> = thetas.iter().map(|&t| C64::from_polar(1.0, t)).collect();
        Self {
            m: CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)),
        }
    }

    /// 1x1 unitary holding the unit-modulus scalar `z`.
    pub fn scalar(z: C64) -> Result<Self> {
        Self::new(CMatrix::from_element(1, 1, z))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// The inverse, which for a unitary is the conjugate transpose.
    pub fn inverse(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn mul(&self, other: &Unitary) -> Self {
        Self { m: &self.m * &other.m }
    }

    /// `g self g^{-1}`
    pub fn conjugate_by(&self, g: &Unitary) -> Self {
        Self {
            m: &g.m * &self.m * g.m.adjoint(),
        }
    }

    pub fn determinant(&self) -> C64 {
        if self.dim() == 0 {
            C64::new(1.0, 0.0)
        } else {
            self.m.determinant()
        }
    }

    /// Block-diagonal sum `self (+) other`.
    pub fn block_sum(&self, other: &Unitary) -> Self {
        let (a, b) = (self.dim(), other.dim());
        let mut m = CMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.m);
        m.view_mut((a, a), (b, b)).copy_from(&other.m);
        Self { m }
    }

    /// Largest absolute entrywise difference.
    pub fn max_entry_diff(&self, other: &Unitary) -> f64 {
        max_entry_diff(&self.m, &other.m)
    }
}

/// `||M M^H - I||_F`
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    (m * m.adjoint() - CMatrix::identity(n, n)).norm()
}

pub fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Haar-distributed sample of U(n), reproducible from `seed`.
///
/// A complex Ginibre matrix is orthonormalized by QR and the columns are
/// rotated by the phases of `R`'s diagonal so the law is exactly Haar.
pub fn haar_random(n: usize, seed: u64) -> Unitary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_with(n, &mut rng)
}

pub fn haar_random_with<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Unitary {
    if n == 0 {
        return Unitary::identity(0);
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * scale, im * scale)
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Unitary::from_matrix_unchecked(q)
}

/// Polar factor of `m`: the Frobenius-nearest unitary.
pub fn project_unitary(m: &CMatrix) -> Result<Unitary> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(Unitary::identity(0));
    }
    let svd = m.clone().svd(true, true);
    let sigma_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sigma_min > SINGULAR_TOL) {
        return Err(Error::Singular { sigma_min });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    Ok(Unitary::from_matrix_unchecked(u * v_t))
}

/// Eigen-decomposition `W = Q diag(lambda) Q^H` of a normal matrix.
pub(crate) fn normal_eigen(w: &CMatrix) -> (CMatrix, Vec<C64>) {
    let n = w.nrows();
    if n == 0 {
        return (CMatrix::zeros(0, 0), Vec::new());
    }
    if let Some(schur) = w.clone().try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
        let (q, t) = schur.unpack();
        let lambdas = (0..n).map(|i| t[(i, i)]).collect();
        return (q, lambdas);
    }
    // Commuting Hermitian pencil fallback: H + alpha K with H, K the
    // Hermitian and anti-Hermitian parts of W.
    let alpha = std::f64::consts::FRAC_1_SQRT_2;
    let h = (w + w.adjoint()).scale(0.5);
    let k = (w - w.adjoint()) * C64::new(0.0, -0.5);
    let pencil = h + k.scale(alpha);
    let eig = pencil.symmetric_eigen();
    let q = eig.eigenvectors;
    let lambdas = (0..n)
        .map(|i| {
            let col = q.column(i);
            (col.adjoint() * w * col)[(0, 0)]
        })
        .collect();
    (q, lambdas)
}

/// Eigenvalues of a normal matrix (any order).
pub fn normal_eigenvalues(w: &CMatrix) -> Vec<C64> {
    normal_eigen(w).1
}

/// Principal logarithm data of `U^H V`: eigenbasis and principal angles.
fn relative_log(u: &Unitary, v: &Unitary) -> Result<(CMatrix, Vec<f64>)> {
    check_same_dim(u, v)?;
    let w = u.m.adjoint() * &v.m;
    let (q, lambdas) = normal_eigen(&w);
    let mut thetas = Vec::with_capacity(lambdas.len());
    for lam in lambdas {
        let distance = (lam + C64::new(1.0, 0.0)).norm();
        if distance < BRANCH_TOL {
            return Err(Error::BranchCut { eigenvalue: lam, distance });
        }
        thetas.push(lam.arg());
    }
    Ok((q, thetas))
}

fn exp_along(u: &Unitary, q: &CMatrix, thetas: &[f64], t: f64) -> Unitary {
    let d: Vec<C64> = thetas.iter().map(|&th| C64::from_polar(1.0, t * th)).collect();
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
    let step = q * diag * q.adjoint();
    // Re-polarize to absorb the Schur basis' rounding.
    let m = &u.m * step;
    project_unitary(&m).unwrap_or_else(|_| Unitary::from_matrix_unchecked(m))
}

/// `U exp(t log(U^H V))` with the principal logarithm.
pub fn geodesic(u: &Unitary, v: &Unitary, t: f64) -> Result<Unitary> {
    let (q, thetas) = relative_log(u, v)?;
    if t == 0.0 {
        return Ok(u.clone());
    }
    if t == 1.0 {
        return Ok(v.clone());
    }
    Ok(exp_along(u, &q, &thetas, t))
}

/// Midpoint of a geodesic from `u` to `v` that never fails. Eigenvalues of
/// `U^H V` near -1 get angle `+pi` or `-pi`, chosen greedily to keep the
/// total angle (the phase change of the determinant) nearest zero; a lone
/// such eigenvalue gets `+pi`.
pub fn branch_midpoint(u: &Unitary, v: &Unitary) -> Result<Unitary> {
    check_same_dim(u, v)?;
    let w = u.m.adjoint() * &v.m;
    let (q, lambdas) = normal_eigen(&w);
    let near = |lam: &C64| (lam + C64::new(1.0, 0.0)).norm() < BRANCH_TOL;
    let mut total: f64 = lambdas.iter().filter(|l| !near(l)).map(|l| l.arg()).sum();
    let thetas: Vec<f64> = lambdas
        .iter()
        .map(|lam| {
            if near(lam) {
                let theta = if total <= 0.0 { std::f64::consts::PI } else { -std::f64::consts::PI };
                total += theta;
                theta
            } else {
                lam.arg()
            }
        })
        .collect();
    Ok(exp_along(u, &q, &thetas, 0.5))
}

/// `||U - V||_F`
pub fn dist_frob(u: &Unitary, v: &Unitary) -> Result<f64> {
    check_same_dim(u, v)?;
    Ok((&u.m - &v.m).norm())
}

pub(crate) fn check_same_dim(u: &Unitary, v: &Unitary) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(())
}

/// `(A - A^H) / 2`
pub fn skew_hermitian_part(a: &CMatrix) -> CMatrix {
    (a - a.adjoint()).scale(0.5)
}

/// A tangent vector to U(n) at `base`.
#[derive(Debug, Clone)]
pub struct SkewTangent {
    base: Unitary,
    direction: CMatrix,
}

impl SkewTangent {
    pub fn new(base: Unitary, direction: CMatrix) -> Result<Self> {
        if direction.nrows() != base.dim() || direction.ncols() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: direction.nrows(),
            });
        }
        let omega = base.m.adjoint() * &direction;
        let defect = (&omega + omega.adjoint()).norm();
        if defect > UNITARY_TOL * (1.0 + direction.norm()) {
            return Err(Error::Precondition(format!(
                "direction is not tangent at base (skew defect {defect:e})"
            )));
        }
        Ok(Self { base, direction })
    }

    /// Orthogonal projection of an ambient matrix onto the tangent space at `base`.
    pub fn project(base: &Unitary, ambient: &CMatrix) -> Self {
        let omega = skew_hermitian_part(&(base.m.adjoint() * ambient));
        Self {
            direction: &base.m * omega,
            base: base.clone(),
        }
    }

    pub fn base(&self) -> &Unitary {
        &self.base
    }

    pub fn direction(&self) -> &CMatrix {
        &self.direction
    }

    /// Polar retraction of `base + t * direction`.
    pub fn retract(&self, t: f64) -> Unitary {
        let m = &self.base.m + self.direction.scale(t);
        project_unitary(&m).expect("base + small tangent step is invertible")
    }
}

/// Wire form: `{"dim": n, "entries": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let entries = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Self { dim: m.nrows(), entries }
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        if j.entries.len() != j.dim || j.entries.iter().any(|row| row.len() != j.dim) {
            return Err(Error::DimensionMismatch {
                expected: j.dim,
                found: j.entries.len(),
            });
        }
        Ok(CMatrix::from_fn(j.dim, j.dim, |i, k| {
            let [re, im] = j.entries[i][k];
            C64::new(re, im)
        }))
    }
}

impl From<Unitary> for MatrixJson {
    fn from(u: Unitary) -> Self {
        MatrixJson::from(&u.m)
    }
}

impl TryFrom<MatrixJson> for Unitary {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        Unitary::with_tolerance(CMatrix::try_from(j)?, SCREEN_TOL)
    }
}
