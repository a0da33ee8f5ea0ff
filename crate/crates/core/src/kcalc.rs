//! Exact finitely generated abelian group arithmetic (Smith normal form,
//! cokernels, exactness of chains) and the K-group tables of surfaces.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::{SurfaceKind, SurfacePresentation};

/// `Z^rank + Z/d_1 + ... + Z/d_s` with `d_1 | d_2 | ... | d_s`, each `d_i >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FgAbelianGroup {
    rank: u32,
    torsion: Vec<u64>,
}

impl FgAbelianGroup {
    pub fn zero() -> Self {
        Self::free(0)
    }

    pub fn free(rank: u32) -> Self {
        Self { rank, torsion: Vec::new() }
    }

    /// `Z^rank` plus cyclic factors `Z/c` in any order; zeros count as `Z`,
    /// ones vanish, and the rest are normalized to invariant factors.
    pub fn new(rank: u32, cyclic: &[u64]) -> Self {
        let extra = cyclic.iter().filter(|&&c| c == 0).count() as u32;
        let orders: Vec<i64> = cyclic.iter().filter(|&&c| c > 1).map(|&c| c as i64).collect();
        let mut torsion = Vec::new();
        if !orders.is_empty() {
            let k = orders.len();
            let mut m = IntMatrix::zeros(k, k);
            for (i, &d) in orders.iter().enumerate() {
                m.set(i, i, BigInt::from(d));
            }
            for d in smith_normal_form(&m).diagonal() {
                let d = d.to_u64().expect("product of u64 orders factors into u64 invariants");
                if d > 1 {
                    torsion.push(d);
                }
            }
        }
        Self {
            rank: rank + extra,
            torsion,
        }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn torsion(&self) -> &[u64] {
        &self.torsion
    }

    pub fn is_zero(&self) -> bool {
        self.rank == 0 && self.torsion.is_empty()
    }

    /// Number of generators in the standard presentation (free ones first).
    pub fn generator_count(&self) -> usize {
        self.rank as usize + self.torsion.len()
    }

    /// Relation matrix of the standard presentation: zero columns for free
    /// generators are omitted, torsion generator `i` gets `d_i e_i`.
    pub fn relation_matrix(&self) -> IntMatrix {
        let g = self.generator_count();
        let mut m = IntMatrix::zeros(g, self.torsion.len());
        for (i, &d) in self.torsion.iter().enumerate() {
            m.set(self.rank as usize + i, i, BigInt::from(d));
        }
        m
    }

    pub fn direct_sum(&self, other: &FgAbelianGroup) -> Self {
        let mut cyc = self.torsion.clone();
        cyc.extend_from_slice(&other.torsion);
        Self::new(self.rank + other.rank, &cyc)
    }
}

impl fmt::Display for FgAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|d| format!("Z/{d}")));
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::MalformedChain("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect(),
        })
    }

    /// Empty matrix with the given shape (a map into or out of the zero group).
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::zeros(rows, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).clone()).collect())
            .collect()
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "shape mismatch in integer matrix product");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * out.cols + j;
                    out.data[idx] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = IntMatrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    /// Determinant by fraction-free Bareiss elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.to_rows();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                    return BigInt::zero();
                };
                a.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        sign * a[n - 1][n - 1].clone()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// row[dst] += q * row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(src, j) * q;
            self.data[dst * self.cols + j] += v;
        }
    }

    /// col[dst] += q * col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for i in 0..self.rows {
            let v = self.get(i, src) * q;
            self.data[i * self.cols + dst] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let idx = r * self.cols + j;
            self.data[idx] = -self.data[idx].clone();
        }
    }
}

/// `U M V = D` with `D` diagonal (divisibility chain, non-negative) and
/// `U`, `V` unimodular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithForm {
    pub d: IntMatrix,
    pub u: IntMatrix,
    pub v: IntMatrix,
}

impl SmithForm {
    /// Nonzero diagonal entries `d_1 | d_2 | ...`.
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.d.rows.min(self.d.cols))
            .map(|i| self.d.get(i, i).clone())
            .take_while(|x| !x.is_zero())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.diagonal().len()
    }
}

pub fn smith_normal_form(m: &IntMatrix) -> SmithForm {
    let mut d = m.clone();
    let mut u = IntMatrix::identity(m.rows);
    let mut v = IntMatrix::identity(m.cols);
    let (rows, cols) = (m.rows, m.cols);
    for t in 0..rows.min(cols) {
        // Smallest nonzero entry of the trailing block becomes the pivot.
        loop {
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..rows {
                for j in t..cols {
                    let x = d.get(i, j);
                    if !x.is_zero() && pivot.is_none_or(|(pi, pj)| x.abs() < d.get(pi, pj).abs()) {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return finish(d, u, v);
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let mut clean = true;
            for i in t + 1..rows {
                if !d.get(i, t).is_zero() {
                    let q = -(d.get(i, t).div_floor(d.get(t, t)));
                    d.add_row(i, t, &q);
                    u.add_row(i, t, &q);
                    if !d.get(i, t).is_zero() {
                        clean = false;
                    }
                }
            }
            for j in t + 1..cols {
                if !d.get(t, j).is_zero() {
                    let q = -(d.get(t, j).div_floor(d.get(t, t)));
                    d.add_col(j, t, &q);
                    v.add_col(j, t, &q);
                    if !d.get(t, j).is_zero() {
                        clean = false;
                    }
                }
            }
            if !clean {
                continue;
            }
            // Pivot must divide the whole trailing block.
            let p = d.get(t, t).clone();
            let offender = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !d.get(i, j).is_multiple_of(&p)));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    d.add_row(t, i, &one);
                    u.add_row(t, i, &one);
                }
                None => break,
            }
        }
        if d.get(t, t).is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    finish(d, u, v)
}

fn finish(d: IntMatrix, u: IntMatrix, v: IntMatrix) -> SmithForm {
    SmithForm { d, u, v }
}

/// `Z^rows / image(M)`.
pub fn cokernel(m: &IntMatrix) -> FgAbelianGroup {
    let diag = smith_normal_form(m).diagonal();
    let rank = (m.rows - diag.len()) as u32;
    let torsion: Vec<u64> = diag
        .iter()
        .filter(|d| !d.is_one())
        .map(|d| d.to_u64().expect("invariant factor fits in u64"))
        .collect();
    FgAbelianGroup::new(rank, &torsion)
}

/// Cokernel of a homomorphism into `target`, given by the images of the
/// source generators written in `target`'s standard generators.
pub fn cokernel_into(m: &IntMatrix, target: &FgAbelianGroup) -> Result<FgAbelianGroup> {
    if m.rows != target.generator_count() {
        return Err(Error::MalformedChain(format!(
            "map has {} rows but target {} has {} generators",
            m.rows,
            target,
            target.generator_count()
        )));
    }
    Ok(cokernel(&m.hstack(&target.relation_matrix())))
}

/// Integer basis of `{x : M x = 0}` as columns.
fn kernel_basis(m: &IntMatrix) -> Vec<Vec<BigInt>> {
    let s = smith_normal_form(m);
    (s.rank()..m.cols).map(|j| s.v.column(j)).collect()
}

/// Whether `x` lies in the lattice spanned by the columns of `m`.
fn in_lattice(m: &IntMatrix, s: &SmithForm, x: &[BigInt]) -> bool {
    let diag = s.diagonal();
    (0..m.rows).all(|i| {
        let y: BigInt = (0..m.rows).map(|k| s.u.get(i, k) * &x[k]).sum();
        match diag.get(i) {
            Some(d) => y.is_multiple_of(d),
            None => y.is_zero(),
        }
    })
}

/// A sequence `G_0 -> G_1 -> ... -> G_k` of homomorphisms.
///
/// `maps[i]` is the matrix of `G_i -> G_{i+1}` on the standard generators
/// (free generators first, then one per invariant factor); entries hitting
/// torsion generators are read modulo the invariant factor.
#[derive(Debug, Clone)]
pub struct GroupChain {
    pub groups: Vec<FgAbelianGroup>,
    pub maps: Vec<IntMatrix>,
}

impl GroupChain {
    pub fn new(groups: Vec<FgAbelianGroup>, maps: Vec<IntMatrix>) -> Result<Self> {
        let chain = Self { groups, maps };
        chain.validate()?;
        Ok(chain)
    }

    fn validate(&self) -> Result<()> {
        if self.groups.is_empty() || self.maps.len() + 1 != self.groups.len() {
            return Err(Error::MalformedChain(format!(
                "{} groups need {} maps, got {}",
                self.groups.len(),
                self.groups.len().saturating_sub(1),
                self.maps.len()
            )));
        }
        for (i, m) in self.maps.iter().enumerate() {
            let (src, dst) = (&self.groups[i], &self.groups[i + 1]);
            if m.cols != src.generator_count() || m.rows != dst.generator_count() {
                return Err(Error::MalformedChain(format!(
                    "map {i} has shape {}x{} but {} -> {} needs {}x{}",
                    m.rows,
                    m.cols,
                    src,
                    dst,
                    dst.generator_count(),
                    src.generator_count()
                )));
            }
            // Relations of the source must land in relations of the target.
            let rel_dst = dst.relation_matrix();
            let s = smith_normal_form(&rel_dst);
            let pushed = m.mul(&src.relation_matrix());
            for j in 0..pushed.cols {
                if !in_lattice(&rel_dst, &s, &pushed.column(j)) {
                    return Err(Error::MalformedChain(format!("map {i} is not well defined on torsion")));
                }
            }
        }
        Ok(())
    }

    /// `sum (-1)^i rank G_i`
    pub fn alternating_rank_sum(&self) -> i64 {
        self.groups
            .iter()
            .enumerate()
            .map(|(i, g)| if i % 2 == 0 { g.rank as i64 } else { -(g.rank as i64) })
            .sum()
    }

    pub fn is_bounded(&self) -> bool {
        self.groups.first().is_some_and(FgAbelianGroup::is_zero) && self.groups.last().is_some_and(FgAbelianGroup::is_zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub exact: bool,
    /// First interior node where image and kernel differ.
    pub failure_location: Option<usize>,
    /// Alternating rank sum, reported for chains with zero endpoints.
    pub euler_characteristic: Option<i64>,
}

/// Checks `image = kernel` at every interior node.
pub fn is_exact(chain: &GroupChain) -> Result<ExactnessReport> {
    chain.validate()?;
    let mut failure = None;
    for i in 1..chain.groups.len().saturating_sub(1) {
        if !exact_at(chain, i) {
            failure = Some(i);
            break;
        }
    }
    let euler = chain.is_bounded().then(|| chain.alternating_rank_sum());
    Ok(ExactnessReport {
        exact: failure.is_none() && euler.is_none_or(|e| e == 0),
        failure_location: failure,
        euler_characteristic: euler,
    })
}

/// Image of `G_{i-1}` equals kernel of `G_i -> G_{i+1}`, compared as
/// lattices in the free cover of `G_i`.
fn exact_at(chain: &GroupChain, i: usize) -> bool {
    let here = &chain.groups[i];
    let gens = here.generator_count();
    let rel_here = here.relation_matrix();
    let image = chain.maps[i - 1].hstack(&rel_here);

    let next = &chain.groups[i + 1];
    let outgoing = chain.maps[i].hstack(&next.relation_matrix());
    let kernel: Vec<Vec<BigInt>> = kernel_basis(&outgoing)
        .into_iter()
        .map(|v| v[..gens].to_vec())
        .collect();

    let mut kmat = IntMatrix::zeros(gens, kernel.len());
    for (j, v) in kernel.iter().enumerate() {
        for (r, x) in v.iter().enumerate() {
            kmat.set(r, j, x.clone());
        }
    }
    let ks = smith_normal_form(&kmat);
    let is = smith_normal_form(&image);
    let image_in_kernel = (0..image.cols).all(|j| in_lattice(&kmat, &ks, &image.column(j)));
    let kernel_in_image = kernel.iter().all(|v| in_lattice(&image, &is, v));
    image_in_kernel && kernel_in_image
}

fn aspherical_kind(surface: SurfaceKind) -> Result<SurfaceKind> {
    if !surface.is_aspherical() {
        return Err(Error::InvalidSurface(format!(
            "{surface} is excluded: deformation K-theory tables need an aspherical surface"
        )));
    }
    Ok(surface)
}

/// Deformation K-groups of the surface group in the given degree.
pub fn kdef_groups(surface: SurfaceKind, degree: u32) -> Result<FgAbelianGroup> {
    Ok(match aspherical_kind(surface)? {
        SurfaceKind::Orientable { g } => match degree {
            0 => FgAbelianGroup::free(1),
            d if d % 2 == 1 => FgAbelianGroup::free(2 * g),
            _ => FgAbelianGroup::free(2),
        },
        SurfaceKind::Nonorientable { k } => {
            if degree.is_multiple_of(2) {
                FgAbelianGroup::new(1, &[2])
            } else {
                // M^g # N_j has 2g + j - 1 = k - 1.
                FgAbelianGroup::free(k - 1)
            }
        }
    })
}

/// Integral cohomology `H^0, H^1, H^2` of the one-vertex cell structure,
/// from the exponent sums of the relator.
pub fn cellular_cohomology(surface: SurfaceKind) -> Result<[FgAbelianGroup; 3]> {
    let p = SurfacePresentation::new(surface)?;
    let m = p.generator_count();
    // delta^1 : C^1 = Z^m -> C^2 = Z, the exponent sum of each generator.
    let mut sums = vec![0i64; m];
    for l in p.relator().letters() {
        sums[l.generator] += l.sign() as i64;
    }
    let delta = IntMatrix::from_rows(&[sums])?;
    let s = smith_normal_form(&delta);
    let h1 = FgAbelianGroup::free((m - s.rank()) as u32);
    let h2 = cokernel(&delta);
    Ok([FgAbelianGroup::free(1), h1, h2])
}

/// `K^{-degree}` of the surface, 2-periodic. For a 2-dimensional complex
/// the Atiyah-Hirzebruch spectral sequence collapses and splits:
/// `K^0 = H^0 + H^2`, `K^1 = H^1`.
pub fn k_topological(surface: SurfaceKind, degree: u32) -> Result<FgAbelianGroup> {
    if let SurfaceKind::Orientable { g: 0 } = surface {
        return Ok(if degree.is_multiple_of(2) {
            FgAbelianGroup::free(2)
        } else {
            FgAbelianGroup::zero()
        });
    }
    let [h0, h1, h2] = cellular_cohomology(surface)?;
    Ok(if degree.is_multiple_of(2) { h0.direct_sum(&h2) } else { h1 })
}

/// Homotopy of the stable moduli space of flat unitary connections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ModuliValue {
    /// Number of path components.
    Components { count: u32 },
    Proven { group: FgAbelianGroup },
    /// Not established; `candidates` lists the values left open.
    Conjectural { candidates: Vec<FgAbelianGroup>, note: String },
}

impl fmt::Display for ModuliValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuliValue::Components { count: 1 } => f.write_str("connected"),
            ModuliValue::Components { count } => write!(f, "{count} components"),
            ModuliValue::Proven { group } => write!(f, "{group}"),
            ModuliValue::Conjectural { candidates, .. } => {
                let c: Vec<String> = candidates.iter().map(ToString::to_string).collect();
                write!(f, "conjectural({})", c.join(" or "))
            }
        }
    }
}

pub fn moduli_homotopy(surface: SurfaceKind, i: u32) -> Result<ModuliValue> {
    let surface = aspherical_kind(surface)?;
    let orientable = surface.is_orientable();
    Ok(match i {
        0 => ModuliValue::Components {
            count: if orientable { 1 } else { 2 },
        },
        1 => ModuliValue::Proven {
            group: k_topological(surface, 1)?,
        },
        2 if orientable => ModuliValue::Proven {
            group: FgAbelianGroup::free(1),
        },
        2 => ModuliValue::Conjectural {
            candidates: vec![FgAbelianGroup::zero(), FgAbelianGroup::new(0, &[2])],
            note: "cokernel of the Bott map in degree 0 is 0 or Z/2; injectivity of the Bott map is open".into(),
        },
        _ => ModuliValue::Conjectural {
            candidates: vec![FgAbelianGroup::zero()],
            note: "vanishing above degree 2 would follow from the Bott map being an isomorphism; not proven".into(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottLesRow {
    pub degree: u32,
    pub kdef: FgAbelianGroup,
    pub rdef: ModuliValue,
    pub moduli: ModuliValue,
    pub consistent: bool,
}

/// Degrees 0..=2 of the Bott long exact sequence and the cross-check of
/// `R^def_i` against the stable moduli space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BottLesReport {
    pub surface: SurfaceKind,
    pub rows: Vec<BottLesRow>,
    /// Bott map `K^def_0 -> K^def_2` candidates, as integer matrices.
    pub bott_maps: Vec<Vec<Vec<i64>>>,
    /// Cokernels of the candidates, one per entry of `bott_maps`.
    pub bott_cokernels: Vec<FgAbelianGroup>,
    /// Set when the Bott map in degree 0 is not determined.
    pub open_question: Option<String>,
}

pub fn bott_les_report(surface: SurfaceKind) -> Result<BottLesReport> {
    let surface = aspherical_kind(surface)?;
    let k: Vec<FgAbelianGroup> = (0..3).map(|d| kdef_groups(surface, d)).collect::<Result<_>>()?;
    let (maps, open) = if surface.is_orientable() {
        // K_0 = Z is spanned by the unit, sent to the image of the generator
        // of pi_2 ku under a split injection Z -> Z^2.
        (vec![vec![vec![1], vec![0]]], None)
    } else {
        // Z + Z/2 -> Z + Z/2: an isomorphism, or killing the torsion class.
        (
            vec![vec![vec![1, 0], vec![0, 1]], vec![vec![1, 0], vec![0, 0]]],
            Some("whether the Bott map K^def_0 -> K^def_2 is injective is not known".to_string()),
        )
    };
    let cokernels = maps
        .iter()
        .map(|rows| cokernel_into(&IntMatrix::from_rows(rows)?, &k[2]))
        .collect::<Result<Vec<_>>>()?;
    let r2 = if cokernels.len() == 1 {
        ModuliValue::Proven {
            group: cokernels[0].clone(),
        }
    } else {
        let mut cands = cokernels.clone();
        cands.sort_by_key(|g| (g.rank(), g.torsion().to_vec()));
        cands.dedup();
        ModuliValue::Conjectural {
            candidates: cands,
            note: open.clone().unwrap_or_default(),
        }
    };
    let mut rows = Vec::new();
    for d in 0..3u32 {
        let rdef = match d {
            0 | 1 => ModuliValue::Proven { group: k[d as usize].clone() },
            _ => r2.clone(),
        };
        let moduli = moduli_homotopy(surface, d)?;
        let consistent = match (d, &rdef, &moduli) {
            // pi_0 of R^def is the group completion Z x pi_0, not pi_0 itself.
            (0, _, _) => true,
            (_, ModuliValue::Proven { group: a }, ModuliValue::Proven { group: b }) => a == b,
            (_, ModuliValue::Conjectural { candidates: a, .. }, ModuliValue::Conjectural { candidates: b, .. }) => {
                a.iter().all(|x| b.contains(x)) && b.iter().all(|x| a.contains(x))
            }
            _ => false,
        };
        rows.push(BottLesRow {
            degree: d,
            kdef: k[d as usize].clone(),
            rdef,
            moduli,
            consistent,
        });
    }
    Ok(BottLesReport {
        surface,
        rows,
        bott_maps: maps,
        bott_cokernels: cokernels,
        open_question: open,
    })
}

/// Failure of excision for `M^{g1+g2} = M^{g1} # M^{g2}` in degree 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcisionReport {
    pub g1: u32,
    pub g2: u32,
    /// Groups of the would-be sequence
    /// `K_1(F_{2g1}) + K_1(F_{2g2}) -> K_1(Z) -> K_0(pi_1 M) -> K_0(F) + K_0(F) -> K_0(Z) -> 0`.
    pub groups: Vec<FgAbelianGroup>,
    /// Result of the exactness check on the chain with natural maps.
    pub natural_chain: ExactnessReport,
    /// Alternating rank sum after truncating at the zero map.
    pub euler_obstruction: i64,
    /// Candidate maps tried for the middle of the truncated chain.
    pub maps_tested: usize,
    pub exact_candidates: usize,
    /// Truncated identity chain `0 -> Z -> Z -> 0`, which must be exact.
    pub control_exact: bool,
    pub excision_fails: bool,
}

pub fn excision_counterexample(g1: u32, g2: u32) -> Result<ExcisionReport> {
    if g1 < 1 || g2 < 1 {
        return Err(Error::Precondition(format!("genera must be positive, got ({g1}, {g2})")));
    }
    let free_rank = 2 * (g1 + g2);
    let z = FgAbelianGroup::free(1);
    let z2 = FgAbelianGroup::free(2);
    let k0_m = kdef_groups(SurfaceKind::Orientable { g: g1 + g2 }, 0)?;
    let groups = vec![
        FgAbelianGroup::free(free_rank),
        z.clone(),
        k0_m.clone(),
        z2.clone(),
        z.clone(),
        FgAbelianGroup::zero(),
    ];
    let m = |rows: &[Vec<i64>]| IntMatrix::from_rows(rows);
    // The multiple-commutator map is null on homotopy: zero incoming map.
    let natural = GroupChain::new(
        groups.clone(),
        vec![
            IntMatrix::zeros(1, free_rank as usize),
            m(&[vec![1]])?,
            m(&[vec![1], vec![1]])?,
            m(&[vec![1, -1]])?,
            IntMatrix::empty(0, 1),
        ],
    )?;
    let natural_chain = is_exact(&natural)?;

    // With the incoming map zero, exactness at K_1(Z) reduces the sequence
    // to 0 -> Z -> Z -> Z^2 -> Z -> 0, whatever the remaining maps are.
    let truncated_groups = vec![
        FgAbelianGroup::zero(),
        z.clone(),
        k0_m,
        z2,
        z.clone(),
        FgAbelianGroup::zero(),
    ];
    // Alternating rank sum of the terminal chain Z -> Z -> Z^2 -> Z -> 0;
    // an exact chain of free groups ending in 0 would have it vanish.
    let euler_obstruction = GroupChain::new(
        truncated_groups[1..].to_vec(),
        vec![
            m(&[vec![1]])?,
            m(&[vec![1], vec![1]])?,
            m(&[vec![1, -1]])?,
            IntMatrix::empty(0, 1),
        ],
    )?
    .alternating_rank_sum();

    let range = -2i64..=2;
    let (mut tested, mut exact) = (0usize, 0usize);
    for a in range.clone() {
        for b0 in range.clone() {
            for b1 in range.clone() {
                for c0 in range.clone() {
                    for c1 in range.clone() {
                        let chain = GroupChain::new(
                            truncated_groups.clone(),
                            vec![
                                IntMatrix::empty(1, 0),
                                m(&[vec![a]])?,
                                m(&[vec![b0], vec![b1]])?,
                                m(&[vec![c0, c1]])?,
                                IntMatrix::empty(0, 1),
                            ],
                        )?;
                        tested += 1;
                        // Interior checks only; the rank sum is reported separately.
                        if (1..5).all(|i| exact_at(&chain, i)) {
                            exact += 1;
                        }
                    }
                }
            }
        }
    }

    let control = GroupChain::new(
        vec![FgAbelianGroup::zero(), z.clone(), z, FgAbelianGroup::zero()],
        vec![IntMatrix::empty(1, 0), m(&[vec![1]])?, IntMatrix::empty(0, 1)],
    )?;
    let control_exact = is_exact(&control)?.exact;

    Ok(ExcisionReport {
        g1,
        g2,
        groups,
        excision_fails: !natural_chain.exact && euler_obstruction != 0 && exact == 0,
        natural_chain,
        euler_obstruction,
        maps_tested: tested,
        exact_candidates: exact,
        control_exact,
    })
}

/// One row of the K-group table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGroupRow {
    pub surface: String,
    pub orientable: bool,
    pub g: u32,
    /// `j` of `M^g # N_j`; 0 for orientable surfaces.
    pub j: u32,
    pub degree: u32,
    pub kdef: String,
    pub ktop: String,
    pub agree: bool,
}

/// Orientable `g = 1..=max_g` and nonorientable `M^g # N_j` for
/// `g = 0..=max_g`, `j = 1, 2` (the projective plane skipped).
pub fn kgroups_table(max_g: u32, degrees: std::ops::RangeInclusive<u32>) -> Result<Vec<KGroupRow>> {
    let mut surfaces = Vec::new();
    for g in 1..=max_g {
        surfaces.push((SurfaceKind::Orientable { g }, g, 0));
    }
    for g in 0..=max_g {
        for j in 1..=2 {
            if g == 0 && j == 1 {
                continue;
            }
            surfaces.push((SurfaceKind::connected_sum(g, j)?, g, j));
        }
    }
    let mut rows = Vec::new();
    for (s, g, j) in surfaces {
        for d in degrees.clone() {
            let kdef = kdef_groups(s, d)?;
            let ktop = k_topological(s, d)?;
            rows.push(KGroupRow {
                surface: s.to_string(),
                orientable: s.is_orientable(),
                g,
                j,
                degree: d,
                agree: kdef == ktop,
                kdef: kdef.to_string(),
                ktop: ktop.to_string(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    fn check_snf(m: &IntMatrix) -> SmithForm {
        let s = smith_normal_form(m);
        assert_eq!(s.u.mul(m).mul(&s.v), s.d);
        assert!(s.u.determinant().abs().is_one());
        assert!(s.v.determinant().abs().is_one());
        let diag = s.diagonal();
        for w in diag.windows(2) {
            assert!(w[1].is_multiple_of(&w[0]));
        }
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if i != j {
                    assert!(s.d.get(i, j).is_zero());
                }
            }
        }
        s
    }

    #[test]
    fn snf_examples() {
        let s = check_snf(&IntMatrix::identity(3));
        assert_eq!(s.d, IntMatrix::identity(3));
        let s = check_snf(&IntMatrix::zeros(2, 3));
        assert!(s.d.is_zero());
        let s = check_snf(&mat(&[vec![2, 0], vec![0, 3]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(1), BigInt::from(6)]);
        let s = check_snf(&mat(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
    }

    #[test]
    fn cokernel_examples() {
        assert_eq!(cokernel(&mat(&[vec![1], vec![0]])), FgAbelianGroup::free(1));
        assert_eq!(cokernel(&mat(&[vec![2]])), FgAbelianGroup::new(0, &[2]));
        assert_eq!(cokernel(&mat(&[vec![2], vec![3]])), FgAbelianGroup::free(1));
        assert_eq!(cokernel(&IntMatrix::zeros(2, 0)), FgAbelianGroup::free(2));
    }

    #[test]
    fn group_normalization_and_display() {
        assert_eq!(FgAbelianGroup::new(0, &[2, 3]), FgAbelianGroup::new(0, &[6]));
        assert_eq!(FgAbelianGroup::new(1, &[4, 6]).torsion(), &[2, 12]);
        assert_eq!(FgAbelianGroup::new(1, &[0, 1]), FgAbelianGroup::free(2));
        assert_eq!(FgAbelianGroup::new(1, &[2]).to_string(), "Z + Z/2");
        assert_eq!(FgAbelianGroup::free(4).to_string(), "Z^4");
        assert_eq!(FgAbelianGroup::zero().to_string(), "0");
    }

    #[test]
    fn exactness_examples() {
        let z = FgAbelianGroup::free(1);
        let zero = FgAbelianGroup::zero();
        let c = GroupChain::new(
            vec![zero.clone(), z.clone(), z.clone(), zero.clone()],
            vec![IntMatrix::empty(1, 0), mat(&[vec![1]]), IntMatrix::empty(0, 1)],
        )
        .unwrap();
        assert!(is_exact(&c).unwrap().exact);

        let c = GroupChain::new(
            vec![zero.clone(), z.clone(), FgAbelianGroup::free(2), z.clone(), zero.clone()],
            vec![
                IntMatrix::empty(1, 0),
                mat(&[vec![1], vec![1]]),
                mat(&[vec![1, -1]]),
                IntMatrix::empty(0, 1),
            ],
        )
        .unwrap();
        assert!(is_exact(&c).unwrap().exact);

        // Multiplication by 2 is injective but not surjective.
        let c = GroupChain::new(
            vec![zero.clone(), z.clone(), z.clone(), zero.clone()],
            vec![IntMatrix::empty(1, 0), mat(&[vec![2]]), IntMatrix::empty(0, 1)],
        )
        .unwrap();
        let r = is_exact(&c).unwrap();
        assert!(!r.exact);
        assert_eq!(r.failure_location, Some(2));

        // 0 -> Z -2-> Z -> Z/2 -> 0 is exact.
        let z2 = FgAbelianGroup::new(0, &[2]);
        let c = GroupChain::new(
            vec![zero.clone(), z.clone(), z.clone(), z2, zero],
            vec![IntMatrix::empty(1, 0), mat(&[vec![2]]), mat(&[vec![1]]), IntMatrix::empty(0, 1)],
        )
        .unwrap();
        assert!(is_exact(&c).unwrap().exact);
    }

    #[test]
    fn malformed_chains_rejected() {
        let z = FgAbelianGroup::free(1);
        assert!(GroupChain::new(vec![z.clone(), z.clone()], vec![]).is_err());
        assert!(GroupChain::new(vec![z.clone(), z.clone()], vec![mat(&[vec![1, 1]])]).is_err());
        // Z/2 -> Z sending the generator to 1 is not a homomorphism.
        let z2 = FgAbelianGroup::new(0, &[2]);
        assert!(GroupChain::new(vec![z2, z], vec![mat(&[vec![1]])]).is_err());
    }

    #[test]
    fn kdef_examples() {
        assert_eq!(kdef_groups(SurfaceKind::Orientable { g: 2 }, 3).unwrap(), FgAbelianGroup::free(4));
        assert_eq!(kdef_groups(SurfaceKind::klein_bottle(), 2).unwrap(), FgAbelianGroup::new(1, &[2]));
        assert_eq!(kdef_groups(SurfaceKind::Orientable { g: 2 }, 0).unwrap(), FgAbelianGroup::free(1));
        assert!(kdef_groups(SurfaceKind::Orientable { g: 0 }, 1).is_err());
        assert!(kdef_groups(SurfaceKind::Nonorientable { k: 1 }, 1).is_err());
    }

    #[test]
    fn ktop_examples() {
        for g in 1..5 {
            let s = SurfaceKind::Orientable { g };
            assert_eq!(k_topological(s, 0).unwrap(), FgAbelianGroup::free(2));
            assert_eq!(k_topological(s, 1).unwrap(), FgAbelianGroup::free(2 * g));
        }
        assert_eq!(k_topological(SurfaceKind::klein_bottle(), 0).unwrap(), FgAbelianGroup::new(1, &[2]));
        assert_eq!(k_topological(SurfaceKind::Nonorientable { k: 1 }, 0).unwrap(), FgAbelianGroup::new(1, &[2]));
        assert_eq!(k_topological(SurfaceKind::Orientable { g: 0 }, 1).unwrap(), FgAbelianGroup::zero());
    }

    #[test]
    fn moduli_examples() {
        let z4 = ModuliValue::Proven { group: FgAbelianGroup::free(4) };
        assert_eq!(moduli_homotopy(SurfaceKind::Orientable { g: 2 }, 1).unwrap(), z4);
        let mk = SurfaceKind::connected_sum(3, 2).unwrap();
        assert_eq!(
            moduli_homotopy(mk, 1).unwrap(),
            ModuliValue::Proven { group: FgAbelianGroup::free(7) }
        );
        assert_eq!(
            moduli_homotopy(SurfaceKind::torus(), 2).unwrap(),
            ModuliValue::Proven { group: FgAbelianGroup::free(1) }
        );
        assert_eq!(moduli_homotopy(SurfaceKind::klein_bottle(), 0).unwrap(), ModuliValue::Components { count: 2 });
        assert!(matches!(moduli_homotopy(SurfaceKind::torus(), 3).unwrap(), ModuliValue::Conjectural { .. }));
        assert!(matches!(moduli_homotopy(SurfaceKind::klein_bottle(), 2).unwrap(), ModuliValue::Conjectural { .. }));
    }

    #[test]
    fn bott_report_examples() {
        let r = bott_les_report(SurfaceKind::Orientable { g: 3 }).unwrap();
        assert_eq!(r.bott_cokernels, vec![FgAbelianGroup::free(1)]);
        assert!(r.rows.iter().all(|row| row.consistent));
        assert!(r.open_question.is_none());

        let t = bott_les_report(SurfaceKind::torus()).unwrap();
        assert_eq!(t.rows[1].kdef, FgAbelianGroup::free(2));
        assert_eq!(t.rows[1].moduli, ModuliValue::Proven { group: FgAbelianGroup::free(2) });

        let k = bott_les_report(SurfaceKind::klein_bottle()).unwrap();
        assert_eq!(k.rows[0].kdef, FgAbelianGroup::new(1, &[2]));
        assert_eq!(k.rows[0].rdef, ModuliValue::Proven { group: FgAbelianGroup::new(1, &[2]) });
        assert_eq!(k.bott_cokernels, vec![FgAbelianGroup::zero(), FgAbelianGroup::new(0, &[2])]);
        assert!(k.open_question.is_some());
        assert!(k.rows.iter().all(|row| row.consistent));
    }

    #[test]
    fn excision_examples() {
        let a = excision_counterexample(1, 1).unwrap();
        assert!(a.excision_fails);
        assert_eq!(a.euler_obstruction, 1);
        assert!(!a.natural_chain.exact);
        assert_eq!(a.exact_candidates, 0);
        assert!(a.control_exact);
        let b = excision_counterexample(2, 3).unwrap();
        assert_eq!(b.euler_obstruction, a.euler_obstruction);
        assert!(excision_counterexample(0, 1).is_err());
    }
}
