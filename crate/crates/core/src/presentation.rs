//! Surface-group presentations, free-group words and their evaluation in U(n).

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unitary::{CMatrix, Unitary};

/// A generator or its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter {
    pub generator: usize,
    pub inverted: bool,
}

impl Letter {
    pub fn new(generator: usize, sign: i8) -> Self {
        Self {
            generator,
            inverted: sign < 0,
        }
    }

    pub fn sign(&self) -> i8 {
        if self.inverted {
            -1
        } else {
            1
        }
    }

    pub fn inverse(self) -> Self {
        Self {
            inverted: !self.inverted,
            ..self
        }
    }
}

impl Serialize for Letter {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.generator, self.sign()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (generator, sign): (usize, i8) = Deserialize::deserialize(d)?;
        if sign != 1 && sign != -1 {
            return Err(de::Error::custom(format!("letter sign must be +1 or -1, got {sign}")));
        }
        Ok(Letter::new(generator, sign))
    }
}

/// A word in the free group on the generators, stored letter by letter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        Self(letters)
    }

    /// From `(index, sign)` pairs.
    pub fn from_pairs(pairs: &[(usize, i8)]) -> Self {
        Self(pairs.iter().map(|&(g, s)| Letter::new(g, s)).collect())
    }

    pub fn generator(index: usize) -> Self {
        Self(vec![Letter::new(index, 1)])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn push(&mut self, letter: Letter) {
        self.0.push(letter);
    }

    /// Free reduction (cancels adjacent `x x^-1` pairs).
    pub fn reduced(&self) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            match out.last() {
                Some(&last) if last == l.inverse() => {
                    out.pop();
                }
                _ => out.push(l),
            }
        }
        Self(out)
    }

    pub fn max_generator(&self) -> Option<usize> {
        self.0.iter().map(|l| l.generator).max()
    }
}

/// Surface descriptor in wire form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceKind {
    Orientable { g: u32 },
    /// `k` crosscaps; `M^g # N_j` is stored as `k = 2g + j`.
    Nonorientable { k: u32 },
}

impl SurfaceKind {
    pub fn torus() -> Self {
        SurfaceKind::Orientable { g: 1 }
    }

    pub fn klein_bottle() -> Self {
        SurfaceKind::Nonorientable { k: 2 }
    }

    /// `M^g # N_j` with `N_1` the projective plane and `N_2` the Klein bottle.
    pub fn connected_sum(g: u32, j: u32) -> Result<Self> {
        if j != 1 && j != 2 {
            return Err(Error::InvalidSurface(format!("N_j needs j in {{1, 2}}, got {j}")));
        }
        Ok(SurfaceKind::Nonorientable { k: 2 * g + j })
    }

    /// `(g, j)` with this surface equal to `M^g # N_j`, for nonorientable surfaces.
    pub fn connected_sum_form(&self) -> Option<(u32, u32)> {
        match *self {
            SurfaceKind::Orientable { .. } => None,
            SurfaceKind::Nonorientable { k } => {
                let j = if k % 2 == 0 { 2 } else { 1 };
                Some(((k - j) / 2, j))
            }
        }
    }

    pub fn is_orientable(&self) -> bool {
        matches!(self, SurfaceKind::Orientable { .. })
    }

    pub fn euler_characteristic(&self) -> i64 {
        match *self {
            SurfaceKind::Orientable { g } => 2 - 2 * g as i64,
            SurfaceKind::Nonorientable { k } => 2 - k as i64,
        }
    }

    /// Only the sphere and the projective plane fail asphericity among
    /// compact surfaces.
    pub fn is_aspherical(&self) -> bool {
        match *self {
            SurfaceKind::Orientable { g } => g >= 1,
            SurfaceKind::Nonorientable { k } => k >= 2,
        }
    }

    pub(crate) fn require_aspherical(&self) -> Result<()> {
        if self.is_aspherical() {
            Ok(())
        } else {
            Err(Error::InvalidSurface(format!("{self} is not aspherical")))
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SurfaceKind::Orientable { g: 0 } => write!(f, "sphere"),
            SurfaceKind::Orientable { g: 1 } => write!(f, "torus"),
            SurfaceKind::Orientable { g } => write!(f, "genus{g}"),
            SurfaceKind::Nonorientable { k: 1 } => write!(f, "rp2"),
            SurfaceKind::Nonorientable { k: 2 } => write!(f, "klein"),
            SurfaceKind::Nonorientable { k } => write!(f, "crosscaps{k}"),
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;

    /// Accepts `torus`, `klein`, `rp2`, `sphere`, `genusG`, `gG`,
    /// `crosscapsK`, `kK`, and `M<g>#N<j>`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let num = |rest: &str| -> Result<u32> {
            rest.parse::<u32>()
                .map_err(|_| Error::InvalidSurface(format!("cannot parse surface '{s}'")))
        };
        match t.as_str() {
            "torus" => return Ok(SurfaceKind::torus()),
            "klein" | "klein-bottle" => return Ok(SurfaceKind::klein_bottle()),
            "rp2" => return Ok(SurfaceKind::Nonorientable { k: 1 }),
            "sphere" => return Ok(SurfaceKind::Orientable { g: 0 }),
            _ => {}
        }
        if let Some((m, n)) = t.split_once('#') {
            let g = num(m.strip_prefix('m').unwrap_or(m))?;
            let j = num(n.strip_prefix('n').unwrap_or(n))?;
            return SurfaceKind::connected_sum(g, j);
        }
        for prefix in ["genus", "g"] {
            if let Some(rest) = t.strip_prefix(prefix) {
                return Ok(SurfaceKind::Orientable { g: num(rest)? });
            }
        }
        for prefix in ["crosscaps", "k"] {
            if let Some(rest) = t.strip_prefix(prefix) {
                return Ok(SurfaceKind::Nonorientable { k: num(rest)? });
            }
        }
        Err(Error::InvalidSurface(format!("cannot parse surface '{s}'")))
    }
}

/// One-relator presentation of a closed surface group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceKind", into = "SurfaceKind")]
pub struct SurfacePresentation {
    kind: SurfaceKind,
    generator_count: usize,
    relator: Word,
    aspherical: bool,
}

impl SurfacePresentation {
    /// Standard presentation: `prod [a_j, b_j]` with generators
    /// `a_1, b_1, a_2, b_2, ...`, or `x_1^2 ... x_k^2`.
    pub fn new(kind: SurfaceKind) -> Result<Self> {
        let (generator_count, relator) = match kind {
            SurfaceKind::Orientable { g: 0 } => {
                return Err(Error::InvalidSurface(
                    "the sphere has trivial fundamental group and is excluded".into(),
                ))
            }
            SurfaceKind::Nonorientable { k: 0 } => {
                return Err(Error::InvalidSurface("need at least one crosscap".into()))
            }
            SurfaceKind::Orientable { g } => {
                let mut w = Vec::with_capacity(4 * g as usize);
                for j in 0..g as usize {
                    let (a, b) = (2 * j, 2 * j + 1);
                    w.extend([(a, 1), (b, 1), (a, -1), (b, -1)]);
                }
                (2 * g as usize, Word::from_pairs(&w))
            }
            SurfaceKind::Nonorientable { k } => {
                let w: Vec<(usize, i8)> = (0..k as usize).flat_map(|i| [(i, 1), (i, 1)]).collect();
                (k as usize, Word::from_pairs(&w))
            }
        };
        Ok(Self {
            kind,
            generator_count,
            relator,
            aspherical: kind.is_aspherical(),
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn generator_count(&self) -> usize {
        self.generator_count
    }

    pub fn relator(&self) -> &Word {
        &self.relator
    }

    pub fn is_aspherical(&self) -> bool {
        self.aspherical
    }

    pub fn is_orientable(&self) -> bool {
        self.kind.is_orientable()
    }

    pub fn generator_name(&self, i: usize) -> String {
        match self.kind {
            SurfaceKind::Orientable { .. } => {
                format!("{}{}", if i.is_multiple_of(2) { 'a' } else { 'b' }, i / 2 + 1)
            }
            SurfaceKind::Nonorientable { .. } => format!("x{}", i + 1),
        }
    }

    /// Checks that every letter of `w` names a generator.
    pub fn check_word(&self, w: &Word) -> Result<()> {
        match w.max_generator() {
            Some(index) if index >= self.generator_count => Err(Error::GeneratorOutOfRange {
                index,
                count: self.generator_count,
            }),
            _ => Ok(()),
        }
    }
}

impl From<SurfacePresentation> for SurfaceKind {
    fn from(p: SurfacePresentation) -> Self {
        p.kind
    }
}

impl TryFrom<SurfaceKind> for SurfacePresentation {
    type Error = Error;

    fn try_from(kind: SurfaceKind) -> Result<Self> {
        SurfacePresentation::new(kind)
    }
}

pub fn make_presentation(kind: SurfaceKind) -> Result<SurfacePresentation> {
    SurfacePresentation::new(kind)
}

fn common_dim(w: &Word, images: &[Unitary]) -> Result<usize> {
    if let Some(index) = w.max_generator() {
        if index >= images.len() {
            return Err(Error::GeneratorOutOfRange {
                index,
                count: images.len(),
            });
        }
    }
    let n = images.first().map_or(0, Unitary::dim);
    if let Some(bad) = images.iter().find(|u| u.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.dim(),
        });
    }
    Ok(n)
}

fn letter_matrix(l: Letter, images: &[Unitary]) -> CMatrix {
    let m = images[l.generator].matrix();
    if l.inverted {
        m.adjoint()
    } else {
        m.clone()
    }
}

/// Ordered product of images (adjoints for inverse letters); identity for the empty word.
pub fn evaluate_word(w: &Word, images: &[Unitary]) -> Result<Unitary> {
    let n = common_dim(w, images)?;
    let mut acc = CMatrix::identity(n, n);
    for &l in w.letters() {
        let m = images[l.generator].matrix();
        acc = if l.inverted { acc * m.adjoint() } else { acc * m };
    }
    Ok(Unitary::from_matrix_unchecked(acc))
}

/// Euclidean gradient of `E = ||evaluate_word(w) - I||_F^2` with respect to
/// each generator image, with inverse letters read as conjugate transposes.
///
/// For the letter at position `p` write `W = L X R`. A positive letter
/// contributes `2 L^H G R^H` and an inverse letter `2 R G^H L`, where
/// `G = W - I`.
pub fn word_gradient(w: &Word, images: &[Unitary]) -> Result<Vec<CMatrix>> {
    let n = common_dim(w, images)?;
    let mut grads = vec![CMatrix::zeros(n, n); images.len()];
    let len = w.len();
    if len == 0 {
        return Ok(grads);
    }
    let factors: Vec<CMatrix> = w.letters().iter().map(|&l| letter_matrix(l, images)).collect();
    // prefix[p] = F_0 ... F_{p-1}; suffix[p] = F_p ... F_{len-1}
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(CMatrix::identity(n, n));
    for f in &factors {
        let next = prefix.last().unwrap() * f;
        prefix.push(next);
    }
    let mut suffix = vec![CMatrix::identity(n, n); len + 1];
    for p in (0..len).rev() {
        suffix[p] = &factors[p] * &suffix[p + 1];
    }
    let g = &prefix[len] - CMatrix::identity(n, n);
    if g.iter().all(|z| z.norm() == 0.0) {
        return Ok(grads);
    }
    for (p, &l) in w.letters().iter().enumerate() {
        let left = &prefix[p];
        let right = &suffix[p + 1];
        let contrib = if l.inverted {
            right * g.adjoint() * left
        } else {
            left.adjoint() * &g * right.adjoint()
        };
        grads[l.generator] += contrib.scale(2.0);
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{haar_random, C64};

    fn scalar(re: f64, im: f64) -> Unitary {
        Unitary::scalar(C64::new(re, im)).unwrap()
    }

    #[test]
    fn torus_presentation() {
        let p = make_presentation(SurfaceKind::torus()).unwrap();
        assert_eq!(p.generator_count(), 2);
        assert_eq!(p.relator(), &Word::from_pairs(&[(0, 1), (1, 1), (0, -1), (1, -1)]));
        assert!(p.is_aspherical());
    }

    #[test]
    fn klein_and_genus_two_presentations() {
        let k = make_presentation(SurfaceKind::klein_bottle()).unwrap();
        assert_eq!(k.relator(), &Word::from_pairs(&[(0, 1), (0, 1), (1, 1), (1, 1)]));
        let g2 = make_presentation(SurfaceKind::Orientable { g: 2 }).unwrap();
        assert_eq!(g2.generator_count(), 4);
        assert_eq!(g2.relator().len(), 8);
    }

    #[test]
    fn sphere_rejected_and_rp2_flagged() {
        assert!(matches!(
            make_presentation(SurfaceKind::Orientable { g: 0 }),
            Err(Error::InvalidSurface(_))
        ));
        let rp2 = make_presentation(SurfaceKind::Nonorientable { k: 1 }).unwrap();
        assert!(!rp2.is_aspherical());
    }

    #[test]
    fn connected_sum_normalizes_to_crosscaps() {
        assert_eq!(SurfaceKind::connected_sum(0, 2).unwrap(), SurfaceKind::klein_bottle());
        assert_eq!(SurfaceKind::connected_sum(3, 1).unwrap(), SurfaceKind::Nonorientable { k: 7 });
        assert_eq!(SurfaceKind::Nonorientable { k: 7 }.connected_sum_form(), Some((3, 1)));
        assert_eq!(SurfaceKind::Nonorientable { k: 4 }.connected_sum_form(), Some((1, 2)));
    }

    #[test]
    fn surface_names_parse() {
        assert_eq!("torus".parse::<SurfaceKind>().unwrap(), SurfaceKind::torus());
        assert_eq!("genus2".parse::<SurfaceKind>().unwrap(), SurfaceKind::Orientable { g: 2 });
        assert_eq!("klein".parse::<SurfaceKind>().unwrap(), SurfaceKind::klein_bottle());
        assert_eq!("M1#N2".parse::<SurfaceKind>().unwrap(), SurfaceKind::Nonorientable { k: 4 });
        assert_eq!("k5".parse::<SurfaceKind>().unwrap(), SurfaceKind::Nonorientable { k: 5 });
        assert!("banana".parse::<SurfaceKind>().is_err());
    }

    #[test]
    fn presentation_json_shape() {
        let p = make_presentation(SurfaceKind::Orientable { g: 3 }).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "orientable", "g": 3}));
        let back: SurfacePresentation = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
        let w = Word::from_pairs(&[(0, 1), (2, -1)]);
        assert_eq!(serde_json::to_string(&w).unwrap(), "[[0,1],[2,-1]]");
        assert!(serde_json::from_str::<Word>("[[0,2]]").is_err());
    }

    #[test]
    fn empty_word_is_identity() {
        let imgs = vec![haar_random(3, 1), haar_random(3, 2)];
        let e = evaluate_word(&Word::empty(), &imgs).unwrap();
        assert_eq!(e, Unitary::identity(3));
    }

    #[test]
    fn commuting_pair_kills_torus_relator() {
        let p = make_presentation(SurfaceKind::torus()).unwrap();
        let imgs = vec![Unitary::from_phases(&[0.3, 1.1]), Unitary::from_phases(&[-2.0, 0.7])];
        let r = evaluate_word(p.relator(), &imgs).unwrap();
        assert!(r.max_entry_diff(&Unitary::identity(2)) < 1e-15);
    }

    #[test]
    fn klein_relator_scalar_value() {
        let p = make_presentation(SurfaceKind::klein_bottle()).unwrap();
        let r = evaluate_word(p.relator(), &[scalar(0.0, 1.0), scalar(1.0, 0.0)]).unwrap();
        assert!((r.matrix()[(0, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn evaluation_errors() {
        let w = Word::from_pairs(&[(3, 1)]);
        assert!(matches!(
            evaluate_word(&w, &[haar_random(2, 0)]),
            Err(Error::GeneratorOutOfRange { index: 3, count: 1 })
        ));
        assert!(matches!(
            evaluate_word(&Word::generator(0), &[haar_random(2, 0), haar_random(3, 0)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_solutions() {
        let p = make_presentation(SurfaceKind::Orientable { g: 2 }).unwrap();
        let imgs: Vec<Unitary> = (0..4).map(|_| Unitary::identity(2)).collect();
        for g in word_gradient(p.relator(), &imgs).unwrap() {
            assert_eq!(g.norm(), 0.0);
        }
    }

    #[test]
    fn gradient_in_b_vanishes_when_a_is_identity() {
        let p = make_presentation(SurfaceKind::torus()).unwrap();
        let imgs = vec![Unitary::identity(2), haar_random(2, 17)];
        let grads = word_gradient(p.relator(), &imgs).unwrap();
        assert!(grads[1].norm() < 1e-14);
    }

    #[test]
    fn reduction_cancels_pairs() {
        let w = Word::from_pairs(&[(0, 1), (1, 1), (1, -1), (0, -1), (2, 1)]);
        assert_eq!(w.reduced(), Word::from_pairs(&[(2, 1)]));
        assert_eq!(w.inverse().inverse(), w);
    }
}
