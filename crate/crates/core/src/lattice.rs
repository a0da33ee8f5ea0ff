//! Discrete connections on cell complexes modeling a closed surface.
//!
//! Edge labels compose left to right along walks: the transport along a walk
//! `e_1 e_2 ... e_k` is `A(e_1) A(e_2) ... A(e_k)`, with `A(e)^{-1}` for an
//! edge traversed against its orientation. Gauge transformations act by
//! `A(e) -> phi(tail) A(e) phi(head)^{-1}`, so closed walks at `v` are
//! conjugated by `phi(v)` and holonomy at the basepoint by `phi(m0)`.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LatticeFlowFailure, Result};
use crate::flow::{self, FlowOptions, FlowReport, Progress};
use crate::presentation::{evaluate_word, Letter, SurfacePresentation, Word};
use crate::rep_variety::Representation;
use crate::unitary::{haar_random_with, CMatrix, Unitary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// Polygonal cell structure on the surface with a basepoint at vertex 0.
///
/// Faces and generator loops are walks written as [`Word`]s whose letters
/// index edges. Level 0 is the one-vertex fundamental polygon; each further
/// level bisects every edge and cones every face from a new center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexJson")]
pub struct SurfaceComplex {
    presentation: SurfacePresentation,
    level: u32,
    vertex_count: usize,
    basepoint: usize,
    edges: Vec<Edge>,
    faces: Vec<Word>,
    generator_loops: Vec<Word>,
    /// Group word each edge carries in the reference flat connection of the
    /// subdivision (generator loops read off the generators).
    edge_words: Vec<Word>,
    /// Breadth-first spanning tree from the basepoint.
    tree_edges: Vec<bool>,
    /// Word of the based loop closed by each edge in the tree gauge; empty
    /// exactly on tree edges.
    loop_words: Vec<Word>,
}

#[derive(Deserialize)]
struct ComplexJson {
    presentation: SurfacePresentation,
    level: u32,
}

impl TryFrom<ComplexJson> for SurfaceComplex {
    type Error = Error;

    /// The cell structure is a deterministic function of presentation and
    /// level, so it is rebuilt rather than trusted.
    fn try_from(j: ComplexJson) -> Result<Self> {
        Ok(build_complex(&j.presentation, j.level))
    }
}

impl SurfaceComplex {
    pub fn presentation(&self) -> &SurfacePresentation {
        &self.presentation
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[Word] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn generator_loops(&self) -> &[Word] {
        &self.generator_loops
    }

    pub fn tree_edges(&self) -> &[bool] {
        &self.tree_edges
    }

    pub fn loop_words(&self) -> &[Word] {
        &self.loop_words
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    fn letter_start(&self, l: Letter) -> usize {
        let e = self.edges[l.generator];
        if l.inverted {
            e.head
        } else {
            e.tail
        }
    }

    fn letter_end(&self, l: Letter) -> usize {
        let e = self.edges[l.generator];
        if l.inverted {
            e.tail
        } else {
            e.head
        }
    }

    /// Start vertex of a closed walk, if the walk is closed and non-empty.
    pub fn closed_walk_start(&self, w: &Word) -> Option<usize> {
        let letters = w.letters();
        let first = *letters.first()?;
        for pair in letters.windows(2) {
            if self.letter_end(pair[0]) != self.letter_start(pair[1]) {
                return None;
            }
        }
        let start = self.letter_start(first);
        (self.letter_end(*letters.last().unwrap()) == start).then_some(start)
    }

    /// Bound constant `C` with `residual(holonomy) <= C sqrt(ym_energy)`: the
    /// relator loop is a product of conjugated face boundaries, so the
    /// triangle inequality over `F` faces gives `C = sqrt(F)`.
    pub fn holonomy_bound_constant(&self) -> f64 {
        (self.faces.len() as f64).sqrt()
    }
}

fn subdivide(c: &SurfaceComplex) -> SurfaceComplex {
    let v0 = c.vertex_count;
    let e0 = c.edges.len();
    let mid = |e: usize| v0 + e;
    let center = |f: usize| v0 + e0 + f;

    let mut edges = Vec::with_capacity(2 * e0);
    let mut edge_words = Vec::with_capacity(2 * e0);
    for (e, edge) in c.edges.iter().enumerate() {
        edges.push(Edge { tail: edge.tail, head: mid(e) });
        edges.push(Edge { tail: mid(e), head: edge.head });
        edge_words.push(c.edge_words[e].clone());
        edge_words.push(Word::empty());
    }
    let split = |w: &Word| -> Word {
        let mut out = Word::empty();
        for &l in w.letters() {
            let (a, b) = (2 * l.generator, 2 * l.generator + 1);
            if l.inverted {
                out.push(Letter::new(b, -1));
                out.push(Letter::new(a, -1));
            } else {
                out.push(Letter::new(a, 1));
                out.push(Letter::new(b, 1));
            }
        }
        out
    };
    let letter_word = |l: Letter, words: &[Word]| -> Word {
        if l.inverted {
            words[l.generator].inverse()
        } else {
            words[l.generator].clone()
        }
    };

    let mut faces = Vec::new();
    for (f, boundary) in c.faces.iter().enumerate() {
        let walk = split(boundary);
        let len = walk.len();
        let spoke0 = edges.len();
        // Spoke i runs from the center to the start of boundary letter i.
        let mut spoke_word = Word::empty();
        for &l in walk.letters() {
            let corner = {
                let e = edges[l.generator];
                if l.inverted {
                    e.head
                } else {
                    e.tail
                }
            };
            edges.push(Edge { tail: center(f), head: corner });
            edge_words.push(spoke_word.clone());
            spoke_word = spoke_word.concat(&letter_word(l, &edge_words)).reduced();
        }
        for (i, &l) in walk.letters().iter().enumerate() {
            faces.push(Word::from_letters(vec![
                Letter::new(spoke0 + i, 1),
                l,
                Letter::new(spoke0 + (i + 1) % len, -1),
            ]));
        }
    }
    let generator_loops = c.generator_loops.iter().map(split).collect();
    let mut out = SurfaceComplex {
        presentation: c.presentation.clone(),
        level: c.level + 1,
        vertex_count: v0 + e0 + c.faces.len(),
        basepoint: c.basepoint,
        edges,
        faces,
        generator_loops,
        edge_words,
        tree_edges: Vec::new(),
        loop_words: Vec::new(),
    };
    out.compute_tree_gauge();
    out
}

impl SurfaceComplex {
    fn level_zero(p: &SurfacePresentation) -> Self {
        let m = p.generator_count();
        let mut c = SurfaceComplex {
            presentation: p.clone(),
            level: 0,
            vertex_count: 1,
            basepoint: 0,
            edges: vec![Edge { tail: 0, head: 0 }; m],
            faces: vec![p.relator().clone()],
            generator_loops: (0..m).map(Word::generator).collect(),
            edge_words: (0..m).map(Word::generator).collect(),
            tree_edges: Vec::new(),
            loop_words: Vec::new(),
        };
        c.compute_tree_gauge();
        c
    }

    /// Incident edges of every vertex as `(edge, neighbor, traversed_forward)`,
    /// in increasing edge order.
    fn adjacency(&self) -> Vec<Vec<(usize, usize, bool)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (e, edge) in self.edges.iter().enumerate() {
            adj[edge.tail].push((e, edge.head, true));
            if edge.head != edge.tail {
                adj[edge.head].push((e, edge.tail, false));
            }
        }
        adj
    }

    /// Breadth-first order from the basepoint: `(vertex, Some((edge, parent, forward)))`.
    fn bfs_tree(&self) -> Vec<(usize, Option<(usize, usize, bool)>)> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertex_count];
        let mut order = vec![(self.basepoint, None)];
        seen[self.basepoint] = true;
        let mut queue = VecDeque::from([self.basepoint]);
        while let Some(u) = queue.pop_front() {
            for &(e, v, forward) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    order.push((v, Some((e, u, forward))));
                    queue.push_back(v);
                }
            }
        }
        order
    }

    fn compute_tree_gauge(&mut self) {
        let mut tree = vec![false; self.edges.len()];
        let mut path_word = vec![Word::empty(); self.vertex_count];
        for (v, parent) in self.bfs_tree() {
            if let Some((e, u, forward)) = parent {
                tree[e] = true;
                let step = if forward {
                    self.edge_words[e].clone()
                } else {
                    self.edge_words[e].inverse()
                };
                path_word[v] = path_word[u].concat(&step).reduced();
            }
        }
        self.loop_words = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                path_word[edge.tail]
                    .concat(&self.edge_words[e])
                    .concat(&path_word[edge.head].inverse())
                    .reduced()
            })
            .collect();
        self.tree_edges = tree;
    }
}

/// Cell structure of the surface at subdivision depth `level`.
pub fn build_complex(presentation: &SurfacePresentation, level: u32) -> SurfaceComplex {
    let mut c = SurfaceComplex::level_zero(presentation);
    for _ in 0..level {
        c = subdivide(&c);
    }
    c
}

/// One unitary label per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConnectionJson", into = "ConnectionJson")]
pub struct LatticeConnection {
    complex: Arc<SurfaceComplex>,
    labels: Vec<Unitary>,
}

#[derive(Serialize, Deserialize)]
struct ConnectionJson {
    complex: SurfaceComplex,
    labels: Vec<Unitary>,
}

impl From<LatticeConnection> for ConnectionJson {
    fn from(a: LatticeConnection) -> Self {
        Self {
            complex: (*a.complex).clone(),
            labels: a.labels,
        }
    }
}

impl TryFrom<ConnectionJson> for LatticeConnection {
    type Error = Error;

    fn try_from(j: ConnectionJson) -> Result<Self> {
        LatticeConnection::new(Arc::new(j.complex), j.labels)
    }
}

impl LatticeConnection {
    pub fn new(complex: Arc<SurfaceComplex>, labels: Vec<Unitary>) -> Result<Self> {
        if labels.len() != complex.edge_count() {
            return Err(Error::Precondition(format!(
                "expected {} edge labels, got {}",
                complex.edge_count(),
                labels.len()
            )));
        }
        let n = labels.first().map_or(0, Unitary::dim);
        if let Some(bad) = labels.iter().find(|u| u.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self { complex, labels })
    }

    pub fn identity(complex: Arc<SurfaceComplex>, n: usize) -> Self {
        let labels = vec![Unitary::identity(n); complex.edge_count()];
        Self { complex, labels }
    }

    pub fn haar(complex: Arc<SurfaceComplex>, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels = (0..complex.edge_count())
            .map(|_| haar_random_with(n, &mut rng))
            .collect();
        Self { complex, labels }
    }

    pub fn complex(&self) -> &Arc<SurfaceComplex> {
        &self.complex
    }

    pub fn labels(&self) -> &[Unitary] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.first().map_or(0, Unitary::dim)
    }

    pub fn max_entry_diff(&self, other: &LatticeConnection) -> f64 {
        self.labels
            .iter()
            .zip(&other.labels)
            .map(|(a, b)| a.max_entry_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Transport around face `face`, starting at its first corner.
pub fn plaquette(a: &LatticeConnection, face: usize) -> Result<Unitary> {
    let boundary = a.complex.faces.get(face).ok_or(Error::Precondition(format!(
        "face {face} out of range for {} faces",
        a.complex.face_count()
    )))?;
    evaluate_word(boundary, &a.labels)
}

/// `sum_faces ||plaquette - I||_F^2`
pub fn ym_energy(a: &LatticeConnection) -> f64 {
    flow::energy(&a.complex.faces, &a.labels).expect("faces index valid edges")
}

/// Largest `||plaquette - I||_F` over faces.
pub fn max_plaquette_defect(a: &LatticeConnection) -> f64 {
    let n = a.dim();
    (0..a.complex.face_count())
        .map(|f| {
            let p = plaquette(a, f).expect("face index in range").into_matrix();
            (p - CMatrix::identity(n, n)).norm()
        })
        .fold(0.0, f64::max)
}

pub fn ym_flow(a0: &LatticeConnection, tol: f64, max_iter: usize) -> Result<(LatticeConnection, FlowReport)> {
    ym_flow_with(a0, &FlowOptions::new(tol, max_iter), None)
}

/// Gradient descent of [`ym_energy`] over all edge labels; stops once
/// `sqrt(energy) <= tol`.
pub fn ym_flow_with(
    a0: &LatticeConnection,
    opts: &FlowOptions,
    progress: Progress<'_>,
) -> Result<(LatticeConnection, FlowReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tol must be positive, got {}", opts.tol)));
    }
    let frozen = vec![false; a0.labels.len()];
    let run = flow::minimize(&a0.complex.faces, a0.labels.clone(), &frozen, opts, progress)?;
    let out = LatticeConnection {
        complex: a0.complex.clone(),
        labels: run.images,
    };
    if run.converged {
        Ok((out, run.report))
    } else {
        Err(Error::LatticeNotConverged(Box::new(LatticeFlowFailure {
            best: out,
            report: run.report,
        })))
    }
}

/// One unitary per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeTransform {
    #[serde(skip)]
    complex: Option<Arc<SurfaceComplex>>,
    values: Vec<Unitary>,
}

impl GaugeTransform {
    pub fn new(complex: Arc<SurfaceComplex>, values: Vec<Unitary>) -> Result<Self> {
        if values.len() != complex.vertex_count() {
            return Err(Error::Precondition(format!(
                "expected {} vertex values, got {}",
                complex.vertex_count(),
                values.len()
            )));
        }
        Ok(Self {
            complex: Some(complex),
            values,
        })
    }

    pub fn identity(complex: Arc<SurfaceComplex>, n: usize) -> Self {
        let values = vec![Unitary::identity(n); complex.vertex_count()];
        Self {
            complex: Some(complex),
            values,
        }
    }

    /// Haar-random values; with `based` the basepoint value is the identity.
    pub fn haar(complex: Arc<SurfaceComplex>, n: usize, seed: u64, based: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<Unitary> = (0..complex.vertex_count())
            .map(|_| haar_random_with(n, &mut rng))
            .collect();
        if based {
            values[complex.basepoint()] = Unitary::identity(n);
        }
        Self {
            complex: Some(complex),
            values,
        }
    }

    pub fn values(&self) -> &[Unitary] {
        &self.values
    }

    pub fn at_basepoint(&self) -> &Unitary {
        let base = self.complex.as_ref().map_or(0, |c| c.basepoint());
        &self.values[base]
    }

    pub fn is_based(&self) -> bool {
        let u = self.at_basepoint();
        u.max_entry_diff(&Unitary::identity(u.dim())) <= 1e-10
    }
}

/// `A(e) -> phi(tail) A(e) phi(head)^{-1}`
pub fn gauge_act(phi: &GaugeTransform, a: &LatticeConnection) -> Result<LatticeConnection> {
    if let Some(c) = &phi.complex {
        if !Arc::ptr_eq(c, &a.complex) && **c != *a.complex {
            return Err(Error::Precondition("gauge transform lives on a different complex".into()));
        }
    }
    if phi.values.len() != a.complex.vertex_count() {
        return Err(Error::Precondition("gauge transform has the wrong vertex count".into()));
    }
    let n = a.dim();
    if let Some(bad) = phi.values.iter().find(|u| u.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.dim(),
        });
    }
    let labels = a
        .labels
        .iter()
        .zip(&a.complex.edges)
        .map(|(l, e)| {
            let m = phi.values[e.tail].matrix() * l.matrix() * phi.values[e.head].matrix().adjoint();
            Unitary::from_matrix_unchecked(m)
        })
        .collect();
    Ok(LatticeConnection {
        complex: a.complex.clone(),
        labels,
    })
}

/// Transport around each generator loop. A representation of the surface
/// group when `a` is flat.
pub fn holonomy_rep(a: &LatticeConnection) -> Representation {
    let images = a
        .complex
        .generator_loops
        .iter()
        .map(|w| evaluate_word(w, &a.labels).expect("loops index valid edges"))
        .collect();
    Representation::new(a.complex.presentation.clone(), images)
        .expect("one loop per generator, common dimension")
}

/// Residual screen for [`flat_from_rep`].
pub const FLAT_FROM_REP_TOL: f64 = 1e-8;

/// Tree-gauge flat connection with holonomy `rho`: spanning-tree edges carry
/// the identity and every other edge carries `rho` of the based loop it
/// closes.
pub fn flat_from_rep(rho: &Representation, complex: Arc<SurfaceComplex>) -> Result<LatticeConnection> {
    if rho.presentation() != complex.presentation() {
        return Err(Error::PresentationMismatch);
    }
    let res = rho.residual();
    if res > FLAT_FROM_REP_TOL {
        return Err(Error::Precondition(format!(
            "representation residual {res:e} exceeds {FLAT_FROM_REP_TOL:e}"
        )));
    }
    let labels = complex
        .loop_words
        .iter()
        .map(|w| evaluate_word(w, rho.images()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LatticeConnection { complex, labels })
}

/// Based gauge transform carrying `a` to `b`, built by transporting along
/// the spanning tree; `None` when the holonomies differ by more than `tol`.
pub fn based_gauge_equiv(a: &LatticeConnection, b: &LatticeConnection, tol: f64) -> Result<Option<GaugeTransform>> {
    if !Arc::ptr_eq(&a.complex, &b.complex) && *a.complex != *b.complex {
        return Err(Error::Precondition("connections live on different complexes".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    for (name, c) in [("first", a), ("second", b)] {
        let d = max_plaquette_defect(c);
        if d > tol {
            return Err(Error::Precondition(format!(
                "{name} connection is not flat (plaquette defect {d:e} > {tol:e})"
            )));
        }
    }
    let (ha, hb) = (holonomy_rep(a), holonomy_rep(b));
    if ha.distance(&hb)? > tol {
        return Ok(None);
    }
    let complex = &a.complex;
    let n = a.dim();
    let mut values = vec![Unitary::identity(n); complex.vertex_count()];
    // phi(tail) A phi(head)^{-1} = B along every tree edge.
    for (v, parent) in complex.bfs_tree() {
        if let Some((e, u, forward)) = parent {
            let (la, lb) = (a.labels[e].matrix(), b.labels[e].matrix());
            let m = if forward {
                lb.adjoint() * values[u].matrix() * la
            } else {
                lb * values[u].matrix() * la.adjoint()
            };
            values[v] = Unitary::from_matrix_unchecked(m);
        }
    }
    Ok(Some(GaugeTransform {
        complex: Some(complex.clone()),
        values,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::{make_presentation, SurfaceKind};
    use crate::rep_variety::sample_flat;
    use crate::unitary::{haar_random, C64};

    fn pres(kind: SurfaceKind) -> SurfacePresentation {
        make_presentation(kind).unwrap()
    }

    fn check_closed(c: &SurfaceComplex) {
        for f in c.faces() {
            assert!(c.closed_walk_start(f).is_some(), "face {f:?} is not closed");
        }
        for l in c.generator_loops() {
            assert_eq!(c.closed_walk_start(l), Some(c.basepoint()));
        }
    }

    #[test]
    fn level_zero_counts() {
        for kind in [SurfaceKind::torus(), SurfaceKind::klein_bottle()] {
            let c = build_complex(&pres(kind), 0);
            assert_eq!((c.vertex_count(), c.edge_count(), c.face_count()), (1, 2, 1));
            assert_eq!(c.euler_characteristic(), 0);
            assert_eq!(&c.faces()[0], pres(kind).relator());
            check_closed(&c);
        }
    }

    #[test]
    fn subdivision_preserves_euler_characteristic() {
        let kinds = [
            SurfaceKind::torus(),
            SurfaceKind::Orientable { g: 2 },
            SurfaceKind::Orientable { g: 3 },
            SurfaceKind::klein_bottle(),
            SurfaceKind::Nonorientable { k: 3 },
        ];
        for kind in kinds {
            for level in 0..3 {
                let c = build_complex(&pres(kind), level);
                assert_eq!(c.euler_characteristic(), kind.euler_characteristic());
                check_closed(&c);
                assert_eq!(c.tree_edges().iter().filter(|&&t| t).count(), c.vertex_count() - 1);
            }
        }
    }

    #[test]
    fn torus_level_one_counts() {
        // V = 1 + 2 + 1, E = 2*2 + 8 spokes, F = 8 triangles.
        let c = build_complex(&pres(SurfaceKind::torus()), 1);
        assert_eq!((c.vertex_count(), c.edge_count(), c.face_count()), (4, 12, 8));
    }

    #[test]
    fn loop_words_vanish_on_tree() {
        let c = build_complex(&pres(SurfaceKind::Orientable { g: 2 }), 2);
        for (w, &t) in c.loop_words().iter().zip(c.tree_edges()) {
            if t {
                assert!(w.is_empty());
            }
        }
        // The original generators stay nontrivial.
        assert!(c.loop_words().iter().filter(|w| !w.is_empty()).count() >= 4);
    }

    #[test]
    fn plaquette_examples() {
        let p = pres(SurfaceKind::torus());
        let c = Arc::new(build_complex(&p, 0));
        let id = LatticeConnection::identity(c.clone(), 2);
        assert_eq!(plaquette(&id, 0).unwrap(), Unitary::identity(2));
        let labels = vec![haar_random(2, 1), haar_random(2, 2)];
        let a = LatticeConnection::new(c, labels.clone()).unwrap();
        let expect = evaluate_word(p.relator(), &labels).unwrap();
        assert!(plaquette(&a, 0).unwrap().max_entry_diff(&expect) == 0.0);
        assert!(plaquette(&a, 1).is_err());
    }

    #[test]
    fn plaquette_conjugated_by_walk_start() {
        let c = Arc::new(build_complex(&pres(SurfaceKind::klein_bottle()), 1));
        let a = LatticeConnection::haar(c.clone(), 2, 5);
        let phi = GaugeTransform::haar(c.clone(), 2, 6, false);
        let b = gauge_act(&phi, &a).unwrap();
        for f in 0..c.face_count() {
            let v = c.closed_walk_start(&c.faces()[f]).unwrap();
            let expect = plaquette(&a, f).unwrap().conjugate_by(&phi.values()[v]);
            assert!(plaquette(&b, f).unwrap().max_entry_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn ym_energy_examples() {
        let p = pres(SurfaceKind::torus());
        let c = Arc::new(build_complex(&p, 0));
        assert_eq!(ym_energy(&LatticeConnection::identity(c.clone(), 2)), 0.0);
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let x = Unitary::new(CMatrix::from_row_slice(2, 2, &[o, l, l, o])).unwrap();
        let z = Unitary::from_phases(&[0.0, std::f64::consts::PI]);
        let a = LatticeConnection::new(c, vec![x, z]).unwrap();
        assert!((ym_energy(&a) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn identity_gauge_is_noop_and_based_gauge_fixes_holonomy() {
        let c = Arc::new(build_complex(&pres(SurfaceKind::Orientable { g: 2 }), 1));
        let a = LatticeConnection::haar(c.clone(), 2, 9);
        let same = gauge_act(&GaugeTransform::identity(c.clone(), 2), &a).unwrap();
        assert!(same.max_entry_diff(&a) < 1e-15);
        let phi = GaugeTransform::haar(c.clone(), 2, 10, true);
        assert!(phi.is_based());
        let b = gauge_act(&phi, &a).unwrap();
        assert!(holonomy_rep(&b).max_entry_diff(&holonomy_rep(&a)) < 1e-10);
        assert!((ym_energy(&b) - ym_energy(&a)).abs() < 1e-10);
    }

    #[test]
    fn gauge_rejects_mismatched_inputs() {
        let c0 = Arc::new(build_complex(&pres(SurfaceKind::torus()), 0));
        let c1 = Arc::new(build_complex(&pres(SurfaceKind::torus()), 1));
        let a = LatticeConnection::identity(c1, 2);
        assert!(gauge_act(&GaugeTransform::identity(c0, 2), &a).is_err());
        let phi3 = GaugeTransform::identity(a.complex().clone(), 3);
        assert!(matches!(gauge_act(&phi3, &a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn holonomy_at_level_zero_reads_labels() {
        let c = Arc::new(build_complex(&pres(SurfaceKind::Orientable { g: 2 }), 0));
        let a = LatticeConnection::haar(c, 2, 3);
        let h = holonomy_rep(&a);
        assert_eq!(h.images(), a.labels());
        let id = LatticeConnection::identity(a.complex().clone(), 2);
        assert_eq!(holonomy_rep(&id).residual(), 0.0);
    }

    #[test]
    fn flat_from_rep_level_zero_uses_images_directly() {
        let p = pres(SurfaceKind::torus());
        let rho = sample_flat(&p, 2, 4, 1e-10).unwrap();
        let a = flat_from_rep(&rho, Arc::new(build_complex(&p, 0))).unwrap();
        assert_eq!(a.labels(), rho.images());
        let triv = Representation::trivial(p.clone(), 2);
        let id = flat_from_rep(&triv, Arc::new(build_complex(&p, 2))).unwrap();
        assert!(id.labels().iter().all(|l| *l == Unitary::identity(2)));
    }

    #[test]
    fn flat_from_rep_round_trips_at_level_two() {
        let p = pres(SurfaceKind::Orientable { g: 2 });
        let rho = sample_flat(&p, 2, 11, 1e-10).unwrap();
        let a = flat_from_rep(&rho, Arc::new(build_complex(&p, 2))).unwrap();
        assert!(holonomy_rep(&a).max_entry_diff(&rho) < 1e-12);
        assert!(ym_energy(&a).sqrt() <= rho.residual() + 1e-10);
    }

    #[test]
    fn flat_from_rep_rejects_non_flat_input() {
        let p = pres(SurfaceKind::torus());
        let rho = Representation::haar(p.clone(), 2, 1);
        assert!(matches!(
            flat_from_rep(&rho, Arc::new(build_complex(&p, 1))),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn based_gauge_equiv_recovers_transform() {
        let p = pres(SurfaceKind::klein_bottle());
        let c = Arc::new(build_complex(&p, 1));
        let rho = Representation::new(p, vec![Unitary::from_phases(&[0.4, -1.3]), Unitary::from_phases(&[2.0, 0.1])])
            .unwrap();
        // Diagonal images of x^2 y^2 = 1 need a product of squares equal to 1.
        let rho = {
            let z = rho.images()[0].clone();
            rho.with_images(vec![z.clone(), z.inverse()])
        };
        assert!(rho.residual() < 1e-15);
        let a = flat_from_rep(&rho, c.clone()).unwrap();
        let same = based_gauge_equiv(&a, &a, 1e-9).unwrap().unwrap();
        assert!(same.values().iter().all(|u| u.max_entry_diff(&Unitary::identity(2)) < 1e-15));
        let psi = GaugeTransform::haar(c.clone(), 2, 77, true);
        let b = gauge_act(&psi, &a).unwrap();
        let phi = based_gauge_equiv(&a, &b, 1e-9).unwrap().unwrap();
        assert!(phi.is_based());
        assert!(gauge_act(&phi, &a).unwrap().max_entry_diff(&b) < 1e-9);
    }

    #[test]
    fn complex_json_rebuilds_structure() {
        let c = build_complex(&pres(SurfaceKind::torus()), 1);
        let s = serde_json::to_string(&c).unwrap();
        let back: SurfaceComplex = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
