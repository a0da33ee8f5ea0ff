//! Harder-Narasimhan type combinatorics.
//!
//! A type of total rank `n` is a sequence `((n_1, k_1), ..., (n_r, k_r))`
//! of positive ranks and integer degrees with `sum n_i = n`, `sum k_i = 0`
//! and strictly decreasing slopes `k_i / n_i`. Its stratum has complex
//! codimension
//!
//! ```text
//! c(mu) = sum_{i>j} (n_i k_j - n_j k_i) + (g - 1) sum_{i>j} n_i n_j
//! ```
//!
//! All arithmetic is exact integer arithmetic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::{SurfaceKind, SurfacePresentation};

/// An admissible Harder-Narasimhan type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HnType {
    pairs: Vec<(i64, i64)>,
}

impl HnType {
    pub fn new(pairs: Vec<(i64, i64)>) -> Result<Self> {
        let n = pairs.iter().map(|p| p.0).sum();
        if !is_admissible(&pairs, n) {
            return Err(Error::Inadmissible(format_pairs(&pairs)));
        }
        Ok(Self { pairs })
    }

    /// The semi-stable type `((n, 0))`.
    pub fn semistable(n: i64) -> Self {
        Self { pairs: vec![(n, 0)] }
    }

    pub fn pairs(&self) -> &[(i64, i64)] {
        &self.pairs
    }

    pub fn rank(&self) -> i64 {
        self.pairs.iter().map(|p| p.0).sum()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `sum_{i>j} (n_i k_j - n_j k_i)`
    pub fn degree_term(&self) -> i64 {
        let p = &self.pairs;
        let mut s = 0;
        for i in 0..p.len() {
            for j in 0..i {
                s += p[i].0 * p[j].1 - p[j].0 * p[i].1;
            }
        }
        s
    }

    /// `sum_{i>j} n_i n_j`
    pub fn rank_term(&self) -> i64 {
        let p = &self.pairs;
        let mut s = 0;
        for i in 0..p.len() {
            for j in 0..i {
                s += p[i].0 * p[j].0;
            }
        }
        s
    }
}

fn format_pairs(pairs: &[(i64, i64)]) -> String {
    let inner: Vec<String> = pairs.iter().map(|(n, k)| format!("({n},{k})")).collect();
    format!("({})", inner.join(","))
}

impl fmt::Display for HnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_pairs(&self.pairs))
    }
}

/// Positive ranks summing to `n`, degrees summing to zero and strictly
/// decreasing slopes (compared by cross-multiplication).
pub fn is_admissible(seq: &[(i64, i64)], n: i64) -> bool {
    if seq.is_empty() || seq.iter().any(|p| p.0 <= 0) {
        return false;
    }
    if seq.iter().map(|p| p.0).sum::<i64>() != n || seq.iter().map(|p| p.1).sum::<i64>() != 0 {
        return false;
    }
    seq.windows(2).all(|w| w[0].1 * w[1].0 > w[1].1 * w[0].0)
}

/// Complex codimension `c(mu)` of the stratum of type `mu` over genus `g`.
pub fn codim_complex(mu: &HnType, g: i64) -> Result<i64> {
    if g < 0 {
        return Err(Error::Precondition(format!("genus must be non-negative, got {g}")));
    }
    if !is_admissible(&mu.pairs, mu.rank()) {
        return Err(Error::Inadmissible(mu.to_string()));
    }
    Ok(mu.degree_term() + (g - 1) * mu.rank_term())
}

/// Every admissible type of total rank `n` with `c(mu) <= max_codim`,
/// sorted lexicographically.
///
/// Complete: each pairwise degree term is positive and the degree sum is at
/// least `n max(k_1, -k_r) >= |k_i|`, so for `g >= 1` no degree exceeds
/// `max_codim`; for `g = 0` the negative rank term is absorbed by widening
/// the bound by `n(n-1)/2`.
pub fn enumerate_admissible(n: i64, g: i64, max_codim: i64) -> Result<Vec<HnType>> {
    if n < 1 {
        return Err(Error::Precondition(format!("rank must be positive, got {n}")));
    }
    if g < 0 {
        return Err(Error::Precondition(format!("genus must be non-negative, got {g}")));
    }
    let mut out = Vec::new();
    if max_codim < 0 && g >= 1 {
        return Ok(out);
    }
    let slack = if g == 0 { n * (n - 1) / 2 } else { 0 };
    let bound = max_codim.max(0) + slack;
    let mut search = Search {
        n,
        g,
        max_codim,
        bound,
        stack: Vec::new(),
        out: &mut out,
    };
    search.extend(0, 0, 0);
    out.sort();
    Ok(out)
}

struct Search<'a> {
    n: i64,
    g: i64,
    max_codim: i64,
    bound: i64,
    stack: Vec<(i64, i64)>,
    out: &'a mut Vec<HnType>,
}

impl Search<'_> {
    /// `used` rank and `deg` degree already placed; `partial` is the codim
    /// contribution of the placed pairs.
    fn extend(&mut self, used: i64, deg: i64, partial: i64) {
        let remaining = self.n - used;
        if remaining == 0 {
            if deg == 0 && partial <= self.max_codim {
                self.out.push(HnType {
                    pairs: self.stack.clone(),
                });
            }
            return;
        }
        for ni in 1..=remaining {
            for ki in -self.bound..=self.bound {
                if let Some(&(np, kp)) = self.stack.last() {
                    // Strictly smaller slope than the previous pair.
                    if ki * np >= kp * ni {
                        continue;
                    }
                }
                let rest = remaining - ni;
                let total = deg + ki;
                if rest == 0 && total != 0 {
                    continue;
                }
                // Later pairs have slope < ki/ni, so their degrees sum to
                // less than rest * ki / ni; they must cancel `total`.
                if rest > 0 && -total * ni >= ki * rest {
                    continue;
                }
                let added: i64 = self
                    .stack
                    .iter()
                    .map(|&(nj, kj)| ni * kj - nj * ki + (self.g - 1) * ni * nj)
                    .sum();
                let next = partial + added;
                if self.g >= 1 && next > self.max_codim {
                    continue;
                }
                self.stack.push((ni, ki));
                self.extend(used + ni, total, next);
                self.stack.pop();
            }
        }
    }
}

/// Real minimum codimension among non-semi-stable strata
/// (types with at least two pairs) with its minimizing types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinCodim {
    pub real_codim: i64,
    pub argmins: Vec<HnType>,
}

/// The closed form `2 g (n - 1) + 2`.
pub fn min_codim_formula(n: i64, g: i64) -> i64 {
    2 * g * (n - 1) + 2
}

/// Brute-force minimum of `2 c(mu)` over non-semi-stable types.
pub fn min_nonsemistable_codim(n: i64, g: i64) -> Result<MinCodim> {
    if n < 2 {
        return Err(Error::Precondition(format!(
            "rank {n} has no non-semi-stable stratum (needs n >= 2)"
        )));
    }
    if g < 1 {
        return Err(Error::Precondition(format!("genus must be at least 1, got {g}")));
    }
    // Any type gives an upper bound; ((1,1),(n-1,-1)) is a convenient one.
    let witness = HnType::new(vec![(1, 1), (n - 1, -1)])?;
    let budget = codim_complex(&witness, g)? + 2;
    let candidates: Vec<(i64, HnType)> = enumerate_admissible(n, g, budget)?
        .into_iter()
        .filter(|mu| mu.len() >= 2)
        .map(|mu| (codim_complex(&mu, g).expect("enumerated types are admissible"), mu))
        .collect();
    let min = candidates.iter().map(|c| c.0).min().expect("witness is enumerated");
    let argmins = candidates.into_iter().filter(|c| c.0 == min).map(|c| c.1).collect();
    Ok(MinCodim {
        real_codim: 2 * min,
        argmins,
    })
}

/// Values of the two sums bounded below in the minimum-codimension argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub n: i64,
    /// `sum_{i>j} (n_i k_j - n_j k_i)`, must be `>= n`.
    pub degree_term: i64,
    /// `sum_{i>j} n_i n_j`, must be `>= n - 1`.
    pub rank_term: i64,
    pub degree_ok: bool,
    pub rank_ok: bool,
}

impl InequalityReport {
    pub fn holds(&self) -> bool {
        self.degree_ok && self.rank_ok
    }
}

pub fn verify_codim_inequalities(mu: &HnType) -> Result<InequalityReport> {
    if !is_admissible(&mu.pairs, mu.rank()) {
        return Err(Error::Inadmissible(mu.to_string()));
    }
    if mu.len() < 2 {
        return Err(Error::Precondition("semi-stable type has no inequalities to check".into()));
    }
    let n = mu.rank();
    let degree_term = mu.degree_term();
    let rank_term = mu.rank_term();
    Ok(InequalityReport {
        n,
        degree_term,
        rank_term,
        degree_ok: degree_term >= n,
        rank_ok: rank_term >= n - 1,
    })
}

/// Minimum of `sum_{i>j} p_i p_j` over partitions of `n` into exactly `r`
/// positive parts, returned with parts in increasing order.
pub fn min_partition_product(n: u32, r: u32) -> Result<(Vec<u32>, u64)> {
    if r < 2 || r > n {
        return Err(Error::Precondition(format!("need 2 <= r <= n, got n={n}, r={r}")));
    }
    let mut best: Option<(Vec<u32>, u64)> = None;
    let mut parts = Vec::with_capacity(r as usize);
    partitions(n, r, 1, &mut parts, &mut |p| {
        // (sum p)^2 - sum p^2 = 2 sum_{i>j} p_i p_j
        let sq: u64 = p.iter().map(|&x| (x as u64) * (x as u64)).sum();
        let value = ((n as u64) * (n as u64) - sq) / 2;
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((p.to_vec(), value));
        }
    });
    Ok(best.expect("r <= n admits a partition"))
}

/// Non-decreasing partitions of `n` into `r` parts, each at least `min`.
fn partitions(n: u32, r: u32, min: u32, parts: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
    if r == 1 {
        if n >= min {
            parts.push(n);
            visit(parts);
            parts.pop();
        }
        return;
    }
    let mut x = min;
    while x * r <= n {
        parts.push(x);
        partitions(n - x, r - 1, x, parts, visit);
        parts.pop();
        x += 1;
    }
}

/// Connectivity of the space of flat connections of rank `n` over an
/// aspherical surface: `2g(n-1)` orientable; for `k` crosscaps the oriented
/// double cover has genus `k - 1`, giving `(k-1)(n-1) - 1`.
pub fn connectivity_bound(presentation: &SurfacePresentation, n: i64) -> Result<i64> {
    if n < 1 {
        return Err(Error::Precondition(format!("rank must be positive, got {n}")));
    }
    presentation.kind().require_aspherical()?;
    Ok(match presentation.kind() {
        SurfaceKind::Orientable { g } => 2 * g as i64 * (n - 1),
        SurfaceKind::Nonorientable { k } => (k as i64 - 1) * (n - 1) - 1,
    })
}

/// One row of the minimum-codimension table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodimRow {
    pub n: i64,
    pub g: i64,
    pub real_min_codim: i64,
    pub formula_value: i64,
    #[serde(rename = "match")]
    pub matches: bool,
    pub argmin_count: usize,
}

pub fn codim_table(ns: impl IntoIterator<Item = i64> + Clone, gs: impl IntoIterator<Item = i64> + Clone) -> Result<Vec<CodimRow>> {
    let mut rows = Vec::new();
    for n in ns {
        for g in gs.clone() {
            let m = min_nonsemistable_codim(n, g)?;
            let f = min_codim_formula(n, g);
            rows.push(CodimRow {
                n,
                g,
                real_min_codim: m.real_codim,
                formula_value: f,
                matches: m.real_codim == f,
                argmin_count: m.argmins.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::make_presentation;

    fn mu(pairs: &[(i64, i64)]) -> HnType {
        HnType::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        assert!(is_admissible(&[(4, 0)], 4));
        assert!(is_admissible(&[(1, 1), (1, -1)], 2));
        assert!(!is_admissible(&[(1, -1), (1, 1)], 2));
        assert!(!is_admissible(&[(1, 1), (1, 1)], 2));
        assert!(!is_admissible(&[(1, 0), (1, 0)], 2));
        assert!(!is_admissible(&[(2, 1), (1, -1)], 2));
        assert!(!is_admissible(&[], 0));
        assert!(!is_admissible(&[(0, 0), (2, 0)], 2));
    }

    #[test]
    fn codim_examples() {
        for g in 0..5 {
            assert_eq!(codim_complex(&HnType::semistable(3), g).unwrap(), 0);
        }
        assert_eq!(codim_complex(&mu(&[(1, 1), (2, -1)]), 2).unwrap(), 5);
        assert_eq!(codim_complex(&mu(&[(1, 1), (1, 0), (1, -1)]), 1).unwrap(), 4);
        let bad = HnType {
            pairs: vec![(1, -1), (1, 1)],
        };
        assert!(matches!(codim_complex(&bad, 1), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn enumeration_small_cases() {
        assert_eq!(enumerate_admissible(1, 3, 10).unwrap(), vec![HnType::semistable(1)]);
        let got = enumerate_admissible(2, 1, 10).unwrap();
        let mut expect = vec![HnType::semistable(2)];
        expect.extend((1..=5).map(|k| mu(&[(1, k), (1, -k)])));
        expect.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn min_codim_examples() {
        assert_eq!(min_nonsemistable_codim(3, 2).unwrap().real_codim, 10);
        let m = min_nonsemistable_codim(2, 1).unwrap();
        assert_eq!(m.real_codim, 4);
        assert_eq!(m.argmins, vec![mu(&[(1, 1), (1, -1)])]);
        assert_eq!(min_nonsemistable_codim(6, 4).unwrap().real_codim, 42);
        assert!(min_nonsemistable_codim(1, 2).is_err());
        assert!(min_nonsemistable_codim(3, 0).is_err());
    }

    #[test]
    fn inequality_examples() {
        let r = verify_codim_inequalities(&mu(&[(1, 1), (1, -1)])).unwrap();
        assert_eq!((r.degree_term, r.rank_term), (2, 1));
        assert!(r.holds());
        for n in 2..8 {
            let r = verify_codim_inequalities(&mu(&[(1, 1), (n - 1, -1)])).unwrap();
            assert_eq!((r.degree_term, r.rank_term), (n, n - 1));
        }
        assert!(verify_codim_inequalities(&HnType::semistable(3)).is_err());
    }

    #[test]
    fn partition_examples() {
        assert_eq!(min_partition_product(5, 2).unwrap(), (vec![1, 4], 4));
        assert_eq!(min_partition_product(2, 2).unwrap(), (vec![1, 1], 1));
        assert_eq!(min_partition_product(5, 3).unwrap(), (vec![1, 1, 3], 7));
        assert!(min_partition_product(5, 1).is_err());
        assert!(min_partition_product(5, 6).is_err());
    }

    #[test]
    fn connectivity_examples() {
        let g2 = make_presentation(SurfaceKind::Orientable { g: 2 }).unwrap();
        let t = make_presentation(SurfaceKind::torus()).unwrap();
        let kb = make_presentation(SurfaceKind::klein_bottle()).unwrap();
        let rp2 = make_presentation(SurfaceKind::Nonorientable { k: 1 }).unwrap();
        assert_eq!(connectivity_bound(&g2, 3).unwrap(), 8);
        assert_eq!(connectivity_bound(&t, 2).unwrap(), 2);
        assert_eq!(connectivity_bound(&kb, 3).unwrap(), 1);
        assert_eq!(connectivity_bound(&g2, 1).unwrap(), 0);
        assert_eq!(connectivity_bound(&kb, 1).unwrap(), -1);
        assert!(connectivity_bound(&rp2, 2).is_err());
    }

    #[test]
    fn json_of_type_is_pair_list() {
        let m = mu(&[(1, 1), (2, -1)]);
        assert_eq!(serde_json::to_string(&m).unwrap(), "[[1,1],[2,-1]]");
        assert_eq!(m.to_string(), "((1,1),(2,-1))");
    }
}
