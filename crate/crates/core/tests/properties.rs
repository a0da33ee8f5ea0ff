mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::*;
use defk_core::hn_strata::{codim_complex, enumerate_admissible, min_partition_product, HnType};
use defk_core::kcalc::{cokernel, k_topological, kdef_groups, smith_normal_form, FgAbelianGroup, IntMatrix};
use defk_core::lattice::{build_complex, gauge_act, holonomy_rep, ym_energy, GaugeTransform, LatticeConnection};
use defk_core::presentation::{evaluate_word, make_presentation, SurfaceKind};
use defk_core::rep_variety::{block_sum, fingerprint, default_probe_words, fingerprint_distance, Representation};
use defk_core::unitary::{dist_frob, geodesic, haar_random, project_unitary, unitarity_defect, CMatrix};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn small_matrix(max_rows: usize, max_cols: usize, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(move |(r, c)| {
        prop::collection::vec(prop::collection::vec(-bound..=bound, c), r)
    })
}

fn det_i64(m: &[Vec<i64>]) -> i64 {
    match m.len() {
        0 => 1,
        1 => m[0][0],
        n => (0..n)
            .map(|c| {
                let minor: Vec<Vec<i64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &x)| x).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1 } else { -1 };
                sign * m[0][c] * det_i64(&minor)
            })
            .sum(),
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Index of the column lattice in `Z^rows` as the gcd of maximal minors
/// (zero when the lattice is not of full rank).
fn lattice_index(m: &[Vec<i64>]) -> i64 {
    let rows = m.len();
    let cols = m[0].len();
    subsets(cols, rows).into_iter().fold(0i64, |g, cs| {
        let minor: Vec<Vec<i64>> = m.iter().map(|row| cs.iter().map(|&c| row[c]).collect()).collect();
        g.gcd(&det_i64(&minor))
    })
}

/// `#{x in Z^r / L : d x = 0}` for every divisor `d` of the index, found by
/// enumerating the subgroup `L / D Z^r` of `(Z/D)^r`.
fn torsion_counts(m: &[Vec<i64>], index: i64) -> Vec<(i64, usize)> {
    let r = m.len();
    let d = index as usize;
    let size = d.pow(r as u32);
    let encode = |v: &[usize]| v.iter().fold(0, |acc, &x| acc * d + x);
    let decode = |mut code: usize| {
        let mut v = vec![0usize; r];
        for slot in v.iter_mut().rev() {
            *slot = code % d;
            code /= d;
        }
        v
    };
    let gens: Vec<Vec<usize>> = (0..m[0].len())
        .map(|c| (0..r).map(|i| m[i][c].rem_euclid(index) as usize).collect())
        .collect();
    let mut in_h = vec![false; size];
    in_h[0] = true;
    let mut queue = vec![0usize];
    while let Some(code) = queue.pop() {
        let v = decode(code);
        for g in &gens {
            let w: Vec<usize> = v.iter().zip(g).map(|(a, b)| (a + b) % d).collect();
            let c = encode(&w);
            if !in_h[c] {
                in_h[c] = true;
                queue.push(c);
            }
        }
    }
    let h_size = in_h.iter().filter(|&&b| b).count();
    (1..=index)
        .filter(|k| index % k == 0)
        .map(|k| {
            let hits = (0..size)
                .filter(|&code| {
                    let v = decode(code);
                    let w: Vec<usize> = v.iter().map(|&x| (x * k as usize) % d).collect();
                    in_h[encode(&w)]
                })
                .count();
            (k, hits / h_size)
        })
        .collect()
}

fn predicted_count(g: &FgAbelianGroup, k: i64) -> usize {
    g.torsion().iter().map(|&d| (d as i64).gcd(&k) as usize).product()
}

/// Every composition of `n` into `r` positive parts.
fn compositions(n: u32, r: u32) -> Vec<Vec<u32>> {
    if r == 1 {
        return vec![vec![n]];
    }
    (1..n)
        .flat_map(|x| {
            compositions(n - x, r - 1).into_iter().map(move |mut rest| {
                rest.insert(0, x);
                rest
            })
        })
        .filter(|c| c.len() == r as usize)
        .collect()
}

fn phi(p: &[u32]) -> u64 {
    let mut s = 0u64;
    for i in 0..p.len() {
        for j in 0..i {
            s += p[i] as u64 * p[j] as u64;
        }
    }
    s
}

/// Admissible types found in a plain box of ranks and degrees.
fn box_types(n: i64, g: i64, max_codim: i64, deg_box: i64) -> BTreeSet<Vec<(i64, i64)>> {
    fn degrees(r: usize, deg_box: i64, acc: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if acc.len() == r {
            out.push(acc.clone());
            return;
        }
        for k in -deg_box..=deg_box {
            acc.push(k);
            degrees(r, deg_box, acc, out);
            acc.pop();
        }
    }
    let mut out = BTreeSet::new();
    for comp in (1..=n as u32).flat_map(|r| compositions(n as u32, r)) {
        let r = comp.len();
        let mut all = Vec::new();
        degrees(r, deg_box, &mut Vec::new(), &mut all);
        for degs in all {
            if degs.iter().sum::<i64>() != 0 {
                continue;
            }
            let seq: Vec<(i64, i64)> = comp.iter().map(|&x| x as i64).zip(degs).collect();
            // k_i / n_i > k_{i+1} / n_{i+1}
            if !seq.windows(2).all(|w| w[0].1 * w[1].0 > w[1].1 * w[0].0) {
                continue;
            }
            let mut c = 0;
            for i in 0..r {
                for j in 0..i {
                    c += seq[i].0 * seq[j].1 - seq[j].0 * seq[i].1 + (g - 1) * seq[i].0 * seq[j].0;
                }
            }
            if c <= max_codim {
                out.insert(seq);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn snf_is_idempotent_and_factors_exactly(rows in small_matrix(4, 4, 9)) {
        let m = IntMatrix::from_rows(&rows).unwrap();
        let s = smith_normal_form(&m);
        prop_assert_eq!(s.u.mul(&m).mul(&s.v), s.d.clone());
        prop_assert!(s.u.determinant().abs() == BigInt::from(1));
        prop_assert!(s.v.determinant().abs() == BigInt::from(1));
        let diag = s.diagonal();
        for w in diag.windows(2) {
            prop_assert!(w[1].is_multiple_of(&w[0]));
        }
        prop_assert!(diag.iter().all(|x| x.is_positive()));
        let again = smith_normal_form(&s.d);
        prop_assert_eq!(again.d, s.d);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn cokernel_matches_quotient_enumeration(rows in small_matrix(3, 4, 4)) {
        let index = lattice_index(&rows).abs();
        let m = IntMatrix::from_rows(&rows).unwrap();
        let q = cokernel(&m);
        if index == 0 {
            // Not of full rank: a free summand survives.
            prop_assert!(q.rank() >= 1);
            return Ok(());
        }
        prop_assume!(index <= 24);
        prop_assert_eq!(q.rank(), 0);
        let order: u64 = q.torsion().iter().product();
        prop_assert_eq!(order as i64, index);
        for (k, count) in torsion_counts(&rows, index) {
            prop_assert_eq!(count, predicted_count(&q, k), "k = {}", k);
        }
    }

    #[test]
    fn cokernel_of_diagonal_is_direct_sum(ds in prop::collection::vec(0u64..12, 1..4)) {
        let r = ds.len();
        let mut rows = vec![vec![0i64; r]; r];
        for (i, &d) in ds.iter().enumerate() {
            rows[i][i] = d as i64;
        }
        let q = cokernel(&IntMatrix::from_rows(&rows).unwrap());
        prop_assert_eq!(q, FgAbelianGroup::new(0, &ds));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unitary_operations_stay_unitary(seed in any::<u64>(), n in 1usize..5, t in 0.0f64..1.0) {
        let mut r = rng(seed);
        let u = haar_random(n, seed);
        let v = haar_random(n, seed ^ 0x9e37);
        prop_assert!(unitarity_defect(u.matrix()) < 1e-12);
        prop_assert!(unitarity_defect(u.mul(&v).matrix()) < 1e-12);
        let p = project_unitary(&gaussian_matrix(n, &mut r)).unwrap();
        prop_assert!(unitarity_defect(p.matrix()) < 1e-10);
        if let Ok(w) = geodesic(&u, &v, t) {
            prop_assert!(unitarity_defect(w.matrix()) < 1e-10);
            let total = dist_frob(&u, &v).unwrap();
            prop_assert!(dist_frob(&u, &w).unwrap() <= total + 1e-9 || total > 1.9);
        }
        prop_assert!((dist_frob(&u, &v).unwrap() - dist_frob(&v, &u).unwrap()).abs() < 1e-12);
        let g = haar_random(n, seed.wrapping_add(1));
        let c1 = dist_frob(&u.conjugate_by(&g), &v.conjugate_by(&g)).unwrap();
        prop_assert!((c1 - dist_frob(&u, &v).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn word_evaluation_is_a_homomorphism(seed in any::<u64>(), n in 1usize..4, l1 in 0usize..7, l2 in 0usize..7) {
        let mut r = rng(seed);
        let images = haar_images(3, n, &mut r);
        let a = random_word(3, l1, &mut r);
        let b = random_word(3, l2, &mut r);
        let ab = evaluate_word(&a.concat(&b), &images).unwrap();
        let prod = evaluate_word(&a, &images).unwrap().mul(&evaluate_word(&b, &images).unwrap());
        prop_assert!(ab.max_entry_diff(&prod) < 1e-12);
        let inv = evaluate_word(&a.inverse(), &images).unwrap();
        prop_assert!(inv.max_entry_diff(&evaluate_word(&a, &images).unwrap().inverse()) < 1e-12);
        let red = evaluate_word(&a.reduced(), &images).unwrap();
        prop_assert!(red.max_entry_diff(&evaluate_word(&a, &images).unwrap()) < 1e-12);
        let mats: Vec<CMatrix> = images.iter().map(|u| u.matrix().clone()).collect();
        prop_assert!(defk_core::unitary::max_entry_diff(ab.matrix(), &ambient_eval(&a.concat(&b), &mats)) < 1e-12);
    }

    #[test]
    fn representation_invariants(seed in any::<u64>(), n in 1usize..4, which in 0usize..4) {
        let kinds = [SurfaceKind::torus(), SurfaceKind::Orientable { g: 2 }, SurfaceKind::klein_bottle(), SurfaceKind::Nonorientable { k: 3 }];
        let pres = make_presentation(kinds[which]).unwrap();
        let rho = Representation::haar(pres.clone(), n, seed);
        let psi = Representation::haar(pres.clone(), n, seed ^ 1);
        let g = haar_random(n, seed ^ 2);
        let conj = rho.conjugate(&g).unwrap();
        prop_assert!((conj.residual() - rho.residual()).abs() < 1e-10);
        let probes = default_probe_words(&pres);
        let f1 = fingerprint(&rho, &probes).unwrap();
        let f2 = fingerprint(&conj, &probes).unwrap();
        prop_assert!(fingerprint_distance(&f1, &f2) < 1e-8);
        let sum = block_sum(&rho, &psi).unwrap();
        let expect = (rho.residual().powi(2) + psi.residual().powi(2)).sqrt();
        prop_assert!((sum.residual() - expect).abs() < 1e-10);
        prop_assert_eq!(sum.rank(), 2 * n);
    }

    #[test]
    fn gauge_action_preserves_energy(seed in any::<u64>(), n in 1usize..4, level in 0u32..3, based in any::<bool>()) {
        let pres = make_presentation(SurfaceKind::Orientable { g: 2 }).unwrap();
        let c = Arc::new(build_complex(&pres, level));
        let a = LatticeConnection::haar(c.clone(), n, seed);
        let phi = GaugeTransform::haar(c, n, seed ^ 3, based);
        let b = gauge_act(&phi, &a).unwrap();
        prop_assert!((ym_energy(&b) - ym_energy(&a)).abs() < 1e-9 * (1.0 + ym_energy(&a)));
        let h0 = holonomy_rep(&a);
        let h1 = holonomy_rep(&b);
        let expected = h0.conjugate(phi.at_basepoint()).unwrap();
        prop_assert!(h1.max_entry_diff(&expected) < 1e-10);
    }
}

#[test]
fn enumeration_matches_box_search() {
    for n in 1..=4i64 {
        for g in 0..=2i64 {
            for max_codim in [0, 3, 6] {
                let ours: BTreeSet<Vec<(i64, i64)>> = enumerate_admissible(n, g, max_codim)
                    .unwrap()
                    .into_iter()
                    .map(|mu| mu.pairs().to_vec())
                    .collect();
                let brute = box_types(n, g, max_codim, max_codim + n * (n - 1) / 2 + 2);
                assert_eq!(ours, brute, "n={n} g={g} max_codim={max_codim}");
            }
        }
    }
}

#[test]
fn enumeration_invariants() {
    for n in 1..=6i64 {
        for g in 1..=4i64 {
            let types = enumerate_admissible(n, g, 24).unwrap();
            let set: BTreeSet<&HnType> = types.iter().collect();
            assert_eq!(set.len(), types.len(), "duplicates at n={n} g={g}");
            assert!(types.windows(2).all(|w| w[0] < w[1]));
            for mu in &types {
                assert!(HnType::new(mu.pairs().to_vec()).is_ok());
                let c = codim_complex(mu, g).unwrap();
                assert!(c <= 24);
                let p = mu.pairs();
                for i in 0..p.len() {
                    for j in 0..i {
                        assert!(p[i].0 * p[j].1 - p[j].0 * p[i].1 > 0);
                    }
                }
                if mu.len() >= 2 {
                    assert!(c >= n + (n - 1) * (g - 1), "{mu} at g={g}");
                }
            }
        }
    }
}

#[test]
fn partition_minimum_matches_compositions() {
    for n in 2..=12u32 {
        for r in 2..=n {
            let (parts, value) = min_partition_product(n, r).unwrap();
            let brute = compositions(n, r).iter().map(|c| phi(c)).min().unwrap();
            assert_eq!(value, brute, "n={n} r={r}");
            assert_eq!(parts.len(), r as usize);
            assert_eq!(parts.iter().sum::<u32>(), n);
            assert_eq!(phi(&parts), value);
        }
    }
    assert_eq!(min_partition_product(5, 3).unwrap(), (vec![1, 1, 3], 7));
}

#[test]
fn k_theory_periodicity_and_consistency() {
    let mut kinds = vec![SurfaceKind::Orientable { g: 0 }, SurfaceKind::Nonorientable { k: 1 }];
    kinds.extend((1..=5).map(|g| SurfaceKind::Orientable { g }));
    kinds.extend((2..=8).map(|k| SurfaceKind::Nonorientable { k }));
    for s in kinds {
        for d in 0..10 {
            assert_eq!(k_topological(s, d).unwrap(), k_topological(s, d + 2).unwrap());
            if s.is_aspherical() {
                let agree = kdef_groups(s, d).unwrap() == k_topological(s, d).unwrap();
                assert_eq!(agree, d >= 1 || !s.is_orientable(), "{s} degree {d}");
            }
        }
    }
}

#[test]
fn big_entries_do_not_overflow() {
    let rows = vec![vec![i64::MAX / 3, 7], vec![5, i64::MAX / 5]];
    let m = IntMatrix::from_rows(&rows).unwrap();
    let s = smith_normal_form(&m);
    assert_eq!(s.u.mul(&m).mul(&s.v), s.d);
    let det: BigInt = s.diagonal().iter().product();
    assert_eq!(det.abs(), m.determinant().abs());
    assert!(!det.is_zero());
    assert!(det.to_i64().is_none());
}
