use std::collections::BTreeSet;

use homind::canon::all_graphs_upto;
use homind::cfi::{
    cfi_build, cfi_pair, is_isomorphism, iso_check, pair_equivalent, twist_iso, twisted_from_mask, witness_pair,
    WitnessOutcome,
};
use homind::games::{bijective_pebble_game, solve_cr, PebbleWinner};
use homind::{hom, Bounds, Error, Graph};
use proptest::prelude::*;

fn connected_bases(max_n: usize) -> Vec<Graph> {
    all_graphs_upto(max_n).into_iter().filter(|g| g.n() > 0 && g.is_connected()).collect()
}

fn expected_size(base: &Graph, twisted: &BTreeSet<usize>) -> usize {
    (0..base.n())
        .map(|v| match base.degree(v) {
            0 => usize::from(!twisted.contains(&v)),
            d => 1 << (d - 1),
        })
        .sum()
}

fn gadget_size(base: &Graph) -> usize {
    expected_size(base, &BTreeSet::new())
}

#[test]
fn fibre_sizes() {
    let (a, b) = cfi_pair(&Graph::path(4).unwrap()).unwrap();
    assert_eq!((a.graph.n(), b.graph.n()), (6, 6));
    let (a, b) = cfi_pair(&Graph::path(7).unwrap()).unwrap();
    assert_eq!((a.graph.n(), b.graph.n()), (12, 12));
    let k1 = Graph::empty(1);
    assert_eq!(cfi_build(&k1, &BTreeSet::new()).unwrap().graph.n(), 1);
    assert_eq!(cfi_build(&k1, &BTreeSet::from([0])).unwrap().graph.n(), 0);
    for base in all_graphs_upto(5) {
        for mask in 0u64..1 << base.n() {
            let u = twisted_from_mask(mask);
            let c = cfi_build(&base, &u).unwrap();
            assert_eq!(c.graph.n(), expected_size(&base, &u));
            let rho = c.fiber_map();
            assert!(c.graph.edges().iter().all(|&(x, y)| base.has_edge(rho[x], rho[y])));
        }
    }
}

#[test]
fn pair_needs_a_connected_base() {
    let two = Graph::empty(2);
    assert!(matches!(cfi_pair(&two), Err(Error::Validation(_))));
    assert!(cfi_pair(&Graph::empty(0)).is_err());
    assert!(cfi_build(&two, &BTreeSet::from([5])).is_err());
}

#[test]
fn twist_examples() {
    let p4 = Graph::path(4).unwrap();
    let id = twist_iso(&p4, &[2]).unwrap();
    assert_eq!(id, (0..6).collect::<Vec<_>>());
    let map = twist_iso(&p4, &[0, 1, 2, 3]).unwrap();
    let a = cfi_build(&p4, &BTreeSet::from([0])).unwrap();
    let b = cfi_build(&p4, &BTreeSet::from([3])).unwrap();
    assert!(is_isomorphism(&a.graph, &b.graph, &map));

    let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let map = twist_iso(&star, &[1, 0, 2]).unwrap();
    let a = cfi_build(&star, &BTreeSet::from([1])).unwrap();
    let b = cfi_build(&star, &BTreeSet::from([2])).unwrap();
    assert!(is_isomorphism(&a.graph, &b.graph, &map));
    for (i, &(w, s)) in a.vertices.iter().enumerate() {
        assert_eq!(b.vertices[map[i]].0, w);
        if w == 3 {
            assert_eq!(b.vertices[map[i]], (w, s));
        }
    }

    assert!(twist_iso(&p4, &[0, 2]).is_err());
    assert!(twist_iso(&p4, &[0, 1, 0]).is_err());
    assert!(twist_iso(&p4, &[]).is_err());
}

#[test]
fn twists_along_every_path_are_isomorphisms() {
    fn paths(g: &Graph, from: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
        out.push(cur.clone());
        let last = *cur.last().unwrap();
        for &u in g.neighbors(last) {
            if !cur.contains(&u) {
                cur.push(u);
                paths(g, from, out, cur);
                cur.pop();
            }
        }
    }
    for base in connected_bases(5) {
        for u in 0..base.n() {
            let mut all = Vec::new();
            paths(&base, u, &mut all, &mut vec![u]);
            let from = cfi_build(&base, &BTreeSet::from([u])).unwrap();
            for p in all {
                let to = cfi_build(&base, &BTreeSet::from([*p.last().unwrap()])).unwrap();
                let map = twist_iso(&base, &p).unwrap();
                assert!(is_isomorphism(&from.graph, &to.graph, &map));
                let mut inverse = vec![0; map.len()];
                for (i, &j) in map.iter().enumerate() {
                    inverse[j] = i;
                }
                assert!(is_isomorphism(&to.graph, &from.graph, &inverse));
                for (i, &(w, s)) in from.vertices.iter().enumerate() {
                    if !p.contains(&w) {
                        assert_eq!(to.vertices[map[i]], (w, s));
                    }
                }
            }
        }
    }
}

#[test]
fn iso_examples() {
    let b = Bounds::default();
    let p4 = Graph::path(4).unwrap();
    let g0 = cfi_build(&p4, &BTreeSet::new()).unwrap().graph;
    let even = cfi_build(&p4, &BTreeSet::from([0, 1])).unwrap().graph;
    let odd = cfi_build(&p4, &BTreeSet::from([0])).unwrap().graph;
    assert!(iso_check(&g0, &even, &b).unwrap());
    assert!(!iso_check(&g0, &odd, &b).unwrap());
    let big = Graph::path(17).unwrap();
    assert!(matches!(iso_check(&big, &big, &b), Err(Error::Capability(_))));
}

#[test]
fn parity_law() {
    let b = Bounds::default();
    for base in connected_bases(6) {
        let g0 = cfi_build(&base, &BTreeSet::new()).unwrap().graph;
        let h0 = hom(&base, &g0);
        let mut subsets: Vec<BTreeSet<usize>> = vec![BTreeSet::new()];
        for u in 0..base.n() {
            subsets.push(BTreeSet::from([u]));
            for v in u + 1..base.n() {
                subsets.push(BTreeSet::from([u, v]));
            }
        }
        for u in subsets {
            let gu = cfi_build(&base, &u).unwrap().graph;
            let even = u.len() % 2 == 0;
            assert_eq!(hom(&base, &gu) == h0, even, "{base:?} {u:?}");
            if gu.n() <= b.iso {
                assert_eq!(iso_check(&g0, &gu, &b).unwrap(), even);
            }
        }
    }
}

#[test]
fn untwisted_side_dominates() {
    let patterns = all_graphs_upto(5);
    for base in connected_bases(5) {
        let (a, b) = cfi_pair(&base).unwrap();
        for f in &patterns {
            assert!(hom(f, &a.graph) >= hom(f, &b.graph), "{f:?} into gadgets of {base:?}");
        }
    }
}

#[test]
fn witness_pairs() {
    let b = Bounds::default();
    let p4 = Graph::path(4).unwrap();
    let WitnessOutcome::Pair(w) = witness_pair(&p4, 2, &b).unwrap() else { panic!("refused") };
    assert_eq!(w.clique, 2);
    assert!(w.hom_g > w.hom_h);
    assert_eq!(hom(&p4, &w.g), w.hom_g);
    assert_eq!(bijective_pebble_game(&w.g, &w.h, 2, 2, &[]).unwrap(), PebbleWinner::Duplicator);

    // P7 has depth 3 from its middle vertex, so the pair needs P8.
    let p7 = Graph::path(7).unwrap();
    assert!(matches!(witness_pair(&p7, 3, &b).unwrap(), WitnessOutcome::Refused(_)));
    let p8 = Graph::path(8).unwrap();
    let WitnessOutcome::Pair(w) = witness_pair(&p8, 3, &b).unwrap() else { panic!("refused") };
    assert!(w.hom_g > w.hom_h);
    assert_eq!(bijective_pebble_game(&w.g, &w.h, 3, 3, &[]).unwrap(), PebbleWinner::Duplicator);

    let k2 = Graph::clique(2).unwrap();
    let WitnessOutcome::Refused(m) = witness_pair(&k2, 2, &b).unwrap() else { panic!("K2 has depth 2") };
    assert!(m.member && m.witness.is_some());

    let split = Graph::path(2).unwrap().disjoint_union(&Graph::path(4).unwrap());
    let WitnessOutcome::Pair(w) = witness_pair(&split, 2, &b).unwrap() else { panic!("refused") };
    assert_eq!(w.component.len(), 4);
    assert!(w.hom_g > w.hom_h);
}

/// Robber wins imply equivalent gadget pairs. Gadget graphs are kept to at
/// most 16 vertices so the pebble game stays small.
#[test]
fn robber_wins_give_equivalent_pairs() {
    let b = Bounds::default();
    let mut checked = 0;
    for base in connected_bases(5) {
        for k in 1..=3 {
            for q in 1..=4 {
                if gadget_size(&base) > 16 || solve_cr(&base, k, q, false, &b).unwrap().cops_win() {
                    continue;
                }
                assert!(pair_equivalent(&base, k, q).unwrap(), "{base:?} k={k} q={q}");
                checked += 1;
            }
        }
    }
    for (base, k, q) in [(Graph::path(7).unwrap(), 2, 3), (Graph::path(6).unwrap(), 2, 3)] {
        assert!(!solve_cr(&base, k, q, false, &b).unwrap().cops_win());
        assert!(pair_equivalent(&base, k, q).unwrap());
        checked += 1;
    }
    assert!(checked > 50, "{checked}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn relabelled_gadgets_stay_isomorphic(idx in 0usize..30, seed: u64) {
        let bases = connected_bases(4);
        let base = &bases[idx % bases.len()];
        let g = cfi_build(base, &BTreeSet::new()).unwrap().graph;
        let mut perm: Vec<usize> = (0..g.n()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let relabelled = g.permute(&perm);
        prop_assert!(is_isomorphism(&g, &relabelled, &perm));
        prop_assert!(iso_check(&g, &relabelled, &Bounds::default()).unwrap());
    }
}
