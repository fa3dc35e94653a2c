use homind::canon::{all_graphs_upto, isomorphic};
use homind::decomp::grids::{
    grid_2x5_decomposition, grid_2x7_construction_tree, grid_2x7_forest_cover, grid_2x7_guarded_construction_tree,
};
use homind::decomp::{
    convert, decide_membership, enumerate_class, is_nice, labelled_witness, make_nice, measure, search_witness, verify,
    verify_ctree, verify_pfc, verify_td, Method, PebbleForestCover, TreeDecomposition, Witness, WitnessKind,
};
use homind::graph::RootedForest;
use homind::{Bounds, Error, Graph, LabelledGraph};
use proptest::prelude::*;

const KINDS: [WitnessKind; 3] = [WitnessKind::Ctree, WitnessKind::Td, WitnessKind::Pfc];

fn connected(max_n: usize) -> Vec<Graph> {
    all_graphs_upto(max_n).into_iter().filter(|g| g.n() > 0 && g.is_connected()).collect()
}

/// Treedepth by the recursive definition: 1 + min over removed vertices, max over components.
fn treedepth(g: &Graph) -> usize {
    if g.n() == 0 {
        return 0;
    }
    let comps = g.connected_components();
    if comps.len() > 1 {
        return comps.iter().map(|c| treedepth(&g.induced(c))).max().unwrap();
    }
    1 + (0..g.n()).map(|v| treedepth(&g.remove_vertex(v).unwrap())).min().unwrap()
}

/// Treewidth by trying every elimination order.
fn treewidth(g: &Graph) -> usize {
    fn go(adj: &[u64], left: u64) -> usize {
        if left.count_ones() <= 1 {
            return 0;
        }
        let mut best = usize::MAX;
        let mut bits = left;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let nb = adj[v] & left & !(1 << v);
            let mut a = adj.to_vec();
            let mut m = nb;
            while m != 0 {
                let u = m.trailing_zeros() as usize;
                m &= m - 1;
                a[u] |= nb & !(1 << u);
            }
            best = best.min((nb.count_ones() as usize).max(go(&a, left & !(1 << v))));
        }
        best
    }
    let n = g.n();
    if n == 0 {
        return 0;
    }
    go(&g.masks(), (1u64 << n) - 1)
}

#[test]
fn measures_of_small_witnesses() {
    let p3 = Graph::path(3).unwrap();
    let td = TreeDecomposition::new(vec![None, Some(0)], vec![vec![0, 1], vec![1, 2]]).unwrap();
    let m = measure(&Witness::Td(td.clone()));
    assert_eq!((m.width, m.depth), (Some(1), 3));
    assert!(verify_td(&p3, &td, 2, 3).is_ok());
    assert!(verify_td(&p3, &td, 2, 2).is_err());
}

#[test]
fn grid_witnesses() {
    let g25 = Graph::grid(2, 5).unwrap();
    let td = grid_2x5_decomposition();
    assert!(verify_td(&g25, &td, 3, 10).is_ok());
    assert_eq!(td.width(), 2);

    let g27 = Graph::grid(2, 7).unwrap();
    let pfc = grid_2x7_forest_cover();
    assert!(pfc.depth() <= 6 && pfc.pebble_count() <= 4);
    assert!(verify_pfc(&g27, &pfc, 4, 6).is_ok());

    let ct = grid_2x7_construction_tree();
    assert!(verify_ctree(&LabelledGraph::unlabelled(g27.clone(), ct.arity), &ct, 4, 6, false).is_ok());
    let (f, gct) = grid_2x7_guarded_construction_tree();
    assert!(verify_ctree(&f, &gct, 3, 7, true).is_ok());
}

#[test]
fn grid_conversion_chain() {
    let g = Graph::grid(2, 7).unwrap();
    let ct = Witness::Ctree(grid_2x7_construction_tree());
    let td = convert(&g, &ct, WitnessKind::Td).unwrap();
    let m = measure(&td);
    assert!(m.width.unwrap() <= 3 && m.depth <= 6);
    let pfc = convert(&g, &td, WitnessKind::Pfc).unwrap();
    assert!(verify(&g, &pfc, 4, 6, false).is_ok());
    let back = convert(&g, &pfc, WitnessKind::Td).unwrap();
    assert!(verify(&g, &back, 4, 6, false).is_ok());
    let ct2 = convert(&g, &back, WitnessKind::Ctree).unwrap();
    assert!(verify(&g, &ct2, 4, 6, false).is_ok());
}

#[test]
fn pebble_reuse_on_an_edge_path_is_reported() {
    let p3 = Graph::path(3).unwrap();
    let forest = RootedForest::new(vec![None, Some(0), Some(1)]).unwrap();
    let bad = PebbleForestCover { forest, pebbles: vec![1, 1, 2] };
    let v = verify_pfc(&p3, &bad, 2, 3).unwrap_err();
    assert!(v.to_string().contains('0') && v.to_string().contains('1'), "{v}");
    let unreachable = TreeDecomposition::new(vec![None, Some(0)], vec![vec![0, 1], vec![2]]).unwrap();
    assert!(verify_td(&p3, &unreachable, 3, 3).is_err());
}

#[test]
fn trivial_witnesses_for_k1() {
    let k1 = Graph::empty(1);
    for kind in KINDS {
        let w = search_witness(&k1, Some(1), Some(1), kind).unwrap();
        assert!(verify(&k1, &w, 1, 1, false).is_ok());
        for target in KINDS {
            assert!(verify(&k1, &convert(&k1, &w, target).unwrap(), 1, 1, false).is_ok());
        }
    }
    assert!(search_witness(&k1, Some(0), Some(1), WitnessKind::Td).is_none());
    assert!(search_witness(&Graph::empty(0), Some(1), Some(1), WitnessKind::Td).is_some());
}

#[test]
fn nice_form() {
    let k3 = Graph::clique(3).unwrap();
    let one = TreeDecomposition::new(vec![None], vec![vec![0, 1, 2]]).unwrap();
    let nice = make_nice(&one);
    assert!(is_nice(&nice));
    assert_eq!(nice.depth(), 3);
    assert_eq!(nice.len(), 7);
    assert!(verify_td(&k3, &nice, 3, 3).is_ok());
    let again = make_nice(&nice);
    assert!(is_nice(&again));
    assert_eq!((again.width(), again.depth()), (nice.width(), nice.depth()));
}

#[test]
fn nice_form_preserves_measures() {
    for g in connected(6) {
        let Some(Witness::Td(td)) = search_witness(&g, None, None, WitnessKind::Td) else { panic!() };
        let nice = make_nice(&td);
        assert!(is_nice(&nice));
        assert_eq!(nice.width(), td.width());
        assert!(nice.depth() <= td.depth());
        assert!(verify_td(&g, &nice, td.max_bag(), td.depth()).is_ok());
    }
}

#[test]
fn membership_examples() {
    let b = Bounds::default();
    let p7 = Graph::path(7).unwrap();
    for method in [Method::Game, Method::Search(WitnessKind::Pfc)] {
        assert!(decide_membership(&p7, Some(2), Some(4), method, &b).unwrap().member);
        assert!(!decide_membership(&p7, Some(2), Some(3), method, &b).unwrap().member);
    }
    let k3 = Graph::clique(3).unwrap();
    for q in 1..=5 {
        assert!(!decide_membership(&k3, Some(2), Some(q), Method::Search(WitnessKind::Td), &b).unwrap().member);
    }
    for g in connected(5) {
        let n = g.n();
        let m = decide_membership(&g, Some(n), Some(n), Method::Search(WitnessKind::Ctree), &b).unwrap();
        assert!(m.member);
        assert!(verify(&g, m.witness.as_ref().unwrap(), n, n, false).is_ok());
    }
    let big = Graph::path(10).unwrap();
    assert!(matches!(
        decide_membership(&big, Some(2), Some(4), Method::Search(WitnessKind::Td), &b),
        Err(Error::Capability(_))
    ));
}

#[test]
fn unbounded_parameters_give_width_and_depth() {
    let b = Bounds::default();
    for g in connected(6) {
        let (tw, td) = (treewidth(&g), treedepth(&g));
        for q in 1..=6 {
            let m = decide_membership(&g, None, Some(q), Method::Search(WitnessKind::Td), &b).unwrap();
            assert_eq!(m.member, td <= q);
        }
        for k in 1..=6 {
            let m = decide_membership(&g, Some(k), None, Method::Search(WitnessKind::Td), &b).unwrap();
            assert_eq!(m.member, tw < k);
        }
    }
}

#[test]
fn enumeration() {
    let b = Bounds::default();
    let small = enumerate_class(3, 2, 2, false, &b).unwrap();
    let p3 = Graph::path(3).unwrap();
    assert!(small.iter().any(|g| isomorphic(g, &Graph::clique(2).unwrap())));
    assert!(small.iter().any(|g| isomorphic(g, &Graph::empty(1))));
    // P3 has depth 2 from its middle vertex.
    assert!(small.iter().any(|g| isomorphic(g, &p3)));
    for g in &small {
        assert!(decide_membership(g, Some(2), Some(2), Method::Game, &b).unwrap().member);
    }
    for q in 1..=4 {
        let class = enumerate_class(6, q, q, false, &b).unwrap();
        let want = all_graphs_upto(6).into_iter().filter(|g| treedepth(g) <= q).count();
        assert_eq!(class.len(), want);
    }
    for k in 1..=3 {
        for q in 1..=3 {
            let base = enumerate_class(6, k, q, false, &b).unwrap();
            let wider = enumerate_class(6, k + 1, q, false, &b).unwrap();
            let deeper = enumerate_class(6, k, q + 1, false, &b).unwrap();
            for g in &base {
                assert!(wider.iter().any(|h| isomorphic(g, h)));
                assert!(deeper.iter().any(|h| isomorphic(g, h)));
                assert!(treewidth(g) < k && treedepth(g) <= q);
            }
        }
    }
    assert!(matches!(enumerate_class(8, 2, 2, false, &b), Err(Error::Capability(_))));
}

#[test]
fn minor_closure() {
    for g in all_graphs_upto(6).into_iter().filter(|g| g.n() > 0) {
        for (k, q) in [(2, 3), (3, 3), (2, 4)] {
            if search_witness(&g, Some(k), Some(q), WitnessKind::Pfc).is_none() {
                continue;
            }
            let mut minors = Vec::new();
            for (u, v) in g.edges() {
                minors.push(g.contract_edge(u, v).unwrap());
                minors.push(g.remove_edge(u, v).unwrap());
            }
            for v in 0..g.n() {
                minors.push(g.remove_vertex(v).unwrap());
            }
            for m in minors {
                assert!(search_witness(&m, Some(k), Some(q), WitnessKind::Pfc).is_some());
            }
        }
    }
}

#[test]
fn guarded_trees_need_a_labelled_neighbour() {
    // A lone labelled vertex cannot be eliminated under the guard.
    let single = LabelledGraph::new(Graph::empty(1), 1, &[(1, 0)]).unwrap();
    let e = LabelledGraph::new(Graph::path(2).unwrap(), 2, &[(1, 0)]).unwrap();
    assert!(labelled_witness(&e, 2, 1, true).is_some());
    assert!(labelled_witness(&single, 1, 0, true).is_some());
    let isolated = LabelledGraph::new(Graph::empty(2), 2, &[(1, 0)]).unwrap();
    assert!(labelled_witness(&isolated, 2, 5, true).is_none());
    assert!(labelled_witness(&isolated, 2, 1, false).is_some());
}

#[test]
fn witness_json_round_trip() {
    let g = Graph::grid(2, 4).unwrap();
    for kind in KINDS {
        let w = search_witness(&g, Some(3), Some(5), kind).unwrap();
        let back = Witness::from_json(&w.to_json()).unwrap();
        assert!(verify(&g, &back, 3, 5, false).is_ok());
        assert_eq!(measure(&back), measure(&w));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conversions_never_increase_measures(idx in 0usize..143, k in 1usize..=4, q in 1usize..=4) {
        let all = connected(6);
        let g = &all[idx % all.len()];
        for kind in KINDS {
            if let Some(w) = search_witness(g, Some(k), Some(q), kind) {
                for target in KINDS {
                    let c = convert(g, &w, target).unwrap();
                    prop_assert!(verify(g, &c, k, q, false).is_ok());
                    let m = measure(&c);
                    prop_assert!(m.k <= k && m.depth <= q);
                }
            }
        }
    }
}
