use homind::acceptance::{enumerate_homs, labelled_graphs};
use homind::canon::{all_graphs, all_graphs_upto};
use homind::decomp::labelled_witness;
use homind::homalg::{hom_count_structured, hom_profile, interpolate, rat};
use homind::{hom, hom_count, Error, Graph, LabelledGraph, QuantumGraph};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn lg(n: usize, edges: &[(usize, usize)], k: usize, labels: &[(usize, usize)]) -> LabelledGraph {
    LabelledGraph::new(Graph::from_edges(n, edges).unwrap(), k, labels).unwrap()
}

fn big(x: u64) -> BigUint {
    BigUint::from(x)
}

/// Labelled hom count by trying every map.
fn brute_labelled(f: &LabelledGraph, g: &LabelledGraph) -> u64 {
    let (n, m) = (f.n(), g.n());
    let mut count = 0;
    let total = (m as u64).pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let map: Vec<usize> = (0..n)
            .map(|_| {
                let x = (c % m as u64) as usize;
                c /= m as u64;
                x
            })
            .collect();
        let edges_ok = f.graph.edges().iter().all(|&(u, v)| g.graph.has_edge(map[u], map[v]));
        let labels_ok = f.assigned().iter().all(|&(l, v)| g.label(l) == Some(map[v]));
        if edges_ok && labels_ok {
            count += 1;
        }
    }
    count
}

#[test]
fn hom_examples() {
    for g in all_graphs_upto(5) {
        assert_eq!(hom(&Graph::empty(1), &g), big(g.n() as u64));
    }
    assert_eq!(hom(&Graph::clique(2).unwrap(), &Graph::cycle(5).unwrap()), big(10));
    assert_eq!(hom(&Graph::path(3).unwrap(), &Graph::clique(3).unwrap()), big(12));
    assert_eq!(enumerate_homs(&Graph::path(3).unwrap(), &Graph::clique(3).unwrap()), 12);
}

#[test]
fn unassigned_label_is_a_precondition_error() {
    let f = lg(1, &[], 1, &[(1, 0)]);
    let g = LabelledGraph::unlabelled(Graph::clique(3).unwrap(), 1);
    assert!(matches!(hom_count(&f, &g), Err(Error::Precondition(_))));
}

#[test]
fn labelled_counts_match_brute_force() {
    let patterns = [
        lg(2, &[(0, 1)], 2, &[(1, 0)]),
        lg(3, &[(0, 1), (1, 2)], 2, &[(1, 0), (2, 2)]),
        lg(3, &[(0, 1), (1, 2), (0, 2)], 2, &[(2, 1)]),
        lg(2, &[], 2, &[(1, 0), (2, 1)]),
        lg(1, &[], 2, &[(1, 0), (2, 0)]),
    ];
    for g in all_graphs(4) {
        for a in 0..4 {
            for b in 0..4 {
                let t = LabelledGraph::new(g.clone(), 2, &[(1, a), (2, b)]).unwrap();
                for f in &patterns {
                    assert_eq!(hom_count(f, &t).unwrap(), big(brute_labelled(f, &t)));
                }
            }
        }
    }
}

#[test]
fn profiles() {
    let f = lg(2, &[(0, 1)], 1, &[(1, 0)]);
    let k3 = LabelledGraph::unlabelled(Graph::clique(3).unwrap(), 1);
    assert_eq!(hom_profile(&f, &k3, 1).unwrap(), vec![big(2); 3]);
    let p3 = LabelledGraph::unlabelled(Graph::path(3).unwrap(), 1);
    assert_eq!(hom_profile(&f, &p3, 1).unwrap(), vec![big(1), big(2), big(1)]);
    let star = lg(4, &[(0, 1), (0, 2), (2, 3)], 1, &[(1, 0)]);
    for g in labelled_graphs(5).iter().step_by(41) {
        let t = LabelledGraph::unlabelled(g.clone(), 1);
        let sum: BigUint = hom_profile(&star, &t, 1).unwrap().into_iter().sum();
        assert_eq!(sum, hom(&star.graph, g));
    }
}

#[test]
fn structured_count_matches_brute_force() {
    for f in all_graphs_upto(5).into_iter().filter(|f| f.n() > 0) {
        let lf = LabelledGraph::unlabelled(f.clone(), 0);
        let Some(t) = labelled_witness(&lf, 3, 5, false) else { continue };
        for g in all_graphs_upto(5) {
            let lg = LabelledGraph::unlabelled(g.clone(), 0);
            assert_eq!(hom_count_structured(&lf, &t, &lg).unwrap(), big(enumerate_homs(&f, &g)));
        }
    }
}

#[test]
fn quantum_graph_algebra() {
    let edge = QuantumGraph::from_graph(lg(2, &[(0, 1)], 2, &[(1, 0), (2, 1)]));
    let zero = QuantumGraph::zero(2);
    assert!(edge.product(&zero).unwrap().is_empty());
    let a = QuantumGraph::from_graph(lg(2, &[(0, 1)], 2, &[(1, 0)]));
    let b = QuantumGraph::from_graph(lg(2, &[(0, 1)], 2, &[(2, 0)]));
    let ab = a.product(&b).unwrap();
    assert_eq!(ab.len(), 1);
    assert_eq!(ab.terms()[0].1.n(), 4);
    assert!(a.product(&QuantumGraph::zero(3)).is_err());

    let half_k2 = QuantumGraph::from_graph(LabelledGraph::unlabelled(Graph::clique(2).unwrap(), 0))
        .scale(&BigRational::new(1.into(), 2.into()));
    let p2 = LabelledGraph::unlabelled(Graph::path(2).unwrap(), 0);
    assert_eq!(half_k2.eval(&p2).unwrap(), BigRational::one());
    assert_eq!(QuantumGraph::zero(0).eval(&p2).unwrap(), BigRational::zero());
}

#[test]
fn quantum_graph_json_round_trip() {
    let q = QuantumGraph::from_terms(
        1,
        vec![
            (rat(3), lg(2, &[(0, 1)], 1, &[(1, 0)])),
            (BigRational::new((-1).into(), 7.into()), lg(1, &[], 1, &[(1, 0)])),
        ],
    )
    .unwrap();
    let back = QuantumGraph::from_json(&q.to_json()).unwrap();
    for g in all_graphs(3) {
        for v in 0..3 {
            let t = LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap();
            assert_eq!(q.eval(&t).unwrap(), back.eval(&t).unwrap());
        }
    }
}

#[test]
fn interpolation() {
    let k2 = QuantumGraph::from_graph(LabelledGraph::unlabelled(Graph::clique(2).unwrap(), 0));
    let i = interpolate(&k2, &[rat(2)], &[rat(0)]).unwrap();
    let p2 = LabelledGraph::unlabelled(Graph::path(2).unwrap(), 0);
    let e2 = LabelledGraph::unlabelled(Graph::empty(2), 0);
    assert_eq!(i.eval(&p2).unwrap(), rat(1));
    assert_eq!(i.eval(&e2).unwrap(), rat(0));
    assert!(interpolate(&k2, &[rat(1)], &[rat(1)]).is_err());

    // Negation of a 0/1 valued labelled edge.
    let e = QuantumGraph::from_graph(lg(2, &[(0, 1)], 2, &[(1, 0), (2, 1)]));
    let neg = interpolate(&e, &[rat(0)], &[rat(1)]).unwrap();
    for g in all_graphs(3) {
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let t = LabelledGraph::new(g.clone(), 2, &[(1, a), (2, b)]).unwrap();
                let want = if g.has_edge(a, b) { rat(0) } else { rat(1) };
                assert_eq!(neg.eval(&t).unwrap(), want);
            }
        }
    }
}

#[test]
fn interpolation_on_observed_values() {
    // A = triangles through label 1; values observed on 4-vertex graphs.
    let a = QuantumGraph::from_graph(lg(3, &[(0, 1), (1, 2), (0, 2)], 1, &[(1, 0)]));
    let targets: Vec<LabelledGraph> = all_graphs(4)
        .into_iter()
        .flat_map(|g| (0..4).map(move |v| LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap()))
        .collect();
    let mut values: Vec<BigRational> = targets.iter().map(|t| a.eval(t).unwrap()).collect();
    values.sort();
    values.dedup();
    let (plus, minus): (Vec<_>, Vec<_>) = values.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
    let plus: Vec<_> = plus.into_iter().map(|(_, v)| v).collect();
    let minus: Vec<_> = minus.into_iter().map(|(_, v)| v).collect();
    let i = interpolate(&a, &plus, &minus).unwrap();
    for t in &targets {
        let v = a.eval(t).unwrap();
        let want = if plus.contains(&v) { rat(1) } else { rat(0) };
        assert_eq!(i.eval(t).unwrap(), want);
    }
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (0..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n.saturating_sub(1) / 2).prop_map(move |bits| {
            let mut edges = Vec::new();
            let mut i = 0;
            for u in 0..n {
                for v in u + 1..n {
                    if bits[i] {
                        edges.push((u, v));
                    }
                    i += 1;
                }
            }
            Graph::from_edges(n, &edges).unwrap()
        })
    })
}

fn arb_one_labelled(max_n: usize) -> impl Strategy<Value = LabelledGraph> {
    arb_graph(max_n)
        .prop_filter("nonempty", |g| g.n() > 0)
        .prop_flat_map(|g| (0..g.n()).prop_map(move |v| LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hom_matches_enumeration(f in arb_graph(4), g in arb_graph(5)) {
        prop_assert_eq!(hom(&f, &g), big(enumerate_homs(&f, &g)));
    }

    #[test]
    fn products_multiply(f1 in arb_one_labelled(3), f2 in arb_one_labelled(3), g in arb_graph(5)) {
        prop_assume!(g.n() > 0);
        let prod = f1.glue(&f2).unwrap().graph;
        for v in 0..g.n() {
            let t = LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap();
            prop_assert_eq!(
                hom_count(&prod, &t).unwrap(),
                hom_count(&f1, &t).unwrap() * hom_count(&f2, &t).unwrap()
            );
        }
    }

    #[test]
    fn unions_add_and_multiply(f in arb_graph(4), f2 in arb_graph(3), g in arb_graph(4), h in arb_graph(4)) {
        if f.is_connected() && f.n() > 0 {
            prop_assert_eq!(hom(&f, &g.disjoint_union(&h)), hom(&f, &g) + hom(&f, &h));
        }
        prop_assert_eq!(hom(&f.disjoint_union(&f2), &g), hom(&f, &g) * hom(&f2, &g));
    }

    #[test]
    fn qg_product_distributes(a1 in arb_one_labelled(3), a2 in arb_one_labelled(2), b in arb_one_labelled(3),
                              c1 in -3i64..4, c2 in -3i64..4) {
        let qa = QuantumGraph::from_terms(1, vec![(rat(c1), a1), (rat(c2), a2)]).unwrap();
        let qb = QuantumGraph::from_graph(b);
        let prod = qa.product(&qb).unwrap();
        let sum = qa.add(&qb).unwrap();
        for g in all_graphs(3) {
            for v in 0..3 {
                let t = LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap();
                let (x, y) = (qa.eval(&t).unwrap(), qb.eval(&t).unwrap());
                prop_assert_eq!(prod.eval(&t).unwrap(), &x * &y);
                prop_assert_eq!(sum.eval(&t).unwrap(), x + y);
            }
        }
    }

    #[test]
    fn interpolation_degree_bound(a in arb_one_labelled(3), split in 0usize..4) {
        let qa = QuantumGraph::from_graph(a);
        let points: Vec<BigRational> = (0..4).map(rat).collect();
        let (plus, minus) = points.split_at(split);
        let i = interpolate(&qa, plus, minus).unwrap();
        // Degree at most |points| - 1: at most that many factors of A per term.
        let biggest = i.terms().iter().map(|(_, t)| t.n()).max().unwrap_or(0);
        prop_assert!(biggest <= 1 + 3 * qa.terms()[0].1.n());
        for g in all_graphs(3) {
            for v in 0..3 {
                let t = LabelledGraph::new(g.clone(), 1, &[(1, v)]).unwrap();
                let x = qa.eval(&t).unwrap();
                if plus.contains(&x) {
                    prop_assert_eq!(i.eval(&t).unwrap(), rat(1));
                } else if minus.contains(&x) {
                    prop_assert_eq!(i.eval(&t).unwrap(), rat(0));
                }
            }
        }
    }
}
