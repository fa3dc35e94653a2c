//! Parity gadget graphs over a base graph.
//!
//! A vertex of `G_U` is a pair `(v, S)` with `S` a set of edges at `v` whose
//! size is odd exactly when `v ∈ U`. Edge sets are stored as masks of the
//! neighbours they lead to. `(u, S)` and `(v, T)` are adjacent when `uv` is
//! an edge of the base and either both or neither of `S`, `T` contain it.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use serde::Serialize;

use crate::canon::isomorphic;
use crate::config::Bounds;
use crate::decomp::{decide_membership, Membership, Method, WitnessKind};
use crate::error::{invalid, Error, Result};
use crate::games::{bijective_pebble_game, PebbleWinner};
use crate::graph::{mask_bits, Graph};
use crate::homalg::hom;

#[derive(Clone, Debug)]
pub struct CfiGraph {
    pub base: Graph,
    pub twisted: BTreeSet<usize>,
    pub graph: Graph,
    /// `(v, S)` per vertex, `S` as a mask over the neighbours of `v`.
    pub vertices: Vec<(usize, u64)>,
}

impl CfiGraph {
    /// Base vertex of every gadget vertex; a homomorphism onto the base.
    pub fn fiber_map(&self) -> Vec<usize> {
        self.vertices.iter().map(|&(v, _)| v).collect()
    }

    pub fn index_of(&self, v: usize, s: u64) -> Option<usize> {
        self.vertices.iter().position(|&x| x == (v, s))
    }
}

fn neighbour_mask(g: &Graph, v: usize) -> u64 {
    g.neighbors(v).iter().fold(0, |m, &u| m | 1 << u)
}

/// All subsets of `mask`, in increasing numeric order.
fn submasks(mask: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut s = 0u64;
    loop {
        out.push(s);
        if s == mask {
            break;
        }
        s = (s.wrapping_sub(mask)) & mask;
    }
    out
}

pub fn cfi_build(base: &Graph, twisted: &BTreeSet<usize>) -> Result<CfiGraph> {
    let n = base.n();
    if n > 64 {
        return Err(Error::Capability("gadget construction limited to 64 base vertices".into()));
    }
    if let Some(&v) = twisted.iter().find(|&&v| v >= n) {
        return invalid(format!("twisted vertex {v} outside the base"));
    }
    let mut vertices = Vec::new();
    for v in 0..n {
        let odd = twisted.contains(&v) as u32;
        for s in submasks(neighbour_mask(base, v)) {
            if s.count_ones() % 2 == odd {
                vertices.push((v, s));
            }
        }
    }
    let mut graph = Graph::empty(vertices.len());
    for (a, &(u, s)) in vertices.iter().enumerate() {
        for (b, &(v, t)) in vertices.iter().enumerate().skip(a + 1) {
            if base.has_edge(u, v) && (s >> v & 1) == (t >> u & 1) {
                graph.insert_edge(a, b);
            }
        }
    }
    Ok(CfiGraph {
        base: base.clone(),
        twisted: twisted.clone(),
        graph,
        vertices,
    })
}

/// `(G_∅, G_{0})` for a connected base.
pub fn cfi_pair(base: &Graph) -> Result<(CfiGraph, CfiGraph)> {
    if base.n() == 0 || !base.is_connected() {
        return invalid("the base graph must be connected and nonempty");
    }
    Ok((
        cfi_build(base, &BTreeSet::new())?,
        cfi_build(base, &BTreeSet::from([0]))?,
    ))
}

/// Isomorphism `G_{u} → G_{v}` that toggles the path edges in the fibres
/// along `path` (from `u` to `v`) and fixes every other fibre. Returns the
/// image index of every vertex.
pub fn twist_iso(base: &Graph, path: &[usize]) -> Result<Vec<usize>> {
    let Some((&u, _)) = path.split_first() else {
        return invalid("path must contain at least its start vertex");
    };
    let v = *path.last().unwrap();
    let mut seen = BTreeSet::new();
    for &w in path {
        if w >= base.n() {
            return invalid(format!("path vertex {w} outside the base"));
        }
        if !seen.insert(w) {
            return invalid(format!("path repeats vertex {w}"));
        }
    }
    for pair in path.windows(2) {
        if !base.has_edge(pair[0], pair[1]) {
            return invalid(format!("{}-{} is not an edge of the base", pair[0], pair[1]));
        }
    }
    let from = cfi_build(base, &BTreeSet::from([u]))?;
    let to = cfi_build(base, &BTreeSet::from([v]))?;
    let mut toggle = vec![0u64; base.n()];
    for pair in path.windows(2) {
        toggle[pair[0]] |= 1 << pair[1];
        toggle[pair[1]] |= 1 << pair[0];
    }
    from.vertices
        .iter()
        .map(|&(w, s)| {
            to.index_of(w, s ^ toggle[w])
                .ok_or_else(|| Error::Validation("twist left the fibre".into()))
        })
        .collect()
}

/// Whether `map` is an isomorphism between `a` and `b`.
pub fn is_isomorphism(a: &Graph, b: &Graph, map: &[usize]) -> bool {
    if a.n() != b.n() || map.len() != a.n() || a.edge_count() != b.edge_count() {
        return false;
    }
    let mut hit = vec![false; b.n()];
    for &x in map {
        if x >= b.n() || std::mem::replace(&mut hit[x], true) {
            return false;
        }
    }
    a.edges().iter().all(|&(x, y)| b.has_edge(map[x], map[y]))
}

pub fn iso_check(a: &Graph, b: &Graph, bounds: &Bounds) -> Result<bool> {
    let n = a.n().max(b.n());
    if n > bounds.iso {
        return Err(Error::Capability(format!(
            "isomorphism check limited to {} vertices, got {n}",
            bounds.iso
        )));
    }
    Ok(isomorphic(a, b))
}

/// Twisted vertices as a mask, for callers that iterate over subsets.
pub fn twisted_from_mask(mask: u64) -> BTreeSet<usize> {
    mask_bits(mask).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessPair {
    #[serde(skip)]
    pub g: Graph,
    #[serde(skip)]
    pub h: Graph,
    /// Vertices of the component whose gadgets were used.
    pub component: Vec<usize>,
    /// Size of the clique added to both sides.
    pub clique: usize,
    pub hom_g: BigUint,
    pub hom_h: BigUint,
}

#[derive(Clone, Debug)]
pub enum WitnessOutcome {
    Pair(WitnessPair),
    /// The pattern has depth at most `q`; the decomposition is the reason.
    Refused(Membership),
}

/// Pair `(F¹_0 + K_n, F¹_1 + K_n)` for a component `F¹` of `f` outside
/// depth `q`, with `n` the least clique size admitting a hom from `f`.
pub fn witness_pair(f: &Graph, q: usize, bounds: &Bounds) -> Result<WitnessOutcome> {
    let whole = decide_membership(f, None, Some(q), Method::Search(WitnessKind::Td), bounds)?;
    if whole.member {
        return Ok(WitnessOutcome::Refused(whole));
    }
    let mut chosen = None;
    for comp in f.connected_components() {
        let part = f.induced(&comp);
        if !decide_membership(&part, None, Some(q), Method::Search(WitnessKind::Td), bounds)?.member {
            chosen = Some((comp, part));
            break;
        }
    }
    let (component, part) = chosen.ok_or_else(|| Error::Validation("no component outside the class".into()))?;
    let clique = (1..=f.n().max(1))
        .find(|&n| hom(f, &Graph::clique(n).expect("clique")) > BigUint::from(0u32))
        .expect("a clique on all vertices receives a hom");
    let (g0, g1) = cfi_pair(&part)?;
    let k = Graph::clique(clique)?;
    let g = g0.graph.disjoint_union(&k);
    let h = g1.graph.disjoint_union(&k);
    let hom_g = hom(f, &g);
    let hom_h = hom(f, &h);
    Ok(WitnessOutcome::Pair(WitnessPair { g, h, component, clique, hom_g, hom_h }))
}

/// Equivalence of the two gadget graphs in the bijective `(k, q)` game.
pub fn pair_equivalent(base: &Graph, k: usize, q: usize) -> Result<bool> {
    let (a, b) = cfi_pair(base)?;
    Ok(bijective_pebble_game(&a.graph, &b.graph, k, q, &[])? == PebbleWinner::Duplicator)
}
