//! Canonical forms by colour refinement plus individualisation.
//!
//! Components are canonised separately and sorted. Inside a component every
//! cell split is explored, except that interchangeable twins are only tried once.

use crate::config::Bounds;
use crate::error::{Error, Result};
use crate::graph::{Graph, LabelledGraph};

/// Equal forms iff the (coloured) graphs are isomorphic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm(pub Vec<u64>);

/// Canonical form together with the order used: `order[i]` is the vertex placed at position `i`.
#[derive(Clone, Debug)]
pub struct Canonised {
    pub form: CanonicalForm,
    pub order: Vec<usize>,
}

pub fn canonical_form(g: &Graph, bound: usize) -> Result<CanonicalForm> {
    if g.n() > bound {
        return Err(Error::Capability(format!(
            "canonical form limited to {bound} vertices, got {}",
            g.n()
        )));
    }
    Ok(canonise(g, &vec![0; g.n()]).form)
}

pub fn canonical_form_default(g: &Graph) -> Result<CanonicalForm> {
    canonical_form(g, Bounds::default().canonical)
}

pub fn canonical_labelled(g: &LabelledGraph, bound: usize) -> Result<CanonicalForm> {
    if g.n() > bound {
        return Err(Error::Capability(format!(
            "canonical form limited to {bound} vertices, got {}",
            g.n()
        )));
    }
    Ok(canonise_labelled(g).form)
}

/// Colours a vertex by the bit set of its labels; the arity is folded into the form.
pub(crate) fn canonise_labelled(g: &LabelledGraph) -> Canonised {
    let mut colours = vec![0u64; g.n()];
    for (l, v) in g.assigned() {
        colours[v] |= 1u64 << (l - 1).min(62);
    }
    let mut c = canonise(&g.graph, &colours);
    c.form.0.insert(0, g.arity() as u64);
    c
}

/// Canonises a vertex-coloured graph without any size bound.
pub fn canonise(g: &Graph, colours: &[u64]) -> Canonised {
    let comps = g.connected_components();
    let mut parts: Vec<(Vec<u64>, Vec<usize>)> = comps
        .iter()
        .map(|comp| {
            let sub = g.induced(comp);
            let cols: Vec<u64> = comp.iter().map(|&v| colours[v]).collect();
            let (key, order) = canonise_connected(&sub, &cols);
            (key, order.into_iter().map(|i| comp[i]).collect())
        })
        .collect();
    parts.sort();
    let mut form = vec![g.n() as u64, parts.len() as u64];
    let mut order = Vec::with_capacity(g.n());
    for (key, ord) in parts {
        form.push(key.len() as u64);
        form.extend(key);
        order.extend(ord);
    }
    Canonised {
        form: CanonicalForm(form),
        order,
    }
}

struct Search<'a> {
    adj: &'a [Vec<usize>],
    matrix: Vec<bool>,
    input: &'a [u64],
    best: Option<(Vec<u64>, Vec<usize>)>,
}

fn canonise_connected(g: &Graph, colours: &[u64]) -> (Vec<u64>, Vec<usize>) {
    let n = g.n();
    let adj: Vec<Vec<usize>> = (0..n).map(|v| g.neighbors(v).to_vec()).collect();
    let mut s = Search {
        adj: &adj,
        matrix: g.matrix(),
        input: colours,
        best: None,
    };
    let start = rank(colours);
    s.descend(start);
    s.best.expect("search visits at least one leaf")
}

/// Replaces values by their rank among the distinct values.
fn rank(values: &[u64]) -> Vec<u64> {
    let mut sorted: Vec<u64> = values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    values
        .iter()
        .map(|v| sorted.binary_search(v).unwrap() as u64)
        .collect()
}

impl Search<'_> {
    /// Iterated colour refinement; colours are renumbered canonically each round.
    fn refine(&self, mut colours: Vec<u64>) -> Vec<u64> {
        let n = colours.len();
        let mut classes = count_distinct(&colours);
        loop {
            let mut sigs: Vec<(u64, Vec<u64>, usize)> = (0..n)
                .map(|v| {
                    let mut nb: Vec<u64> = self.adj[v].iter().map(|&w| colours[w]).collect();
                    nb.sort_unstable();
                    (colours[v], nb, v)
                })
                .collect();
            sigs.sort();
            let mut next = vec![0u64; n];
            let mut c = 0u64;
            for i in 0..n {
                if i > 0 && (sigs[i].0 != sigs[i - 1].0 || sigs[i].1 != sigs[i - 1].1) {
                    c += 1;
                }
                next[sigs[i].2] = c;
            }
            let now = c as usize + 1;
            colours = next;
            if now == classes {
                return colours;
            }
            classes = now;
        }
    }

    fn descend(&mut self, colours: Vec<u64>) {
        let colours = self.refine(colours);
        let n = colours.len();
        let mut counts = vec![0usize; n];
        for &c in &colours {
            counts[c as usize] += 1;
        }
        let target = (0..n)
            .filter(|&c| counts[c] > 1)
            .min_by_key(|&c| (counts[c], c));
        let Some(target) = target else {
            self.leaf(&colours);
            return;
        };
        let cell: Vec<usize> = (0..n).filter(|&v| colours[v] as usize == target).collect();
        let mut tried: Vec<usize> = Vec::new();
        for &v in &cell {
            if tried.iter().any(|&u| self.twins(u, v)) {
                continue;
            }
            tried.push(v);
            let mut next: Vec<u64> = colours.iter().map(|&c| 2 * c + 1).collect();
            next[v] = 2 * colours[v];
            self.descend(next);
        }
    }

    fn twins(&self, u: usize, v: usize) -> bool {
        let a = self.adj[u].iter().filter(|&&w| w != v);
        let b = self.adj[v].iter().filter(|&&w| w != u);
        a.eq(b)
    }

    fn leaf(&mut self, colours: &[u64]) {
        let n = colours.len();
        let mut order = vec![0usize; n];
        for v in 0..n {
            order[colours[v] as usize] = v;
        }
        let mut key = Vec::with_capacity(n + 2 + n * n / 128);
        key.push(n as u64);
        key.extend(order.iter().map(|&v| self.input[v]));
        let mut word = 0u64;
        let mut bits = 0;
        for i in 0..n {
            for j in i + 1..n {
                word = (word << 1) | self.matrix[order[i] * n + order[j]] as u64;
                bits += 1;
                if bits == 64 {
                    key.push(word);
                    word = 0;
                    bits = 0;
                }
            }
        }
        if bits > 0 {
            key.push(word << (64 - bits));
        }
        let better = match &self.best {
            None => true,
            Some((k, _)) => key < *k,
        };
        if better {
            self.best = Some((key, order));
        }
    }
}

fn count_distinct(v: &[u64]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

/// Exact isomorphism test through canonical forms.
pub fn isomorphic(a: &Graph, b: &Graph) -> bool {
    a.n() == b.n()
        && a.edge_count() == b.edge_count()
        && canonise(a, &vec![0; a.n()]).form == canonise(b, &vec![0; b.n()]).form
}

/// All graphs on exactly `n` vertices up to isomorphism, each in canonical vertex order.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    let mut layer = vec![Graph::empty(0)];
    for m in 1..=n {
        let mut seen = std::collections::HashSet::new();
        let mut next = Vec::new();
        for g in &layer {
            for mask in 0u64..(1u64 << (m - 1)) {
                let mut h = g.disjoint_union(&Graph::empty(1));
                for u in 0..m - 1 {
                    if mask >> u & 1 == 1 {
                        h.insert_edge(u, m - 1);
                    }
                }
                let c = canonise(&h, &vec![0; m]);
                if seen.insert(c.form.clone()) {
                    let mut pos = vec![0; m];
                    for (i, &v) in c.order.iter().enumerate() {
                        pos[v] = i;
                    }
                    next.push(h.permute(&pos));
                }
            }
        }
        layer = next;
    }
    layer
}

/// All graphs with at most `n` vertices up to isomorphism, including the empty graph.
pub fn all_graphs_upto(n: usize) -> Vec<Graph> {
    (0..=n).flat_map(all_graphs).collect()
}
