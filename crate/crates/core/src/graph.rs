//! Simple graphs, labelled graphs and rooted forests.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = crate::error::Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        let edges: Vec<(usize, usize)> = r.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(r.n, &edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            n: g.n(),
            edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl Graph {
    /// The edgeless graph on `n` vertices.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge list. Parallel edges collapse; loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            if u == v {
                return invalid(format!("loop at vertex {u}"));
            }
            if u >= n || v >= n {
                return invalid(format!("edge {u}-{v} has an endpoint outside 0..{n}"));
            }
            g.insert_edge(u, v);
        }
        Ok(g)
    }

    pub(crate) fn insert_edge(&mut self, u: usize, v: usize) -> bool {
        debug_assert!(u != v);
        match self.adj[u].binary_search(&v) {
            Ok(_) => false,
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos, u);
                true
            }
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as pairs `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Adjacency rows as bit masks. Only valid for graphs with at most 64 vertices.
    pub fn masks(&self) -> Vec<u64> {
        assert!(self.n() <= 64, "mask view needs at most 64 vertices");
        self.adj
            .iter()
            .map(|nb| nb.iter().fold(0u64, |m, &v| m | (1u64 << v)))
            .collect()
    }

    /// Dense adjacency matrix, row-major.
    pub fn matrix(&self) -> Vec<bool> {
        let n = self.n();
        let mut m = vec![false; n * n];
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb {
                m[u * n + v] = true;
            }
        }
        m
    }

    /// Subgraph induced by `vertices`; vertex `vertices[i]` becomes `i`.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let mut g = Graph::empty(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            for &w in &self.adj[v] {
                let j = index[w];
                if j != usize::MAX && i < j {
                    g.insert_edge(i, j);
                }
            }
        }
        g
    }

    /// Disjoint union; the vertices of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.n();
        let mut adj = self.adj.clone();
        adj.extend(
            other
                .adj
                .iter()
                .map(|nb| nb.iter().map(|&v| v + off).collect::<Vec<_>>()),
        );
        Graph { adj }
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    pub fn remove_edge(&self, u: usize, v: usize) -> Result<Graph> {
        if !self.has_edge(u, v) {
            return invalid(format!("{u}-{v} is not an edge"));
        }
        let mut g = self.clone();
        g.adj[u].retain(|&w| w != v);
        g.adj[v].retain(|&w| w != u);
        Ok(g)
    }

    pub fn remove_vertex(&self, v: usize) -> Result<Graph> {
        if v >= self.n() {
            return invalid(format!("vertex {v} out of range"));
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&w| w != v).collect();
        Ok(self.induced(&keep))
    }

    /// Contracts the edge `uv`. The merged vertex takes the smaller index; later
    /// vertices shift down by one.
    pub fn contract_edge(&self, u: usize, v: usize) -> Result<Graph> {
        Ok(self.contract_with_map(u, v)?.0)
    }

    pub(crate) fn contract_with_map(&self, u: usize, v: usize) -> Result<(Graph, Vec<usize>)> {
        if !self.has_edge(u, v) {
            return invalid(format!("{u}-{v} is not an edge"));
        }
        let (keep, gone) = (u.min(v), u.max(v));
        let map: Vec<usize> = (0..self.n())
            .map(|w| match w.cmp(&gone) {
                std::cmp::Ordering::Less => w,
                std::cmp::Ordering::Equal => keep,
                std::cmp::Ordering::Greater => w - 1,
            })
            .collect();
        let mut g = Graph::empty(self.n() - 1);
        for (a, b) in self.edges() {
            let (x, y) = (map[a], map[b]);
            if x != y {
                g.insert_edge(x, y);
            }
        }
        Ok((g, map))
    }

    /// Renames vertex `v` to `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Graph {
        let mut g = Graph::empty(self.n());
        for (u, v) in self.edges() {
            g.insert_edge(perm[u], perm[v]);
        }
        g
    }

    pub fn complement(&self) -> Graph {
        let n = self.n();
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if !self.has_edge(u, v) {
                    g.insert_edge(u, v);
                }
            }
        }
        g
    }

    pub fn path(n: usize) -> Result<Graph> {
        if n == 0 {
            return invalid("path needs at least one vertex");
        }
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Graph> {
        if n < 3 {
            return invalid("cycle needs at least three vertices");
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn clique(n: usize) -> Result<Graph> {
        if n == 0 {
            return invalid("clique needs at least one vertex");
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges)
    }

    /// The `h x l` grid. Cell `(i, j)` (1-based row and column) is vertex `(i-1)*l + (j-1)`.
    pub fn grid(h: usize, l: usize) -> Result<Graph> {
        if h == 0 || l == 0 {
            return invalid("grid dimensions must be positive");
        }
        let id = |i: usize, j: usize| i * l + j;
        let mut edges = Vec::new();
        for i in 0..h {
            for j in 0..l {
                if j + 1 < l {
                    edges.push((id(i, j), id(i, j + 1)));
                }
                if i + 1 < h {
                    edges.push((id(i, j), id(i + 1, j)));
                }
            }
        }
        Graph::from_edges(h * l, &edges)
    }

    /// Vertex id of grid cell `(i, j)`, both 1-based.
    pub fn grid_vertex(l: usize, i: usize, j: usize) -> usize {
        (i - 1) * l + (j - 1)
    }
}

/// A graph with a partial map from labels `1..=arity` to vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelledGraph {
    pub graph: Graph,
    arity: usize,
    labels: Vec<Option<usize>>,
}

/// Result of a glue product together with the information whether a loop was dropped.
#[derive(Clone, Debug)]
pub struct Glued {
    pub graph: LabelledGraph,
    pub loop_suppressed: bool,
}

impl LabelledGraph {
    pub fn unlabelled(graph: Graph, arity: usize) -> Self {
        LabelledGraph {
            graph,
            arity,
            labels: vec![None; arity],
        }
    }

    pub fn new(graph: Graph, arity: usize, labels: &[(usize, usize)]) -> Result<Self> {
        let mut out = LabelledGraph::unlabelled(graph, arity);
        for &(l, v) in labels {
            out.check_label(l)?;
            if out.labels[l - 1].is_some() {
                return invalid(format!("label {l} assigned twice"));
            }
            out = out.set_label(l, v)?;
        }
        Ok(out)
    }

    fn check_label(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.arity {
            return invalid(format!("label {l} outside 1..={}", self.arity));
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn label(&self, l: usize) -> Option<usize> {
        if l == 0 || l > self.arity {
            None
        } else {
            self.labels[l - 1]
        }
    }

    /// Assigned labels as `(label, vertex)` pairs in label order.
    pub fn assigned(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i + 1, v)))
            .collect()
    }

    pub fn labels_of(&self, v: usize) -> Vec<usize> {
        self.assigned()
            .into_iter()
            .filter(|&(_, w)| w == v)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn labelled_vertices(&self) -> BTreeSet<usize> {
        self.labels.iter().flatten().copied().collect()
    }

    pub fn is_fully_labelled(&self) -> bool {
        self.labelled_vertices().len() == self.n()
    }

    /// `G(l -> v)`: moves (or places) label `l` on `v`.
    pub fn set_label(&self, l: usize, v: usize) -> Result<Self> {
        self.check_label(l)?;
        if v >= self.n() {
            return invalid(format!("vertex {v} out of range"));
        }
        let mut out = self.clone();
        out.labels[l - 1] = Some(v);
        Ok(out)
    }

    pub fn remove_label(&self, l: usize) -> Result<Self> {
        self.check_label(l)?;
        let mut out = self.clone();
        out.labels[l - 1] = None;
        Ok(out)
    }

    pub fn without_labels(&self) -> Self {
        LabelledGraph::unlabelled(self.graph.clone(), self.arity)
    }

    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        if self.assigned().iter().any(|&(l, _)| l > arity) {
            return invalid("shrinking the arity would drop an assigned label");
        }
        let mut labels = self.labels.clone();
        labels.resize(arity, None);
        Ok(LabelledGraph {
            graph: self.graph.clone(),
            arity,
            labels,
        })
    }

    /// Glue product: disjoint union with equally-labelled vertices identified.
    /// Loops and parallel edges created by the identification are suppressed.
    pub fn glue(&self, other: &LabelledGraph) -> Result<Glued> {
        Ok(self.glue_with_map(other)?.0)
    }

    /// Glue product plus the position of every vertex of `self` followed by
    /// every vertex of `other` in the result.
    pub fn glue_with_map(&self, other: &LabelledGraph) -> Result<(Glued, Vec<usize>)> {
        if self.arity != other.arity {
            return invalid(format!(
                "label arities differ ({} vs {})",
                self.arity, other.arity
            ));
        }
        // Union-find over the disjoint union so that chains of shared labels merge.
        let n1 = self.n();
        let total = n1 + other.n();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for l in 0..self.arity {
            if let (Some(a), Some(b)) = (self.labels[l], other.labels[l]) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, n1 + b));
                if ra != rb {
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
        let mut index = vec![usize::MAX; total];
        let mut count = 0;
        for x in 0..total {
            let r = find(&mut parent, x);
            if index[r] == usize::MAX {
                index[r] = count;
                count += 1;
            }
            index[x] = index[r];
        }
        let mut graph = Graph::empty(count);
        let mut loop_suppressed = false;
        let shifted = other.graph.edges().into_iter().map(|(u, v)| (u + n1, v + n1));
        for (u, v) in self.graph.edges().into_iter().chain(shifted) {
            let (a, b) = (index[u], index[v]);
            if a == b {
                loop_suppressed = true;
            } else {
                graph.insert_edge(a, b);
            }
        }
        let labels = (0..self.arity)
            .map(|l| match (self.labels[l], other.labels[l]) {
                (Some(a), _) => Some(index[a]),
                (None, Some(b)) => Some(index[n1 + b]),
                (None, None) => None,
            })
            .collect();
        let glued = Glued {
            graph: LabelledGraph {
                graph,
                arity: self.arity,
                labels,
            },
            loop_suppressed,
        };
        Ok((glued, index))
    }

    /// Glue product as a plain value.
    pub fn product(&self, other: &LabelledGraph) -> Result<LabelledGraph> {
        Ok(self.glue(other)?.graph)
    }

    /// Contracts `uv`; the merged vertex carries the union of both label sets.
    pub fn contract_edge(&self, u: usize, v: usize) -> Result<Self> {
        let (graph, map) = self.graph.contract_with_map(u, v)?;
        let labels = self.labels.iter().map(|l| l.map(|w| map[w])).collect();
        Ok(LabelledGraph {
            graph,
            arity: self.arity,
            labels,
        })
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        LabelledGraph {
            graph: self.graph.permute(perm),
            arity: self.arity,
            labels: self.labels.iter().map(|l| l.map(|v| perm[v])).collect(),
        }
    }

    /// Disjoint union of two labelled graphs whose label sets do not meet.
    pub fn disjoint_union(&self, other: &LabelledGraph) -> Result<Self> {
        if self.arity != other.arity {
            return invalid("label arities differ");
        }
        let off = self.n();
        let mut labels = self.labels.clone();
        for (l, v) in other.assigned() {
            if labels[l - 1].is_some() {
                return invalid(format!("label {l} present on both sides"));
            }
            labels[l - 1] = Some(v + off);
        }
        Ok(LabelledGraph {
            graph: self.graph.disjoint_union(&other.graph),
            arity: self.arity,
            labels,
        })
    }

    /// Subgraph induced by `vertices`, keeping the labels that land inside it.
    pub fn induced(&self, vertices: &[usize]) -> Self {
        let mut index = BTreeMap::new();
        for (i, &v) in vertices.iter().enumerate() {
            index.insert(v, i);
        }
        LabelledGraph {
            graph: self.graph.induced(vertices),
            arity: self.arity,
            labels: self
                .labels
                .iter()
                .map(|l| l.and_then(|v| index.get(&v).copied()))
                .collect(),
        }
    }
}

/// Rooted forest given by parent pointers over `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedForest {
    pub parent: Vec<Option<usize>>,
}

impl RootedForest {
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self> {
        let f = RootedForest { parent };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.parent.len();
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return invalid(format!("parent of {v} out of range"));
                }
            }
        }
        for v in 0..n {
            let mut steps = 0;
            let mut cur = v;
            while let Some(p) = self.parent[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return invalid(format!("parent chain from {v} is cyclic"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.parent[v].is_none()).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.len()];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                ch[p].push(v);
            }
        }
        ch
    }

    /// Root-to-`v` path, root first, `v` last.
    pub fn chain(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent[cur] {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// `u ⪯ v`: `u` lies on the root path of `v`.
    pub fn precedes(&self, u: usize, v: usize) -> bool {
        let mut cur = Some(v);
        while let Some(c) = cur {
            if c == u {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }

    /// Number of vertices on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        let mut memo = vec![0usize; self.len()];
        let mut best = 0;
        for v in 0..self.len() {
            best = best.max(self.level(v, &mut memo));
        }
        best
    }

    fn level(&self, v: usize, memo: &mut [usize]) -> usize {
        if memo[v] == 0 {
            memo[v] = match self.parent[v] {
                None => 1,
                Some(p) => self.level(p, memo) + 1,
            };
        }
        memo[v]
    }
}

/// Vertices of a bit set in increasing order.
pub(crate) fn mask_bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(v)
        }
    })
}

/// Open neighbourhood of a vertex set given adjacency masks.
pub(crate) fn mask_neighbourhood(adj: &[u64], set: u64) -> u64 {
    mask_bits(set).fold(0, |acc, v| acc | adj[v]) & !set
}

/// Connected components of the subgraph induced by `set`, ordered by least vertex.
pub(crate) fn mask_components(adj: &[u64], mut set: u64) -> Vec<u64> {
    let mut out = Vec::new();
    while set != 0 {
        let seed = set & set.wrapping_neg();
        let mut comp = seed;
        let mut frontier = seed;
        while frontier != 0 {
            let next = mask_bits(frontier).fold(0, |acc, v| acc | adj[v]) & set & !comp;
            comp |= next;
            frontier = next;
        }
        set &= !comp;
        out.push(comp);
    }
    out
}
