//! Membership witnesses for the classes of graphs with a `k`-pebble forest
//! cover of depth `q`: tree decompositions, pebble forest covers and
//! construction trees. Verification, measures, conversions, exact search and
//! enumeration.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canon::{all_graphs_upto, canonise_labelled};
use crate::codec;
use crate::config::Bounds;
use crate::error::{invalid, Error, Result};
use crate::graph::{
    mask_bits, mask_components, mask_neighbourhood, Graph, LabelledGraph, RootedForest,
};

/// First violated condition of a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: String,
    pub detail: String,
}

impl Violation {
    fn new(condition: &str, detail: impl Into<String>) -> Self {
        Violation {
            condition: condition.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

type Check = std::result::Result<(), Violation>;

// ---------------------------------------------------------------------------
// Tree decompositions

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDecomposition {
    pub tree: RootedForest,
    pub bags: Vec<Vec<usize>>,
}

impl TreeDecomposition {
    /// Sorts and deduplicates bags; the tree must have exactly one root.
    pub fn new(parent: Vec<Option<usize>>, bags: Vec<Vec<usize>>) -> Result<Self> {
        if parent.len() != bags.len() {
            return invalid("one bag per tree node is required");
        }
        let tree = RootedForest::new(parent)?;
        if tree.roots().len() != 1 {
            return invalid("a tree decomposition needs exactly one root");
        }
        let bags = bags
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b.dedup();
                b
            })
            .collect();
        Ok(TreeDecomposition { tree, bags })
    }

    pub fn root(&self) -> usize {
        self.tree.roots()[0]
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn max_bag(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Largest bag size minus one; 0 when every bag is empty.
    pub fn width(&self) -> usize {
        self.max_bag().saturating_sub(1)
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.len()];
        for (v, p) in self.tree.parent.iter().enumerate() {
            if let Some(p) = *p {
                nb[v].push(p);
                nb[p].push(v);
            }
        }
        nb
    }

    /// Largest bag union along a path from `r` when the tree hangs from `r`.
    pub fn depth_from(&self, r: usize) -> usize {
        let nb = self.neighbours();
        let n_vertices = self.bags.iter().flatten().max().map_or(0, |m| m + 1);
        let mut count = vec![0usize; n_vertices];
        let mut distinct = 0usize;
        let mut best = 0usize;
        // Iterative DFS with enter/exit events.
        let mut stack: Vec<(usize, usize, bool)> = vec![(r, usize::MAX, true)];
        while let Some((t, from, enter)) = stack.pop() {
            if enter {
                for &v in &self.bags[t] {
                    if count[v] == 0 {
                        distinct += 1;
                    }
                    count[v] += 1;
                }
                best = best.max(distinct);
                stack.push((t, from, false));
                for &s in &nb[t] {
                    if s != from {
                        stack.push((s, t, true));
                    }
                }
            } else {
                for &v in &self.bags[t] {
                    count[v] -= 1;
                    if count[v] == 0 {
                        distinct -= 1;
                    }
                }
            }
        }
        best
    }

    /// Minimum over all root choices; ties go to the smallest node index.
    pub fn depth_and_root(&self) -> (usize, usize) {
        (0..self.len())
            .map(|r| (self.depth_from(r), r))
            .min()
            .unwrap_or((0, 0))
    }

    pub fn depth(&self) -> usize {
        self.depth_and_root().0
    }

    /// Same decomposition with the tree hanging from `r`.
    pub fn rerooted(&self, r: usize) -> TreeDecomposition {
        let nb = self.neighbours();
        let mut parent = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[r] = true;
        let mut stack = vec![r];
        while let Some(t) = stack.pop() {
            for &s in &nb[t] {
                if !seen[s] {
                    seen[s] = true;
                    parent[s] = Some(t);
                    stack.push(s);
                }
            }
        }
        TreeDecomposition {
            tree: RootedForest { parent },
            bags: self.bags.clone(),
        }
    }
}

pub fn verify_td(g: &Graph, td: &TreeDecomposition, k: usize, q: usize) -> Check {
    if td.tree.validate().is_err() || td.tree.len() != td.bags.len() {
        return Err(Violation::new("tree", "parent pointers do not form a forest over the bags"));
    }
    if td.is_empty() {
        return Err(Violation::new("tree", "no nodes"));
    }
    if td.tree.roots().len() != 1 {
        return Err(Violation::new("tree", "the tree must be connected"));
    }
    let n = g.n();
    for (t, bag) in td.bags.iter().enumerate() {
        if let Some(&v) = bag.iter().find(|&&v| v >= n) {
            return Err(Violation::new("bag range", format!("node {t} holds vertex {v} >= {n}")));
        }
    }
    let mut holders = vec![Vec::new(); n];
    for (t, bag) in td.bags.iter().enumerate() {
        for &v in bag {
            holders[v].push(t);
        }
    }
    if let Some(v) = (0..n).find(|&v| holders[v].is_empty()) {
        return Err(Violation::new("vertex cover", format!("vertex {v} is in no bag")));
    }
    for (u, v) in g.edges() {
        if !td.bags.iter().any(|b| b.contains(&u) && b.contains(&v)) {
            return Err(Violation::new("edge cover", format!("edge {u}-{v} is in no bag")));
        }
    }
    for v in 0..n {
        let tops = holders[v]
            .iter()
            .filter(|&&t| match td.tree.parent[t] {
                Some(p) => !td.bags[p].contains(&v),
                None => true,
            })
            .count();
        if tops != 1 {
            return Err(Violation::new(
                "connectivity",
                format!("the nodes holding vertex {v} are not connected"),
            ));
        }
    }
    if td.max_bag() > k {
        return Err(Violation::new(
            "width",
            format!("width {} exceeds {}", td.width(), k.saturating_sub(1)),
        ));
    }
    let (depth, root) = td.depth_and_root();
    if depth > q {
        return Err(Violation::new(
            "depth",
            format!("depth {depth} (best root {root}) exceeds {q}"),
        ));
    }
    Ok(())
}

/// Whether every node is a leaf, introduce, forget or join node and the root
/// and leaf bags are empty.
pub fn is_nice(td: &TreeDecomposition) -> bool {
    let children = td.tree.children();
    if !td.bags[td.root()].is_empty() {
        return false;
    }
    (0..td.len()).all(|t| {
        let bag = &td.bags[t];
        match children[t].as_slice() {
            [] => bag.is_empty(),
            [s] => {
                let child = &td.bags[*s];
                let grow = bag.len() == child.len() + 1 && child.iter().all(|v| bag.contains(v));
                let shrink = child.len() == bag.len() + 1 && bag.iter().all(|v| child.contains(v));
                grow || shrink
            }
            [a, b] => td.bags[*a] == *bag && td.bags[*b] == *bag,
            _ => false,
        }
    })
}

/// Nice form rooted at the depth-minimising root. The bags along every path
/// from the new root repeat subsets of the original path bags, so width and
/// the depth measured from that root are unchanged.
pub fn make_nice(td: &TreeDecomposition) -> TreeDecomposition {
    let (_, root) = td.depth_and_root();
    let rooted = td.rerooted(root);
    let children = rooted.tree.children();
    let mut b = NiceBuilder::default();
    // Children before parents.
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(t) = stack.pop() {
        order.push(t);
        stack.extend(children[t].iter().copied());
    }
    let mut top: Vec<usize> = vec![usize::MAX; td.len()];
    for &t in order.iter().rev() {
        let bag = &rooted.bags[t];
        let mut branches = Vec::new();
        if children[t].is_empty() {
            let leaf = b.push(Vec::new(), &[]);
            branches.push(b.chain_up(leaf, &[], bag));
        }
        for &c in &children[t] {
            branches.push(b.chain_up(top[c], &rooted.bags[c], bag));
        }
        while branches.len() > 1 {
            let y = branches.pop().unwrap();
            let x = branches.pop().unwrap();
            branches.push(b.push(bag.clone(), &[x, y]));
        }
        top[t] = branches[0];
    }
    b.chain_up(top[root], &rooted.bags[root], &[]);
    TreeDecomposition {
        tree: RootedForest { parent: b.parent },
        bags: b.bags,
    }
}

#[derive(Default)]
struct NiceBuilder {
    parent: Vec<Option<usize>>,
    bags: Vec<Vec<usize>>,
}

impl NiceBuilder {
    fn push(&mut self, bag: Vec<usize>, kids: &[usize]) -> usize {
        let id = self.bags.len();
        self.bags.push(bag);
        self.parent.push(None);
        for &c in kids {
            self.parent[c] = Some(id);
        }
        id
    }

    /// Forget the vertices of `from` missing from `to`, then introduce the new ones.
    fn chain_up(&mut self, mut node: usize, from: &[usize], to: &[usize]) -> usize {
        let mut cur: Vec<usize> = from.to_vec();
        for &v in from.iter().rev() {
            if !to.contains(&v) {
                cur.retain(|&x| x != v);
                node = self.push(cur.clone(), &[node]);
            }
        }
        for &v in to {
            if !cur.contains(&v) {
                cur.push(v);
                cur.sort_unstable();
                node = self.push(cur.clone(), &[node]);
            }
        }
        node
    }
}

// ---------------------------------------------------------------------------
// Pebble forest covers

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PebbleForestCover {
    pub forest: RootedForest,
    pub pebbles: Vec<usize>,
}

impl PebbleForestCover {
    pub fn depth(&self) -> usize {
        self.forest.height()
    }

    pub fn pebble_count(&self) -> usize {
        self.pebbles.iter().copied().max().unwrap_or(0)
    }
}

pub fn verify_pfc(g: &Graph, w: &PebbleForestCover, k: usize, q: usize) -> Check {
    let n = g.n();
    if w.forest.len() != n || w.pebbles.len() != n || w.forest.validate().is_err() {
        return Err(Violation::new(
            "forest",
            format!("expected a rooted forest and pebbling over {n} vertices"),
        ));
    }
    if let Some(v) = (0..n).find(|&v| w.pebbles[v] == 0 || w.pebbles[v] > k) {
        return Err(Violation::new(
            "pebble range",
            format!("vertex {v} carries pebble {} outside 1..={k}", w.pebbles[v]),
        ));
    }
    for (a, b) in g.edges() {
        let (u, v) = if w.forest.precedes(a, b) {
            (a, b)
        } else if w.forest.precedes(b, a) {
            (b, a)
        } else {
            return Err(Violation::new(
                "edge comparability",
                format!("edge {a}-{b} joins incomparable vertices"),
            ));
        };
        let mut cur = v;
        while cur != u {
            if w.pebbles[cur] == w.pebbles[u] {
                return Err(Violation::new(
                    "pebble reuse",
                    format!(
                        "edge {u}-{v}: vertex {cur} between them reuses pebble {}",
                        w.pebbles[u]
                    ),
                ));
            }
            cur = w.forest.parent[cur].expect("u is an ancestor");
        }
    }
    let h = w.depth();
    if h > q {
        return Err(Violation::new("depth", format!("height {h} exceeds {q}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Construction trees

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CtNode {
    /// Fully labelled graph. `origin` optionally names the vertex of the
    /// target graph that each leaf vertex becomes.
    Leaf {
        graph: LabelledGraph,
        origin: Option<Vec<usize>>,
    },
    Product {
        children: Vec<usize>,
    },
    Eliminate {
        label: usize,
        child: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionTree {
    pub arity: usize,
    pub nodes: Vec<CtNode>,
    pub root: usize,
}

impl ConstructionTree {
    fn children(&self, t: usize) -> Vec<usize> {
        match &self.nodes[t] {
            CtNode::Leaf { .. } => Vec::new(),
            CtNode::Product { children } => children.clone(),
            CtNode::Eliminate { child, .. } => vec![*child],
        }
    }

    /// Largest number of elimination nodes on a root-to-leaf path.
    pub fn elimination_depth(&self) -> usize {
        fn go(t: &ConstructionTree, node: usize, guard: usize) -> usize {
            if guard > t.nodes.len() {
                return usize::MAX / 2;
            }
            let own = matches!(t.nodes[node], CtNode::Eliminate { .. }) as usize;
            own + t
                .children(node)
                .into_iter()
                .map(|c| go(t, c, guard + 1))
                .max()
                .unwrap_or(0)
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(self, self.root, 0)
        }
    }

    /// Largest label mentioned anywhere in the tree.
    pub fn label_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n {
                CtNode::Leaf { graph, .. } => {
                    graph.assigned().iter().map(|&(l, _)| l).max().unwrap_or(0)
                }
                CtNode::Eliminate { label, .. } => *label,
                CtNode::Product { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> Value {
        let nodes: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| match n {
                CtNode::Leaf { graph, origin } => {
                    let mut v = json!({ "leaf": codec::to_json_value(graph) });
                    if let Some(o) = origin {
                        v["origin"] = json!(o);
                    }
                    v
                }
                CtNode::Product { children } => json!({ "product": children }),
                CtNode::Eliminate { label, child } => json!({ "eliminate": label, "child": child }),
            })
            .collect();
        json!({ "arity": self.arity, "root": self.root, "nodes": nodes })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Validation(format!("construction tree JSON: {m}"));
        let arity = v.get("arity").and_then(Value::as_u64).ok_or_else(|| bad("missing arity"))? as usize;
        let root = v.get("root").and_then(Value::as_u64).ok_or_else(|| bad("missing root"))? as usize;
        let list = v.get("nodes").and_then(Value::as_array).ok_or_else(|| bad("missing nodes"))?;
        let mut nodes = Vec::new();
        for n in list {
            let idx = |x: &Value| x.as_u64().map(|u| u as usize).ok_or_else(|| bad("bad index"));
            if let Some(g) = n.get("leaf") {
                let graph = codec::from_json_value(g.clone())?.with_arity(arity)?;
                let origin = match n.get("origin") {
                    Some(o) => Some(
                        o.as_array()
                            .ok_or_else(|| bad("origin must be a list"))?
                            .iter()
                            .map(idx)
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    None => None,
                };
                nodes.push(CtNode::Leaf { graph, origin });
            } else if let Some(c) = n.get("product") {
                let children = c
                    .as_array()
                    .ok_or_else(|| bad("product must list children"))?
                    .iter()
                    .map(idx)
                    .collect::<Result<Vec<_>>>()?;
                nodes.push(CtNode::Product { children });
            } else if let Some(l) = n.get("eliminate") {
                let child = idx(n.get("child").ok_or_else(|| bad("missing child"))?)?;
                nodes.push(CtNode::Eliminate { label: idx(l)?, child });
            } else {
                return Err(bad("unknown node kind"));
            }
        }
        if root >= nodes.len() {
            return Err(bad("root out of range"));
        }
        Ok(ConstructionTree { arity, nodes, root })
    }
}

/// Result of deriving every node's graph.
struct Derivation {
    graphs: Vec<Option<LabelledGraph>>,
    /// Vertex of the target graph for every vertex of every node graph.
    to_target: Vec<Vec<usize>>,
}

fn structure_check(t: &ConstructionTree) -> Check {
    let m = t.nodes.len();
    if m == 0 || t.root >= m {
        return Err(Violation::new("structure", "root missing"));
    }
    let mut seen = vec![false; m];
    let mut stack = vec![t.root];
    seen[t.root] = true;
    while let Some(x) = stack.pop() {
        for c in t.children(x) {
            if c >= m {
                return Err(Violation::new("structure", format!("node {x} points to missing node {c}")));
            }
            if seen[c] {
                return Err(Violation::new("structure", format!("node {c} is reached twice")));
            }
            seen[c] = true;
            stack.push(c);
        }
    }
    if let Some(x) = (0..m).find(|&x| !seen[x]) {
        return Err(Violation::new("structure", format!("node {x} is not below the root")));
    }
    Ok(())
}

fn derive(t: &ConstructionTree, f: &LabelledGraph, guarded: bool) -> std::result::Result<Derivation, Violation> {
    structure_check(t)?;
    let m = t.nodes.len();
    // Every leaf vertex gets a global id; products merge ids.
    let mut uf: Vec<usize> = Vec::new();
    let mut origin_of: Vec<Option<usize>> = Vec::new();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        let mut y = x;
        while uf[y] != r {
            let nx = uf[y];
            uf[y] = r;
            y = nx;
        }
        r
    }
    let mut graphs: Vec<Option<LabelledGraph>> = vec![None; m];
    let mut ids: Vec<Vec<usize>> = vec![Vec::new(); m];
    // Post-order.
    let mut order = Vec::new();
    let mut stack = vec![t.root];
    while let Some(x) = stack.pop() {
        order.push(x);
        stack.extend(t.children(x));
    }
    let mut all_origins = true;
    for &x in order.iter().rev() {
        match &t.nodes[x] {
            CtNode::Leaf { graph, origin } => {
                if graph.arity() != t.arity {
                    return Err(Violation::new("leaf arity", format!("leaf {x} has arity {}", graph.arity())));
                }
                if !graph.is_fully_labelled() {
                    return Err(Violation::new("leaf labels", format!("leaf {x} is not fully labelled")));
                }
                if let Some(o) = origin {
                    if o.len() != graph.n() {
                        return Err(Violation::new("leaf origin", format!("leaf {x} origin has wrong length")));
                    }
                } else {
                    all_origins = false;
                }
                let start = uf.len();
                for i in 0..graph.n() {
                    uf.push(start + i);
                    origin_of.push(origin.as_ref().map(|o| o[i]));
                }
                ids[x] = (start..start + graph.n()).collect();
                graphs[x] = Some(graph.clone());
            }
            CtNode::Product { children } => {
                if children.len() < 2 {
                    return Err(Violation::new("product arity", format!("product {x} has fewer than two children")));
                }
                let mut acc = graphs[children[0]].clone().unwrap();
                let mut acc_ids = ids[children[0]].clone();
                for &c in &children[1..] {
                    let other = graphs[c].as_ref().unwrap();
                    let (glued, map) = acc.glue_with_map(other).map_err(|e| Violation::new("product", e.to_string()))?;
                    if glued.loop_suppressed {
                        return Err(Violation::new("product loop", format!("product {x} identifies the ends of an edge")));
                    }
                    let mut next = vec![usize::MAX; glued.graph.n()];
                    let sides = acc_ids.iter().chain(ids[c].iter());
                    for (pos, &id) in map.iter().zip(sides) {
                        if next[*pos] == usize::MAX {
                            next[*pos] = id;
                        } else {
                            let (a, b) = (find(&mut uf, next[*pos]), find(&mut uf, id));
                            if a != b {
                                uf[b] = a;
                            }
                        }
                    }
                    acc = glued.graph;
                    acc_ids = next;
                }
                graphs[x] = Some(acc);
                ids[x] = acc_ids;
            }
            CtNode::Eliminate { label, child } => {
                let g = graphs[*child].as_ref().unwrap();
                let Some(v) = g.label(*label) else {
                    return Err(Violation::new(
                        "elimination",
                        format!("node {x} removes label {label}, which is not assigned below it"),
                    ));
                };
                if guarded && !g.graph.neighbors(v).iter().any(|&w| !g.labels_of(w).is_empty()) {
                    return Err(Violation::new(
                        "guard",
                        format!("node {x} removes label {label} from a vertex without labelled neighbours"),
                    ));
                }
                graphs[x] = Some(g.remove_label(*label).unwrap());
                ids[x] = ids[*child].clone();
            }
        }
    }
    let root_graph = graphs[t.root].clone().unwrap();
    if f.assigned().iter().any(|&(l, _)| l > t.arity) {
        return Err(Violation::new("root graph", "the target carries labels beyond the tree's arity"));
    }
    let target = f.with_arity(t.arity).unwrap();
    let root_ids: Vec<usize> = ids[t.root].iter().map(|&i| find(&mut uf, i)).collect();
    // Position of every root vertex in the target.
    let mut root_map = vec![usize::MAX; root_graph.n()];
    if root_graph.n() != target.n() {
        return Err(Violation::new(
            "root graph",
            format!("derived graph has {} vertices, expected {}", root_graph.n(), target.n()),
        ));
    }
    if all_origins {
        let mut class_origin: HashMap<usize, usize> = HashMap::new();
        for id in 0..uf.len() {
            let r = find(&mut uf, id);
            let o = origin_of[id].unwrap();
            match class_origin.get(&r) {
                Some(&p) if p != o => {
                    return Err(Violation::new(
                        "root graph",
                        format!("leaf vertices with origins {p} and {o} are identified"),
                    ))
                }
                _ => {
                    class_origin.insert(r, o);
                }
            }
        }
        for (x, r) in root_ids.iter().enumerate() {
            root_map[x] = class_origin[r];
        }
        let mut hit = vec![false; target.n()];
        for &y in &root_map {
            if y >= target.n() || std::mem::replace(&mut hit[y], true) {
                return Err(Violation::new("root graph", "origins do not form a bijection onto the target"));
            }
        }
        if root_graph.permute(&root_map) != target {
            return Err(Violation::new("root graph", "derived graph differs from the target under the origins"));
        }
    } else {
        let a = canonise_labelled(&root_graph);
        let b = canonise_labelled(&target);
        if a.form != b.form {
            return Err(Violation::new("root graph", "derived graph is not isomorphic to the target"));
        }
        for (i, &x) in a.order.iter().enumerate() {
            root_map[x] = b.order[i];
        }
    }
    let mut class_pos: HashMap<usize, usize> = HashMap::new();
    for (x, &r) in root_ids.iter().enumerate() {
        class_pos.insert(r, root_map[x]);
    }
    let to_target = ids
        .iter()
        .map(|v| v.iter().map(|&i| class_pos[&find(&mut uf, i)]).collect())
        .collect();
    Ok(Derivation { graphs, to_target })
}

/// Checks a construction tree for the labelled graph `f` within `k` labels and
/// elimination depth `q`.
pub fn verify_ctree(
    f: &LabelledGraph,
    t: &ConstructionTree,
    k: usize,
    q: usize,
    guarded: bool,
) -> Check {
    derive(t, f, guarded)?;
    let used = t.label_count();
    if used > k {
        return Err(Violation::new("labels", format!("uses label {used}, more than {k}")));
    }
    let d = t.elimination_depth();
    if d > q {
        return Err(Violation::new("depth", format!("elimination depth {d} exceeds {q}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Witness sum type

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    Td(TreeDecomposition),
    Pfc(PebbleForestCover),
    Ctree(ConstructionTree),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    Td,
    Pfc,
    Ctree,
}

impl std::str::FromStr for WitnessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td" => Ok(WitnessKind::Td),
            "pfc" => Ok(WitnessKind::Pfc),
            "ctree" => Ok(WitnessKind::Ctree),
            other => invalid(format!("unknown witness kind '{other}'")),
        }
    }
}

/// Measures of a witness. `k` is the pebble/label count it needs
/// (bag size for decompositions) and `depth` its depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Measures {
    pub kind: WitnessKind,
    pub k: usize,
    pub depth: usize,
    pub width: Option<usize>,
    pub elimination_depth: Option<usize>,
}

impl Witness {
    pub fn kind(&self) -> WitnessKind {
        match self {
            Witness::Td(_) => WitnessKind::Td,
            Witness::Pfc(_) => WitnessKind::Pfc,
            Witness::Ctree(_) => WitnessKind::Ctree,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Witness::Td(td) => json!({ "kind": "td", "parent": td.tree.parent, "bags": td.bags }),
            Witness::Pfc(p) => json!({ "kind": "pfc", "parent": p.forest.parent, "pebbles": p.pebbles }),
            Witness::Ctree(t) => {
                let mut v = t.to_json();
                v["kind"] = json!("ctree");
                v
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<Witness> {
        #[derive(Deserialize)]
        struct TdRepr {
            parent: Vec<Option<usize>>,
            bags: Vec<Vec<usize>>,
        }
        #[derive(Deserialize)]
        struct PfcRepr {
            parent: Vec<Option<usize>>,
            pebbles: Vec<usize>,
        }
        let bad = |e: serde_json::Error| Error::Validation(format!("witness JSON: {e}"));
        match v.get("kind").and_then(Value::as_str) {
            Some("td") => {
                let r: TdRepr = serde_json::from_value(v.clone()).map_err(bad)?;
                Ok(Witness::Td(TreeDecomposition::new(r.parent, r.bags)?))
            }
            Some("pfc") => {
                let r: PfcRepr = serde_json::from_value(v.clone()).map_err(bad)?;
                Ok(Witness::Pfc(PebbleForestCover {
                    forest: RootedForest::new(r.parent)?,
                    pebbles: r.pebbles,
                }))
            }
            Some("ctree") => Ok(Witness::Ctree(ConstructionTree::from_json(v)?)),
            _ => invalid("witness JSON needs kind td, pfc or ctree"),
        }
    }
}

pub fn measure(w: &Witness) -> Measures {
    match w {
        Witness::Td(td) => Measures {
            kind: WitnessKind::Td,
            k: td.max_bag(),
            depth: td.depth(),
            width: Some(td.width()),
            elimination_depth: None,
        },
        Witness::Pfc(p) => Measures {
            kind: WitnessKind::Pfc,
            k: p.pebble_count(),
            depth: p.depth(),
            width: None,
            elimination_depth: None,
        },
        Witness::Ctree(t) => Measures {
            kind: WitnessKind::Ctree,
            k: t.label_count(),
            depth: t.elimination_depth(),
            width: None,
            elimination_depth: Some(t.elimination_depth()),
        },
    }
}

/// Verifies any witness for the unlabelled graph `g`.
pub fn verify(g: &Graph, w: &Witness, k: usize, q: usize, guarded: bool) -> Check {
    if guarded && !matches!(w, Witness::Ctree(_)) {
        return Err(Violation::new("guard", "guardedness is defined for construction trees only"));
    }
    match w {
        Witness::Td(td) => verify_td(g, td, k, q),
        Witness::Pfc(p) => verify_pfc(g, p, k, q),
        Witness::Ctree(t) => verify_ctree(&LabelledGraph::unlabelled(g.clone(), t.arity), t, k, q, guarded),
    }
}

// ---------------------------------------------------------------------------
// Conversions

/// Bags are the labelled vertices of every node graph.
pub fn ctree_to_td(f: &LabelledGraph, t: &ConstructionTree) -> Result<TreeDecomposition> {
    let d = derive(t, f, false).map_err(|v| Error::Validation(v.to_string()))?;
    let m = t.nodes.len();
    let mut parent = vec![None; m];
    for x in 0..m {
        for c in t.children(x) {
            parent[c] = Some(x);
        }
    }
    let bags = (0..m)
        .map(|x| {
            let g = d.graphs[x].as_ref().unwrap();
            g.labelled_vertices().into_iter().map(|v| d.to_target[x][v]).collect()
        })
        .collect();
    TreeDecomposition::new(parent, bags)
}

/// Construction tree from a tree decomposition via its nice form: every
/// introduce node gains a leaf holding its bag, forget nodes become
/// eliminations and joins become products.
pub fn td_to_ctree(g: &Graph, td: &TreeDecomposition) -> Result<ConstructionTree> {
    let nice = make_nice(td);
    let k = nice.max_bag().max(1);
    let children = nice.tree.children();
    let root = nice.root();
    // Colours top-down: a vertex is coloured at its forget node.
    let mut colour = vec![0usize; g.n()];
    let mut stack = vec![root];
    while let Some(t) = stack.pop() {
        if let [s] = children[t].as_slice() {
            if nice.bags[*s].len() == nice.bags[t].len() + 1 {
                let v = *nice.bags[*s].iter().find(|v| !nice.bags[t].contains(v)).unwrap();
                let used: Vec<usize> = nice.bags[t].iter().map(|&u| colour[u]).collect();
                colour[v] = (1..=k).find(|c| !used.contains(c)).unwrap();
            }
        }
        stack.extend(children[t].iter().copied());
    }
    let mut nodes: Vec<CtNode> = Vec::new();
    let leaf_of = |bag: &[usize], nodes: &mut Vec<CtNode>| {
        let sub = g.induced(bag);
        let labels: Vec<(usize, usize)> = bag.iter().enumerate().map(|(i, &v)| (colour[v], i)).collect();
        nodes.push(CtNode::Leaf {
            graph: LabelledGraph::new(sub, k, &labels).expect("colours are distinct in a bag"),
            origin: Some(bag.to_vec()),
        });
        nodes.len() - 1
    };
    // Post-order build.
    let mut order = Vec::new();
    let mut st = vec![root];
    while let Some(t) = st.pop() {
        order.push(t);
        st.extend(children[t].iter().copied());
    }
    let mut built = vec![usize::MAX; nice.len()];
    let mut empty_leaf = vec![false; nice.len()];
    for &t in order.iter().rev() {
        let bag = &nice.bags[t];
        built[t] = match children[t].as_slice() {
            [] => {
                empty_leaf[t] = true;
                leaf_of(bag, &mut nodes)
            }
            [s] if nice.bags[*s].len() + 1 == bag.len() => {
                let leaf = leaf_of(bag, &mut nodes);
                if empty_leaf[*s] {
                    // The empty leaf below is absorbed; reuse its slot.
                    let slot = built[*s];
                    nodes.swap(slot, leaf);
                    nodes.pop();
                    slot
                } else {
                    nodes.push(CtNode::Product { children: vec![leaf, built[*s]] });
                    nodes.len() - 1
                }
            }
            [s] => {
                let v = *nice.bags[*s].iter().find(|v| !bag.contains(v)).unwrap();
                nodes.push(CtNode::Eliminate { label: colour[v], child: built[*s] });
                nodes.len() - 1
            }
            kids => {
                let ch = kids.iter().map(|&c| built[c]).collect();
                nodes.push(CtNode::Product { children: ch });
                nodes.len() - 1
            }
        };
    }
    Ok(ConstructionTree { arity: k, root: built[root], nodes })
}

/// Pebble forest cover from the nice form: each vertex sits at the topmost node
/// holding it and takes the least pebble unused by the rest of that bag.
pub fn td_to_pfc(g: &Graph, td: &TreeDecomposition) -> Result<PebbleForestCover> {
    let nice = make_nice(td);
    let k = nice.max_bag().max(1);
    let children = nice.tree.children();
    let n = g.n();
    let mut parent = vec![None; n];
    let mut pebbles = vec![0usize; n];
    // DFS carrying the nearest vertex placed above.
    let mut stack: Vec<(usize, Option<usize>)> = vec![(nice.root(), None)];
    while let Some((t, above)) = stack.pop() {
        let mut here = above;
        let fresh: Vec<usize> = match nice.tree.parent[t] {
            Some(p) => nice.bags[t].iter().copied().filter(|v| !nice.bags[p].contains(v)).collect(),
            None => nice.bags[t].clone(),
        };
        for v in fresh {
            parent[v] = here;
            let used: Vec<usize> = nice.bags[t].iter().filter(|&&u| u != v).map(|&u| pebbles[u]).collect();
            pebbles[v] = (1..=k).find(|p| !used.contains(p)).unwrap();
            here = Some(v);
        }
        for &c in &children[t] {
            stack.push((c, here));
        }
    }
    Ok(PebbleForestCover {
        forest: RootedForest::new(parent)?,
        pebbles,
    })
}

/// Tree decomposition from a pebble forest cover: a fresh root with an empty
/// bag above the forest, and at every vertex the ancestors whose pebble has
/// not been reused on the way down.
pub fn pfc_to_td(g: &Graph, w: &PebbleForestCover) -> Result<TreeDecomposition> {
    let n = g.n();
    let mut parent: Vec<Option<usize>> = w.forest.parent.iter().map(|p| Some(p.unwrap_or(n))).collect();
    parent.push(None);
    let mut bags = Vec::with_capacity(n + 1);
    for t in 0..n {
        let chain = w.forest.chain(t);
        let bag: Vec<usize> = chain
            .iter()
            .enumerate()
            .filter(|&(i, &u)| chain[i + 1..].iter().all(|&x| w.pebbles[x] != w.pebbles[u]))
            .map(|(_, &u)| u)
            .collect();
        bags.push(bag);
    }
    bags.push(Vec::new());
    TreeDecomposition::new(parent, bags)
}

/// Converts a witness for `g` after checking that it is structurally valid.
pub fn convert(g: &Graph, w: &Witness, target: WitnessKind) -> Result<Witness> {
    let m = measure(w);
    if let Err(v) = verify(g, w, m.k.max(1), m.depth, false) {
        return invalid(format!("source witness does not verify: {v}"));
    }
    let td = match w {
        Witness::Td(td) => td.clone(),
        Witness::Pfc(p) => pfc_to_td(g, p)?,
        Witness::Ctree(t) => ctree_to_td(&LabelledGraph::unlabelled(g.clone(), t.arity), t)?,
    };
    Ok(match target {
        WitnessKind::Td => Witness::Td(td),
        WitnessKind::Pfc => match w {
            Witness::Pfc(p) => Witness::Pfc(p.clone()),
            _ => Witness::Pfc(td_to_pfc(g, &td)?),
        },
        WitnessKind::Ctree => match w {
            Witness::Ctree(t) => Witness::Ctree(t.clone()),
            _ => Witness::Ctree(td_to_ctree(g, &td)?),
        },
    })
}

// ---------------------------------------------------------------------------
// Exact search

const INF: u32 = u32::MAX / 2;

/// Least elimination depth for a component `c` hanging below the labelled
/// attachment set `a`, with at most `k` labels alive at once.
struct ElimDp<'a> {
    adj: &'a [u64],
    k: usize,
    guarded: bool,
    memo: HashMap<(u64, u64), u32>,
}

impl<'a> ElimDp<'a> {
    fn new(adj: &'a [u64], k: usize, guarded: bool) -> Self {
        ElimDp { adj, k, guarded, memo: HashMap::new() }
    }

    fn best(&mut self, c: u64, a: u64) -> u32 {
        if let Some(&v) = self.memo.get(&(c, a)) {
            return v;
        }
        let res = self.scan(c, a).map_or(INF, |(_, d)| d);
        self.memo.insert((c, a), res);
        res
    }

    /// Best vertex to eliminate first and the resulting depth.
    fn scan(&mut self, c: u64, a: u64) -> Option<(usize, u32)> {
        if a.count_ones() as usize + 1 > self.k {
            return None;
        }
        let mut best: Option<(usize, u32)> = None;
        for v in mask_bits(c) {
            if self.guarded && self.adj[v] & a == 0 {
                continue;
            }
            let bound = best.map_or(INF, |(_, d)| d);
            let a2 = a | 1 << v;
            let mut worst = 0u32;
            for comp in mask_components(self.adj, c & !(1 << v)) {
                let att = mask_neighbourhood(self.adj, comp) & a2;
                worst = worst.max(self.best(comp, att));
                if worst + 1 >= bound {
                    break;
                }
            }
            if worst + 1 < bound {
                best = Some((v, worst + 1));
            }
        }
        best
    }
}

struct CtBuilder<'a> {
    g: &'a Graph,
    adj: &'a [u64],
    arity: usize,
    nodes: Vec<CtNode>,
    label: Vec<usize>,
}

impl CtBuilder<'_> {
    fn leaf(&mut self, verts: &[usize], edges: &[(usize, usize)], labels: &[Vec<usize>]) -> usize {
        let pos = |v: usize| verts.iter().position(|&x| x == v).unwrap();
        let local: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (pos(u), pos(v))).collect();
        let graph = Graph::from_edges(verts.len(), &local).expect("leaf edges are valid");
        let pairs: Vec<(usize, usize)> = labels
            .iter()
            .enumerate()
            .flat_map(|(i, ls)| ls.iter().map(move |&l| (l, i)))
            .collect();
        self.nodes.push(CtNode::Leaf {
            graph: LabelledGraph::new(graph, self.arity, &pairs).expect("leaf labels are valid"),
            origin: Some(verts.to_vec()),
        });
        self.nodes.len() - 1
    }

    fn combine(&mut self, children: Vec<usize>) -> usize {
        if children.len() == 1 {
            children[0]
        } else {
            self.nodes.push(CtNode::Product { children });
            self.nodes.len() - 1
        }
    }

    fn eliminate_component(&mut self, dp: &mut ElimDp<'_>, c: u64, a: u64) -> usize {
        let (v, _) = dp.scan(c, a).expect("component is feasible");
        let used: Vec<usize> = mask_bits(a).map(|u| self.label[u]).collect();
        let l = (1..=self.arity).find(|l| !used.contains(l)).unwrap();
        self.label[v] = l;
        let mut children = Vec::new();
        let nb = self.adj[v] & a;
        let rest = c & !(1 << v);
        let comps = mask_components(self.adj, rest);
        if nb != 0 || comps.is_empty() {
            let mut verts = vec![v];
            verts.extend(mask_bits(nb));
            let edges: Vec<(usize, usize)> = mask_bits(nb).map(|u| (v, u)).collect();
            let labels: Vec<Vec<usize>> = verts.iter().map(|&u| vec![self.label[u]]).collect();
            children.push(self.leaf(&verts, &edges, &labels));
        }
        let a2 = a | 1 << v;
        for comp in comps {
            let att = mask_neighbourhood(self.adj, comp) & a2;
            children.push(self.eliminate_component(dp, comp, att));
        }
        let child = self.combine(children);
        self.label[v] = 0;
        self.nodes.push(CtNode::Eliminate { label: l, child });
        self.nodes.len() - 1
    }
}

/// Exact least elimination depth of a labelled graph with at most `k` labels
/// alive, or `None` when no `k`-construction tree exists.
pub fn min_elimination_depth(f: &LabelledGraph, k: usize, guarded: bool) -> Option<usize> {
    let (d, _) = labelled_search(f, k, usize::MAX, guarded, false)?;
    Some(d)
}

/// Construction tree for a labelled graph with at most `k` labels and
/// elimination depth at most `q`.
pub fn labelled_witness(f: &LabelledGraph, k: usize, q: usize, guarded: bool) -> Option<ConstructionTree> {
    labelled_search(f, k, q, guarded, true).and_then(|(_, t)| t)
}

fn labelled_search(
    f: &LabelledGraph,
    k: usize,
    q: usize,
    guarded: bool,
    build: bool,
) -> Option<(usize, Option<ConstructionTree>)> {
    let g = &f.graph;
    let n = g.n();
    if n > 64 {
        return None;
    }
    if f.assigned().iter().any(|&(l, _)| l > k) {
        return None;
    }
    let adj = g.masks();
    let lset: u64 = f.labelled_vertices().iter().fold(0, |m, &v| m | 1 << v);
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let comps = mask_components(&adj, full & !lset);
    let mut dp = ElimDp::new(&adj, k, guarded);
    let mut depth = 0u32;
    for &c in &comps {
        let att = mask_neighbourhood(&adj, c) & lset;
        depth = depth.max(dp.best(c, att));
        if depth as usize > q || depth >= INF {
            return None;
        }
    }
    if !build {
        return Some((depth as usize, None));
    }
    let arity = f.arity().max(k.min(n.max(1)));
    let mut b = CtBuilder {
        g,
        adj: &adj,
        arity,
        nodes: Vec::new(),
        label: vec![0; n],
    };
    for v in mask_bits(lset) {
        b.label[v] = f.labels_of(v)[0];
    }
    let mut children = Vec::new();
    if lset != 0 || comps.is_empty() {
        let verts: Vec<usize> = mask_bits(lset).collect();
        let edges: Vec<(usize, usize)> = g
            .edges()
            .into_iter()
            .filter(|&(u, v)| lset >> u & 1 == 1 && lset >> v & 1 == 1)
            .collect();
        let labels: Vec<Vec<usize>> = verts.iter().map(|&v| f.labels_of(v)).collect();
        children.push(b.leaf(&verts, &edges, &labels));
    }
    for &c in &comps {
        let att = mask_neighbourhood(&adj, c) & lset;
        children.push(b.eliminate_component(&mut dp, c, att));
    }
    let root = b.combine(children);
    let _ = b.g;
    Some((depth as usize, Some(ConstructionTree { arity, nodes: b.nodes, root })))
}

/// Depth-bounded search that emits a tree decomposition directly: the node for
/// an eliminated vertex holds it together with its live attachments.
fn td_search(g: &Graph, k: usize, q: usize) -> Option<TreeDecomposition> {
    struct S<'a> {
        adj: &'a [u64],
        k: usize,
        /// Largest depth budget known to fail for a state.
        failed: HashMap<(u64, u64), usize>,
    }
    impl S<'_> {
        fn fits(&mut self, c: u64, a: u64, d: usize) -> Option<usize> {
            if d == 0 || a.count_ones() as usize + 1 > self.k {
                return None;
            }
            if self.failed.get(&(c, a)).is_some_and(|&f| f >= d) {
                return None;
            }
            for v in mask_bits(c) {
                let a2 = a | 1 << v;
                let ok = mask_components(self.adj, c & !(1 << v))
                    .into_iter()
                    .all(|comp| self.fits(comp, mask_neighbourhood(self.adj, comp) & a2, d - 1).is_some());
                if ok {
                    return Some(v);
                }
            }
            let e = self.failed.entry((c, a)).or_insert(0);
            *e = (*e).max(d);
            None
        }
        fn emit(&mut self, c: u64, a: u64, d: usize, up: usize, parent: &mut Vec<Option<usize>>, bags: &mut Vec<Vec<usize>>) {
            let v = self.fits(c, a, d).expect("feasible");
            let a2 = a | 1 << v;
            let id = bags.len();
            bags.push(mask_bits(a2).collect());
            parent.push(Some(up));
            for comp in mask_components(self.adj, c & !(1 << v)) {
                let att = mask_neighbourhood(self.adj, comp) & a2;
                self.emit(comp, att, d - 1, id, parent, bags);
            }
        }
    }
    let n = g.n();
    let adj = g.masks();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut s = S { adj: &adj, k, failed: HashMap::new() };
    let comps = mask_components(&adj, full);
    for &c in &comps {
        s.fits(c, 0, q)?;
    }
    let mut parent = vec![None];
    let mut bags = vec![Vec::new()];
    for &c in &comps {
        s.emit(c, 0, q, 0, &mut parent, &mut bags);
    }
    TreeDecomposition::new(parent, bags).ok()
}

/// Builds the forest top-down with explicit pebbles, trying every pebble
/// already on the chain plus one fresh pebble, and checks the pebble
/// condition on each new edge to the chain.
fn pfc_search(g: &Graph, k: usize, q: usize) -> Option<PebbleForestCover> {
    type Key = (u64, usize, Vec<(usize, usize, bool)>, u64);
    struct S<'a> {
        adj: &'a [u64],
        k: usize,
        failed: HashSet<Key>,
        parent: Vec<Option<usize>>,
        pebbles: Vec<usize>,
    }
    impl S<'_> {
        fn key(&self, c: u64, d: usize, chain: &[(usize, usize)]) -> Key {
            let nb = mask_neighbourhood(self.adj, c);
            let mut used = 0u64;
            let mut rel = Vec::new();
            for (i, &(u, p)) in chain.iter().enumerate() {
                used |= 1 << p;
                if nb >> u & 1 == 1 {
                    let visible = chain[i + 1..].iter().all(|&(_, x)| x != p);
                    rel.push((u, p, visible));
                }
            }
            (c, d, rel, used)
        }
        fn place(&mut self, c: u64, d: usize, chain: &mut Vec<(usize, usize)>) -> bool {
            if d == 0 {
                return false;
            }
            let key = self.key(c, d, chain);
            if self.failed.contains(&key) {
                return false;
            }
            let mut candidates: Vec<usize> = chain.iter().map(|&(_, p)| p).collect();
            candidates.sort_unstable();
            candidates.dedup();
            if let Some(fresh) = (1..=self.k).find(|p| !candidates.contains(p)) {
                candidates.push(fresh);
            }
            for v in mask_bits(c) {
                for &p in &candidates {
                    let ok = chain.iter().enumerate().all(|(i, &(u, pu))| {
                        self.adj[v] >> u & 1 == 0 || (pu != p && chain[i + 1..].iter().all(|&(_, x)| x != pu))
                    });
                    if !ok {
                        continue;
                    }
                    let up = chain.last().map(|&(u, _)| u);
                    chain.push((v, p));
                    let all = mask_components(self.adj, c & !(1 << v))
                        .into_iter()
                        .all(|comp| self.place(comp, d - 1, chain));
                    chain.pop();
                    if all {
                        self.parent[v] = up;
                        self.pebbles[v] = p;
                        return true;
                    }
                }
            }
            self.failed.insert(key);
            false
        }
    }
    let n = g.n();
    let adj = g.masks();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut s = S {
        adj: &adj,
        k,
        failed: HashSet::new(),
        parent: vec![None; n],
        pebbles: vec![1; n],
    };
    for c in mask_components(&adj, full) {
        if !s.place(c, q, &mut Vec::new()) {
            return None;
        }
    }
    Some(PebbleForestCover {
        forest: RootedForest { parent: s.parent },
        pebbles: s.pebbles,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Exhaustive search producing the requested witness kind.
    Search(WitnessKind),
    /// Monotone cops-and-robber game; the winning strategy becomes a decomposition.
    Game,
}

#[derive(Clone, Debug)]
pub struct Membership {
    pub member: bool,
    pub witness: Option<Witness>,
}

/// Search without size bounds; `None` for `k` or `q` means unbounded.
pub fn search_witness(g: &Graph, k: Option<usize>, q: Option<usize>, kind: WitnessKind) -> Option<Witness> {
    let n = g.n();
    let k = k.unwrap_or(n.max(1));
    let q = q.unwrap_or(n);
    if n == 0 {
        return Some(empty_witness(kind));
    }
    if k == 0 || q == 0 {
        return None;
    }
    match kind {
        WitnessKind::Ctree => {
            let f = LabelledGraph::unlabelled(g.clone(), 0);
            labelled_witness(&f, k, q, false).map(Witness::Ctree)
        }
        WitnessKind::Td => td_search(g, k, q).map(Witness::Td),
        WitnessKind::Pfc => pfc_search(g, k, q).map(Witness::Pfc),
    }
}

fn empty_witness(kind: WitnessKind) -> Witness {
    match kind {
        WitnessKind::Td => Witness::Td(TreeDecomposition::new(vec![None], vec![Vec::new()]).unwrap()),
        WitnessKind::Pfc => Witness::Pfc(PebbleForestCover {
            forest: RootedForest { parent: Vec::new() },
            pebbles: Vec::new(),
        }),
        WitnessKind::Ctree => Witness::Ctree(ConstructionTree {
            arity: 0,
            nodes: vec![CtNode::Leaf {
                graph: LabelledGraph::unlabelled(Graph::empty(0), 0),
                origin: Some(Vec::new()),
            }],
            root: 0,
        }),
    }
}

/// Exact membership of `g` in the class for `k` pebbles and depth `q`.
pub fn decide_membership(
    g: &Graph,
    k: Option<usize>,
    q: Option<usize>,
    method: Method,
    bounds: &Bounds,
) -> Result<Membership> {
    let n = g.n();
    let limit = match method {
        Method::Search(_) => bounds.search,
        Method::Game => bounds.game,
    };
    if n > limit {
        return Err(Error::Capability(format!(
            "membership limited to {limit} vertices for this method, got {n}"
        )));
    }
    let witness = match method {
        Method::Search(kind) => search_witness(g, k, q, kind),
        Method::Game => {
            let kk = k.unwrap_or(n.max(1));
            let qq = q.unwrap_or(n);
            if n == 0 {
                Some(empty_witness(WitnessKind::Td))
            } else if kk == 0 || qq == 0 {
                None
            } else {
                let solved = crate::games::solve_cr(g, kk, qq, true, &Bounds::uniform(limit))?;
                if solved.cops_win() {
                    Some(Witness::Td(crate::games::strategy_to_td(g, &solved)?))
                } else {
                    None
                }
            }
        }
    };
    Ok(Membership {
        member: witness.is_some(),
        witness,
    })
}

/// Whether some labelling of at most `k` vertices puts `g` in the guarded
/// labelled class; returns that labelling and its tree.
pub fn guarded_unlabelled_witness(g: &Graph, k: usize, q: usize) -> Option<(LabelledGraph, ConstructionTree)> {
    let n = g.n();
    if n == 0 {
        let f = LabelledGraph::unlabelled(Graph::empty(0), k);
        return labelled_witness(&f, k, q, true).map(|t| (f, t));
    }
    // Small labelled sets first, each component needs at least one label.
    let comps = g.connected_components().len();
    for size in comps..=k.min(n) {
        for set in subsets(n, size) {
            let pairs: Vec<(usize, usize)> = set.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect();
            let f = LabelledGraph::new(g.clone(), k, &pairs).ok()?;
            if let Some(t) = labelled_witness(&f, k, q, true) {
                return Some((f, t));
            }
        }
    }
    None
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            go(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    go(0, n, size, &mut cur, &mut out);
    out
}

/// Isomorphism classes with at most `n` vertices in the class (guarded: the
/// label-free guarded class), in canonical enumeration order.
pub fn enumerate_class(n: usize, k: usize, q: usize, guarded: bool, bounds: &Bounds) -> Result<Vec<Graph>> {
    if n > bounds.enumerate {
        return Err(Error::Capability(format!(
            "enumeration limited to {} vertices, got {n}",
            bounds.enumerate
        )));
    }
    Ok(all_graphs_upto(n)
        .into_iter()
        .filter(|g| {
            if guarded {
                guarded_unlabelled_witness(g, k, q).is_some()
            } else {
                let f = LabelledGraph::unlabelled(g.clone(), 0);
                labelled_search(&f, k, q, false, false).is_some()
            }
        })
        .collect())
}

/// One-labelled graphs (label 1) with at most `n` vertices admitting a
/// (guarded) construction tree within `(k, q)`, one per labelled isomorphism class.
pub fn enumerate_one_labelled(n: usize, k: usize, q: usize, guarded: bool, bounds: &Bounds) -> Result<Vec<LabelledGraph>> {
    if n > bounds.enumerate {
        return Err(Error::Capability(format!(
            "enumeration limited to {} vertices, got {n}",
            bounds.enumerate
        )));
    }
    let mut out = Vec::new();
    for g in all_graphs_upto(n) {
        let mut seen = HashSet::new();
        for v in 0..g.n() {
            let f = LabelledGraph::new(g.clone(), k.max(1), &[(1, v)]).expect("label 1 is in range");
            if !seen.insert(canonise_labelled(&f).form) {
                continue;
            }
            if labelled_search(&f, k, q, guarded, false).is_some() {
                out.push(f);
            }
        }
    }
    Ok(out)
}

/// Ready-made witnesses for small grids.
pub mod grids {
    use super::*;

    /// Path decomposition of `grid(2,5)` through the middle column, with
    /// vertex `(i,j)` as `(i-1)*5 + (j-1)`.
    pub fn grid_2x5_decomposition() -> TreeDecomposition {
        let v = |i, j| Graph::grid_vertex(5, i, j);
        let bags = vec![
            vec![v(1, 3), v(2, 3)],
            vec![v(1, 3), v(2, 3), v(2, 2)],
            vec![v(1, 3), v(2, 3), v(2, 4)],
            vec![v(1, 3), v(1, 2), v(2, 2)],
            vec![v(1, 3), v(1, 4), v(2, 4)],
            vec![v(1, 2), v(2, 2), v(2, 1)],
            vec![v(1, 4), v(2, 4), v(2, 5)],
            vec![v(1, 2), v(1, 1), v(2, 1)],
            vec![v(1, 4), v(1, 5), v(2, 5)],
        ];
        let parent = vec![None, Some(0), Some(0), Some(1), Some(2), Some(3), Some(4), Some(5), Some(6)];
        TreeDecomposition::new(parent, bags).expect("valid tree")
    }

    /// Forest cover of `grid(2,7)` with 4 pebbles and height 6, read off the
    /// construction tree below. Splitting at the middle column first forces a
    /// fifth pebble, so the cover is not symmetric.
    pub fn grid_2x7_forest_cover() -> PebbleForestCover {
        let g = Graph::grid(2, 7).expect("grid");
        match convert(&g, &Witness::Ctree(grid_2x7_construction_tree()), WitnessKind::Pfc) {
            Ok(Witness::Pfc(p)) => p,
            _ => unreachable!("construction trees convert to forest covers"),
        }
    }

    /// 4-label construction tree of `grid(2,7)` with elimination depth 6.
    pub fn grid_2x7_construction_tree() -> ConstructionTree {
        let g = Graph::grid(2, 7).expect("grid");
        labelled_witness(&LabelledGraph::unlabelled(g, 4), 4, 6, false).expect("grid(2,7) admits depth 6 with 4 labels")
    }

    /// Guarded 3-label construction tree of `grid(2,7)` with one labelled
    /// vertex and elimination depth 7.
    pub fn grid_2x7_guarded_construction_tree() -> (LabelledGraph, ConstructionTree) {
        let g = Graph::grid(2, 7).expect("grid");
        for v in 0..14 {
            let f = LabelledGraph::new(g.clone(), 3, &[(1, v)]).expect("label");
            if let Some(t) = labelled_witness(&f, 3, 7, true) {
                return (f, t);
            }
        }
        panic!("no guarded 3-label tree of depth 7 for grid(2,7)");
    }
}
