//! Exact homomorphism counts and the algebra of quantum graphs.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::canon::{canonise_labelled, CanonicalForm};
use crate::codec;
use crate::decomp::{verify_ctree, ConstructionTree, CtNode};
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, LabelledGraph};

/// Number of homomorphisms from `f` to `g` that respect every label of `f`.
pub fn hom_count(f: &LabelledGraph, g: &LabelledGraph) -> Result<BigUint> {
    let Some(fixed) = label_targets(f, g)? else {
        return Ok(BigUint::zero());
    };
    Ok(count_with_fixed(&f.graph, &g.graph, &fixed))
}

/// Hom count between unlabelled graphs.
pub fn hom(f: &Graph, g: &Graph) -> BigUint {
    count_with_fixed(f, g, &vec![None; f.n()])
}

/// Images forced by labels, or `None` when two labels of one vertex disagree in `g`.
fn label_targets(f: &LabelledGraph, g: &LabelledGraph) -> Result<Option<Vec<Option<usize>>>> {
    let mut fixed = vec![None; f.n()];
    for (l, v) in f.assigned() {
        let Some(w) = g.label(l) else {
            return Err(Error::Precondition(format!(
                "label {l} of the pattern is not assigned in the target"
            )));
        };
        match fixed[v] {
            Some(x) if x != w => return Ok(None),
            _ => fixed[v] = Some(w),
        }
    }
    Ok(Some(fixed))
}

/// Backtracking count with some images fixed in advance.
///
/// The pattern splits into the components of `F` minus the fixed vertices; each
/// is counted on its own and the counts multiply. Inside a component the first
/// vertex has the largest degree and later picks prefer vertices adjacent to
/// ones already placed, then larger degree.
pub(crate) fn count_with_fixed(f: &Graph, g: &Graph, fixed: &[Option<usize>]) -> BigUint {
    let gm = g.matrix();
    let gn = g.n();
    for (u, v) in f.edges() {
        if let (Some(a), Some(b)) = (fixed[u], fixed[v]) {
            if !gm[a * gn + b] {
                return BigUint::zero();
            }
        }
    }
    let free: Vec<usize> = (0..f.n()).filter(|&v| fixed[v].is_none()).collect();
    if free.is_empty() {
        return BigUint::one();
    }
    if gn == 0 {
        return BigUint::zero();
    }
    let mut total = BigUint::one();
    for piece in free_components(f, fixed) {
        let order = piece_order(f, &piece);
        let c = count_piece(f, g, &gm, fixed, &order);
        if c.is_zero() {
            return c;
        }
        total *= c;
    }
    total
}

fn free_components(f: &Graph, fixed: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut seen: Vec<bool> = fixed.iter().map(Option::is_some).collect();
    let mut out = Vec::new();
    for s in 0..f.n() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            for &w in f.neighbors(comp[i]) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                }
            }
            i += 1;
        }
        out.push(comp);
    }
    out
}

fn piece_order(f: &Graph, piece: &[usize]) -> Vec<usize> {
    let mut placed = vec![false; f.n()];
    let mut order = Vec::with_capacity(piece.len());
    let mut remaining: Vec<usize> = piece.to_vec();
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .max_by_key(|(_, &v)| {
                let attached = f.neighbors(v).iter().filter(|&&w| placed[w]).count();
                (attached, f.degree(v), std::cmp::Reverse(v))
            })
            .unwrap();
        let v = remaining.swap_remove(idx);
        placed[v] = true;
        order.push(v);
    }
    order
}

fn count_piece(
    f: &Graph,
    g: &Graph,
    gm: &[bool],
    fixed: &[Option<usize>],
    order: &[usize],
) -> BigUint {
    let gn = g.n();
    // For each position, the pattern neighbours whose image is known by then.
    let mut pos = vec![usize::MAX; f.n()];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let constraints: Vec<Vec<std::result::Result<usize, usize>>> = order
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            f.neighbors(v)
                .iter()
                .filter_map(|&w| match fixed[w] {
                    Some(img) => Some(Err(img)),
                    None if pos[w] < i => Some(Ok(pos[w])),
                    None => None,
                })
                .collect()
        })
        .collect();
    // From `tail[i]` on, no position constrains a later one, so the count
    // below level `i` is a product of candidate set sizes.
    let len = order.len();
    let mut tail = vec![false; len + 1];
    tail[len] = true;
    for i in (0..len).rev() {
        tail[i] = tail[i + 1] && (i + 1..len).all(|j| constraints[j].iter().all(|c| !matches!(c, Ok(p) if *p >= i)));
    }
    let words = gn.div_ceil(64);
    let mut adj = vec![0u64; gn * words];
    for x in 0..gn {
        for y in 0..gn {
            if gm[x * gn + y] {
                adj[x * words + y / 64] |= 1 << (y % 64);
            }
        }
    }
    let mut full = vec![!0u64; words];
    if gn % 64 != 0 {
        full[words - 1] = (1u64 << (gn % 64)) - 1;
    }
    let mut st = Search {
        cons: &constraints,
        tail: &tail,
        adj: &adj,
        full: &full,
        words,
        image: vec![0usize; len],
        scratch: vec![0u64; words * len],
        acc: Acc::default(),
    };
    st.rec(0);
    st.acc.finish()
}

#[derive(Default)]
struct Acc {
    small: u128,
    big: BigUint,
}

impl Acc {
    fn add(&mut self, x: u128) {
        match self.small.checked_add(x) {
            Some(s) => self.small = s,
            None => {
                self.big += BigUint::from(self.small);
                self.small = x;
            }
        }
    }
    fn finish(self) -> BigUint {
        self.big + BigUint::from(self.small)
    }
}

struct Search<'a> {
    cons: &'a [Vec<std::result::Result<usize, usize>>],
    tail: &'a [bool],
    adj: &'a [u64],
    full: &'a [u64],
    words: usize,
    image: Vec<usize>,
    scratch: Vec<u64>,
    acc: Acc,
}

impl Search<'_> {
    /// Candidate images for position `i` given the images placed so far.
    fn candidates(&mut self, i: usize) -> u64 {
        let w = self.words;
        let (adj, full) = (self.adj, self.full);
        let cand = &mut self.scratch[i * w..(i + 1) * w];
        cand.copy_from_slice(full);
        for c in &self.cons[i] {
            let x = match *c {
                Ok(p) => self.image[p],
                Err(img) => img,
            };
            for (a, b) in cand.iter_mut().zip(&adj[x * w..(x + 1) * w]) {
                *a &= b;
            }
        }
        cand.iter().map(|x| x.count_ones() as u64).sum()
    }

    fn rec(&mut self, i: usize) {
        if self.tail[i] {
            let mut product = 1u128;
            for j in i..self.cons.len() {
                let c = self.candidates(j) as u128;
                if c == 0 {
                    return;
                }
                match product.checked_mul(c) {
                    Some(p) => product = p,
                    None => {
                        // Rare: fall back to exact arithmetic.
                        let mut big = BigUint::from(product) * BigUint::from(c);
                        for k in j + 1..self.cons.len() {
                            big *= BigUint::from(self.candidates(k));
                        }
                        self.acc.big += big;
                        return;
                    }
                }
            }
            self.acc.add(product);
            return;
        }
        if self.candidates(i) == 0 {
            return;
        }
        let w = self.words;
        for word in 0..w {
            let mut bits = self.scratch[i * w + word];
            while bits != 0 {
                let y = word * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                self.image[i] = y;
                self.rec(i + 1);
            }
        }
    }
}

/// Hom count through a verified construction tree.
pub fn hom_count_structured(
    f: &LabelledGraph,
    witness: &ConstructionTree,
    g: &LabelledGraph,
) -> Result<BigUint> {
    if let Err(v) = verify_ctree(f, witness, usize::MAX, usize::MAX, false) {
        return invalid(format!("construction tree does not verify: {v}"));
    }
    let mut assign: Vec<Option<usize>> = vec![None; witness.arity.max(g.arity())];
    for (l, v) in g.assigned() {
        assign[l - 1] = Some(v);
    }
    for (l, _) in f.assigned() {
        if g.label(l).is_none() {
            return Err(Error::Precondition(format!(
                "label {l} of the pattern is not assigned in the target"
            )));
        }
    }
    let gm = g.graph.matrix();
    Ok(eval_node(witness, witness.root, &g.graph, &gm, &mut assign))
}

fn eval_node(
    t: &ConstructionTree,
    node: usize,
    g: &Graph,
    gm: &[bool],
    assign: &mut Vec<Option<usize>>,
) -> BigUint {
    let n = g.n();
    match &t.nodes[node] {
        CtNode::Leaf { graph, .. } => {
            // A fully labelled leaf has at most one homomorphism, fixed by the labels.
            let mut img = vec![None; graph.n()];
            for (l, v) in graph.assigned() {
                let Some(w) = assign[l - 1] else {
                    return BigUint::zero();
                };
                match img[v] {
                    Some(x) if x != w => return BigUint::zero(),
                    _ => img[v] = Some(w),
                }
            }
            let ok = graph.graph.edges().iter().all(|&(a, b)| match (img[a], img[b]) {
                (Some(x), Some(y)) => gm[x * n + y],
                _ => false,
            });
            if ok {
                BigUint::one()
            } else {
                BigUint::zero()
            }
        }
        CtNode::Product { children } => {
            let mut acc = BigUint::one();
            for &c in children {
                acc *= eval_node(t, c, g, gm, assign);
                if acc.is_zero() {
                    break;
                }
            }
            acc
        }
        CtNode::Eliminate { label, child } => {
            let saved = assign[label - 1];
            let mut acc = BigUint::zero();
            for v in 0..n {
                assign[label - 1] = Some(v);
                acc += eval_node(t, *child, g, gm, assign);
            }
            assign[label - 1] = saved;
            acc
        }
    }
}

/// Entry `v` is `hom(F, G(l -> v))`.
pub fn hom_profile(f: &LabelledGraph, g: &LabelledGraph, l: usize) -> Result<Vec<BigUint>> {
    let arity = g.arity().max(l);
    let g = g.with_arity(arity)?;
    (0..g.n())
        .map(|v| hom_count(f, &g.set_label(l, v)?))
        .collect()
}

/// Finite rational combination of labelled graphs sharing one label arity.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumGraph {
    arity: usize,
    terms: Vec<(BigRational, LabelledGraph)>,
}

/// Largest number of term pairs a single product may expand.
pub const MAX_PRODUCT_TERMS: usize = 1 << 17;

impl QuantumGraph {
    pub fn zero(arity: usize) -> Self {
        QuantumGraph {
            arity,
            terms: Vec::new(),
        }
    }

    /// The empty graph: evaluates to 1 everywhere and is the unit of the product.
    pub fn one(arity: usize) -> Self {
        QuantumGraph::from_graph(LabelledGraph::unlabelled(Graph::empty(0), arity))
    }

    pub fn from_graph(g: LabelledGraph) -> Self {
        QuantumGraph {
            arity: g.arity(),
            terms: vec![(BigRational::one(), g)],
        }
    }

    pub fn from_terms(arity: usize, terms: Vec<(BigRational, LabelledGraph)>) -> Result<Self> {
        if terms.iter().any(|(_, g)| g.arity() != arity) {
            return invalid("all terms must share the label arity");
        }
        let mut q = QuantumGraph { arity, terms };
        q.normalise();
        Ok(q)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[(BigRational, LabelledGraph)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges isomorphic terms (labels respected), drops zero coefficients and
    /// sorts terms by canonical form.
    fn normalise(&mut self) {
        let mut merged: BTreeMap<CanonicalForm, (BigRational, LabelledGraph)> = BTreeMap::new();
        for (c, g) in self.terms.drain(..) {
            let key = canonise_labelled(&g).form;
            merged
                .entry(key)
                .and_modify(|(acc, _)| *acc += &c)
                .or_insert((c, g));
        }
        self.terms = merged
            .into_values()
            .filter(|(c, _)| !c.is_zero())
            .collect();
    }

    fn check_arity(&self, other: &QuantumGraph) -> Result<()> {
        if self.arity != other.arity {
            return invalid(format!(
                "label arities differ ({} vs {})",
                self.arity, other.arity
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &QuantumGraph) -> Result<QuantumGraph> {
        self.check_arity(other)?;
        let mut q = self.clone();
        q.terms.extend(other.terms.iter().cloned());
        q.normalise();
        Ok(q)
    }

    pub fn scale(&self, c: &BigRational) -> QuantumGraph {
        let mut q = QuantumGraph {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(a, g)| (a * c, g.clone()))
                .collect(),
        };
        q.normalise();
        q
    }

    /// Distributes the glue product; terms in which a loop arises are dropped.
    pub fn product(&self, other: &QuantumGraph) -> Result<QuantumGraph> {
        self.check_arity(other)?;
        let pairs = self.len().saturating_mul(other.len());
        if pairs > MAX_PRODUCT_TERMS {
            return Err(Error::Capability(format!(
                "quantum graph product of {} by {} terms exceeds {MAX_PRODUCT_TERMS}",
                self.len(),
                other.len()
            )));
        }
        let mut terms = Vec::with_capacity(pairs);
        for (a, f) in &self.terms {
            for (b, g) in &other.terms {
                let glued = f.glue(g)?;
                if !glued.loop_suppressed {
                    terms.push((a * b, glued.graph));
                }
            }
        }
        let mut q = QuantumGraph {
            arity: self.arity,
            terms,
        };
        q.normalise();
        Ok(q)
    }

    /// Removes label `l` from every term.
    pub fn remove_label(&self, l: usize) -> Result<QuantumGraph> {
        let terms = self
            .terms
            .iter()
            .map(|(c, g)| Ok((c.clone(), g.remove_label(l)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut q = QuantumGraph {
            arity: self.arity,
            terms,
        };
        q.normalise();
        Ok(q)
    }

    pub fn drop_labels(&self) -> QuantumGraph {
        let mut q = QuantumGraph {
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(c, g)| (c.clone(), g.without_labels()))
                .collect(),
        };
        q.normalise();
        q
    }

    pub fn eval(&self, g: &LabelledGraph) -> Result<BigRational> {
        self.evaluator().eval(g)
    }

    /// Precomputes the factorisation of every term for repeated evaluation.
    pub fn evaluator(&self) -> Evaluator {
        Evaluator::new(self)
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(c, g)| {
                json!({
                    "num": c.numer().to_string(),
                    "den": c.denom().to_string(),
                    "graph": codec::to_json_value(g),
                })
            })
            .collect();
        json!({ "arity": self.arity, "terms": terms })
    }

    pub fn from_json(v: &Value) -> Result<QuantumGraph> {
        let bad = |m: &str| Error::Validation(format!("quantum graph JSON: {m}"));
        let terms = v
            .get("terms")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing 'terms'"))?;
        let mut out = Vec::new();
        for t in terms {
            let int = |key: &str| -> Result<BigInt> {
                match t.get(key) {
                    Some(Value::String(s)) => s.parse().map_err(|_| bad("bad integer")),
                    Some(Value::Number(n)) => n
                        .as_i64()
                        .map(BigInt::from)
                        .ok_or_else(|| bad("bad integer")),
                    _ => Err(bad("missing coefficient")),
                }
            };
            let (num, den) = (int("num")?, int("den")?);
            if den.is_zero() {
                return Err(bad("zero denominator"));
            }
            let graph = codec::from_json_value(t.get("graph").cloned().ok_or_else(|| bad("missing graph"))?)?;
            out.push((BigRational::new(num, den), graph));
        }
        let arity = match v.get("arity").and_then(Value::as_u64) {
            Some(a) => a as usize,
            None => out.iter().map(|(_, g)| g.arity()).max().unwrap_or(0),
        };
        let out = out
            .into_iter()
            .map(|(c, g)| Ok((c, g.with_arity(arity)?)))
            .collect::<Result<Vec<_>>>()?;
        QuantumGraph::from_terms(arity, out)
    }
}

/// Lagrange polynomial in `a` that is 1 on `plus` and 0 on `minus`.
pub fn interpolate(
    a: &QuantumGraph,
    plus: &[BigRational],
    minus: &[BigRational],
) -> Result<QuantumGraph> {
    if plus.iter().any(|p| minus.contains(p)) {
        return invalid("interpolation sets overlap");
    }
    let mut points: Vec<(BigRational, bool)> = Vec::new();
    for p in plus {
        if !points.iter().any(|(x, _)| x == p) {
            points.push((p.clone(), true));
        }
    }
    for m in minus {
        if !points.iter().any(|(x, _)| x == m) {
            points.push((m.clone(), false));
        }
    }
    let coeffs = lagrange_coefficients(&points);
    Ok(horner(a, &coeffs)?)
}

/// Monomial coefficients (constant first) of the interpolating polynomial.
pub fn lagrange_coefficients(points: &[(BigRational, bool)]) -> Vec<BigRational> {
    let d = points.len();
    let mut total = vec![BigRational::zero(); d.max(1)];
    for (i, (xi, yi)) in points.iter().enumerate() {
        if !*yi {
            continue;
        }
        let mut basis = vec![BigRational::one()];
        let mut denom = BigRational::one();
        for (j, (xj, _)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut next = vec![BigRational::zero(); basis.len() + 1];
            for (k, c) in basis.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * xj;
            }
            basis = next;
            denom *= xi - xj;
        }
        for (k, c) in basis.iter().enumerate() {
            total[k] += c / &denom;
        }
    }
    while total.len() > 1 && total.last().is_some_and(Zero::is_zero) {
        total.pop();
    }
    total
}

fn horner(a: &QuantumGraph, coeffs: &[BigRational]) -> Result<QuantumGraph> {
    let one = QuantumGraph::one(a.arity());
    let mut acc = QuantumGraph::zero(a.arity());
    for c in coeffs.iter().rev() {
        acc = acc.product(a)?.add(&one.scale(c))?;
    }
    Ok(acc)
}

/// Term-wise evaluation with shared factors.
///
/// Every term splits into its labelled core and the components hanging off it;
/// equal components across terms are counted once per target.
pub struct Evaluator {
    pieces: Vec<Piece>,
    terms: Vec<(BigRational, Option<Vec<usize>>, LabelledGraph)>,
}

struct Piece {
    graph: Graph,
    /// Pattern vertex to label whose target image it must take.
    anchors: Vec<Option<usize>>,
}

impl Evaluator {
    fn new(q: &QuantumGraph) -> Self {
        let mut index: HashMap<CanonicalForm, usize> = HashMap::new();
        let mut pieces = Vec::new();
        let mut terms = Vec::new();
        for (c, f) in &q.terms {
            let labelled: Vec<usize> = f.labelled_vertices().into_iter().collect();
            let mut fixed = vec![None; f.n()];
            for &v in &labelled {
                fixed[v] = Some(v);
            }
            let mut ids = Vec::new();
            let comps = free_components(&f.graph, &fixed);
            for comp in comps {
                let mut verts = comp.clone();
                let attach: Vec<usize> = labelled
                    .iter()
                    .copied()
                    .filter(|&v| comp.iter().any(|&u| f.graph.has_edge(u, v)))
                    .collect();
                verts.extend(attach.iter().copied());
                let sub = f.induced(&verts);
                // Keep one label per attachment so the key ignores unrelated labels.
                let mut keep = LabelledGraph::unlabelled(sub.graph.clone(), f.arity());
                let mut anchors = vec![None; verts.len()];
                for (i, &v) in verts.iter().enumerate().skip(comp.len()) {
                    let l = f.labels_of(v)[0];
                    keep = keep.set_label(l, i).expect("label in range");
                    anchors[i] = Some(l);
                }
                // Edges between attachments belong to the core, not the piece.
                let mut g = Graph::empty(verts.len());
                for (a, b) in sub.graph.edges() {
                    if a < comp.len() || b < comp.len() {
                        g.insert_edge(a, b);
                    }
                }
                let keep = LabelledGraph::new(
                    g.clone(),
                    f.arity(),
                    &keep.assigned(),
                )
                .expect("labels valid");
                let key = canonise_labelled(&keep).form;
                let id = *index.entry(key).or_insert_with(|| {
                    pieces.push(Piece { graph: g, anchors });
                    pieces.len() - 1
                });
                ids.push(id);
            }
            let core = f.induced(&labelled);
            terms.push((c.clone(), Some(ids), core));
        }
        Evaluator { pieces, terms }
    }

    pub fn eval(&self, g: &LabelledGraph) -> Result<BigRational> {
        for (_, _, core) in &self.terms {
            for (l, _) in core.assigned() {
                if g.label(l).is_none() {
                    return Err(Error::Precondition(format!(
                        "label {l} of a term is not assigned in the target"
                    )));
                }
            }
        }
        let counts: Vec<BigUint> = self
            .pieces
            .par_iter()
            .map(|p| {
                let fixed: Vec<Option<usize>> =
                    p.anchors.iter().map(|a| a.and_then(|l| g.label(l))).collect();
                count_with_fixed(&p.graph, &g.graph, &fixed)
            })
            .collect();
        let mut total = BigRational::zero();
        for (c, ids, core) in &self.terms {
            let core_count = hom_count(core, g)?;
            if core_count.is_zero() {
                continue;
            }
            let mut prod = BigInt::from(core_count);
            for &i in ids.as_ref().expect("factored") {
                prod *= BigInt::from(counts[i].clone());
            }
            total += c * BigRational::from_integer(prod);
        }
        Ok(total)
    }
}

/// `n` as an exact rational.
pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Converts an exact rational known to be an integer.
pub fn as_i64(r: &BigRational) -> Option<i64> {
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}
