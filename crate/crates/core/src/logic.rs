//! Counting logic: formulas, evaluation, fragments, and the translations
//! between construction trees, formulas and quantum graphs.
//!
//! Subformulas are shared through `Arc`, so synthesised formulas are DAGs.
//! Evaluation and measurement memoise per shared node.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::canon::{canonise, canonise_labelled};
use crate::config::Bounds;
use crate::decomp::{enumerate_class, labelled_witness, verify_ctree, ConstructionTree, CtNode};
use crate::error::{invalid, Error, Result};
use crate::games::{bijective_pebble_game, PebbleWinner};
use crate::graph::{Graph, LabelledGraph};
use crate::homalg::{hom, interpolate, rat, QuantumGraph};

pub type Phi = Arc<Formula>;

/// Counting first-order formula over the edge relation. Variables are `1..`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Eq(usize, usize),
    Edge(usize, usize),
    Not(Phi),
    Or(Vec<Phi>),
    And(Vec<Phi>),
    /// At least `t` distinct values of `var` satisfy `body`.
    AtLeast { t: usize, var: usize, body: Phi },
    /// Exactly `t` distinct values of `var` satisfy `body`.
    Exactly { t: usize, var: usize, body: Phi },
}

pub fn eq(i: usize, j: usize) -> Phi {
    Arc::new(Formula::Eq(i, j))
}

pub fn edge(i: usize, j: usize) -> Phi {
    Arc::new(Formula::Edge(i, j))
}

pub fn top() -> Phi {
    Arc::new(Formula::True)
}

pub fn bottom() -> Phi {
    Arc::new(Formula::False)
}

pub fn not(f: Phi) -> Phi {
    match &*f {
        Formula::True => bottom(),
        Formula::False => top(),
        Formula::Not(g) => g.clone(),
        _ => Arc::new(Formula::Not(f)),
    }
}

pub fn and(fs: Vec<Phi>) -> Phi {
    let mut out = Vec::new();
    for f in fs {
        match &*f {
            Formula::True => {}
            Formula::False => return bottom(),
            _ => out.push(f),
        }
    }
    match out.len() {
        0 => top(),
        1 => out.pop().unwrap(),
        _ => Arc::new(Formula::And(out)),
    }
}

pub fn or(fs: Vec<Phi>) -> Phi {
    let mut out = Vec::new();
    for f in fs {
        match &*f {
            Formula::False => {}
            Formula::True => return top(),
            _ => out.push(f),
        }
    }
    match out.len() {
        0 => bottom(),
        1 => out.pop().unwrap(),
        _ => Arc::new(Formula::Or(out)),
    }
}

pub fn at_least(t: usize, var: usize, body: Phi) -> Phi {
    if t == 0 {
        return top();
    }
    if *body == Formula::False {
        return bottom();
    }
    Arc::new(Formula::AtLeast { t, var, body })
}

pub fn exactly(t: usize, var: usize, body: Phi) -> Phi {
    if *body == Formula::False {
        return if t == 0 { top() } else { bottom() };
    }
    Arc::new(Formula::Exactly { t, var, body })
}

fn key(f: &Phi) -> usize {
    Arc::as_ptr(f) as usize
}

fn children(f: &Formula) -> Vec<&Phi> {
    match f {
        Formula::Not(g) => vec![g],
        Formula::Or(gs) | Formula::And(gs) => gs.iter().collect(),
        Formula::AtLeast { body, .. } | Formula::Exactly { body, .. } => vec![body],
        _ => Vec::new(),
    }
}

/// Guard variable of a quantifier body `E(x, var) ∧ ...`, if present.
fn guard_of(var: usize, body: &Formula) -> Option<usize> {
    let is_guard = |f: &Formula| match *f {
        Formula::Edge(a, b) if a == var && b != var => Some(b),
        Formula::Edge(a, b) if b == var && a != var => Some(a),
        _ => None,
    };
    match body {
        Formula::And(gs) => gs.iter().find_map(|g| is_guard(g)),
        other => is_guard(other),
    }
}

// ---------------------------------------------------------------------------
// Fragment measures

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fragment {
    pub qr: usize,
    pub variables: BTreeSet<usize>,
    pub free: BTreeSet<usize>,
    pub guarded: bool,
}

impl Fragment {
    pub fn in_ckq(&self, k: usize, q: usize) -> bool {
        self.qr <= q && self.variables.iter().all(|&v| v >= 1 && v <= k)
    }

    pub fn in_gckq(&self, k: usize, q: usize) -> bool {
        self.guarded && self.in_ckq(k, q)
    }
}

pub fn fragment_check(f: &Formula) -> Fragment {
    let mut memo: HashMap<usize, Fragment> = HashMap::new();
    fragment_rec(f, &mut memo)
}

fn fragment_rec(f: &Formula, memo: &mut HashMap<usize, Fragment>) -> Fragment {
    let child = |g: &Phi, memo: &mut HashMap<usize, Fragment>| -> Fragment {
        if let Some(r) = memo.get(&key(g)) {
            return r.clone();
        }
        let r = fragment_rec(g, memo);
        memo.insert(key(g), r.clone());
        r
    };
    match f {
        Formula::True | Formula::False => Fragment {
            qr: 0,
            variables: BTreeSet::new(),
            free: BTreeSet::new(),
            guarded: true,
        },
        Formula::Eq(i, j) | Formula::Edge(i, j) => {
            let vars: BTreeSet<usize> = [*i, *j].into_iter().collect();
            Fragment {
                qr: 0,
                variables: vars.clone(),
                free: vars,
                guarded: true,
            }
        }
        Formula::Not(_) | Formula::Or(_) | Formula::And(_) => {
            let mut out = Fragment {
                qr: 0,
                variables: BTreeSet::new(),
                free: BTreeSet::new(),
                guarded: true,
            };
            for g in children(f) {
                let r = child(g, memo);
                out.qr = out.qr.max(r.qr);
                out.variables.extend(r.variables);
                out.free.extend(r.free);
                out.guarded &= r.guarded;
            }
            out
        }
        Formula::AtLeast { var, body, .. } | Formula::Exactly { var, body, .. } => {
            let mut r = child(body, memo);
            r.qr += 1;
            r.variables.insert(*var);
            r.free.remove(var);
            r.guarded &= guard_of(*var, body).is_some();
            r
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModelsVerdict {
    pub holds: bool,
    /// Free variable to the vertex interpreting it.
    pub assignment: BTreeMap<usize, usize>,
}

pub fn evaluate(f: &Formula, g: &LabelledGraph) -> Result<ModelsVerdict> {
    let frag = fragment_check(f);
    let mut assignment = BTreeMap::new();
    for &x in &frag.free {
        match g.label(x) {
            Some(v) => {
                assignment.insert(x, v);
            }
            None => {
                return Err(Error::Precondition(format!(
                    "free variable x{x} has no label in the graph"
                )))
            }
        }
    }
    let width = frag.variables.iter().max().copied().unwrap_or(0).max(g.arity());
    let mut a: Vec<Option<usize>> = (0..=width).map(|i| if i == 0 { None } else { g.label(i) }).collect();
    let mut ev = ModelChecker::new(&g.graph);
    let holds = ev.check(f, &mut a);
    Ok(ModelsVerdict { holds, assignment })
}

/// Memoising model checker for one graph.
pub struct ModelChecker {
    n: usize,
    matrix: Vec<bool>,
    memo: HashMap<(usize, u128), bool>,
}

impl ModelChecker {
    pub fn new(g: &Graph) -> Self {
        ModelChecker {
            n: g.n(),
            matrix: g.matrix(),
            memo: HashMap::new(),
        }
    }

    fn code(&self, a: &[Option<usize>]) -> Option<u128> {
        let base = self.n as u128 + 1;
        let mut c: u128 = 0;
        for x in a.iter().rev() {
            c = c.checked_mul(base)?.checked_add(x.map_or(0, |v| v as u128 + 1))?;
        }
        Some(c)
    }

    /// Truth under the assignment `a` (index = variable); unassigned
    /// variables in atoms make the atom false.
    pub fn check(&mut self, f: &Formula, a: &mut Vec<Option<usize>>) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Eq(i, j) => match (self.get(a, *i), self.get(a, *j)) {
                (Some(u), Some(v)) => u == v,
                _ => false,
            },
            Formula::Edge(i, j) => match (self.get(a, *i), self.get(a, *j)) {
                (Some(u), Some(v)) => self.matrix[u * self.n + v],
                _ => false,
            },
            Formula::Not(g) => !self.check_shared(g, a),
            Formula::Or(gs) => gs.iter().any(|g| self.check_shared(g, a)),
            Formula::And(gs) => gs.iter().all(|g| self.check_shared(g, a)),
            Formula::AtLeast { t, var, body } => self.count(*var, body, a, *t) >= *t,
            Formula::Exactly { t, var, body } => self.count(*var, body, a, t + 1) == *t,
        }
    }

    fn get(&self, a: &[Option<usize>], i: usize) -> Option<usize> {
        a.get(i).copied().flatten()
    }

    fn check_shared(&mut self, g: &Phi, a: &mut Vec<Option<usize>>) -> bool {
        if !matches!(**g, Formula::AtLeast { .. } | Formula::Exactly { .. }) {
            return self.check(g, a);
        }
        let Some(c) = self.code(a) else {
            return self.check(g, a);
        };
        if let Some(&r) = self.memo.get(&(key(g), c)) {
            return r;
        }
        let r = self.check(g, a);
        self.memo.insert((key(g), c), r);
        r
    }

    /// Number of witnesses for `var`, stopping once `cap` is reached.
    fn count(&mut self, var: usize, body: &Phi, a: &mut Vec<Option<usize>>, cap: usize) -> usize {
        if a.len() <= var {
            a.resize(var + 1, None);
        }
        let saved = a[var];
        let mut c = 0;
        for v in 0..self.n {
            a[var] = Some(v);
            if self.check_shared(body, a) {
                c += 1;
                if c >= cap {
                    break;
                }
            }
        }
        a[var] = saved;
        c
    }
}

// ---------------------------------------------------------------------------
// Text and JSON forms

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(out, "true"),
            Formula::False => write!(out, "false"),
            Formula::Eq(i, j) => write!(out, "(= x{i} x{j})"),
            Formula::Edge(i, j) => write!(out, "(E x{i} x{j})"),
            Formula::Not(g) => write!(out, "(not {g})"),
            Formula::Or(gs) | Formula::And(gs) => {
                write!(out, "({}", if matches!(self, Formula::Or(_)) { "or" } else { "and" })?;
                for g in gs {
                    write!(out, " {g}")?;
                }
                write!(out, ")")
            }
            Formula::AtLeast { t, var, body } => write!(out, "(geq {t} x{var} {body})"),
            Formula::Exactly { t, var, body } => write!(out, "(exactly {t} x{var} {body})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Lexer {
    fn new(src: &str) -> Self {
        let mut toks = Vec::new();
        let (mut line, mut col) = (1, 1);
        let mut word = String::new();
        let mut start = (1, 1);
        for ch in src.chars() {
            let boundary = ch.is_whitespace() || ch == '(' || ch == ')';
            if boundary && !word.is_empty() {
                toks.push((Tok::Word(std::mem::take(&mut word)), start.0, start.1));
            }
            match ch {
                '(' => toks.push((Tok::Open, line, col)),
                ')' => toks.push((Tok::Close, line, col)),
                c if c.is_whitespace() => {}
                c => {
                    if word.is_empty() {
                        start = (line, col);
                    }
                    word.push(c);
                }
            }
            if ch == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        if !word.is_empty() {
            toks.push((Tok::Word(word), start.0, start.1));
        }
        Lexer { toks, pos: 0, end: (line, col) }
    }

    fn err<T>(&self, at: Option<(usize, usize)>, msg: impl Into<String>) -> Result<T> {
        let (line, column) = at.unwrap_or(self.end);
        Err(Error::Parse { line, column, message: msg.into() })
    }

    fn here(&self) -> Option<(usize, usize)> {
        self.toks.get(self.pos).map(|t| (t.1, t.2))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn word(&mut self, what: &str) -> Result<String> {
        let at = self.here();
        match self.next() {
            Some(Tok::Word(w)) => Ok(w),
            Some(_) => self.err(at, format!("expected {what}")),
            None => self.err(None, format!("expected {what}, found end of input")),
        }
    }

    fn var(&mut self) -> Result<usize> {
        let at = self.here();
        let w = self.word("a variable")?;
        match w.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            Some(v) if v >= 1 => Ok(v),
            _ => self.err(at, format!("expected a variable like x1, found '{w}'")),
        }
    }

    fn number(&mut self) -> Result<usize> {
        let at = self.here();
        let w = self.word("a number")?;
        w.parse().or_else(|_| self.err(at, format!("expected a number, found '{w}'")))
    }

    fn formula(&mut self) -> Result<Phi> {
        let at = self.here();
        match self.next() {
            Some(Tok::Word(w)) => match w.as_str() {
                "true" => Ok(top()),
                "false" => Ok(bottom()),
                _ => self.err(at, format!("unexpected '{w}'")),
            },
            Some(Tok::Close) => self.err(at, "unexpected ')'"),
            None => self.err(None, "unexpected end of input"),
            Some(Tok::Open) => {
                let op_at = self.here();
                let op = self.word("an operator")?;
                let f = match op.as_str() {
                    "=" | "E" => {
                        let (i, j) = (self.var()?, self.var()?);
                        Arc::new(if op == "=" { Formula::Eq(i, j) } else { Formula::Edge(i, j) })
                    }
                    "not" => Arc::new(Formula::Not(self.formula()?)),
                    "or" | "and" => {
                        let mut gs = Vec::new();
                        while !matches!(self.toks.get(self.pos), Some((Tok::Close, _, _)) | None) {
                            gs.push(self.formula()?);
                        }
                        Arc::new(if op == "or" { Formula::Or(gs) } else { Formula::And(gs) })
                    }
                    "geq" | "exactly" => {
                        let t = self.number()?;
                        let var = self.var()?;
                        let body = self.formula()?;
                        Arc::new(if op == "geq" {
                            Formula::AtLeast { t, var, body }
                        } else {
                            Formula::Exactly { t, var, body }
                        })
                    }
                    other => return self.err(op_at, format!("unknown operator '{other}'")),
                };
                let close_at = self.here();
                match self.next() {
                    Some(Tok::Close) => Ok(f),
                    Some(_) => self.err(close_at, "expected ')'"),
                    None => self.err(None, "expected ')', found end of input"),
                }
            }
        }
    }
}

pub fn parse_formula(src: &str) -> Result<Phi> {
    let mut lx = Lexer::new(src);
    let f = lx.formula()?;
    if lx.pos < lx.toks.len() {
        return lx.err(lx.here(), "trailing input after formula");
    }
    Ok(f)
}

pub fn formula_to_json(f: &Formula) -> Value {
    match f {
        Formula::True => json!({"op": "true"}),
        Formula::False => json!({"op": "false"}),
        Formula::Eq(i, j) => json!({"op": "eq", "vars": [i, j]}),
        Formula::Edge(i, j) => json!({"op": "edge", "vars": [i, j]}),
        Formula::Not(g) => json!({"op": "not", "arg": formula_to_json(g)}),
        Formula::Or(gs) => json!({"op": "or", "args": gs.iter().map(|g| formula_to_json(g)).collect::<Vec<_>>()}),
        Formula::And(gs) => json!({"op": "and", "args": gs.iter().map(|g| formula_to_json(g)).collect::<Vec<_>>()}),
        Formula::AtLeast { t, var, body } => json!({"op": "geq", "t": t, "var": var, "body": formula_to_json(body)}),
        Formula::Exactly { t, var, body } => json!({"op": "exactly", "t": t, "var": var, "body": formula_to_json(body)}),
    }
}

pub fn formula_from_json(v: &Value) -> Result<Phi> {
    let bad = |m: String| Error::Validation(format!("formula JSON: {m}"));
    let op = v.get("op").and_then(Value::as_str).ok_or_else(|| bad("missing 'op'".into()))?;
    let num = |k: &str| -> Result<usize> {
        v.get(k)
            .and_then(Value::as_u64)
            .map(|x| x as usize)
            .ok_or_else(|| bad(format!("missing number '{k}'")))
    };
    let vars = || -> Result<(usize, usize)> {
        let a = v.get("vars").and_then(Value::as_array).ok_or_else(|| bad("missing 'vars'".into()))?;
        let get = |i: usize| a.get(i).and_then(Value::as_u64).map(|x| x as usize).filter(|&x| x >= 1);
        match (a.len(), get(0), get(1)) {
            (2, Some(i), Some(j)) => Ok((i, j)),
            _ => Err(bad("'vars' must hold two variables >= 1".into())),
        }
    };
    let sub = |k: &str| -> Result<Phi> { formula_from_json(v.get(k).ok_or_else(|| bad(format!("missing '{k}'")))?) };
    Ok(Arc::new(match op {
        "true" => Formula::True,
        "false" => Formula::False,
        "eq" => {
            let (i, j) = vars()?;
            Formula::Eq(i, j)
        }
        "edge" => {
            let (i, j) = vars()?;
            Formula::Edge(i, j)
        }
        "not" => Formula::Not(sub("arg")?),
        "or" | "and" => {
            let args = v.get("args").and_then(Value::as_array).ok_or_else(|| bad("missing 'args'".into()))?;
            let gs = args.iter().map(formula_from_json).collect::<Result<Vec<_>>>()?;
            if op == "or" {
                Formula::Or(gs)
            } else {
                Formula::And(gs)
            }
        }
        "geq" | "exactly" => {
            let (t, var, body) = (num("t")?, num("var")?, sub("body")?);
            if var == 0 {
                return Err(bad("variables start at 1".into()));
            }
            if op == "geq" {
                Formula::AtLeast { t, var, body }
            } else {
                Formula::Exactly { t, var, body }
            }
        }
        other => return Err(bad(format!("unknown op '{other}'"))),
    }))
}

// ---------------------------------------------------------------------------
// Formula to quantum graph

/// Quantum graph that evaluates to `[G ⊨ φ]` on every labelled graph with
/// exactly `n` vertices interpreting the free variables. With `guarded`,
/// quantifiers are translated through their guard edge.
pub fn synth_qg(f: &Formula, n: usize, guarded: bool) -> Result<QuantumGraph> {
    let frag = fragment_check(f);
    if guarded && !frag.guarded {
        return invalid("formula is not in the guarded fragment");
    }
    let arity = frag.variables.iter().max().copied().unwrap_or(0).max(1);
    let mut s = QgSynth { n, arity, guarded, memo: HashMap::new() };
    let out = s.go(f)?;
    Ok(if frag.free.is_empty() { out.drop_labels() } else { out })
}

struct QgSynth {
    n: usize,
    arity: usize,
    guarded: bool,
    memo: HashMap<usize, QuantumGraph>,
}

impl QgSynth {
    fn labelled(&self, g: Graph, labels: &[(usize, usize)]) -> Result<QuantumGraph> {
        Ok(QuantumGraph::from_graph(LabelledGraph::new(g, self.arity, labels)?))
    }

    fn shared(&mut self, g: &Phi) -> Result<QuantumGraph> {
        if let Some(q) = self.memo.get(&key(g)) {
            return Ok(q.clone());
        }
        let q = self.go(g)?;
        self.memo.insert(key(g), q.clone());
        Ok(q)
    }

    fn counts(&self, lo: usize, hi: usize) -> Vec<BigRational> {
        (lo..=hi.min(self.n)).map(|c| rat(c as i64)).collect()
    }

    fn go(&mut self, f: &Formula) -> Result<QuantumGraph> {
        let one = QuantumGraph::one(self.arity);
        match f {
            Formula::True => Ok(one),
            Formula::False => Ok(QuantumGraph::zero(self.arity)),
            Formula::Eq(i, j) => {
                let labels: Vec<(usize, usize)> = if i == j { vec![(*i, 0)] } else { vec![(*i, 0), (*j, 0)] };
                self.labelled(Graph::empty(1), &labels)
            }
            Formula::Edge(i, j) => {
                if i == j {
                    return Ok(QuantumGraph::zero(self.arity));
                }
                self.labelled(Graph::path(2)?, &[(*i, 0), (*j, 1)])
            }
            Formula::Not(g) => {
                let a = self.shared(g)?;
                one.add(&a.scale(&-BigRational::one()))
            }
            Formula::And(gs) => {
                let mut acc = one;
                for g in gs {
                    acc = acc.product(&self.shared(g)?)?;
                }
                Ok(acc)
            }
            Formula::Or(gs) => {
                let mut acc = QuantumGraph::zero(self.arity);
                for g in gs {
                    let b = self.shared(g)?;
                    let sum = acc.add(&b)?;
                    acc = interpolate(&sum, &[rat(1), rat(2)], &[rat(0)])?;
                }
                Ok(acc)
            }
            Formula::AtLeast { t, var, body } | Formula::Exactly { t, var, body } => {
                let exact = matches!(f, Formula::Exactly { .. });
                let count = self.count_graph(*var, body)?;
                let (plus, minus): (Vec<BigRational>, Vec<BigRational>) = if exact {
                    if *t > self.n {
                        return Ok(QuantumGraph::zero(self.arity));
                    }
                    let all = self.counts(0, self.n);
                    all.into_iter().partition(|c| *c == rat(*t as i64))
                } else {
                    if *t == 0 {
                        return Ok(one);
                    }
                    if *t > self.n {
                        return Ok(QuantumGraph::zero(self.arity));
                    }
                    (self.counts(*t, self.n), self.counts(0, t - 1))
                };
                interpolate(&count, &plus, &minus)
            }
        }
    }

    /// Quantum graph counting the values of `var` that satisfy `body`.
    fn count_graph(&mut self, var: usize, body: &Phi) -> Result<QuantumGraph> {
        let guard = if self.guarded { guard_of(var, body) } else { None };
        let a = match (guard, &**body) {
            (Some(x), Formula::And(gs)) => {
                let rest: Vec<Phi> = gs
                    .iter()
                    .filter(|g| !matches!(***g, Formula::Edge(a, b) if (a, b) == (x, var) || (a, b) == (var, x)))
                    .cloned()
                    .collect();
                let inner = self.shared(&and(rest))?;
                inner.product(&self.labelled(Graph::path(2)?, &[(x, 0), (var, 1)])?)?
            }
            (Some(x), _) => self.labelled(Graph::path(2)?, &[(x, 0), (var, 1)])?,
            (None, _) => {
                let inner = self.shared(body)?;
                inner.product(&self.labelled(Graph::empty(1), &[(var, 0)])?)?
            }
        };
        a.remove_label(var)
    }
}

/// Whether every term of `q` has a (guarded) construction tree within `(k, q)`.
pub fn terms_in_class(qg: &QuantumGraph, k: usize, q: usize, guarded: bool) -> Result<()> {
    // Components carry disjoint label sets, so a term is in the class when
    // each component is; equal components are checked once.
    let mut known: HashMap<Vec<u64>, bool> = HashMap::new();
    for (_, t) in qg.terms() {
        let f = if t.assigned().is_empty() && !guarded {
            LabelledGraph::unlabelled(t.graph.clone(), 0)
        } else {
            t.clone()
        };
        let fits = f.graph.connected_components().iter().all(|c| {
            let part = f.induced(c);
            let form = canonise_labelled(&part).form.0;
            *known.entry(form).or_insert_with(|| labelled_witness(&part, k, q, guarded).is_some())
        });
        if !fits {
            return invalid(format!(
                "term {} has no construction tree within k={k}, q={q}",
                crate::codec::encode_text(t)
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Construction tree to formula

/// Formula that holds in a labelled graph with at most `max_n` vertices
/// exactly when it has `m` homomorphisms from `f`. Quantifier rank equals the
/// elimination depth of `w` and variables are its labels.
pub fn synth_formula(f: &LabelledGraph, w: &ConstructionTree, m: &BigUint, guarded: bool, max_n: usize) -> Result<Phi> {
    if let Err(v) = verify_ctree(f, w, usize::MAX, usize::MAX, guarded) {
        return invalid(format!("construction tree does not verify: {v}"));
    }
    let mut s = FormulaSynth {
        tree: w,
        max_n: BigUint::from(max_n),
        guarded,
        graphs: HashMap::new(),
        bounds: HashMap::new(),
        memo: HashMap::new(),
    };
    s.prepare(w.root)?;
    Ok(s.phi(w.root, m))
}

struct FormulaSynth<'a> {
    tree: &'a ConstructionTree,
    max_n: BigUint,
    guarded: bool,
    graphs: HashMap<usize, LabelledGraph>,
    /// Largest hom count into graphs with at most `max_n` vertices.
    bounds: HashMap<usize, BigUint>,
    memo: HashMap<(usize, BigUint), Phi>,
}

impl FormulaSynth<'_> {
    fn prepare(&mut self, t: usize) -> Result<LabelledGraph> {
        let g = match &self.tree.nodes[t] {
            CtNode::Leaf { graph, .. } => graph.clone(),
            CtNode::Product { children } => {
                let mut acc: Option<LabelledGraph> = None;
                for &c in children {
                    let h = self.prepare(c)?;
                    acc = Some(match acc {
                        None => h,
                        Some(a) => a.product(&h)?,
                    });
                }
                acc.expect("products have children")
            }
            CtNode::Eliminate { label, child } => self.prepare(*child)?.remove_label(*label)?,
        };
        let free = g.n() - g.labelled_vertices().len();
        self.bounds.insert(t, self.max_n.pow(free as u32));
        self.graphs.insert(t, g.clone());
        Ok(g)
    }

    fn phi(&mut self, t: usize, m: &BigUint) -> Phi {
        if *m > self.bounds[&t] {
            return bottom();
        }
        if let Some(f) = self.memo.get(&(t, m.clone())) {
            return f.clone();
        }
        let f = match self.tree.nodes[t].clone() {
            CtNode::Leaf { graph, .. } => {
                let rep = |v: usize| graph.labels_of(v)[0];
                let mut parts = Vec::new();
                for v in 0..graph.n() {
                    let ls = graph.labels_of(v);
                    for &l in &ls[1..] {
                        parts.push(eq(ls[0], l));
                    }
                }
                for (u, v) in graph.graph.edges() {
                    parts.push(edge(rep(u), rep(v)));
                }
                let leaf = and(parts);
                if m.is_zero() {
                    not(leaf)
                } else if m.is_one() {
                    leaf
                } else {
                    bottom()
                }
            }
            CtNode::Product { children } => {
                if m.is_zero() {
                    let zero = BigUint::zero();
                    or(children.iter().map(|&c| self.phi(c, &zero)).collect())
                } else {
                    let mut out = Vec::new();
                    let mut chosen = Vec::new();
                    self.factorisations(&children, m, &mut chosen, &mut out);
                    or(out)
                }
            }
            CtNode::Eliminate { label, child } => self.eliminate(label, child, m),
        };
        self.memo.insert((t, m.clone()), f.clone());
        f
    }

    fn factorisations(&mut self, children: &[usize], m: &BigUint, chosen: &mut Vec<Phi>, out: &mut Vec<Phi>) {
        let Some((&c, rest)) = children.split_first() else {
            if m.is_one() {
                out.push(and(chosen.clone()));
            }
            return;
        };
        if rest.is_empty() {
            let f = self.phi(c, m);
            if *f != Formula::False {
                chosen.push(f);
                out.push(and(chosen.clone()));
                chosen.pop();
            }
            return;
        }
        let bound = self.bounds[&c].clone();
        let mut d = BigUint::one();
        while d <= *m && d <= bound {
            if (m % &d).is_zero() {
                let f = self.phi(c, &d);
                if *f != Formula::False {
                    chosen.push(f);
                    self.factorisations(rest, &(m / &d), chosen, out);
                    chosen.pop();
                }
            }
            d += 1u32;
        }
    }

    /// Guard label for eliminating `label` below node `child`.
    fn guard(&self, label: usize, child: usize) -> Option<usize> {
        let g = &self.graphs[&child];
        let v = g.label(label)?;
        g.graph
            .neighbors(v)
            .iter()
            .flat_map(|&u| g.labels_of(u))
            .find(|&l| l != label)
    }

    fn eliminate(&mut self, label: usize, child: usize, m: &BigUint) -> Phi {
        let guard = if self.guarded { self.guard(label, child) } else { None };
        let wrap = |body: Phi| -> Phi {
            match guard {
                Some(x) => and(vec![edge(x, label), body]),
                None => body,
            }
        };
        let max_count = self.max_n.to_usize().unwrap_or(usize::MAX);
        let nonzero = wrap(not(self.phi(child, &BigUint::zero())));
        if m.is_zero() {
            return exactly(0, label, nonzero);
        }
        // m = Σ c_i m_i with distinct m_i ≥ 1, c_i ≥ 1 and Σ c_i ≤ max_n.
        let bound = self.bounds[&child].clone().min(m.clone());
        let mut values = Vec::new();
        let mut v = BigUint::one();
        while v <= bound {
            if *self.phi(child, &v) != Formula::False {
                values.push(v.clone());
            }
            v += 1u32;
        }
        values.reverse();
        let mut found: Vec<Vec<(usize, BigUint)>> = Vec::new();
        decompose(&values, m, max_count, &mut Vec::new(), &mut |parts| found.push(parts.to_vec()));
        let mut disj = Vec::new();
        for parts in found {
            let total: usize = parts.iter().map(|p| p.0).sum();
            let mut conj = vec![exactly(total, label, nonzero.clone())];
            for (c, mi) in parts {
                conj.push(exactly(c, label, wrap(self.phi(child, &mi))));
            }
            disj.push(and(conj));
        }
        or(disj)
    }
}

/// Enumerates `m = Σ c_i v_i` over distinct values (descending) with
/// multiplicities summing to at most `budget`.
fn decompose(
    values: &[BigUint],
    m: &BigUint,
    budget: usize,
    parts: &mut Vec<(usize, BigUint)>,
    emit: &mut dyn FnMut(&[(usize, BigUint)]),
) {
    if m.is_zero() {
        emit(parts);
        return;
    }
    if budget == 0 {
        return;
    }
    for (i, v) in values.iter().enumerate() {
        if v > m {
            continue;
        }
        // Remaining values are smaller; prune when even `budget` copies of v fall short.
        if v * BigUint::from(budget) < *m {
            break;
        }
        let mut c = 1;
        while c <= budget && v * BigUint::from(c) <= *m {
            parts.push((c, v.clone()));
            decompose(&values[i + 1..], &(m - v * BigUint::from(c)), budget - c, parts, emit);
            parts.pop();
            c += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Type refinement

/// Counting types of partial assignments `{1..k} ⇀ V` over a family of
/// graphs, refined round by round. Every class carries a formula whose truth
/// set, among assignments with the same domain in the family, is the class.
pub struct TypeRefinement {
    k: usize,
    guarded: bool,
    graphs: Vec<Graph>,
    /// `classes[r][g][code]`.
    classes: Vec<Vec<Vec<usize>>>,
    formulas: Vec<Vec<Phi>>,
    /// Per level and class: counts `(var, guard, class) -> count` of the
    /// signature that created it.
    signatures: Vec<Vec<BTreeMap<(usize, usize, usize), usize>>>,
}

fn decode(code: usize, n: usize, k: usize) -> Vec<Option<usize>> {
    let mut a = vec![None; k + 1];
    let mut c = code;
    for slot in a.iter_mut().skip(1) {
        let d = c % (n + 1);
        c /= n + 1;
        *slot = d.checked_sub(1);
    }
    a
}

fn encode(a: &[Option<usize>], n: usize) -> usize {
    a.iter().skip(1).rev().fold(0, |c, x| c * (n + 1) + x.map_or(0, |v| v + 1))
}

const NO_GUARD: usize = 0;
const TOTAL: usize = usize::MAX;

impl TypeRefinement {
    pub fn new(graphs: &[Graph], k: usize, guarded: bool, rounds: usize) -> Self {
        let mut t = TypeRefinement {
            k,
            guarded,
            graphs: graphs.to_vec(),
            classes: Vec::new(),
            formulas: Vec::new(),
            signatures: Vec::new(),
        };
        t.level_zero();
        for _ in 0..rounds {
            t.refine();
        }
        t
    }

    pub fn rounds(&self) -> usize {
        self.classes.len() - 1
    }

    fn codes(&self, g: usize) -> usize {
        (self.graphs[g].n() + 1).pow(self.k as u32)
    }

    fn level_zero(&mut self) {
        let mut ids: BTreeMap<(u32, Vec<(bool, bool)>), usize> = BTreeMap::new();
        let mut raw: Vec<Vec<(u32, Vec<(bool, bool)>)>> = Vec::new();
        for (gi, g) in self.graphs.iter().enumerate() {
            let mut row = Vec::new();
            for code in 0..self.codes(gi) {
                let a = decode(code, g.n(), self.k);
                let mut dom = 0u32;
                let mut pairs = Vec::new();
                for i in 1..=self.k {
                    if a[i].is_some() {
                        dom |= 1 << i;
                    }
                    for j in i + 1..=self.k {
                        if let (Some(u), Some(v)) = (a[i], a[j]) {
                            pairs.push((u == v, g.has_edge(u, v)));
                        }
                    }
                }
                let sig = (dom, pairs);
                ids.entry(sig.clone()).or_insert(0);
                row.push(sig);
            }
            raw.push(row);
        }
        let mut formulas = Vec::new();
        for (i, (sig, id)) in ids.iter_mut().enumerate() {
            *id = i;
            let (dom, pairs) = sig;
            let vars: Vec<usize> = (1..=self.k).filter(|&v| dom >> v & 1 == 1).collect();
            let mut parts = Vec::new();
            if vars.len() == 1 {
                parts.push(eq(vars[0], vars[0]));
            }
            let mut it = pairs.iter();
            for (x, &i) in vars.iter().enumerate() {
                for &j in &vars[x + 1..] {
                    let &(same, adj) = it.next().expect("pair");
                    parts.push(if same { eq(i, j) } else { not(eq(i, j)) });
                    parts.push(if adj { edge(i, j) } else { not(edge(i, j)) });
                }
            }
            formulas.push(and(parts));
        }
        let classes = raw.into_iter().map(|row| row.into_iter().map(|s| ids[&s]).collect()).collect();
        self.classes.push(classes);
        self.formulas.push(formulas);
        self.signatures.push(vec![BTreeMap::new(); ids.len()]);
    }

    fn domain(a: &[Option<usize>]) -> u32 {
        a.iter().enumerate().fold(0, |d, (i, x)| if x.is_some() { d | 1 << i } else { d })
    }

    fn refine(&mut self) {
        let r = self.classes.len() - 1;
        let prev = &self.classes[r];
        // Signature: old class and counts keyed by (var, guard, class); the
        // class TOTAL counts every candidate value.
        type Sig = (usize, BTreeMap<(usize, usize, usize), usize>);
        let mut raw: Vec<Vec<Sig>> = Vec::new();
        let mut domains: Vec<Vec<u32>> = Vec::new();
        for (gi, g) in self.graphs.iter().enumerate() {
            let n = g.n();
            let mut row = Vec::new();
            let mut drow = Vec::new();
            for code in 0..self.codes(gi) {
                let mut a = decode(code, n, self.k);
                let mut counts = BTreeMap::new();
                for i in 1..=self.k {
                    let guards: Vec<usize> = if self.guarded {
                        (1..=self.k).filter(|&j| j != i && a[j].is_some()).collect()
                    } else {
                        vec![NO_GUARD]
                    };
                    let saved = a[i];
                    for &j in &guards {
                        let range: Vec<usize> = if j == NO_GUARD {
                            (0..n).collect()
                        } else {
                            g.neighbors(a[j].unwrap()).to_vec()
                        };
                        counts.insert((i, j, TOTAL), range.len());
                        for v in range {
                            a[i] = Some(v);
                            *counts.entry((i, j, prev[gi][encode(&a, n)])).or_insert(0) += 1;
                        }
                        a[i] = saved;
                    }
                }
                drow.push(Self::domain(&a));
                row.push((prev[gi][code], counts));
            }
            raw.push(row);
            domains.push(drow);
        }
        // Conjuncts shared by every assignment with the same domain are dropped.
        let mut universal: HashMap<u32, BTreeMap<(usize, usize, usize), usize>> = HashMap::new();
        for (row, drow) in raw.iter().zip(&domains) {
            for (sig, &d) in row.iter().zip(drow) {
                universal
                    .entry(d)
                    .and_modify(|m| m.retain(|k, v| sig.1.get(k) == Some(v)))
                    .or_insert_with(|| sig.1.clone());
            }
        }
        let mut ids: BTreeMap<Sig, usize> = BTreeMap::new();
        let mut dom_of: BTreeMap<Sig, u32> = BTreeMap::new();
        for (row, drow) in raw.iter().zip(&domains) {
            for (sig, &d) in row.iter().zip(drow) {
                ids.entry(sig.clone()).or_insert(0);
                dom_of.insert(sig.clone(), d);
            }
        }
        let mut formulas = Vec::new();
        let mut signatures = Vec::new();
        for (i, (sig, id)) in ids.iter_mut().enumerate() {
            *id = i;
            let d = dom_of[sig];
            let common = &universal[&d];
            let mut parts = vec![self.formulas[r][sig.0].clone()];
            for (&(var, j, cls), &c) in &sig.1 {
                if common.get(&(var, j, cls)) != Some(&c) {
                    parts.push(self.count_formula(r, var, j, cls, c));
                }
            }
            formulas.push(and(parts));
            signatures.push(sig.1.clone());
        }
        let classes = raw.into_iter().map(|row| row.into_iter().map(|s| ids[&s]).collect()).collect();
        self.classes.push(classes);
        self.formulas.push(formulas);
        self.signatures.push(signatures);
    }

    /// `∃^{=c} x_var` (guarded by `x_j`) over class `cls` of level `r`.
    fn count_formula(&self, r: usize, var: usize, j: usize, cls: usize, c: usize) -> Phi {
        let body = if cls == TOTAL { top() } else { self.formulas[r][cls].clone() };
        let body = if j == NO_GUARD { body } else { and(vec![edge(j, var), body]) };
        exactly(c, var, body)
    }

    pub fn class_of(&self, level: usize, graph: usize, a: &[Option<usize>]) -> usize {
        let mut full = vec![None; self.k + 1];
        for (i, x) in a.iter().enumerate().take(self.k) {
            full[i + 1] = *x;
        }
        self.classes[level][graph][encode(&full, self.graphs[graph].n())]
    }

    pub fn formula(&self, level: usize, class: usize) -> Phi {
        self.formulas[level][class].clone()
    }

    /// Class formulas of every level for assignments defined exactly on `vars`.
    pub fn battery(&self, vars: &[usize]) -> Vec<Phi> {
        let mut out = Vec::new();
        for level in 0..self.classes.len() {
            let mut seen = BTreeSet::new();
            for (gi, g) in self.graphs.iter().enumerate() {
                for code in 0..self.codes(gi) {
                    let a = decode(code, g.n(), self.k);
                    let dom: Vec<usize> = (1..=self.k).filter(|&i| a[i].is_some()).collect();
                    if dom == vars && seen.insert(self.classes[level][gi][code]) {
                        out.push(self.formulas[level][self.classes[level][gi][code]].clone());
                    }
                }
            }
        }
        out
    }

    /// Sentence true in graph `a` and false in graph `b`, of least quantifier rank.
    pub fn distinguishing_sentence(&self, a: usize, b: usize) -> Option<Phi> {
        let empty = vec![None; self.k];
        for level in 1..self.classes.len() {
            let ca = self.class_of(level, a, &empty);
            let cb = self.class_of(level, b, &empty);
            if ca == cb {
                continue;
            }
            let (sa, sb) = (&self.signatures[level][ca], &self.signatures[level][cb]);
            let keys: BTreeSet<_> = sa.keys().chain(sb.keys()).collect();
            for key in keys {
                let (x, y) = (sa.get(key).copied().unwrap_or(0), sb.get(key).copied().unwrap_or(0));
                if x != y {
                    let (var, j, cls) = *key;
                    return Some(self.count_formula(level - 1, var, j, cls, x));
                }
            }
            unreachable!("distinct classes with equal old class have distinct counts");
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Distinguishing graphs

#[derive(Clone, Debug, Serialize)]
pub enum Distinction {
    /// `graph` lies in the class and has different hom counts into the inputs.
    Found {
        graph: String,
        sentence: String,
        hom_g: String,
        hom_h: String,
        route: Route,
    },
    /// The pebble game certifies equivalence.
    Equivalent,
    /// No distinguishing term within the size bound.
    Inconclusive,
}

/// How a distinguishing graph was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// The inputs differ in size; `K1` separates them.
    Size,
    /// A term of the sentence's quantum graph.
    QuantumGraph,
    /// The quantum graph was too large; found by scanning class members.
    ClassScan,
}

/// Graph in the `(k, q)` class separating `g` from `h`, read off the
/// quantum graph of a distinguishing sentence.
pub fn distinguishing_graph(g: &Graph, h: &Graph, k: usize, q: usize, max_size: usize) -> Result<(Distinction, Option<Graph>)> {
    if g.n() != h.n() {
        let one = Graph::empty(1);
        let d = Distinction::Found {
            graph: crate::codec::encode_text(&LabelledGraph::unlabelled(one.clone(), 0)),
            sentence: format!("{}", exactly(g.n(), 1, top())),
            hom_g: g.n().to_string(),
            hom_h: h.n().to_string(),
            route: Route::Size,
        };
        return Ok((d, Some(one)));
    }
    if bijective_pebble_game(g, h, k, q, &[])? == PebbleWinner::Duplicator {
        return Ok((Distinction::Equivalent, None));
    }
    let tr = TypeRefinement::new(&[g.clone(), h.clone()], k, false, q);
    let Some(phi) = tr.distinguishing_sentence(0, 1) else {
        return Ok((Distinction::Inconclusive, None));
    };
    let qg = match synth_qg(&phi, g.n(), false) {
        Ok(qg) => qg,
        Err(Error::Capability(_)) => return Ok(scan_class(g, h, k, q, max_size, &phi)),
        Err(e) => return Err(e),
    };
    let mut terms: Vec<&LabelledGraph> = qg.terms().iter().map(|(_, t)| t).collect();
    terms.sort_by_key(|t| (t.n(), t.graph.edge_count()));
    for t in terms {
        if t.n() > max_size {
            break;
        }
        let (a, b) = (hom(&t.graph, g), hom(&t.graph, h));
        if a != b {
            let f = LabelledGraph::unlabelled(t.graph.clone(), 0);
            if labelled_witness(&f, k, q, false).is_none() {
                return invalid("distinguishing term falls outside the class");
            }
            let d = Distinction::Found {
                graph: crate::codec::encode_text(&f),
                sentence: format!("{phi}"),
                hom_g: a.to_string(),
                hom_h: b.to_string(),
                route: Route::QuantumGraph,
            };
            return Ok((d, Some(t.graph.clone())));
        }
    }
    Ok((Distinction::Inconclusive, None))
}

/// Fallback when the quantum graph is too large to expand: scan class members
/// by size for one with differing hom counts.
fn scan_class(g: &Graph, h: &Graph, k: usize, q: usize, max_size: usize, phi: &Phi) -> (Distinction, Option<Graph>) {
    let bounds = Bounds::default();
    let Ok(class) = enumerate_class(max_size.min(bounds.enumerate), k, q, false, &bounds) else {
        return (Distinction::Inconclusive, None);
    };
    for f in class {
        let (a, b) = (hom(&f, g), hom(&f, h));
        if a != b {
            let d = Distinction::Found {
                graph: crate::codec::encode_text(&LabelledGraph::unlabelled(f.clone(), 0)),
                sentence: format!("{phi}"),
                hom_g: a.to_string(),
                hom_h: b.to_string(),
                route: Route::ClassScan,
            };
            return (d, Some(f));
        }
    }
    (Distinction::Inconclusive, None)
}

// ---------------------------------------------------------------------------
// Formula generation

/// Random formula with variables `1..=k`, quantifier rank at most `q` and
/// thresholds at most `max_t`. `size` bounds the number of connectives.
pub fn random_formula<R: Rng>(rng: &mut R, k: usize, q: usize, max_t: usize, size: usize) -> Phi {
    let atom = |rng: &mut R| {
        let (i, j) = (rng.gen_range(1..=k), rng.gen_range(1..=k));
        if rng.gen_bool(0.6) {
            Arc::new(Formula::Edge(i, j))
        } else {
            Arc::new(Formula::Eq(i, j))
        }
    };
    if size == 0 {
        return atom(rng);
    }
    let choice = rng.gen_range(0..if q > 0 { 5 } else { 3 });
    match choice {
        0 => Arc::new(Formula::Not(random_formula(rng, k, q, max_t, size - 1))),
        1 | 2 => {
            let left = rng.gen_range(0..size);
            let a = random_formula(rng, k, q, max_t, left);
            let b = random_formula(rng, k, q, max_t, size - 1 - left);
            Arc::new(if choice == 1 { Formula::Or(vec![a, b]) } else { Formula::And(vec![a, b]) })
        }
        _ => {
            let var = rng.gen_range(1..=k);
            let t = rng.gen_range(0..=max_t);
            let body = random_formula(rng, k, q - 1, max_t, size - 1);
            Arc::new(if choice == 3 {
                Formula::AtLeast { t, var, body }
            } else {
                Formula::Exactly { t, var, body }
            })
        }
    }
}

/// Canonical key of a graph used to group equal profiles.
pub fn graph_key(g: &Graph) -> Vec<u64> {
    canonise(g, &vec![0; g.n()]).form.0
}
