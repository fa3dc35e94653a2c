//! Desk-scale acceptance checks shared by the test target and `homind accept`.
//!
//! Each check returns a verdict with a short detail line. Oracles here are
//! written independently of the library routines they check.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::canon::{all_graphs, all_graphs_upto, canonise_labelled};
use crate::cfi::{cfi_build, cfi_pair, is_isomorphism, twist_iso, witness_pair, WitnessOutcome};
use crate::config::Bounds;
use crate::decomp::{
    convert, decide_membership, enumerate_class, enumerate_one_labelled, labelled_witness, search_witness, verify,
    Method, WitnessKind,
};
use crate::error::Result;
use crate::games::{
    bijective_pebble_game, script_beats_every_robber, script_survives_every_cop, solve_cr, DiagonalSweep,
    LargestComponent, PebbleWinner,
};
use crate::graph::{Graph, LabelledGraph};
use crate::homalg::{hom, hom_count};
use crate::logic::{
    distinguishing_graph, evaluate, fragment_check, random_formula, synth_formula, synth_qg, terms_in_class,
    Distinction, ModelChecker, Route, TypeRefinement,
};

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: u64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.1}s of {}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.limit_seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub limit: Duration,
    check: Check,
}

impl Criterion {
    pub fn run(&self) -> Verdict {
        let start = Instant::now();
        let (ok, detail) = match (self.check)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= self.limit;
        Verdict {
            id: self.id,
            name: self.name,
            passed: ok && in_time,
            detail: if in_time { detail } else { format!("{detail}; over the time limit") },
            seconds: elapsed.as_secs_f64(),
            limit_seconds: self.limit.as_secs(),
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, secs, check| Criterion { id, name, limit: Duration::from_secs(secs), check };
    vec![
        c(1, "hom counts match map enumeration", 60, hom_oracle as Check),
        c(2, "three witnesses and the monotone game agree", 600, three_witnesses),
        c(3, "path game law", 30, path_law),
        c(4, "grid lower bound", 600, grid_lower),
        c(5, "diagonal sweep on grid(4,8)", 300, grid_sweep),
        c(6, "P7 syntactic separation", 10, p7_syntactic),
        c(7, "logic round trip on 4-vertex pairs", 900, logic_round_trip),
        c(8, "quantum graph synthesis soundness", 600, qg_soundness),
        c(9, "guarded correspondence", 900, guarded_correspondence),
        c(10, "CFI parity and dominance", 600, cfi_parity),
        c(11, "P7 semantic separation", 120, p7_semantic),
        c(12, "TD-closure pair for P4", 120, p4_pair),
    ]
}

pub fn run_all() -> Vec<Verdict> {
    criteria().iter().map(Criterion::run).collect()
}

// ---------------------------------------------------------------------------

/// Every graph on the vertex set `0..n`, one per edge subset.
pub fn labelled_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0u64..1 << pairs.len())
        .map(|mask| {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
            Graph::from_edges(n, &edges).expect("valid edges")
        })
        .collect()
}

/// Counts maps `V(F) → V(G)` that preserve edges by trying all of them.
pub fn enumerate_homs(f: &Graph, g: &Graph) -> u64 {
    let (n, m) = (f.n(), g.n());
    if n == 0 {
        return 1;
    }
    if m == 0 {
        return 0;
    }
    let edges = f.edges();
    let mut map = vec![0usize; n];
    let mut count = 0;
    loop {
        if edges.iter().all(|&(u, v)| g.has_edge(map[u], map[v])) {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return count;
            }
            map[i] += 1;
            if map[i] < m {
                break;
            }
            map[i] = 0;
            i += 1;
        }
    }
}

fn connected_upto(n: usize) -> Vec<Graph> {
    all_graphs_upto(n).into_iter().filter(|g| g.n() > 0 && g.is_connected()).collect()
}

fn hom_oracle() -> Result<(bool, String)> {
    let patterns = all_graphs_upto(4);
    let targets: Vec<Graph> = (0..=5).flat_map(labelled_graphs).collect();
    let mut checked = 0usize;
    for f in &patterns {
        for g in &targets {
            if hom(f, g) != BigUint::from(enumerate_homs(f, g)) {
                return Ok((false, format!("mismatch for F with {} vertices", f.n())));
            }
            checked += 1;
        }
    }
    Ok((true, format!("{checked} pairs")))
}

fn three_witnesses() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let mut checked = 0;
    for g in connected_upto(6) {
        for k in 1..=4 {
            for q in 1..=4 {
                let mut verdicts = Vec::new();
                let mut witnesses = Vec::new();
                for kind in [WitnessKind::Ctree, WitnessKind::Td, WitnessKind::Pfc] {
                    let w = search_witness(&g, Some(k), Some(q), kind);
                    if let Some(w) = &w {
                        if let Err(v) = verify(&g, w, k, q, false) {
                            return Ok((false, format!("{kind:?} witness fails verification: {v}")));
                        }
                    }
                    verdicts.push(w.is_some());
                    witnesses.extend(w);
                }
                let game = decide_membership(&g, Some(k), Some(q), Method::Game, &bounds)?;
                verdicts.push(game.member);
                if let Some(w) = &game.witness {
                    if let Err(v) = verify(&g, w, k, q, false) {
                        return Ok((false, format!("strategy decomposition fails: {v}")));
                    }
                }
                if verdicts.iter().any(|&v| v != verdicts[0]) {
                    return Ok((
                        false,
                        format!("disagreement {verdicts:?} at k={k}, q={q} on {} vertices", g.n()),
                    ));
                }
                for w in &witnesses {
                    for target in [WitnessKind::Ctree, WitnessKind::Td, WitnessKind::Pfc] {
                        let c = convert(&g, w, target)?;
                        if let Err(v) = verify(&g, &c, k, q, false) {
                            return Ok((false, format!("{:?} -> {target:?} fails: {v}", w.kind())));
                        }
                    }
                }
                checked += 1;
            }
        }
    }
    Ok((true, format!("{checked} (graph, k, q) cases")))
}

fn path_law() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    for l in 2..=9usize {
        let g = Graph::path(l)?;
        let threshold = l / 2; // ⌈(l-1)/2⌉
        for q in 1..=threshold + 2 {
            let robber = !solve_cr(&g, 2, q, false, &bounds)?.cops_win();
            if robber != (q <= threshold) {
                return Ok((false, format!("path {l}, q={q}: robber wins = {robber}")));
            }
        }
    }
    Ok((true, "l = 2..9".into()))
}

fn grid_lower() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let mut notes = Vec::new();
    for (h, l) in [(2, 5), (2, 6), (2, 7), (3, 6)] {
        let g = Graph::grid(h, l)?;
        let bound = h * (l - h + 2) / 4;
        let robber = LargestComponent::on_grid(h, l)?;
        for q in 1..=bound {
            if solve_cr(&g, h + 1, q, false, &bounds)?.cops_win() {
                return Ok((false, format!("grid({h},{l}) q={q}: solver says Cops win")));
            }
            if !script_survives_every_cop(&g, h + 1, q, false, &robber) {
                return Ok((false, format!("grid({h},{l}) q={q}: scripted robber is caught")));
            }
        }
        notes.push(format!("({h},{l}) q<={bound}"));
    }
    Ok((true, notes.join(", ")))
}

fn grid_sweep() -> Result<(bool, String)> {
    let g = Graph::grid(4, 8)?;
    let sweep = DiagonalSweep::new(4, 8)?;
    match script_beats_every_robber(&g, 5, 13, false, &sweep)? {
        Some(t) => Ok((t <= 13, format!("latest capture in round {t}"))),
        None => Ok((false, "robber survives 13 rounds".into())),
    }
}

fn p7_syntactic() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let p7 = Graph::path(7)?;
    let tw1 = decide_membership(&p7, Some(2), None, Method::Search(WitnessKind::Td), &bounds)?.member;
    let td3 = decide_membership(&p7, None, Some(3), Method::Search(WitnessKind::Td), &bounds)?.member;
    let at3 = solve_cr(&p7, 2, 3, true, &bounds)?.cops_win();
    let at4 = solve_cr(&p7, 2, 4, true, &bounds)?.cops_win();
    let member4 = decide_membership(&p7, Some(2), Some(4), Method::Game, &bounds)?;
    let ok = tw1 && td3 && !at3 && at4 && member4.member;
    Ok((ok, format!("TW1={tw1} TD3={td3} cops(2,3)={at3} cops(2,4)={at4}")))
}

fn logic_round_trip() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let graphs = all_graphs(4);
    let class = enumerate_class(6, 2, 2, false, &bounds)?;
    let profile: Vec<Vec<BigUint>> = graphs.iter().map(|g| class.iter().map(|f| hom(f, g)).collect()).collect();
    let (mut equal, mut separated) = (0, 0);
    for i in 0..graphs.len() {
        for j in i + 1..graphs.len() {
            let (g, h) = (&graphs[i], &graphs[j]);
            let dup = bijective_pebble_game(g, h, 2, 2, &[])? == PebbleWinner::Duplicator;
            let agree = profile[i] == profile[j];
            if dup != agree {
                return Ok((false, format!("pair ({i},{j}): game {dup}, hom agreement {agree}")));
            }
            if dup {
                equal += 1;
                continue;
            }
            separated += 1;
            // Graph to sentence.
            let idx = (0..class.len()).find(|&x| profile[i][x] != profile[j][x]).expect("differs");
            let f = LabelledGraph::unlabelled(class[idx].clone(), 0);
            let w = labelled_witness(&f, 2, 2, false).expect("class member has a tree");
            let phi = synth_formula(&f, &w, &profile[i][idx], false, 4)?;
            let frag = fragment_check(&phi);
            let on = |x: &Graph| evaluate(&phi, &LabelledGraph::unlabelled(x.clone(), 2)).map(|v| v.holds);
            if !frag.in_ckq(2, 2) || !frag.free.is_empty() || !on(g)? || on(h)? {
                return Ok((false, format!("pair ({i},{j}): synthesised sentence does not separate")));
            }
            // Sentence to graph.
            match distinguishing_graph(g, h, 2, 2, 64)? {
                (Distinction::Found { route, .. }, Some(f)) => {
                    if route == Route::ClassScan {
                        return Ok((false, format!("pair ({i},{j}): quantum graph too large to expand")));
                    }
                    let fl = LabelledGraph::unlabelled(f.clone(), 0);
                    if hom(&f, g) == hom(&f, h) || labelled_witness(&fl, 2, 2, false).is_none() {
                        return Ok((false, format!("pair ({i},{j}): bad distinguishing graph")));
                    }
                }
                _ => return Ok((false, format!("pair ({i},{j}): no distinguishing graph"))),
            }
        }
    }
    Ok((true, format!("{equal} equivalent and {separated} separated pairs, class size {}", class.len())))
}

/// Every labelled graph on `n` vertices with labels `1..=k` placed in all ways.
fn all_interpretations(n: usize, k: usize) -> Vec<LabelledGraph> {
    let mut out = Vec::new();
    for g in all_graphs(n) {
        let total = n.pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let mut labels = Vec::new();
            for l in 1..=k {
                labels.push((l, c % n));
                c /= n;
            }
            out.push(LabelledGraph::new(g.clone(), k, &labels).expect("labels in range"));
        }
    }
    out
}

fn qg_soundness() -> Result<(bool, String)> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut formulas = Vec::new();
    while formulas.len() < 50 {
        let size = formulas.len() % 5;
        let phi = random_formula(&mut rng, 2, 2, 4, size);
        if fragment_check(&phi).in_ckq(2, 2) {
            formulas.push(phi);
        }
    }
    let mut evaluations = 0usize;
    let mut terms = 0usize;
    for (idx, phi) in formulas.iter().enumerate() {
        for n in 2..=4 {
            let qg = synth_qg(phi, n, false)?;
            terms += qg.len();
            if let Err(e) = terms_in_class(&qg, 2, 2, false) {
                return Ok((false, format!("formula {idx}: {e}")));
            }
            let ev = qg.evaluator();
            for g in all_interpretations(n, 2) {
                let want = evaluate(phi, &g)?.holds;
                let got = ev.eval(&g)?;
                let expect = if want { BigRational::one() } else { BigRational::zero() };
                if got != expect {
                    return Ok((false, format!("formula {idx} ({phi}) at n={n}: value {got}")));
                }
                evaluations += 1;
            }
        }
    }
    Ok((true, format!("{evaluations} evaluations, {terms} terms")))
}

/// One-labelled graphs with at most `n` vertices, one per labelled isomorphism class.
fn one_labelled_upto(n: usize, arity: usize) -> Vec<LabelledGraph> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for g in all_graphs_upto(n) {
        for v in 0..g.n() {
            let f = LabelledGraph::new(g.clone(), arity, &[(1, v)]).expect("label");
            if seen.insert(canonise_labelled(&f).form) {
                out.push(f);
            }
        }
    }
    out
}

fn guarded_correspondence() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let targets = one_labelled_upto(4, 2);
    let patterns = enumerate_one_labelled(5, 2, 2, true, &bounds)?;
    let graphs: Vec<Graph> = targets.iter().map(|t| t.graph.clone()).collect();
    let refinement = TypeRefinement::new(&graphs, 2, true, 2);
    let battery = refinement.battery(&[1]);
    for phi in &battery {
        if !fragment_check(phi).in_gckq(2, 2) {
            return Ok((false, format!("battery formula outside the guarded fragment: {phi}")));
        }
    }
    let homs: Vec<Vec<BigUint>> = targets
        .iter()
        .map(|t| patterns.iter().map(|f| hom_count(f, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let truths: Vec<Vec<bool>> = targets
        .iter()
        .map(|t| {
            let mut mc = ModelChecker::new(&t.graph);
            battery
                .iter()
                .map(|phi| {
                    let mut a = vec![None, t.label(1), None];
                    mc.check(phi, &mut a)
                })
                .collect()
        })
        .collect();
    let mut pairs = 0;
    let mut agreeing = 0;
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            let by_hom = homs[i] == homs[j];
            let by_logic = truths[i] == truths[j];
            if by_hom != by_logic {
                return Ok((false, format!("pair ({i},{j}): hom agreement {by_hom}, battery agreement {by_logic}")));
            }
            pairs += 1;
            agreeing += by_hom as usize;
        }
    }
    Ok((
        true,
        format!(
            "{pairs} pairs ({agreeing} indistinguishable), {} patterns, {} battery formulas",
            patterns.len(),
            battery.len()
        ),
    ))
}

fn cfi_parity() -> Result<(bool, String)> {
    let bases = connected_upto(6);
    let patterns = all_graphs_upto(5);
    let mut cases = 0;
    let mut homs = 0;
    for base in &bases {
        let n = base.n();
        let plain = cfi_build(base, &BTreeSet::new())?;
        let plain_hom = hom(base, &plain.graph);
        let plain_profile: Vec<BigUint> = patterns.iter().map(|f| hom(f, &plain.graph)).collect();
        let mut subsets: Vec<Vec<usize>> = vec![vec![]];
        subsets.extend((0..n).map(|v| vec![v]));
        subsets.extend((0..n).flat_map(|u| (u + 1..n).map(move |v| vec![u, v])));
        for u in subsets {
            let twisted = cfi_build(base, &u.iter().copied().collect())?;
            let even = u.len() % 2 == 0;
            // Isomorphism for even twists via the path twist; non-isomorphism
            // for odd twists via differing hom counts.
            let iso = if even {
                match u.as_slice() {
                    [] => true,
                    [a, b] => {
                        let path = shortest_path(base, *a, *b);
                        let map = twist_path_map(base, &twisted, &plain, &path);
                        is_isomorphism(&twisted.graph, &plain.graph, &map)
                    }
                    _ => unreachable!(),
                }
            } else {
                false
            };
            let same_hom = hom(base, &twisted.graph) == plain_hom;
            if iso != even || same_hom != even {
                return Ok((false, format!("base on {n} vertices, U={u:?}: iso {iso}, hom equal {same_hom}")));
            }
            if !even && twisted.graph.n() == plain.graph.n() && same_hom {
                return Ok((false, "odd twist not separated".into()));
            }
            for (f, p) in patterns.iter().zip(&plain_profile) {
                if hom(f, &twisted.graph) > *p {
                    return Ok((false, format!("dominance fails for U={u:?} on {n} vertices")));
                }
                homs += 1;
            }
            cases += 1;
        }
    }
    Ok((true, format!("{} bases, {cases} twists, {homs} dominance counts", bases.len())))
}

fn shortest_path(g: &Graph, a: usize, b: usize) -> Vec<usize> {
    let mut prev: HashMap<usize, usize> = HashMap::new();
    let mut queue = std::collections::VecDeque::from([a]);
    prev.insert(a, a);
    while let Some(x) = queue.pop_front() {
        if x == b {
            break;
        }
        for &y in g.neighbors(x) {
            if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(y) {
                e.insert(x);
                queue.push_back(y);
            }
        }
    }
    let mut path = vec![b];
    while *path.last().unwrap() != a {
        path.push(prev[path.last().unwrap()]);
    }
    path.reverse();
    path
}

/// Toggles the path edges in the fibres along `path`; maps `from` onto `to`.
fn twist_path_map(base: &Graph, from: &crate::cfi::CfiGraph, to: &crate::cfi::CfiGraph, path: &[usize]) -> Vec<usize> {
    let mut toggle = vec![0u64; base.n()];
    for p in path.windows(2) {
        toggle[p[0]] |= 1 << p[1];
        toggle[p[1]] |= 1 << p[0];
    }
    from.vertices
        .iter()
        .map(|&(w, s)| to.index_of(w, s ^ toggle[w]).unwrap_or(usize::MAX))
        .collect()
}

fn p7_semantic() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let p7 = Graph::path(7)?;
    let (a, b) = cfi_pair(&p7)?;
    let dup = bijective_pebble_game(&a.graph, &b.graph, 2, 3, &[])? == PebbleWinner::Duplicator;
    let (ha, hb) = (hom(&p7, &a.graph), hom(&p7, &b.graph));
    let tw1 = decide_membership(&p7, Some(2), None, Method::Search(WitnessKind::Td), &bounds)?.member;
    let td3 = decide_membership(&p7, None, Some(3), Method::Search(WitnessKind::Td), &bounds)?.member;
    // The twist isomorphism between single twists at the two ends.
    let map = twist_iso(&p7, &[0, 1, 2, 3, 4, 5, 6])?;
    let end0 = cfi_build(&p7, &BTreeSet::from([0]))?;
    let end6 = cfi_build(&p7, &BTreeSet::from([6]))?;
    let twist_ok = is_isomorphism(&end0.graph, &end6.graph, &map);
    let ok = dup && ha != hb && tw1 && td3 && twist_ok;
    Ok((ok, format!("duplicator={dup} hom {ha} vs {hb} TW1={tw1} TD3={td3}")))
}

fn p4_pair() -> Result<(bool, String)> {
    let bounds = Bounds::default();
    let p4 = Graph::path(4)?;
    match witness_pair(&p4, 2, &bounds)? {
        WitnessOutcome::Pair(w) => {
            let cq = bijective_pebble_game(&w.g, &w.h, 2, 2, &[])? == PebbleWinner::Duplicator;
            let ok = w.hom_g > w.hom_h && cq;
            Ok((ok, format!("hom {} > {}, cq_equivalent={cq}, clique K{}", w.hom_g, w.hom_h, w.clique)))
        }
        WitnessOutcome::Refused(_) => Ok((false, "refused".into())),
    }
}
