//! Round-bounded cops-and-robber games and the bijective pebble game.
//!
//! Cops occupy `k` vertices of `G` plus a disjoint `k`-clique `K`. Positions
//! keep the cops on `G` as a bit set, the number of cops still on `K`, and the
//! robber's escape component. A round lifts one cop and places it on a vertex
//! of `G`; the robber then runs inside the component of the lifted position
//! and has to avoid the new cop.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Bounds;
use crate::decomp::{enumerate_one_labelled, TreeDecomposition};
use crate::error::{invalid, Error, Result};
use crate::graph::{mask_bits, mask_components, Graph, LabelledGraph};
use crate::homalg::hom_count;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Winner {
    Cops,
    Robber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Cop {
    Vertex(usize),
    /// A cop standing on the added clique.
    Reserve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CopMove {
    pub lift: Cop,
    pub place: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Position {
    pub cops: u64,
    pub reserve: usize,
    pub robber: u64,
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Component of `G - blocked` that contains `seed`.
fn grow(adj: &[u64], blocked: u64, seed: u64) -> u64 {
    let free = !blocked;
    let mut comp = seed;
    let mut frontier = seed;
    while frontier != 0 {
        let next = mask_bits(frontier).fold(0, |a, v| a | adj[v]) & free & !comp;
        comp |= next;
        frontier = next;
    }
    comp
}

/// Outcome of one legal cop move.
#[derive(Clone, Copy, Debug)]
struct Step {
    mv: CopMove,
    cops: u64,
    reserve: usize,
    /// Component the robber may run in during the move.
    space: u64,
}

struct Rules<'a> {
    adj: &'a [u64],
    n: usize,
    monotone: bool,
}

impl Rules<'_> {
    fn lift_space(&self, p: &Position, lift: Cop) -> Option<(u64, usize, u64)> {
        let (rest, reserve) = match lift {
            Cop::Reserve => {
                if p.reserve == 0 {
                    return None;
                }
                (p.cops, p.reserve - 1)
            }
            Cop::Vertex(a) => {
                if p.cops >> a & 1 == 0 {
                    return None;
                }
                (p.cops & !(1 << a), p.reserve)
            }
        };
        let space = match lift {
            Cop::Vertex(a) if self.adj[a] & p.robber != 0 => grow(self.adj, rest, p.robber),
            _ => p.robber,
        };
        Some((rest, reserve, space))
    }

    fn steps(&self, p: &Position) -> Vec<Step> {
        let mut lifts: Vec<Cop> = Vec::new();
        if p.reserve > 0 {
            lifts.push(Cop::Reserve);
        }
        lifts.extend(mask_bits(p.cops).map(Cop::Vertex));
        let mut out = Vec::new();
        for lift in lifts {
            let Some((rest, reserve, space)) = self.lift_space(p, lift) else { continue };
            if self.monotone && space != p.robber {
                continue;
            }
            let targets = if self.monotone {
                p.robber
            } else {
                full_mask(self.n) & !p.cops
            };
            // Placements inside the escape space first.
            let inside = targets & space;
            for b in mask_bits(inside).chain(mask_bits(targets & !space)) {
                out.push(Step {
                    mv: CopMove { lift, place: b },
                    cops: rest | 1 << b,
                    reserve,
                    space,
                });
            }
        }
        out
    }

    /// Components the robber can choose after a step; empty means capture.
    fn escapes(&self, s: &Step) -> Vec<u64> {
        if s.space >> s.mv.place & 1 == 1 {
            mask_components(self.adj, s.space & !(1 << s.mv.place))
        } else {
            vec![s.space]
        }
    }

    /// Applies a scripted move, reporting the violated rule if illegal.
    fn apply(&self, p: &Position, mv: CopMove) -> Result<Step> {
        if mv.place >= self.n {
            return invalid(format!("cop placed on vertex {} outside the graph", mv.place));
        }
        if p.cops >> mv.place & 1 == 1 {
            return invalid(format!(
                "exactly one cop must move: vertex {} is already occupied",
                mv.place
            ));
        }
        let Some((rest, reserve, space)) = self.lift_space(p, mv.lift) else {
            return invalid(format!("no cop to lift at {:?}", mv.lift));
        };
        if self.monotone && space != p.robber {
            return invalid(format!(
                "monotonicity: lifting {:?} enlarges the robber's escape space",
                mv.lift
            ));
        }
        Ok(Step {
            mv,
            cops: rest | 1 << mv.place,
            reserve,
            space,
        })
    }
}

/// Exact backward-induction solver with a memo of known outcomes.
pub struct Solver {
    adj: Vec<u64>,
    n: usize,
    k: usize,
    monotone: bool,
    /// Per state: largest round budget known to lose, least known to win.
    memo: HashMap<(u64, u8, u64), (u16, u16)>,
}

impl Solver {
    pub fn new(g: &Graph, k: usize, monotone: bool) -> Self {
        Solver {
            adj: g.masks(),
            n: g.n(),
            k,
            monotone,
            memo: HashMap::new(),
        }
    }

    fn rules(&self) -> Rules<'_> {
        Rules {
            adj: &self.adj,
            n: self.n,
            monotone: self.monotone,
        }
    }

    /// Whether Cops capture the robber in component `p.robber` within `r` rounds.
    pub fn cops_win(&mut self, p: &Position, r: usize) -> bool {
        if r == 0 {
            return false;
        }
        let key = (p.cops, p.reserve as u8, p.robber);
        let r16 = r.min(u16::MAX as usize) as u16;
        if let Some(&(lose, win)) = self.memo.get(&key) {
            if r16 >= win {
                return true;
            }
            if r16 <= lose {
                return false;
            }
        }
        let steps = self.rules().steps(p);
        let mut res = false;
        for s in steps {
            let esc = self.rules().escapes(&s);
            if esc.iter().all(|&c| {
                self.cops_win(
                    &Position {
                        cops: s.cops,
                        reserve: s.reserve,
                        robber: c,
                    },
                    r - 1,
                )
            }) {
                res = true;
                break;
            }
        }
        let e = self.memo.entry(key).or_insert((0, u16::MAX));
        if res {
            e.1 = e.1.min(r16);
        } else {
            e.0 = e.0.max(r16);
        }
        res
    }

    /// First cop move that wins within `r` rounds.
    pub fn winning_move(&mut self, p: &Position, r: usize) -> Option<CopMove> {
        if r == 0 {
            return None;
        }
        for s in self.rules().steps(p) {
            let esc = self.rules().escapes(&s);
            if esc.iter().all(|&c| {
                self.cops_win(
                    &Position {
                        cops: s.cops,
                        reserve: s.reserve,
                        robber: c,
                    },
                    r - 1,
                )
            }) {
                return Some(s.mv);
            }
        }
        None
    }

    /// Least number of rounds Cops need from `p`, if at most `cap`.
    pub fn capture_time(&mut self, p: &Position, cap: usize) -> Option<usize> {
        (1..=cap).find(|&r| self.cops_win(p, r))
    }

    pub fn start(&self) -> Position {
        Position {
            cops: 0,
            reserve: self.k,
            robber: 0,
        }
    }
}

/// Solved game: winner and the solver state for strategy queries.
pub struct Solved {
    pub k: usize,
    pub q: usize,
    pub monotone: bool,
    pub winner: Winner,
    graph: Graph,
    memo: HashMap<(u64, u8, u64), (u16, u16)>,
}

impl Solved {
    pub fn cops_win(&self) -> bool {
        self.winner == Winner::Cops
    }

    pub fn solver(&self) -> Solver {
        let mut s = Solver::new(&self.graph, self.k, self.monotone);
        s.memo = self.memo.clone();
        s
    }

    /// Move table of the winner's strategy over all positions reachable
    /// against every opponent reply.
    pub fn strategy_json(&self) -> Value {
        let mut s = self.solver();
        let comps = self.graph.connected_components();
        let masks: Vec<u64> = comps.iter().map(|c| c.iter().fold(0, |m, &v| m | 1 << v)).collect();
        let mut table = Vec::new();
        let start = s.start();
        match self.winner {
            Winner::Cops => {
                let mut stack: Vec<(Position, usize)> =
                    masks.iter().map(|&c| (Position { robber: c, ..start }, self.q)).collect();
                let mut seen = std::collections::HashSet::new();
                while let Some((p, r)) = stack.pop() {
                    if !seen.insert((p, r)) {
                        continue;
                    }
                    let mv = s.winning_move(&p, r).expect("winning position");
                    table.push(json!({
                        "cops": mask_bits(p.cops).collect::<Vec<_>>(),
                        "reserve": p.reserve,
                        "robber": mask_bits(p.robber).collect::<Vec<_>>(),
                        "rounds_left": r,
                        "lift": cop_json(mv.lift),
                        "place": mv.place,
                    }));
                    let step = s.rules().apply(&p, mv).expect("legal");
                    for c in s.rules().escapes(&step) {
                        stack.push((Position { cops: step.cops, reserve: step.reserve, robber: c }, r - 1));
                    }
                }
            }
            Winner::Robber => {
                let first = masks
                    .iter()
                    .copied()
                    .find(|&c| !s.cops_win(&Position { robber: c, ..start }, self.q));
                let mut stack: Vec<(Position, usize)> = first
                    .map(|c| (Position { robber: c, ..start }, self.q))
                    .into_iter()
                    .collect();
                table.push(json!({ "initial": first.map(|c| mask_bits(c).collect::<Vec<_>>()) }));
                let mut seen = std::collections::HashSet::new();
                while let Some((p, r)) = stack.pop() {
                    if r == 0 || !seen.insert((p, r)) {
                        continue;
                    }
                    for step in s.rules().steps(&p) {
                        let esc = s.rules().escapes(&step);
                        let choice = esc.iter().copied().find(|&c| {
                            !s.cops_win(&Position { cops: step.cops, reserve: step.reserve, robber: c }, r - 1)
                        });
                        let Some(c) = choice else { continue };
                        table.push(json!({
                            "cops": mask_bits(p.cops).collect::<Vec<_>>(),
                            "reserve": p.reserve,
                            "robber": mask_bits(p.robber).collect::<Vec<_>>(),
                            "rounds_left": r,
                            "lift": cop_json(step.mv.lift),
                            "place": step.mv.place,
                            "escape": mask_bits(c).collect::<Vec<_>>(),
                        }));
                        stack.push((Position { cops: step.cops, reserve: step.reserve, robber: c }, r - 1));
                    }
                }
            }
        }
        json!({
            "winner": format!("{:?}", self.winner),
            "k": self.k,
            "q": self.q,
            "monotone": self.monotone,
            "moves": table,
        })
    }
}

fn cop_json(c: Cop) -> Value {
    match c {
        Cop::Vertex(v) => json!(v),
        Cop::Reserve => json!("K"),
    }
}

fn check_size(g: &Graph, bounds: &Bounds) -> Result<()> {
    if g.n() > bounds.game.min(64) {
        return Err(Error::Capability(format!(
            "game solving limited to {} vertices, got {}",
            bounds.game.min(64),
            g.n()
        )));
    }
    Ok(())
}

/// Exact winner of the `q`-round `k`-cops game. The robber's components are
/// solved in parallel with separate memo tables.
pub fn solve_cr(g: &Graph, k: usize, q: usize, monotone: bool, bounds: &Bounds) -> Result<Solved> {
    check_size(g, bounds)?;
    if k == 0 {
        return invalid("at least one cop is required");
    }
    let comps: Vec<u64> = g
        .connected_components()
        .iter()
        .map(|c| c.iter().fold(0, |m, &v| m | 1 << v))
        .collect();
    let parts: Vec<(bool, HashMap<(u64, u8, u64), (u16, u16)>)> = comps
        .par_iter()
        .map(|&c| {
            let mut s = Solver::new(g, k, monotone);
            let p = Position { robber: c, ..s.start() };
            let w = s.cops_win(&p, q);
            (w, s.memo)
        })
        .collect();
    let mut memo = HashMap::new();
    let mut win = true;
    for (w, m) in parts {
        win &= w;
        for (key, (lose, wmin)) in m {
            let e = memo.entry(key).or_insert((0u16, u16::MAX));
            e.0 = e.0.max(lose);
            e.1 = e.1.min(wmin);
        }
    }
    Ok(Solved {
        k,
        q,
        monotone,
        winner: if win { Winner::Cops } else { Winner::Robber },
        graph: g.clone(),
        memo,
    })
}

/// Tree decomposition read off a monotone winning cop strategy: every
/// decision gets a node holding the cops on `G` after the move, with one child
/// per escape component.
pub fn strategy_to_td(g: &Graph, solved: &Solved) -> Result<TreeDecomposition> {
    if !solved.monotone {
        return invalid("strategy extraction needs a monotone strategy");
    }
    if !solved.cops_win() {
        return invalid("strategy extraction needs a winning cop strategy");
    }
    if solved.graph != *g {
        return invalid("strategy was solved for a different graph");
    }
    let mut s = solved.solver();
    let mut parent = vec![None];
    let mut bags = vec![Vec::new()];
    let start = s.start();
    let mut stack: Vec<(Position, usize, usize)> = g
        .connected_components()
        .iter()
        .map(|c| (Position { robber: c.iter().fold(0, |m, &v| m | 1 << v), ..start }, solved.q, 0))
        .collect();
    while let Some((p, r, up)) = stack.pop() {
        let mv = s
            .winning_move(&p, r)
            .ok_or_else(|| Error::Validation("strategy has no winning move".into()))?;
        let step = s.rules().apply(&p, mv)?;
        let id = bags.len();
        bags.push(mask_bits(step.cops).collect());
        parent.push(Some(up));
        for c in s.rules().escapes(&step) {
            stack.push((Position { cops: step.cops, reserve: step.reserve, robber: c }, r - 1, id));
        }
    }
    TreeDecomposition::new(parent, bags)
}

// ---------------------------------------------------------------------------
// Scripted strategies and simulation

pub trait CopStrategy: Sync {
    /// Move in round `round` (1-based) at position `p`.
    fn next(&self, g: &Graph, p: &Position, round: usize) -> Result<CopMove>;
    fn graph(&self) -> Option<Graph> {
        None
    }
}

pub trait RobberStrategy: Sync {
    /// Index into `options`, the components the robber may choose from.
    fn choose(&self, g: &Graph, options: &[u64], round: usize) -> usize;
    fn graph(&self) -> Option<Graph> {
        None
    }
}

/// Robber always runs to a largest component; ties go to the component with
/// the smallest vertex.
pub struct LargestComponent {
    graph: Option<Graph>,
}

impl LargestComponent {
    pub fn any() -> Self {
        LargestComponent { graph: None }
    }

    pub fn on_grid(h: usize, l: usize) -> Result<Self> {
        Ok(LargestComponent {
            graph: Some(Graph::grid(h, l)?),
        })
    }
}

impl RobberStrategy for LargestComponent {
    fn choose(&self, _g: &Graph, options: &[u64], _round: usize) -> usize {
        let mut best = 0;
        for (i, c) in options.iter().enumerate() {
            let (a, b) = (c.count_ones(), options[best].count_ones());
            if a > b || (a == b && c.trailing_zeros() < options[best].trailing_zeros()) {
                best = i;
            }
        }
        best
    }

    fn graph(&self) -> Option<Graph> {
        self.graph.clone()
    }
}

/// Capture of a robber confined to one vertex by a cop not adjacent to it.
fn capture_singleton(g: &Graph, p: &Position) -> Option<CopMove> {
    if p.robber.count_ones() != 1 {
        return None;
    }
    let s = p.robber.trailing_zeros() as usize;
    if p.reserve > 0 {
        return Some(CopMove { lift: Cop::Reserve, place: s });
    }
    mask_bits(p.cops)
        .find(|&c| !g.has_edge(c, s))
        .map(|c| CopMove { lift: Cop::Vertex(c), place: s })
}

/// Two cops on a path: the first lands in the middle, then the cops leapfrog
/// into the robber's side one vertex at a time.
pub struct PathLeapfrog {
    len: usize,
}

impl PathLeapfrog {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return invalid("path needs at least one vertex");
        }
        Ok(PathLeapfrog { len })
    }
}

impl CopStrategy for PathLeapfrog {
    fn next(&self, g: &Graph, p: &Position, _round: usize) -> Result<CopMove> {
        if p.cops == 0 {
            let lift = Cop::Reserve;
            return Ok(CopMove { lift, place: (self.len - 1) / 2 });
        }
        let a = p.robber.trailing_zeros() as usize;
        let b = 63 - p.robber.leading_zeros() as usize;
        let from_left = a > 0 && p.cops >> (a - 1) & 1 == 1;
        let place = if from_left { a } else { b };
        let keep = if from_left { a.wrapping_sub(1) } else { b + 1 };
        let lift = if p.reserve > 0 {
            Cop::Reserve
        } else {
            let other = mask_bits(p.cops).find(|&c| c != keep).unwrap_or(keep);
            Cop::Vertex(other)
        };
        let _ = g;
        Ok(CopMove { lift, place })
    }

    fn graph(&self) -> Option<Graph> {
        Graph::path(self.len).ok()
    }
}

/// Sweep of `grid(h, l)` with `h + 1` cops: a diagonal separates the grid,
/// one extra cop closes the robber's side, and the diagonal then moves two
/// columns towards the robber's corner every `h` rounds. The right-hand side
/// is handled by the half-turn symmetry of the grid.
pub struct DiagonalSweep {
    h: usize,
    l: usize,
    /// Moves after the diagonal for the side containing `(h, 1)`.
    plan: Vec<((usize, usize), (usize, usize))>,
}

impl DiagonalSweep {
    pub fn new(h: usize, l: usize) -> Result<Self> {
        if h < 2 || l < h + 2 {
            return invalid("diagonal sweep needs 2 <= h and h + 2 <= l");
        }
        let j0 = l / 2 - h / 2 + 1;
        let mut cops: Vec<(i64, i64)> = (1..=h).map(|i| (i as i64, (j0 + i - 1) as i64)).collect();
        let hh = h as i64;
        let mut plan = vec![((0, 0), (h, j0 + h - 3))];
        cops.push((hh, (j0 + h) as i64 - 3));
        let (mut i, mut j) = (hh, j0 as i64);
        // Enough steps to clear the left part; the robber is caught earlier.
        for _ in 0..(h * l) {
            let lift = (i, j + i - 1);
            let place = if i > 1 { (i - 1, (j + i - 4).max(1)) } else { (hh, j + hh - 5) };
            if place.1 < 1 || lift.1 < 1 || !cops.contains(&lift) || cops.contains(&place) {
                break;
            }
            cops.retain(|&c| c != lift);
            cops.push(place);
            plan.push(((lift.0 as usize, lift.1 as usize), (place.0 as usize, place.1 as usize)));
            if i > 1 {
                i -= 1;
            } else {
                i = hh;
                j -= 2;
            }
        }
        Ok(DiagonalSweep { h, l, plan })
    }

    fn diagonal(&self) -> Vec<(usize, usize)> {
        let j0 = self.l / 2 - self.h / 2 + 1;
        (1..=self.h).map(|i| (i, j0 + i - 1)).collect()
    }

    fn id(&self, (i, j): (usize, usize)) -> usize {
        Graph::grid_vertex(self.l, i, j)
    }

    fn rotate(&self, (i, j): (usize, usize)) -> (usize, usize) {
        (self.h + 1 - i, self.l + 1 - j)
    }
}

impl CopStrategy for DiagonalSweep {
    fn next(&self, g: &Graph, p: &Position, round: usize) -> Result<CopMove> {
        if let Some(mv) = capture_singleton(g, p) {
            return Ok(mv);
        }
        let diag = self.diagonal();
        if round <= self.h {
            let cell = diag[round - 1];
            let place = self.id(cell);
            if p.cops >> place & 1 == 1 || p.reserve == 0 {
                return invalid("diagonal placement found an unexpected position");
            }
            return Ok(CopMove { lift: Cop::Reserve, place });
        }
        // Side of the robber relative to the first diagonal.
        let left = mask_bits(p.robber).any(|v| {
            let (i, j) = (v / self.l + 1, v % self.l + 1);
            j < diag[i - 1].1
        });
        let map = |c: (usize, usize)| if left { c } else { self.rotate(c) };
        let idx = round - self.h - 1;
        let Some(&(lift, place)) = self.plan.get(idx) else {
            return invalid("sweep plan exhausted");
        };
        let lift = if idx == 0 { Cop::Reserve } else { Cop::Vertex(self.id(map(lift))) };
        Ok(CopMove { lift, place: self.id(map(place)) })
    }

    fn graph(&self) -> Option<Graph> {
        Graph::grid(self.h, self.l).ok()
    }
}

pub enum CopsPlayer<'a> {
    Optimal,
    Script(&'a dyn CopStrategy),
}

pub enum RobberPlayer<'a> {
    Optimal,
    Script(&'a dyn RobberStrategy),
}

#[derive(Clone, Debug, Serialize)]
pub struct TranscriptRound {
    pub round: usize,
    pub lift: Cop,
    pub place: usize,
    /// Robber's component after the round; empty on capture.
    pub robber: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transcript {
    pub winner: Winner,
    /// Round of capture, or the number of rounds played when the robber survives.
    pub rounds: usize,
    pub initial: Vec<usize>,
    pub moves: Vec<TranscriptRound>,
}

/// Plays a game to the end. Optimal sides answer scripted opponents with an
/// exhaustive best response and play the solved strategy against each other.
pub fn simulate(
    g: &Graph,
    k: usize,
    q: usize,
    monotone: bool,
    cops: CopsPlayer<'_>,
    robber: RobberPlayer<'_>,
    bounds: &Bounds,
) -> Result<Transcript> {
    check_size(g, bounds)?;
    for expected in [
        match &cops {
            CopsPlayer::Script(s) => s.graph(),
            _ => None,
        },
        match &robber {
            RobberPlayer::Script(s) => s.graph(),
            _ => None,
        },
    ]
    .into_iter()
    .flatten()
    {
        if expected != *g {
            return invalid("scripted strategy was built for a different graph");
        }
    }
    let adj = g.masks();
    let rules = Rules { adj: &adj, n: g.n(), monotone };
    let comps: Vec<u64> = mask_components(&adj, full_mask(g.n()));
    let start = Position { cops: 0, reserve: k, robber: 0 };
    let mut solver = Solver::new(g, k, monotone);
    let mut br = BestResponse::default();
    // Robber's opening choice.
    let initial = if comps.is_empty() {
        None
    } else {
        Some(match &robber {
            RobberPlayer::Script(s) => comps[s.choose(g, &comps, 0)],
            RobberPlayer::Optimal => {
                let mut best = (0usize, comps[0]);
                for &c in &comps {
                    let p = Position { robber: c, ..start };
                    let t = match &cops {
                        CopsPlayer::Optimal => solver.capture_time(&p, q),
                        CopsPlayer::Script(cs) => br.robber_best(&rules, g, *cs, &p, 1, q)?,
                    };
                    let score = t.unwrap_or(usize::MAX);
                    if score > best.0 {
                        best = (score, c);
                    }
                }
                best.1
            }
        })
    };
    let Some(mut c) = initial else {
        return Ok(Transcript { winner: Winner::Cops, rounds: 0, initial: Vec::new(), moves: Vec::new() });
    };
    let mut p = Position { robber: c, ..start };
    let mut moves = Vec::new();
    for round in 1..=q {
        let left = q - round + 1;
        let mv = match &cops {
            CopsPlayer::Script(s) => s.next(g, &p, round)?,
            CopsPlayer::Optimal => match &robber {
                RobberPlayer::Optimal => solver
                    .winning_move(&p, left)
                    .or_else(|| rules.steps(&p).first().map(|s| s.mv))
                    .ok_or_else(|| Error::Validation("no legal cop move".into()))?,
                RobberPlayer::Script(rs) => br
                    .cops_best(&rules, g, *rs, &p, round, q)
                    .1
                    .or_else(|| rules.steps(&p).first().map(|s| s.mv))
                    .ok_or_else(|| Error::Validation("no legal cop move".into()))?,
            },
        };
        let step = rules.apply(&p, mv)?;
        let esc = rules.escapes(&step);
        if esc.is_empty() {
            moves.push(TranscriptRound { round, lift: mv.lift, place: mv.place, robber: Vec::new() });
            return Ok(Transcript {
                winner: Winner::Cops,
                rounds: round,
                initial: mask_bits(initial.unwrap()).collect(),
                moves,
            });
        }
        c = match &robber {
            RobberPlayer::Script(s) => esc[s.choose(g, &esc, round)],
            RobberPlayer::Optimal => {
                let mut best = (0usize, esc[0]);
                for &e in &esc {
                    let np = Position { cops: step.cops, reserve: step.reserve, robber: e };
                    let t = match &cops {
                        CopsPlayer::Optimal => solver.capture_time(&np, q - round).map(|t| t + round),
                        CopsPlayer::Script(cs) => br.robber_best(&rules, g, *cs, &np, round + 1, q)?,
                    };
                    let score = t.unwrap_or(usize::MAX);
                    if score > best.0 {
                        best = (score, e);
                    }
                }
                best.1
            }
        };
        p = Position { cops: step.cops, reserve: step.reserve, robber: c };
        moves.push(TranscriptRound { round, lift: mv.lift, place: mv.place, robber: mask_bits(c).collect() });
    }
    Ok(Transcript {
        winner: Winner::Robber,
        rounds: q,
        initial: mask_bits(initial.unwrap()).collect(),
        moves,
    })
}

/// Exhaustive best responses against a fixed scripted opponent.
#[derive(Default)]
struct BestResponse {
    /// Capture round (or `None` for escape) with best robber play.
    robber_memo: HashMap<(Position, usize), Option<usize>>,
    /// Earliest capture round with best cop play.
    cops_memo: HashMap<(Position, usize), Option<usize>>,
}

impl BestResponse {
    /// Latest capture round the robber can force from `p` before round `round`.
    fn robber_best(
        &mut self,
        rules: &Rules<'_>,
        g: &Graph,
        cops: &dyn CopStrategy,
        p: &Position,
        round: usize,
        q: usize,
    ) -> Result<Option<usize>> {
        if round > q {
            return Ok(None);
        }
        if let Some(&v) = self.robber_memo.get(&(*p, round)) {
            return Ok(v);
        }
        let mv = cops.next(g, p, round)?;
        let step = rules.apply(p, mv)?;
        let esc = rules.escapes(&step);
        let res = if esc.is_empty() {
            Some(round)
        } else {
            let mut worst: Option<usize> = Some(0);
            for e in esc {
                let np = Position { cops: step.cops, reserve: step.reserve, robber: e };
                match self.robber_best(rules, g, cops, &np, round + 1, q)? {
                    None => {
                        worst = None;
                        break;
                    }
                    Some(t) => worst = worst.map(|w| w.max(t)),
                }
            }
            worst
        };
        self.robber_memo.insert((*p, round), res);
        Ok(res)
    }

    /// Earliest capture round cops can force against the scripted robber, with the move.
    fn cops_best(
        &mut self,
        rules: &Rules<'_>,
        g: &Graph,
        robber: &dyn RobberStrategy,
        p: &Position,
        round: usize,
        q: usize,
    ) -> (Option<usize>, Option<CopMove>) {
        if round > q {
            return (None, None);
        }
        let mut best: (Option<usize>, Option<CopMove>) = (None, None);
        for step in rules.steps(p) {
            let esc = rules.escapes(&step);
            let t = if esc.is_empty() {
                Some(round)
            } else {
                let e = esc[robber.choose(g, &esc, round)];
                let np = Position { cops: step.cops, reserve: step.reserve, robber: e };
                self.cops_time(rules, g, robber, &np, round + 1, q)
            };
            if let Some(t) = t {
                if best.0.is_none_or(|b| t < b) {
                    best = (Some(t), Some(step.mv));
                    if t == round {
                        break;
                    }
                }
            }
        }
        best
    }

    fn cops_time(
        &mut self,
        rules: &Rules<'_>,
        g: &Graph,
        robber: &dyn RobberStrategy,
        p: &Position,
        round: usize,
        q: usize,
    ) -> Option<usize> {
        if let Some(&v) = self.cops_memo.get(&(*p, round)) {
            return v;
        }
        let v = self.cops_best(rules, g, robber, p, round, q).0;
        self.cops_memo.insert((*p, round), v);
        v
    }
}

/// Whether a scripted cop strategy captures every robber within `q` rounds,
/// and the latest capture round the robber can force.
pub fn script_beats_every_robber(
    g: &Graph,
    k: usize,
    q: usize,
    monotone: bool,
    cops: &dyn CopStrategy,
) -> Result<Option<usize>> {
    let adj = g.masks();
    let rules = Rules { adj: &adj, n: g.n(), monotone };
    let mut br = BestResponse::default();
    let mut worst = 0;
    for c in mask_components(&adj, full_mask(g.n())) {
        let p = Position { cops: 0, reserve: k, robber: c };
        match br.robber_best(&rules, g, cops, &p, 1, q)? {
            None => return Ok(None),
            Some(t) => worst = worst.max(t),
        }
    }
    Ok(Some(worst))
}

/// Whether a scripted robber survives `q` rounds against every cop play.
pub fn script_survives_every_cop(
    g: &Graph,
    k: usize,
    q: usize,
    monotone: bool,
    robber: &dyn RobberStrategy,
) -> bool {
    let adj = g.masks();
    let rules = Rules { adj: &adj, n: g.n(), monotone };
    let comps = mask_components(&adj, full_mask(g.n()));
    if comps.is_empty() {
        return false;
    }
    let c = comps[robber.choose(g, &comps, 0)];
    let mut br = BestResponse::default();
    let p = Position { cops: 0, reserve: k, robber: c };
    br.cops_time(&rules, g, robber, &p, 1, q).is_none()
}

// ---------------------------------------------------------------------------
// Grid structure

/// Components of `grid(h, l) - x` with a flag for containing a full column.
pub fn grid_components(h: usize, l: usize, x: u64) -> Vec<(u64, bool)> {
    let g = Graph::grid(h, l).expect("grid");
    let adj = g.masks();
    mask_components(&adj, full_mask(h * l) & !x)
        .into_iter()
        .map(|c| {
            let good = (1..=l).any(|j| (1..=h).all(|i| c >> Graph::grid_vertex(l, i, j) & 1 == 1));
            (c, good)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Bijective pebble game

/// Pebble game verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PebbleWinner {
    Spoiler,
    Duplicator,
}

/// Exact winner of the `q`-round bijective `k`-pebble game from `start`,
/// a list of `(pebble, v, w)` placements.
pub fn bijective_pebble_game(
    g: &Graph,
    h: &Graph,
    k: usize,
    q: usize,
    start: &[(usize, usize, usize)],
) -> Result<PebbleWinner> {
    let mut by_pebble: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(p, v, w) in start {
        if p == 0 || p > k {
            return invalid(format!("pebble {p} outside 1..={k}"));
        }
        if v >= g.n() || w >= h.n() {
            return invalid("pebbled vertex out of range");
        }
        by_pebble.insert(p, (v, w));
    }
    let pairs: Vec<(usize, usize)> = by_pebble.values().copied().collect();
    let dup = if g.n() != h.n() {
        q == 0 && is_partial_iso(g, h, &pairs)
    } else {
        let mut game = PebbleGame {
            g,
            h,
            gm: g.matrix(),
            hm: h.matrix(),
            k,
            memo: HashMap::new(),
        };
        game.duplicator_wins(pairs, q)
    };
    Ok(if dup { PebbleWinner::Duplicator } else { PebbleWinner::Spoiler })
}

fn is_partial_iso(g: &Graph, h: &Graph, pairs: &[(usize, usize)]) -> bool {
    pairs.iter().all(|&(v, w)| {
        pairs
            .iter()
            .all(|&(v2, w2)| (v == v2) == (w == w2) && g.has_edge(v, v2) == h.has_edge(w, w2))
    })
}

struct PebbleGame<'a> {
    g: &'a Graph,
    h: &'a Graph,
    gm: Vec<bool>,
    hm: Vec<bool>,
    k: usize,
    memo: HashMap<(Vec<(usize, usize)>, usize), bool>,
}

impl PebbleGame<'_> {
    fn partial_iso(&self, pairs: &[(usize, usize)]) -> bool {
        let (n, m) = (self.g.n(), self.h.n());
        pairs.iter().all(|&(v, w)| {
            pairs
                .iter()
                .all(|&(v2, w2)| (v == v2) == (w == w2) && self.gm[v * n + v2] == self.hm[w * m + w2])
        })
    }

    fn duplicator_wins(&mut self, mut pairs: Vec<(usize, usize)>, r: usize) -> bool {
        pairs.sort_unstable();
        if !self.partial_iso(&pairs) {
            return false;
        }
        if r == 0 {
            return true;
        }
        if let Some(&v) = self.memo.get(&(pairs.clone(), r)) {
            return v;
        }
        let n = self.g.n();
        // Spoiler picks up a free pebble or one already placed.
        let mut bases: Vec<Vec<usize>> = Vec::new();
        if pairs.len() < self.k {
            bases.push((0..pairs.len()).collect());
        }
        for drop in 0..pairs.len() {
            if drop > 0 && pairs[drop] == pairs[drop - 1] {
                continue;
            }
            bases.push((0..pairs.len()).filter(|&i| i != drop).collect());
        }
        let mut res = true;
        for keep in bases {
            let base: Vec<(usize, usize)> = keep.iter().map(|&i| pairs[i]).collect();
            let mut rel = vec![vec![false; n]; n];
            for v in 0..n {
                for w in 0..n {
                    let mut next = base.clone();
                    next.push((v, w));
                    rel[v][w] = self.duplicator_wins(next, r - 1);
                }
            }
            if !has_perfect_matching(&rel) {
                res = false;
                break;
            }
        }
        self.memo.insert((pairs, r), res);
        res
    }
}

/// Perfect matching in a square bipartite relation by augmenting paths with a
/// greedy start.
pub fn has_perfect_matching(rel: &[Vec<bool>]) -> bool {
    let n = rel.len();
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    let mut match_left: Vec<Option<usize>> = vec![None; n];
    for v in 0..n {
        if let Some(w) = (0..n).find(|&w| rel[v][w] && match_right[w].is_none()) {
            match_right[w] = Some(v);
            match_left[v] = Some(w);
        }
    }
    fn augment(v: usize, rel: &[Vec<bool>], seen: &mut [bool], mr: &mut [Option<usize>], ml: &mut [Option<usize>]) -> bool {
        for w in 0..rel.len() {
            if rel[v][w] && !seen[w] {
                seen[w] = true;
                if mr[w].is_none_or(|u| augment(u, rel, seen, mr, ml)) {
                    mr[w] = Some(v);
                    ml[v] = Some(w);
                    return true;
                }
            }
        }
        false
    }
    for v in 0..n {
        if match_left[v].is_none() {
            let mut seen = vec![false; n];
            if !augment(v, rel, &mut seen, &mut match_right, &mut match_left) {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Equivalence suite

#[derive(Clone, Debug, Serialize)]
pub enum GcVerdict {
    /// Profiles differ; `witness` is a single pattern whose profile multisets
    /// already differ, when one exists.
    Distinguished { witness: Option<String> },
    /// Profiles agree on every enumerated pattern.
    ConsistentUpToBound { patterns: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub ckq: bool,
    pub cq: bool,
    pub gc: Option<GcVerdict>,
}

/// Hom profile of every one-labelled pattern at every vertex.
fn profile_table(patterns: &[LabelledGraph], g: &Graph) -> Result<Vec<Vec<BigUint>>> {
    (0..g.n())
        .map(|v| {
            patterns
                .iter()
                .map(|f| {
                    let t = LabelledGraph::new(g.clone(), f.arity(), &[(1, v)])?;
                    hom_count(f, &t)
                })
                .collect()
        })
        .collect()
}

/// Bounded guarded comparison: vertices are grouped by their profiles over
/// all one-labelled guarded patterns with at most `max_f` vertices, and the
/// groups must have equal sizes on both sides.
pub fn gc_equivalent_bounded(g: &Graph, h: &Graph, k: usize, q: usize, max_f: usize, bounds: &Bounds) -> Result<GcVerdict> {
    let patterns = enumerate_one_labelled(max_f, k, q, true, bounds)?;
    let a = profile_table(&patterns, g)?;
    let b = profile_table(&patterns, h)?;
    let mut sa = a.clone();
    let mut sb = b.clone();
    sa.sort();
    sb.sort();
    if sa == sb {
        return Ok(GcVerdict::ConsistentUpToBound { patterns: patterns.len() });
    }
    let witness = (0..patterns.len()).find(|&i| {
        let mut x: Vec<&BigUint> = a.iter().map(|row| &row[i]).collect();
        let mut y: Vec<&BigUint> = b.iter().map(|row| &row[i]).collect();
        x.sort();
        y.sort();
        x != y
    });
    Ok(GcVerdict::Distinguished {
        witness: witness.map(|i| crate::codec::encode_text(&patterns[i])),
    })
}

pub fn equivalence_suite(
    g: &Graph,
    h: &Graph,
    k: usize,
    q: usize,
    gc_max_f: Option<usize>,
    bounds: &Bounds,
) -> Result<EquivalenceReport> {
    let limit = bounds.iso;
    if g.n() > limit || h.n() > limit {
        return Err(Error::Capability(format!("equivalence limited to {limit} vertices")));
    }
    let ckq = bijective_pebble_game(g, h, k, q, &[])? == PebbleWinner::Duplicator;
    let cq = bijective_pebble_game(g, h, q, q, &[])? == PebbleWinner::Duplicator;
    let gc = match gc_max_f {
        Some(m) => Some(gc_equivalent_bounded(g, h, k, q, m, bounds)?),
        None => None,
    };
    Ok(EquivalenceReport { ckq, cq, gc })
}
