use std::collections::HashMap;

use homind::canon::all_graphs_upto;
use homind::decomp::{decide_membership, verify_td, Method, WitnessKind};
use homind::games::{
    bijective_pebble_game, grid_components, script_beats_every_robber, script_survives_every_cop, simulate, solve_cr,
    strategy_to_td, Cop, CopMove, CopStrategy, CopsPlayer, LargestComponent, PathLeapfrog, PebbleWinner, Position,
    RobberPlayer, Winner,
};
use homind::{Bounds, Error, Graph};
use proptest::prelude::*;

/// Cops game with the robber on a single vertex, solved from scratch.
struct Oracle<'a> {
    g: &'a Graph,
    monotone: bool,
    memo: HashMap<(Vec<usize>, usize, usize, usize), bool>,
}

impl Oracle<'_> {
    fn reach(&self, from: usize, blocked: &[usize]) -> Vec<usize> {
        let mut seen = vec![from];
        let mut i = 0;
        while i < seen.len() {
            let v = seen[i];
            for u in 0..self.g.n() {
                if self.g.has_edge(v, u) && !blocked.contains(&u) && !seen.contains(&u) {
                    seen.push(u);
                }
            }
            i += 1;
        }
        seen.sort_unstable();
        seen
    }

    fn cops_win(&mut self, cops: Vec<usize>, reserve: usize, robber: usize, r: usize) -> bool {
        if r == 0 {
            return false;
        }
        let key = (cops.clone(), reserve, robber, r);
        if let Some(&w) = self.memo.get(&key) {
            return w;
        }
        let mut lifts: Vec<Option<usize>> = cops.iter().map(|&c| Some(c)).collect();
        if reserve > 0 {
            lifts.push(None);
        }
        let before = self.reach(robber, &cops);
        let mut win = false;
        'outer: for lift in lifts {
            let rest: Vec<usize> = cops.iter().copied().filter(|&c| Some(c) != lift).collect();
            let space = self.reach(robber, &rest);
            if self.monotone && space != before {
                continue;
            }
            for b in (0..self.g.n()).filter(|b| !cops.contains(b)) {
                let mut next = rest.clone();
                next.push(b);
                next.sort_unstable();
                let res = reserve - usize::from(lift.is_none());
                if space.iter().filter(|&&u| u != b).all(|&u| self.cops_win(next.clone(), res, u, r - 1)) {
                    win = true;
                    break 'outer;
                }
            }
        }
        self.memo.insert(key, win);
        win
    }

    fn solve(g: &Graph, k: usize, q: usize, monotone: bool) -> bool {
        let mut o = Oracle { g, monotone, memo: HashMap::new() };
        (0..g.n()).all(|v| o.cops_win(Vec::new(), k, v, q))
    }
}

/// Bijective pebble game by trying every bijection.
fn pebble_oracle(g: &Graph, h: &Graph, k: usize, q: usize) -> bool {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for i in 0..n {
                let mut x = p.clone();
                x.insert(i, n - 1);
                out.push(x);
            }
        }
        out
    }
    fn iso(g: &Graph, h: &Graph, pairs: &[Option<(usize, usize)>]) -> bool {
        let ps: Vec<_> = pairs.iter().flatten().collect();
        ps.iter().all(|&&(a, b)| ps.iter().all(|&&(c, d)| (a == c) == (b == d) && g.has_edge(a, c) == h.has_edge(b, d)))
    }
    fn dup(g: &Graph, h: &Graph, bij: &[Vec<usize>], pairs: Vec<Option<(usize, usize)>>, r: usize) -> bool {
        if !iso(g, h, &pairs) {
            return false;
        }
        if r == 0 {
            return true;
        }
        (0..pairs.len()).all(|p| {
            bij.iter().any(|f| {
                (0..g.n()).all(|v| {
                    let mut next = pairs.clone();
                    next[p] = Some((v, f[v]));
                    dup(g, h, bij, next, r - 1)
                })
            })
        })
    }
    if g.n() != h.n() {
        return q == 0;
    }
    dup(g, h, &perms(g.n()), vec![None; k], q)
}

fn graphs(n: usize) -> Vec<Graph> {
    all_graphs_upto(n).into_iter().filter(|g| g.n() > 0).collect()
}

#[test]
fn path_examples() {
    let b = Bounds::default();
    let p7 = Graph::path(7).unwrap();
    assert!(solve_cr(&p7, 2, 4, true, &b).unwrap().cops_win());
    assert!(!solve_cr(&p7, 2, 3, true, &b).unwrap().cops_win());
    assert!(!solve_cr(&p7, 2, 3, false, &b).unwrap().cops_win());
    assert!(solve_cr(&p7, 1, 7, false, &b).unwrap().winner == Winner::Robber);
    let k4 = Graph::clique(4).unwrap();
    assert!(solve_cr(&k4, 4, 4, true, &b).unwrap().cops_win());
    assert!(!solve_cr(&k4, 3, 10, false, &b).unwrap().cops_win());
    assert!(solve_cr(&Graph::empty(0), 1, 0, true, &b).unwrap().cops_win());
}

#[test]
fn solver_matches_oracle() {
    let b = Bounds::default();
    for g in graphs(5) {
        for k in 1..=3 {
            for q in 1..=4 {
                for monotone in [true, false] {
                    let want = Oracle::solve(&g, k, q, monotone);
                    let got = solve_cr(&g, k, q, monotone, &b).unwrap().cops_win();
                    assert_eq!(got, want, "{g:?} k={k} q={q} monotone={monotone}");
                }
            }
        }
    }
}

#[test]
fn monotone_game_decides_the_class() {
    let b = Bounds::default();
    for g in graphs(6).into_iter().filter(|g| g.is_connected()) {
        for (k, q) in [(1, 1), (2, 2), (2, 3), (2, 4), (3, 3), (3, 4)] {
            let game = solve_cr(&g, k, q, true, &b).unwrap().cops_win();
            let search = decide_membership(&g, Some(k), Some(q), Method::Search(WitnessKind::Td), &b).unwrap();
            assert_eq!(game, search.member, "{g:?} k={k} q={q}");
        }
    }
}

#[test]
fn strategies_yield_decompositions() {
    let b = Bounds::default();
    let g = Graph::grid(2, 4).unwrap();
    let solved = solve_cr(&g, 3, 5, true, &b).unwrap();
    assert!(solved.cops_win());
    let td = strategy_to_td(&g, &solved).unwrap();
    assert!(verify_td(&g, &td, 3, 5).is_ok());
    let lost = solve_cr(&g, 2, 5, true, &b).unwrap();
    assert!(matches!(strategy_to_td(&g, &lost), Err(Error::Validation(_))));
    let free = solve_cr(&g, 3, 5, false, &b).unwrap();
    assert!(strategy_to_td(&g, &free).is_err());
    assert!(solved.strategy_json().is_object());
}

#[test]
fn scripted_strategies() {
    let p7 = Graph::path(7).unwrap();
    let leap = PathLeapfrog::new(7).unwrap();
    assert_eq!(script_beats_every_robber(&p7, 2, 4, true, &leap).unwrap(), Some(4));
    assert_eq!(script_beats_every_robber(&p7, 2, 3, true, &leap).unwrap(), None);
    assert!(!script_survives_every_cop(&p7, 2, 4, false, &LargestComponent::any()));
    let grid = Graph::grid(2, 4).unwrap();
    let robber = LargestComponent::on_grid(2, 4).unwrap();
    assert!(script_survives_every_cop(&grid, 3, 2, false, &robber));
    assert!(!script_survives_every_cop(&grid, 3, 8, false, &robber));
    assert!(PathLeapfrog::new(0).is_err());
}

#[test]
fn simulation_between_optimal_players() {
    let b = Bounds::default();
    let p7 = Graph::path(7).unwrap();
    let t = simulate(&p7, 2, 4, true, CopsPlayer::Optimal, RobberPlayer::Optimal, &b).unwrap();
    assert_eq!((t.winner, t.rounds), (Winner::Cops, 4));
    assert!(t.moves.last().unwrap().robber.is_empty());
    let t = simulate(&p7, 2, 3, true, CopsPlayer::Optimal, RobberPlayer::Optimal, &b).unwrap();
    assert_eq!((t.winner, t.rounds), (Winner::Robber, 3));
    let leap = PathLeapfrog::new(7).unwrap();
    let t = simulate(&p7, 2, 4, true, CopsPlayer::Script(&leap), RobberPlayer::Optimal, &b).unwrap();
    assert_eq!(t.winner, Winner::Cops);
    let big = Graph::path(41).unwrap();
    assert!(matches!(
        simulate(&big, 2, 4, true, CopsPlayer::Optimal, RobberPlayer::Optimal, &b),
        Err(Error::Capability(_))
    ));
}

/// Lands in the middle of the path, then keeps stepping the cop along.
struct Careless;

impl CopStrategy for Careless {
    fn next(&self, _g: &Graph, p: &Position, round: usize) -> homind::Result<CopMove> {
        Ok(match round {
            1 => CopMove { lift: Cop::Reserve, place: 1 },
            _ => {
                let at = p.cops.trailing_zeros() as usize;
                CopMove { lift: Cop::Vertex(at), place: (at + 1) % 3 }
            }
        })
    }
}

#[test]
fn illegal_monotone_move_is_rejected() {
    let b = Bounds::default();
    let p3 = Graph::path(3).unwrap();
    let err = simulate(&p3, 1, 3, true, CopsPlayer::Script(&Careless), RobberPlayer::Optimal, &b).unwrap_err();
    assert!(matches!(err, Error::Validation(ref m) if m.contains("monoton")), "{err}");
    let t = simulate(&p3, 1, 3, false, CopsPlayer::Script(&Careless), RobberPlayer::Optimal, &b).unwrap();
    assert_eq!(t.winner, Winner::Robber);
}

#[test]
fn pebble_game_examples() {
    let c6 = Graph::cycle(6).unwrap();
    let two_k3 = Graph::cycle(3).unwrap().disjoint_union(&Graph::cycle(3).unwrap());
    for q in 0..=4 {
        assert_eq!(bijective_pebble_game(&c6, &two_k3, 2, q, &[]).unwrap(), PebbleWinner::Duplicator);
    }
    assert_eq!(bijective_pebble_game(&c6, &two_k3, 3, 4, &[]).unwrap(), PebbleWinner::Spoiler);
    assert_eq!(bijective_pebble_game(&c6, &two_k3, 3, 1, &[]).unwrap(), PebbleWinner::Duplicator);
    let k3 = Graph::clique(3).unwrap();
    let p3 = Graph::path(3).unwrap();
    assert_eq!(bijective_pebble_game(&k3, &p3, 1, 1, &[]).unwrap(), PebbleWinner::Duplicator);
    assert_eq!(bijective_pebble_game(&k3, &p3, 2, 2, &[]).unwrap(), PebbleWinner::Spoiler);
    assert_eq!(bijective_pebble_game(&k3, &p3, 2, 0, &[(1, 0, 0), (2, 1, 2)]).unwrap(), PebbleWinner::Spoiler);
    assert!(bijective_pebble_game(&k3, &p3, 2, 1, &[(3, 0, 0)]).is_err());
    let k2 = Graph::clique(2).unwrap();
    assert_eq!(bijective_pebble_game(&k3, &k2, 2, 0, &[]).unwrap(), PebbleWinner::Duplicator);
    assert_eq!(bijective_pebble_game(&k3, &k2, 2, 1, &[]).unwrap(), PebbleWinner::Spoiler);
}

#[test]
fn pebble_game_matches_oracle() {
    let all = graphs(4);
    for (i, g) in all.iter().enumerate() {
        for h in &all[i..] {
            for k in 1..=3 {
                for q in 0..=3 {
                    let want = pebble_oracle(g, h, k, q);
                    let got = bijective_pebble_game(g, h, k, q, &[]).unwrap() == PebbleWinner::Duplicator;
                    assert_eq!(got, want, "{g:?} {h:?} k={k} q={q}");
                }
            }
        }
    }
}

#[test]
fn grid_separators_leave_one_full_column() {
    for (h, l) in [(2, 3), (2, 5), (3, 3), (3, 4)] {
        let n = h * l;
        for x in 0u64..1 << n {
            if x.count_ones() as usize >= h {
                continue;
            }
            let comps = grid_components(h, l, x);
            assert_eq!(comps.iter().filter(|c| c.1).count(), 1, "grid({h},{l}) minus {x:b}");
            let covered = comps.iter().fold(0, |m, c| m | c.0);
            assert_eq!(covered, ((1u64 << n) - 1) & !x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn more_cops_and_rounds_never_hurt(idx in 0usize..150, k in 1usize..=3, q in 1usize..=4, monotone: bool) {
        let all = graphs(6);
        let g = &all[idx % all.len()];
        let b = Bounds::default();
        if solve_cr(g, k, q, monotone, &b).unwrap().cops_win() {
            prop_assert!(solve_cr(g, k + 1, q, monotone, &b).unwrap().cops_win());
            prop_assert!(solve_cr(g, k, q + 1, monotone, &b).unwrap().cops_win());
        }
    }

    #[test]
    fn monotone_wins_are_wins(idx in 0usize..150, k in 1usize..=3, q in 1usize..=5) {
        let all = graphs(6);
        let g = &all[idx % all.len()];
        let b = Bounds::default();
        if solve_cr(g, k, q, true, &b).unwrap().cops_win() {
            prop_assert!(solve_cr(g, k, q, false, &b).unwrap().cops_win());
        }
    }
}
