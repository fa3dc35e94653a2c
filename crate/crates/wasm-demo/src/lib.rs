//! Browser bindings: hom counts, cops-and-robber verdicts and CFI pairs.
//! Every export takes graphs in the text codec and returns a JSON string.

use std::collections::BTreeSet;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use homind::cfi::{cfi_build, cfi_pair};
use homind::codec::{decode, encode_text};
use homind::games::{bijective_pebble_game, solve_cr, PebbleWinner};
use homind::{hom, hom_count, Bounds, Graph, LabelledGraph};

fn wrap(r: homind::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Parses a graph given either in the codec or as `path 7`, `cycle 5`,
/// `clique 4` or `grid 2 5`.
pub fn parse_graph(src: &str) -> homind::Result<LabelledGraph> {
    let words: Vec<&str> = src.split_whitespace().collect();
    let nums: Option<Vec<usize>> = words.iter().skip(1).map(|w| w.parse().ok()).collect();
    let g = match (words.first().copied(), nums.as_deref()) {
        (Some("path"), Some([n])) => Graph::path(*n)?,
        (Some("cycle"), Some([n])) => Graph::cycle(*n)?,
        (Some("clique"), Some([n])) => Graph::clique(*n)?,
        (Some("grid"), Some([h, l])) => Graph::grid(*h, *l)?,
        _ => return decode(src),
    };
    Ok(LabelledGraph::unlabelled(g, 0))
}

#[wasm_bindgen]
pub fn count_homs(from: &str, to: &str) -> String {
    wrap((|| {
        let (f, g) = (parse_graph(from)?, parse_graph(to)?);
        if f.n() > 12 || g.n() > 40 {
            return Err(homind::Error::Capability("demo limited to 12 pattern and 40 target vertices".into()));
        }
        Ok(json!({ "hom": hom_count(&f, &g)?.to_string() }))
    })())
}

#[wasm_bindgen]
pub fn play_game(graph: &str, k: usize, q: usize, monotone: bool) -> String {
    wrap((|| {
        let g = parse_graph(graph)?.graph;
        let bounds = Bounds { game: 24, ..Bounds::default() };
        let solved = solve_cr(&g, k, q, monotone, &bounds)?;
        Ok(json!({
            "winner": if solved.cops_win() { "Cops" } else { "Robber" },
            "vertices": g.n(),
            "edges": g.edge_count(),
        }))
    })())
}

/// Builds `G_∅` and `G_{0}`, compares hom counts from the base and plays
/// the bijective game with `k` pebbles for `q` rounds.
#[wasm_bindgen]
pub fn cfi_compare(base: &str, k: usize, q: usize) -> String {
    wrap((|| {
        let b = parse_graph(base)?.graph;
        if b.n() > 8 {
            return Err(homind::Error::Capability("demo limited to 8 base vertices".into()));
        }
        let (even, odd) = cfi_pair(&b)?;
        if even.graph.n() > 40 {
            return Err(homind::Error::Capability("gadget graph over 40 vertices".into()));
        }
        let dup = bijective_pebble_game(&even.graph, &odd.graph, k, q, &[])? == PebbleWinner::Duplicator;
        let plain = cfi_build(&b, &BTreeSet::new())?;
        Ok(json!({
            "vertices": even.graph.n(),
            "hom_even": hom(&b, &plain.graph).to_string(),
            "hom_odd": hom(&b, &odd.graph).to_string(),
            "game": if dup { "Duplicator" } else { "Spoiler" },
            "even": encode_text(&LabelledGraph::unlabelled(even.graph, 0)),
        }))
    })())
}
