//! Text and JSON codecs for labelled graphs.
//!
//! Text form: `n=<int>; e=<u-v>,...; l=<label>:<vertex>,...`. The `e` and `l`
//! fields are optional, fields may be separated by newlines, and `#` starts a
//! comment. An optional `k=<int>` field records a label arity larger than the
//! largest assigned label so that encoding stays lossless.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelledGraph};

pub fn encode_text(g: &LabelledGraph) -> String {
    let mut parts = vec![format!("n={}", g.n())];
    let max_label = g.assigned().iter().map(|&(l, _)| l).max().unwrap_or(0);
    if g.arity() > max_label {
        parts.push(format!("k={}", g.arity()));
    }
    let edges = g.graph.edges();
    if !edges.is_empty() {
        let body: Vec<String> = edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        parts.push(format!("e={}", body.join(",")));
    }
    let labels = g.assigned();
    if !labels.is_empty() {
        let body: Vec<String> = labels.iter().map(|(l, v)| format!("{l}:{v}")).collect();
        parts.push(format!("l={}", body.join(",")));
    }
    parts.join("; ")
}

/// Decodes either codec; JSON is recognised by a leading `{`.
pub fn decode(input: &str) -> Result<LabelledGraph> {
    if input.trim_start().starts_with('{') {
        decode_json(input)
    } else {
        decode_text(input)
    }
}

struct Scanner<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

impl<'a> Scanner<'a> {
    fn new(src: &'a str) -> Self {
        Scanner {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
            _src: src,
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    /// Skips blanks and comments, not separators.
    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c == ' ' || c == '\t' || c == '\r' {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        self.skip_blank();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => self.error(format!("expected '{want}', found '{c}'")),
            None => self.error(format!("expected '{want}', found end of input")),
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_blank();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return match self.peek() {
                Some(c) => self.error(format!("expected a number, found '{c}'")),
                None => self.error("expected a number, found end of input"),
            };
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<usize>()
            .or_else(|_| self.error(format!("number {text} is too large")))
    }
}

pub fn decode_text(input: &str) -> Result<LabelledGraph> {
    let mut s = Scanner::new(input);
    let mut n: Option<usize> = None;
    let mut arity: Option<usize> = None;
    let mut edges: Vec<((usize, usize), (usize, usize))> = Vec::new();
    let mut labels: Vec<((usize, usize), (usize, usize))> = Vec::new();
    loop {
        // Field separators: ';' and newlines, in any amount.
        loop {
            s.skip_blank();
            match s.peek() {
                Some(';') | Some('\n') => {
                    s.bump();
                }
                _ => break,
            }
        }
        let Some(key) = s.peek() else { break };
        let at = (s.line, s.column);
        s.bump();
        s.expect('=')?;
        match key {
            'n' | 'k' => {
                let value = s.number()?;
                let slot = if key == 'n' { &mut n } else { &mut arity };
                if slot.is_some() {
                    return Err(Error::Parse {
                        line: at.0,
                        column: at.1,
                        message: format!("field '{key}' given twice"),
                    });
                }
                *slot = Some(value);
            }
            'e' => loop {
                s.skip_blank();
                let pos = (s.line, s.column);
                let u = s.number()?;
                s.expect('-')?;
                let v = s.number()?;
                edges.push((pos, (u, v)));
                s.skip_blank();
                if s.peek() == Some(',') {
                    s.bump();
                } else {
                    break;
                }
            },
            'l' => loop {
                s.skip_blank();
                let pos = (s.line, s.column);
                let l = s.number()?;
                s.expect(':')?;
                let v = s.number()?;
                labels.push((pos, (l, v)));
                s.skip_blank();
                if s.peek() == Some(',') {
                    s.bump();
                } else {
                    break;
                }
            },
            other => {
                return Err(Error::Parse {
                    line: at.0,
                    column: at.1,
                    message: format!("unknown field '{other}'"),
                })
            }
        }
        s.skip_blank();
        match s.peek() {
            None | Some(';') | Some('\n') => {}
            Some(c) => return s.error(format!("expected ';' after field, found '{c}'")),
        }
    }
    let Some(n) = n else {
        return s.error("missing field 'n'");
    };
    let mut graph = Graph::empty(n);
    for ((line, column), (u, v)) in edges {
        if u == v {
            return Err(Error::Validation(format!(
                "loop at vertex {u} (line {line}, column {column})"
            )));
        }
        if u >= n || v >= n {
            return Err(Error::Validation(format!(
                "edge {u}-{v} out of range for n={n} (line {line}, column {column})"
            )));
        }
        graph.insert_edge(u, v);
    }
    let max_label = labels.iter().map(|(_, (l, _))| *l).max().unwrap_or(0);
    let arity = arity.unwrap_or(max_label);
    if max_label > arity {
        return Err(Error::Validation(format!(
            "label {max_label} exceeds arity {arity}"
        )));
    }
    let pairs: Vec<(usize, usize)> = labels.iter().map(|(_, p)| *p).collect();
    LabelledGraph::new(graph, arity, &pairs)
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    n: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    labels: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arity: Option<usize>,
}

pub fn to_json_value(g: &LabelledGraph) -> serde_json::Value {
    let max_label = g.assigned().iter().map(|&(l, _)| l).max().unwrap_or(0);
    let repr = JsonGraph {
        n: g.n(),
        edges: g.graph.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        labels: g
            .assigned()
            .into_iter()
            .map(|(l, v)| (l.to_string(), v))
            .collect(),
        arity: (g.arity() > max_label).then_some(g.arity()),
    };
    serde_json::to_value(repr).expect("graph serialises")
}

/// JSON object with keys in a fixed order; label keys sort numerically.
pub fn encode_json(g: &LabelledGraph) -> String {
    let mut labels: Vec<(usize, usize)> = g.assigned();
    labels.sort();
    let edges: Vec<String> = g
        .graph
        .edges()
        .iter()
        .map(|(u, v)| format!("[{u},{v}]"))
        .collect();
    let labels: Vec<String> = labels.iter().map(|(l, v)| format!("\"{l}\":{v}")).collect();
    let max_label = g.assigned().iter().map(|&(l, _)| l).max().unwrap_or(0);
    let arity = if g.arity() > max_label {
        format!(",\"arity\":{}", g.arity())
    } else {
        String::new()
    };
    format!(
        "{{\"n\":{},\"edges\":[{}],\"labels\":{{{}}}{}}}",
        g.n(),
        edges.join(","),
        labels.join(","),
        arity
    )
}

pub fn from_json_value(value: serde_json::Value) -> Result<LabelledGraph> {
    let repr: JsonGraph = serde_json::from_value(value)
        .map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    build_json(repr)
}

pub fn decode_json(input: &str) -> Result<LabelledGraph> {
    let repr: JsonGraph = serde_json::from_str(input).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build_json(repr)
}

fn build_json(repr: JsonGraph) -> Result<LabelledGraph> {
    let edges: Vec<(usize, usize)> = repr.edges.iter().map(|e| (e[0], e[1])).collect();
    let graph = Graph::from_edges(repr.n, &edges)?;
    let mut pairs = Vec::new();
    for (key, v) in &repr.labels {
        let l: usize = key
            .parse()
            .map_err(|_| Error::Validation(format!("label key '{key}' is not a number")))?;
        pairs.push((l, *v));
    }
    let max_label = pairs.iter().map(|&(l, _)| l).max().unwrap_or(0);
    let arity = repr.arity.unwrap_or(max_label);
    if max_label > arity {
        return Err(Error::Validation(format!(
            "label {max_label} exceeds arity {arity}"
        )));
    }
    LabelledGraph::new(graph, arity, &pairs)
}
