use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use homind::acceptance::criteria;
use homind::cfi::{cfi_build, twisted_from_mask};
use homind::codec::{decode, encode_text, to_json_value};
use homind::decomp::{
    decide_membership, enumerate_class, enumerate_one_labelled, guarded_unlabelled_witness, labelled_witness, measure,
    Method, Witness, WitnessKind,
};
use homind::games::{simulate, solve_cr, equivalence_suite, CopsPlayer, GcVerdict, RobberPlayer, Winner};
use homind::logic::{
    distinguishing_graph, evaluate, formula_to_json, parse_formula, synth_formula, synth_qg, Distinction,
};
use homind::{Bounds, Error, Graph, LabelledGraph};

#[derive(Parser)]
#[command(name = "homind", version, about = "Homomorphism counts, decompositions, games, counting logic and CFI graphs")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Exact number of homomorphisms from one graph to another.
    Hom {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    /// Membership in the bounded width and depth class, with a witness.
    Decomp {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        guarded: bool,
        #[arg(long, value_enum, default_value_t = Emit::Td)]
        emit: Emit,
        /// Decide with the monotone game instead of witness search.
        #[arg(long)]
        game: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Round-bounded cops and robber.
    Game {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        monotone: bool,
        #[arg(long, value_enum)]
        emit: Option<GameEmit>,
        #[command(flatten)]
        out: Out,
    },
    /// Counting-logic equivalence via the bijective pebble game.
    Equiv {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: usize,
        /// Also run the bounded guarded comparison.
        #[arg(long)]
        gc: bool,
        #[arg(long, default_value_t = 5)]
        max_f: usize,
    },
    /// Formulas: evaluation and translation to and from graphs.
    Logic {
        #[command(subcommand)]
        action: LogicCommand,
    },
    /// Parity gadget graph over a base graph.
    Cfi {
        #[arg(long)]
        base: PathBuf,
        /// Twist vertex 0.
        #[arg(long)]
        odd: bool,
        /// Twisted vertex set, comma separated; overrides --odd.
        #[arg(long, value_delimiter = ',')]
        twist: Option<Vec<usize>>,
        #[command(flatten)]
        out: Out,
    },
    /// All graphs of the class up to isomorphism.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        guarded: bool,
        /// One-labelled patterns instead of unlabelled graphs.
        #[arg(long)]
        one_labelled: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Writes a generated graph in the text codec.
    Generate {
        #[arg(value_enum)]
        kind: GraphKind,
        /// Size, or `h` for grids.
        a: usize,
        /// Row length for grids.
        b: Option<usize>,
    },
    /// Runs the acceptance suite.
    Accept {
        /// Comma separated criterion numbers; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

#[derive(Subcommand)]
enum LogicCommand {
    /// Whether a graph satisfies a formula under its labels.
    Eval {
        #[command(flatten)]
        formula: FormulaArg,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Quantum graph whose value is the truth of the formula on n-vertex graphs.
    SynthQg {
        #[command(flatten)]
        formula: FormulaArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        guarded: bool,
    },
    /// Formula saying that the hom count from a pattern equals m.
    SynthFormula {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        m: BigUint,
        #[arg(long)]
        guarded: bool,
        /// Largest target graph the formula must be correct on.
        #[arg(long, default_value_t = 4)]
        max_n: usize,
    },
    /// Graph in the class and sentence separating two graphs.
    Distinguish {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 64)]
        max_size: usize,
    },
}

#[derive(Args)]
struct FormulaArg {
    /// Formula in s-expression form.
    #[arg(long, conflicts_with = "formula_file", required_unless_present = "formula_file")]
    formula: Option<String>,
    #[arg(long)]
    formula_file: Option<PathBuf>,
}

#[derive(Args)]
struct Out {
    /// Write the artifact here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Td,
    Pfc,
    Ctree,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameEmit {
    Strategy,
    Transcript,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Path,
    Cycle,
    Clique,
    Grid,
}

/// Verdict of a command: printed output plus whether it was positive.
struct Report {
    text: String,
    json: Value,
    positive: bool,
    artifact: Option<(Option<PathBuf>, String)>,
}

impl Report {
    fn ok(text: String, json: Value) -> Self {
        Report { text, json, positive: true, artifact: None }
    }

    fn verdict(positive: bool, text: String, json: Value) -> Self {
        Report { text, json, positive, artifact: None }
    }

    fn with_artifact(mut self, out: &Out, body: String) -> Self {
        self.artifact = Some((out.out.clone(), body));
        self
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let format = cli.format;
    match run(cli.command) {
        Ok(report) => {
            if let Some((path, body)) = &report.artifact {
                match path {
                    Some(p) => {
                        if let Err(e) = fs::write(p, body) {
                            eprintln!("error: writing {}: {e}", p.display());
                            return ExitCode::from(2);
                        }
                    }
                    None if format == Format::Text => println!("{body}"),
                    None => {}
                }
            }
            match format {
                Format::Text => {
                    if !report.text.is_empty() {
                        println!("{}", report.text)
                    }
                }
                Format::Json => {
                    let mut v = report.json;
                    if let (Some((None, body)), Value::Object(map)) = (&report.artifact, &mut v) {
                        let parsed = serde_json::from_str(body).unwrap_or_else(|_| json!(body));
                        map.entry("artifact").or_insert(parsed);
                    }
                    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
                }
            }
            ExitCode::from(if report.positive { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let capability = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Capability(_))));
            ExitCode::from(if capability { 3 } else { 2 })
        }
    }
}

fn read_graph(path: &Path) -> anyhow::Result<LabelledGraph> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&src).with_context(|| format!("decoding {}", path.display()))
}

fn read_plain(path: &Path) -> anyhow::Result<Graph> {
    Ok(read_graph(path)?.graph)
}

fn read_formula(arg: &FormulaArg) -> anyhow::Result<homind::logic::Phi> {
    let src = match (&arg.formula, &arg.formula_file) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => bail!("a formula is required"),
    };
    Ok(parse_formula(&src)?)
}

fn run(command: Command) -> anyhow::Result<Report> {
    let bounds = Bounds::from_env();
    match command {
        Command::Hom { from, to } => {
            let (f, g) = (read_graph(&from)?, read_graph(&to)?);
            let count = homind::hom_count(&f, &g)?;
            Ok(Report::ok(count.to_string(), json!({ "hom": count.to_string() })))
        }
        Command::Decomp { graph, k, q, guarded, emit, game, out } => {
            let g = read_plain(&graph)?;
            if k.is_none() && q.is_none() {
                bail!("at least one of --k and --q is required");
            }
            if guarded {
                let (Some(k), Some(q)) = (k, q) else { bail!("--guarded needs both --k and --q") };
                if g.n() > bounds.search {
                    return Err(Error::Capability(format!("guarded search limited to {} vertices", bounds.search)).into());
                }
                return Ok(match guarded_unlabelled_witness(&g, k, q) {
                    Some((f, t)) => {
                        let body = serde_json::to_string_pretty(&json!({
                            "labelled": encode_text(&f),
                            "witness": Witness::Ctree(t).to_json(),
                        }))?;
                        Report::verdict(true, "member".into(), json!({ "member": true })).with_artifact(&out, body)
                    }
                    None => Report::verdict(false, "not a member".into(), json!({ "member": false })),
                });
            }
            let kind = match emit {
                Emit::Td => WitnessKind::Td,
                Emit::Pfc => WitnessKind::Pfc,
                Emit::Ctree => WitnessKind::Ctree,
            };
            let method = if game { Method::Game } else { Method::Search(kind) };
            let m = decide_membership(&g, k, q, method, &bounds)?;
            Ok(match m.witness {
                Some(w) => {
                    let w = homind::decomp::convert(&g, &w, kind)?;
                    let measures = measure(&w);
                    let body = serde_json::to_string_pretty(&w.to_json())?;
                    Report::verdict(true, "member".into(), json!({ "member": true, "measures": measures }))
                        .with_artifact(&out, body)
                }
                None => Report::verdict(false, "not a member".into(), json!({ "member": false })),
            })
        }
        Command::Game { graph, k, q, monotone, emit, out } => {
            let g = read_plain(&graph)?;
            let solved = solve_cr(&g, k, q, monotone, &bounds)?;
            let cops = solved.cops_win();
            let text = if cops { "Cops win" } else { "Robber wins" };
            let report = Report::verdict(cops, text.into(), json!({ "winner": if cops { "cops" } else { "robber" } }));
            Ok(match emit {
                None => report,
                Some(GameEmit::Strategy) => {
                    let body = serde_json::to_string_pretty(&solved.strategy_json())?;
                    report.with_artifact(&out, body)
                }
                Some(GameEmit::Transcript) => {
                    let t = simulate(&g, k, q, monotone, CopsPlayer::Optimal, RobberPlayer::Optimal, &bounds)?;
                    debug_assert_eq!(t.winner == Winner::Cops, cops);
                    report.with_artifact(&out, serde_json::to_string_pretty(&t)?)
                }
            })
        }
        Command::Equiv { a, b, k, q, gc, max_f } => {
            let (g, h) = (read_plain(&a)?, read_plain(&b)?);
            let r = equivalence_suite(&g, &h, k, q, gc.then_some(max_f), &bounds)?;
            let mut lines = vec![
                format!("C^{k}_{q}: {}", if r.ckq { "equivalent" } else { "distinguished" }),
                format!("C^{q}_{q}: {}", if r.cq { "equivalent" } else { "distinguished" }),
            ];
            match &r.gc {
                Some(GcVerdict::Distinguished { witness }) => lines.push(format!(
                    "GC^{k}_{q}: distinguished{}",
                    witness.as_ref().map(|w| format!(" by {w}")).unwrap_or_default()
                )),
                Some(GcVerdict::ConsistentUpToBound { patterns }) => {
                    lines.push(format!("GC^{k}_{q}: consistent on {patterns} patterns"))
                }
                None => {}
            }
            Ok(Report::verdict(r.ckq, lines.join("\n"), serde_json::to_value(&r)?))
        }
        Command::Logic { action } => run_logic(action, &bounds),
        Command::Cfi { base, odd, twist, out } => {
            let b = read_plain(&base)?;
            if b.n() == 0 || !b.is_connected() {
                bail!("the base graph must be connected and nonempty");
            }
            let twisted = match twist {
                Some(vs) => vs.into_iter().collect(),
                None => twisted_from_mask(odd as u64),
            };
            let c = cfi_build(&b, &twisted)?;
            let labelled = LabelledGraph::unlabelled(c.graph.clone(), 0);
            let summary = format!(
                "twisted {:?}: {} vertices, {} edges",
                c.twisted,
                c.graph.n(),
                c.graph.edge_count()
            );
            let report = Report::ok(
                String::new(),
                json!({ "twisted": c.twisted, "graph": to_json_value(&labelled), "fibres": c.fiber_map() }),
            );
            let report = Report { text: if out.out.is_some() { summary } else { String::new() }, ..report };
            Ok(report.with_artifact(&out, encode_text(&labelled)))
        }
        Command::Enumerate { n, k, q, guarded, one_labelled, out } => {
            let lines: Vec<String> = if one_labelled {
                enumerate_one_labelled(n, k, q, guarded, &bounds)?.iter().map(encode_text).collect()
            } else {
                enumerate_class(n, k, q, guarded, &bounds)?
                    .into_iter()
                    .map(|g| encode_text(&LabelledGraph::unlabelled(g, 0)))
                    .collect()
            };
            let count = lines.len();
            Ok(Report::ok(String::new(), json!({ "count": count, "graphs": lines })).with_artifact(&out, lines.join("\n")))
        }
        Command::Generate { kind, a, b } => {
            let g = match (kind, b) {
                (GraphKind::Path, None) => Graph::path(a)?,
                (GraphKind::Cycle, None) => Graph::cycle(a)?,
                (GraphKind::Clique, None) => Graph::clique(a)?,
                (GraphKind::Grid, Some(l)) => Graph::grid(a, l)?,
                (GraphKind::Grid, None) => bail!("grid needs two sizes"),
                (_, Some(_)) => bail!("only grid takes two sizes"),
            };
            let f = LabelledGraph::unlabelled(g, 0);
            Ok(Report::ok(encode_text(&f), to_json_value(&f)))
        }
        Command::Accept { only } => {
            let mut rows = Vec::new();
            let mut lines = Vec::new();
            let mut all = true;
            for c in criteria() {
                if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
                    continue;
                }
                let v = c.run();
                all &= v.passed;
                lines.push(v.line());
                rows.push(serde_json::to_value(&v)?);
            }
            Ok(Report::verdict(all, lines.join("\n"), json!({ "criteria": rows, "passed": all })))
        }
    }
}

fn run_logic(action: LogicCommand, bounds: &Bounds) -> anyhow::Result<Report> {
    match action {
        LogicCommand::Eval { formula, graph } => {
            let phi = read_formula(&formula)?;
            let g = read_graph(&graph)?;
            let v = evaluate(&phi, &g)?;
            Ok(Report::verdict(v.holds, v.holds.to_string(), serde_json::to_value(&v)?))
        }
        LogicCommand::SynthQg { formula, n, guarded } => {
            let phi = read_formula(&formula)?;
            let qg = synth_qg(&phi, n, guarded)?;
            let v = qg.to_json();
            Ok(Report::ok(serde_json::to_string_pretty(&v)?, v))
        }
        LogicCommand::SynthFormula { graph, k, q, m, guarded, max_n } => {
            let f = read_graph(&graph)?;
            if max_n > bounds.search {
                return Err(Error::Capability(format!("--max-n limited to {}", bounds.search)).into());
            }
            let Some(w) = labelled_witness(&f, k, q, guarded) else {
                bail!("the pattern has no construction tree for k={k}, q={q}");
            };
            let phi = synth_formula(&f, &w, &m, guarded, max_n)?;
            Ok(Report::ok(phi.to_string(), json!({ "formula": formula_to_json(&phi), "text": phi.to_string() })))
        }
        LogicCommand::Distinguish { a, b, k, q, max_size } => {
            let (g, h) = (read_plain(&a)?, read_plain(&b)?);
            if g.n().max(h.n()) > bounds.iso {
                return Err(Error::Capability(format!("distinguish limited to {} vertices", bounds.iso)).into());
            }
            let (d, _) = distinguishing_graph(&g, &h, k, q, max_size)?;
            let text = match &d {
                Distinction::Found { graph, sentence, hom_g, hom_h, .. } => {
                    format!("graph: {graph}\nsentence: {sentence}\nhom: {hom_g} vs {hom_h}")
                }
                Distinction::Equivalent => "equivalent".into(),
                Distinction::Inconclusive => "inconclusive".into(),
            };
            let found = matches!(d, Distinction::Found { .. });
            Ok(Report::verdict(found, text, serde_json::to_value(&d)?))
        }
    }
}
