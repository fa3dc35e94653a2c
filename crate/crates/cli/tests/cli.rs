use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homind-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn graph_file(name: &str, codec: &str) -> String {
    let p = scratch(name);
    fs::write(&p, codec).unwrap();
    p.to_string_lossy().into_owned()
}

fn homind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homind")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

const P7: &str = "n=7; e=0-1,1-2,2-3,3-4,4-5,5-6";

#[test]
fn game_on_p7() {
    let p7 = graph_file("p7.g", P7);
    let o = homind(&["game", "--graph", &p7, "--k", "2", "--q", "3"]);
    assert_eq!(stdout(&o), "Robber wins");
    assert_eq!(o.status.code(), Some(1));
    let o = homind(&["game", "--graph", &p7, "--k", "2", "--q", "4", "--monotone"]);
    assert_eq!(stdout(&o), "Cops win");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn hom_k2_to_c5() {
    let k2 = graph_file("k2.g", "n=2; e=0-1");
    let c5 = graph_file("c5.g", "n=5; e=0-1,1-2,2-3,3-4,0-4");
    let o = homind(&["hom", "--from", &k2, "--to", &c5]);
    assert_eq!(stdout(&o), "10");
    assert_eq!(o.status.code(), Some(0));
    let o = homind(&["--format", "json", "hom", "--from", &k2, "--to", &c5]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["hom"], "10");
}

#[test]
fn exit_codes() {
    let bad = graph_file("bad.g", "n=2; e=0-5");
    let k2 = graph_file("k2b.g", "n=2; e=0-1");
    assert_eq!(homind(&["hom", "--from", &bad, "--to", &k2]).status.code(), Some(2));
    assert_eq!(homind(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(homind(&["hom", "--from", "/nonexistent/x.g", "--to", &k2]).status.code(), Some(2));
    let big = graph_file("p20.g", &stdout(&homind(&["generate", "path", "20"])));
    let o = homind(&["decomp", "--graph", &big, "--k", "2", "--q", "5"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn decomp_emits_a_witness() {
    let p7 = graph_file("p7d.g", P7);
    let out = scratch("p7.pfc.json");
    let o = homind(&["decomp", "--graph", &p7, "--k", "2", "--q", "4", "--emit", "pfc", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(w["kind"], "pfc");
    let o = homind(&["decomp", "--graph", &p7, "--k", "2", "--q", "3"]);
    assert_eq!((stdout(&o).as_str(), o.status.code()), ("not a member", Some(1)));
}

#[test]
fn equivalence_of_c6_and_two_triangles() {
    let c6 = graph_file("c6.g", "n=6; e=0-1,1-2,2-3,3-4,4-5,0-5");
    let tt = graph_file("2k3.g", "n=6; e=0-1,1-2,0-2,3-4,4-5,3-5");
    let o = homind(&["equiv", "--a", &c6, "--b", &tt, "--k", "2", "--q", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("C^2_3: equivalent"));
    let o = homind(&["logic", "distinguish", "--a", &c6, "--b", &tt, "--k", "3", "--q", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("graph: "));
}

#[test]
fn logic_eval() {
    let c5 = graph_file("c5e.g", "n=5; e=0-1,1-2,2-3,3-4,0-4");
    let o = homind(&["logic", "eval", "--formula", "(geq 1 x1 (exactly 2 x2 (E x1 x2)))", "--graph", &c5]);
    assert_eq!((stdout(&o).as_str(), o.status.code()), ("true", Some(0)));
    let o = homind(&["logic", "eval", "--formula", "(geq 1 x1", "--graph", &c5]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn cfi_and_generate() {
    let p4 = graph_file("p4.g", &stdout(&homind(&["generate", "path", "4"])));
    let even = homind(&["cfi", "--base", &p4]);
    let odd = homind(&["cfi", "--base", &p4, "--odd"]);
    assert!(stdout(&even).starts_with("n=6;"));
    assert!(stdout(&odd).starts_with("n=6;"));
    assert_ne!(stdout(&even), stdout(&odd));
    let two = graph_file("two.g", "n=2; e=");
    assert_eq!(homind(&["cfi", "--base", &two]).status.code(), Some(2));
    assert_eq!(homind(&["generate", "grid", "2"]).status.code(), Some(2));
}

#[test]
fn enumerate_counts() {
    let o = homind(&["--format", "json", "enumerate", "--n", "4", "--k", "4", "--q", "4"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // Every graph on at most four vertices, the empty graph included.
    assert_eq!(v["count"], 19);
}
