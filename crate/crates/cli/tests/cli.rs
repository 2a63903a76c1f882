//! End-to-end tests of the `cakecut` binary: output shapes and the exit
//! status contract (0 ok, 1 usage, 2 budget, 3 guarantee violation).

use std::path::Path;
use std::process::{Command, Output};

fn cakecut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cakecut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_nine_eight() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("w.json");
    let out = cakecut(&["solve", "9", "8", "--witness", witness.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("f(9,8) = 3"), "{}", stdout(&out));

    let json = std::fs::read_to_string(&witness).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["cutoff"], "5/17");
}

#[test]
fn solve_reduces_input_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let witness = dir.path().join("w.json");
    let out = cakecut(&["solve", "18", "16", "--witness", witness.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("not in lowest terms"), "{text}");
    assert!(text.contains("f(9,8) = 3"), "{text}");
}

#[test]
fn bounds_giant_ratio() {
    let out = cakecut(&["bounds", "58470565", "72019008"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("lower 5"), "{text}");
    assert!(text.contains("upper 27"), "{text}");
}

#[test]
fn bounds_arbitrary_precision() {
    // 2^64 + 1 over 3: far beyond native integer range
    let out = cakecut(&["bounds", "18446744073709551617", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("lower 6"), "{text}");
    assert!(text.contains("upper 65"), "{text}");
}

#[test]
fn usage_error_exits_one() {
    let out = cakecut(&["solve", "9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cakecut(&["bounds", "9", "8", "7"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cakecut(&["solve", "0", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cakecut(&["solve", "-3", "8"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tree_dot_output() {
    let out = cakecut(&["tree", "1", "1", "--format", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("(1,1) cut 1/2"), "{text}");
    assert!(text.contains("n0 -> n1 [label=\"take\"]"), "{text}");
}

#[test]
fn tree_optimal_matches_solve() {
    let out = cakecut(&["tree", "9", "8", "--method", "optimal"]);
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["cutoff"], "5/17");
}

#[test]
fn levels_roundtrip_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("levels.jsonl");
    let out = cakecut(&["levels", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("total 20 ratios"), "{}", stdout(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 20);
    assert!(text.lines().next().unwrap().contains("\"key\":[\"0\",\"1\"]"));

    // starved budget: exit 2, file untouched
    let out = cakecut(&[
        "levels",
        "4",
        "--out",
        path.to_str().unwrap(),
        "--max-nodes",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn construct_base_case() {
    let out = cakecut(&["construct", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("(1,1) sum 2"), "{}", stdout(&out));
    let out = cakecut(&["construct", "5"]);
    assert!(stdout(&out).contains("(8463,57073) sum 65536"), "{}", stdout(&out));
}

fn write_tree(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tree.json");
    let out = cakecut(&[
        "tree",
        "9",
        "8",
        "--method",
        "near-half",
    ]);
    std::fs::write(&path, stdout(&out)).unwrap();
    path
}

#[test]
fn simulate_fuzz_passes() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write_tree(dir.path());
    let out = cakecut(&[
        "simulate",
        "--tree",
        tree.to_str().unwrap(),
        "--fuzz",
        "200",
        "--seed",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("fuzz: 200/200 runs satisfied the guarantee"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn simulate_explicit_measures() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write_tree(dir.path());
    let va = dir.path().join("va.json");
    let vb = dir.path().join("vb.json");
    std::fs::write(&va, r#"{"breakpoints":["0","1"],"densities":["1"]}"#).unwrap();
    std::fs::write(
        &vb,
        r#"{"breakpoints":["0/1","1/2","1/1"],"densities":["0/1","2/1"]}"#,
    )
    .unwrap();
    let out = cakecut(&[
        "simulate",
        "--tree",
        tree.to_str().unwrap(),
        "--va",
        va.to_str().unwrap(),
        "--vb",
        vb.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("guarantee: PASS"), "{text}");
    assert!(text.contains("\"alice_due\": \"9/17\""), "{text}");
}

#[test]
fn simulate_detects_guarantee_violation() {
    // passes canonical-key validation (keys are orientation-free) but the
    // keep leaf hands Bob's remainder to Alice: Bob ends up below 2/3
    let adversarial = r#"{
        "ratio": ["1", "2"], "kind": "cut", "cutter": "A", "cutoff": "1/3",
        "take": {
            "ratio": ["1", "1"], "kind": "cut", "cutter": "A", "cutoff": "1/2",
            "take": {"ratio": ["1", "0"], "kind": "leaf", "winner": "A"},
            "keep": {"ratio": ["0", "1"], "kind": "leaf", "winner": "B"}
        },
        "keep": {"ratio": ["1", "0"], "kind": "leaf", "winner": "A"}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, adversarial).unwrap();
    let out = cakecut(&[
        "simulate",
        "--tree",
        path.to_str().unwrap(),
        "--fuzz",
        "20",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(stdout(&out).contains("violated"), "{}", stdout(&out));
}

#[test]
fn simulate_rejects_invalid_tree() {
    let invalid = r#"{
        "ratio": ["1", "8"], "kind": "cut", "cutter": "A", "cutoff": "4/9",
        "take": {"ratio": ["1", "4"], "kind": "cut", "cutter": "A", "cutoff": "2/5",
                 "take": {"ratio": ["1", "2"], "kind": "cut", "cutter": "A", "cutoff": "1/3",
                          "take": {"ratio": ["1", "1"], "kind": "cut", "cutter": "A", "cutoff": "1/2",
                                   "take": {"ratio": ["1","0"], "kind": "leaf", "winner": "A"},
                                   "keep": {"ratio": ["0","1"], "kind": "leaf", "winner": "B"}},
                          "keep": {"ratio": ["0","1"], "kind": "leaf", "winner": "B"}},
                 "keep": {"ratio": ["1","1"], "kind": "cut", "cutter": "A", "cutoff": "1/2",
                          "take": {"ratio": ["1","0"], "kind": "leaf", "winner": "A"},
                          "keep": {"ratio": ["0","1"], "kind": "leaf", "winner": "B"}}},
        "keep": {"ratio": ["1", "5"], "kind": "leaf", "winner": "B"}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("invalid.json");
    std::fs::write(&path, invalid).unwrap();
    let out = cakecut(&["simulate", "--tree", path.to_str().unwrap(), "--fuzz", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("failed validation"), "{err}");
}

#[test]
fn deterministic_outputs() {
    let first = cakecut(&["bounds", "9", "8", "1", "5"]);
    let second = cakecut(&["bounds", "9", "8", "1", "5"]);
    assert_eq!(first.stdout, second.stdout);

    let first = cakecut(&["tree", "7", "5", "--format", "dot"]);
    let second = cakecut(&["tree", "7", "5", "--format", "dot"]);
    assert_eq!(first.stdout, second.stdout);
}
