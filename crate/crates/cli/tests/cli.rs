use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn whyprov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whyprov"))
        .args(args)
        .env_remove("WHYPROV_SAT_SOLVER")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn explain(facts: &str, goal: &str, extra: &[&str]) -> Output {
    let (p, f) = (data("access.dl"), data(facts));
    let mut args = vec!["explain", "-p", &p, "-f", &f, "-g", goal];
    args.extend_from_slice(extra);
    whyprov(&args)
}

#[test]
fn eval_prints_answers() {
    let o = whyprov(&["eval", "-p", &data("access.dl"), "-f", &data("example22.facts"), "-q", "A"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "A(a)\nA(b)\nA(c)\nA(d)\n");
    let o = whyprov(&["eval", "-p", &data("access.dl"), "-f", &data("empty.facts"), "-q", "A"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "");
}

#[test]
fn eval_json() {
    let o = whyprov(&["eval", "-p", &data("access.dl"), "-f", &data("example22.facts"), "-q", "A", "--output", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["answers"].as_array().unwrap().len(), 4);
}

#[test]
fn malformed_input_exits_2() {
    let o = whyprov(&["eval", "-p", &data("broken.dl"), "-f", &data("empty.facts"), "-q", "A"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    let o = whyprov(&["eval", "-p", &data("access.dl"), "-f", &data("missing.facts"), "-q", "A"]);
    assert_eq!(code(&o), 2);
    let o = whyprov(&["eval", "-p", &data("access.dl"), "-f", &data("example22.facts"), "-q", "S"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn explain_example_5_1() {
    let o = explain("example51.facts", "A(d)", &[]);
    assert_eq!(code(&o), 0);
    let lines: BTreeSet<String> = stdout(&o).lines().map(str::to_owned).collect();
    let expected: BTreeSet<String> = ["S(a);T(a,a,c);T(c,c,d)", "S(b);T(b,b,c);T(c,c,d)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(lines, expected);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2 members") && err.contains("Exhausted"), "{err}");
}

#[test]
fn explain_limit_and_json() {
    let o = explain("example51.facts", "A(d)", &["--limit", "1", "--output", "json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["members"].as_array().unwrap().len(), 1);
    assert_eq!(v["status"], "LimitReached");
    assert!(v["stats"]["clauses"].as_u64().unwrap() > 0);
}

#[test]
fn explain_encodings_agree() {
    let tc = explain("example22.facts", "A(d)", &["--acyclicity", "tc"]);
    let ve = explain("example22.facts", "A(d)", &["--acyclicity", "ve"]);
    assert_eq!(stdout(&tc), "S(a);T(a,a,d)\n");
    assert_eq!(stdout(&tc), stdout(&ve));
}

#[test]
fn explain_non_answer_exits_3() {
    assert_eq!(code(&explain("example22.facts", "A(zzz)", &[])), 3);
    assert_eq!(code(&explain("example22.facts", "A(a,b)", &[])), 2);
}

#[test]
fn explain_writes_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let o = explain("example51.facts", "A(d)", &["--witness-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let dot = std::fs::read_to_string(dir.path().join("member-0.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn explain_members_pass_check() {
    let o = explain("example51.facts", "A(d)", &[]);
    let dir = tempfile::tempdir().unwrap();
    for (i, line) in stdout(&o).lines().enumerate() {
        let path = dir.path().join(format!("m{i}.facts"));
        std::fs::write(&path, line.replace(';', "\n")).unwrap();
        let c = whyprov(&[
            "check",
            "-p",
            &data("access.dl"),
            "-f",
            &data("example51.facts"),
            "-g",
            "A(d)",
            "--subset",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&c), 0);
        assert_eq!(stdout(&c), "MEMBER\n");
    }
}

#[test]
fn check_outcomes() {
    let check = |subset: &str| {
        whyprov(&[
            "check",
            "-p",
            &data("access.dl"),
            "-f",
            &data("example22.facts"),
            "-g",
            "A(d)",
            "--subset",
            &data(subset),
        ])
    };
    let o = check("member.facts");
    assert_eq!((code(&o), stdout(&o).as_str()), (0, "MEMBER\n"));
    let o = check("empty.facts");
    assert_eq!((code(&o), stdout(&o).as_str()), (1, "NOT-MEMBER\n"));
    assert_eq!(code(&check("foreign.facts")), 2);
}

fn export(dir: &std::path::Path, name: &str) -> (Output, PathBuf) {
    let out = dir.join(name);
    let o = whyprov(&[
        "export-dimacs",
        "-p",
        &data("access.dl"),
        "-f",
        &data("example51.facts"),
        "-g",
        "A(d)",
        "-o",
        out.to_str().unwrap(),
        "--closure",
        dir.join(format!("{name}.closure")).to_str().unwrap(),
    ]);
    (o, out)
}

#[test]
fn export_dimacs_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (o, a) = export(dir.path(), "a.cnf");
    assert_eq!(code(&o), 0);
    let (_, b) = export(dir.path(), "b.cnf");
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let header: Vec<usize> = text.lines().next().unwrap()[6..]
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(header[1], text.lines().count() - 1);
    let map = std::fs::read_to_string(dir.path().join("a.cnf.map")).unwrap();
    assert_eq!(map.lines().count(), header[0]);
    let closure = std::fs::read_to_string(dir.path().join("a.cnf.closure")).unwrap();
    assert!(closure.contains("A(d) <- A(c), T(c,c,d)"), "{closure}");
}

#[test]
fn export_non_answer_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = whyprov(&[
        "export-dimacs",
        "-p",
        &data("access.dl"),
        "-f",
        &data("example51.facts"),
        "-g",
        "A(zzz)",
        "-o",
        dir.path().join("x.cnf").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn solve_dimacs_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cnf) = export(dir.path(), "s.cnf");
    let o = whyprov(&["solve-dimacs", cnf.to_str().unwrap()]);
    assert_eq!(code(&o), 10);
    assert!(stdout(&o).starts_with("s SATISFIABLE\n"));
    let unsat = dir.path().join("u.cnf");
    std::fs::write(&unsat, "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    let o = whyprov(&["solve-dimacs", unsat.to_str().unwrap()]);
    assert_eq!(code(&o), 20);
}

#[test]
fn external_solver_matches_internal() {
    let cmd = format!("{} solve-dimacs", env!("CARGO_BIN_EXE_whyprov"));
    let run = |solver: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_whyprov"));
        c.args(["explain", "-p", &data("access.dl"), "-f", &data("example51.facts"), "-g", "A(d)"]);
        match solver {
            Some(s) => c.env("WHYPROV_SAT_SOLVER", s),
            None => c.env_remove("WHYPROV_SAT_SOLVER"),
        };
        let o = c.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).lines().map(str::to_owned).collect::<BTreeSet<_>>()
    };
    let internal = run(None);
    assert_eq!(internal.len(), 2);
    assert_eq!(run(Some(&cmd)), internal);

    let o = Command::new(env!("CARGO_BIN_EXE_whyprov"))
        .args(["sweep", "unwhy", "--instances", "10", "--external"])
        .env("WHYPROV_SAT_SOLVER", &cmd)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["mismatches"].as_array().unwrap().is_empty());
}

#[test]
fn bench_shape_and_determinism() {
    let run = |limit: &str| {
        let o = whyprov(&["bench", "--nodes", "200", "--edges", "600", "-k", "5", "--limit", limit, "--seed", "3"]);
        assert_eq!(code(&o), 0);
        serde_json::from_slice::<Value>(&o.stdout).unwrap()
    };
    let a = run("20");
    let tuples = a["tuples"].as_array().unwrap();
    assert_eq!(tuples.len(), 5);
    assert!(tuples.iter().all(|t| t["members"].as_u64().unwrap() > 0));
    let b = run("0");
    let pick = |v: &Value| -> Vec<Value> { v["tuples"].as_array().unwrap().iter().map(|t| t["tuple"].clone()).collect() };
    assert_eq!(pick(&a), pick(&b));
    assert!(b["tuples"].as_array().unwrap().iter().all(|t| t["members"] == 0 && t["encode_ms"].is_number()));
}

#[test]
fn sweeps_report_clean() {
    let o = whyprov(&["sweep", "unwhy", "--instances", "20", "--profile", "tiny-linear,tiny-nonrecursive"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["instances"], 20);
    let o = whyprov(&["sweep", "reduction", "--formulas", "30"]);
    assert_eq!(code(&o), 0);
}
