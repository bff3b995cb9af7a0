use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gadget-forge"));
    c.env_remove("GADGET_FORGE_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let seeds = [
        ("sat.cnf", "p cnf 2 1\n1 2 0\n"),
        ("unsat.cnf", "p cnf 1 2\n1 0\n-1 0\n"),
        ("oit.cnf", "p cnf 3 1\n1 2 3 0\n"),
        ("oit_unsat.cnf", "p cnf 1 1\n1 1 1 0\n"),
        ("bad.cnf", "p cnf 2 1\n1 7 0\n"),
    ];
    for (name, text) in seeds {
        fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn rank4_pipeline_by_hand() {
    let d = setup();
    let p = d.path();
    let o = run(p, &["reduce", "sat-to-3dm", "--in", "sat.cnf", "--out", "tdm.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(p, &["reduce", "3dm-to-lrs4", "--in", "tdm.json", "--eps", "1/8", "--out", "lrs.json"]);
    assert_eq!(code(&o), 0);
    let o = run(p, &["rank", "--in", "lrs.json"]);
    assert_eq!((code(&o), stdout(&o).trim()), (0, "rank=4 bound=4 ok"));
    let o = run(p, &["solve", "--in", "lrs.json", "--decide", "3", "--out", "s.json"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("FEASIBLE makespan="));
    let o = run(p, &["verify", "--in", "lrs.json", "--schedule", "s.json"]);
    assert_eq!(code(&o), 0);
    let last = stdout(&o).lines().last().unwrap().to_string();
    let m = last.strip_prefix("makespan=").unwrap();
    let (num, den) = m.split_once('/').unwrap();
    // strictly below 3
    let (num, den): (u128, u128) = (num.parse().unwrap(), den.parse().unwrap());
    assert!(num < 3 * den);
}

#[test]
fn unsatisfiable_rank4_solve_is_infeasible() {
    let d = setup();
    let p = d.path();
    assert_eq!(code(&run(p, &["reduce", "sat-to-3dm", "--in", "unsat.cnf", "--out", "t.json"])), 0);
    assert_eq!(code(&run(p, &["reduce", "3dm-to-lrs4", "--in", "t.json", "--out", "l.json"])), 0);
    let o = run(p, &["solve", "--in", "l.json", "--decide", "3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().next().unwrap(), "INFEASIBLE threshold=3/1");
}

#[test]
fn certificates_exit_codes_and_worker_independence() {
    let d = setup();
    let p = d.path();
    for (family, seed) in [("rank4", "unsat.cnf"), ("rank4", "sat.cnf"), ("rank3", "oit.cnf"), ("rank3", "oit_unsat.cnf")] {
        let mut outs = Vec::new();
        for w in ["1", "2", "4"] {
            let out = format!("{family}-{seed}-{w}.json");
            let o = run(p, &["certify", "--family", family, "--seed", seed, "--workers", w, "--out", &out]);
            assert_eq!(code(&o), 0, "{family} {seed}: {}", stdout(&o));
            outs.push(fs::read(path(&d, &out)).unwrap());
        }
        // the environment variable stands in for --workers
        let o = bin()
            .current_dir(p)
            .env("GADGET_FORGE_WORKERS", "3")
            .args(["certify", "--family", family, "--seed", seed])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        outs.push(o.stdout);
        assert!(outs.iter().all(|o| o == &outs[0]), "{family} {seed} differs across workers");
        let v: serde_json::Value = serde_json::from_slice(&outs[0]).unwrap();
        assert_eq!(v["verdict"], "certified");
        let expect = if seed.contains("unsat") { "REFUTED" } else { "FEASIBLE" };
        assert_eq!(v["soundness"]["status"], expect);
    }
}

#[test]
fn reductions_are_byte_identical_across_runs() {
    let d = setup();
    let p = d.path();
    for out in ["a.json", "b.json"] {
        assert_eq!(code(&run(p, &["reduce", "oit-to-lrs3", "--in", "oit.cnf", "--out", out])), 0);
    }
    assert_eq!(fs::read(path(&d, "a.json")).unwrap(), fs::read(path(&d, "b.json")).unwrap());
    let o = run(p, &["rank", "--in", "a.json"]);
    assert_eq!(stdout(&o).trim(), "rank=3 bound=3 ok");
}

#[test]
fn operational_failures_exit_2() {
    let d = setup();
    let p = d.path();
    let o = run(p, &["reduce", "sat-to-3dm", "--in", "bad.cnf", "--out", "x.json"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    let o = run(p, &["rank", "--in", "missing.json"]);
    assert_eq!(code(&o), 2);
    fs::write(path(&d, "junk.json"), "{\"d\": 2").unwrap();
    assert_eq!(code(&run(p, &["verify", "--in", "junk.json", "--schedule", "junk.json"])), 2);
    let o = run(p, &["certify", "--family", "rank3", "--seed", "oit_unsat.cnf", "--budget", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("BUDGET_EXCEEDED"));
    assert_eq!(code(&run(p, &["certify", "--family", "rank4", "--seed", "sat.cnf", "--eps", "x"])), 2);
}

#[test]
fn inequalities_command() {
    let d = setup();
    let p = d.path();
    let o = run(p, &["inequalities", "--family", "rank3", "--n", "3", "--m", "4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("total >= 8nr"));
    // N far below n/eps^2: the rank-4 estimates break and the command says so
    let o = run(p, &["inequalities", "--family", "rank4", "--n", "2", "--big-n", "64"]);
    assert_eq!(code(&o), 1);
    let o = run(p, &["inequalities", "--family", "rank4", "--n", "2"]);
    assert_eq!(code(&o), 0);
}
