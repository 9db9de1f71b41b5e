use std::path::Path;
use std::process::{Command, Output};

use cbsolve::cli::{parse_bench_csv, BENCH_HEADER};
use cbsolve::{flatten, parse_cbx, rel_inf_diff};

fn cbsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbsolve"))
        .args(args)
        .output()
        .expect("running cbsolve")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, kind: &str, n: &str, m: &str, seed: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{kind}-{n}-{m}-{seed}.cbx"));
    let out = cbsolve(&["gen", "--kind", kind, "--n", n, "--m", m, "--seed", seed, "--output", p(&path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_solve_verify_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen(dir.path(), "cbps", "8", "2", "1");
    let solved = dir.path().join("solved.cbx");
    let out = cbsolve(&["solve", "--input", p(&sys), "--output", p(&solved)]);
    assert_eq!(code(&out), 0);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("method=woodbury"));
    assert!(summary.contains("capacitance_order=4"));

    let out = cbsolve(&["verify", "--input", p(&solved)]);
    assert_eq!(code(&out), 0);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("status=pass"), "{report}");
    assert!(report.contains("oracle_rel_diff="));
}

#[test]
fn dense_and_woodbury_agree() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["cbts", "cbps", "tri", "penta"] {
        let sys = gen(dir.path(), kind, "12", "3", "4");
        let mut sols = Vec::new();
        for method in ["woodbury", "dense"] {
            let dest = dir.path().join(format!("{kind}-{method}.cbx"));
            let out = cbsolve(&["solve", "--input", p(&sys), "--output", p(&dest), "--method", method]);
            assert_eq!(code(&out), 0);
            let file = parse_cbx(&std::fs::read_to_string(&dest).unwrap()).unwrap();
            sols.push(flatten(&file.solution.unwrap()));
        }
        assert!(rel_inf_diff(&sols[0], &sols[1]) <= 1e-8, "{kind}");
    }
}

#[test]
fn scalars_change_path_not_answer() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen(dir.path(), "cbps", "10", "2", "9");
    let out = cbsolve(&["solve", "--input", p(&sys), "--alpha", "2", "--beta", "0.5", "--gamma", "3", "--delta", "0.25"]);
    assert_eq!(code(&out), 0);
    let scaled = parse_cbx(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let out = cbsolve(&["solve", "--input", p(&sys)]);
    let unit = parse_cbx(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let (a, b) = (flatten(&scaled.solution.unwrap()), flatten(&unit.solution.unwrap()));
    assert!(rel_inf_diff(&a, &b) <= 1e-8);

    let out = cbsolve(&["solve", "--input", p(&sys), "--alpha", "0"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn corrupted_solution_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let sys = gen(dir.path(), "cbts", "6", "2", "3");
    let solved = dir.path().join("solved.cbx");
    assert_eq!(code(&cbsolve(&["solve", "--input", p(&sys), "--output", p(&solved)])), 0);

    let text = std::fs::read_to_string(&solved).unwrap();
    let (head, sol) = text.split_at(text.find("SOL").unwrap());
    let mut tokens: Vec<String> = sol.split_whitespace().map(str::to_string).collect();
    tokens[3] = "7.5".to_string();
    let bad = dir.path().join("bad.cbx");
    std::fs::write(&bad, format!("{head}{}\n", tokens.join(" "))).unwrap();

    let out = cbsolve(&["verify", "--input", p(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8(out.stdout).unwrap().contains("status=fail"));
}

#[test]
fn usage_and_format_errors() {
    assert_eq!(code(&cbsolve(&["solve", "--bogus"])), 64);
    assert_eq!(code(&cbsolve(&[])), 64);
    assert_eq!(code(&cbsolve(&["gen", "--kind", "hexa", "--n", "5", "--m", "1", "--seed", "0", "--output", "x"])), 64);
    assert_eq!(code(&cbsolve(&["--help"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cbx");
    std::fs::write(&bad, "CBX2 cbts 3 1\n").unwrap();
    let out = cbsolve(&["solve", "--input", p(&bad)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8(out.stderr).unwrap().contains("token 1"));

    std::fs::write(&bad, "CBX1 cbts 3 1  1 4 1  1 nan 1  1 4 1\nRHS 1 1 1\n").unwrap();
    assert_eq!(code(&cbsolve(&["solve", "--input", p(&bad)])), 1);
    assert_eq!(code(&cbsolve(&["verify", "--input", p(&dir.path().join("missing.cbx"))])), 1);

    // gen output has no SOL section
    let sys = gen(dir.path(), "cbts", "5", "1", "0");
    assert_eq!(code(&cbsolve(&["verify", "--input", p(&sys)])), 1);
}

#[test]
fn singular_systems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("singular.cbx");
    std::fs::write(&path, "CBX1 cbts 3 1\n0 0 0\n0 1 0\n0 1 0\nRHS 1 1 1\n").unwrap();
    let out = cbsolve(&["solve", "--input", p(&path)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error:"), "{err}");
    assert_eq!(code(&cbsolve(&["solve", "--input", p(&path), "--method", "dense"])), 2);
}

#[test]
fn output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = gen(a.path(), "cbps", "9", "3", "42");
    let fb = gen(b.path(), "cbps", "9", "3", "42");
    assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap());
    let sa = cbsolve(&["solve", "--input", p(&fa)]).stdout;
    let sb = cbsolve(&["solve", "--input", p(&fb)]).stdout;
    assert_eq!(sa, sb);
}

#[test]
fn bench_reports_linear_counts() {
    let out = cbsolve(&["bench", "--kind", "cbps", "--m", "2", "--n-list", "10,20,40", "--repeat", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(BENCH_HEADER));
    let rows = parse_bench_csv(&text).unwrap();
    let wood: Vec<_> = rows.iter().filter(|r| r.2 == "woodbury").collect();
    assert_eq!(wood.len(), 3);
    let c = wood[0].4 as f64 / 10.0;
    for r in &wood {
        assert!(r.4 as f64 <= 1.2 * c * r.0 as f64);
    }
    assert!(rows.iter().any(|r| r.2 == "dense" && r.0 == 40));
}
