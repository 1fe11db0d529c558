use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use facered_cli::{generate, GenerateKind, ProblemFile};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_facered"));
    c.env_remove("FACERED_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const ORTHANT_SEGMENT: &str = "format = facered-problem-1
name = segment
seed = 0
cone = orthant:2
rows = 1
cols = 2
A = dense
1 1
b = 2
";

#[test]
fn generated_files_round_trip_byte_for_byte() {
    let kinds = [
        GenerateKind::Sturm { n: 4 },
        GenerateKind::Designed {
            spec: "psd:3 soc:3 orthant:2".into(),
            depth: 2,
            seed: 7,
        },
        GenerateKind::Dnn { n: 3 },
    ];
    for kind in &kinds {
        let text = generate(kind).unwrap().to_text();
        let again = ProblemFile::parse(&text, false).unwrap().to_text();
        assert_eq!(text, again);
    }
}

#[test]
fn generate_writes_the_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s4.txt");
    let o = run(&["generate", "sturm", "--n", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let file = ProblemFile::parse(&std::fs::read_to_string(&out).unwrap(), false).unwrap();
    assert_eq!(file.a.len(), 3);

    let o = run(&["generate", "dnn", "--n", "2"]);
    let file = ProblemFile::parse(&stdout(&o), false).unwrap();
    assert_eq!(stdout(&o).lines().nth(3).unwrap(), "cone = psd:2 orthant:3");
    // one staircase row plus three identification rows
    assert_eq!(file.a.len(), 4);
    let identification = file
        .a
        .iter()
        .filter(|r| r.iter().filter(|v| **v != 0.0).count() == 2)
        .count();
    assert_eq!(identification, 3);

    let o = run(&["generate", "sturm", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_reports_sturm_and_regular_problems() {
    let dir = tempfile::tempdir().unwrap();
    let sturm = write(dir.path(), "s3.txt", &generate(&GenerateKind::Sturm { n: 3 }).unwrap().to_text());
    let o = run(&["analyze", sturm.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    assert_eq!(value(&r, "certificate.d"), "2");
    assert_eq!(value(&r, "certificate.gamma"), "0.25");
    assert_eq!(value(&r, "chain.face_ranks"), "3 2 1");
    assert_eq!(value(&r, "feasibility"), "feasible");
    assert!(r.contains("[table]"));

    let regular = generate(&GenerateKind::Designed {
        spec: "psd:3".into(),
        depth: 0,
        seed: 1,
    })
    .unwrap();
    let path = write(dir.path(), "d0.txt", &regular.to_text());
    let r = stdout(&run(&["analyze", path.to_str().unwrap(), "--mode", "slater"]));
    assert_eq!(value(&r, "certificate.d"), "0");
    assert_eq!(value(&r, "certificate.gamma"), "1");
}

#[test]
fn analyze_with_eigenvalue_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let sturm = write(dir.path(), "s2.txt", &generate(&GenerateKind::Sturm { n: 2 }).unwrap().to_text());
    let r = stdout(&run(&["analyze", sturm.to_str().unwrap(), "--residual", "eig"]));
    assert_eq!(value(&r, "residual"), "eig");
    let fitted: f64 = value(&r, "residual.eig_constant_fitted").parse().unwrap();
    let bound: f64 = value(&r, "residual.eig_constant_bound").parse().unwrap();
    assert!(fitted > 0.0 && fitted <= bound + 1e-9);
}

#[test]
fn inconsistent_systems_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = "format = facered-problem-1
name = clash
seed = 0
cone = orthant:2
rows = 2
cols = 2
A = dense
1 1
1 1
b = 1 2
";
    let path = write(dir.path(), "bad.txt", text);
    let o = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible affine system"));

    let path = write(dir.path(), "broken.txt", &text.replace("b = 1 2", "b = 1 x"));
    let o = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 10"));
}

#[test]
fn infeasible_problems_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "neg.txt", &ORTHANT_SEGMENT.replace("b = 2", "b = -1"));
    let o = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible problem"));
}

#[test]
fn dist_reports_the_three_distances() {
    let dir = tempfile::tempdir().unwrap();
    let seg = write(dir.path(), "seg.txt", ORTHANT_SEGMENT);
    let pt = write(dir.path(), "pt.txt", "-1 0\n");
    let r = stdout(&run(&["dist", seg.to_str().unwrap(), pt.to_str().unwrap()]));
    let d: f64 = value(&r, "dist_feasible").parse().unwrap();
    assert!((d - 1.5 * 2f64.sqrt()).abs() < 1e-6, "{d}");

    let feasible = write(dir.path(), "f.txt", "1 1\n");
    let r = stdout(&run(&["dist", seg.to_str().unwrap(), feasible.to_str().unwrap()]));
    for key in ["dist_k", "dist_affine", "dist_feasible"] {
        assert!(value(&r, key).parse::<f64>().unwrap().abs() < 1e-9);
    }

    let s2 = write(dir.path(), "s2.txt", &generate(&GenerateKind::Sturm { n: 2 }).unwrap().to_text());
    let identity = write(dir.path(), "eye.txt", "1 0 1\n");
    let r = stdout(&run(&["dist", s2.to_str().unwrap(), identity.to_str().unwrap()]));
    let d: f64 = value(&r, "dist_feasible").parse().unwrap();
    assert!((d - 1.0).abs() < 1e-6);

    let short = write(dir.path(), "short.txt", "1\n");
    let o = run(&["dist", s2.to_str().unwrap(), short.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch"));
}

#[test]
fn raw_points_are_converted() {
    let dir = tempfile::tempdir().unwrap();
    let s2 = write(dir.path(), "s2.txt", &generate(&GenerateKind::Sturm { n: 2 }).unwrap().to_text());
    // natural entries (X11, X21, X22) of diag(0, 1) + offdiag 1
    let pt = write(dir.path(), "p.txt", "0 1 0\n");
    let r = stdout(&run(&["dist", s2.to_str().unwrap(), pt.to_str().unwrap(), "--raw-matrix"]));
    let dk: f64 = value(&r, "dist_k").parse().unwrap();
    // [[0,1],[1,0]] has eigenvalues ±1
    assert!((dk - 1.0).abs() < 1e-9, "{dk}");
}

#[test]
fn verify_validates_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let seg = write(dir.path(), "seg.txt", ORTHANT_SEGMENT);
    let o = run(&["verify", seg.to_str().unwrap(), "--eps-grid", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 4"));
    let o = run(&["verify", seg.to_str().unwrap(), "--eps-grid", "0.1,0.05,0.02,0.01"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_on_a_polyhedral_instance() {
    let dir = tempfile::tempdir().unwrap();
    let seg = write(dir.path(), "seg.txt", ORTHANT_SEGMENT);
    let o = run(&["verify", seg.to_str().unwrap(), "--trials", "16", "--adversarial", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = stdout(&o);
    assert_eq!(value(&r, "violations"), "0");
    let slope: f64 = value(&r, "fit.slope").parse().unwrap();
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
    let table: Vec<&str> = r.lines().skip_while(|l| *l != "[table]").collect();
    assert_eq!(table[1], "eps stream count max_dist mean_dist bound margin");
    assert_eq!(table.len(), 2 + 12);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let seg = write(dir.path(), "seg.txt", &ORTHANT_SEGMENT.replace("seed = 0", "seed = 5"));
    let args = ["verify", seg.to_str().unwrap(), "--trials", "4", "--adversarial", "0"];
    let r = stdout(&bin().args(args).output().unwrap());
    assert_eq!(value(&r, "verify.seed"), "5");
    let r = stdout(&bin().args(args).env("FACERED_SEED", "9").output().unwrap());
    assert_eq!(value(&r, "verify.seed"), "9");
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "11"]);
    let r = stdout(&bin().args(&with_flag).env("FACERED_SEED", "9").output().unwrap());
    assert_eq!(value(&r, "verify.seed"), "11");
    let o = bin().args(args).env("FACERED_SEED", "nope").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let s3 = write(dir.path(), "s3.txt", &generate(&GenerateKind::Sturm { n: 3 }).unwrap().to_text());
    let o = run(&["analyze", s3.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
