//! Runs the `romkit` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use romkit::DenseMatrix;
use romkit_cli::formats::{read_matrix, write_matrix, CSV_HEADER};

fn romkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_romkit"))
        .args(args)
        .output()
        .expect("spawn romkit")
}

fn ok(args: &[&str]) -> String {
    let out = romkit(args);
    assert!(
        out.status.success(),
        "romkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("romkit-cli-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&p);
        fs::create_dir_all(&p).unwrap();
        Self(p)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_str().unwrap().to_owned()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.0);
    }
}

#[test]
fn one_step_writes_two_snapshot_columns() {
    let d = TempDir::new("one-step");
    ok(&[
        "fom",
        "--num-cells",
        "64",
        "--stepper",
        "rk4",
        "--num-steps",
        "1",
        "--snapshots",
        &d.path("s.psnap"),
    ]);
    let s = read_matrix(Path::new(&d.path("s.psnap"))).unwrap();
    assert_eq!(s.shape(), (64, 2));
    assert!(s.column(0).iter().all(|&v| v == 1.0));
}

#[test]
fn compare_hand_case() {
    let d = TempDir::new("compare");
    write_matrix(Path::new(&d.path("a")), &DenseMatrix::column_vector(vec![1.0, 1.0])).unwrap();
    write_matrix(Path::new(&d.path("b")), &DenseMatrix::column_vector(vec![1.0, 0.0])).unwrap();
    let out = ok(&["compare", "--fom", &d.path("a"), "--rom", &d.path("b")]);
    let vals: Vec<f64> = out
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((vals[0] - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(vals[1], 1.0);
}

#[test]
fn identity_basis_galerkin_reproduces_fom() {
    let d = TempDir::new("identity");
    let common = ["--num-cells", "48", "--stepper", "rk4", "--num-steps", "40"];
    let f = d.path("f");
    let mut fom = vec!["fom"];
    fom.extend(common);
    fom.extend(["--final-state", &f]);
    ok(&fom);
    let mut rom = vec!["rom", "--method", "galerkin", "--identity-basis"];
    rom.extend(common);
    rom.extend(["--reference", &f]);
    let out = ok(&rom);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "48");
    assert!(row[9].parse::<f64>().unwrap() < 1e-10);
}

#[test]
fn pod_rom_pipeline_and_full_collocation() {
    let d = TempDir::new("pipeline");
    let problem = ["--num-cells", "128", "--stepper", "bdf1", "--num-steps", "60"];
    let mut fom = vec!["fom"];
    fom.extend(problem);
    let (s, f, b) = (d.path("s"), d.path("f"), d.path("b"));
    fom.extend(["--snapshots", &s, "--final-state", &f]);
    ok(&fom);
    ok(&[
        "pod",
        "--snapshots",
        &s,
        "--rom-size",
        "8",
        "--complete-null-modes",
        "--basis",
        &b,
        "--singular-values",
        &d.path("sv.txt"),
    ]);
    assert_eq!(read_matrix(Path::new(&b)).unwrap().shape(), (128, 8));
    assert!(fs::read_to_string(d.path("sv.txt"))
        .unwrap()
        .starts_with("# numerical_rank"));
    let run = |w: &str| {
        let mut rom = vec![
            "rom",
            "--method",
            "lspg",
            "--rom-size",
            "8",
            "--basis",
            &b,
            "--reference",
            &f,
            "--weighting",
            w,
        ];
        rom.extend(problem);
        let out = ok(&rom);
        out.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(9)
            .unwrap()
            .parse::<f64>()
            .unwrap()
    };
    let plain = run("identity");
    let full = run("collocation:1");
    assert!(plain < 1e-3);
    assert!((plain - full).abs() <= 1e-12 * plain.max(1e-300) + 1e-15);
}

#[test]
fn strict_pod_reports_insufficient_rank() {
    let d = TempDir::new("rank");
    let s = DenseMatrix::from_fn(10, 4, |_, _| 1.0);
    write_matrix(Path::new(&d.path("s")), &s).unwrap();
    let out = romkit(&[
        "pod",
        "--snapshots",
        &d.path("s"),
        "--rom-size",
        "1",
        "--basis",
        &d.path("b"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank"));
}

#[test]
fn exit_codes_by_category() {
    // Configuration errors.
    let out = romkit(&[
        "rom",
        "--method",
        "galerkin",
        "--stepper",
        "bdf2",
        "--rom-size",
        "3",
        "--random-basis",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Galerkin"));
    // Unparseable flags.
    assert_eq!(romkit(&["fom", "--num-cells", "many"]).status.code(), Some(2));
    // Missing files.
    assert_eq!(
        romkit(&["compare", "--fom", "/nonexistent/a", "--rom", "/nonexistent/b"])
            .status
            .code(),
        Some(3)
    );
    // Corrupt files.
    let d = TempDir::new("corrupt");
    fs::write(d.path("bad"), b"not a matrix").unwrap();
    assert_eq!(
        romkit(&["compare", "--fom", &d.path("bad"), "--rom", &d.path("bad")])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bench_with_one_replica_reports_a_row() {
    let out = ok(&[
        "bench",
        "--method",
        "lspg",
        "--stepper",
        "bdf1",
        "--num-cells",
        "256",
        "--num-steps",
        "5",
        "--rom-size",
        "8",
        "--random-basis",
        "--weighting",
        "collocation:#30",
        "--replicas",
        "1",
    ]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[3], "collocation:#30");
    assert_eq!(row[4], "30");
    assert_eq!(row[5], "5");
    let total: f64 = row[7].parse().unwrap();
    let per: f64 = row[8].parse().unwrap();
    assert!((per * 5.0 - total).abs() <= 1e-9 * total);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let d = TempDir::new("determinism");
    let run = |tag: &str| {
        let (t, s) = (d.path(&format!("t{tag}")), d.path(&format!("i{tag}")));
        ok(&[
            "rom",
            "--method",
            "lspg",
            "--stepper",
            "bdf2",
            "--num-cells",
            "256",
            "--num-steps",
            "30",
            "--rom-size",
            "6",
            "--random-basis",
            "--seed",
            "42",
            "--sample-fraction",
            "0.3",
            "--trajectory",
            &t,
            "--sample-indices",
            &s,
        ]);
        (fs::read(t).unwrap(), fs::read_to_string(s).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert!(a.1.lines().count() >= 77);
}
