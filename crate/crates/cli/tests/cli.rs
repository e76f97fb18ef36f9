use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_solve_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    let o = zap(&[
        "gen",
        "--out",
        path(&dir),
        "-n",
        "30",
        "-m",
        "15",
        "-s",
        "2",
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["A.csv", "y.csv", "truth.csv", "meta"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(dir.join("A.csv"))
        .unwrap()
        .starts_with("# rows=15 cols=30\n"));

    let o = zap(&["solve", path(&dir), "--gamma", "1e-3", "--max-iters", "3000"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("deviation="));
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("iter,l1_norm,residual,deviation\n"));
    let x_hat = fs::read_to_string(dir.join("x_hat.csv")).unwrap();
    assert_eq!(x_hat.lines().count(), 30);
}

#[test]
fn compressible_gen() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("c");
    let o = zap(&[
        "gen",
        "--out",
        path(&dir),
        "-n",
        "20",
        "-m",
        "10",
        "--p",
        "0.5",
        "--r",
        "1",
        "--snr-db",
        "30",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let meta = fs::read_to_string(dir.join("meta")).unwrap();
    assert!(meta.contains("p=") && meta.contains("R=") && meta.contains("snr_db="));
}

#[test]
fn analyze_and_oracle_on_small_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    assert!(zap(&[
        "gen",
        "--out",
        path(&dir),
        "-n",
        "8",
        "-m",
        "6",
        "-s",
        "1",
        "--seed",
        "4"
    ])
    .status
    .success());
    let o = zap(&["analyze", path(&dir)]);
    assert!(o.status.success());
    let out = stdout(&o);
    for key in [
        "coherence=",
        "t=",
        "t_mode=exact",
        "max_mode=exact",
        "K=",
        "d=",
        "lambda=",
        "C=",
        "M0=",
    ] {
        assert!(out.contains(key), "{key} missing in\n{out}");
    }
    let o = zap(&["oracle", path(&dir)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("p1_unique="));
}

#[test]
fn bench_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |sub: &str, workers: &str| {
        let out = tmp.path().join(sub);
        let o = zap(&[
            "bench",
            "phase_m",
            "--seed",
            "9",
            "-n",
            "30",
            "-m",
            "10,20",
            "-s",
            "2",
            "--trials",
            "3",
            "--max-iters",
            "400",
            "--solvers",
            "zap_l1,omp",
            "--workers",
            workers,
            "--out",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("phase_m.svg").exists());
        assert!(out.join("phase_m.provenance").exists());
        fs::read_to_string(out.join("phase_m.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
}

#[test]
fn bench_reads_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg");
    fs::write(&cfg, "N=20\nM=10\nS=1\ntrials=2\nmax_iters=100\n").unwrap();
    let out = tmp.path().join("o");
    let o = zap(&[
        "bench",
        "solve_one",
        "--seed",
        "1",
        "--config",
        path(&cfg),
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let prov = fs::read_to_string(out.join("solve_one.provenance")).unwrap();
    assert!(prov.contains("N=20") && prov.contains("seed=1"));
}

#[test]
fn exit_codes() {
    // Missing --seed is a usage error.
    assert_eq!(zap(&["bench", "phase_m"]).status.code(), Some(2));
    assert_eq!(
        zap(&["bench", "phase_m", "--seed", "1", "--trials", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(zap(&["bench", "nope", "--seed", "1"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("A.csv"), "# rows=2 cols=3\n1,2,3\n2,4,6\n").unwrap();
    fs::write(dir.join("y.csv"), "1\n2\n").unwrap();
    let o = zap(&["solve", path(dir)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank deficient"));

    fs::write(dir.join("A.csv"), "# rows=2 cols=3\n1,2\n").unwrap();
    assert_eq!(zap(&["solve", path(dir)]).status.code(), Some(2));
}
