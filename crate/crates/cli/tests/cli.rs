use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshfree-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("MESHFREE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn solve_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &["solve", "--set", "N=523", "--set", "engine=rbffd", "--set", "m=2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sol = read(dir.path(), "solution.csv");
    let mut lines = sol.lines();
    assert_eq!(lines.next(), Some("x0,x1,u_hat,u_exact,abs_err"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!((470..=575).contains(&rows.len()), "{}", rows.len());
    let e = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    assert!(e < 0.1);
    let runs = read(dir.path(), "runs.csv");
    assert!(runs.starts_with("d,engine,m,k,N_target,N_actual,n,run,seed,e_inf,t_weights_s,t_solve_s,max_cond\n"));
    assert!(read(dir.path(), "nodes.csv").starts_with("dim,h,seed\n"));
}

#[test]
fn single_run_stability_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &["stability", "--set", "N=400", "--set", "N_runs=1", "--set", "m=[2,4]"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "stability.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("d,engine,m,N_target,n,runs_finite,e_min,e_median,e_max,spread")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row.rsplit(',').next(), Some("0.0"), "{row}");
    }
}

#[test]
fn check_weights_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["check-weights", "--set", "N=600"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
}

#[test]
fn outputs_are_byte_identical() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("lab.toml");
    fs::write(
        &cfg,
        "engine = \"both\"\nm = [2]\nN_runs = 2\ntimings = false\n[converge]\nN = [300, 600, 1200]\n",
    )
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = lab(&["converge", "--config", cfg.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("order"));
    }
    for name in ["runs.csv", "stability.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
    assert_eq!(read(a.path(), "runs.csv").lines().count(), 1 + 2 * 3 * 2);
}

#[test]
fn stencil_scan_reports_skipped_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &[
            "stencil-scan",
            "--set",
            "N=300",
            "--set",
            "N_runs=1",
            "--set",
            "m=2",
            "--set",
            "n_list=[5,12]",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("skipped").count(), 2);
    assert_eq!(read(dir.path(), "runs.csv").lines().count(), 3);
}

#[test]
fn bad_configuration_fails_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["converge", "--set", "stencil=4"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`stencil`"));
    let o = lab(&["solve", "--config", "/nonexistent/lab.toml"], dir.path());
    assert!(!o.status.success());
    let o = lab(&["frobnicate"], dir.path());
    assert!(!o.status.success());
}
