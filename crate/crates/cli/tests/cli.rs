use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn expressive(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expressive")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn metric(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(&format!("# {key} = "))).unwrap();
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

fn write_target(dir: &Path) -> String {
    let path = dir.join("target.txt");
    fs::write(&path, "4 3\n0110 0.5\n1001 0.3\n1111 0.2\n").unwrap();
    path.display().to_string()
}

#[test]
fn miracle_reports_every_size() {
    let o = expressive(&["miracle", "--n", "4,64"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("n = 4:") && s.contains("n = 64:"), "{s}");
    assert!(s.contains("parents encode all zeros: true"));
}

#[test]
fn construct_then_verify_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let target = write_target(dir.path());
    let out = dir.path().join("gp");
    let o = expressive(&[
        "construct", "--kind", "gp-crossover", "--target", &target, "--epsilon", "0.05",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("report.txt").exists());
    let (p1, p2) = (out.join("parent1.gp"), out.join("parent2.gp"));
    let v = expressive(&[
        "verify", "--parents", p1.to_str().unwrap(), p2.to_str().unwrap(), "--target", &target,
    ]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    assert!(metric(&stdout(&v), "max_pointwise_error") <= 0.05);
}

#[test]
fn construct_then_verify_network_mutation_by_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let target = write_target(dir.path());
    let out = dir.path().join("nn");
    let o = expressive(&[
        "construct", "--kind", "nn-mutation", "--target", &target, "--epsilon", "0.1",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = out.join("parent.nn");
    let v = expressive(&[
        "verify", "--parents", p.to_str().unwrap(), "--samples", "50000", "--seed", "4", "--target", &target,
    ]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    // sampling noise on top of the certified 0.1
    assert!(metric(&stdout(&v), "max_pointwise_error") <= 0.12);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(
        &cfg,
        "name = small\nproblem = match\nn = 12\nencoding = direct,gp-switch\nlambda = 1\nL = 8\n\
         max_generations = 3000\ntrials = 3\n",
    )
    .unwrap();
    let out = dir.path().join("res");
    let o = expressive(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.txt", "summary.txt", "direct/aggregate.csv", "direct/trial_0002.csv", "gp-switch/aggregate.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("converged = 3/3"));
}

#[test]
fn sweep_over_config_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "name = s\nproblem = match\nn = 8\nencoding = direct\nlambda = 1\nmax_generations = 500\n").unwrap();
    let out = dir.path().join("res");
    let o = expressive(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--n", "4,8", "--lambda", "1,2", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(out.join("n8_lambda2_L1").is_dir());
}

#[test]
fn sweep_over_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let target = write_target(dir.path());
    let o = expressive(&["sweep", "--construct", "gp-mutation", "--target", &target, "--epsilon", "0.2,0.1,0.05"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "name = b\nproblem = match\nn = 8\nencoding = direct\nlambda = 0\nmax_generations = 5\n").unwrap();
    let o = expressive(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));

    let missing = dir.path().join("nope.txt");
    let o = expressive(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad_dist.txt");
    fs::write(&bad, "4 2\n0110 0.5\n1001 0.6\n").unwrap();
    let o = expressive(&["construct", "--kind", "gp-mutation", "--target", bad.to_str().unwrap(), "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}
