use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_satisfice");

const SCALAR_SAFE: &str = r#"
name = "scalar_safe"
n = 1
m = 1
f = ["-x1"]
g = [["1"]]
d_max = [0.0]
q = "x1^2"
r = [[1.0]]
state_region = { lo = [-2.0], hi = [2.0] }
perf_region = { lo = [-1.0], hi = [1.0] }

[safety]
initial_box = { lo = [-0.5], hi = [0.5] }
unsafe = [["x1 - 1.5"]]
"#;

const SCALAR_UNSTABLE: &str = r#"
name = "scalar_unstable"
n = 1
m = 1
f = ["x1"]
g = [["1"]]
d_max = [0.0]
q = "x1^2"
r = [[1.0]]
state_region = { lo = [-2.0], hi = [2.0] }
perf_region = { lo = [-1.0], hi = [1.0] }
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn synthesize_scalar_lq_converges_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["synthesize", "--model", "lq_toy_scalar", "--out", "a"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = read(dir.path().join("a/iterations.csv"));
    let rows = csv.lines().count() - 1;
    assert!((2..=6).contains(&rows), "{csv}");
    let manifest = read(dir.path().join("a/manifest.txt"));
    assert!(manifest.contains("stop = threshold"));
    assert!(manifest.contains("[config]"));
    assert!(manifest.contains(read(dir.path().join("a/config.toml")).trim_end()));
    let ctrl = read(dir.path().join("a/controller.txt"));
    assert!(ctrl.starts_with("nvars = 1\nu1 = "));
    assert!(ctrl.contains("\nV = "));
    let leftovers = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with(".tmp"))
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(dir.path(), &["synthesize", "--model", "lq_toy_2state", "--seed", "3", "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    for f in ["iterations.csv", "controller.txt"] {
        assert_eq!(read(dir.path().join("a").join(f)), read(dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "model = \"lq_toy_scalar\"\nout = \"from_file\"\n[srpi]\nk_delta = 50.0\n",
    )
    .unwrap();
    let o = run(dir.path(), &["synthesize", "--config", "run.toml", "--kdelta", "25"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let echo = read(dir.path().join("from_file/config.toml"));
    assert!(echo.contains("k_delta = 25.0"), "{echo}");
    std::fs::write(dir.path().join("bad.toml"), "modle = 1\n").unwrap();
    assert_eq!(run(dir.path(), &["synthesize", "--config", "bad.toml"]).status.code(), Some(2));
}

#[test]
fn missing_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["synthesize", "--model", "no_such_model.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("error [config]"));
}

#[test]
fn verify_certifies_and_refuses() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.toml"), SCALAR_SAFE).unwrap();
    std::fs::write(dir.path().join("zero.txt"), "nvars = 1\nu1 = 0\n").unwrap();
    std::fs::write(dir.path().join("push.txt"), "nvars = 1\nu1 = 10*x1 + 5\n").unwrap();
    let o = run(dir.path(), &["verify", "--model", "m.toml", "--controller", "zero.txt"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = text(&o);
    assert!(t.contains("separation certified"), "{t}");
    assert!(t.contains("zeroing condition certified"), "{t}");
    let h = t.lines().find_map(|l| l.strip_prefix("h = ")).unwrap().to_string();
    std::fs::write(dir.path().join("h.txt"), format!("nvars = 1\nh = {h}\n")).unwrap();
    let o = run(dir.path(), &["verify", "--model", "m.toml", "--controller", "push.txt", "--barrier", "h.txt"]);
    assert_eq!(o.status.code(), Some(4), "{}", text(&o));
    assert!(text(&o).contains("violation at x = "));
}

#[test]
fn simulate_reports_divergence_and_cost_bound() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("u.toml"), SCALAR_UNSTABLE).unwrap();
    std::fs::write(dir.path().join("zero.txt"), "nvars = 1\nu1 = 0\n").unwrap();
    let o = run(dir.path(), &["simulate", "--model", "u.toml", "--controller", "zero.txt", "--x0", "0.5", "--out", "s"]);
    assert_eq!(o.status.code(), Some(5), "{}", text(&o));
    assert!(read(dir.path().join("s/summary.txt")).contains("diverged at t="));

    let o = run(dir.path(), &["synthesize", "--model", "lq_toy_scalar", "--out", "lq"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(
        dir.path(),
        &["simulate", "--model", "lq_toy_scalar", "--controller", "lq/controller.txt", "--x0", "-0.8", "--horizon", "15", "--out", "s2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let summary = read(dir.path().join("s2/summary.txt"));
    assert!(summary.contains("cost_bound = pass"), "{summary}");
    let csv = read(dir.path().join("s2/trajectory.csv"));
    assert!(csv.starts_with("t,x1,u1,d1,J,Jbar\n"));
    assert_eq!(csv.lines().count(), 15001 + 1);
}

#[test]
fn compare_identical_controllers_give_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.toml"), SCALAR_SAFE).unwrap();
    std::fs::write(dir.path().join("k.txt"), "nvars = 1\nu1 = -0.5*x1\n").unwrap();
    let o = run(
        dir.path(),
        &["compare", "--model", "m.toml", "--controller", "k.txt", "k.txt", "--samples", "4", "--horizon", "2", "--disturbance", "zero,random", "--out", "c"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let csv = read(dir.path().join("c/compare.csv"));
    let strip = |l: &str| l.split_once(',').unwrap().1.to_string();
    let rows: Vec<String> = csv.lines().skip(1).map(strip).collect();
    assert_eq!(rows.len(), 16);
    assert_eq!(rows[..8], rows[8..]);
    assert!(rows.iter().all(|r| r.contains(",true,")));
    assert_eq!(read(dir.path().join("c/x0.csv")).lines().count(), 4);
    let one = run(dir.path(), &["compare", "--model", "m.toml", "--controller", "k.txt"]);
    assert_eq!(one.status.code(), Some(2));
}

#[test]
fn bad_disturbance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("zero.txt"), "nvars = 1\nu1 = 0\n").unwrap();
    for d in ["wobble", "sinusoid:x", "adversarial"] {
        let o = run(dir.path(), &["simulate", "--model", "lq_toy_scalar", "--controller", "zero.txt", "--x0", "0.1", "--disturbance", d]);
        assert_eq!(o.status.code(), Some(2), "{d}: {}", text(&o));
    }
}
