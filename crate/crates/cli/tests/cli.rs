use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_acbandit");

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

fn acbandit(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN).args(args).arg(config).arg("--out").arg(out).env_remove("ACBANDIT_RUN__T").output().unwrap()
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const IID: &str = "[env]\nkind = \"iid\"\n[run]\nT = 60\nseed = 11\nzeta = 0.01\n";
const TOY: &str = "[env]\nkind = \"toy_binary\"\n[constraint]\nlambda_mode = \"fixed\"\nlambda = 0.1\n\
                   [run]\nT = 40\nseed = 5\nzeta = 0.01\nclip = false\ntheta_star = [0.747809, 0.747809]\n\
                   [inference]\nbootstrap_b = 20\n";

#[test]
fn run_writes_one_row_per_decision_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IID);
    let out = dir.path().join("out");
    assert_ok(&acbandit(&["run"], &cfg, &out));
    let traj = read(&out.join("trajectory.csv"));
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), "t,s1,s2,s3,a,outcome,pi,theta0,theta1,theta2,theta3,lambda");
    assert_eq!(lines.count(), 60);
    let summary = read(&out.join("summary.csv"));
    assert_eq!(summary.lines().count(), 2);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IID);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_ok(&acbandit(&["run"], &cfg, &a));
    assert_ok(&acbandit(&["run"], &cfg, &b));
    for f in ["trajectory.csv", "summary.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    let c = dir.path().join("c");
    assert_ok(&acbandit(&["run", "--seed", "12"], &cfg, &c));
    assert_ne!(read(&a.join("trajectory.csv")), read(&c.join("trajectory.csv")));
}

#[test]
fn horizon_below_burn_in_is_rejected_by_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nT = 10\nburn_in = 20\n");
    let o = acbandit(&["run"], &cfg, &dir.path().join("out"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.T"));
}

#[test]
fn env_override_reaches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IID);
    let out = dir.path().join("out");
    let o =
        Command::new(BIN).arg("run").arg(&cfg).arg("--out").arg(&out).env("ACBANDIT_RUN__T", "30").output().unwrap();
    assert_ok(&o);
    assert_eq!(read(&out.join("trajectory.csv")).lines().count(), 31);
}

#[test]
fn study_writes_one_row_per_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let out = dir.path().join("out");
    assert_ok(&acbandit(&["study", "--replicates", "2"], &cfg, &out));
    assert_eq!(read(&out.join("study.csv")).lines().count(), 3);
    let agg = read(&out.join("aggregates.csv"));
    assert_eq!(agg.lines().count(), 2);
    assert!(agg.lines().nth(1).unwrap().starts_with("40,2,0,pinned,"));
}

#[test]
fn interrupted_study_resumes_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let full = dir.path().join("full");
    assert_ok(&acbandit(&["study", "--replicates", "6", "--workers", "1"], &cfg, &full));

    // keep the header, two finished replicates and a torn record
    let part = dir.path().join("part");
    fs::create_dir_all(&part).unwrap();
    let cp = read(&full.join("checkpoint.jsonl"));
    let lines: Vec<&str> = cp.lines().collect();
    assert_eq!(lines.len(), 7);
    let torn = &lines[3][..lines[3].len() / 2];
    fs::write(part.join("checkpoint.jsonl"), format!("{}\n{}\n{}\n{torn}", lines[0], lines[1], lines[2])).unwrap();

    let o = acbandit(&["study", "--replicates", "6", "--workers", "2"], &cfg, &part);
    assert_ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 of 6"));
    for f in ["study.csv", "aggregates.csv"] {
        assert_eq!(read(&full.join(f)), read(&part.join(f)), "{f}");
    }
}

#[test]
fn oracle_recovers_the_iid_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), IID);
    let out = dir.path().join("out");
    assert_ok(&acbandit(&["oracle"], &cfg, &out));
    let csv = read(&out.join("oracle.csv"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let lambda: f64 = row[0].parse().unwrap();
    assert!((lambda - 0.046875).abs() <= 1.0 / 256.0, "{lambda}");
}
