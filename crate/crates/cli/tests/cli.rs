use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn slicesync(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicesync"))
        .current_dir(dir)
        .args(args)
        .env_remove("SLICESYNC_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = slicesync(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn publish_running_example(dir: &Path) {
    let hour = dir.join("changesets/2015/02/06/17");
    fs::create_dir_all(&hour).unwrap();
    for side in ["removed", "added"] {
        let name = format!("000001.{side}.nt");
        fs::copy(fixtures().join("running_example").join(&name), hour.join(&name)).unwrap();
    }
}

#[test]
fn golden_fixture_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-config"]);
    publish_running_example(d);
    let interest = fixtures().join("running_example/interest.rq");
    assert_eq!(ok(d, &["register", interest.to_str().unwrap(), "--id", "athletes"]), "athletes\n");
    let dump = fixtures().join("running_example/target_t0.nt");
    ok(d, &["init-slice", "athletes", dump.to_str().unwrap(), "--key", "2015-02-06-17-000000"]);

    let report = ok(d, &["run", "--once"]);
    let fields: Vec<&str> = report.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 7, "{report}");
    assert_eq!(&fields[..6], ["athletes", "2015-02-06-17-000001", "5", "5", "0", "3"]);
    assert!(fields[6].parse::<u64>().is_ok());

    let snapshot = |name: &str| {
        let mut v: Vec<String> = fs::read_to_string(name).unwrap().lines().map(str::to_string).collect();
        v.sort();
        v
    };
    let fixture = |name: &str| fixtures().join("running_example").join(name).to_string_lossy().into_owned();
    assert_eq!(snapshot(d.join("stores/target/athletes.nt").to_str().unwrap()), snapshot(&fixture("expected_target_t1.nt")));
    assert_eq!(snapshot(d.join("stores/pi/athletes.nt").to_str().unwrap()), snapshot(&fixture("expected_pi_t1.nt")));
    assert_eq!(ok(d, &["run", "--once"]), "");

    let stats = ok(d, &["stats"]);
    let rows: Vec<&str> = stats.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("interest\tchangesets"));
    assert_eq!(rows[1], "athletes\t1\t4\t5\t7\t5\t0\t3\t5\t3\t".to_string() + rows[1].rsplit('\t').next().unwrap());

    let cfg = ok(d, &["config"]);
    assert!(cfg.contains("[source]") && cfg.contains("[stores]"));
}

#[test]
fn register_rejects_disjoint_and_duplicate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-config"]);
    let football = fixtures().join("interests/football.rq");
    assert_eq!(ok(d, &["register", football.to_str().unwrap()]), "football\n");
    let again = slicesync(d, &["register", football.to_str().unwrap()]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("already registered"));

    fs::write(d.join("bad.rq"), "SELECT * WHERE { ?a <http://x/p> ?b . ?c <http://x/q> ?d }").unwrap();
    let bad = slicesync(d, &["register", "bad.rq"]);
    assert!(!bad.status.success());
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("?a") && err.contains("?c"), "{err}");
    assert!(stdout(&bad).is_empty());
}

#[test]
fn init_slice_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-config"]);
    ok(d, &["register", fixtures().join("running_example/interest.rq").to_str().unwrap(), "--id", "a"]);
    fs::write(d.join("empty.nt"), "").unwrap();
    ok(d, &["init-slice", "a", "empty.nt"]);
    assert!(!slicesync(d, &["init-slice", "a", "missing.nt"]).status.success());
    assert!(!slicesync(d, &["init-slice", "a", "empty.nt", "--key", "yesterday"]).status.success());
}

#[test]
fn fresh_install_and_empty_tree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-config"]);
    fs::create_dir_all(d.join("changesets")).unwrap();
    assert_eq!(ok(d, &["run", "--once"]), "");
    ok(d, &["register", fixtures().join("interests/location.rq").to_str().unwrap(), "--id", "b"]);
    ok(d, &["register", fixtures().join("interests/football.rq").to_str().unwrap(), "--id", "a"]);
    let stats = ok(d, &["stats"]);
    let ids: Vec<&str> = stats.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids, ["a", "b"]);
    assert!(stats.lines().nth(1).unwrap().starts_with("a\t0\t0\t0\t0\t0\t0\t0\t0\t0\t"));
}

#[test]
fn run_needs_a_mode_and_a_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!slicesync(dir.path(), &["run"]).status.success());
    let o = slicesync(dir.path(), &["run", "--once"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("slicesync.toml"));
}

#[test]
fn env_overrides_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init-config"]);
    let o = Command::new(env!("CARGO_BIN_EXE_slicesync"))
        .current_dir(d)
        .arg("config")
        .env("SLICESYNC_SOURCE_POLL_INTERVAL_SECONDS", "42")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("poll_interval_seconds = 42"));
}
