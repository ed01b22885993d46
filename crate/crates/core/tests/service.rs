use std::fs;
use std::path::{Path, PathBuf};

use slicesync_core::changeset_io::{read_checkpoint, SequenceKey};
use slicesync_core::evaluator::PropagationReport;
use slicesync_core::oracle::{generate_workload, slice, Workload, WorkloadParams};
use slicesync_core::rdf::{parse_ntriples_str, Graph};
use slicesync_core::service::{register, Config, RunHooks, Service, ServiceError};
use slicesync_core::store::parse_update_stream;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/running_example")
}

fn fixture(name: &str) -> Graph {
    parse_ntriples_str(&fs::read_to_string(fixture_dir().join(name)).unwrap()).unwrap()
}

fn write_config(dir: &Path, cfg: &Config) -> PathBuf {
    let path = dir.join("slicesync.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

/// A deployment with the running example published as one changeset.
fn golden_setup(dir: &Path) -> Config {
    let hour = dir.join("changesets/2015/02/06/17");
    fs::create_dir_all(&hour).unwrap();
    fs::copy(fixture_dir().join("000001.removed.nt"), hour.join("000001.removed.nt")).unwrap();
    fs::copy(fixture_dir().join("000001.added.nt"), hour.join("000001.added.nt")).unwrap();
    let mut cfg = Config::under(dir);
    cfg.stores.updates_path = Some("updates".into());
    let path = write_config(dir, &cfg);
    let cfg = Config::load_with_env(&path, []).unwrap();
    let id = register(&cfg, &fixture_dir().join("interest.rq"), Some("athletes")).unwrap();
    assert_eq!(id, "athletes");
    cfg
}

fn run(svc: &mut Service) -> Vec<PropagationReport> {
    let mut reps = Vec::new();
    let summary = svc.run_once(&RunHooks::default(), &mut |r| reps.push(r.clone())).unwrap();
    assert!(summary.failed.is_empty());
    reps
}

#[test]
fn golden_run_through_disk_stores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_setup(dir.path());
    let mut svc = Service::open(cfg.clone()).unwrap();
    let start = SequenceKey::new(2015, 2, 6, 17, 0);
    assert_eq!(svc.init_slice("athletes", &fixture_dir().join("target_t0.nt"), Some(start)).unwrap(), (5, 0));
    let reps = run(&mut svc);
    assert_eq!(reps.len(), 1);
    let r = &reps[0];
    assert_eq!(r.changeset, "2015-02-06-17-000001");
    assert_eq!((r.removed_interesting, r.added_interesting, r.pi_removed, r.pi_added), (5, 5, 0, 3));
    drop(svc);

    let svc = Service::open(cfg.clone()).unwrap();
    let (t, p) = svc.store.snapshot("athletes").unwrap();
    assert_eq!(t, fixture("expected_target_t1.nt"));
    assert_eq!(p, fixture("expected_pi_t1.nt"));
    assert_eq!(read_checkpoint(&cfg.checkpoint_path()).unwrap().get("athletes"), Some(SequenceKey::new(2015, 2, 6, 17, 1)));
    let rows = svc.stats_rows();
    assert_eq!(rows.len(), 1);
    let c = &rows[0].counters;
    assert_eq!((c.changesets, c.total_removed, c.total_added), (1, 4, 7));
    assert_eq!((c.interesting_removed, c.interesting_added, c.pi_removed, c.pi_added), (5, 5, 0, 3));
    assert_eq!((rows[0].target_size, rows[0].pi_size), (5, 3));

    let doc = svc.export_updates("athletes", None).unwrap();
    let body: String = doc.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let replayed = parse_update_stream(&body).unwrap().apply(&fixture("target_t0.nt"));
    assert_eq!(replayed, fixture("expected_target_t1.nt"));
    assert!(svc.export_updates("athletes", Some(SequenceKey::new(2015, 2, 6, 17, 1))).unwrap().is_empty());
}

#[test]
fn rerun_after_completion_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_setup(dir.path());
    let mut svc = Service::open(cfg.clone()).unwrap();
    svc.init_slice("athletes", &fixture_dir().join("target_t0.nt"), None).unwrap();
    assert_eq!(run(&mut svc).len(), 1);
    let before = svc.store.snapshot("athletes").unwrap();
    drop(svc);
    let mut svc = Service::open(cfg).unwrap();
    assert!(run(&mut svc).is_empty());
    assert_eq!(svc.store.snapshot("athletes").unwrap(), before);
}

#[test]
fn empty_tree_and_no_interests() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("changesets")).unwrap();
    let cfg = Config::under(dir.path());
    let mut svc = Service::open(cfg.clone()).unwrap();
    assert!(run(&mut svc).is_empty());
    assert!(svc.stats_rows().is_empty());
    register(&cfg, &fixture_dir().join("interest.rq"), Some("a")).unwrap();
    let mut svc = Service::open(cfg).unwrap();
    assert!(run(&mut svc).is_empty());
    assert_eq!(svc.stats_rows()[0].counters, Default::default());
}

#[test]
fn registration_rules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::under(dir.path());
    let football = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/interests/football.rq");
    let id = register(&cfg, &football, None).unwrap();
    assert!(matches!(register(&cfg, &football, None), Err(ServiceError::Duplicate(d)) if d == id));
    let disjoint = dir.path().join("disjoint.rq");
    fs::write(&disjoint, "SELECT * WHERE { ?a <http://x/p> ?b . ?c <http://x/q> ?d }").unwrap();
    let err = register(&cfg, &disjoint, None).unwrap_err();
    assert!(err.to_string().contains("?a"), "{err}");
    assert!(matches!(register(&cfg, &football, Some("bad id")), Err(ServiceError::InvalidId(_))));
    // The registered copy is used, not the original file.
    let svc = Service::open(cfg.clone()).unwrap();
    assert_eq!(svc.interests.len(), 1);
    assert!(cfg.state_dir().join(format!("interests/{id}.rq")).exists());
}

#[test]
fn unreadable_dump_fails_and_empty_dump_is_fine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden_setup(dir.path());
    let mut svc = Service::open(cfg).unwrap();
    assert!(svc.init_slice("athletes", &dir.path().join("missing.nt"), None).is_err());
    let empty = dir.path().join("empty.nt");
    fs::write(&empty, "").unwrap();
    assert_eq!(svc.init_slice("athletes", &empty, None).unwrap(), (0, 0));
    assert!(matches!(svc.init_slice("nobody", &empty, None), Err(ServiceError::UnknownInterest(_))));
}

/// Exports a workload, registers its interests and initializes from the dump.
fn workload_setup(dir: &Path, w: &Workload) -> Config {
    w.export(dir, true).unwrap();
    let cfg = Config::under(dir);
    for i in &w.interests {
        register(&cfg, &dir.join(format!("{}.rq", i.id)), Some(&i.id)).unwrap();
    }
    let mut svc = Service::open(cfg.clone()).unwrap();
    for i in &w.interests {
        svc.init_slice(&i.id, &dir.join("dump.nt"), None).unwrap();
    }
    cfg
}

fn final_stores(cfg: &Config, w: &Workload) -> Vec<(Graph, Graph)> {
    let svc = Service::open(cfg.clone()).unwrap();
    w.interests.iter().map(|i| svc.store.snapshot(&i.id).unwrap()).collect()
}

#[test]
fn crash_between_commit_and_checkpoint_converges() {
    let params = WorkloadParams { changesets: 8, max_changeset_triples: 40, ..Default::default() };
    for seed in 0..6 {
        let w = generate_workload(seed, &params);
        let clean_dir = tempfile::tempdir().unwrap();
        let clean = workload_setup(clean_dir.path(), &w);
        run(&mut Service::open(clean.clone()).unwrap());
        let expected = final_stores(&clean, &w);

        let crash_dir = tempfile::tempdir().unwrap();
        let crashed = workload_setup(crash_dir.path(), &w);
        let total = w.changesets.len() * w.interests.len();
        let mut at = 1 + (seed as usize * 5) % total;
        loop {
            let mut svc = Service::open(crashed.clone()).unwrap();
            match svc.run_once(&RunHooks { crash_after_commits: Some(at) }, &mut |_| {}) {
                Err(ServiceError::InjectedCrash(_)) => at = 1 + at % 3,
                Ok(_) => break,
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(final_stores(&crashed, &w), expected, "seed {seed}");
        let mirror = w.mirror();
        for (i, (t, _)) in w.interests.iter().zip(&expected) {
            assert_eq!(t, &slice(i, &mirror), "seed {seed}");
        }
    }
}

#[test]
fn eviction_knob_bounds_parked_set() {
    let params = WorkloadParams { changesets: 12, ..Default::default() };
    let w = generate_workload(9, &params);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = workload_setup(dir.path(), &w);
    cfg.evaluation.pi_max_age_changesets = 2;
    let mut svc = Service::open(cfg.clone()).unwrap();
    run(&mut svc);
    let evicting: usize = w.interests.iter().map(|i| svc.store.sizes(&i.id).unwrap().1).sum();

    let dir2 = tempfile::tempdir().unwrap();
    let cfg2 = workload_setup(dir2.path(), &w);
    let mut svc2 = Service::open(cfg2).unwrap();
    run(&mut svc2);
    let exact: usize = w.interests.iter().map(|i| svc2.store.sizes(&i.id).unwrap().1).sum();
    assert!(evicting < exact, "{evicting} vs {exact}");
}

#[test]
fn cleanup_removes_processed_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = golden_setup(dir.path());
    cfg.source.cleanup = true;
    let mut svc = Service::open(cfg).unwrap();
    svc.init_slice("athletes", &fixture_dir().join("target_t0.nt"), None).unwrap();
    assert_eq!(run(&mut svc).len(), 1);
    assert!(!dir.path().join("changesets/2015/02/06/17/000001.added.nt").exists());
}
