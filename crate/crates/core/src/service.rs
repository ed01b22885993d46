//! The propagation service: configuration, interest registry, the
//! scan/evaluate/commit/checkpoint loop, cumulative statistics and published
//! update documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::changeset_io::{
    load_changeset, read_checkpoint, remove_changeset_files, scan_changesets, Checkpoint, CheckpointError, LoadError,
    ScanError, SequenceKey,
};
use crate::evaluator::{propagate, EvalError, PIChangeset, PropagationReport};
use crate::match_engine::{MatchError, MatchLimits, DEFAULT_MAX_PARTIAL_MATCHES};
use crate::pattern::{parse_interest, InterestExpression, ParseError};
use crate::rdf::{parse_ntriples, serialize_ntriples, Graph, NtError, ParseOptions, Triple};
use crate::store::{
    export_update_stream, init_pi, init_slice, valid_id, write_atomically, DiskStore, InterestStore, StoreError,
};

pub const ENV_PREFIX: &str = "SLICESYNC_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub changesets_root: PathBuf,
    #[serde(default = "default_poll")]
    pub poll_interval_seconds: u64,
    /// Delete changeset files once every interest has processed them.
    #[serde(default)]
    pub cleanup: bool,
}

fn default_poll() -> u64 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoresConfig {
    pub target_path: PathBuf,
    pub pi_path: PathBuf,
    pub checkpoint_path: PathBuf,
    /// Where per-changeset update documents are written; none if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub updates_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_max_partial")]
    pub max_partial_matches: usize,
    /// Evict parked triples older than this many processed changesets.
    /// Zero disables eviction. Eviction departs from the exact semantics: a
    /// late completion of an evicted partial match is missed.
    #[serde(default)]
    pub pi_max_age_changesets: u64,
}

fn default_max_partial() -> usize {
    DEFAULT_MAX_PARTIAL_MATCHES
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { max_partial_matches: DEFAULT_MAX_PARTIAL_MATCHES, pi_max_age_changesets: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterestEntry {
    pub id: String,
    pub file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub source: SourceConfig,
    pub stores: StoresConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interest: Vec<InterestEntry>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("environment override {var}: {message}")]
    Override { var: String, message: String },
}

impl Config {
    /// A layout rooted at `dir`: `changesets/`, `stores/target`, `stores/pi`,
    /// `stores/lastPublished`.
    pub fn under(dir: &Path) -> Self {
        Config {
            source: SourceConfig { changesets_root: "changesets".into(), poll_interval_seconds: 10, cleanup: false },
            stores: StoresConfig {
                target_path: "stores/target".into(),
                pi_path: "stores/pi".into(),
                checkpoint_path: "stores/lastPublished".into(),
                updates_path: None,
            },
            evaluation: EvaluationConfig::default(),
            interest: Vec::new(),
            base_dir: dir.to_path_buf(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let invalid = |message: String| ConfigError::Invalid { path: path.to_path_buf(), message };
        let mut cfg: Config = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Reads `path` and applies `SLICESYNC_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg = Self::parse(&text, path)?;
        cfg.with_overrides(env)
    }

    /// Applies `SLICESYNC_<SECTION>_<KEY>=value` overrides. Values take the
    /// type of the key they replace; absent optional keys are set as strings.
    pub fn with_overrides(self, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut overrides: Vec<(String, String)> =
            env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != "SLICESYNC_CONFIG").collect();
        if overrides.is_empty() {
            return Ok(self);
        }
        overrides.sort();
        let base_dir = self.base_dir.clone();
        let mut doc = toml::Value::try_from(&self).expect("config serializes");
        let tables = doc.as_table_mut().expect("config is a table");
        for (var, value) in overrides {
            let err = |message: &str| ConfigError::Override { var: var.clone(), message: message.to_string() };
            let rest = var[ENV_PREFIX.len()..].to_ascii_lowercase();
            let Some((section, key)) = ["source", "stores", "evaluation"]
                .iter()
                .find_map(|s| rest.strip_prefix(s).and_then(|k| k.strip_prefix('_')).map(|k| (*s, k.to_string())))
            else {
                return Err(err("unknown section; expected SOURCE, STORES or EVALUATION"));
            };
            let table = tables
                .entry(section)
                .or_insert_with(|| toml::Value::Table(Default::default()))
                .as_table_mut()
                .expect("sections are tables");
            let parsed = match table.get(&key) {
                Some(toml::Value::Integer(_)) => toml::Value::Integer(value.parse().map_err(|_| err("expected an integer"))?),
                Some(toml::Value::Boolean(_)) => toml::Value::Boolean(value.parse().map_err(|_| err("expected true or false"))?),
                _ => toml::Value::String(value),
            };
            table.insert(key, parsed);
        }
        let mut cfg: Config = doc.try_into().map_err(|e: toml::de::Error| ConfigError::Override {
            var: "SLICESYNC_*".into(),
            message: e.to_string(),
        })?;
        cfg.base_dir = base_dir;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn limits(&self) -> MatchLimits {
        MatchLimits { max_partial_matches: self.evaluation.max_partial_matches }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.resolve(&self.stores.checkpoint_path)
    }

    /// Registry, statistics and registered interest copies live next to the checkpoint.
    pub fn state_dir(&self) -> PathBuf {
        self.checkpoint_path().parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn registry_path(&self) -> PathBuf {
        self.state_dir().join(REGISTRY_FILE)
    }

    pub fn stats_path(&self) -> PathBuf {
        self.state_dir().join(STATS_FILE)
    }
}

pub const REGISTRY_FILE: &str = "registry.toml";
pub const STATS_FILE: &str = "stats.tsv";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    #[serde(default)]
    pub interest: Vec<InterestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("interest file {path}: {source}")]
    Interest { path: PathBuf, source: ParseError },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("interest '{0}' is already registered")]
    Duplicate(String),
    #[error("no interest '{0}' is registered")]
    UnknownInterest(String),
    #[error("invalid interest id '{0}': use letters, digits, '-', '_' or '.'")]
    InvalidId(String),
    #[error("dump {path}: {source}")]
    Dump { path: PathBuf, source: NtError },
    #[error("registry {path} is corrupt: {message}")]
    Registry { path: PathBuf, message: String },
    #[error("stats file {path} is corrupt at line {line}")]
    Stats { path: PathBuf, line: usize },
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("interest '{id}': {source}")]
    Match { id: String, source: MatchError },
    #[error("injected crash after {0} commits")]
    InjectedCrash(usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io { path: path.to_path_buf(), source }
}

fn read_registry(path: &Path) -> Result<Registry, ServiceError> {
    match fs::read_to_string(path) {
        Ok(text) => toml::from_str(&text)
            .map_err(|e| ServiceError::Registry { path: path.to_path_buf(), message: e.to_string() }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Registry::default()),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn load_interest(path: &Path, id: &str) -> Result<InterestExpression, ServiceError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut i = parse_interest(&text).map_err(|source| ServiceError::Interest { path: path.to_path_buf(), source })?;
    i.id = id.to_string();
    Ok(i)
}

/// Config interests plus registered ones, sorted by id.
pub fn interest_entries(cfg: &Config) -> Result<Vec<InterestEntry>, ServiceError> {
    let mut entries: BTreeMap<String, InterestEntry> = BTreeMap::new();
    for e in &cfg.interest {
        let e = InterestEntry { id: e.id.clone(), file: cfg.resolve(&e.file) };
        if entries.insert(e.id.clone(), e.clone()).is_some() {
            return Err(ServiceError::Duplicate(e.id));
        }
    }
    let state = cfg.state_dir();
    for e in read_registry(&cfg.registry_path())?.interest {
        let file = if e.file.is_absolute() { e.file.clone() } else { state.join(&e.file) };
        if entries.insert(e.id.clone(), InterestEntry { id: e.id.clone(), file }).is_some() {
            return Err(ServiceError::Duplicate(e.id));
        }
    }
    Ok(entries.into_values().collect())
}

/// Validates the interest in `file`, records it in the registry under `id`
/// (default: the file's `ID`, else its stem) and creates its empty stores.
pub fn register(cfg: &Config, file: &Path, id: Option<&str>) -> Result<String, ServiceError> {
    let text = fs::read_to_string(file).map_err(io_err(file))?;
    let parsed = parse_interest(&text).map_err(|source| ServiceError::Interest { path: file.to_path_buf(), source })?;
    let id = match id {
        Some(id) => id.to_string(),
        None if parsed.id != crate::pattern::DEFAULT_ID => parsed.id.clone(),
        None => file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    if !valid_id(&id) {
        return Err(ServiceError::InvalidId(id));
    }
    if interest_entries(cfg)?.iter().any(|e| e.id == id) {
        return Err(ServiceError::Duplicate(id));
    }
    let state = cfg.state_dir();
    let copy = PathBuf::from("interests").join(format!("{id}.rq"));
    fs::create_dir_all(state.join("interests")).map_err(io_err(&state))?;
    write_atomically(&state.join(&copy), text.as_bytes()).map_err(io_err(&state.join(&copy)))?;
    let reg_path = cfg.registry_path();
    let mut reg = read_registry(&reg_path)?;
    reg.interest.push(InterestEntry { id: id.clone(), file: copy });
    let doc = toml::to_string(&reg).expect("registry serializes");
    write_atomically(&reg_path, doc.as_bytes()).map_err(io_err(&reg_path))?;
    let mut store = DiskStore::open(cfg.resolve(&cfg.stores.target_path), cfg.resolve(&cfg.stores.pi_path))?;
    store.ensure(&id)?;
    Ok(id)
}

/// Cumulative per-interest counters, in the column layout of `stats`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InterestStats {
    pub changesets: u64,
    pub total_removed: u64,
    pub interesting_removed: u64,
    pub total_added: u64,
    pub interesting_added: u64,
    pub pi_removed: u64,
    pub pi_added: u64,
    pub elapsed_ms: u64,
    pub target_initial: u64,
    pub last_key: Option<SequenceKey>,
}

pub const STATS_HEADER: &str = "interest\tchangesets\ttotal_removed\tinteresting_removed\ttotal_added\tinteresting_added\tpi_removed\tpi_added\telapsed_ms\ttarget_initial\tlast_changeset";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub rows: BTreeMap<String, InterestStats>,
}

impl Stats {
    pub fn read(path: &Path) -> Result<Self, ServiceError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Stats::default()),
            Err(e) => return Err(io_err(path)(e)),
        };
        let mut stats = Stats::default();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let corrupt = || ServiceError::Stats { path: path.to_path_buf(), line: idx + 1 };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 11 {
                return Err(corrupt());
            }
            let n = |k: usize| f[k].parse::<u64>().map_err(|_| corrupt());
            let last_key = match f[10] {
                "-" => None,
                k => Some(k.parse().map_err(|_| corrupt())?),
            };
            stats.rows.insert(
                f[0].to_string(),
                InterestStats {
                    changesets: n(1)?,
                    total_removed: n(2)?,
                    interesting_removed: n(3)?,
                    total_added: n(4)?,
                    interesting_added: n(5)?,
                    pi_removed: n(6)?,
                    pi_added: n(7)?,
                    elapsed_ms: n(8)?,
                    target_initial: n(9)?,
                    last_key,
                },
            );
        }
        Ok(stats)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{STATS_HEADER}\n");
        for (id, s) in &self.rows {
            let key = s.last_key.map_or("-".to_string(), |k| k.to_string());
            writeln!(
                out,
                "{id}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{key}",
                s.changesets,
                s.total_removed,
                s.interesting_removed,
                s.total_added,
                s.interesting_added,
                s.pi_removed,
                s.pi_added,
                s.elapsed_ms,
                s.target_initial
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ServiceError> {
        write_atomically(path, self.render().as_bytes()).map_err(io_err(path))
    }
}

/// One row of `stats`: cumulative counters plus current store sizes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatsRow {
    pub id: String,
    pub counters: InterestStats,
    pub target_size: usize,
    pub pi_size: usize,
}

impl StatsRow {
    pub const HEADER: &'static str = "interest\tchangesets\ttotal_removed\tinteresting_removed\ttotal_added\tinteresting_added\tpi_removed\tpi_added\ttarget_size\tpi_size\telapsed_ms";

    pub fn line(&self) -> String {
        let c = &self.counters;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.id,
            c.changesets,
            c.total_removed,
            c.interesting_removed,
            c.total_added,
            c.interesting_added,
            c.pi_removed,
            c.pi_added,
            self.target_size,
            self.pi_size,
            c.elapsed_ms
        )
    }
}

/// Test hooks for the run loop.
#[derive(Clone, Debug, Default)]
pub struct RunHooks {
    /// Fail with [`ServiceError::InjectedCrash`] right after this many store
    /// commits, before the checkpoint moves.
    pub crash_after_commits: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub changesets_seen: usize,
    pub propagations: usize,
    /// Interests that hit an evaluation error and stopped for this round.
    pub failed: Vec<String>,
    pub skipped_lines: usize,
}

/// Insertion ordinal per parked triple, kept only when eviction is on.
#[derive(Clone, Debug, Default)]
struct PiAges {
    born: BTreeMap<Triple, u64>,
}

impl PiAges {
    fn path(pi_dir: &Path, id: &str) -> PathBuf {
        pi_dir.join(format!("{id}.ages"))
    }

    fn read(path: &Path) -> Result<Self, ServiceError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(PiAges::default()),
            Err(e) => return Err(io_err(path)(e)),
        };
        let mut ages = PiAges::default();
        for line in text.lines() {
            let Some((n, nt)) = line.split_once('\t') else { continue };
            let (Ok(n), Ok(out)) = (n.parse(), parse_ntriples(nt.as_bytes(), &ParseOptions::verbatim())) else {
                continue;
            };
            for t in out.graph {
                ages.born.insert(t, n);
            }
        }
        Ok(ages)
    }

    fn save(&self, path: &Path) -> Result<(), ServiceError> {
        let mut out = String::new();
        for (t, n) in &self.born {
            writeln!(out, "{n}\t{}", t.to_ntriples()).expect("writing to a String");
        }
        write_atomically(path, out.as_bytes()).map_err(io_err(path))
    }
}

pub struct Service {
    pub config: Config,
    pub interests: Vec<InterestExpression>,
    pub store: DiskStore,
    pub checkpoint: Checkpoint,
    pub stats: Stats,
}

impl Service {
    pub fn open(config: Config) -> Result<Self, ServiceError> {
        let mut interests = Vec::new();
        for e in interest_entries(&config)? {
            if !valid_id(&e.id) {
                return Err(ServiceError::InvalidId(e.id));
            }
            interests.push(load_interest(&e.file, &e.id)?);
        }
        let mut store = DiskStore::open(config.resolve(&config.stores.target_path), config.resolve(&config.stores.pi_path))?;
        for i in &interests {
            store.ensure(&i.id)?;
        }
        let checkpoint = read_checkpoint(&config.checkpoint_path())?;
        let stats = Stats::read(&config.stats_path())?;
        Ok(Service { config, interests, store, checkpoint, stats })
    }

    pub fn interest(&self, id: &str) -> Result<&InterestExpression, ServiceError> {
        self.interests.iter().find(|i| i.id == id).ok_or_else(|| ServiceError::UnknownInterest(id.to_string()))
    }

    /// Loads the replica of `id` from `dump` and restarts its checkpoint at
    /// `key`. Returns (target size, parked size).
    pub fn init_slice(&mut self, id: &str, dump: &Path, key: Option<SequenceKey>) -> Result<(usize, usize), ServiceError> {
        let i = self.interest(id)?.clone();
        let bytes = fs::read(dump).map_err(io_err(dump))?;
        let bytes = if dump.extension().is_some_and(|e| e == "gz") {
            use std::io::Read;
            let mut out = Vec::new();
            flate2::read::MultiGzDecoder::new(&bytes[..]).read_to_end(&mut out).map_err(io_err(dump))?;
            out
        } else {
            bytes
        };
        let graph = parse_ntriples(&bytes, &ParseOptions::strict().with_doc_id("dump"))
            .map_err(|source| ServiceError::Dump { path: dump.to_path_buf(), source })?
            .graph;
        let limits = self.config.limits();
        let slice = init_slice(&i, &graph, &limits).map_err(|source| ServiceError::Match { id: id.to_string(), source })?;
        let pi = init_pi(&i, &graph, &slice);
        self.store.initialize(id, &slice, &pi)?;
        self.checkpoint.reset(&self.config.checkpoint_path(), id, key)?;
        self.stats.rows.insert(
            id.to_string(),
            InterestStats { target_initial: slice.len() as u64, last_key: key, ..Default::default() },
        );
        self.stats.save(&self.config.stats_path())?;
        let ages = PiAges::path(&self.config.resolve(&self.config.stores.pi_path), id);
        if ages.exists() {
            fs::remove_file(&ages).map_err(io_err(&ages))?;
        }
        Ok((slice.len(), pi.len()))
    }

    /// Processes every published changeset past each interest's checkpoint,
    /// in sequence order, calling `report` once per (interest, changeset).
    pub fn run_once(
        &mut self,
        hooks: &RunHooks,
        report: &mut dyn FnMut(&PropagationReport),
    ) -> Result<RunSummary, ServiceError> {
        let mut summary = RunSummary::default();
        if self.interests.is_empty() {
            return Ok(summary);
        }
        let after = self.interests.iter().map(|i| self.checkpoint.get(&i.id)).min().flatten();
        let root = self.config.resolve(&self.config.source.changesets_root);
        let scan = scan_changesets(&root, after)?;
        let limits = self.config.limits();
        let mut failed: BTreeSet<String> = BTreeSet::new();
        let mut commits = 0;
        for r in &scan.refs {
            let pending: Vec<usize> = (0..self.interests.len())
                .filter(|&k| {
                    let id = &self.interests[k].id;
                    !failed.contains(id) && self.checkpoint.get(id).is_none_or(|c| r.key > c)
                })
                .collect();
            if pending.is_empty() {
                continue;
            }
            summary.changesets_seen += 1;
            let loaded = load_changeset(r)?;
            summary.skipped_lines += loaded.skipped_lines;
            let cs = loaded.changeset;
            let key = r.key.to_string();
            for k in pending {
                let i = &self.interests[k];
                let rep = match propagate(i, &key, &cs, &mut self.store, &limits) {
                    Ok(rep) => rep,
                    Err(EvalError::Store(e)) => return Err(e.into()),
                    Err(EvalError::Match(source)) => {
                        let e = ServiceError::Match { id: i.id.clone(), source };
                        log::error!("{e}; {} stays at its checkpoint", i.id);
                        failed.insert(i.id.clone());
                        continue;
                    }
                };
                commits += 1;
                if hooks.crash_after_commits == Some(commits) {
                    return Err(ServiceError::InjectedCrash(commits));
                }
                let id = i.id.clone();
                self.evict_aged(&id, &rep)?;
                self.record(&id, r.key, &cs, &rep)?;
                self.checkpoint.advance(&self.config.checkpoint_path(), &id, r.key)?;
                summary.propagations += 1;
                report(&rep);
            }
            if self.config.source.cleanup && self.interests.iter().all(|i| self.checkpoint.get(&i.id) >= Some(r.key)) {
                if let Err(e) = remove_changeset_files(r) {
                    log::warn!("cannot clean up {}: {e}", r.key);
                }
            }
        }
        summary.failed = failed.into_iter().collect();
        if summary.propagations > 0 {
            self.store.compact()?;
        }
        Ok(summary)
    }

    /// Writes the update document and accumulates statistics. Counters for a
    /// changeset already recorded (a re-run after a crash) are not added twice.
    fn record(&mut self, id: &str, key: SequenceKey, cs: &crate::rdf::Changeset, rep: &PropagationReport) -> Result<(), ServiceError> {
        if let Some(dir) = &self.config.stores.updates_path {
            let dir = self.config.resolve(dir).join(id);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let path = dir.join(format!("{key}.ru"));
            write_atomically(&path, export_update_stream(&rep.interesting).as_bytes()).map_err(io_err(&path))?;
        }
        let row = self.stats.rows.entry(id.to_string()).or_default();
        if row.last_key.is_some_and(|k| k >= key) {
            return Ok(());
        }
        row.changesets += 1;
        row.total_removed += cs.removed.len() as u64;
        row.total_added += cs.added.len() as u64;
        row.interesting_removed += rep.removed_interesting as u64;
        row.interesting_added += rep.added_interesting as u64;
        row.pi_removed += rep.pi_removed as u64;
        row.pi_added += rep.pi_added as u64;
        row.elapsed_ms += rep.wall_time.as_millis() as u64;
        row.last_key = Some(key);
        self.stats.save(&self.config.stats_path())
    }

    fn evict_aged(&mut self, id: &str, rep: &PropagationReport) -> Result<(), ServiceError> {
        let max_age = self.config.evaluation.pi_max_age_changesets;
        if max_age == 0 {
            return Ok(());
        }
        let path = PiAges::path(&self.config.resolve(&self.config.stores.pi_path), id);
        let mut ages = PiAges::read(&path)?;
        let now = self.stats.rows.get(id).map_or(0, |r| r.changesets) + 1;
        let (_, pi) = self.store.views(id)?;
        ages.born.retain(|t, _| pi.contains(t));
        for t in pi {
            ages.born.entry(t.clone()).or_insert(now);
        }
        let old: Graph = ages.born.iter().filter(|(_, &n)| n + max_age < now).map(|(t, _)| t.clone()).collect();
        if !old.is_empty() {
            log::info!("{id}: evicting {} parked triples older than {max_age} changesets ({})", old.len(), rep.changeset);
            ages.born.retain(|t, _| !old.contains(t));
            let pc = PIChangeset { removed: old, added: Graph::new() };
            self.store.commit(id, &Default::default(), &pc)?;
        }
        ages.save(&path)
    }

    /// Polls until `stop` is set. Errors are logged and retried next round.
    pub fn run_daemon(&mut self, stop: &AtomicBool, report: &mut dyn FnMut(&PropagationReport)) -> Result<(), ServiceError> {
        let poll = Duration::from_secs(self.config.source.poll_interval_seconds.max(1));
        while !stop.load(Ordering::SeqCst) {
            match self.run_once(&RunHooks::default(), report) {
                Ok(s) if !s.failed.is_empty() => log::error!("evaluation failed for {}", s.failed.join(", ")),
                Ok(_) => {}
                Err(e) => log::error!("{e}; retrying in {}s", poll.as_secs()),
            }
            let start = Instant::now();
            while start.elapsed() < poll && !stop.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(100));
            }
        }
        self.store.compact()?;
        Ok(())
    }

    /// One row per interest, sorted by id.
    pub fn stats_rows(&self) -> Vec<StatsRow> {
        self.interests
            .iter()
            .map(|i| {
                let (target_size, pi_size) = self.store.sizes(&i.id).unwrap_or((0, 0));
                StatsRow {
                    id: i.id.clone(),
                    counters: self.stats.rows.get(&i.id).cloned().unwrap_or_default(),
                    target_size,
                    pi_size,
                }
            })
            .collect()
    }

    /// Concatenated update documents of `id` for changesets after `after`.
    pub fn export_updates(&self, id: &str, after: Option<SequenceKey>) -> Result<String, ServiceError> {
        self.interest(id)?;
        let Some(dir) = &self.config.stores.updates_path else { return Ok(String::new()) };
        let dir = self.config.resolve(dir).join(id);
        let mut docs: Vec<(SequenceKey, PathBuf)> = Vec::new();
        if dir.exists() {
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let path = entry.map_err(io_err(&dir))?.path();
                let key = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<SequenceKey>().ok());
                if let (Some(k), Some("ru")) = (key, path.extension().and_then(|e| e.to_str())) {
                    if after.is_none_or(|a| k > a) {
                        docs.push((k, path));
                    }
                }
            }
        }
        docs.sort();
        let mut out = String::new();
        for (k, p) in docs {
            writeln!(out, "# {k}").expect("writing to a String");
            out.push_str(&fs::read_to_string(&p).map_err(io_err(&p))?);
        }
        Ok(out)
    }

    /// Canonical N-Triples of the replica and parked set of `id`.
    pub fn dump_stores(&self, id: &str) -> Result<(String, String), ServiceError> {
        let (t, p) = self.store.snapshot(id).ok_or_else(|| ServiceError::UnknownInterest(id.to_string()))?;
        Ok((serialize_ntriples(&t), serialize_ntriples(&p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_is_stable() {
        let mut cfg = Config::under(Path::new("/tmp/x"));
        cfg.interest.push(InterestEntry { id: "football".into(), file: "football.rq".into() });
        cfg.stores.updates_path = Some("updates".into());
        let text = cfg.to_toml();
        let again = Config::parse(&text, Path::new("/tmp/x/slicesync.toml")).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), text);
    }

    #[test]
    fn env_overrides_every_section() {
        let cfg = Config::under(Path::new("/srv"));
        let env = [
            ("SLICESYNC_SOURCE_POLL_INTERVAL_SECONDS", "3"),
            ("SLICESYNC_SOURCE_CLEANUP", "true"),
            ("SLICESYNC_STORES_TARGET_PATH", "/data/t"),
            ("SLICESYNC_STORES_UPDATES_PATH", "out"),
            ("SLICESYNC_EVALUATION_MAX_PARTIAL_MATCHES", "99"),
            ("PATH", "/bin"),
        ]
        .map(|(k, v)| (k.to_string(), v.to_string()));
        let cfg = cfg.with_overrides(env).unwrap();
        assert_eq!(cfg.source.poll_interval_seconds, 3);
        assert!(cfg.source.cleanup);
        assert_eq!(cfg.stores.target_path, PathBuf::from("/data/t"));
        assert_eq!(cfg.resolve(cfg.stores.updates_path.as_ref().unwrap()), PathBuf::from("/srv/out"));
        assert_eq!(cfg.evaluation.max_partial_matches, 99);
        assert_eq!(cfg.base_dir, PathBuf::from("/srv"));
    }

    #[test]
    fn bad_overrides_are_reported() {
        let cfg = Config::under(Path::new("/srv"));
        let bad = |k: &str, v: &str| cfg.clone().with_overrides([(k.to_string(), v.to_string())]).unwrap_err();
        assert!(bad("SLICESYNC_SOURCE_CLEANUP", "maybe").to_string().contains("true or false"));
        assert!(bad("SLICESYNC_NOPE_X", "1").to_string().contains("unknown section"));
        assert!(matches!(bad("SLICESYNC_SOURCE_COLOUR", "red"), ConfigError::Override { .. }));
    }

    #[test]
    fn stats_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(STATS_FILE);
        assert_eq!(Stats::read(&path).unwrap(), Stats::default());
        let mut s = Stats::default();
        s.rows.insert("a".into(), InterestStats { changesets: 2, interesting_added: 5, ..Default::default() });
        s.rows.insert(
            "b".into(),
            InterestStats { last_key: Some(SequenceKey::new(2014, 10, 2, 0, 1)), ..Default::default() },
        );
        s.save(&path).unwrap();
        assert_eq!(Stats::read(&path).unwrap(), s);
        fs::write(&path, format!("{STATS_HEADER}\na\t1\n")).unwrap();
        assert!(matches!(Stats::read(&path), Err(ServiceError::Stats { line: 2, .. })));
    }
}
