//! Target and potentially-interesting stores, one pair per interest.
//!
//! [`DiskStore`] keeps each pair in memory, backed by canonical N-Triples
//! snapshots and a write-ahead journal. A commit is durable once its journal
//! record (framed by `BEGIN` and a checksummed `COMMIT`) is synced; reopening
//! replays complete records and drops a torn tail.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::evaluator::{InterestingChangeset, PIChangeset};
use crate::index::IndexedGraph;
use crate::match_engine::{relevant_triples, slice_of, MatchError, MatchLimits};
use crate::pattern::InterestExpression;
use crate::rdf::{parse_ntriples, serialize_ntriples, Changeset, Graph, ParseOptions};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} is corrupt ({detail}); re-initialize the interest from a slice")]
    Corrupt { path: PathBuf, detail: String },
    #[error("no stores for interest '{0}'")]
    UnknownInterest(String),
    #[error("invalid interest id '{0}': use letters, digits, '-', '_' or '.'")]
    InvalidId(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Actual effect of a commit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ApplyCounts {
    pub target_removed: usize,
    pub target_added: usize,
    pub pi_removed: usize,
    pub pi_added: usize,
}

/// Removes then inserts; returns how many triples actually left and entered.
pub fn apply_interesting(target: &mut IndexedGraph, ic: &InterestingChangeset) -> (usize, usize) {
    let removed = ic.removed.iter().filter(|t| target.remove(t)).count();
    let added = ic.added.iter().filter(|t| target.insert(t)).count();
    (removed, added)
}

pub fn apply_pi(pi: &mut Graph, pc: &PIChangeset) -> (usize, usize) {
    let removed = pc.removed.iter().filter(|t| pi.remove(t)).count();
    let added = pc.added.iter().filter(|t| pi.insert((*t).clone())).count();
    (removed, added)
}

/// The replica and the parked partial matches of one interest.
#[derive(Clone, Debug, Default)]
pub struct StorePair {
    pub target: IndexedGraph,
    pub pi: Graph,
}

impl StorePair {
    fn apply(&mut self, ic: &InterestingChangeset, pc: &PIChangeset) -> ApplyCounts {
        let (target_removed, target_added) = apply_interesting(&mut self.target, ic);
        let (pi_removed, pi_added) = apply_pi(&mut self.pi, pc);
        ApplyCounts { target_removed, target_added, pi_removed, pi_added }
    }
}

/// Per-interest store pairs with transactional commits.
pub trait InterestStore {
    fn views(&self, id: &str) -> Result<(&IndexedGraph, &Graph), StoreError>;

    /// Applies both changesets atomically.
    fn commit(&mut self, id: &str, ic: &InterestingChangeset, pc: &PIChangeset) -> Result<ApplyCounts, StoreError>;
}

#[derive(Clone, Debug, Default)]
pub struct MemStores {
    pairs: BTreeMap<String, StorePair>,
}

impl MemStores {
    pub fn initialize(&mut self, id: &str, target: Graph, pi: Graph) {
        self.pairs.insert(id.to_string(), StorePair { target: IndexedGraph::from_graph(&target), pi });
    }

    pub fn snapshot(&self, id: &str) -> Option<(Graph, Graph)> {
        self.pairs.get(id).map(|p| (p.target.to_graph(), p.pi.clone()))
    }
}

impl InterestStore for MemStores {
    fn views(&self, id: &str) -> Result<(&IndexedGraph, &Graph), StoreError> {
        let p = self.pairs.get(id).ok_or_else(|| StoreError::UnknownInterest(id.to_string()))?;
        Ok((&p.target, &p.pi))
    }

    fn commit(&mut self, id: &str, ic: &InterestingChangeset, pc: &PIChangeset) -> Result<ApplyCounts, StoreError> {
        let p = self.pairs.get_mut(id).ok_or_else(|| StoreError::UnknownInterest(id.to_string()))?;
        Ok(p.apply(ic, pc))
    }
}

pub const JOURNAL_FILE: &str = "journal.log";
const SNAPSHOT_EXT: &str = "nt";
/// Journal size that triggers compaction on commit.
const COMPACT_BYTES: u64 = 64 << 20;

/// Writes `contents` to `path` via a synced temporary file and a rename, so
/// readers see either the old or the new contents.
pub fn write_atomically(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // Persist the rename itself; not every platform can open directories.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

fn write_snapshot(path: &Path, g: &Graph) -> Result<(), StoreError> {
    write_atomically(path, serialize_ntriples(g).as_bytes()).map_err(io_err(path))
}

fn checksum(body: &str) -> String {
    Sha256::digest(body.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn journal_record(id: &str, ic: &InterestingChangeset, pc: &PIChangeset) -> String {
    let sections = [("T-", &ic.removed), ("T+", &ic.added), ("P-", &pc.removed), ("P+", &pc.added)];
    let count: usize = sections.iter().map(|(_, g)| g.len()).sum();
    let mut body = format!("BEGIN {id} {count}\n");
    for (tag, g) in sections {
        for line in serialize_ntriples(g).lines() {
            body.push_str(tag);
            body.push(' ');
            body.push_str(line);
            body.push('\n');
        }
    }
    let sum = checksum(&body);
    body.push_str("COMMIT ");
    body.push_str(&sum);
    body.push('\n');
    body
}

struct Record {
    id: String,
    ic: InterestingChangeset,
    pc: PIChangeset,
}

/// Complete records and the byte length they span; parsing stops at the first
/// incomplete or damaged record.
fn parse_journal(text: &str) -> (Vec<Record>, usize) {
    let mut records = Vec::new();
    let mut good = 0;
    let mut pos = 0;
    'records: while pos < text.len() {
        let rest = &text[pos..];
        let Some(header_end) = rest.find('\n') else { break };
        let header = &rest[..header_end];
        let mut parts = header.split(' ');
        let (Some("BEGIN"), Some(id), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            break;
        };
        let Ok(count) = count.parse::<usize>() else { break };
        let mut offset = header_end + 1;
        let mut rec = Record { id: id.to_string(), ic: Default::default(), pc: Default::default() };
        for _ in 0..count {
            let Some(end) = rest[offset..].find('\n') else { break 'records };
            let line = &rest[offset..offset + end];
            offset += end + 1;
            let Some((tag, nt)) = line.split_once(' ') else { break 'records };
            let Ok(out) = parse_ntriples(nt.as_bytes(), &ParseOptions::verbatim()) else { break 'records };
            let Some(t) = out.graph.into_iter().next() else { break 'records };
            let g = match tag {
                "T-" => &mut rec.ic.removed,
                "T+" => &mut rec.ic.added,
                "P-" => &mut rec.pc.removed,
                "P+" => &mut rec.pc.added,
                _ => break 'records,
            };
            g.insert(t);
        }
        let body = &rest[..offset];
        let Some(end) = rest[offset..].find('\n') else { break };
        if rest[offset..offset + end] != format!("COMMIT {}", checksum(body)) {
            break;
        }
        pos += offset + end + 1;
        good = pos;
        records.push(rec);
    }
    (records, good)
}

/// Snapshots plus journal on local disk.
pub struct DiskStore {
    target_dir: PathBuf,
    pi_dir: PathBuf,
    pairs: BTreeMap<String, StorePair>,
    journal: File,
    journal_path: PathBuf,
    journal_bytes: u64,
}

impl DiskStore {
    /// Opens (creating if needed) the stores and recovers from the journal.
    pub fn open(target_dir: impl Into<PathBuf>, pi_dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let (target_dir, pi_dir) = (target_dir.into(), pi_dir.into());
        fs::create_dir_all(&target_dir).map_err(io_err(&target_dir))?;
        fs::create_dir_all(&pi_dir).map_err(io_err(&pi_dir))?;
        let mut pairs: BTreeMap<String, StorePair> = BTreeMap::new();
        for id in snapshot_ids(&target_dir)? {
            let g = read_snapshot(&target_dir.join(format!("{id}.{SNAPSHOT_EXT}")))?;
            pairs.entry(id).or_default().target = IndexedGraph::from_graph(&g);
        }
        for id in snapshot_ids(&pi_dir)? {
            let g = read_snapshot(&pi_dir.join(format!("{id}.{SNAPSHOT_EXT}")))?;
            pairs.entry(id).or_default().pi = g;
        }
        let journal_path = target_dir.join(JOURNAL_FILE);
        let text = match fs::read(&journal_path) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(&journal_path)(e)),
        };
        let (records, good) = parse_journal(&text);
        if good < text.len() {
            log::warn!("dropping {} bytes of incomplete journal in {}", text.len() - good, journal_path.display());
        }
        for rec in &records {
            pairs.entry(rec.id.clone()).or_default().apply(&rec.ic, &rec.pc);
        }
        let journal = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(&journal_path)
            .map_err(io_err(&journal_path))?;
        journal.set_len(good as u64).map_err(io_err(&journal_path))?;
        let mut store = DiskStore { target_dir, pi_dir, pairs, journal, journal_path, journal_bytes: good as u64 };
        store.seek_end()?;
        Ok(store)
    }

    fn seek_end(&mut self) -> Result<(), StoreError> {
        use std::io::Seek;
        self.journal.seek(io::SeekFrom::End(0)).map_err(io_err(&self.journal_path))?;
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pairs.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.pairs.contains_key(id)
    }

    /// Replaces the stores of `id` and makes the new state durable.
    pub fn initialize(&mut self, id: &str, target: &Graph, pi: &Graph) -> Result<(), StoreError> {
        if !valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        self.pairs.insert(id.to_string(), StorePair { target: IndexedGraph::from_graph(target), pi: pi.clone() });
        self.compact()
    }

    /// Creates empty stores for `id` unless they exist.
    pub fn ensure(&mut self, id: &str) -> Result<(), StoreError> {
        if self.pairs.contains_key(id) {
            return Ok(());
        }
        self.initialize(id, &Graph::new(), &Graph::new())
    }

    /// Writes every snapshot and empties the journal.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        for (id, pair) in &self.pairs {
            write_snapshot(&self.target_dir.join(format!("{id}.{SNAPSHOT_EXT}")), &pair.target.to_graph())?;
            write_snapshot(&self.pi_dir.join(format!("{id}.{SNAPSHOT_EXT}")), &pair.pi)?;
        }
        self.journal.set_len(0).map_err(io_err(&self.journal_path))?;
        self.journal.sync_all().map_err(io_err(&self.journal_path))?;
        self.seek_end()?;
        self.journal_bytes = 0;
        Ok(())
    }

    pub fn snapshot(&self, id: &str) -> Option<(Graph, Graph)> {
        self.pairs.get(id).map(|p| (p.target.to_graph(), p.pi.clone()))
    }

    pub fn sizes(&self, id: &str) -> Option<(usize, usize)> {
        self.pairs.get(id).map(|p| (p.target.len(), p.pi.len()))
    }

    pub fn journal_path(&self) -> &Path {
        &self.journal_path
    }
}

impl InterestStore for DiskStore {
    fn views(&self, id: &str) -> Result<(&IndexedGraph, &Graph), StoreError> {
        let p = self.pairs.get(id).ok_or_else(|| StoreError::UnknownInterest(id.to_string()))?;
        Ok((&p.target, &p.pi))
    }

    fn commit(&mut self, id: &str, ic: &InterestingChangeset, pc: &PIChangeset) -> Result<ApplyCounts, StoreError> {
        if !self.pairs.contains_key(id) {
            return Err(StoreError::UnknownInterest(id.to_string()));
        }
        if ic.is_empty() && pc.is_empty() {
            return Ok(ApplyCounts::default());
        }
        let rec = journal_record(id, ic, pc);
        self.journal.write_all(rec.as_bytes()).map_err(io_err(&self.journal_path))?;
        self.journal.sync_data().map_err(io_err(&self.journal_path))?;
        self.journal_bytes += rec.len() as u64;
        let counts = self.pairs.get_mut(id).expect("checked above").apply(ic, pc);
        if self.journal_bytes > COMPACT_BYTES {
            self.compact()?;
        }
        Ok(counts)
    }
}

fn snapshot_ids(dir: &Path) -> Result<Vec<String>, StoreError> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(SNAPSHOT_EXT) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if valid_id(stem) {
                    ids.push(stem.to_string());
                }
            }
        }
    }
    ids.sort();
    Ok(ids)
}

fn read_snapshot(path: &Path) -> Result<Graph, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_ntriples(&bytes, &ParseOptions::verbatim())
        .map(|o| o.graph)
        .map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), detail: e.to_string() })
}

/// The initial replica: every triple of every full match in `dump`.
pub fn init_slice(i: &InterestExpression, dump: &Graph, limits: &MatchLimits) -> Result<Graph, MatchError> {
    slice_of(i, &IndexedGraph::from_graph(dump), limits)
}

/// Triples of `dump` that match some pattern but are not in `slice`. Parking
/// them lets later changesets complete matches that began before the dump.
pub fn init_pi(i: &InterestExpression, dump: &Graph, slice: &Graph) -> Graph {
    relevant_triples(i, dump).difference(slice)
}

/// A `DELETE DATA` / `INSERT DATA` document with sorted N-Triples payloads.
pub fn export_update_stream(ic: &InterestingChangeset) -> String {
    format!(
        "DELETE DATA {{\n{}}};\nINSERT DATA {{\n{}}}\n",
        serialize_ntriples(&ic.removed),
        serialize_ntriples(&ic.added)
    )
}

#[derive(Debug, thiserror::Error)]
#[error("malformed update document: {0}")]
pub struct UpdateStreamError(String);

/// Reads back a document written by [`export_update_stream`].
pub fn parse_update_stream(doc: &str) -> Result<Changeset, UpdateStreamError> {
    let err = |m: &str| UpdateStreamError(m.to_string());
    let rest = doc.strip_prefix("DELETE DATA {\n").ok_or_else(|| err("missing DELETE DATA block"))?;
    let (deletes, rest) = rest.split_once("};\nINSERT DATA {\n").ok_or_else(|| err("missing INSERT DATA block"))?;
    let inserts = rest.strip_suffix("}\n").ok_or_else(|| err("unterminated INSERT DATA block"))?;
    let parse = |s: &str| {
        parse_ntriples(s.as_bytes(), &ParseOptions::verbatim())
            .map(|o| o.graph)
            .map_err(|e| UpdateStreamError(e.to_string()))
    };
    Ok(Changeset::new(parse(deletes)?, parse(inserts)?))
}
