//! Published changeset folders and the per-interest checkpoint.
//!
//! Layout: `ROOT/YYYY/MM/DD/HH/NNNNNN.{removed|added}.nt[.gz]`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::rdf::{parse_ntriples, serialize_ntriples, Changeset, Graph, ParseOptions};
use crate::store::write_atomically;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SequenceKey {
    pub year: u16,
    pub month: u8,
    pub day: u8,
    pub hour: u8,
    pub serial: u32,
}

impl SequenceKey {
    pub fn new(year: u16, month: u8, day: u8, hour: u8, serial: u32) -> Self {
        SequenceKey { year, month, day, hour, serial }
    }

    /// Folder of this changeset relative to the root.
    pub fn dir(&self) -> PathBuf {
        PathBuf::from(format!("{:04}/{:02}/{:02}/{:02}", self.year, self.month, self.day, self.hour))
    }

    fn hour_prefix(&self) -> (u16, u8, u8, u8) {
        (self.year, self.month, self.day, self.hour)
    }
}

impl fmt::Display for SequenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}-{:02}-{:06}", self.year, self.month, self.day, self.hour, self.serial)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid sequence key '{0}': expected YYYY-MM-DD-HH-NNNNNN")]
pub struct KeyError(String);

impl FromStr for SequenceKey {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, KeyError> {
        let err = || KeyError(s.to_string());
        let parts: Vec<&str> = s.split('-').collect();
        let widths = [4, 2, 2, 2, 6];
        if parts.len() != 5
            || parts.iter().zip(widths).any(|(p, w)| p.len() != w || !p.bytes().all(|b| b.is_ascii_digit()))
        {
            return Err(err());
        }
        let n = |i: usize| parts[i].parse::<u32>().map_err(|_| err());
        let key = SequenceKey::new(n(0)? as u16, n(1)? as u8, n(2)? as u8, n(3)? as u8, n(4)?);
        if !valid_date_parts(key.month, key.day, key.hour) {
            return Err(err());
        }
        Ok(key)
    }
}

fn valid_date_parts(month: u8, day: u8, hour: u8) -> bool {
    (1..=12).contains(&month) && (1..=31).contains(&day) && hour <= 23
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChangesetRef {
    pub key: SequenceKey,
    pub removed_path: Option<PathBuf>,
    pub added_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scan {
    pub refs: Vec<ChangesetRef>,
    /// Entries that do not fit the layout.
    pub ignored: usize,
    /// Missing serials inside an hour folder, as (last present, next present).
    pub gaps: Vec<(SequenceKey, SequenceKey)>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot read changeset folder {path}: {source}")]
pub struct ScanError {
    pub path: PathBuf,
    pub source: io::Error,
}

/// Numbered sub-directories of `dir` with the given digit width, ascending.
fn numbered_dirs(dir: &Path, width: usize, ignored: &mut usize) -> Result<Vec<(u32, PathBuf)>, ScanError> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|source| ScanError { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let entry = entry.map_err(|source| ScanError { path: dir.to_path_buf(), source })?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let is_dir = entry.file_type().map(|t| t.is_dir()).unwrap_or(false);
        if is_dir && name.len() == width && name.bytes().all(|b| b.is_ascii_digit()) {
            out.push((name.parse().expect("digits"), entry.path()));
        } else {
            log::warn!("ignoring {}", entry.path().display());
            *ignored += 1;
        }
    }
    out.sort();
    Ok(out)
}

/// (serial, is_removed) for `NNNNNN.removed.nt[.gz]` and `NNNNNN.added.nt[.gz]`.
fn parse_file_name(name: &str) -> Option<(u32, bool)> {
    let stem = name.strip_suffix(".gz").unwrap_or(name).strip_suffix(".nt")?;
    let (serial, side) = stem.split_once('.')?;
    if serial.len() != 6 || !serial.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let removed = match side {
        "removed" => true,
        "added" => false,
        _ => return None,
    };
    Some((serial.parse().ok()?, removed))
}

/// All changesets under `root` with a key greater than `after`, ascending.
pub fn scan_changesets(root: &Path, after: Option<SequenceKey>) -> Result<Scan, ScanError> {
    let mut scan = Scan::default();
    let floor = after.map(|k| k.hour_prefix());
    let skip = |prefix: (u16, u8, u8, u8), depth: usize| {
        let Some(f) = floor else { return false };
        let cut = |p: (u16, u8, u8, u8)| match depth {
            0 => (p.0, 0, 0, 0),
            1 => (p.0, p.1, 0, 0),
            2 => (p.0, p.1, p.2, 0),
            _ => p,
        };
        cut(prefix) < cut(f)
    };
    for (y, ydir) in numbered_dirs(root, 4, &mut scan.ignored)? {
        if skip((y as u16, 0, 0, 0), 0) {
            continue;
        }
        for (m, mdir) in numbered_dirs(&ydir, 2, &mut scan.ignored)? {
            if skip((y as u16, m as u8, 0, 0), 1) {
                continue;
            }
            for (d, ddir) in numbered_dirs(&mdir, 2, &mut scan.ignored)? {
                if skip((y as u16, m as u8, d as u8, 0), 2) {
                    continue;
                }
                for (h, hdir) in numbered_dirs(&ddir, 2, &mut scan.ignored)? {
                    if !valid_date_parts(m as u8, d as u8, h as u8) {
                        scan.ignored += 1;
                        continue;
                    }
                    if skip((y as u16, m as u8, d as u8, h as u8), 3) {
                        continue;
                    }
                    let base = SequenceKey::new(y as u16, m as u8, d as u8, h as u8, 0);
                    scan_hour(&hdir, base, after, &mut scan)?;
                }
            }
        }
    }
    Ok(scan)
}

fn scan_hour(dir: &Path, base: SequenceKey, after: Option<SequenceKey>, scan: &mut Scan) -> Result<(), ScanError> {
    let mut by_serial: BTreeMap<u32, ChangesetRef> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|source| ScanError { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let entry = entry.map_err(|source| ScanError { path: dir.to_path_buf(), source })?;
        let name = entry.file_name();
        let parsed = entry.file_type().map(|t| t.is_file()).unwrap_or(false).then(|| parse_file_name(&name.to_string_lossy()));
        let Some(Some((serial, removed))) = parsed else {
            log::warn!("ignoring {}", entry.path().display());
            scan.ignored += 1;
            continue;
        };
        let key = SequenceKey { serial, ..base };
        let r = by_serial.entry(serial).or_insert(ChangesetRef { key, removed_path: None, added_path: None });
        let slot = if removed { &mut r.removed_path } else { &mut r.added_path };
        if slot.is_some() {
            // Both `.nt` and `.nt.gz` for the same side: keep the first by name.
            log::warn!("duplicate changeset file {}", entry.path().display());
            scan.ignored += 1;
            if slot.as_ref().is_some_and(|p| p.as_path() > entry.path().as_path()) {
                *slot = Some(entry.path());
            }
            continue;
        }
        *slot = Some(entry.path());
    }
    let serials: Vec<u32> = by_serial.keys().copied().collect();
    for w in serials.windows(2) {
        if w[1] > w[0] + 1 {
            let (a, b) = (SequenceKey { serial: w[0], ..base }, SequenceKey { serial: w[1], ..base });
            log::warn!("serial gap between {a} and {b}; continuing");
            scan.gaps.push((a, b));
        }
    }
    scan.refs.extend(by_serial.into_values().filter(|r| after.is_none_or(|k| r.key > k)));
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt gzip stream in {path}: {source}")]
    Gzip { path: PathBuf, source: io::Error },
}

impl LoadError {
    /// Both kinds may be caused by a file that is still being written.
    pub fn is_retryable(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadedChangeset {
    pub changeset: Changeset,
    /// Lines skipped by the lenient parser.
    pub skipped_lines: usize,
}

fn read_side(path: &Path, doc_id: String) -> Result<(Graph, usize), LoadError> {
    let raw = fs::read(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let bytes = if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|source| LoadError::Gzip { path: path.to_path_buf(), source })?;
        out
    } else {
        raw
    };
    let outcome = parse_ntriples(&bytes, &ParseOptions::lenient().with_doc_id(doc_id))
        .map_err(|e| LoadError::Io { path: path.to_path_buf(), source: io::Error::other(e.to_string()) })?;
    for e in &outcome.errors {
        log::warn!("{}: skipped {e}", path.display());
    }
    Ok((outcome.graph, outcome.errors.len()))
}

pub fn load_changeset(r: &ChangesetRef) -> Result<LoadedChangeset, LoadError> {
    let mut loaded = LoadedChangeset::default();
    if let Some(p) = &r.removed_path {
        let (g, skipped) = read_side(p, format!("{}.removed", r.key))?;
        loaded.changeset.removed = g;
        loaded.skipped_lines += skipped;
    }
    if let Some(p) = &r.added_path {
        let (g, skipped) = read_side(p, format!("{}.added", r.key))?;
        loaded.changeset.added = g;
        loaded.skipped_lines += skipped;
    }
    Ok(loaded)
}

/// Writes a changeset into the folder layout. Empty sides are still written.
pub fn publish_changeset(root: &Path, key: SequenceKey, cs: &Changeset, gzip: bool) -> io::Result<ChangesetRef> {
    let dir = root.join(key.dir());
    fs::create_dir_all(&dir)?;
    let ext = if gzip { "nt.gz" } else { "nt" };
    let write_side = |side: &str, g: &Graph| -> io::Result<PathBuf> {
        let path = dir.join(format!("{:06}.{side}.{ext}", key.serial));
        let text = serialize_ntriples(g);
        let bytes = if gzip {
            let mut enc = GzEncoder::new(Vec::new(), Compression::default());
            enc.write_all(text.as_bytes())?;
            enc.finish()?
        } else {
            text.into_bytes()
        };
        write_atomically(&path, &bytes)?;
        Ok(path)
    };
    let removed_path = Some(write_side("removed", &cs.removed)?);
    let added_path = Some(write_side("added", &cs.added)?);
    Ok(ChangesetRef { key, removed_path, added_path })
}

/// Deletes the files of a processed changeset.
pub fn remove_changeset_files(r: &ChangesetRef) -> io::Result<()> {
    for p in r.removed_path.iter().chain(&r.added_path) {
        match fs::remove_file(p) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            _ => {}
        }
    }
    Ok(())
}

pub const CHECKPOINT_FILE: &str = "lastPublished";

/// Last applied key per interest, stored as `<interest-id> <key>` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Checkpoint {
    pub last: BTreeMap<String, SequenceKey>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("checkpoint {path} is corrupt at line {line}; re-initialize the affected interests from a slice")]
    Corrupt { path: PathBuf, line: usize },
    #[error("checkpoint for '{id}' would move back from {current} to {requested}")]
    Regression { id: String, current: SequenceKey, requested: SequenceKey },
}

impl Checkpoint {
    pub fn get(&self, id: &str) -> Option<SequenceKey> {
        self.last.get(id).copied()
    }

    pub fn render(&self) -> String {
        self.last.iter().map(|(id, k)| format!("{id} {k}\n")).collect()
    }

    /// Records `key` for `id` and durably rewrites the file at `path`.
    pub fn advance(&mut self, path: &Path, id: &str, key: SequenceKey) -> Result<(), CheckpointError> {
        if let Some(current) = self.get(id) {
            if key < current {
                return Err(CheckpointError::Regression { id: id.to_string(), current, requested: key });
            }
            if key == current {
                return Ok(());
            }
        }
        self.last.insert(id.to_string(), key);
        self.save(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        write_atomically(path, self.render().as_bytes())
            .map_err(|source| CheckpointError::Io { path: path.to_path_buf(), source })
    }

    /// Sets or clears the key for `id` without the monotonicity check. Only
    /// for re-initializing an interest from a fresh slice.
    pub fn reset(&mut self, path: &Path, id: &str, key: Option<SequenceKey>) -> Result<(), CheckpointError> {
        match key {
            Some(k) => self.last.insert(id.to_string(), k),
            None => self.last.remove(id),
        };
        self.save(path)
    }
}

/// A missing file reads as an empty checkpoint.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Checkpoint::default()),
        Err(e) if e.kind() == io::ErrorKind::InvalidData => {
            return Err(CheckpointError::Corrupt { path: path.to_path_buf(), line: 1 })
        }
        Err(source) => return Err(CheckpointError::Io { path: path.to_path_buf(), source }),
    };
    let mut cp = Checkpoint::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = || CheckpointError::Corrupt { path: path.to_path_buf(), line: idx + 1 };
        let (id, key) = line.split_once(' ').ok_or_else(corrupt)?;
        let key = key.parse().map_err(|_| corrupt())?;
        if !crate::store::valid_id(id) || cp.last.insert(id.to_string(), key).is_some() {
            return Err(corrupt());
        }
    }
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(CheckpointError::Corrupt { path: path.to_path_buf(), line: text.lines().count() });
    }
    Ok(cp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{iri_triple, Term};
    use proptest::prelude::*;

    fn key(h: u8, s: u32) -> SequenceKey {
        SequenceKey::new(2014, 10, 2, h, s)
    }

    fn fixture(name: &str) -> PathBuf {
        PathBuf::from(format!("{}/tests/fixtures/running_example/{name}", env!("CARGO_MANIFEST_DIR")))
    }

    fn touch(root: &Path, rel: &str) {
        let p = root.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, "").unwrap();
    }

    #[test]
    fn key_format_round_trip() {
        let k = key(5, 1);
        assert_eq!(k.to_string(), "2014-10-02-05-000001");
        assert_eq!("2014-10-02-05-000001".parse::<SequenceKey>().unwrap(), k);
        for bad in ["2014-10-02-05-1", "2014-13-02-05-000001", "2014-10-02-24-000001", "x", "2014-10-02-05-00000a"] {
            assert!(bad.parse::<SequenceKey>().is_err(), "{bad}");
        }
        assert!(key(0, 9) < key(1, 0));
        assert!(SequenceKey::new(2013, 12, 31, 23, 999_999) < key(0, 0));
    }

    #[test]
    fn one_pair_in_layout() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "2014/10/02/00/000001.removed.nt.gz");
        touch(dir.path(), "2014/10/02/00/000001.added.nt.gz");
        let scan = scan_changesets(dir.path(), None).unwrap();
        assert_eq!(scan.refs.len(), 1);
        let r = &scan.refs[0];
        assert_eq!(r.key, SequenceKey::new(2014, 10, 2, 0, 1));
        assert!(r.removed_path.is_some() && r.added_path.is_some());
    }

    #[test]
    fn empty_root() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(scan_changesets(dir.path(), None).unwrap(), Scan::default());
    }

    #[test]
    fn missing_root_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(scan_changesets(&dir.path().join("nope"), None).is_err());
    }

    #[test]
    fn three_hours_two_serials_one_missing_side() {
        let dir = tempfile::tempdir().unwrap();
        for h in 0..3 {
            for s in 0..2 {
                touch(dir.path(), &format!("2014/10/02/{h:02}/{s:06}.removed.nt"));
                if !(h == 1 && s == 1) {
                    touch(dir.path(), &format!("2014/10/02/{h:02}/{s:06}.added.nt"));
                }
            }
        }
        touch(dir.path(), "2014/10/02/00/README");
        touch(dir.path(), "2014/10/02/00/1.added.nt");
        touch(dir.path(), "2014/notes.txt");
        let scan = scan_changesets(dir.path(), None).unwrap();
        assert_eq!(scan.refs.len(), 6);
        assert_eq!(scan.ignored, 3);
        let keys: Vec<_> = scan.refs.iter().map(|r| r.key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let missing: Vec<_> = scan.refs.iter().filter(|r| r.added_path.is_none()).map(|r| r.key).collect();
        assert_eq!(missing, vec![key(1, 1)]);
    }

    #[test]
    fn serial_gap_is_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        for s in [1, 2, 5] {
            touch(dir.path(), &format!("2014/10/02/00/{s:06}.added.nt"));
        }
        let scan = scan_changesets(dir.path(), None).unwrap();
        assert_eq!(scan.refs.len(), 3);
        assert_eq!(scan.gaps, vec![(key(0, 2), key(0, 5))]);
    }

    #[test]
    fn load_running_example() {
        let r = ChangesetRef {
            key: key(5, 1),
            removed_path: Some(fixture("000001.removed.nt")),
            added_path: Some(fixture("000001.added.nt")),
        };
        let cs = load_changeset(&r).unwrap().changeset;
        assert_eq!((cs.removed.len(), cs.added.len()), (4, 7));
        let only_removed = ChangesetRef { added_path: None, ..r };
        let cs = load_changeset(&only_removed).unwrap().changeset;
        assert_eq!((cs.removed.len(), cs.added.len()), (4, 0));
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plain = ChangesetRef {
            key: key(5, 1),
            removed_path: Some(fixture("000001.removed.nt")),
            added_path: Some(fixture("000001.added.nt")),
        };
        let expected = load_changeset(&plain).unwrap().changeset;
        let r = publish_changeset(dir.path(), key(5, 1), &expected, true).unwrap();
        assert!(r.added_path.as_ref().unwrap().to_string_lossy().ends_with("05/000001.added.nt.gz"));
        assert_eq!(load_changeset(&r).unwrap().changeset, expected);
        assert_eq!(scan_changesets(dir.path(), None).unwrap().refs, vec![r]);
    }

    #[test]
    fn corrupt_gzip_is_retryable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("000001.added.nt.gz");
        fs::write(&p, b"\x1f\x8b\x08garbage").unwrap();
        let err = load_changeset(&ChangesetRef { key: key(0, 1), removed_path: None, added_path: Some(p) }).unwrap_err();
        assert!(matches!(err, LoadError::Gzip { .. }));
        assert!(err.is_retryable());
    }

    #[test]
    fn malformed_lines_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("000001.added.nt");
        fs::write(&p, "<s> <p> <o> .\nbroken\n<s> <p> <o2> .\n").unwrap();
        let out = load_changeset(&ChangesetRef { key: key(0, 1), removed_path: None, added_path: Some(p) }).unwrap();
        assert_eq!(out.changeset.added.len(), 2);
        assert_eq!(out.skipped_lines, 1);
    }

    #[test]
    fn checkpoint_advance_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CHECKPOINT_FILE);
        assert_eq!(read_checkpoint(&path).unwrap(), Checkpoint::default());
        let mut cp = Checkpoint::default();
        cp.advance(&path, "football", key(5, 1)).unwrap();
        cp.advance(&path, "athletes", key(4, 2)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "athletes 2014-10-02-04-000002\nfootball 2014-10-02-05-000001\n");
        assert_eq!(read_checkpoint(&path).unwrap().get("football"), Some(key(5, 1)));
        assert!(matches!(cp.advance(&path, "football", key(5, 0)), Err(CheckpointError::Regression { .. })));
        cp.advance(&path, "football", key(5, 1)).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), cp);
    }

    #[test]
    fn corrupt_checkpoint_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CHECKPOINT_FILE);
        fs::write(&path, "football 2014-10-02-05-00\n").unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert!(matches!(err, CheckpointError::Corrupt { line: 1, .. }));
        assert!(err.to_string().contains("re-initialize"));
    }

    #[test]
    fn interrupted_checkpoint_write_leaves_old_or_new() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CHECKPOINT_FILE);
        let mut cp = Checkpoint::default();
        cp.advance(&path, "i", key(0, 1)).unwrap();
        let old = cp.clone();
        let mut new = cp.clone();
        new.last.insert("i".into(), key(0, 2));
        let full = new.render();
        // A writer killed mid-way leaves a partial temporary file next to the
        // checkpoint; the rename never happened.
        for cut in 0..full.len() {
            fs::write(dir.path().join(format!("{CHECKPOINT_FILE}.tmp")), &full[..cut]).unwrap();
            assert_eq!(read_checkpoint(&path).unwrap(), old);
        }
        new.save(&path).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), new);
    }

    fn tree_keys() -> impl Strategy<Value = Vec<SequenceKey>> {
        prop::collection::btree_set((0u8..3, 0u8..3, 0u32..4), 0..12)
            .prop_map(|s| s.into_iter().map(|(d, h, n)| SequenceKey::new(2014, 10, d + 1, h, n)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scan_after_equals_filtered_full_scan(keys in tree_keys(), pick in 0usize..16) {
            let dir = tempfile::tempdir().unwrap();
            let g: Graph = [iri_triple("s", "p", Term::iri("o"))].into_iter().collect();
            for k in &keys {
                publish_changeset(dir.path(), *k, &Changeset::new(Graph::new(), g.clone()), false).unwrap();
            }
            let full = scan_changesets(dir.path(), None).unwrap().refs;
            prop_assert_eq!(full.iter().map(|r| r.key).collect::<Vec<_>>(), keys.clone());
            let after = keys.get(pick).copied().unwrap_or(SequenceKey::new(2014, 10, 2, 1, 2));
            let partial = scan_changesets(dir.path(), Some(after)).unwrap().refs;
            let expected: Vec<_> = full.into_iter().filter(|r| r.key > after).collect();
            prop_assert_eq!(partial, expected);
        }

        #[test]
        fn interleaved_publish_and_scan_delivers_each_once(keys in tree_keys(), split in 0usize..12) {
            let dir = tempfile::tempdir().unwrap();
            let cs = Changeset::default();
            let split = split.min(keys.len());
            let mut seen = Vec::new();
            let mut cp: Option<SequenceKey> = None;
            for batch in [&keys[..split], &keys[split..]] {
                for k in batch {
                    publish_changeset(dir.path(), *k, &cs, false).unwrap();
                }
                for r in scan_changesets(dir.path(), cp).unwrap().refs {
                    seen.push(r.key);
                    cp = Some(r.key);
                }
            }
            prop_assert_eq!(seen, keys);
        }
    }
}
