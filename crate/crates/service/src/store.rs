//! On-disk persistence: an append-only JSONL event log plus periodic
//! snapshots.
//!
//! `events.jsonl` holds one `{"seq": n, "event": {..}}` record per line.
//! `snapshot.json` holds the state after event `seq`; it is written to a
//! temporary file, fsynced and renamed into place, after which the log is
//! truncated. Events at or below the snapshot's seq are skipped on replay, so
//! a crash between the rename and the truncation is harmless.
//!
//! A final line without a newline, or one that fails to parse, is a torn
//! write from a crash and is cut off. A corrupt line anywhere else is an
//! error.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::settings::{PersistedSettings, Settings};
use crate::state::{Event, ServiceState};

const LOG_FILE: &str = "events.jsonl";
const SNAPSHOT_FILE: &str = "snapshot.json";
const SETTINGS_FILE: &str = "settings.json";

#[derive(Serialize, Deserialize)]
struct LogRecord<E> {
    seq: u64,
    event: E,
}

#[derive(Deserialize)]
struct Snapshot {
    seq: u64,
    state: ServiceState,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    seq: u64,
    state: &'a ServiceState,
}

/// What [`Store::open`] found on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Recovery {
    pub snapshot_seq: u64,
    pub replayed: usize,
    /// Bytes cut from a torn final record.
    pub truncated_bytes: u64,
}

pub struct Store {
    dir: PathBuf,
    log: File,
    since_snapshot: usize,
}

fn storage(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

fn sync_dir(dir: &Path) -> Result<(), ServiceError> {
    File::open(dir)
        .and_then(|d| d.sync_all())
        .map_err(|e| storage(dir, e))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), ServiceError> {
    let path = dir.join(name);
    let tmp = dir.join(format!("{name}.tmp"));
    let mut f = File::create(&tmp).map_err(|e| storage(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| storage(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| storage(&path, e))?;
    sync_dir(dir)
}

/// Settings recorded by the first open of `dir`, if any.
pub fn load_settings(dir: &Path) -> Result<Option<PersistedSettings>, ServiceError> {
    let path = dir.join(SETTINGS_FILE);
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| storage(&path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(storage(&path, e)),
    }
}

fn check_settings(dir: &Path, settings: &Settings) -> Result<(), ServiceError> {
    let want = settings.persisted();
    match load_settings(dir)? {
        Some(have) if have == want => Ok(()),
        Some(have) => {
            let mut diff = Vec::new();
            if have.qualification_threshold != want.qualification_threshold {
                diff.push(format!(
                    "qualification_threshold {} != {}",
                    want.qualification_threshold, have.qualification_threshold
                ));
            }
            if have.min_annotations_per_hit != want.min_annotations_per_hit {
                diff.push(format!(
                    "min_annotations_per_hit {} != {}",
                    want.min_annotations_per_hit, have.min_annotations_per_hit
                ));
            }
            if have.seed != want.seed {
                diff.push(format!("seed {} != {}", want.seed, have.seed));
            }
            if have.qualification != want.qualification {
                diff.push("qualification hit differs".into());
            }
            Err(ServiceError::Storage(format!(
                "{} was created with other settings: {}",
                dir.display(),
                diff.join(", ")
            )))
        }
        None => {
            let bytes = serde_json::to_vec_pretty(&want).map_err(|e| storage(dir, e))?;
            write_atomic(dir, SETTINGS_FILE, &bytes)
        }
    }
}

impl Store {
    /// Opens (or creates) the store in `dir` and rebuilds the state.
    pub fn open(
        dir: &Path,
        settings: &Settings,
    ) -> Result<(Store, ServiceState, Recovery), ServiceError> {
        fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        check_settings(dir, settings)?;
        let log_path = dir.join(LOG_FILE);
        let mut log = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| storage(&log_path, e))?;
        let (state, recovery, good_end) = replay(dir, Some(&log), settings)?;
        let len = log.metadata().map_err(|e| storage(&log_path, e))?.len();
        if len > good_end {
            log.set_len(good_end).map_err(|e| storage(&log_path, e))?;
            log.sync_all().map_err(|e| storage(&log_path, e))?;
        }
        log.seek(SeekFrom::End(0))
            .map_err(|e| storage(&log_path, e))?;
        let store = Store {
            dir: dir.to_path_buf(),
            log,
            since_snapshot: recovery.replayed,
        };
        Ok((store, state, recovery))
    }

    /// Appends events numbered from `first_seq` and fsyncs the log.
    pub fn append<'a>(
        &mut self,
        first_seq: u64,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<(), ServiceError> {
        let path = self.dir.join(LOG_FILE);
        let mut buf = Vec::new();
        let mut n = 0;
        for (i, event) in events.into_iter().enumerate() {
            serde_json::to_writer(
                &mut buf,
                &LogRecord {
                    seq: first_seq + i as u64,
                    event,
                },
            )
            .map_err(|e| storage(&path, e))?;
            buf.push(b'\n');
            n += 1;
        }
        if n == 0 {
            return Ok(());
        }
        self.log.write_all(&buf).map_err(|e| storage(&path, e))?;
        self.log.sync_data().map_err(|e| storage(&path, e))?;
        self.since_snapshot += n;
        Ok(())
    }

    pub fn events_since_snapshot(&self) -> usize {
        self.since_snapshot
    }

    /// Writes a snapshot of `state` and truncates the log.
    pub fn snapshot(&mut self, state: &ServiceState) -> Result<(), ServiceError> {
        let bytes = serde_json::to_vec(&SnapshotRef {
            seq: state.seq,
            state,
        })
        .map_err(|e| storage(&self.dir, e))?;
        write_atomic(&self.dir, SNAPSHOT_FILE, &bytes)?;
        let log_path = self.dir.join(LOG_FILE);
        self.log.set_len(0).map_err(|e| storage(&log_path, e))?;
        self.log.sync_all().map_err(|e| storage(&log_path, e))?;
        self.since_snapshot = 0;
        Ok(())
    }
}

/// Rebuilds the state in `dir` without modifying any file, using the
/// settings the directory was created with. A torn tail is ignored.
pub fn read_only(
    dir: &Path,
    base: Settings,
) -> Result<(ServiceState, Settings, Recovery), ServiceError> {
    let persisted = load_settings(dir)?.ok_or_else(|| {
        ServiceError::Storage(format!("{} is not a service data directory", dir.display()))
    })?;
    let settings = base.with_persisted(persisted);
    let log_path = dir.join(LOG_FILE);
    let log = match File::open(&log_path) {
        Ok(log) => Some(log),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(storage(&log_path, e)),
    };
    let (state, recovery, _) = replay(dir, log.as_ref(), &settings)?;
    Ok((state, settings, recovery))
}

/// Loads the snapshot and replays the log after it. Returns the byte offset
/// after the last intact record.
fn replay(
    dir: &Path,
    log: Option<&File>,
    settings: &Settings,
) -> Result<(ServiceState, Recovery, u64), ServiceError> {
    let mut recovery = Recovery::default();
    let snap_path = dir.join(SNAPSHOT_FILE);
    let mut state = match fs::read(&snap_path) {
        Ok(bytes) => {
            let snap: Snapshot =
                serde_json::from_slice(&bytes).map_err(|e| storage(&snap_path, e))?;
            if snap.state.seq != snap.seq {
                return Err(storage(&snap_path, "snapshot seq does not match its state"));
            }
            recovery.snapshot_seq = snap.seq;
            snap.state
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => ServiceState::default(),
        Err(e) => return Err(storage(&snap_path, e)),
    };

    let Some(log) = log else {
        return Ok((state, recovery, 0));
    };
    let log_path = dir.join(LOG_FILE);
    let mut reader = BufReader::new(log);
    let mut line = Vec::new();
    let mut good_end = 0u64;
    let mut lineno = 0usize;
    loop {
        line.clear();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| storage(&log_path, e))?;
        if n == 0 {
            break;
        }
        lineno += 1;
        let complete = line.last() == Some(&b'\n');
        match serde_json::from_slice::<LogRecord<Event>>(&line) {
            Ok(rec) if complete => {
                good_end += n as u64;
                if rec.seq <= state.seq {
                    continue;
                }
                if rec.seq != state.seq + 1 {
                    return Err(storage(
                        &log_path,
                        format!("line {lineno}: seq {} follows {}", rec.seq, state.seq),
                    ));
                }
                state.apply(settings, &rec.event);
                recovery.replayed += 1;
            }
            result => {
                // Only the very last record may be damaged.
                let rest = reader.fill_buf().map_err(|e| storage(&log_path, e))?;
                if !rest.is_empty() {
                    let why = result
                        .err()
                        .map_or("missing newline".to_string(), |e| e.to_string());
                    return Err(storage(
                        &log_path,
                        format!("corrupt record on line {lineno}: {why}"),
                    ));
                }
                break;
            }
        }
    }
    drop(reader);
    let len = log.metadata().map_err(|e| storage(&log_path, e))?.len();
    recovery.truncated_bytes = len.saturating_sub(good_end);
    Ok((state, recovery, good_end))
}
