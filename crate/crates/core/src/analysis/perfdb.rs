//! Append-only, file-backed store of perf records.
//!
//! Layout: `records/<job_id>.json` holds one record each, `index.json` the
//! searchable summary of all of them. Both are written to a temp file and
//! renamed into place, so readers always see a complete index. The index can
//! be rebuilt from the record files at any time.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::PerfRecord;
use crate::modelgen::ModelFamily;

const INDEX_FILE: &str = "index.json";
const RECORDS_DIR: &str = "records";
const INDEX_SCHEMA_VERSION: u32 = 1;

/// Index entry for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub job_id: String,
    pub job_name: String,
    pub model_id: String,
    pub model_family: ModelFamily,
    pub hardware_id: Option<String>,
    pub backend: String,
    /// Unix seconds at which the run finished.
    pub finished_at: f64,
    pub content_hash: String,
}

impl IndexEntry {
    fn of(record: &PerfRecord) -> Self {
        IndexEntry {
            job_id: record.job_id.clone(),
            job_name: record.job_name.clone(),
            model_id: record.env_log.model.model_id.clone(),
            model_family: record.env_log.model.family,
            hardware_id: record.hardware_id().map(str::to_string),
            backend: record.env_log.backend.kind.clone(),
            finished_at: record.env_log.finished_at,
            content_hash: record.content_hash(),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct IndexFile {
    schema_version: u32,
    entries: Vec<IndexEntry>,
}

/// Filter for [`PerfDb::query`]; `None` matches anything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordQuery {
    pub model_family: Option<ModelFamily>,
    pub hardware: Option<String>,
    pub backend: Option<String>,
    /// Unix seconds; only records finished at or after this.
    pub since: Option<f64>,
    pub job_name_prefix: Option<String>,
}

impl RecordQuery {
    pub fn matches(&self, e: &IndexEntry) -> bool {
        self.model_family.is_none_or(|f| f == e.model_family)
            && self.hardware.as_ref().is_none_or(|h| e.hardware_id.as_ref() == Some(h))
            && self.backend.as_ref().is_none_or(|b| *b == e.backend)
            && self.since.is_none_or(|s| e.finished_at >= s)
            && self.job_name_prefix.as_ref().is_none_or(|p| e.job_name.starts_with(p.as_str()))
    }
}

#[derive(Debug)]
pub struct PerfDb {
    root: PathBuf,
    /// Entries sorted by job id; guarded so appends are serialised.
    index: Mutex<Vec<IndexEntry>>,
}

impl PerfDb {
    /// Opens or creates a store, rebuilding the index if it is missing.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let records = root.join(RECORDS_DIR);
        std::fs::create_dir_all(&records).map_err(|e| Error::io(&records, e))?;
        let index_path = root.join(INDEX_FILE);
        let entries = if index_path.exists() {
            let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
            let file: IndexFile = serde_json::from_str(&text)?;
            file.entries
        } else {
            scan(&records)?
        };
        let db = PerfDb {
            root,
            index: Mutex::new(entries),
        };
        if !index_path.exists() {
            db.write_index(&db.lock())?;
        }
        Ok(db)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Vec<IndexEntry>> {
        self.index.lock().expect("perfdb lock poisoned")
    }

    fn record_path(&self, job_id: &str) -> PathBuf {
        self.root.join(RECORDS_DIR).join(format!("{job_id}.json"))
    }

    /// Stores a new record. Existing job ids are never overwritten.
    pub fn append(&self, record: &PerfRecord) -> Result<()> {
        if record.job_id.is_empty() || record.job_id.contains(['/', '\\']) || record.job_id.starts_with('.') {
            return Err(Error::validation("job_id", format!("`{}` is not a valid record id", record.job_id)));
        }
        let mut index = self.lock();
        let path = self.record_path(&record.job_id);
        if path.exists() || index.iter().any(|e| e.job_id == record.job_id) {
            return Err(Error::Duplicate {
                kind: "perf record",
                id: record.job_id.clone(),
            });
        }
        write_atomic(&path, &serde_json::to_vec_pretty(record)?)?;
        let entry = IndexEntry::of(record);
        let pos = index.partition_point(|e| e.job_id < entry.job_id);
        index.insert(pos, entry);
        self.write_index(&index)
    }

    pub fn get(&self, job_id: &str) -> Result<PerfRecord> {
        let path = self.record_path(job_id);
        if !path.exists() {
            return Err(Error::NotFound {
                kind: "perf record",
                id: job_id.to_string(),
            });
        }
        read_record(&path)
    }

    pub fn entries(&self) -> Vec<IndexEntry> {
        self.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn query(&self, q: &RecordQuery) -> Vec<IndexEntry> {
        self.lock().iter().filter(|e| q.matches(e)).cloned().collect()
    }

    /// Full records matching `q`, ordered by job id.
    pub fn load(&self, q: &RecordQuery) -> Result<Vec<PerfRecord>> {
        self.query(q).iter().map(|e| self.get(&e.job_id)).collect()
    }

    /// Rescans the record files and rewrites the index.
    pub fn rebuild_index(&self) -> Result<()> {
        let mut index = self.lock();
        *index = scan(&self.root.join(RECORDS_DIR))?;
        self.write_index(&index)
    }

    fn write_index(&self, entries: &[IndexEntry]) -> Result<()> {
        let file = IndexFile {
            schema_version: INDEX_SCHEMA_VERSION,
            entries: entries.to_vec(),
        };
        write_atomic(&self.root.join(INDEX_FILE), &serde_json::to_vec_pretty(&file)?)
    }
}

fn read_record(path: &Path) -> Result<PerfRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads a perf record document from any path.
pub fn read_perf_record(path: &Path) -> Result<PerfRecord> {
    read_record(path)
}

fn scan(dir: &Path) -> Result<Vec<IndexEntry>> {
    let mut entries = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            entries.push(IndexEntry::of(&read_record(&path)?));
        }
    }
    entries.sort_by(|a, b| a.job_id.cmp(&b.job_id));
    Ok(entries)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
