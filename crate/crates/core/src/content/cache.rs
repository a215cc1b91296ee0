//! Session content cache keyed by `(exhibit_id, level)`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, PoisonError, RwLock};

use super::{ContentError, ContentRecord, Provenance};
use crate::state::EngagementState;

type Slots = [Option<ContentRecord>; 5];

/// Shared cache: many readers, one writer at a time.
///
/// Cloning yields another handle to the same map.
#[derive(Debug, Clone, Default)]
pub struct ContentCache {
    inner: Arc<RwLock<HashMap<String, Slots>>>,
}

impl ContentCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, exhibit_id: &str, level: EngagementState) -> Option<ContentRecord> {
        let map = self.inner.read().unwrap_or_else(PoisonError::into_inner);
        map.get(exhibit_id).and_then(|slots| slots[level.index()].clone())
    }

    pub fn contains(&self, exhibit_id: &str, level: EngagementState) -> bool {
        let map = self.inner.read().unwrap_or_else(PoisonError::into_inner);
        map.get(exhibit_id).is_some_and(|slots| slots[level.index()].is_some())
    }

    pub fn insert(&self, record: ContentRecord) {
        let mut map = self.inner.write().unwrap_or_else(PoisonError::into_inner);
        let slot = record.level.index();
        let key = record.exhibit_id.clone();
        map.entry(key).or_default()[slot] = Some(record);
    }

    pub fn len(&self) -> usize {
        let map = self.inner.read().unwrap_or_else(PoisonError::into_inner);
        map.values().flatten().filter(|r| r.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads records from a line-delimited file, replacing same-key entries.
    pub fn load<R: BufRead>(&self, reader: R) -> Result<usize, ContentError> {
        let mut loaded = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ContentRecord = serde_json::from_str(&line).map_err(|e| ContentError::CacheFile {
                line: i + 1,
                message: e.to_string(),
            })?;
            if rec.word_count != super::word_count(&rec.text) || rec.word_count == 0 {
                return Err(ContentError::CacheFile {
                    line: i + 1,
                    message: "word_count does not match text".into(),
                });
            }
            self.insert(rec);
            loaded += 1;
        }
        Ok(loaded)
    }

    /// Writes generated records sorted by key. Static fallbacks are session-only.
    pub fn save<W: Write>(&self, mut w: W) -> Result<usize, ContentError> {
        let map = self.inner.read().unwrap_or_else(PoisonError::into_inner);
        let mut records: Vec<&ContentRecord> = map
            .values()
            .flatten()
            .flatten()
            .filter(|r| r.provenance != Provenance::StaticFallback)
            .collect();
        records.sort_by(|a, b| (&a.exhibit_id, a.level).cmp(&(&b.exhibit_id, b.level)));
        for r in &records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(records.len())
    }
}
