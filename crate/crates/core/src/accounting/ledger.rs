use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use parking_lot::{Mutex, RwLock};

use super::{savings_vs_baseline, AccountingError, SavingsReport, UsageRecord};

/// Append-only usage ledger: an in-memory snapshot plus an optional
/// JSON-lines file. Appends go through one writer lock.
#[derive(Debug, Default)]
pub struct UsageLedger {
    records: RwLock<Vec<UsageRecord>>,
    sink: Option<Mutex<BufWriter<File>>>,
}

impl UsageLedger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path` for appending, loading any records already there.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AccountingError> {
        let path = path.as_ref();
        let existing = if path.exists() { read_ledger(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            records: RwLock::new(existing),
            sink: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn append(&self, record: UsageRecord) -> Result<(), AccountingError> {
        record.validate()?;
        if let Some(sink) = &self.sink {
            let mut w = sink.lock();
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
            w.flush()?;
            // Pushed under the writer lock so the snapshot matches file order.
            self.records.write().push(record);
            return Ok(());
        }
        self.records.write().push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<UsageRecord> {
        self.records.read().clone()
    }

    pub fn report(&self) -> Result<SavingsReport, AccountingError> {
        savings_vs_baseline(&self.records.read())
    }
}

/// Reads a JSON-lines ledger; blank lines are skipped.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<Vec<UsageRecord>, AccountingError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: UsageRecord = serde_json::from_str(&line).map_err(|e| AccountingError::Ledger {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}
