//! Labeled query datasets: JSONL/CSV ingestion and stratified splitting.
//!
//! Both formats use the fields `id`, `text`, `label` and optional `subject`.

mod split;

pub use split::{split_sizes, stratified_split, stratified_split_indices, Split, SplitSpec, MIN_CLASS_SIZE};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Query, TemplateId};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown template labels: {}", format_rows(.0))]
    UnknownLabels(Vec<(usize, String)>),
    #[error("stratification: {0}")]
    Stratification(String),
    #[error("invalid split spec: {0}")]
    Spec(String),
}

fn format_rows(rows: &[(usize, String)]) -> String {
    rows.iter()
        .map(|(r, l)| format!("row {r} `{l}`"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub query: Query,
    pub label: TemplateId,
    pub subject: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    /// `.csv` is CSV, anything else JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Jsonl,
        }
    }
}

/// Loaded rows plus non-fatal warnings (renamed duplicate ids).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub items: Vec<LabeledQuery>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    #[serde(default)]
    id: Option<String>,
    text: String,
    label: String,
    #[serde(default)]
    subject: Option<String>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<LoadedDataset, DatasetError> {
    let file = File::open(path)?;
    let rows = match format {
        DatasetFormat::Jsonl => read_jsonl(BufReader::new(file))?,
        DatasetFormat::Csv => read_csv(file)?,
    };
    build(rows)
}

/// Parses JSON-lines text; useful for embedded fixtures.
pub fn parse_jsonl(text: &str) -> Result<LoadedDataset, DatasetError> {
    build(read_jsonl(text.as_bytes())?)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<(usize, Row)>, DatasetError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

fn read_csv(reader: impl std::io::Read) -> Result<Vec<(usize, Row)>, DatasetError> {
    let mut rows = Vec::new();
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    for rec in rdr.deserialize::<Row>() {
        let row = rec.map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        // Header is line 1, so data rows start at 2.
        rows.push((rows.len() + 2, row));
    }
    Ok(rows)
}

fn build(rows: Vec<(usize, Row)>) -> Result<LoadedDataset, DatasetError> {
    let bad: Vec<(usize, String)> = rows
        .iter()
        .filter(|(_, r)| TemplateId::parse_known(r.label.trim()).is_none())
        .map(|(line, r)| (*line, r.label.clone()))
        .collect();
    if !bad.is_empty() {
        return Err(DatasetError::UnknownLabels(bad));
    }
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut items = Vec::with_capacity(rows.len());
    let mut warnings = Vec::new();
    for (line, row) in rows {
        let base = row.id.filter(|s| !s.trim().is_empty()).unwrap_or_else(|| format!("row-{line}"));
        let n = seen.entry(base.clone()).or_insert(0);
        *n += 1;
        let id = if *n == 1 {
            base
        } else {
            let renamed = format!("{base}#{n}");
            let msg = format!("line {line}: duplicate id `{base}` renamed to `{renamed}`");
            tracing::warn!("{msg}");
            warnings.push(msg);
            renamed
        };
        let query = Query::new(id, row.text).map_err(|e| DatasetError::Parse {
            line,
            message: e.to_string(),
        })?;
        items.push(LabeledQuery {
            query,
            label: TemplateId::parse_known(row.label.trim()).expect("checked above"),
            subject: row.subject,
        });
    }
    Ok(LoadedDataset { items, warnings })
}

/// Writes items in the given format.
pub fn write_dataset(items: &[LabeledQuery], path: impl AsRef<Path>, format: DatasetFormat) -> Result<(), DatasetError> {
    let rows = items.iter().map(|q| Row {
        id: Some(q.query.id.clone()),
        text: q.query.text.clone(),
        label: q.label.to_string(),
        subject: q.subject.clone(),
    });
    let file = File::create(path)?;
    match format {
        DatasetFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(file);
            for row in rows {
                serde_json::to_writer(&mut w, &row).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        DatasetFormat::Csv => {
            let mut w = csv::Writer::from_writer(file);
            for row in rows {
                w.serialize(row).map_err(std::io::Error::other)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Label counts in canonical order.
pub fn label_histogram(items: &[LabeledQuery]) -> [usize; TemplateId::K] {
    let mut out = [0; TemplateId::K];
    for q in items {
        out[q.label.canonical_index().expect("known labels only")] += 1;
    }
    out
}
