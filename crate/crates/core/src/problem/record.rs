//! JSONL corpus format.
//!
//! One record per line with keys `id`, `informal`, `formal`, `answer_name`,
//! `answer_type`, `ground_truth`, `solution` and `metadata{source, domain,
//! difficulty, created_after, answer_type_tag}`. Unknown keys survive a
//! parse/serialize cycle and are written after the known ones.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use super::{AnswerConstructionTask, AnswerShape, DatasetRecord, ProblemMetadata, TaskError};

const TOP_KEYS: [&str; 8] = [
    "id",
    "informal",
    "formal",
    "answer_name",
    "answer_type",
    "ground_truth",
    "solution",
    "metadata",
];
const META_KEYS: [&str; 6] = ["source", "domain", "difficulty", "created_after", "answer_type_tag", "shape"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` must be {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("formal statement: {0}")]
    Task(#[from] TaskError),
}

impl SchemaError {
    /// The offending field, when the error is about one.
    pub fn field(&self) -> Option<&str> {
        match self {
            SchemaError::MissingField(f) => Some(f),
            SchemaError::WrongType { field, .. } | SchemaError::InvalidValue { field, .. } => Some(field),
            SchemaError::Task(_) => Some("formal"),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Line {
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        #[source]
        source: SchemaError,
    },
}

fn required_str(obj: &Map<String, Value>, key: &str, prefix: &str) -> Result<String, SchemaError> {
    let field = format!("{prefix}{key}");
    match obj.get(key) {
        None => Err(SchemaError::MissingField(field)),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(SchemaError::WrongType {
            field,
            expected: "a string",
        }),
    }
}

fn nullable_str(obj: &Map<String, Value>, key: &str, prefix: &str) -> Result<Option<String>, SchemaError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(SchemaError::WrongType {
            field: format!("{prefix}{key}"),
            expected: "a string or null",
        }),
    }
}

fn leftovers(obj: &Map<String, Value>, known: &[&str]) -> Map<String, Value> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

/// Parse one JSONL line.
pub fn parse_record(line: &str) -> Result<DatasetRecord, SchemaError> {
    let value: Value = serde_json::from_str(line).map_err(|e| SchemaError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(SchemaError::NotAnObject)?;

    let id = required_str(obj, "id", "")?;
    let informal = required_str(obj, "informal", "")?;
    let formal = required_str(obj, "formal", "")?;
    let answer_name = required_str(obj, "answer_name", "")?;
    let answer_type = required_str(obj, "answer_type", "")?;
    let ground_truth = nullable_str(obj, "ground_truth", "")?;
    let solution = nullable_str(obj, "solution", "")?;

    let meta = match obj.get("metadata") {
        None => return Err(SchemaError::MissingField("metadata".into())),
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(SchemaError::WrongType {
                field: "metadata".into(),
                expected: "an object",
            })
        }
    };
    let created_after = match nullable_str(meta, "created_after", "metadata.")? {
        None => None,
        Some(s) => Some(chrono::NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(|e| SchemaError::InvalidValue {
            field: "metadata.created_after".into(),
            reason: format!("`{s}` is not a YYYY-MM-DD date ({e})"),
        })?),
    };
    let shape_override = match nullable_str(meta, "shape", "metadata.")? {
        None => None,
        Some(s) => Some(AnswerShape::parse(&s).ok_or_else(|| SchemaError::InvalidValue {
            field: "metadata.shape".into(),
            reason: format!("unknown answer shape `{s}`"),
        })?),
    };
    let metadata = ProblemMetadata {
        source: required_str(meta, "source", "metadata.")?,
        domain_tag: required_str(meta, "domain", "metadata.")?,
        difficulty: required_str(meta, "difficulty", "metadata.")?,
        created_after,
        answer_type_tag: required_str(meta, "answer_type_tag", "metadata.")?,
        shape_override,
    };

    let task = AnswerConstructionTask::new(id, informal, formal, answer_name, answer_type, ground_truth, metadata)?;
    Ok(DatasetRecord {
        task,
        informal_solution: solution,
        extra: leftovers(obj, &TOP_KEYS),
        extra_metadata: leftovers(meta, &META_KEYS),
    })
}

fn opt(s: &Option<String>) -> Value {
    s.as_ref().map_or(Value::Null, |s| Value::String(s.clone()))
}

/// Serialize a record as one JSONL line (no trailing newline).
pub fn serialize_record(record: &DatasetRecord) -> String {
    let task = &record.task;
    let m = &task.metadata;
    let mut meta = Map::new();
    meta.insert("source".into(), m.source.clone().into());
    meta.insert("domain".into(), m.domain_tag.clone().into());
    meta.insert("difficulty".into(), m.difficulty.clone().into());
    meta.insert(
        "created_after".into(),
        m.created_after
            .map_or(Value::Null, |d| Value::String(d.format("%Y-%m-%d").to_string())),
    );
    meta.insert("answer_type_tag".into(), m.answer_type_tag.clone().into());
    if let Some(shape) = m.shape_override {
        meta.insert("shape".into(), shape.name().into());
    }
    meta.extend(record.extra_metadata.clone());

    let mut obj = Map::new();
    obj.insert("id".into(), task.id.clone().into());
    obj.insert("informal".into(), task.informal_statement.clone().into());
    obj.insert("formal".into(), task.formal_statement.clone().into());
    obj.insert("answer_name".into(), task.answer_name.clone().into());
    obj.insert("answer_type".into(), task.answer_type.clone().into());
    obj.insert("ground_truth".into(), opt(&task.ground_truth));
    obj.insert("solution".into(), opt(&record.informal_solution));
    obj.insert("metadata".into(), Value::Object(meta));
    obj.extend(record.extra.clone());
    Value::Object(obj).to_string()
}

/// Read a corpus, reporting the first bad line with its 1-based number.
/// Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Vec<DatasetRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_record(l).map_err(|source| CorpusError::Line {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn save_corpus(records: &[DatasetRecord], path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for r in records {
        writeln!(file, "{}", serialize_record(r)).map_err(io_err)?;
    }
    file.flush().map_err(io_err)
}
