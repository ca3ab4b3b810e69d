//! Corpus loading, validation, and filtering.
//!
//! A corpus is a JSON Lines file, one document per line. Ground-truth
//! annotations are a CSV with header `case_id,label`.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown value \"{value}\" for field \"{field}\" at line {line} (expected one of: {expected})")]
    UnknownEnumValue {
        line: usize,
        field: String,
        value: String,
        expected: String,
    },
    #[error("invalid ISO-8601 date \"{value}\" at line {line}")]
    InvalidDate { line: usize, value: String },
    #[error("empty case_id at line {line}")]
    EmptyCaseId { line: usize },
    #[error("duplicate case_id \"{case_id}\" at lines {first_line} and {second_line}")]
    DuplicateCaseId {
        case_id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("duplicate case_id \"{case_id}\" in corpus")]
    DuplicateInsert { case_id: String },
    #[error("annotation file {path} is missing the `case_id,label` header")]
    MissingHeader { path: String },
    #[error("annotation file error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Ruling on the merits (judgment) vs. on admissibility (decision).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Judgment,
    Decision,
}

impl DocType {
    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Judgment => "judgment",
            DocType::Decision => "decision",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fr => "fr",
        }
    }
}

/// One court ruling with its metadata and outgoing citations.
///
/// `text` may be empty for citation-only stubs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub case_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub application_no: String,
    pub doc_type: DocType,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    pub cited_case_ids: Vec<String>,
    pub text: String,
}

/// Raw record as it appears on disk; enums kept as strings so that
/// invalid values can be reported with field and line context.
#[derive(Debug, Deserialize)]
struct RawRecord {
    case_id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    application_no: String,
    doc_type: String,
    language: String,
    #[serde(default)]
    importance: Option<u8>,
    #[serde(default)]
    date: Option<String>,
    cited_case_ids: Vec<String>,
    text: String,
}

/// Ordered, uniquely-keyed document collection.
///
/// Iteration order is insertion order; the index maps each case_id to its
/// position.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a document, rejecting duplicate case ids.
    pub fn push(&mut self, doc: Document) -> Result<(), CorpusError> {
        match self.index.entry(doc.case_id.clone()) {
            Entry::Occupied(_) => Err(CorpusError::DuplicateInsert {
                case_id: doc.case_id,
            }),
            Entry::Vacant(slot) => {
                slot.insert(self.documents.len());
                self.documents.push(doc);
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, case_id: &str) -> Option<&Document> {
        self.index.get(case_id).map(|&i| &self.documents[i])
    }

    pub fn position(&self, case_id: &str) -> Option<usize> {
        self.index.get(case_id).copied()
    }

    pub fn contains(&self, case_id: &str) -> bool {
        self.index.contains_key(case_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.documents.iter()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }
}

/// Ground-truth annotation set: the ids carrying one label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub label: String,
    ids: BTreeSet<String>,
}

impl LabelSet {
    pub fn new(label: impl Into<String>, ids: impl IntoIterator<Item = String>) -> Self {
        Self {
            label: label.into(),
            ids: ids.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, case_id: &str) -> bool {
        self.ids.contains(case_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.ids.iter()
    }
}

/// Corpus file formats accepted by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
}

fn parse_doc_type(value: &str, line: usize) -> Result<DocType, CorpusError> {
    match value {
        "judgment" => Ok(DocType::Judgment),
        "decision" => Ok(DocType::Decision),
        _ => Err(CorpusError::UnknownEnumValue {
            line,
            field: "doc_type".into(),
            value: value.into(),
            expected: "judgment, decision".into(),
        }),
    }
}

fn parse_language(value: &str, line: usize) -> Result<Language, CorpusError> {
    match value {
        "en" => Ok(Language::En),
        "fr" => Ok(Language::Fr),
        _ => Err(CorpusError::UnknownEnumValue {
            line,
            field: "language".into(),
            value: value.into(),
            expected: "en, fr".into(),
        }),
    }
}

/// Structural ISO-8601 (YYYY-MM-DD) check. Dates are kept as strings;
/// nothing downstream does date arithmetic.
fn validate_date(value: &str, line: usize) -> Result<(), CorpusError> {
    let shape_ok = value.len() == 10
        && value.as_bytes()[4] == b'-'
        && value.as_bytes()[7] == b'-'
        && chrono::NaiveDate::parse_from_str(value, "%Y-%m-%d").is_ok();
    if shape_ok {
        Ok(())
    } else {
        Err(CorpusError::InvalidDate {
            line,
            value: value.into(),
        })
    }
}

/// Loads a corpus from disk, one document per line.
///
/// Self-citations are dropped with a warning; duplicate entries in
/// `cited_case_ids` are collapsed. Duplicate case ids across records are an
/// error naming both line numbers.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let CorpusFormat::Jsonl = format;
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut corpus = Corpus::new();
    let mut seen_lines: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if raw.case_id.is_empty() {
            return Err(CorpusError::EmptyCaseId { line: line_no });
        }
        if let Some(&first_line) = seen_lines.get(&raw.case_id) {
            return Err(CorpusError::DuplicateCaseId {
                case_id: raw.case_id,
                first_line,
                second_line: line_no,
            });
        }
        let doc_type = parse_doc_type(&raw.doc_type, line_no)?;
        let language = parse_language(&raw.language, line_no)?;
        if let Some(date) = &raw.date {
            validate_date(date, line_no)?;
        }

        let mut cited = Vec::with_capacity(raw.cited_case_ids.len());
        let mut seen_citations = BTreeSet::new();
        for cid in raw.cited_case_ids {
            if cid == raw.case_id {
                log::warn!(
                    "line {line_no}: dropping self-citation of case {}",
                    raw.case_id
                );
                continue;
            }
            if seen_citations.insert(cid.clone()) {
                cited.push(cid);
            }
        }

        seen_lines.insert(raw.case_id.clone(), line_no);
        corpus
            .push(Document {
                case_id: raw.case_id,
                title: raw.title,
                application_no: raw.application_no,
                doc_type,
                language,
                importance: raw.importance,
                date: raw.date,
                cited_case_ids: cited,
                text: raw.text,
            })
            .expect("duplicate ids were checked above");
    }
    Ok(corpus)
}

/// Writes a corpus in the same JSON Lines format accepted by [`load_corpus`].
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = BufWriter::new(file);
    for doc in corpus.iter() {
        let line = serde_json::to_string(doc).expect("document serialization cannot fail");
        writeln!(out, "{line}").map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

/// Loads the rows of an annotation CSV carrying `label`, deduplicated.
///
/// Ids need not exist in any corpus; that is checked where the label set is
/// consumed.
pub fn load_annotations(path: impl AsRef<Path>, label: &str) -> Result<LabelSet, CorpusError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| CorpusError::Csv {
            path: path.display().to_string(),
            source,
        })?;

    let headers = reader.headers().map_err(|source| CorpusError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let header_fields: Vec<&str> = headers.iter().map(str::trim).collect();
    if header_fields != ["case_id", "label"] {
        return Err(CorpusError::MissingHeader {
            path: path.display().to_string(),
        });
    }

    let mut ids = BTreeSet::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|source| CorpusError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        rows += 1;
        if record.get(1).map(str::trim) == Some(label) {
            if let Some(id) = record.get(0) {
                ids.insert(id.trim().to_string());
            }
        }
    }
    if rows == 0 {
        log::warn!("annotation file {} has no data rows", path.display());
    } else if ids.is_empty() {
        log::warn!(
            "annotation file {} has no rows labelled \"{label}\"",
            path.display()
        );
    }
    Ok(LabelSet {
        label: label.to_string(),
        ids,
    })
}

/// Order-preserving subset; both filters are conjunctive when supplied.
pub fn filter_corpus(
    corpus: &Corpus,
    language: Option<Language>,
    doc_type: Option<DocType>,
) -> Corpus {
    let mut out = Corpus::new();
    for doc in corpus.iter() {
        let lang_ok = language.map_or(true, |l| doc.language == l);
        let type_ok = doc_type.map_or(true, |t| doc.doc_type == t);
        if lang_ok && type_ok {
            out.push(doc.clone()).expect("source corpus ids are unique");
        }
    }
    out
}

/// Case counts by language and document type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusCounts {
    pub en_judgments: usize,
    pub en_decisions: usize,
    pub fr_decisions: usize,
    pub fr_judgments: usize,
}

impl CensusCounts {
    pub fn total(&self) -> usize {
        self.en_judgments + self.en_decisions + self.fr_decisions + self.fr_judgments
    }
}

pub fn corpus_census(corpus: &Corpus) -> CensusCounts {
    let mut counts = CensusCounts {
        en_judgments: 0,
        en_decisions: 0,
        fr_decisions: 0,
        fr_judgments: 0,
    };
    for doc in corpus.iter() {
        match (doc.language, doc.doc_type) {
            (Language::En, DocType::Judgment) => counts.en_judgments += 1,
            (Language::En, DocType::Decision) => counts.en_decisions += 1,
            (Language::Fr, DocType::Decision) => counts.fr_decisions += 1,
            (Language::Fr, DocType::Judgment) => counts.fr_judgments += 1,
        }
    }
    counts
}
