//! Documents, authors and their associations.
//!
//! Both input files are UTF-8, one record per line, tab-delimited, with tabs,
//! newlines and backslashes inside text fields escaped as `\t`, `\n`, `\\`.
//!
//! ```text
//! documents: doc_id <TAB> title <TAB> body <TAB> author_ids (a;b;c) <TAB> doc_kind
//! authors:   author_id <TAB> display_name
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::text::{escape_field, normalize, unescape_field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DocKind {
    Thesis,
    Paper,
    ProfilePage,
    CoursePage,
    Other,
}

impl DocKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DocKind::Thesis => "thesis",
            DocKind::Paper => "paper",
            DocKind::ProfilePage => "profile_page",
            DocKind::CoursePage => "course_page",
            DocKind::Other => "other",
        }
    }
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DocKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "thesis" => Ok(DocKind::Thesis),
            "paper" => Ok(DocKind::Paper),
            "profile_page" => Ok(DocKind::ProfilePage),
            "course_page" => Ok(DocKind::CoursePage),
            "other" => Ok(DocKind::Other),
            other => Err(format!("unknown doc_kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub author_ids: Vec<String>,
    pub doc_kind: DocKind,
}

impl Document {
    /// Title and body joined; this is what gets indexed and annotated.
    pub fn full_text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{} {}", self.title, self.body)
        }
    }

    pub fn to_record(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            escape_field(&self.doc_id),
            escape_field(&self.title),
            escape_field(&self.body),
            self.author_ids
                .iter()
                .map(|a| escape_field(a))
                .collect::<Vec<_>>()
                .join(";"),
            self.doc_kind
        )
    }

    /// Parses and normalizes one documents-file line. `Err` carries the reason.
    pub fn parse_record(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
        }
        let unescape =
            |f: &str, name: &str| unescape_field(f).ok_or_else(|| format!("bad escape in {name}"));
        let doc_id = unescape(fields[0], "doc_id")?.trim().to_string();
        if doc_id.is_empty() {
            return Err("empty doc_id".into());
        }
        let title = normalize(&unescape(fields[1], "title")?);
        let body = normalize(&unescape(fields[2], "body")?);
        if body.is_empty() {
            return Err(format!("document `{doc_id}` has an empty body"));
        }
        let mut author_ids = Vec::new();
        for raw in fields[3].split(';') {
            let id = unescape(raw, "author_ids")?.trim().to_string();
            if !id.is_empty() && !author_ids.contains(&id) {
                author_ids.push(id);
            }
        }
        let doc_kind = fields[4].trim().parse::<DocKind>()?;
        Ok(Document {
            doc_id,
            title,
            body,
            author_ids,
            doc_kind,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Author {
    pub author_id: String,
    pub display_name: String,
}

impl Author {
    pub fn to_record(&self) -> String {
        format!(
            "{}\t{}",
            escape_field(&self.author_id),
            escape_field(&self.display_name)
        )
    }

    pub fn parse_record(line: &str) -> std::result::Result<Self, String> {
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| "expected author_id<TAB>display_name".to_string())?;
        if name.contains('\t') {
            return Err("expected exactly 2 tab-separated fields".into());
        }
        let author_id = unescape_field(id)
            .ok_or("bad escape in author_id")?
            .trim()
            .to_string();
        if author_id.is_empty() {
            return Err("empty author_id".into());
        }
        let display_name = normalize(&unescape_field(name).ok_or("bad escape in display_name")?);
        Ok(Author {
            author_id,
            display_name,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub n_documents: usize,
    pub n_authors: usize,
    pub n_associations: usize,
    pub docs_with_author: usize,
}

/// In-memory corpus. Documents keep ingestion order; per-author document
/// lists are ordered by `doc_id`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    authors: Vec<Author>,
    doc_index: HashMap<String, usize>,
    author_index: HashMap<String, usize>,
    author_docs: Vec<Vec<usize>>,
}

impl Corpus {
    /// Validates uniqueness and author references, then builds the lookups.
    pub fn new(authors: Vec<Author>, documents: Vec<Document>) -> Result<Self> {
        let mut author_index = HashMap::with_capacity(authors.len());
        for (i, a) in authors.iter().enumerate() {
            if author_index.insert(a.author_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "author",
                    id: a.author_id.clone(),
                });
            }
        }
        let mut doc_index = HashMap::with_capacity(documents.len());
        let mut author_docs = vec![Vec::new(); authors.len()];
        for (i, d) in documents.iter().enumerate() {
            if doc_index.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "document",
                    id: d.doc_id.clone(),
                });
            }
            for a in &d.author_ids {
                let ai = *author_index
                    .get(a)
                    .ok_or_else(|| Error::UnknownAuthorReference {
                        doc_id: d.doc_id.clone(),
                        author_id: a.clone(),
                    })?;
                author_docs[ai].push(i);
            }
        }
        for list in &mut author_docs {
            list.sort_by(|&x, &y| documents[x].doc_id.cmp(&documents[y].doc_id));
        }
        Ok(Corpus {
            documents,
            authors,
            doc_index,
            author_index,
            author_docs,
        })
    }

    /// Reads both record files. Parsing stops at the first malformed line.
    pub fn from_files(documents_path: &Path, authors_path: &Path) -> Result<Self> {
        let authors = read_records(authors_path, Author::parse_record)?;
        let documents = read_records(documents_path, Document::parse_record)?;
        Corpus::new(authors, documents)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn authors(&self) -> &[Author] {
        &self.authors
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn author(&self, author_id: &str) -> Option<&Author> {
        self.author_index.get(author_id).map(|&i| &self.authors[i])
    }

    /// The set D_a, ordered by `doc_id`.
    pub fn documents_of(&self, author_id: &str) -> Result<Vec<&Document>> {
        let ai = *self
            .author_index
            .get(author_id)
            .ok_or_else(|| Error::not_found("author", author_id))?;
        Ok(self.author_docs[ai]
            .iter()
            .map(|&i| &self.documents[i])
            .collect())
    }

    /// |D_a|, or 0 for unknown authors.
    pub fn doc_count(&self, author_id: &str) -> usize {
        self.author_index
            .get(author_id)
            .map_or(0, |&i| self.author_docs[i].len())
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            n_documents: self.documents.len(),
            n_authors: self.authors.len(),
            n_associations: self.documents.iter().map(|d| d.author_ids.len()).sum(),
            docs_with_author: self
                .documents
                .iter()
                .filter(|d| !d.author_ids.is_empty())
                .count(),
        }
    }

    /// `author_id -> doc_ids` for every author, in `author_id` order.
    pub fn associations(&self) -> BTreeMap<&str, Vec<&str>> {
        self.authors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                (
                    a.author_id.as_str(),
                    self.author_docs[i]
                        .iter()
                        .map(|&d| self.documents[d].doc_id.as_str())
                        .collect(),
                )
            })
            .collect()
    }
}

pub(crate) fn read_records<T>(
    path: &Path,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(line).map_err(|reason| Error::parse(&name, i + 1, reason))?);
    }
    Ok(out)
}
