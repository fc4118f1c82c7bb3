//! File-backed artifact store.
//!
//! ```text
//! <store>/
//!   FORMAT_VERSION        store format marker
//!   documents.tsv         normalized document records
//!   authors.tsv           author records
//!   associations.tsv      author_id TAB doc_id, sorted
//!   stats.txt             corpus counts
//!   dictionary.tsv        canonical copy of the linker dictionary   (index)
//!   snapshot.txt          canonical copy of the knowledge graph      (index)
//!   annotations.tsv       doc_id TAB entity TAB rho TAB surface      (index)
//!   text_index.tsv        inverted index                             (index)
//!   embeddings.txt        entity vectors                             (profile)
//!   profiles/<id>.wem     one profile per author                     (profile)
//!   profile_params.txt    parameters the author vectors were built with (profile)
//!   double_index.tsv      author TAB entity                          (profile)
//! ```
//!
//! Every file is rewritten in full by its stage, so rerunning a stage on the
//! same inputs leaves byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::{read_records, Author, Corpus, CorpusStats, Document};
use crate::doc_retrieval::TextIndex;
use crate::embeddings::EmbeddingModel;
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeGraph;
use crate::linking::{AnnotationSet, LinkerDictionary};
use crate::wem::{DoubleIndex, WemProfile};

pub const FORMAT_VERSION: &str = "expertfind-store 1";

pub const STAGE_INGEST: &str = "index build";
pub const STAGE_PROFILES: &str = "profile build";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// Profile file name for an author id: ASCII alphanumerics, `-`, `_` and `.`
/// are kept, every other byte becomes `%XX`.
pub fn profile_file_name(author_id: &str) -> String {
    let mut out = String::new();
    for b in author_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || (b == b'.' && !out.is_empty()) {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out.push_str(".wem");
    out
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn profile_path(&self, author_id: &str) -> PathBuf {
        self.root.join("profiles").join(profile_file_name(author_id))
    }

    fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingStage {
                stage,
                hint: format!(
                    "`{}` not found; run `{stage}` first",
                    p.display()
                ),
            })
        }
    }

    fn check_version(&self) -> Result<()> {
        let p = self.require("FORMAT_VERSION", STAGE_INGEST)?;
        let v = read_file(&p)?;
        if v.trim() != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "store {} has format `{}`, expected `{FORMAT_VERSION}`; rebuild it",
                self.root.display(),
                v.trim()
            )));
        }
        Ok(())
    }

    /// Reads and validates the corpus files, then persists the normalized
    /// corpus. Re-ingesting identical files leaves the store unchanged.
    pub fn ingest(&self, documents_path: &Path, authors_path: &Path) -> Result<CorpusStats> {
        let corpus = Corpus::from_files(documents_path, authors_path)?;
        self.write_corpus(&corpus)
    }

    pub fn write_corpus(&self, corpus: &Corpus) -> Result<CorpusStats> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_file(&self.path("FORMAT_VERSION"), &format!("{FORMAT_VERSION}\n"))?;
        let mut docs = String::new();
        for d in corpus.documents() {
            docs.push_str(&d.to_record());
            docs.push('\n');
        }
        write_file(&self.path("documents.tsv"), &docs)?;
        let mut authors = String::new();
        for a in corpus.authors() {
            authors.push_str(&a.to_record());
            authors.push('\n');
        }
        write_file(&self.path("authors.tsv"), &authors)?;
        let mut assoc = String::new();
        for (a, ds) in corpus.associations() {
            for d in ds {
                let _ = writeln!(assoc, "{}\t{}", crate::text::escape_field(a), crate::text::escape_field(d));
            }
        }
        write_file(&self.path("associations.tsv"), &assoc)?;
        let stats = corpus.stats();
        write_file(
            &self.path("stats.txt"),
            &format!(
                "n_documents\t{}\nn_authors\t{}\nn_associations\t{}\ndocs_with_author\t{}\n",
                stats.n_documents, stats.n_authors, stats.n_associations, stats.docs_with_author
            ),
        )?;
        Ok(stats)
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        self.check_version()?;
        let docs = read_records(&self.require("documents.tsv", STAGE_INGEST)?, Document::parse_record)?;
        let authors = read_records(&self.require("authors.tsv", STAGE_INGEST)?, Author::parse_record)?;
        Corpus::new(authors, docs)
    }

    pub fn write_index(
        &self,
        corpus: &Corpus,
        dictionary: &LinkerDictionary,
        graph: &KnowledgeGraph,
        annotations: &AnnotationSet,
        text_index: &TextIndex,
    ) -> Result<()> {
        write_file(&self.path("dictionary.tsv"), &dictionary.to_text())?;
        write_file(&self.path("snapshot.txt"), &graph.to_text())?;
        write_file(&self.path("annotations.tsv"), &annotations.to_records(corpus))?;
        write_file(&self.path("text_index.tsv"), &text_index.to_text())
    }

    pub fn load_dictionary(&self) -> Result<LinkerDictionary> {
        LinkerDictionary::load(&self.require("dictionary.tsv", STAGE_INGEST)?)
    }

    pub fn load_graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::load(&self.require("snapshot.txt", STAGE_INGEST)?)
    }

    pub fn load_annotations(&self, corpus: &Corpus) -> Result<AnnotationSet> {
        AnnotationSet::load(&self.require("annotations.tsv", STAGE_INGEST)?, corpus)
    }

    pub fn load_text_index(&self) -> Result<TextIndex> {
        let p = self.require("text_index.tsv", STAGE_INGEST)?;
        TextIndex::parse(&read_file(&p)?, &p.display().to_string())
    }

    /// Writes embeddings, every profile and then the double index, which
    /// marks the stage complete.
    pub fn write_profiles(
        &self,
        embeddings: Option<&EmbeddingModel>,
        profiles: &BTreeMap<String, WemProfile>,
        double_index: &DoubleIndex,
        embed_k: usize,
    ) -> Result<()> {
        let marker = self.path("double_index.tsv");
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
        match embeddings {
            Some(m) => write_file(&self.path("embeddings.txt"), &m.to_text())?,
            None => {
                let p = self.path("embeddings.txt");
                if p.exists() {
                    fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
        let dir = self.path("profiles");
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (author, profile) in profiles {
            write_file(&self.profile_path(author), &profile.to_text())?;
        }
        write_file(&self.path("profile_params.txt"), &format!("embed_k\t{embed_k}\n"))?;
        write_file(&marker, &double_index.to_text())
    }

    /// The `embed_k` the stored author vectors were summed over.
    pub fn load_profile_embed_k(&self) -> Result<usize> {
        let p = self.require("profile_params.txt", STAGE_PROFILES)?;
        let content = read_file(&p)?;
        content
            .lines()
            .find_map(|l| l.strip_prefix("embed_k\t"))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::parse(p.display().to_string(), 1, "missing `embed_k`"))
    }

    pub fn load_embeddings(&self) -> Result<Option<EmbeddingModel>> {
        let p = self.path("embeddings.txt");
        if p.exists() {
            EmbeddingModel::load(&p).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn load_profile(&self, author_id: &str) -> Result<WemProfile> {
        let p = self.profile_path(author_id);
        if !p.exists() {
            return Err(Error::MissingStage {
                stage: STAGE_PROFILES,
                hint: format!("no profile file for `{author_id}`; run `{STAGE_PROFILES}`"),
            });
        }
        WemProfile::parse(author_id, &read_file(&p)?, &p.display().to_string())
    }

    pub fn load_double_index(&self) -> Result<DoubleIndex> {
        let p = self.require("double_index.tsv", STAGE_PROFILES)?;
        DoubleIndex::parse(&read_file(&p)?, &p.display().to_string())
    }

    pub fn has_profiles(&self) -> bool {
        self.path("double_index.tsv").exists()
    }
}
