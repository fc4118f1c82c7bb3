//! Entity linking: annotating text with knowledge-graph entities.
//!
//! The engine only needs `(entity, span, rho)` triples, so linking sits behind
//! the [`EntityLinker`] trait. [`DictionaryLinker`] is the deterministic
//! implementation shipped here: greedy longest match over a surface-form
//! dictionary, left to right, non-overlapping.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::corpus::{read_records, Corpus};
use crate::error::{Error, Result};
use crate::text::{escape_field, tokenize, tokenize_with_spans, unescape_field};

/// Default confidence filter: annotations with rho at or below it are dropped.
pub const DEFAULT_RHO_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityAnnotation {
    pub entity_id: String,
    pub surface: String,
    pub rho: f64,
}

/// Evidence that author `a` mentions entity `e`: the maximum rho over all
/// mentions in D_a and the documents D_{a,e} that mention it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthorEntityEvidence {
    pub author_id: String,
    pub entity_id: String,
    pub rho_ae: f64,
    pub doc_count: usize,
    pub doc_ids: Vec<String>,
}

pub trait EntityLinker: Send + Sync {
    fn annotate(&self, text: &str) -> Vec<EntityAnnotation>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity_id: String,
    pub score: f64,
}

/// Surface form (normalized tokens joined by one space) to candidate
/// entities, each list sorted by score descending then entity id.
#[derive(Debug, Clone, Default)]
pub struct LinkerDictionary {
    entries: HashMap<String, Vec<Candidate>>,
    max_tokens: usize,
}

impl LinkerDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, surface: &str, entity_id: &str, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "dictionary score {score} for `{surface}` outside [0,1]"
            )));
        }
        let tokens = tokenize(surface);
        if tokens.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "surface form `{surface}` has no tokens"
            )));
        }
        if entity_id.is_empty() || entity_id.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "entity id `{entity_id}` is empty or contains whitespace"
            )));
        }
        self.max_tokens = self.max_tokens.max(tokens.len());
        let list = self.entries.entry(tokens.join(" ")).or_default();
        match list.iter_mut().find(|c| c.entity_id == entity_id) {
            Some(c) => c.score = c.score.max(score),
            None => list.push(Candidate {
                entity_id: entity_id.to_string(),
                score,
            }),
        }
        list.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        Ok(())
    }

    /// Loads `surface TAB entity_id TAB score` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let rows = read_records(path, |line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(format!("expected 3 tab-separated fields, found {}", f.len()));
            }
            let surface = unescape_field(f[0]).ok_or("bad escape in surface")?;
            let score: f64 = f[2]
                .trim()
                .parse()
                .map_err(|_| format!("bad score `{}`", f[2]))?;
            Ok((surface, f[1].trim().to_string(), score))
        })?;
        let mut dict = LinkerDictionary::new();
        for (surface, entity, score) in rows {
            dict.insert(&surface, &entity, score)?;
        }
        Ok(dict)
    }

    /// Canonical form: normalized surface keys in order, every candidate on
    /// its own line. Loading it back yields the same dictionary.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            for c in &self.entries[k] {
                out.push_str(&format!("{}\t{}\t{}\n", escape_field(k), c.entity_id, c.score));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidates(&self, surface: &str) -> Option<&[Candidate]> {
        self.entries
            .get(&tokenize(surface).join(" "))
            .map(Vec::as_slice)
    }

    fn lookup_tokens(&self, tokens: &[String]) -> Option<&Candidate> {
        self.entries.get(&tokens.join(" ")).and_then(|c| c.first())
    }
}

#[derive(Debug, Clone)]
pub struct DictionaryLinker {
    dictionary: LinkerDictionary,
}

impl DictionaryLinker {
    pub fn new(dictionary: LinkerDictionary) -> Self {
        DictionaryLinker { dictionary }
    }

    pub fn dictionary(&self) -> &LinkerDictionary {
        &self.dictionary
    }
}

impl EntityLinker for DictionaryLinker {
    fn annotate(&self, text: &str) -> Vec<EntityAnnotation> {
        let spans = tokenize_with_spans(text);
        let words: Vec<String> = spans.iter().map(|t| t.text.clone()).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let longest = self.dictionary.max_tokens.min(words.len() - i);
            let hit = (1..=longest).rev().find_map(|n| {
                self.dictionary
                    .lookup_tokens(&words[i..i + n])
                    .map(|c| (n, c))
            });
            match hit {
                Some((n, cand)) => {
                    out.push(EntityAnnotation {
                        entity_id: cand.entity_id.clone(),
                        surface: text[spans[i].start..spans[i + n - 1].end].to_string(),
                        rho: cand.score,
                    });
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

/// The distinct query entities E_q. With `rho_filter` set, mentions whose rho
/// is at or below it are dropped, as for documents.
pub fn annotate_query(
    linker: &dyn EntityLinker,
    query: &str,
    rho_filter: Option<f64>,
) -> BTreeSet<String> {
    linker
        .annotate(query)
        .into_iter()
        .filter(|a| rho_filter.is_none_or(|t| a.rho > t))
        .map(|a| a.entity_id)
        .collect()
}

/// Annotations for every document of a corpus, aligned with
/// [`Corpus::documents`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    per_doc: Vec<Vec<EntityAnnotation>>,
}

impl AnnotationSet {
    pub fn annotate_corpus(corpus: &Corpus, linker: &dyn EntityLinker) -> Self {
        use rayon::prelude::*;
        let per_doc = corpus
            .documents()
            .par_iter()
            .map(|d| linker.annotate(&d.full_text()))
            .collect();
        AnnotationSet { per_doc }
    }

    pub fn for_position(&self, pos: usize) -> &[EntityAnnotation] {
        self.per_doc.get(pos).map_or(&[], Vec::as_slice)
    }

    pub fn to_records(&self, corpus: &Corpus) -> String {
        let mut out = String::new();
        for (doc, anns) in corpus.documents().iter().zip(&self.per_doc) {
            for a in anns {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    escape_field(&doc.doc_id),
                    escape_field(&a.entity_id),
                    a.rho,
                    escape_field(&a.surface)
                ));
            }
        }
        out
    }

    pub fn load(path: &Path, corpus: &Corpus) -> Result<Self> {
        let rows = read_records(path, |line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(format!("expected 4 tab-separated fields, found {}", f.len()));
            }
            let doc_id = unescape_field(f[0]).ok_or("bad escape")?;
            let entity_id = unescape_field(f[1]).ok_or("bad escape")?;
            let rho: f64 = f[2].parse().map_err(|_| format!("bad rho `{}`", f[2]))?;
            let surface = unescape_field(f[3]).ok_or("bad escape")?;
            Ok((doc_id, EntityAnnotation { entity_id, surface, rho }))
        })?;
        let mut per_doc = vec![Vec::new(); corpus.documents().len()];
        for (doc_id, ann) in rows {
            let pos = corpus
                .doc_position(&doc_id)
                .ok_or_else(|| Error::not_found("document", doc_id))?;
            per_doc[pos].push(ann);
        }
        Ok(AnnotationSet { per_doc })
    }
}

/// E_a with its evidence: one record per entity whose maximum rho over D_a
/// exceeds `rho_threshold`, ordered by entity id.
pub fn build_author_evidence(
    corpus: &Corpus,
    annotations: &AnnotationSet,
    author_id: &str,
    rho_threshold: f64,
) -> Result<Vec<AuthorEntityEvidence>> {
    let docs = corpus.documents_of(author_id)?;
    let mut acc: BTreeMap<&str, (f64, Vec<&str>)> = BTreeMap::new();
    for doc in docs {
        let pos = corpus.doc_position(&doc.doc_id).expect("doc from corpus");
        for ann in annotations.for_position(pos) {
            let entry = acc
                .entry(ann.entity_id.as_str())
                .or_insert((f64::NEG_INFINITY, Vec::new()));
            entry.0 = entry.0.max(ann.rho);
            if entry.1.last() != Some(&doc.doc_id.as_str()) {
                entry.1.push(&doc.doc_id);
            }
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, (rho, _))| *rho > rho_threshold)
        .map(|(entity, (rho, docs))| AuthorEntityEvidence {
            author_id: author_id.to_string(),
            entity_id: entity.to_string(),
            rho_ae: rho,
            doc_count: docs.len(),
            doc_ids: docs.into_iter().map(str::to_string).collect(),
        })
        .collect())
}
