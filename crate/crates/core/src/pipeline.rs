//! Offline stages: corpus annotation and text indexing, then per-author
//! profiles and the double index. Everything here is in memory; the
//! [`crate::store`] module persists the results.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::EngineConfig;
use crate::corpus::{Corpus, CorpusStats};
use crate::doc_retrieval::TextIndex;
use crate::embeddings::{train_deepwalk, EmbeddingModel};
use crate::engine::{Engine, EngineParts};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeBase, KnowledgeGraph, MilneWitten};
use crate::linking::{
    build_author_evidence, AnnotationSet, AuthorEntityEvidence, DictionaryLinker, EntityLinker,
    LinkerDictionary,
};
use crate::store::Store;
use crate::wem::{build_profile, BuildReport, DoubleIndex, WemParams, WemProfile};

pub struct IndexArtifacts {
    pub annotations: AnnotationSet,
    pub text_index: TextIndex,
}

pub fn build_index(corpus: &Corpus, linker: &dyn EntityLinker) -> IndexArtifacts {
    IndexArtifacts {
        annotations: AnnotationSet::annotate_corpus(corpus, linker),
        text_index: TextIndex::build(corpus),
    }
}

/// E_a with evidence for every author, keyed by author id.
pub fn author_evidence(
    corpus: &Corpus,
    annotations: &AnnotationSet,
    rho_threshold: f64,
) -> Result<BTreeMap<String, Vec<AuthorEntityEvidence>>> {
    corpus
        .authors()
        .par_iter()
        .map(|a| {
            let ev = build_author_evidence(corpus, annotations, &a.author_id, rho_threshold)?;
            Ok((a.author_id.clone(), ev))
        })
        .collect()
}

pub struct ProfileArtifacts {
    pub profiles: BTreeMap<String, WemProfile>,
    pub double_index: DoubleIndex,
    pub reports: BTreeMap<String, BuildReport>,
}

/// Builds every author's profile in parallel. The output does not depend on
/// thread scheduling: each profile is a pure function of its own evidence.
pub fn build_profiles(
    corpus: &Corpus,
    annotations: &AnnotationSet,
    kb: &KnowledgeBase,
    embeddings: Option<&EmbeddingModel>,
    params: &WemParams,
    rho_threshold: f64,
) -> Result<ProfileArtifacts> {
    let evidence = author_evidence(corpus, annotations, rho_threshold)?;
    let built: Vec<(String, WemProfile, BuildReport)> = evidence
        .par_iter()
        .map(|(author, ev)| {
            let (profile, report) = build_profile(author, ev, kb, embeddings, params)?;
            Ok((author.clone(), profile, report))
        })
        .collect::<Result<_>>()?;
    let mut profiles = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (author, profile, report) in built {
        profiles.insert(author.clone(), profile);
        reports.insert(author, report);
    }
    let double_index = DoubleIndex::build(profiles.values());
    Ok(ProfileArtifacts {
        profiles,
        double_index,
        reports,
    })
}

/// Entity vectors per the config: loaded from `embeddings` when set, else
/// trained on the snapshot when `train_embeddings` is on, else none.
pub fn resolve_embeddings(config: &EngineConfig, graph: &KnowledgeGraph) -> Result<Option<EmbeddingModel>> {
    if let Some(p) = &config.embeddings {
        return EmbeddingModel::load(p).map(Some);
    }
    if config.train_embeddings {
        log::info!("training entity embeddings on {} entities", graph.entity_count());
        return train_deepwalk(graph, &config.walk_config()).map(Some);
    }
    Ok(None)
}

/// Runs every offline stage in memory and returns a ready engine.
pub fn build_engine(
    config: EngineConfig,
    corpus: Corpus,
    dictionary: LinkerDictionary,
    graph: KnowledgeGraph,
) -> Result<Engine> {
    config.validate()?;
    let linker = DictionaryLinker::new(dictionary);
    let index = build_index(&corpus, &linker);
    let embeddings = resolve_embeddings(&config, &graph)?;
    let kb = KnowledgeBase::with_measure(graph, Box::new(MilneWitten), config.cache_capacity());
    let built = build_profiles(
        &corpus,
        &index.annotations,
        &kb,
        embeddings.as_ref(),
        &config.wem_params(),
        config.rho_threshold,
    )?;
    let profile_embed_k = config.embed_k;
    Engine::from_parts(EngineParts {
        config,
        corpus,
        text_index: index.text_index,
        linker: Box::new(linker),
        kb,
        embeddings,
        profiles: built.profiles,
        double_index: built.double_index,
        profile_embed_k,
    })
}

fn required<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    value
        .as_ref()
        .ok_or_else(|| Error::Config(format!("`{key}` is not set (config file or --{key})")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSummary {
    pub stats: CorpusStats,
    pub annotations: usize,
    pub annotated_documents: usize,
}

/// Ingests the corpus into the store, annotates it and builds the text
/// index.
pub fn run_index_stage(config: &EngineConfig) -> Result<IndexSummary> {
    let store = Store::new(&config.store_dir);
    let stats = store.ingest(
        required(&config.documents, "documents")?,
        required(&config.authors, "authors")?,
    )?;
    let corpus = store.load_corpus()?;
    let dictionary = LinkerDictionary::load(required(&config.dictionary, "dictionary")?)?;
    let graph = KnowledgeGraph::load(required(&config.snapshot, "snapshot")?)?;
    let linker = DictionaryLinker::new(dictionary.clone());
    let index = build_index(&corpus, &linker);
    store.write_index(&corpus, &dictionary, &graph, &index.annotations, &index.text_index)?;
    let per_doc: Vec<usize> = (0..corpus.documents().len())
        .map(|i| index.annotations.for_position(i).len())
        .collect();
    Ok(IndexSummary {
        stats,
        annotations: per_doc.iter().sum(),
        annotated_documents: per_doc.iter().filter(|&&n| n > 0).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub profiles: usize,
    pub empty_profiles: usize,
    pub entities: usize,
    /// Authors whose outlier removal was skipped by the noise limit.
    pub outlier_fallbacks: usize,
    pub removed_outliers: usize,
    pub embedded_entities: usize,
}

/// Builds every profile and the double index from the indexed store.
pub fn run_profile_stage(config: &EngineConfig) -> Result<ProfileSummary> {
    let store = Store::new(&config.store_dir);
    let corpus = store.load_corpus()?;
    let annotations = store.load_annotations(&corpus)?;
    let graph = store.load_graph()?;
    let embeddings = resolve_embeddings(config, &graph)?;
    let kb = KnowledgeBase::with_measure(graph, Box::new(MilneWitten), config.cache_capacity());
    let built = build_profiles(
        &corpus,
        &annotations,
        &kb,
        embeddings.as_ref(),
        &config.wem_params(),
        config.rho_threshold,
    )?;
    store.write_profiles(embeddings.as_ref(), &built.profiles, &built.double_index, config.embed_k)?;
    let stats = kb.cache_stats();
    log::info!(
        "relatedness cache: {} hits, {} misses, {} entries",
        stats.hits,
        stats.misses,
        stats.entries
    );
    Ok(ProfileSummary {
        profiles: built.profiles.len(),
        empty_profiles: built.profiles.values().filter(|p| p.is_empty()).count(),
        entities: built.profiles.values().map(|p| p.entities.len()).sum(),
        outlier_fallbacks: built.reports.values().filter(|r| r.outliers.discarded).count(),
        removed_outliers: built
            .reports
            .values()
            .filter(|r| !r.outliers.discarded)
            .map(|r| r.outliers.noise.len())
            .sum(),
        embedded_entities: embeddings.as_ref().map_or(0, EmbeddingModel::len),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Author, DocKind, Document};
    use crate::knowledge::KnowledgeGraph;
    use crate::linking::{DictionaryLinker, LinkerDictionary};

    #[test]
    fn profiles_cover_every_author_and_index_is_consistent() {
        let authors = ["a1", "a2", "a3"]
            .iter()
            .map(|a| Author {
                author_id: a.to_string(),
                display_name: a.to_uppercase(),
            })
            .collect();
        let doc = |id: &str, body: &str, a: &[&str]| Document {
            doc_id: id.into(),
            title: String::new(),
            body: body.into(),
            author_ids: a.iter().map(|s| s.to_string()).collect(),
            doc_kind: DocKind::Paper,
        };
        let corpus = Corpus::new(
            authors,
            vec![
                doc("d1", "graph theory and matrix algebra", &["a1"]),
                doc("d2", "matrix algebra again", &["a1", "a2"]),
                doc("d3", "nothing linked here", &["a3"]),
            ],
        )
        .unwrap();
        let mut dict = LinkerDictionary::new();
        dict.insert("graph theory", "Graph_theory", 0.9).unwrap();
        dict.insert("matrix algebra", "Matrix_algebra", 0.8).unwrap();
        let linker = DictionaryLinker::new(dict);
        let graph = KnowledgeGraph::new(
            vec!["Graph_theory".into(), "Matrix_algebra".into(), "Hub".into()],
            &[
                ("Hub".into(), "Graph_theory".into()),
                ("Hub".into(), "Matrix_algebra".into()),
            ],
        )
        .unwrap();
        let kb = KnowledgeBase::new(graph);
        let idx = build_index(&corpus, &linker);
        let built = build_profiles(&corpus, &idx.annotations, &kb, None, &WemParams::default(), 0.2).unwrap();
        assert_eq!(built.profiles.len(), 3);
        assert!(built.profiles["a3"].is_empty());
        assert_eq!(built.profiles["a1"].entities.len(), 2);
        let authors: Vec<&String> = built.double_index.authors_of("Matrix_algebra").unwrap().iter().collect();
        assert_eq!(authors, ["a1", "a2"]);
        assert_eq!(built.double_index.transposed().transposed(), built.double_index);
    }
}
