//! Query-time engine: an immutable snapshot of every built artifact that
//! evaluates strategy expressions and explains its rankings.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;

use crate::config::EngineConfig;
use crate::corpus::{Corpus, Document};
use crate::doc_retrieval::{doc_contributions, fuse_doc_scores, group_by_author, DocScore, TextIndex};
use crate::embeddings::EmbeddingModel;
use crate::error::{Error, Result};
use crate::fusion::{fuse, RankedRun};
use crate::knowledge::{KnowledgeBase, MilneWitten};
use crate::linking::{annotate_query, DictionaryLinker, EntityLinker};
use crate::pipeline::author_evidence;
use crate::profile_retrieval::{ProfileMethod, ProfileSearch};
use crate::store::Store;
use crate::strategy::Strategy;
use crate::text::tokenize;
use crate::wem::{DoubleIndex, WemProfile};

/// Number of related profile entities listed per query entity.
const RELATED_PER_ENTITY: usize = 3;

pub struct EngineParts {
    pub config: EngineConfig,
    pub corpus: Corpus,
    pub text_index: TextIndex,
    pub linker: Box<dyn EntityLinker>,
    pub kb: KnowledgeBase,
    pub embeddings: Option<EmbeddingModel>,
    pub profiles: BTreeMap<String, WemProfile>,
    pub double_index: DoubleIndex,
    /// The `k` the stored author vectors were built with.
    pub profile_embed_k: usize,
}

pub struct Engine {
    config: EngineConfig,
    corpus: Corpus,
    text_index: TextIndex,
    linker: Box<dyn EntityLinker>,
    kb: KnowledgeBase,
    embeddings: Option<EmbeddingModel>,
    profiles: BTreeMap<String, WemProfile>,
    double_index: DoubleIndex,
    profile_embed_k: usize,
    default_strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryAnalysis {
    /// Distinct query terms in first-occurrence order.
    pub terms: Vec<String>,
    /// Terms that occur in at least one document.
    pub matched_terms: Vec<String>,
    /// E_q, sorted.
    pub entities: Vec<String>,
}

impl QueryAnalysis {
    pub fn has_topical_match(&self) -> bool {
        !self.entities.is_empty() || !self.matched_terms.is_empty()
    }
}

/// One addend of a strategy sub-score: a retrieved document (document
/// strategies) or a query entity, optionally paired with a profile entity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubScore {
    pub strategy: String,
    pub score: f64,
    /// Rank of the author in this strategy's own run.
    pub rank: Option<usize>,
    /// Sums to `score`.
    pub contributions: Vec<Contribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedEntity {
    pub entity_id: String,
    pub in_profile: bool,
    pub relevance: Option<f64>,
    pub rho: Option<f64>,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelatedEntity {
    pub query_entity: String,
    pub profile_entity: String,
    pub relatedness: f64,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub matched_entities: Vec<MatchedEntity>,
    pub related_entities: Vec<RelatedEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub rank: Option<usize>,
    pub author_id: String,
    pub display_name: String,
    pub score: f64,
    pub sub_scores: Vec<SubScore>,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResponse {
    pub query: String,
    pub strategy: String,
    pub analysis: QueryAnalysis,
    /// Number of ranked authors before the limit.
    pub total: usize,
    pub results: Vec<SearchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthorSummary {
    pub author_id: String,
    pub display_name: String,
    pub n_documents: usize,
    pub n_entities: usize,
    pub top_entities: Vec<(String, f64)>,
}

struct LeafEval {
    strategy: Strategy,
    run: RankedRun,
    docs: Option<Vec<DocScore>>,
}

struct Evaluated {
    analysis: QueryAnalysis,
    leaves: Vec<LeafEval>,
    run: RankedRun,
}

impl Engine {
    pub fn from_parts(parts: EngineParts) -> Result<Self> {
        parts.config.validate()?;
        let default_strategy = Strategy::parse(&parts.config.default_strategy(), &parts.config)?;
        Ok(Engine {
            config: parts.config,
            corpus: parts.corpus,
            text_index: parts.text_index,
            linker: parts.linker,
            kb: parts.kb,
            embeddings: parts.embeddings,
            profiles: parts.profiles,
            double_index: parts.double_index,
            profile_embed_k: parts.profile_embed_k,
            default_strategy,
        })
    }

    /// Loads every artifact from the configured store.
    pub fn open(config: EngineConfig) -> Result<Self> {
        let store = Store::new(&config.store_dir);
        let corpus = store.load_corpus()?;
        let text_index = store.load_text_index()?;
        let linker = DictionaryLinker::new(store.load_dictionary()?);
        let kb = KnowledgeBase::with_measure(
            store.load_graph()?,
            Box::new(MilneWitten),
            config.cache_capacity(),
        );
        let double_index = store.load_double_index()?;
        let profile_embed_k = store.load_profile_embed_k()?;
        let embeddings = store.load_embeddings()?;
        let annotations = store.load_annotations(&corpus)?;
        let evidence = author_evidence(&corpus, &annotations, config.rho_threshold)?;
        let mut profiles = BTreeMap::new();
        for a in corpus.authors() {
            let mut p = store.load_profile(&a.author_id)?;
            if let Some(ev) = evidence.get(&a.author_id) {
                p.attach_doc_ids(ev);
            }
            profiles.insert(a.author_id.clone(), p);
        }
        Self::from_parts(EngineParts {
            config,
            corpus,
            text_index,
            linker: Box::new(linker),
            kb,
            embeddings,
            profiles,
            double_index,
            profile_embed_k,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn knowledge_base(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn default_strategy(&self) -> &Strategy {
        &self.default_strategy
    }

    /// Parses a strategy expression, or returns the default for `None`.
    pub fn strategy(&self, expr: Option<&str>) -> Result<Strategy> {
        match expr.map(str::trim) {
            None | Some("") => Ok(self.default_strategy.clone()),
            Some(s) => Strategy::parse(s, &self.config),
        }
    }

    fn author_display(&self, author_id: &str) -> Result<&str> {
        self.corpus
            .author(author_id)
            .map(|a| a.display_name.as_str())
            .ok_or_else(|| Error::not_found("author", author_id))
    }

    pub fn profile(&self, author_id: &str) -> Result<&WemProfile> {
        self.author_display(author_id)?;
        self.profiles
            .get(author_id)
            .ok_or_else(|| Error::not_found("profile", author_id))
    }

    pub fn author(&self, author_id: &str) -> Result<AuthorSummary> {
        let display_name = self.author_display(author_id)?.to_string();
        let profile = self.profile(author_id)?;
        Ok(AuthorSummary {
            author_id: author_id.to_string(),
            display_name,
            n_documents: self.corpus.doc_count(author_id),
            n_entities: profile.entities.len(),
            top_entities: profile
                .top(10)
                .iter()
                .map(|e| (e.entity_id.clone(), e.relevance))
                .collect(),
        })
    }

    pub fn documents(&self, author_id: &str) -> Result<Vec<&Document>> {
        self.corpus.documents_of(author_id)
    }

    pub fn analyze(&self, text: &str) -> QueryAnalysis {
        let mut seen = BTreeSet::new();
        let terms: Vec<String> = tokenize(text)
            .into_iter()
            .filter(|t| seen.insert(t.clone()))
            .collect();
        let matched_terms = terms
            .iter()
            .filter(|t| self.text_index.document_frequency(t) > 0)
            .cloned()
            .collect();
        let entities = annotate_query(self.linker.as_ref(), text, self.config.query_rho())
            .into_iter()
            .collect();
        QueryAnalysis {
            terms,
            matched_terms,
            entities,
        }
    }

    fn search_view(&self) -> ProfileSearch<'_> {
        ProfileSearch {
            profiles: &self.profiles,
            index: &self.double_index,
            kb: &self.kb,
            embeddings: self.embeddings.as_ref(),
            corpus: &self.corpus,
            profile_embed_k: self.profile_embed_k,
        }
    }

    fn eval_leaf(
        &self,
        query_id: &str,
        text: &str,
        entities: &BTreeSet<String>,
        leaf: &Strategy,
    ) -> Result<LeafEval> {
        let start = Instant::now();
        let out = match leaf {
            Strategy::Doc { scheme, fusion } => {
                let docs = self
                    .text_index
                    .score_documents(text, *scheme, self.config.max_docs)?;
                let mut scores = Vec::new();
                for (author, list) in group_by_author(&self.corpus, &docs) {
                    let owned: Vec<DocScore> = list.into_iter().cloned().collect();
                    scores.push((
                        author.clone(),
                        fuse_doc_scores(&owned, *fusion, self.corpus.doc_count(&author))?,
                    ));
                }
                LeafEval {
                    strategy: leaf.clone(),
                    run: RankedRun::from_scores(query_id, scores),
                    docs: Some(docs),
                }
            }
            Strategy::Profile(method) => {
                if entities.is_empty() {
                    log::debug!("query `{query_id}`: no query entities for {leaf}");
                }
                LeafEval {
                    strategy: leaf.clone(),
                    run: self.search_view().rank_authors(query_id, entities, *method)?,
                    docs: None,
                }
            }
            Strategy::Fused { .. } => unreachable!("leaves are never fused"),
        };
        log::info!(
            target: "expertfind::timing",
            "query `{query_id}` {leaf}: {} authors in {:.3} ms",
            out.run.len(),
            start.elapsed().as_secs_f64() * 1e3
        );
        Ok(out)
    }

    fn combine(&self, strategy: &Strategy, leaves: &mut std::slice::Iter<'_, LeafEval>) -> Result<RankedRun> {
        match strategy {
            Strategy::Fused { method, parts } => {
                let runs = parts
                    .iter()
                    .map(|p| self.combine(p, leaves))
                    .collect::<Result<Vec<_>>>()?;
                fuse(&runs, *method, self.config.fusion_options())
            }
            _ => Ok(leaves.next().expect("one evaluation per leaf").run.clone()),
        }
    }

    fn evaluate(&self, query_id: &str, text: &str, strategy: &Strategy) -> Result<Evaluated> {
        let analysis = self.analyze(text);
        let entities: BTreeSet<String> = analysis.entities.iter().cloned().collect();
        let leaves = strategy
            .leaves()
            .into_iter()
            .map(|leaf| self.eval_leaf(query_id, text, &entities, leaf))
            .collect::<Result<Vec<_>>>()?;
        let run = self.combine(strategy, &mut leaves.iter())?;
        Ok(Evaluated {
            analysis,
            leaves,
            run,
        })
    }

    /// The full ranking for one query. Queries without any match yield an
    /// empty run rather than an error.
    pub fn rank(&self, query_id: &str, text: &str, strategy: &Strategy) -> Result<RankedRun> {
        Ok(self.evaluate(query_id, text, strategy)?.run)
    }

    fn check_query(text: &str) -> Result<()> {
        if text.trim().is_empty() {
            Err(Error::EmptyQuery)
        } else {
            Ok(())
        }
    }

    pub fn search(&self, text: &str, strategy: &Strategy, limit: usize) -> Result<SearchResponse> {
        Self::check_query(text)?;
        let eval = self.evaluate("q", text, strategy)?;
        if !eval.analysis.has_topical_match() {
            return Err(Error::NoTopicalMatch(text.to_string()));
        }
        let results = eval
            .run
            .entries
            .iter()
            .take(limit)
            .map(|e| self.result_for(&eval, &e.author_id))
            .collect::<Result<Vec<_>>>()?;
        Ok(SearchResponse {
            query: text.to_string(),
            strategy: strategy.to_string(),
            total: eval.run.len(),
            analysis: eval.analysis,
            results,
        })
    }

    /// The explanation of one author's score, ranked or not.
    pub fn explain(&self, text: &str, author_id: &str, strategy: &Strategy) -> Result<SearchResult> {
        Self::check_query(text)?;
        self.author_display(author_id)?;
        let eval = self.evaluate("q", text, strategy)?;
        if !eval.analysis.has_topical_match() {
            return Err(Error::NoTopicalMatch(text.to_string()));
        }
        self.result_for(&eval, author_id)
    }

    fn result_for(&self, eval: &Evaluated, author_id: &str) -> Result<SearchResult> {
        let entry = eval.run.entries.iter().find(|e| e.author_id == author_id);
        let entities: BTreeSet<String> = eval.analysis.entities.iter().cloned().collect();
        let sub_scores = eval
            .leaves
            .iter()
            .map(|leaf| self.sub_score(leaf, author_id, &entities))
            .collect::<Result<Vec<_>>>()?;
        Ok(SearchResult {
            rank: entry.map(|e| e.rank),
            author_id: author_id.to_string(),
            display_name: self.author_display(author_id)?.to_string(),
            score: entry.map_or(0.0, |e| e.score),
            sub_scores,
            explanation: self.explanation(author_id, &entities)?,
        })
    }

    fn sub_score(
        &self,
        leaf: &LeafEval,
        author_id: &str,
        entities: &BTreeSet<String>,
    ) -> Result<SubScore> {
        let entry = leaf.run.entries.iter().find(|e| e.author_id == author_id);
        let contributions = match (&leaf.strategy, entry) {
            (_, None) => Vec::new(),
            (Strategy::Doc { fusion, .. }, Some(_)) => {
                let docs = leaf.docs.as_deref().unwrap_or(&[]);
                let mine: Vec<DocScore> = group_by_author(&self.corpus, docs)
                    .remove(author_id)
                    .unwrap_or_default()
                    .into_iter()
                    .cloned()
                    .collect();
                let values = doc_contributions(&mine, *fusion, self.corpus.doc_count(author_id))?;
                mine.into_iter()
                    .zip(values)
                    .filter(|(_, v)| *v != 0.0)
                    .map(|(d, value)| Contribution {
                        source: d.doc_id,
                        target: None,
                        value,
                    })
                    .collect()
            }
            (Strategy::Profile(method), Some(_)) => {
                let view = self.search_view();
                let (_, parts) = match method {
                    ProfileMethod::Exact(c) => view.exact_match(author_id, entities, *c)?,
                    ProfileMethod::Related(c) => view.related_match(author_id, entities, *c)?,
                };
                parts
                    .into_iter()
                    .filter(|c| c.value != 0.0)
                    .map(|c| Contribution {
                        source: c.query_entity,
                        target: c.profile_entity,
                        value: c.value,
                    })
                    .collect()
            }
            (Strategy::Fused { .. }, Some(_)) => unreachable!("leaves are never fused"),
        };
        Ok(SubScore {
            strategy: leaf.strategy.to_string(),
            score: entry.map_or(0.0, |e| e.score),
            rank: entry.map(|e| e.rank),
            contributions,
        })
    }

    fn explanation(&self, author_id: &str, entities: &BTreeSet<String>) -> Result<Explanation> {
        let profile = self.profile(author_id)?;
        let matched_entities = entities
            .iter()
            .map(|e| {
                let pe = profile.entity(e);
                MatchedEntity {
                    entity_id: e.clone(),
                    in_profile: pe.is_some(),
                    relevance: pe.map(|p| p.relevance),
                    rho: pe.map(|p| p.rho_ae),
                    doc_ids: pe.map(|p| p.doc_ids.clone()).unwrap_or_default(),
                }
            })
            .collect();
        let mut related_entities = Vec::new();
        for q in entities {
            let mut scored: Vec<RelatedEntity> = profile
                .entities
                .iter()
                .filter(|pe| &pe.entity_id != q)
                .map(|pe| RelatedEntity {
                    query_entity: q.clone(),
                    profile_entity: pe.entity_id.clone(),
                    relatedness: self.kb.relatedness_or_zero(q, &pe.entity_id),
                    relevance: pe.relevance,
                })
                .filter(|r| r.relatedness > 0.0)
                .collect();
            scored.sort_by(|a, b| {
                b.relatedness
                    .total_cmp(&a.relatedness)
                    .then_with(|| a.profile_entity.cmp(&b.profile_entity))
            });
            scored.truncate(RELATED_PER_ENTITY);
            related_entities.extend(scored);
        }
        Ok(Explanation {
            matched_entities,
            related_entities,
        })
    }
}
