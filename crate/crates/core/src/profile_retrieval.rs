//! Profile-centric author scoring: candidates come from the entity -> authors
//! index, scores from the authors' profiles.
//!
//! Exact match (per query entity `e`, 0 when `e` is not in the profile):
//!
//! - `ec-iaf  = |D_{a,e}| * rho_{a,e} * iaf(e)`
//! - `ef-iaf  = ec-iaf / |D_a|`
//! - `rec-iaf = f(r_{a,e}) * ec-iaf`
//!
//! aggregated over the query entities by `max` or `mean` (mean divides by
//! `|E_q|`). Related match uses the top `k = max(1, ceil(top_fraction *
//! |E_a|))` profile entities:
//!
//! - `aer  = 1/(k |E_q|) * sum_q sum_i rho_i * rel(q, e_i)`
//! - `raer = 1/(k |E_q|) * sum_q sum_i rho_i * rel(q, e_i) * f(r_i)`
//! - `aes  = cosine(sum_q v_q, v_a)`

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::embeddings::{cosine, EmbeddingModel};
use crate::error::{Error, Result};
use crate::fusion::RankedRun;
use crate::knowledge::KnowledgeBase;
use crate::wem::{build_author_vector, DoubleIndex, WemProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Identity,
    Sigmoid,
    Sqrt,
    Square,
}

impl Scaling {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Scaling::Identity => x,
            Scaling::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Scaling::Sqrt => x.sqrt(),
            Scaling::Square => x * x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scaling::Identity => "identity",
            Scaling::Sigmoid => "sigmoid",
            Scaling::Sqrt => "sqrt",
            Scaling::Square => "square",
        }
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "linear" => Ok(Scaling::Identity),
            "sigmoid" => Ok(Scaling::Sigmoid),
            "sqrt" => Ok(Scaling::Sqrt),
            "square" => Ok(Scaling::Square),
            other => Err(Error::InvalidArgument(format!("unknown scaling `{other}`"))),
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ExactMethod {
    EcIaf,
    EfIaf,
    RecIaf,
}

impl ExactMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExactMethod::EcIaf => "ec-iaf",
            ExactMethod::EfIaf => "ef-iaf",
            ExactMethod::RecIaf => "rec-iaf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregation::Max),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidArgument(format!("unknown aggregation `{other}`"))),
        }
    }
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Max => "max",
            Aggregation::Mean => "mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ExactMatchConfig {
    pub method: ExactMethod,
    /// Only used by rec-iaf.
    pub scaling: Scaling,
    pub aggregation: Aggregation,
}

impl Default for ExactMatchConfig {
    fn default() -> Self {
        ExactMatchConfig {
            method: ExactMethod::RecIaf,
            scaling: Scaling::Sqrt,
            aggregation: Aggregation::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RelatedMethod {
    Aer,
    Raer,
    Aes,
}

impl RelatedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RelatedMethod::Aer => "aer",
            RelatedMethod::Raer => "raer",
            RelatedMethod::Aes => "aes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelatedMatchConfig {
    pub method: RelatedMethod,
    /// Only used by raer.
    pub scaling: Scaling,
    pub top_fraction: f64,
    pub embed_k: usize,
}

impl Default for RelatedMatchConfig {
    fn default() -> Self {
        RelatedMatchConfig {
            method: RelatedMethod::Aer,
            scaling: Scaling::Identity,
            top_fraction: 0.1,
            embed_k: 30,
        }
    }
}

impl RelatedMatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::InvalidArgument("top_fraction must be in (0,1]".into()));
        }
        if self.embed_k == 0 {
            return Err(Error::InvalidArgument("embed_k must be >= 1".into()));
        }
        Ok(())
    }

    /// `max(1, ceil(top_fraction * n))`.
    pub fn top_k(&self, n_entities: usize) -> usize {
        ((self.top_fraction * n_entities as f64).ceil() as usize).max(1)
    }
}

/// One addend of a profile-centric score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityContribution {
    pub query_entity: String,
    /// The profile entity paired with the query entity (related match).
    pub profile_entity: Option<String>,
    pub value: f64,
}

/// Read-only view of everything profile-centric scoring needs.
#[derive(Clone, Copy)]
pub struct ProfileSearch<'a> {
    pub profiles: &'a BTreeMap<String, WemProfile>,
    pub index: &'a DoubleIndex,
    pub kb: &'a KnowledgeBase,
    pub embeddings: Option<&'a EmbeddingModel>,
    pub corpus: &'a Corpus,
    /// The `k` the stored author vectors were built with.
    pub profile_embed_k: usize,
}

impl<'a> ProfileSearch<'a> {
    /// A^q: authors whose profile contains at least one query entity.
    pub fn candidate_authors(&self, query_entities: &BTreeSet<String>) -> BTreeSet<String> {
        query_entities
            .iter()
            .filter_map(|e| self.index.authors_of(e))
            .flatten()
            .cloned()
            .collect()
    }

    /// `ln(|A| / |A_e|)` with |A| the number of corpus authors.
    pub fn iaf(&self, entity: &str) -> Result<f64> {
        let with_entity = self.index.authors_of(entity).map_or(0, BTreeSet::len);
        if with_entity == 0 {
            return Err(Error::InvalidArgument(format!(
                "iaf undefined: no author mentions `{entity}`"
            )));
        }
        Ok(iaf(self.corpus.authors().len(), with_entity))
    }

    fn profile(&self, author: &str) -> Result<&'a WemProfile> {
        self.profiles
            .get(author)
            .ok_or_else(|| Error::not_found("profile", author))
    }

    /// g(a, e) for every query entity, in query-entity order.
    pub fn exact_terms(
        &self,
        author: &str,
        query_entities: &BTreeSet<String>,
        config: ExactMatchConfig,
    ) -> Result<Vec<(String, f64)>> {
        let profile = self.profile(author)?;
        let n_docs = self.corpus.doc_count(author);
        query_entities
            .iter()
            .map(|e| {
                let v = match profile.entity(e) {
                    None => 0.0,
                    Some(pe) => {
                        let ec = ec_iaf(pe.doc_count, pe.rho_ae, self.iaf(e)?);
                        match config.method {
                            ExactMethod::EcIaf => ec,
                            ExactMethod::EfIaf => ec / n_docs.max(1) as f64,
                            ExactMethod::RecIaf => config.scaling.apply(pe.relevance) * ec,
                        }
                    }
                };
                Ok((e.clone(), v))
            })
            .collect()
    }

    /// Exact-match score with its addends (for max, only the winning entity
    /// carries a non-zero contribution).
    pub fn exact_match(
        &self,
        author: &str,
        query_entities: &BTreeSet<String>,
        config: ExactMatchConfig,
    ) -> Result<(f64, Vec<EntityContribution>)> {
        let terms = self.exact_terms(author, query_entities, config)?;
        if terms.is_empty() {
            return Ok((0.0, Vec::new()));
        }
        let (score, values): (f64, Vec<f64>) = match config.aggregation {
            Aggregation::Mean => {
                let n = terms.len() as f64;
                let parts: Vec<f64> = terms.iter().map(|(_, v)| v / n).collect();
                (terms.iter().map(|(_, v)| v).sum::<f64>() / n, parts)
            }
            Aggregation::Max => {
                let best = terms
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("non-empty");
                let parts = (0..terms.len())
                    .map(|i| if i == best { terms[i].1 } else { 0.0 })
                    .collect();
                (terms[best].1, parts)
            }
        };
        let contributions = terms
            .into_iter()
            .zip(values)
            .map(|((e, _), value)| EntityContribution {
                query_entity: e,
                profile_entity: None,
                value,
            })
            .collect();
        Ok((score, contributions))
    }

    pub fn exact_match_score(
        &self,
        author: &str,
        query_entities: &BTreeSet<String>,
        config: ExactMatchConfig,
    ) -> Result<f64> {
        Ok(self.exact_match(author, query_entities, config)?.0)
    }

    /// Author vector for `embed_k`: the stored one when it matches the build
    /// parameter, otherwise recomputed from the profile's ordered entities.
    pub fn author_vector(&self, profile: &WemProfile, embed_k: usize) -> Vec<f64> {
        if embed_k == self.profile_embed_k && !profile.vector.is_empty() {
            return profile.vector.clone();
        }
        let ordered: Vec<(&str, f64)> = profile
            .entities
            .iter()
            .map(|e| (e.entity_id.as_str(), e.relevance))
            .collect();
        build_author_vector(&ordered, self.embeddings, embed_k, false)
    }

    /// Sum of the query entities' vectors; missing vectors count as zero.
    pub fn query_vector(&self, query_entities: &BTreeSet<String>, dim: usize) -> Vec<f64> {
        let mut sum = vec![0.0; dim];
        if let Some(model) = self.embeddings {
            for e in query_entities {
                if let Some(v) = model.get(e) {
                    for (s, x) in sum.iter_mut().zip(v) {
                        *s += x;
                    }
                }
            }
        }
        sum
    }

    pub fn related_match(
        &self,
        author: &str,
        query_entities: &BTreeSet<String>,
        config: RelatedMatchConfig,
    ) -> Result<(f64, Vec<EntityContribution>)> {
        config.validate()?;
        let profile = self.profile(author)?;
        if query_entities.is_empty() || profile.is_empty() {
            return Ok((0.0, Vec::new()));
        }
        match config.method {
            RelatedMethod::Aes => {
                let author_vec = self.author_vector(profile, config.embed_k);
                let query_vec = self.query_vector(query_entities, author_vec.len());
                let score = cosine(&query_vec, &author_vec);
                Ok((
                    score,
                    vec![EntityContribution {
                        query_entity: query_entities.iter().cloned().collect::<Vec<_>>().join(" "),
                        profile_entity: None,
                        value: score,
                    }],
                ))
            }
            RelatedMethod::Aer | RelatedMethod::Raer => {
                let k = config.top_k(profile.entities.len());
                let norm = 1.0 / (k as f64 * query_entities.len() as f64);
                let mut parts = Vec::with_capacity(k * query_entities.len());
                for q in query_entities {
                    for pe in profile.top(k) {
                        let mut term = pe.rho_ae * self.kb.relatedness_or_zero(q, &pe.entity_id);
                        if config.method == RelatedMethod::Raer {
                            term *= config.scaling.apply(pe.relevance);
                        }
                        parts.push(EntityContribution {
                            query_entity: q.clone(),
                            profile_entity: Some(pe.entity_id.clone()),
                            value: norm * term,
                        });
                    }
                }
                let score = parts.iter().map(|c| c.value).sum();
                Ok((score, parts))
            }
        }
    }

    pub fn related_match_score(
        &self,
        author: &str,
        query_entities: &BTreeSet<String>,
        config: RelatedMatchConfig,
    ) -> Result<f64> {
        Ok(self.related_match(author, query_entities, config)?.0)
    }

    /// Scores every candidate author and ranks them.
    pub fn rank_authors(
        &self,
        query_id: &str,
        query_entities: &BTreeSet<String>,
        method: ProfileMethod,
    ) -> Result<RankedRun> {
        let candidates = self.candidate_authors(query_entities);
        let mut scores = Vec::with_capacity(candidates.len());
        for a in candidates {
            let s = match method {
                ProfileMethod::Exact(c) => self.exact_match_score(&a, query_entities, c)?,
                ProfileMethod::Related(c) => self.related_match_score(&a, query_entities, c)?,
            };
            scores.push((a, s));
        }
        Ok(RankedRun::from_scores(query_id, scores))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProfileMethod {
    Exact(ExactMatchConfig),
    Related(RelatedMatchConfig),
}

pub fn iaf(n_authors: usize, authors_with_entity: usize) -> f64 {
    (n_authors as f64 / authors_with_entity as f64).ln()
}

pub fn ec_iaf(doc_count: usize, rho: f64, iaf: f64) -> f64 {
    doc_count as f64 * rho * iaf
}
