//! Per-author expertise profiles.
//!
//! A profile is the graph of entities an author mentions, edges weighted by
//! entity relatedness, with off-topic entities removed by density clustering,
//! a Personalized PageRank relevance per entity, and one embedding vector
//! summing the author's most relevant entities.
//!
//! Profile file format (one per author):
//!
//! ```text
//! # author <author_id>
//! N entity_id relevance rho_ae doc_count
//! E id1 id2 weight
//! V f1 ... fD
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::clustering::{mst_density_clustering, ClusterParams};
use crate::embeddings::{EmbeddingModel, EMBEDDING_DIM};
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeBase;
use crate::linking::AuthorEntityEvidence;
use crate::pagerank::{personalized_pagerank, PprParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WemParams {
    pub cluster: ClusterParams,
    /// Clustering output is discarded when more than this fraction of nodes
    /// would be removed.
    pub max_noise_fraction: f64,
    pub ppr: PprParams,
    /// Number of top entities summed into the author vector.
    pub embed_k: usize,
    /// Scale each summed entity vector by its relevance.
    pub weighted_author_vector: bool,
}

impl Default for WemParams {
    fn default() -> Self {
        WemParams {
            cluster: ClusterParams::default(),
            max_noise_fraction: 0.2,
            ppr: PprParams::default(),
            embed_k: 30,
            weighted_author_vector: false,
        }
    }
}

/// Entity graph of one author. Nodes are sorted by entity id; edges are
/// `(i, j, weight)` with `i < j` and weight in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl AuthorGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|&&(x, y, _)| x == a && y == b)
            .map_or(0.0, |&(_, _, w)| w)
    }

    /// Restricts the graph to `keep` (indices into `nodes`).
    pub fn induced(&self, keep: &[usize]) -> AuthorGraph {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        AuthorGraph {
            nodes: keep.iter().map(|&i| self.nodes[i].clone()).collect(),
            edges: self
                .edges
                .iter()
                .filter(|&&(a, b, _)| remap[a] != usize::MAX && remap[b] != usize::MAX)
                .map(|&(a, b, w)| (remap[a], remap[b], w))
                .collect(),
        }
    }
}

/// One node per evidence entity, one edge per pair with positive relatedness.
/// Entities unknown to the knowledge base get no edges.
pub fn build_author_graph(evidence: &[AuthorEntityEvidence], kb: &KnowledgeBase) -> AuthorGraph {
    let mut nodes: Vec<String> = evidence.iter().map(|e| e.entity_id.clone()).collect();
    nodes.sort();
    nodes.dedup();
    let idx: Vec<Option<u32>> = nodes.iter().map(|n| kb.graph().index_of(n)).collect();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if let (Some(a), Some(b)) = (idx[i], idx[j]) {
                let w = kb.relatedness_idx(a, b);
                if w > 0.0 {
                    edges.push((i, j, w));
                }
            }
        }
    }
    AuthorGraph { nodes, edges }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlierOutcome {
    /// Indices of retained nodes, ascending.
    pub retained: Vec<usize>,
    /// Nodes labeled noise by the clustering, whether or not removed.
    pub noise: Vec<usize>,
    /// True when the noise fraction exceeded the limit and nothing was removed.
    pub discarded: bool,
}

/// Clusters nodes under `1 - weight` (missing edge = distance 1) and drops
/// noise, unless noise exceeds `max_noise_fraction` of the nodes, in which
/// case every node is kept.
pub fn remove_outliers(
    graph: &AuthorGraph,
    cluster: ClusterParams,
    max_noise_fraction: f64,
) -> OutlierOutcome {
    let n = graph.nodes.len();
    let mut w = vec![0.0; n * n];
    for &(a, b, x) in &graph.edges {
        w[a * n + b] = x;
        w[b * n + a] = x;
    }
    let clustering = mst_density_clustering(n, |i, j| 1.0 - w[i * n + j], cluster);
    let noise: Vec<usize> = clustering.noise().collect();
    let discarded = noise.len() as f64 > max_noise_fraction * n as f64;
    let retained = if discarded {
        (0..n).collect()
    } else {
        (0..n).filter(|i| !noise.contains(i)).collect()
    };
    OutlierOutcome {
        retained,
        noise,
        discarded,
    }
}

/// Teleport weight rho_{a,e} * ln(1 + |D_{a,e}|), before normalization.
pub fn teleport_weight(evidence: &AuthorEntityEvidence) -> f64 {
    evidence.rho_ae * (1.0 + evidence.doc_count as f64).ln()
}

/// Personalized PageRank relevance per node of `graph`, aligned with
/// `graph.nodes`. Returns the scores and the final L1 residual.
pub fn compute_relevance(
    graph: &AuthorGraph,
    evidence: &HashMap<&str, &AuthorEntityEvidence>,
    params: PprParams,
) -> Result<(Vec<f64>, f64)> {
    let teleport = graph
        .nodes
        .iter()
        .map(|n| {
            evidence
                .get(n.as_str())
                .map(|e| teleport_weight(e))
                .ok_or_else(|| Error::not_found("evidence for entity", n.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = personalized_pagerank(graph.nodes.len(), &graph.edges, &teleport, params);
    Ok((result.scores, result.residual))
}

/// Component-wise sum of the vectors of the first `min(k, len)` entities.
/// Entities without a vector contribute zero.
pub fn build_author_vector(
    ordered: &[(&str, f64)],
    embeddings: Option<&EmbeddingModel>,
    k: usize,
    weighted: bool,
) -> Vec<f64> {
    let dim = embeddings.map_or(EMBEDDING_DIM, EmbeddingModel::dim);
    let mut sum = vec![0.0; dim];
    let Some(model) = embeddings else {
        return sum;
    };
    for &(entity, relevance) in ordered.iter().take(k) {
        match model.get(entity) {
            Some(v) => {
                let scale = if weighted { relevance } else { 1.0 };
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += scale * x;
                }
            }
            None => log::warn!("no embedding for entity `{entity}`; counted as zero"),
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntity {
    pub entity_id: String,
    pub relevance: f64,
    pub rho_ae: f64,
    pub doc_count: usize,
    /// D_{a,e}; empty when the profile was loaded from file without evidence.
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Expertise profile. `entities` is ordered by relevance descending, ties by
/// entity id ascending; relevance sums to 1 when non-empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WemProfile {
    pub author_id: String,
    pub entities: Vec<ProfileEntity>,
    pub edges: Vec<ProfileEdge>,
    pub vector: Vec<f64>,
    #[serde(skip)]
    position: HashMap<String, usize>,
}

impl WemProfile {
    pub fn new(
        author_id: String,
        mut entities: Vec<ProfileEntity>,
        mut edges: Vec<ProfileEdge>,
        vector: Vec<f64>,
    ) -> Self {
        entities.sort_by(|a, b| {
            b.relevance
                .total_cmp(&a.relevance)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        edges.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
        let position = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.entity_id.clone(), i))
            .collect();
        WemProfile {
            author_id,
            entities,
            edges,
            vector,
            position,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entity(&self, entity_id: &str) -> Option<&ProfileEntity> {
        self.position.get(entity_id).map(|&i| &self.entities[i])
    }

    pub fn contains(&self, entity_id: &str) -> bool {
        self.position.contains_key(entity_id)
    }

    /// The top `k` entities by relevance.
    pub fn top(&self, k: usize) -> &[ProfileEntity] {
        &self.entities[..k.min(self.entities.len())]
    }

    pub fn attach_doc_ids(&mut self, evidence: &[AuthorEntityEvidence]) {
        for ev in evidence {
            if let Some(&i) = self.position.get(&ev.entity_id) {
                self.entities[i].doc_ids = ev.doc_ids.clone();
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# author {}\n", self.author_id);
        for e in &self.entities {
            out.push_str(&format!(
                "N {} {} {} {}\n",
                e.entity_id, e.relevance, e.rho_ae, e.doc_count
            ));
        }
        for e in &self.edges {
            out.push_str(&format!("E {} {} {}\n", e.source, e.target, e.weight));
        }
        out.push('V');
        for x in &self.vector {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
        out
    }

    pub fn parse(author_id: &str, content: &str, name: &str) -> Result<Self> {
        let mut entities = Vec::new();
        let mut edges = Vec::new();
        let mut vector = None;
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::parse(name, i + 1, reason);
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(format!("bad number `{s}`")))
            };
            let f: Vec<&str> = line.split(' ').collect();
            match f[0] {
                "N" if f.len() == 5 => entities.push(ProfileEntity {
                    entity_id: f[1].to_string(),
                    relevance: num(f[2])?,
                    rho_ae: num(f[3])?,
                    doc_count: f[4]
                        .parse()
                        .map_err(|_| err(format!("bad doc_count `{}`", f[4])))?,
                    doc_ids: Vec::new(),
                }),
                "E" if f.len() == 4 => edges.push(ProfileEdge {
                    source: f[1].to_string(),
                    target: f[2].to_string(),
                    weight: num(f[3])?,
                }),
                "V" => {
                    vector = Some(
                        f[1..]
                            .iter()
                            .map(|s| num(s))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => return Err(err(format!("unrecognized line `{line}`"))),
            }
        }
        let vector = vector.ok_or_else(|| Error::parse(name, 0, "missing `V` line"))?;
        Ok(WemProfile::new(author_id.to_string(), entities, edges, vector))
    }
}

/// Diagnostic side information from a profile build.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub outliers: OutlierOutcome,
    pub ppr_residual: f64,
}

/// Graph, outlier removal, relevance and author vector for one author.
pub fn build_profile(
    author_id: &str,
    evidence: &[AuthorEntityEvidence],
    kb: &KnowledgeBase,
    embeddings: Option<&EmbeddingModel>,
    params: &WemParams,
) -> Result<(WemProfile, BuildReport)> {
    let full = build_author_graph(evidence, kb);
    let outliers = remove_outliers(&full, params.cluster, params.max_noise_fraction);
    let graph = full.induced(&outliers.retained);
    let by_entity: HashMap<&str, &AuthorEntityEvidence> =
        evidence.iter().map(|e| (e.entity_id.as_str(), e)).collect();
    let (relevance, residual) = compute_relevance(&graph, &by_entity, params.ppr)?;
    if residual >= params.ppr.tolerance {
        log::debug!("relevance for `{author_id}` stopped with residual {residual:e}");
    }

    let entities: Vec<ProfileEntity> = graph
        .nodes
        .iter()
        .zip(&relevance)
        .map(|(id, &r)| {
            let ev = by_entity[id.as_str()];
            ProfileEntity {
                entity_id: id.clone(),
                relevance: r,
                rho_ae: ev.rho_ae,
                doc_count: ev.doc_count,
                doc_ids: ev.doc_ids.clone(),
            }
        })
        .collect();
    let edges = graph
        .edges
        .iter()
        .map(|&(a, b, w)| ProfileEdge {
            source: graph.nodes[a].clone(),
            target: graph.nodes[b].clone(),
            weight: w,
        })
        .collect();
    let mut profile = WemProfile::new(author_id.to_string(), entities, edges, Vec::new());
    let ordered: Vec<(&str, f64)> = profile
        .entities
        .iter()
        .map(|e| (e.entity_id.as_str(), e.relevance))
        .collect();
    profile.vector = build_author_vector(
        &ordered,
        embeddings,
        params.embed_k,
        params.weighted_author_vector,
    );
    Ok((
        profile,
        BuildReport {
            outliers,
            ppr_residual: residual,
        },
    ))
}

/// Paired author -> entities and entity -> authors posting lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DoubleIndex {
    author_entities: BTreeMap<String, BTreeSet<String>>,
    entity_authors: BTreeMap<String, BTreeSet<String>>,
}

impl DoubleIndex {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut idx = DoubleIndex::default();
        for (a, e) in pairs {
            idx.author_entities
                .entry(a.to_string())
                .or_default()
                .insert(e.to_string());
            idx.entity_authors
                .entry(e.to_string())
                .or_default()
                .insert(a.to_string());
        }
        idx
    }

    pub fn build<'a>(profiles: impl IntoIterator<Item = &'a WemProfile>) -> Self {
        let mut pairs = Vec::new();
        for p in profiles {
            for e in &p.entities {
                pairs.push((p.author_id.as_str(), e.entity_id.as_str()));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn entities_of(&self, author_id: &str) -> Option<&BTreeSet<String>> {
        self.author_entities.get(author_id)
    }

    /// A_e, the authors whose profile contains `entity_id`.
    pub fn authors_of(&self, entity_id: &str) -> Option<&BTreeSet<String>> {
        self.entity_authors.get(entity_id)
    }

    pub fn author_entities(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.author_entities
    }

    pub fn entity_authors(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.entity_authors
    }

    pub fn is_empty(&self) -> bool {
        self.author_entities.is_empty()
    }

    /// Swaps the two directions.
    pub fn transposed(&self) -> DoubleIndex {
        DoubleIndex {
            author_entities: self.entity_authors.clone(),
            entity_authors: self.author_entities.clone(),
        }
    }

    /// `author_id TAB entity_id` lines, sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, es) in &self.author_entities {
            for e in es {
                out.push_str(&format!("{a}\t{e}\n"));
            }
        }
        out
    }

    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (a, e) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(name, i + 1, "expected author_id<TAB>entity_id"))?;
            pairs.push((a, e));
        }
        Ok(Self::from_pairs(pairs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::KnowledgeGraph;
    use proptest::prelude::*;

    fn ev(entity: &str, rho: f64, docs: usize) -> AuthorEntityEvidence {
        AuthorEntityEvidence {
            author_id: "a".into(),
            entity_id: entity.into(),
            rho_ae: rho,
            doc_count: docs,
            doc_ids: (0..docs).map(|i| format!("d{i}")).collect(),
        }
    }

    /// W = 10; x <- {n0..n3}, y <- {n0,n1}, z <- {n4,n5}.
    fn kb() -> KnowledgeBase {
        let mut ids: Vec<String> = (0..7).map(|i| format!("n{i}")).collect();
        ids.extend(["x", "y", "z"].map(String::from));
        let l = |s: &str, t: &str| (s.to_string(), t.to_string());
        let links = [
            l("n0", "x"),
            l("n1", "x"),
            l("n2", "x"),
            l("n3", "x"),
            l("n0", "y"),
            l("n1", "y"),
            l("n4", "z"),
            l("n5", "z"),
        ];
        KnowledgeBase::new(KnowledgeGraph::new(ids, &links).unwrap())
    }

    #[test]
    fn graph_shapes() {
        let kb = kb();
        let g = build_author_graph(&[ev("x", 0.5, 1)], &kb);
        assert_eq!((g.nodes.len(), g.edges.len()), (1, 0));

        let g = build_author_graph(&[ev("x", 0.5, 1), ev("y", 0.5, 1)], &kb);
        assert_eq!(g.edges.len(), 1);
        let expected = 1.0 - 2f64.ln() / 5f64.ln();
        assert!((g.edges[0].2 - expected).abs() < 1e-12);

        let g = build_author_graph(&[ev("x", 0.5, 1), ev("z", 0.5, 1), ev("unknown", 0.9, 1)], &kb);
        assert_eq!((g.nodes.len(), g.edges.len()), (3, 0));
    }

    fn block_graph(groups: &[usize]) -> AuthorGraph {
        let nodes = (0..groups.len()).map(|i| format!("e{i:02}")).collect();
        let mut edges = Vec::new();
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                if groups[i] != 0 && groups[i] == groups[j] {
                    edges.push((i, j, 0.9));
                }
            }
        }
        AuthorGraph { nodes, edges }
    }

    #[test]
    fn outliers_removed_within_budget() {
        let g = block_graph(&[1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 0]);
        let out = remove_outliers(&g, ClusterParams::default(), 0.2);
        assert!(!out.discarded);
        assert_eq!(out.noise, [11]);
        assert_eq!(out.retained, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_outliers_keeps_everything() {
        let g = block_graph(&[1, 1, 1, 1, 1, 0, 0, 0]);
        let out = remove_outliers(&g, ClusterParams::default(), 0.2);
        assert!(out.discarded);
        assert_eq!(out.noise.len(), 3);
        assert_eq!(out.retained.len(), 8);
    }

    #[test]
    fn small_graphs_keep_all_nodes() {
        let g = block_graph(&[0, 0, 0]);
        let out = remove_outliers(&g, ClusterParams::default(), 0.2);
        assert_eq!(out.retained, [0, 1, 2]);
        assert!(out.noise.is_empty());
    }

    #[test]
    fn relevance_sums_to_one_and_single_node_is_one() {
        let evidence = [ev("x", 0.5, 2)];
        let map: HashMap<_, _> = evidence.iter().map(|e| (e.entity_id.as_str(), e)).collect();
        let g = AuthorGraph {
            nodes: vec!["x".into()],
            edges: vec![],
        };
        let (r, _) = compute_relevance(&g, &map, PprParams::default()).unwrap();
        assert_eq!(r, [1.0]);
        let empty = AuthorGraph {
            nodes: vec![],
            edges: vec![],
        };
        assert!(compute_relevance(&empty, &map, PprParams::default())
            .unwrap()
            .0
            .is_empty());
    }

    #[test]
    fn author_vector_sums_top_k() {
        let mut m = EmbeddingModel::new(3);
        m.insert("a", &[1.0, 0.0, 2.0]).unwrap();
        m.insert("b", &[0.5, 0.5, 0.5]).unwrap();
        m.insert("c", &[-1.0, 4.0, 0.0]).unwrap();
        let ordered = [("b", 0.5), ("a", 0.3), ("c", 0.2)];
        assert_eq!(build_author_vector(&ordered, Some(&m), 1, false), [0.5, 0.5, 0.5]);
        assert_eq!(build_author_vector(&ordered, Some(&m), 2, false), [1.5, 0.5, 2.5]);
        assert_eq!(build_author_vector(&ordered, Some(&m), 99, false), [0.5, 4.5, 2.5]);
        assert_eq!(
            build_author_vector(&ordered, Some(&m), 2, true),
            [0.5 * 0.5 + 0.3, 0.25, 0.25 + 0.6]
        );
        let missing = [("zzz", 1.0), ("a", 0.0)];
        assert_eq!(build_author_vector(&missing, Some(&m), 2, false), [1.0, 0.0, 2.0]);
        assert_eq!(build_author_vector(&ordered, None, 2, false).len(), EMBEDDING_DIM);
    }

    #[test]
    fn profile_is_ordered_and_roundtrips() {
        let kb = kb();
        let evidence = [ev("x", 0.9, 3), ev("y", 0.5, 1), ev("z", 0.3, 1)];
        let (p, report) =
            build_profile("a", &evidence, &kb, None, &WemParams::default()).unwrap();
        assert!(!report.outliers.discarded);
        let sum: f64 = p.entities.iter().map(|e| e.relevance).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.entities.windows(2).all(|w| w[0].relevance >= w[1].relevance));
        assert_eq!(p.entities[0].entity_id, "x");

        let back = WemProfile::parse("a", &p.to_text(), "mem").unwrap();
        assert_eq!(back.to_text(), p.to_text());
        assert_eq!(back.entities.len(), 3);
        assert!(back.entities[0].doc_ids.is_empty());
    }

    #[test]
    fn double_index_basics() {
        assert!(DoubleIndex::build(std::iter::empty()).is_empty());
        let idx = DoubleIndex::from_pairs([("a1", "e"), ("a2", "e"), ("a2", "f")]);
        let authors: Vec<_> = idx.authors_of("e").unwrap().iter().cloned().collect();
        assert_eq!(authors, ["a1", "a2"]);
        let back = DoubleIndex::parse(&idx.to_text(), "mem").unwrap();
        assert_eq!(back, idx);
    }

    proptest! {
        #[test]
        fn double_index_transpose_is_an_involution(
            pairs in proptest::collection::vec((0u8..6, 0u8..10), 0..40)
        ) {
            let owned: Vec<(String, String)> =
                pairs.iter().map(|(a, e)| (format!("a{a}"), format!("e{e}"))).collect();
            let idx = DoubleIndex::from_pairs(owned.iter().map(|(a, e)| (a.as_str(), e.as_str())));
            prop_assert_eq!(&idx.transposed().transposed(), &idx);
            for (a, es) in idx.author_entities() {
                for e in es {
                    prop_assert!(idx.authors_of(e).unwrap().contains(a));
                }
            }
            for (e, as_) in idx.entity_authors() {
                for a in as_ {
                    prop_assert!(idx.entities_of(a).unwrap().contains(e));
                }
            }
        }
    }
}
