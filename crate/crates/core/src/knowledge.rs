//! Knowledge-graph snapshot and link-based entity relatedness.
//!
//! Snapshot file format:
//!
//! ```text
//! #entities N
//! E <TAB> entity_id
//! L <TAB> source_id <TAB> target_id
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;

use crate::error::{Error, Result};

/// Immutable entity graph. Entity indices follow declaration order.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    ids: Vec<String>,
    index: HashMap<String, u32>,
    links: Vec<(u32, u32)>,
    in_links: Vec<Vec<u32>>,
}

impl KnowledgeGraph {
    pub fn new(entity_ids: Vec<String>, links: &[(String, String)]) -> Result<Self> {
        if entity_ids.is_empty() {
            return Err(Error::InvalidArgument(
                "knowledge graph needs at least one entity".into(),
            ));
        }
        let mut index = HashMap::with_capacity(entity_ids.len());
        for (i, id) in entity_ids.iter().enumerate() {
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "entity id `{id}` is empty or contains whitespace"
                )));
            }
            if index.insert(id.clone(), i as u32).is_some() {
                return Err(Error::Duplicate {
                    kind: "entity",
                    id: id.clone(),
                });
            }
        }
        let resolve = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::not_found("entity", id))
        };
        let mut edges = Vec::with_capacity(links.len());
        for (s, t) in links {
            edges.push((resolve(s)?, resolve(t)?));
        }
        edges.sort_unstable();
        edges.dedup();
        let mut in_links = vec![Vec::new(); entity_ids.len()];
        for &(s, t) in &edges {
            in_links[t as usize].push(s);
        }
        for list in &mut in_links {
            list.sort_unstable();
        }
        Ok(KnowledgeGraph {
            ids: entity_ids,
            index,
            links: edges,
            in_links,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut declared = None;
        let mut ids = Vec::new();
        let mut links = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: &str| Error::parse(name, i + 1, reason);
            if let Some(rest) = line.strip_prefix("#entities") {
                let n: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| err("bad `#entities` header"))?;
                declared = Some(n);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["E", id] if !id.is_empty() => ids.push(id.to_string()),
                ["L", s, t] => links.push((s.to_string(), t.to_string())),
                _ => return Err(err("expected `E<TAB>id` or `L<TAB>source<TAB>target`")),
            }
        }
        match declared {
            None => return Err(Error::parse(name, 1, "missing `#entities N` header")),
            Some(n) if n != ids.len() => {
                return Err(Error::parse(
                    name,
                    1,
                    format!("header declares {n} entities, found {}", ids.len()),
                ))
            }
            _ => {}
        }
        Self::new(ids, &links)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#entities {}\n", self.ids.len());
        for id in &self.ids {
            out.push_str(&format!("E\t{id}\n"));
        }
        for &(s, t) in &self.links {
            out.push_str(&format!("L\t{}\t{}\n", self.ids[s as usize], self.ids[t as usize]));
        }
        out
    }

    /// W, the number of entities.
    pub fn entity_count(&self) -> usize {
        self.ids.len()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: u32) -> &str {
        &self.ids[idx as usize]
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn links(&self) -> &[(u32, u32)] {
        &self.links
    }

    /// Sorted in-neighbours of `idx`.
    pub fn in_links(&self, idx: u32) -> &[u32] {
        &self.in_links[idx as usize]
    }

    /// Undirected, deduplicated neighbour lists (self loops dropped).
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.ids.len()];
        for &(s, t) in &self.links {
            if s != t {
                adj[s as usize].push(t);
                adj[t as usize].push(s);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// A pairwise entity relatedness in [0,1]. Must be symmetric and pure.
pub trait RelatednessMeasure: Send + Sync {
    fn score(&self, graph: &KnowledgeGraph, a: u32, b: u32) -> f64;
}

/// Milne & Witten in-link overlap:
///
/// `1 - (ln max(|A|,|B|) - ln |A∩B|) / (ln W - ln min(|A|,|B|))`, clamped to
/// [0,1]; 0 when either in-link set is empty or they are disjoint, 1 when the
/// denominator vanishes with a non-empty overlap.
#[derive(Debug, Clone, Copy, Default)]
pub struct MilneWitten;

impl MilneWitten {
    pub fn from_counts(w: usize, a: usize, b: usize, common: usize) -> f64 {
        if a == 0 || b == 0 || common == 0 {
            return 0.0;
        }
        let (big, small) = if a >= b { (a, b) } else { (b, a) };
        let denominator = (w as f64).ln() - (small as f64).ln();
        if denominator <= 0.0 {
            return 1.0;
        }
        let numerator = (big as f64).ln() - (common as f64).ln();
        (1.0 - numerator / denominator).clamp(0.0, 1.0)
    }
}

impl RelatednessMeasure for MilneWitten {
    fn score(&self, graph: &KnowledgeGraph, a: u32, b: u32) -> f64 {
        let ia = graph.in_links(a);
        let ib = graph.in_links(b);
        MilneWitten::from_counts(
            graph.entity_count(),
            ia.len(),
            ib.len(),
            sorted_intersection_len(ia, ib),
        )
    }
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

/// Memoized pairwise scores keyed by the unordered entity pair.
///
/// Concurrent misses on one key may both compute; the value stored is the
/// same either way. `max_entries` stops insertion once reached (no eviction).
#[derive(Debug, Default)]
pub struct RelatednessCache {
    map: RwLock<HashMap<(u32, u32), f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
    max_entries: Option<usize>,
}

impl RelatednessCache {
    pub fn new(max_entries: Option<usize>) -> Self {
        RelatednessCache {
            max_entries,
            ..Default::default()
        }
    }

    fn key(a: u32, b: u32) -> (u32, u32) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn get_or_compute(&self, a: u32, b: u32, compute: impl FnOnce() -> f64) -> f64 {
        let key = Self::key(a, b);
        if let Some(&v) = self.map.read().get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = compute();
        let mut map = self.map.write();
        if self.max_entries.is_none_or(|cap| map.len() < cap) {
            map.insert(key, v);
        }
        v
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.map.read().len(),
        }
    }
}

/// Snapshot + relatedness measure + shared cache.
pub struct KnowledgeBase {
    graph: KnowledgeGraph,
    measure: Box<dyn RelatednessMeasure>,
    cache: RelatednessCache,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("entities", &self.graph.entity_count())
            .field("cache", &self.cache.stats())
            .finish()
    }
}

impl KnowledgeBase {
    pub fn new(graph: KnowledgeGraph) -> Self {
        Self::with_measure(graph, Box::new(MilneWitten), None)
    }

    pub fn with_measure(
        graph: KnowledgeGraph,
        measure: Box<dyn RelatednessMeasure>,
        cache_capacity: Option<usize>,
    ) -> Self {
        KnowledgeBase {
            graph,
            measure,
            cache: RelatednessCache::new(cache_capacity),
        }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    fn resolve(&self, id: &str) -> Result<u32> {
        self.graph
            .index_of(id)
            .ok_or_else(|| Error::not_found("entity", id))
    }

    pub fn relatedness(&self, a: &str, b: &str) -> Result<f64> {
        let (ia, ib) = (self.resolve(a)?, self.resolve(b)?);
        Ok(self.relatedness_idx(ia, ib))
    }

    pub fn relatedness_idx(&self, a: u32, b: u32) -> f64 {
        self.cache
            .get_or_compute(a, b, || self.measure.score(&self.graph, a, b))
    }

    pub fn relatedness_uncached(&self, a: &str, b: &str) -> Result<f64> {
        let (ia, ib) = (self.resolve(a)?, self.resolve(b)?);
        Ok(self.measure.score(&self.graph, ia, ib))
    }

    /// Relatedness with 0 for entities outside the snapshot.
    pub fn relatedness_or_zero(&self, a: &str, b: &str) -> f64 {
        self.relatedness(a, b).unwrap_or(0.0)
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// W = 10; in-links: x <- {0,1,2,3}, y <- {0,1}, z <- {4,5}.
    fn fixture() -> KnowledgeBase {
        let mut ids: Vec<String> = (0..7).map(|i| format!("n{i}")).collect();
        ids.extend(["x", "y", "z"].map(String::from));
        let l = |s: &str, t: &str| (s.to_string(), t.to_string());
        let links = vec![
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
    fn hand_evaluated_pair() {
        let kb = fixture();
        let expected = 1.0 - 2f64.ln() / 5f64.ln();
        assert!((kb.relatedness("x", "y").unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.5693).abs() < 1e-4);
    }

    #[test]
    fn identical_disjoint_and_empty() {
        let kb = fixture();
        assert_eq!(kb.relatedness("x", "x").unwrap(), 1.0);
        assert_eq!(kb.relatedness("x", "z").unwrap(), 0.0);
        assert_eq!(kb.relatedness("n0", "n0").unwrap(), 0.0);
        assert!(kb.relatedness("x", "missing").is_err());
    }

    #[test]
    fn degenerate_denominator_is_one() {
        assert_eq!(MilneWitten::from_counts(3, 3, 3, 3), 1.0);
        assert_eq!(MilneWitten::from_counts(3, 3, 3, 0), 0.0);
    }

    #[test]
    fn cache_counts_and_unordered_keys() {
        let kb = fixture();
        assert_eq!(
            kb.cache_stats(),
            CacheStats {
                hits: 0,
                misses: 0,
                entries: 0
            }
        );
        kb.relatedness("x", "y").unwrap();
        kb.relatedness("y", "x").unwrap();
        let s = kb.cache_stats();
        assert_eq!((s.hits, s.misses, s.entries), (1, 1, 1));
    }

    #[test]
    fn capped_cache_stops_inserting() {
        let kb = KnowledgeBase::with_measure(fixture().graph.clone(), Box::new(MilneWitten), Some(1));
        kb.relatedness("x", "y").unwrap();
        kb.relatedness("x", "z").unwrap();
        assert_eq!(kb.cache_stats().entries, 1);
    }

    #[test]
    fn snapshot_text_roundtrip_and_errors() {
        let kb = fixture();
        let text = kb.graph().to_text();
        let g = KnowledgeGraph::parse(&text, "mem").unwrap();
        assert_eq!(g.entity_count(), 10);
        assert_eq!(g.links(), kb.graph().links());

        assert!(KnowledgeGraph::parse("E\ta\n", "mem").is_err());
        assert!(KnowledgeGraph::parse("#entities 2\nE\ta\n", "mem").is_err());
        assert!(KnowledgeGraph::parse("#entities 1\nE\ta\nL\ta\tb\n", "mem").is_err());
    }
}
