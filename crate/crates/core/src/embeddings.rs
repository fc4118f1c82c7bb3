//! Entity embeddings: loading, saving, cosine similarity and DeepWalk-style
//! training (truncated random walks + CBOW with negative sampling).
//!
//! File format:
//!
//! ```text
//! #dim 100 #count N
//! entity_id f1 f2 ... f100
//! ```

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knowledge::KnowledgeGraph;

pub const EMBEDDING_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingModel {
    pub fn new(dim: usize) -> Self {
        EmbeddingModel {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, id: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite component in vector for `{id}`"
            )));
        }
        match self.index.get(id) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(id.to_string(), self.ids.len());
                self.ids.push(id.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index
            .get(id)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, &path.display().to_string())
    }

    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut lines = content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(name, 1, "missing `#dim D #count N` header"))?;
        let (dim, count) = parse_header(header).ok_or_else(|| {
            Error::parse(name, 1, "header must read `#dim D #count N`")
        })?;
        let mut model = EmbeddingModel::new(dim);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let id = parts.next().expect("non-empty line");
            let values = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(name, i + 1, format!("bad component: {e}")))?;
            model.insert(id, &values)?;
        }
        if model.len() != count {
            return Err(Error::parse(
                name,
                1,
                format!("header declares {count} vectors, found {}", model.len()),
            ));
        }
        Ok(model)
    }

    /// Shortest round-trip float formatting, so save/load is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = format!("#dim {} #count {}\n", self.dim, self.ids.len());
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for x in &self.data[i * self.dim..(i + 1) * self.dim] {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let t: Vec<&str> = line.split_whitespace().collect();
    match t.as_slice() {
        ["#dim", d, "#count", n] => Some((d.parse().ok()?, n.parse().ok()?)),
        _ => None,
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negative_samples: usize,
    pub dim: usize,
    pub rng_seed: u64,
    /// Generate walks on the rayon pool. Each walk has its own derived seed,
    /// so the output is identical to the sequential mode.
    pub parallel_walks: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 40,
            window: 5,
            epochs: 5,
            learning_rate: 0.025,
            negative_samples: 5,
            dim: EMBEDDING_DIM,
            rng_seed: 42,
            parallel_walks: false,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("epochs", self.epochs),
            ("dim", self.dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

fn walk_seed(seed: u64, round: usize, node: usize) -> u64 {
    // splitmix64 over the combined coordinates
    let mut z = seed
        ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (node as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_walks(adj: &[Vec<u32>], config: &WalkConfig) -> Vec<Vec<u32>> {
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut jobs = Vec::with_capacity(adj.len() * config.walks_per_node);
    for round in 0..config.walks_per_node {
        let mut nodes: Vec<usize> = (0..adj.len()).filter(|&n| !adj[n].is_empty()).collect();
        nodes.shuffle(&mut order_rng);
        jobs.extend(nodes.into_iter().map(|n| (round, n)));
    }
    let walk = |&(round, start): &(usize, usize)| {
        let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(config.rng_seed, round, start));
        let mut path = Vec::with_capacity(config.walk_length);
        path.push(start as u32);
        while path.len() < config.walk_length {
            let cur = *path.last().expect("non-empty") as usize;
            match adj[cur].choose(&mut rng) {
                Some(&next) => path.push(next),
                None => break,
            }
        }
        path
    };
    if config.parallel_walks {
        jobs.par_iter().map(walk).collect()
    } else {
        jobs.iter().map(walk).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Trains one vector per entity of `graph` (links taken as undirected).
/// Isolated entities keep their random initialization.
pub fn train_deepwalk(graph: &KnowledgeGraph, config: &WalkConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    let n = graph.entity_count();
    let dim = config.dim;
    let adj = graph.undirected_adjacency();
    let isolated = adj.iter().filter(|a| a.is_empty()).count();
    if isolated > 0 {
        log::warn!("{isolated} isolated entities keep their initial vectors");
    }
    let walks = random_walks(&adj, config);

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1));
    let mut input: Vec<f64> = (0..n * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; n * dim];

    // unigram^0.75 noise distribution over walk occurrences
    let mut freq = vec![0.0f64; n];
    for w in &walks {
        for &v in w {
            freq[v as usize] += 1.0;
        }
    }
    let mut cumulative = Vec::with_capacity(n);
    let mut total = 0.0;
    for f in &freq {
        total += f.powf(0.75);
        cumulative.push(total);
    }

    let positions: usize = walks.iter().map(Vec::len).sum();
    let total_steps = (positions * config.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut hidden = vec![0.0; dim];
    let mut grad = vec![0.0; dim];

    for _ in 0..config.epochs {
        for walk in &walks {
            for pos in 0..walk.len() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps))
                    .max(config.learning_rate * 1e-4);
                step += 1;
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(walk.len());
                let context: Vec<usize> = (lo..hi)
                    .filter(|&c| c != pos)
                    .map(|c| walk[c] as usize)
                    .collect();
                if context.is_empty() || total == 0.0 {
                    continue;
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &c in &context {
                    for (h, x) in hidden.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
                        *h += x;
                    }
                }
                let inv = 1.0 / context.len() as f64;
                hidden.iter_mut().for_each(|h| *h *= inv);
                grad.iter_mut().for_each(|g| *g = 0.0);

                let focus = walk[pos] as usize;
                for s in 0..=config.negative_samples {
                    let (target, label) = if s == 0 {
                        (focus, 1.0)
                    } else {
                        let r = rng.gen::<f64>() * total;
                        let t = cumulative.partition_point(|&c| c <= r).min(n - 1);
                        if t == focus {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let out = &mut output[target * dim..(target + 1) * dim];
                    let dot: f64 = hidden.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                    let g = (label - sigmoid(dot)) * lr;
                    for k in 0..dim {
                        grad[k] += g * out[k];
                        out[k] += g * hidden[k];
                    }
                }
                for &c in &context {
                    for (x, g) in input[c * dim..(c + 1) * dim].iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }

    let mut model = EmbeddingModel::new(dim);
    for (i, id) in graph.entity_ids().iter().enumerate() {
        model.insert(id, &input[i * dim..(i + 1) * dim])?;
    }
    Ok(model)
}
