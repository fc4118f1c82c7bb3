//! Direct reimplementations used as references. Nothing here calls the
//! library's scoring code.

use std::collections::{BTreeMap, BTreeSet};

/// Dense personalized PageRank iterated until the update is below 1e-15.
/// Nodes without incident weight send their mass to the teleport vector.
pub fn ppr(n: usize, edges: &[(usize, usize, f64)], teleport: &[f64], damping: f64) -> Vec<f64> {
    let mut w = vec![vec![0.0; n]; n];
    for &(u, v, x) in edges {
        if u != v && x > 0.0 {
            w[u][v] += x;
            w[v][u] += x;
        }
    }
    let total: f64 = teleport.iter().sum();
    let t: Vec<f64> = if total > 0.0 {
        teleport.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    let deg: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let mut r = t.clone();
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for j in 0..n {
            let mut flow = 0.0;
            for i in 0..n {
                if deg[i] > 0.0 {
                    flow += r[i] * w[i][j] / deg[i];
                } else {
                    flow += r[i] * t[j];
                }
            }
            next[j] = (1.0 - damping) * t[j] + damping * flow;
        }
        let delta: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = next;
        if delta < 1e-15 {
            break;
        }
    }
    r
}

/// In-link overlap relatedness from explicit in-link sets over `w` entities.
pub fn milne_witten(w: usize, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let common = a.intersection(b).count();
    if a.is_empty() || b.is_empty() || common == 0 {
        return 0.0;
    }
    let big = a.len().max(b.len()) as f64;
    let small = a.len().min(b.len()) as f64;
    let den = (w as f64).ln() - small.ln();
    if den <= 0.0 {
        return 1.0;
    }
    let v = 1.0 - (big.ln() - (common as f64).ln()) / den;
    v.clamp(0.0, 1.0)
}

pub fn in_link_sets(n: usize, links: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    let mut sets = vec![BTreeSet::new(); n];
    for &(s, t) in links {
        if s != t {
            sets[t].insert(s);
        }
    }
    sets
}

pub struct Collection<'a> {
    pub docs: Vec<Vec<&'a str>>,
}

impl Collection<'_> {
    fn tf(&self, d: usize, t: &str) -> f64 {
        self.docs[d].iter().filter(|w| **w == t).count() as f64
    }

    fn df(&self, t: &str) -> f64 {
        self.docs.iter().filter(|d| d.contains(&t)).count() as f64
    }

    fn cf(&self, t: &str) -> f64 {
        (0..self.docs.len()).map(|d| self.tf(d, t)).sum()
    }

    fn total_tokens(&self) -> f64 {
        self.docs.iter().map(|d| d.len()).sum::<usize>() as f64
    }

    /// Score of every document containing at least one query term.
    pub fn score(&self, query: &[&str], scheme: &Scheme) -> BTreeMap<usize, f64> {
        let n = self.docs.len() as f64;
        let c = self.total_tokens();
        let avgdl = c / n;
        let mut out = BTreeMap::new();
        for d in 0..self.docs.len() {
            let dl = self.docs[d].len() as f64;
            let mut s = 0.0;
            let mut matched = false;
            for &t in query {
                let tf = self.tf(d, t);
                if tf == 0.0 {
                    continue;
                }
                matched = true;
                let df = self.df(t);
                let p = self.cf(t) / c;
                s += match *scheme {
                    Scheme::TfIdf => tf * (n / df).ln(),
                    Scheme::Bm25 { k1, b } => {
                        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                        idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))
                    }
                    Scheme::Dirichlet { mu } => {
                        ((1.0 + tf / (mu * p)).ln() + (mu / (dl + mu)).ln()).max(0.0)
                    }
                    Scheme::JelinekMercer { lambda } => {
                        (1.0 + ((1.0 - lambda) * tf / dl) / (lambda * p)).ln()
                    }
                };
            }
            if matched {
                out.insert(d, s);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Scheme {
    TfIdf,
    Bm25 { k1: f64, b: f64 },
    Dirichlet { mu: f64 },
    JelinekMercer { lambda: f64 },
}

/// `(global rank, score)` of an author's retrieved documents.
pub fn doc_fusion(docs: &[(usize, f64)], method: &str, k: usize, author_docs: usize) -> f64 {
    let mut scores: Vec<f64> = docs.iter().map(|d| d.1).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    match method {
        "meank" => scores.iter().take(k).sum::<f64>() / k as f64,
        "max" => scores[0],
        "rr" => docs.iter().map(|d| 1.0 / d.0 as f64).sum(),
        "combnz" => docs.len() as f64 / author_docs as f64 * scores.iter().sum::<f64>(),
        _ => unreachable!(),
    }
}

pub fn scale(name: &str, x: f64) -> f64 {
    match name {
        "identity" => x,
        "sigmoid" => 1.0 / (1.0 + (-x).exp()),
        "sqrt" => x.sqrt(),
        "square" => x * x,
        _ => unreachable!(),
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ranks by score descending, ties by id ascending (1-based).
pub fn ranks(run: &[(String, f64)]) -> BTreeMap<String, usize> {
    let mut sorted: Vec<&(String, f64)> = run.iter().collect();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    sorted.iter().enumerate().map(|(i, (a, _))| (a.clone(), i + 1)).collect()
}

/// Rank and score fusion over runs of `(author, score)`.
pub fn fusion(runs: &[Vec<(String, f64)>], method: &str) -> BTreeMap<String, f64> {
    let universe: BTreeSet<String> = runs.iter().flatten().map(|(a, _)| a.clone()).collect();
    let rank_maps: Vec<BTreeMap<String, usize>> = runs.iter().map(|r| ranks(r)).collect();
    let norm: Vec<BTreeMap<String, f64>> = runs
        .iter()
        .map(|r| {
            let lo = r.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
            let hi = r.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            r.iter()
                .map(|(a, s)| (a.clone(), if hi > lo { (s - lo) / (hi - lo) } else { 1.0 }))
                .collect()
        })
        .collect();
    universe
        .into_iter()
        .map(|a| {
            let rk: Vec<f64> = runs
                .iter()
                .zip(&rank_maps)
                .map(|(r, m)| m.get(&a).map_or((r.len() + 1) as f64, |&x| x as f64))
                .collect();
            let sc: Vec<f64> = norm.iter().map(|m| m.get(&a).copied().unwrap_or(0.0)).collect();
            let v = match method {
                "combsum" => sc.iter().sum(),
                "combmin" => sc.iter().copied().fold(f64::INFINITY, f64::min),
                "combmax" => sc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "rrm" => rk.iter().map(|r| 1.0 / r).product(),
                "rrs" => 1.0 / rk.iter().sum::<f64>(),
                _ => unreachable!(),
            };
            (a, v)
        })
        .collect()
}
