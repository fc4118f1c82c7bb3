//! Retrieval metrics over ranked author lists, TREC qrels IO and paired
//! significance tests.
//!
//! Conventions follow trec_eval: only queries with at least one relevant
//! author are evaluated, and a query the system answered with nothing scores 0
//! on every metric.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::fusion::RankedRun;

/// Relevance grades of one query, by author id.
pub type Judgments = BTreeMap<String, u32>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, Judgments>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, author_id: &str, grade: u32) {
        self.queries
            .entry(query_id.to_string())
            .or_default()
            .insert(author_id.to_string(), grade);
    }

    pub fn judgments(&self, query_id: &str) -> Option<&Judgments> {
        self.queries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Lines `query_id 0 author_id grade`.
    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (i, line) in content.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 4 {
                return Err(Error::parse(name, i + 1, "expected `query_id 0 author_id grade`"));
            }
            let grade: i64 = f[3]
                .parse()
                .map_err(|_| Error::parse(name, i + 1, format!("bad grade `{}`", f[3])))?;
            if grade < 0 {
                return Err(Error::parse(name, i + 1, "grades must be non-negative"));
            }
            qrels.insert(f[0], f[2], grade as u32);
        }
        Ok(qrels)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (q, js) in &self.queries {
            for (a, g) in js {
                let _ = writeln!(out, "{q} 0 {a} {g}");
            }
        }
        out
    }
}

fn relevant_count(judgments: &Judgments) -> usize {
    judgments.values().filter(|&&g| g > 0).count()
}

fn is_relevant(judgments: &Judgments, author: &str) -> bool {
    judgments.get(author).is_some_and(|&g| g > 0)
}

/// Relevant authors in the top `k`, divided by `k`.
pub fn precision_at_k(run: &RankedRun, judgments: &Judgments, k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be >= 1");
    let hits = run
        .authors()
        .take(k)
        .filter(|a| is_relevant(judgments, a))
        .count();
    hits as f64 / k as f64
}

/// Average precision with the total number of relevant authors as
/// denominator; `None` when the query has no relevant author.
pub fn average_precision(run: &RankedRun, judgments: &Judgments) -> Option<f64> {
    let total = relevant_count(judgments);
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, a) in run.authors().enumerate() {
        if is_relevant(judgments, a) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// 1 / rank of the first relevant author, 0 if none is retrieved.
pub fn reciprocal_rank(run: &RankedRun, judgments: &Judgments) -> f64 {
    run.authors()
        .position(|a| is_relevant(judgments, a))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Mean reciprocal rank over `(run, judgments)` pairs.
pub fn mrr<'a>(pairs: impl IntoIterator<Item = (&'a RankedRun, &'a Judgments)>) -> f64 {
    let (n, sum) = pairs
        .into_iter()
        .fold((0usize, 0.0), |(n, s), (r, j)| (n + 1, s + reciprocal_rank(r, j)));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `g_1 + sum_{i=2..k} g_i / log2(i)`.
pub fn dcg(grades: impl IntoIterator<Item = u32>, k: usize) -> f64 {
    grades
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| {
            if i == 0 {
                g as f64
            } else {
                g as f64 / ((i + 1) as f64).log2()
            }
        })
        .sum()
}

/// DCG@k normalized by the ideal ordering of the judged grades; `None` when
/// the query has no relevant author.
pub fn ndcg_at_k(run: &RankedRun, judgments: &Judgments, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = judgments.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal, k);
    let actual = dcg(
        run.authors().map(|a| judgments.get(a).copied().unwrap_or(0)),
        k,
    );
    Some(actual / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub p5: f64,
    pub p10: f64,
    pub ap: f64,
    pub rr: f64,
    pub ndcg100: f64,
}

impl QueryMetrics {
    pub fn compute(run: &RankedRun, judgments: &Judgments) -> Option<Self> {
        Some(QueryMetrics {
            p5: precision_at_k(run, judgments, 5),
            p10: precision_at_k(run, judgments, 10),
            ap: average_precision(run, judgments)?,
            rr: reciprocal_rank(run, judgments),
            ndcg100: ndcg_at_k(run, judgments, 100)?,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::P5 => self.p5,
            Metric::P10 => self.p10,
            Metric::Map => self.ap,
            Metric::Mrr => self.rr,
            Metric::Ndcg100 => self.ndcg100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    P5,
    P10,
    Map,
    Mrr,
    Ndcg100,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Map, Metric::Mrr, Metric::P5, Metric::P10, Metric::Ndcg100];

    pub fn label(self) -> &'static str {
        match self {
            Metric::P5 => "P@5",
            Metric::P10 => "P@10",
            Metric::Map => "MAP",
            Metric::Mrr => "MRR",
            Metric::Ndcg100 => "NDCG@100",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean: QueryMetrics,
}

impl MetricReport {
    /// Evaluates every judged query with at least one relevant author. A
    /// missing run counts as an empty one.
    pub fn evaluate(runs: &BTreeMap<String, RankedRun>, qrels: &Qrels) -> Self {
        let mut per_query = BTreeMap::new();
        for q in qrels.query_ids() {
            let judgments = qrels.judgments(q).expect("listed query");
            let empty = RankedRun::empty(q);
            let run = runs.get(q).unwrap_or(&empty);
            if let Some(m) = QueryMetrics::compute(run, judgments) {
                per_query.insert(q.to_string(), m);
            }
        }
        let n = per_query.len().max(1) as f64;
        let avg = |f: fn(&QueryMetrics) -> f64| per_query.values().map(f).sum::<f64>() / n;
        let mean = QueryMetrics {
            p5: avg(|m| m.p5),
            p10: avg(|m| m.p10),
            ap: avg(|m| m.ap),
            rr: avg(|m| m.rr),
            ndcg100: avg(|m| m.ndcg100),
        };
        MetricReport { per_query, mean }
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_query.values().map(|m| m.get(metric)).collect()
    }

    /// Tab-separated table, one row per query in id order, then `all`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query");
        for m in Metric::ALL {
            out.push('\t');
            out.push_str(m.label());
        }
        out.push('\n');
        let row = |out: &mut String, name: &str, m: &QueryMetrics| {
            out.push_str(name);
            for metric in Metric::ALL {
                let _ = write!(out, "\t{:.6}", m.get(metric));
            }
            out.push('\n');
        };
        for (q, m) in &self.per_query {
            row(&mut out, q, m);
        }
        row(&mut out, "all", &self.mean);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tails {
    /// H1: mean(a - b) > 0.
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
}

/// Paired t-test on `a - b`. With zero variance of the differences the
/// statistic is degenerate: p = 1 when the mean difference is 0, otherwise
/// p = 0 (two-tailed, or one-tailed with a positive mean) or 1 (one-tailed
/// with a negative mean).
pub fn paired_t_test(a: &[f64], b: &[f64], tails: Tails) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs n >= 2".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            let t = mean.signum() * f64::INFINITY;
            let p = match tails {
                Tails::Two => 0.0,
                Tails::One if mean > 0.0 => 0.0,
                Tails::One => 1.0,
            };
            (t, p)
        };
        return Ok(TTest { t, df, p });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let p = match tails {
        Tails::One => dist.sf(t),
        Tails::Two => 2.0 * dist.sf(t.abs()),
    };
    Ok(TTest {
        t,
        df,
        p: p.clamp(0.0, 1.0),
    })
}
