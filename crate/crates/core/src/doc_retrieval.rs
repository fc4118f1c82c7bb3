//! Full-text retrieval over documents and document-to-author score fusion.
//!
//! Tokens are lowercased alphanumeric runs; no stemming, no stopwords.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fusion::RankedRun;
use crate::text::{escape_field, tokenize, unescape_field};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ScoringScheme {
    TfIdf,
    Bm25 { k1: f64, b: f64 },
    LmDirichlet { mu: f64 },
    LmJelinekMercer { lambda: f64 },
}

impl ScoringScheme {
    pub const DEFAULT_BM25: ScoringScheme = ScoringScheme::Bm25 { k1: 1.2, b: 0.75 };
    pub const DEFAULT_DIRICHLET: ScoringScheme = ScoringScheme::LmDirichlet { mu: 2000.0 };
    pub const DEFAULT_JELINEK_MERCER: ScoringScheme =
        ScoringScheme::LmJelinekMercer { lambda: 0.1 };

    pub fn name(&self) -> &'static str {
        match self {
            ScoringScheme::TfIdf => "tfidf",
            ScoringScheme::Bm25 { .. } => "bm25",
            ScoringScheme::LmDirichlet { .. } => "lm-dirichlet",
            ScoringScheme::LmJelinekMercer { .. } => "lm-jm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoringScheme::TfIdf => true,
            ScoringScheme::Bm25 { k1, b } => k1 >= 0.0 && (0.0..=1.0).contains(&b),
            ScoringScheme::LmDirichlet { mu } => mu > 0.0,
            ScoringScheme::LmJelinekMercer { lambda } => lambda > 0.0 && lambda < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid parameters for {self:?}")))
        }
    }
}

impl fmt::Display for ScoringScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a scheme name with default parameters.
impl FromStr for ScoringScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" | "tf-idf" => Ok(ScoringScheme::TfIdf),
            "bm25" => Ok(ScoringScheme::DEFAULT_BM25),
            "lm-dirichlet" | "dirichlet" | "lmd" => Ok(ScoringScheme::DEFAULT_DIRICHLET),
            "lm-jm" | "jm" | "lmjm" => Ok(ScoringScheme::DEFAULT_JELINEK_MERCER),
            other => Err(Error::InvalidArgument(format!("unknown scoring scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocScore {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Term statistics a scheme needs for one (term, document) pair.
#[derive(Debug, Clone, Copy)]
pub struct TermStats {
    pub tf: f64,
    pub df: f64,
    pub cf: f64,
    pub doc_len: f64,
    pub avg_doc_len: f64,
    pub n_docs: f64,
    pub n_tokens: f64,
}

impl ScoringScheme {
    /// Contribution of one query-term occurrence to a document that contains
    /// the term.
    pub fn term_score(&self, s: TermStats) -> f64 {
        match *self {
            ScoringScheme::TfIdf => s.tf * (s.n_docs / s.df).ln(),
            ScoringScheme::Bm25 { k1, b } => {
                let idf = (1.0 + (s.n_docs - s.df + 0.5) / (s.df + 0.5)).ln();
                let norm = k1 * (1.0 - b + b * s.doc_len / s.avg_doc_len);
                idf * s.tf * (k1 + 1.0) / (s.tf + norm)
            }
            ScoringScheme::LmDirichlet { mu } => {
                let p = s.cf / s.n_tokens;
                let v = (1.0 + s.tf / (mu * p)).ln() + (mu / (s.doc_len + mu)).ln();
                v.max(0.0)
            }
            ScoringScheme::LmJelinekMercer { lambda } => {
                let p = s.cf / s.n_tokens;
                (1.0 + ((1.0 - lambda) * s.tf / s.doc_len) / (lambda * p)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// Inverted index over the title+body text of every corpus document.
#[derive(Debug, Clone, PartialEq)]
pub struct TextIndex {
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    n_tokens: u64,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl TextIndex {
    pub fn build(corpus: &Corpus) -> Self {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(corpus.documents().len());
        let mut doc_len = Vec::with_capacity(corpus.documents().len());
        let mut n_tokens = 0u64;
        for (i, doc) in corpus.documents().iter().enumerate() {
            let tokens = tokenize(&doc.full_text());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    tf: count,
                });
            }
            doc_ids.push(doc.doc_id.clone());
            doc_len.push(tokens.len() as u32);
            n_tokens += tokens.len() as u64;
        }
        TextIndex {
            doc_ids,
            doc_len,
            n_tokens,
            postings,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Ranked documents containing at least one query term, at most
    /// `max_docs`. Documents matching no term are never retrieved; a matching
    /// document may still score 0 (tf-idf on a term present everywhere).
    pub fn score_documents(
        &self,
        query: &str,
        scheme: ScoringScheme,
        max_docs: usize,
    ) -> Result<Vec<DocScore>> {
        scheme.validate()?;
        let terms = tokenize(query);
        if terms.is_empty() || self.doc_ids.is_empty() {
            return Ok(Vec::new());
        }
        let avg = self.n_tokens as f64 / self.doc_ids.len() as f64;
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let cf: u64 = list.iter().map(|p| p.tf as u64).sum();
            for p in list {
                let stats = TermStats {
                    tf: p.tf as f64,
                    df: list.len() as f64,
                    cf: cf as f64,
                    doc_len: self.doc_len[p.doc as usize] as f64,
                    avg_doc_len: avg,
                    n_docs: self.doc_ids.len() as f64,
                    n_tokens: self.n_tokens as f64,
                };
                *acc.entry(p.doc).or_default() += scheme.term_score(stats);
            }
        }
        let mut scored: Vec<(u32, f64)> = acc.into_iter().collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        scored.truncate(max_docs);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (d, score))| DocScore {
                doc_id: self.doc_ids[d as usize].clone(),
                score,
                rank: i + 1,
            })
            .collect())
    }

    /// Text form: `#docs N #tokens T`, then `D doc_id length` and
    /// `T term doc:tf ...` lines. Document references are positions.
    pub fn to_text(&self) -> String {
        let mut out = format!("#docs {} #tokens {}\n", self.doc_ids.len(), self.n_tokens);
        for (id, len) in self.doc_ids.iter().zip(&self.doc_len) {
            out.push_str(&format!("D\t{}\t{len}\n", escape_field(id)));
        }
        for (term, list) in &self.postings {
            out.push_str("T\t");
            out.push_str(term);
            for p in list {
                out.push_str(&format!("\t{}:{}", p.doc, p.tf));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(content: &str, name: &str) -> Result<Self> {
        let mut doc_ids = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings = BTreeMap::new();
        let mut n_tokens = None;
        for (i, line) in content.lines().enumerate() {
            let err = |r: &str| Error::parse(name, i + 1, r);
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                match f.as_slice() {
                    ["docs", _, "#tokens", t] => {
                        n_tokens = Some(t.parse().map_err(|_| err("bad token count"))?)
                    }
                    _ => return Err(err("bad header")),
                }
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "D" if f.len() == 3 => {
                    doc_ids.push(unescape_field(f[1]).ok_or_else(|| err("bad escape"))?);
                    doc_len.push(f[2].parse().map_err(|_| err("bad length"))?);
                }
                "T" if f.len() >= 3 => {
                    let list = f[2..]
                        .iter()
                        .map(|p| {
                            let (d, tf) = p.split_once(':').ok_or_else(|| err("bad posting"))?;
                            Ok(Posting {
                                doc: d.parse().map_err(|_| err("bad posting"))?,
                                tf: tf.parse().map_err(|_| err("bad posting"))?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    postings.insert(f[1].to_string(), list);
                }
                _ => return Err(err("unrecognized line")),
            }
        }
        Ok(TextIndex {
            doc_ids,
            doc_len,
            n_tokens: n_tokens.ok_or_else(|| Error::parse(name, 1, "missing header"))?,
            postings,
        })
    }
}

/// Document-to-author score fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DocFusion {
    /// Mean of the top-k scores (divides by k).
    MeanK(usize),
    Max,
    /// Sum of reciprocal global ranks.
    Rr,
    /// Score sum scaled by |D_{a,q}| / |D_a|.
    CombNz,
}

impl DocFusion {
    pub fn name(&self) -> &'static str {
        match self {
            DocFusion::MeanK(_) => "meank",
            DocFusion::Max => "max",
            DocFusion::Rr => "rr",
            DocFusion::CombNz => "combnz",
        }
    }

    /// Parses `meank`, `meank:K`, `max`, `rr`, `combnz`.
    pub fn parse(s: &str, default_k: usize) -> Result<Self> {
        match s {
            "max" => Ok(DocFusion::Max),
            "rr" => Ok(DocFusion::Rr),
            "combnz" => Ok(DocFusion::CombNz),
            "meank" => Ok(DocFusion::MeanK(default_k)),
            other => match other.strip_prefix("meank:").or_else(|| other.strip_prefix("mean")) {
                Some(k) => k
                    .parse()
                    .map(DocFusion::MeanK)
                    .map_err(|_| Error::InvalidArgument(format!("bad meank parameter `{k}`"))),
                None => Err(Error::InvalidArgument(format!("unknown doc fusion `{other}`"))),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DocFusion::MeanK(0) => Err(Error::InvalidArgument("meank needs k >= 1".into())),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for DocFusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocFusion::MeanK(k) => write!(f, "meank:{k}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Per-document addends of a fused author score, in input order. They sum to
/// the value [`fuse_doc_scores`] returns (for `max`, only the winning document
/// is non-zero).
pub fn doc_contributions(docs: &[DocScore], method: DocFusion, author_doc_count: usize) -> Result<Vec<f64>> {
    method.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidArgument(
            "document fusion needs at least one retrieved document".into(),
        ));
    }
    Ok(match method {
        DocFusion::Rr => docs.iter().map(|d| 1.0 / d.rank as f64).collect(),
        DocFusion::Max => {
            let best = docs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.score.total_cmp(&b.1.score).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("non-empty");
            (0..docs.len())
                .map(|i| if i == best { docs[i].score } else { 0.0 })
                .collect()
        }
        DocFusion::MeanK(k) => {
            let mut order: Vec<usize> = (0..docs.len()).collect();
            order.sort_by(|&a, &b| docs[b].score.total_cmp(&docs[a].score).then(a.cmp(&b)));
            let mut out = vec![0.0; docs.len()];
            for &i in order.iter().take(k) {
                out[i] = docs[i].score / k as f64;
            }
            out
        }
        DocFusion::CombNz => {
            let factor = docs.len() as f64 / author_doc_count.max(docs.len()) as f64;
            docs.iter().map(|d| factor * d.score).collect()
        }
    })
}

/// Author score from the retrieved documents D_{a,q} of that author.
pub fn fuse_doc_scores(docs: &[DocScore], method: DocFusion, author_doc_count: usize) -> Result<f64> {
    let parts = doc_contributions(docs, method, author_doc_count)?;
    Ok(match method {
        DocFusion::Max => docs.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max),
        _ => parts.iter().sum(),
    })
}

/// Retrieved documents grouped by author, each group in rank order.
/// Author-less documents are dropped.
pub fn group_by_author<'a>(
    corpus: &Corpus,
    docs: &'a [DocScore],
) -> BTreeMap<String, Vec<&'a DocScore>> {
    let mut groups: BTreeMap<String, Vec<&DocScore>> = BTreeMap::new();
    for d in docs {
        if let Some(doc) = corpus.document(&d.doc_id) {
            for a in &doc.author_ids {
                groups.entry(a.clone()).or_default().push(d);
            }
        }
    }
    groups
}

pub fn rank_authors_doc_centric(
    index: &TextIndex,
    corpus: &Corpus,
    query_id: &str,
    query: &str,
    scheme: ScoringScheme,
    fusion: DocFusion,
    max_docs: usize,
) -> Result<RankedRun> {
    fusion.validate()?;
    let docs = index.score_documents(query, scheme, max_docs)?;
    let groups = group_by_author(corpus, &docs);
    let mut scores = Vec::with_capacity(groups.len());
    for (author, list) in groups {
        let owned: Vec<DocScore> = list.into_iter().cloned().collect();
        let s = fuse_doc_scores(&owned, fusion, corpus.doc_count(&author))?;
        scores.push((author, s));
    }
    Ok(RankedRun::from_scores(query_id, scores))
}
