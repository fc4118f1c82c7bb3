//! Ranked author lists and data fusion across several of them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunEntry {
    pub author_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Authors for one query ordered by score descending, ties by author id
/// ascending, with consecutive 1-based ranks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRun {
    pub query_id: String,
    pub entries: Vec<RunEntry>,
}

impl RankedRun {
    pub fn empty(query_id: impl Into<String>) -> Self {
        RankedRun {
            query_id: query_id.into(),
            entries: Vec::new(),
        }
    }

    /// Sorts and ranks `(author_id, score)` pairs. Duplicate authors keep the
    /// first score seen.
    pub fn from_scores(
        query_id: impl Into<String>,
        scores: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let mut seen = BTreeSet::new();
        let mut pairs: Vec<(String, f64)> = scores
            .into_iter()
            .filter(|(a, _)| seen.insert(a.clone()))
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RankedRun {
            query_id: query_id.into(),
            entries: pairs
                .into_iter()
                .enumerate()
                .map(|(i, (author_id, score))| RunEntry {
                    author_id,
                    score,
                    rank: i + 1,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncate(&mut self, limit: usize) {
        self.entries.truncate(limit);
    }

    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.author_id.as_str())
    }

    pub fn rank_of(&self, author_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.author_id == author_id)
            .map(|e| e.rank)
    }

    /// TREC run lines: `query_id Q0 author_id rank score tag`.
    pub fn to_trec(&self, tag: &str) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{} Q0 {} {} {} {}\n",
                self.query_id, e.author_id, e.rank, e.score, tag
            ));
        }
        out
    }

    /// Parses TREC run lines into one run per query. Entries are re-sorted by
    /// score then author id and re-ranked; the rank column is ignored.
    pub fn parse_trec(content: &str, name: &str) -> Result<BTreeMap<String, RankedRun>> {
        let mut by_query: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 6 {
                return Err(Error::parse(
                    name,
                    i + 1,
                    "expected `query_id Q0 author_id rank score tag`",
                ));
            }
            let score: f64 = f[4]
                .parse()
                .map_err(|_| Error::parse(name, i + 1, format!("bad score `{}`", f[4])))?;
            by_query
                .entry(f[0].to_string())
                .or_default()
                .push((f[2].to_string(), score));
        }
        Ok(by_query
            .into_iter()
            .map(|(q, pairs)| {
                let run = RankedRun::from_scores(q.clone(), pairs);
                (q, run)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    CombSum,
    CombMin,
    CombMax,
    /// Product of reciprocal ranks.
    Rrm,
    /// Reciprocal of the rank sum.
    Rrs,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 5] = [
        FusionMethod::CombSum,
        FusionMethod::CombMin,
        FusionMethod::CombMax,
        FusionMethod::Rrm,
        FusionMethod::Rrs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::CombSum => "combsum",
            FusionMethod::CombMin => "combmin",
            FusionMethod::CombMax => "combmax",
            FusionMethod::Rrm => "rrm",
            FusionMethod::Rrs => "rrs",
        }
    }

    pub fn is_rank_based(self) -> bool {
        matches!(self, FusionMethod::Rrm | FusionMethod::Rrs)
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown fusion method `{s}`")))
    }
}

/// How rank-based methods treat an author missing from one input run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingRank {
    /// Rank = that run's length + 1.
    #[default]
    LengthPlusOne,
    /// Leave the run out of that author's product or sum.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionOptions {
    /// Min-max normalize each run before score-based fusion.
    pub normalize: bool,
    pub missing_rank: MissingRank,
}

impl Default for FusionOptions {
    fn default() -> Self {
        FusionOptions {
            normalize: true,
            missing_rank: MissingRank::LengthPlusOne,
        }
    }
}

/// Min-max normalized scores of a run; a constant run maps to 1.
pub fn min_max_normalized(run: &RankedRun) -> HashMap<&str, f64> {
    let (lo, hi) = run
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.score), hi.max(e.score))
        });
    run.entries
        .iter()
        .map(|e| {
            let v = if hi > lo { (e.score - lo) / (hi - lo) } else { 1.0 };
            (e.author_id.as_str(), v)
        })
        .collect()
}

/// Combines runs for the same query. Score-based methods count an absent
/// author as score 0.
pub fn fuse(runs: &[RankedRun], method: FusionMethod, options: FusionOptions) -> Result<RankedRun> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidArgument("fusion needs at least one run".into()))?;
    if let Some(r) = runs.iter().find(|r| r.query_id != first.query_id) {
        return Err(Error::InvalidArgument(format!(
            "cannot fuse runs for different queries (`{}` vs `{}`)",
            first.query_id, r.query_id
        )));
    }
    let universe: BTreeSet<&str> = runs.iter().flat_map(|r| r.authors()).collect();

    let fused: Vec<(String, f64)> = if method.is_rank_based() {
        let ranks: Vec<HashMap<&str, usize>> = runs
            .iter()
            .map(|r| r.entries.iter().map(|e| (e.author_id.as_str(), e.rank)).collect())
            .collect();
        universe
            .iter()
            .map(|&a| {
                let ranks_of_a: Vec<f64> = runs
                    .iter()
                    .zip(&ranks)
                    .filter_map(|(run, m)| match (m.get(a), options.missing_rank) {
                        (Some(&r), _) => Some(r as f64),
                        (None, MissingRank::LengthPlusOne) => Some((run.len() + 1) as f64),
                        (None, MissingRank::Skip) => None,
                    })
                    .collect();
                let score = match method {
                    FusionMethod::Rrm => ranks_of_a.iter().map(|r| 1.0 / r).product(),
                    _ => 1.0 / ranks_of_a.iter().sum::<f64>(),
                };
                (a.to_string(), score)
            })
            .collect()
    } else {
        let scores: Vec<HashMap<&str, f64>> = runs
            .iter()
            .map(|r| {
                if options.normalize {
                    min_max_normalized(r)
                } else {
                    r.entries.iter().map(|e| (e.author_id.as_str(), e.score)).collect()
                }
            })
            .collect();
        universe
            .iter()
            .map(|&a| {
                let vals = scores.iter().map(|m| m.get(a).copied().unwrap_or(0.0));
                let score = match method {
                    FusionMethod::CombSum => vals.sum(),
                    FusionMethod::CombMin => vals.fold(f64::INFINITY, f64::min),
                    _ => vals.fold(f64::NEG_INFINITY, f64::max),
                };
                (a.to_string(), score)
            })
            .collect()
    };
    Ok(RankedRun::from_scores(first.query_id.clone(), fused))
}
