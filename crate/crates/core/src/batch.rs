//! Batch evaluation: one run per strategy over a query set, a metric report
//! per run, and pairwise paired t-tests between strategies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::evaluation::{paired_t_test, Metric, MetricReport, Qrels, TTest, Tails};
use crate::fusion::RankedRun;
use crate::strategy::Strategy;
use crate::text::{escape_field, unescape_field};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
}

/// Lines `query_id TAB text`.
pub fn parse_queries(content: &str, name: &str) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(name, i + 1, "expected `query_id TAB text`"))?;
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::parse(name, i + 1, "query ids must be non-empty without whitespace"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Duplicate {
                kind: "query",
                id: id.to_string(),
            });
        }
        let text = unescape_field(text).ok_or_else(|| Error::parse(name, i + 1, "bad escape"))?;
        out.push(Query {
            query_id: id.to_string(),
            text,
        });
    }
    Ok(out)
}

pub fn queries_to_text(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        let _ = writeln!(out, "{}\t{}", q.query_id, escape_field(&q.text));
    }
    out
}

/// Whitespace-free run tag for a strategy.
pub fn run_tag(strategy: &Strategy) -> String {
    strategy.to_string().replace(' ', "")
}

fn file_stem(index: usize, strategy: &Strategy) -> String {
    let slug: String = run_tag(strategy)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{:02}_{}", index + 1, slug.trim_matches('_'))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub runs: BTreeMap<String, RankedRun>,
    pub report: MetricReport,
}

impl StrategyOutcome {
    pub fn run_text(&self) -> String {
        let tag = run_tag(&self.strategy);
        self.runs.values().map(|r| r.to_trec(&tag)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub metric: &'static str,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub outcomes: Vec<StrategyOutcome>,
    pub tests: Vec<PairwiseTest>,
}

/// Runs every strategy on every query. Queries are evaluated in parallel;
/// results are collected in query order, so output is deterministic.
pub fn batch_evaluate(
    engine: &Engine,
    queries: &[Query],
    qrels: &Qrels,
    strategies: &[Strategy],
) -> Result<BatchOutcome> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies to evaluate".into()));
    }
    let mut outcomes = Vec::with_capacity(strategies.len());
    for s in strategies {
        let runs: Vec<RankedRun> = queries
            .par_iter()
            .map(|q| engine.rank(&q.query_id, &q.text, s))
            .collect::<Result<_>>()?;
        let runs: BTreeMap<String, RankedRun> = runs
            .into_iter()
            .map(|r| (r.query_id.clone(), r))
            .collect();
        let report = MetricReport::evaluate(&runs, qrels);
        outcomes.push(StrategyOutcome {
            strategy: s.clone(),
            runs,
            report,
        });
    }
    let mut tests = Vec::new();
    let evaluated = outcomes[0].report.per_query.len();
    if evaluated >= 2 {
        for i in 0..outcomes.len() {
            for j in i + 1..outcomes.len() {
                for metric in Metric::ALL {
                    let test = paired_t_test(
                        &outcomes[i].report.values(metric),
                        &outcomes[j].report.values(metric),
                        Tails::Two,
                    )?;
                    tests.push(PairwiseTest {
                        a: outcomes[i].strategy.to_string(),
                        b: outcomes[j].strategy.to_string(),
                        metric: metric.label(),
                        test,
                    });
                }
            }
        }
    } else {
        log::warn!("{evaluated} evaluated queries; significance tests need at least 2");
    }
    Ok(BatchOutcome { outcomes, tests })
}

impl BatchOutcome {
    /// Mean metrics, one row per strategy.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("strategy");
        for m in Metric::ALL {
            out.push('\t');
            out.push_str(m.label());
        }
        out.push('\n');
        for o in &self.outcomes {
            out.push_str(&o.strategy.to_string());
            for m in Metric::ALL {
                let _ = write!(out, "\t{:.6}", o.report.mean.get(m));
            }
            out.push('\n');
        }
        out
    }

    /// Two-tailed paired t-tests between every pair of strategies.
    pub fn tests_tsv(&self) -> String {
        let mut out = String::from("a\tb\tmetric\tt\tdf\tp\n");
        for t in &self.tests {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}\t{:.6}",
                t.a, t.b, t.metric, t.test.t, t.test.df, t.test.p
            );
        }
        out
    }

    /// Writes `runs/`, `metrics/`, `summary.tsv` and `ttests.tsv` under
    /// `dir` and returns the written paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let runs_dir = dir.join("runs");
        let metrics_dir = dir.join("metrics");
        for d in [&runs_dir, &metrics_dir] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        let mut written = Vec::new();
        let mut put = |path: PathBuf, content: String| -> Result<()> {
            fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        for (i, o) in self.outcomes.iter().enumerate() {
            let stem = file_stem(i, &o.strategy);
            put(runs_dir.join(format!("{stem}.run")), o.run_text())?;
            put(metrics_dir.join(format!("{stem}.tsv")), o.report.to_tsv())?;
        }
        put(dir.join("summary.tsv"), self.summary_tsv())?;
        put(dir.join("ttests.tsv"), self.tests_tsv())?;
        Ok(written)
    }
}
