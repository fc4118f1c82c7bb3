use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use expertfind_core::batch::{batch_evaluate, parse_queries};
use expertfind_core::config::EngineConfig;
use expertfind_core::engine::{Engine, SearchResponse};
use expertfind_core::error::{Error, Result};
use expertfind_core::evaluation::{MetricReport, Qrels};
use expertfind_core::fusion::{fuse, RankedRun};
use expertfind_core::pipeline::{run_index_stage, run_profile_stage};
use expertfind_core::synthetic::{SyntheticCorpus, SyntheticParams};
use expertfind_core::wem::WemProfile;

use crate::args::{Command, ConfigAction, IndexAction, ProfileAction, QueryArgs, SyntheticArgs};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: "<stdout>".into(),
        source,
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("engine types serialize");
    s.push('\n');
    s
}

/// Executes one command, writing its report to `out`.
pub fn execute(command: Command, config: EngineConfig, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Index {
            action: IndexAction::Build,
        } => {
            let s = run_index_stage(&config)?;
            let text = format!(
                "documents\t{}\nauthors\t{}\nassociations\t{}\nauthored_documents\t{}\n\
                 annotations\t{}\nannotated_documents\t{}\n",
                s.stats.n_documents,
                s.stats.n_authors,
                s.stats.n_associations,
                s.stats.docs_with_author,
                s.annotations,
                s.annotated_documents
            );
            emit(out, &text)
        }
        Command::Profile {
            action: ProfileAction::Build,
        } => {
            let s = run_profile_stage(&config)?;
            let text = format!(
                "profiles\t{}\nempty_profiles\t{}\nentities\t{}\nremoved_outliers\t{}\n\
                 outlier_fallbacks\t{}\nembedded_entities\t{}\n",
                s.profiles,
                s.empty_profiles,
                s.entities,
                s.removed_outliers,
                s.outlier_fallbacks,
                s.embedded_entities
            );
            emit(out, &text)
        }
        Command::Profile {
            action: ProfileAction::Show { author, json },
        } => {
            let engine = Engine::open(config)?;
            let summary = engine.author(&author)?;
            let profile = engine.profile(&author)?;
            if json {
                emit(out, &to_json(profile))
            } else {
                emit(out, &render_profile(&summary.display_name, profile))
            }
        }
        Command::Query(args) => query(config, args, out),
        Command::BatchEval(args) => {
            let queries = parse_queries(&read(&args.queries)?, &args.queries.display().to_string())?;
            let qrels = Qrels::parse(&read(&args.qrels)?, &args.qrels.display().to_string())?;
            let strategies = config.batch_strategy_list()?;
            let engine = Engine::open(config)?;
            let outcome = batch_evaluate(&engine, &queries, &qrels, &strategies)?;
            outcome.write_to(&args.out)?;
            emit(out, &outcome.summary_tsv())
        }
        Command::Fuse(args) => {
            let mut inputs = Vec::with_capacity(args.runs.len());
            for p in &args.runs {
                inputs.push(RankedRun::parse_trec(&read(p)?, &p.display().to_string())?);
            }
            let text = fuse_run_files(&inputs, &config)?;
            match &args.out {
                Some(p) => write_file(p, &text),
                None => emit(out, &text),
            }
        }
        Command::Eval(args) => {
            let runs = RankedRun::parse_trec(&read(&args.run)?, &args.run.display().to_string())?;
            let qrels = Qrels::parse(&read(&args.qrels)?, &args.qrels.display().to_string())?;
            emit(out, &MetricReport::evaluate(&runs, &qrels).to_tsv())
        }
        Command::Serve => {
            let engine = Arc::new(Engine::open(config)?);
            let runtime = tokio::runtime::Runtime::new().map_err(|source| Error::Io {
                path: "<runtime>".into(),
                source,
            })?;
            runtime
                .block_on(crate::http::serve(engine))
                .map_err(|source| Error::Io {
                    path: "<listener>".into(),
                    source,
                })
        }
        Command::GenerateSynthetic(args) => generate(&config, &args, out),
        Command::Config {
            action: ConfigAction::Show,
        } => emit(out, &config.to_text()),
    }
}

fn query(config: EngineConfig, args: QueryArgs, out: &mut dyn Write) -> Result<()> {
    let limit = args.limit.unwrap_or(config.result_limit);
    if limit == 0 {
        return Err(Error::InvalidArgument("`--limit` must be at least 1".into()));
    }
    let engine = Engine::open(config)?;
    let strategy = engine.strategy(None)?;
    let response = engine.search(&args.text.join(" "), &strategy, limit)?;
    if args.json {
        emit(out, &to_json(&response))
    } else {
        emit(out, &render_response(&response))
    }
}

fn render_response(r: &SearchResponse) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# strategy\t{}", r.strategy);
    let _ = writeln!(s, "# entities\t{}", r.analysis.entities.join(" "));
    let _ = writeln!(s, "# ranked\t{}", r.total);
    s.push_str("rank\tauthor\tscore\tname\n");
    for res in &r.results {
        let rank = res.rank.map_or_else(|| "-".to_string(), |n| n.to_string());
        let _ = writeln!(s, "{rank}\t{}\t{:.6}\t{}", res.author_id, res.score, res.display_name);
    }
    s
}

fn render_profile(display_name: &str, p: &WemProfile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# author\t{}\t{}", p.author_id, display_name);
    let _ = writeln!(s, "# entities\t{}", p.entities.len());
    let _ = writeln!(s, "# edges\t{}", p.edges.len());
    if p.is_empty() {
        s.push_str("(empty profile)\n");
        return s;
    }
    s.push_str("entity\trelevance\trho\tdocs\n");
    for e in &p.entities {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}\t{}", e.entity_id, e.relevance, e.rho_ae, e.doc_count);
    }
    s
}

/// Fuses per-query runs across files; a query absent from a file counts as
/// an empty run there.
pub fn fuse_run_files(inputs: &[BTreeMap<String, RankedRun>], config: &EngineConfig) -> Result<String> {
    let queries: BTreeSet<&String> = inputs.iter().flat_map(|m| m.keys()).collect();
    let tag = format!("fused-{}", config.fusion);
    let mut text = String::new();
    for q in queries {
        let runs: Vec<RankedRun> = inputs
            .iter()
            .map(|m| m.get(q).cloned().unwrap_or_else(|| RankedRun::empty(q.as_str())))
            .collect();
        text.push_str(&fuse(&runs, config.fusion, config.fusion_options())?.to_trec(&tag));
    }
    Ok(text)
}

fn generate(config: &EngineConfig, args: &SyntheticArgs, out: &mut dyn Write) -> Result<()> {
    let params = SyntheticParams {
        n_authors: args.authors,
        n_topics: args.topics,
        queries_per_topic: args.queries_per_topic,
        seed: config.seed,
        ..SyntheticParams::default()
    };
    let corpus = SyntheticCorpus::generate(&params)?;
    corpus.write_to(&args.dir)?;
    let text = format!(
        "authors\t{}\ndocuments\t{}\nentities\t{}\nqueries\t{}\nconfig\t{}\n",
        corpus.authors.len(),
        corpus.documents.len(),
        corpus.entities.len(),
        corpus.queries.len(),
        args.dir.join("engine.conf").display()
    );
    emit(out, &text)
}
